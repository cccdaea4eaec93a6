#pragma once

// Evaluation metrics: PSNR (MAX=1, capped at 99 dB), SSIM (11x11 Gaussian
// window, standard constants, valid-region aggregation) and mask IoU.

#include <cmath>
#include <vector>

#include "hvtr/image_io.hpp"

namespace hvtr {

inline double psnr(const Image& a, const Image& b) {
  check(a.width == b.width && a.height == b.height && a.channels == b.channels,
        "psnr: image shape mismatch");
  double mse = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = (double)a.data[i] - b.data[i];
    mse += d * d;
  }
  mse /= (double)a.data.size();
  if (mse < 1e-10) return 99.0;
  return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

inline double ssim(const Image& a, const Image& b) {
  check(a.width == b.width && a.height == b.height && a.channels == b.channels,
        "ssim: image shape mismatch");
  const int win = 11, half = win / 2;
  check(a.width >= win && a.height >= win, "ssim: image smaller than the 11x11 window");
  double kernel[11];
  {
    const double sigma = 1.5;
    double s = 0;
    for (int i = 0; i < win; ++i) {
      kernel[i] = std::exp(-0.5 * (i - half) * (i - half) / (sigma * sigma));
      s += kernel[i];
    }
    for (int i = 0; i < win; ++i) kernel[i] /= s;
  }
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;

  double total = 0;
  int count = 0;
  for (int ch = 0; ch < a.channels; ++ch) {
    // separable Gaussian moments over the valid region
    const int W = a.width, H = a.height;
    auto blur = [&](auto&& fetch, std::vector<double>& out) {
      std::vector<double> tmp((size_t)W * H);
      for (int y = 0; y < H; ++y)
        for (int x = half; x < W - half; ++x) {
          double s = 0;
          for (int k = 0; k < win; ++k) s += kernel[k] * fetch(x - half + k, y);
          tmp[(size_t)y * W + x] = s;
        }
      out.assign((size_t)W * H, 0.0);
      for (int y = half; y < H - half; ++y)
        for (int x = half; x < W - half; ++x) {
          double s = 0;
          for (int k = 0; k < win; ++k) s += kernel[k] * tmp[(size_t)(y - half + k) * W + x];
          out[(size_t)y * W + x] = s;
        }
    };
    std::vector<double> mu_a, mu_b, aa, bb, ab;
    blur([&](int x, int y) { return (double)a.at(x, y, ch); }, mu_a);
    blur([&](int x, int y) { return (double)b.at(x, y, ch); }, mu_b);
    blur([&](int x, int y) { return (double)a.at(x, y, ch) * a.at(x, y, ch); }, aa);
    blur([&](int x, int y) { return (double)b.at(x, y, ch) * b.at(x, y, ch); }, bb);
    blur([&](int x, int y) { return (double)a.at(x, y, ch) * b.at(x, y, ch); }, ab);
    for (int y = half; y < H - half; ++y)
      for (int x = half; x < W - half; ++x) {
        const size_t p = (size_t)y * W + x;
        const double va = aa[p] - mu_a[p] * mu_a[p];
        const double vb = bb[p] - mu_b[p] * mu_b[p];
        const double cov = ab[p] - mu_a[p] * mu_b[p];
        const double s = ((2 * mu_a[p] * mu_b[p] + c1) * (2 * cov + c2)) /
                         ((mu_a[p] * mu_a[p] + mu_b[p] * mu_b[p] + c1) * (va + vb + c2));
        total += s;
        ++count;
      }
  }
  return total / count;
}

// IoU of masks thresholded at 0.5.
inline double mask_iou(const Image& a, const Image& b) {
  check(a.width == b.width && a.height == b.height && a.channels == 1 && b.channels == 1,
        "mask_iou: single-channel masks of equal size required");
  int inter = 0, uni = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const bool pa = a.data[i] >= 0.5f, pb = b.data[i] >= 0.5f;
    inter += pa && pb;
    uni += pa || pb;
  }
  return uni == 0 ? 1.0 : (double)inter / uni;
}

}  // namespace hvtr
