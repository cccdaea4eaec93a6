#pragma once

// Training losses and the multi-scale patch discriminator. The perceptual
// term is a 3-level Gaussian-pyramid L1 (self-contained; no pretrained
// feature extractor). The adversarial objective is least-squares.

#include <map>
#include <string>
#include <vector>

#include "hvtr/kernels.hpp"
#include "hvtr/nn.hpp"

namespace hvtr {

struct LossWeights {
  double vol = 15, norm = 1, feat = 10, mask = 5, pix = 1, adv = 1;
  double face = 5;  // slot retained; its loss is inactive here

  std::vector<std::pair<std::string, double>> items() const {
    return {{"vol", vol},   {"norm", norm}, {"feat", feat}, {"mask", mask},
            {"pix", pix},   {"adv", adv},   {"face", face}};
  }
};

// MSE between the volumetric RGB and the area-downsampled target over hit
// pixels. `hit` is [1,1,Hd,Wd].
template <typename T>
TensorT<T> loss_vol(const TensorT<T>& vol_rgb, const TensorT<T>& gt_down, const TensorT<T>& hit) {
  check(vol_rgb.shape() == gt_down.shape(),
        "loss_vol: downsampled target " + shape_str(gt_down.shape()) +
            " does not match volumetric RGB " + shape_str(vol_rgb.shape()) +
            " (wrong downsample factor?)");
  return mse_loss_masked(vol_rgb, gt_down, hit);
}

// Mean L1 over valid texels of the UV normal maps.
template <typename T>
TensorT<T> loss_norm(const TensorT<T>& pred, const TensorT<T>& gt, const TensorT<T>& valid) {
  return l1_loss_masked(pred, gt, valid);
}

namespace detail {

// Depthwise 5-tap binomial blur + stride-2 decimation with replicate
// borders (constants are preserved exactly).
template <typename T>
TensorT<T> pyramid_down(const TensorT<T>& x, const TensorT<T>& kernel) {
  return conv2d(replicate_pad2d(x, 2), kernel, TensorT<T>(), 2, 0);
}

template <typename T>
TensorT<T> make_blur_kernel(int channels) {
  const double k1[5] = {1 / 16.0, 4 / 16.0, 6 / 16.0, 4 / 16.0, 1 / 16.0};
  TensorT<T> w(Shape{channels, channels, 5, 5});
  T* p = w.data();
  for (int c = 0; c < channels; ++c)
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j)
        p[(((int64_t)c * channels + c) * 5 + i) * 5 + j] = (T)(k1[i] * k1[j]);
  return w;
}

}  // namespace detail

// 3-level Gaussian-pyramid L1: sum over levels of mean-L1 between the
// pyramid levels of the two images.
template <typename T>
TensorT<T> loss_feat_proxy(const TensorT<T>& a, const TensorT<T>& b) {
  check(a.rank() == 4 && a.shape() == b.shape(), "loss_feat_proxy: shape mismatch");
  check(a.dim(2) % 4 == 0 && a.dim(3) % 4 == 0,
        "loss_feat_proxy: spatial dims must be divisible by 4");
  static thread_local std::map<int, TensorT<T>> kernel_cache;
  auto it = kernel_cache.find(a.dim(1));
  if (it == kernel_cache.end())
    it = kernel_cache.emplace(a.dim(1), detail::make_blur_kernel<T>(a.dim(1))).first;
  const TensorT<T>& kern = it->second;

  auto la = a, lb = b;
  auto total = l1_loss(la, lb);
  for (int level = 1; level < 3; ++level) {
    la = detail::pyramid_down(la, kern);
    lb = detail::pyramid_down(lb, kern);
    total = add(total, l1_loss(la, lb));
  }
  return total;
}

template <typename T>
TensorT<T> loss_mask(const TensorT<T>& pred, const TensorT<T>& gt) {
  return l1_loss(pred, gt);
}

template <typename T>
TensorT<T> loss_pix(const TensorT<T>& pred, const TensorT<T>& gt) {
  return l1_loss(pred, gt);
}

// ---------------------------------------------------------------------------
// Multi-scale patch discriminator (two scales: full and half resolution).
// Input is the channel concat of the image and the conditioning feature
// image. Least-squares objective: D targets 1 on real and 0 on fake, the
// generator targets 1 on fake.

template <typename T>
struct PatchDiscriminator {
  Conv2dLayer<T> c1, c2, c3, out;
  NormParams<T> n2, n3;

  PatchDiscriminator() = default;
  PatchDiscriminator(ParamRegistry<T>& reg, const std::string& prefix, int in_ch, NormMode nm,
                     Rng& rng)
      : c1(reg, prefix + ".c1", in_ch, 32, 3, 2, 1, rng),
        c2(reg, prefix + ".c2", 32, 64, 3, 2, 1, rng),
        c3(reg, prefix + ".c3", 64, 96, 3, 2, 1, rng),
        out(reg, prefix + ".out", 96, 1, 3, 1, 1, rng),
        n2(reg, prefix + ".n2", 64, nm),
        n3(reg, prefix + ".n3", 96, nm) {}

  TensorT<T> forward(const TensorT<T>& x) const {
    auto h = leaky_relu(c1.forward(x), T(0.2));
    h = leaky_relu(n2.forward(c2.forward(h)), T(0.2));
    h = leaky_relu(n3.forward(c3.forward(h)), T(0.2));
    return out.forward(h);
  }
};

template <typename T>
struct MultiScaleDiscriminator {
  PatchDiscriminator<T> full, half;

  MultiScaleDiscriminator() = default;
  MultiScaleDiscriminator(ParamRegistry<T>& reg, const std::string& prefix, int in_ch, NormMode nm,
                          Rng& rng)
      : full(reg, prefix + ".s1", in_ch, nm, rng), half(reg, prefix + ".s2", in_ch, nm, rng) {}

  std::vector<TensorT<T>> forward(const TensorT<T>& image, const TensorT<T>& cond) const {
    auto stack = concat_channels(image, cond);
    return {full.forward(stack), half.forward(spatial_area_downsample(stack, 2))};
  }
};

// LSGAN terms. The generator loss flows through the fake image only (the
// real pair and the conditioning features are detached by the caller).
template <typename T>
TensorT<T> lsgan_generator_loss(const std::vector<TensorT<T>>& fake_logits) {
  TensorT<T> total = TensorT<T>::scalar(T(0));
  for (const auto& d : fake_logits) total = add(total, mse_loss(d, TensorT<T>::full(d.shape(), T(1))));
  return total;
}

template <typename T>
TensorT<T> lsgan_discriminator_loss(const std::vector<TensorT<T>>& real_logits,
                                    const std::vector<TensorT<T>>& fake_logits) {
  TensorT<T> total = TensorT<T>::scalar(T(0));
  for (const auto& d : real_logits)
    total = add(total, mse_loss(d, TensorT<T>::full(d.shape(), T(1))));
  for (const auto& d : fake_logits)
    total = add(total, mse_loss(d, TensorT<T>::full(d.shape(), T(0))));
  return total;
}

// Weighted sum of the active loss terms; the face slot contributes zero.
template <typename T>
TensorT<T> total_loss(const std::map<std::string, TensorT<T>>& parts, const LossWeights& w) {
  TensorT<T> total = TensorT<T>::scalar(T(0));
  for (const auto& [name, weight] : w.items()) {
    if (name == "face") continue;  // slot kept, loss inactive
    auto it = parts.find(name);
    if (it != parts.end() && weight != 0) total = add_scaled(total, it->second, (T)weight);
  }
  return total;
}

}  // namespace hvtr
