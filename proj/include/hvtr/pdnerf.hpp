#pragma once

// Pose-conditioned downsampled radiance field: sinusoidal positional
// encoding of the (u, v, h) surface coordinate and the view direction, a
// 7-layer field MLP (4 trunk layers with an input skip into layer 4, one
// density FC, two appearance FCs), geometry-guided stratified ray sampling
// between rasterized near/far bounds, and alpha-composited feature
// accumulation along each ray.

#include <vector>

#include "hvtr/kernels.hpp"
#include "hvtr/nn.hpp"
#include "hvtr/rasterizer.hpp"
#include "hvtr/rng.hpp"
#include "hvtr/surface_coords.hpp"

namespace hvtr {

struct PositionalEncoderCfg {
  int frequencies = 6;
  bool include_input = true;

  int output_dim(int in_dim) const { return in_dim * (2 * frequencies + (include_input ? 1 : 0)); }
};

// [x?, sin(2^0 pi x), cos(2^0 pi x), ..., sin(2^{L-1} pi x), cos(2^{L-1} pi x)]
inline void positional_encode(const double* x, int in_dim, const PositionalEncoderCfg& cfg,
                              float* out) {
  int k = 0;
  for (int i = 0; i < in_dim; ++i) {
    if (cfg.include_input) out[k++] = (float)x[i];
    double freq = 3.14159265358979323846;
    for (int l = 0; l < cfg.frequencies; ++l) {
      out[k++] = (float)std::sin(freq * x[i]);
      out[k++] = (float)std::cos(freq * x[i]);
      freq *= 2.0;
    }
  }
}

inline std::vector<double> positional_encode(const std::vector<double>& x,
                                             const PositionalEncoderCfg& cfg) {
  std::vector<float> tmp(cfg.output_dim((int)x.size()));
  positional_encode(x.data(), (int)x.size(), cfg, tmp.data());
  return std::vector<double>(tmp.begin(), tmp.end());
}

// ---------------------------------------------------------------------------
// Field MLP

template <typename T>
struct FieldMlp {
  LinearLayer<T> l1, l2, l3, l4;  // trunk; l4 takes [h, input] concat
  LinearLayer<T> sigma_head;      // 1 FC
  LinearLayer<T> feat1, feat2;    // 2 FCs; feat1 takes [h, gamma(dir)]
  int input_dim = 0, dir_dim = 0, width = 0, feat_dim = 0;

  FieldMlp() = default;
  FieldMlp(ParamRegistry<T>& reg, const std::string& prefix, int input_dim_, int dir_dim_,
           int width_, int feat_dim_, Rng& rng)
      : l1(reg, prefix + ".l1", input_dim_, width_, rng),
        l2(reg, prefix + ".l2", width_, width_, rng),
        l3(reg, prefix + ".l3", width_, width_, rng),
        l4(reg, prefix + ".l4", width_ + input_dim_, width_, rng),
        sigma_head(reg, prefix + ".sigma", width_, 1, rng, 0.01),
        feat1(reg, prefix + ".feat1", width_ + dir_dim_, width_ / 2, rng),
        feat2(reg, prefix + ".feat2", width_ / 2, feat_dim_, rng, 0.01),
        input_dim(input_dim_),
        dir_dim(dir_dim_),
        width(width_),
        feat_dim(feat_dim_) {}

  int linear_layer_count() const { return 7; }
  int skip_layer_index() const { return 4; }

  struct Output {
    TensorT<T> sigma;  // [M,1], softplus-nonnegative
    TensorT<T> feat;   // [M,feat_dim], first 3 channels sigmoid RGB
  };

  // x: [M, input_dim] = concat(gamma(q_hat), z); dir_enc: [M, dir_dim]
  Output forward(const TensorT<T>& x, const TensorT<T>& dir_enc) const {
    for (int64_t i = 0; i < x.numel(); ++i)
      check(std::isfinite((double)x.data()[i]), "field_eval: non-finite input feature");
    auto h = relu(l1.forward(x));
    h = relu(l2.forward(h));
    h = relu(l3.forward(h));
    h = relu(l4.forward(concat_channels(h, x)));
    Output out;
    out.sigma = softplus(sigma_head.forward(h));
    auto f = relu(feat1.forward(concat_channels(h, dir_enc)));
    f = feat2.forward(f);
    auto rgb = sigmoid(slice_channels(f, 0, 3));
    out.feat = feat_dim > 3 ? concat_channels(rgb, slice_channels(f, 3, feat_dim)) : rgb;
    return out;
  }
};

// ---------------------------------------------------------------------------
// Geometry-guided ray sampling

struct RaySamples {
  int grid_width = 0, grid_height = 0;  // downsampled ray grid
  std::vector<int> pixel_index;         // per ray, into grid
  std::vector<int> offsets;             // per-ray sample range; size rays+1
  std::vector<double> t_depth;          // camera-z depth per sample
  std::vector<Vec3> points;             // world position per sample
  std::vector<LocalCoord> coords;       // surface coordinate per sample
  std::vector<double> deltas;           // world-space spacing per sample
  std::vector<Vec3> ray_dirs;           // unit view direction per ray
  int dropped_out_of_band = 0;

  int ray_count() const { return (int)pixel_index.size(); }
  int sample_count() const { return (int)t_depth.size(); }
};

// Stratified depths on [near, far] with ceil(2N/3) strata in the near half.
// Jitter is one uniform draw per stratum during training; midpoints when rng
// is null (evaluation). Samples are reprojected through the surface
// coordinates and samples outside the dilation band are dropped (the field
// is vacuum there); rays may carry fewer than N samples.
inline RaySamples sample_rays(const Camera& cam, int S, const NearFarBuffers& nf,
                              const TriMesh& mesh, const TriangleBvh& bvh, int N, double dilation,
                              Rng* rng, const std::vector<int>* ray_subset = nullptr) {
  const Camera dcam = cam.downsampled(S);
  check(nf.width == dcam.width && nf.height == dcam.height,
        "sample_rays: near/far buffers do not match the downsampled camera");
  RaySamples out;
  out.grid_width = dcam.width;
  out.grid_height = dcam.height;
  out.offsets.push_back(0);
  const Vec3 origin = dcam.position();
  const double band_tol = 1e-3;

  std::vector<int> pixels;
  if (ray_subset) {
    pixels = *ray_subset;
  } else {
    pixels.reserve(nf.hit_count());
    for (int p = 0; p < dcam.width * dcam.height; ++p)
      if (nf.hit[p]) pixels.push_back(p);
  }

  const int n_near = (N * 2 + 2) / 3;  // ceil(2N/3)
  const int n_far = N - n_near;
  for (int p : pixels) {
    if (!nf.hit[p]) continue;
    const int px = p % dcam.width, py = p / dcam.width;
    const Vec3 dir_scaled = dcam.ray_dir_depth_scaled(px + 0.5, py + 0.5);
    const double dir_norm = dir_scaled.norm();
    const Vec3 dir_unit = dir_scaled / dir_norm;
    const double tn = nf.near_depth[p], tf = nf.far_depth[p];
    const double mid = 0.5 * (tn + tf);

    double prev_t = tn;
    int kept = 0;
    for (int k = 0; k < N; ++k) {
      double lo, hi;
      if (k < n_near) {
        lo = tn + (mid - tn) * k / n_near;
        hi = tn + (mid - tn) * (k + 1) / n_near;
      } else {
        lo = mid + (tf - mid) * (k - n_near) / n_far;
        hi = mid + (tf - mid) * (k - n_near + 1) / n_far;
      }
      const double jitter = rng ? rng->uniform() : 0.5;
      const double t = lo + (hi - lo) * jitter;
      const Vec3 q = origin + t * dir_scaled;
      const LocalCoord lc = bvh.project(q);
      if (std::abs(lc.h) > dilation + band_tol) {
        ++out.dropped_out_of_band;
        prev_t = t;  // spacing still consumed; the dropped span is vacuum
        continue;
      }
      out.t_depth.push_back(t);
      out.points.push_back(q);
      out.coords.push_back(lc);
      out.deltas.push_back(std::max((t - prev_t) * dir_norm, 1e-9));
      prev_t = t;
      ++kept;
    }
    if (kept > 0) {
      out.pixel_index.push_back(p);
      out.ray_dirs.push_back(dir_unit);
      out.offsets.push_back((int)out.t_depth.size());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Volume rendering: out_r = sum_n T_n (1 - e^{-sigma_n delta_n}) xi_n with
// T_n = prod_{i<n} e^{-sigma_i delta_i}; alpha_r = 1 - T_{N+1}.

template <typename T>
struct VolumeRenderResult {
  TensorT<T> feat;   // [R, C]
  TensorT<T> alpha;  // [R, 1]
};

template <typename T>
VolumeRenderResult<T> volume_render_rays(const TensorT<T>& sigma, const TensorT<T>& xi,
                                         const std::vector<int>& offsets,
                                         const std::vector<double>& deltas) {
  check(sigma.rank() == 2 && sigma.dim(1) == 1, "volume_render_rays: sigma must be [M,1]");
  check(xi.rank() == 2 && xi.dim(0) == sigma.dim(0), "volume_render_rays: xi must be [M,C]");
  const int M = sigma.dim(0), C = xi.dim(1);
  const int R = (int)offsets.size() - 1;
  check((int)deltas.size() == M && offsets.front() == 0 && offsets.back() == M,
        "volume_render_rays: offsets/deltas inconsistent with sample count");
  for (double d : deltas) check(d > 0, "volume_render_rays: nonpositive sample spacing");

  VolumeRenderResult<T> res{TensorT<T>(Shape{R, C}), TensorT<T>(Shape{R, 1})};
  const T* ps = sigma.data();
  const T* pf = xi.data();
  T* po = res.feat.data();
  T* pa = res.alpha.data();
  for (int r = 0; r < R; ++r) {
    T trans = T(1);
    for (int n = offsets[r]; n < offsets[r + 1]; ++n) {
      const T a = T(1) - std::exp(-ps[n] * (T)deltas[n]);
      const T w = trans * a;
      for (int c = 0; c < C; ++c) po[(int64_t)r * C + c] += w * pf[(int64_t)n * C + c];
      trans *= T(1) - a;
    }
    pa[r] = T(1) - trans;
  }

  if (detail::tracing<T>({&sigma, &xi})) {
    detail::mark_op_output(res.feat);
    detail::mark_op_output(res.alpha);
    auto si = sigma.impl(), xii = xi.impl(), fi = res.feat.impl(), ai = res.alpha.impl();
    TapeT<T>::current()->record([si, xii, fi, ai, offsets, deltas, M, C, R] {
      const T* gf = detail::out_grad(fi);
      const T* ga = detail::out_grad(ai);
      if (!gf && !ga) return;
      const T* ps = si->storage->values.data();
      const T* pf = xii->storage->values.data();
      T* gs = si->requires_grad ? detail::acc_grad(si) : nullptr;
      T* gx = xii->requires_grad ? detail::acc_grad(xii) : nullptr;
      std::vector<T> w(M), gdotxi(M);
      for (int r = 0; r < R; ++r) {
        T trans = T(1);
        for (int n = offsets[r]; n < offsets[r + 1]; ++n) {
          const T a = T(1) - std::exp(-ps[n] * (T)deltas[n]);
          w[n] = trans * a;
          trans *= T(1) - a;
          T dot = T(0);
          if (gf)
            for (int c = 0; c < C; ++c) dot += gf[(int64_t)r * C + c] * pf[(int64_t)n * C + c];
          gdotxi[n] = dot;
        }
        const T trans_final = trans;  // T after the last sample
        if (gx && gf) {
          for (int n = offsets[r]; n < offsets[r + 1]; ++n)
            for (int c = 0; c < C; ++c)
              gx[(int64_t)n * C + c] += w[n] * gf[(int64_t)r * C + c];
        }
        if (gs) {
          // suffix sum of downstream weighted contributions
          T suffix = T(0);
          T t_run = T(1);
          // recompute T_n on the fly (forward order), then walk backward
          std::vector<T> t_vals(offsets[r + 1] - offsets[r]);
          for (int n = offsets[r], i = 0; n < offsets[r + 1]; ++n, ++i) {
            t_vals[i] = t_run;
            t_run *= std::exp(-ps[n] * (T)deltas[n]);
          }
          const T galpha = ga ? ga[r] : T(0);
          for (int n = offsets[r + 1] - 1, i = n - offsets[r]; n >= offsets[r]; --n, --i) {
            const T e = std::exp(-ps[n] * (T)deltas[n]);
            const T d = (T)deltas[n];
            gs[n] += d * (t_vals[i] * e * gdotxi[n] - suffix + galpha * trans_final);
            suffix += w[n] * gdotxi[n];
          }
        }
      }
    });
  }
  return res;
}

}  // namespace hvtr
