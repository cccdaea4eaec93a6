#pragma once

// Network building blocks in the encoder/residual/decoder idiom:
//   encoder block  = Conv2d -> Norm -> ReLU
//   decoder block  = ReLU -> ConvTranspose2d -> Norm
//   residual block = Conv -> Norm -> ReLU -> Conv -> Norm, plus skip
// Decoder upsampling uses k=2 s=2 transposed convolutions (exact 2x).

#include <string>
#include <vector>

#include "hvtr/kernels.hpp"
#include "hvtr/rng.hpp"

namespace hvtr {

template <typename T>
struct ParamRegistry {
  std::vector<TensorT<T>> params;

  TensorT<T> create(const std::string& name, Shape shape, Rng& rng, double stddev) {
    TensorT<T> t(shape);
    if (stddev > 0) {
      T* p = t.data();
      for (int64_t i = 0; i < t.numel(); ++i) p[i] = (T)rng.normal(0.0, stddev);
    }
    t.set_requires_grad(true);
    t.set_name(name);
    params.push_back(t);
    return t;
  }

  TensorT<T> create_const(const std::string& name, Shape shape, T value) {
    TensorT<T> t(shape, value);
    t.set_requires_grad(true);
    t.set_name(name);
    params.push_back(t);
    return t;
  }
};

template <typename T>
struct NormParams {
  TensorT<T> gamma, beta;
  NormMode mode = NormMode::kInstance;

  NormParams() = default;
  NormParams(ParamRegistry<T>& reg, const std::string& prefix, int channels, NormMode m)
      : gamma(reg.create_const(prefix + ".gamma", {channels}, T(1))),
        beta(reg.create_const(prefix + ".beta", {channels}, T(0))),
        mode(m) {}

  TensorT<T> forward(const TensorT<T>& x) const { return norm_layer(x, gamma, beta, mode); }
};

template <typename T>
struct Conv2dLayer {
  TensorT<T> w, b;
  int stride = 1, pad = 1;

  Conv2dLayer() = default;
  Conv2dLayer(ParamRegistry<T>& reg, const std::string& prefix, int in_ch, int out_ch, int k,
              int stride_, int pad_, Rng& rng, double stddev = -1)
      : stride(stride_), pad(pad_) {
    if (stddev < 0) stddev = std::sqrt(2.0 / (in_ch * k * k));
    w = reg.create(prefix + ".w", {out_ch, in_ch, k, k}, rng, stddev);
    b = reg.create_const(prefix + ".b", {out_ch}, T(0));
  }

  TensorT<T> forward(const TensorT<T>& x) const { return conv2d(x, w, b, stride, pad); }
};

template <typename T>
struct ConvT2dLayer {
  TensorT<T> w, b;
  int stride = 2, pad = 0;

  ConvT2dLayer() = default;
  ConvT2dLayer(ParamRegistry<T>& reg, const std::string& prefix, int in_ch, int out_ch, int k,
               int stride_, int pad_, Rng& rng)
      : stride(stride_), pad(pad_) {
    const double stddev = std::sqrt(2.0 / std::max(1, in_ch * k * k / (stride_ * stride_)));
    w = reg.create(prefix + ".w", {in_ch, out_ch, k, k}, rng, stddev);
    b = reg.create_const(prefix + ".b", {out_ch}, T(0));
  }

  TensorT<T> forward(const TensorT<T>& x) const { return conv_transpose2d(x, w, b, stride, pad); }
};

template <typename T>
struct EncoderBlock {
  Conv2dLayer<T> conv;
  NormParams<T> norm;

  EncoderBlock() = default;
  EncoderBlock(ParamRegistry<T>& reg, const std::string& prefix, int in_ch, int out_ch, int stride,
               NormMode nm, Rng& rng)
      : conv(reg, prefix + ".conv", in_ch, out_ch, 3, stride, 1, rng),
        norm(reg, prefix + ".norm", out_ch, nm) {}

  TensorT<T> forward(const TensorT<T>& x) const { return relu(norm.forward(conv.forward(x))); }
};

template <typename T>
struct DecoderBlock {
  ConvT2dLayer<T> convt;
  NormParams<T> norm;

  DecoderBlock() = default;
  // upsample=true: k2 s2 (doubles the size); false: k3 s1 p1 (keeps it)
  DecoderBlock(ParamRegistry<T>& reg, const std::string& prefix, int in_ch, int out_ch,
               bool upsample, NormMode nm, Rng& rng)
      : convt(reg, prefix + ".convt", in_ch, out_ch, upsample ? 2 : 3, upsample ? 2 : 1,
              upsample ? 0 : 1, rng),
        norm(reg, prefix + ".norm", out_ch, nm) {}

  TensorT<T> forward(const TensorT<T>& x) const { return norm.forward(convt.forward(relu(x))); }
};

template <typename T>
struct ResBlock {
  Conv2dLayer<T> conv1, conv2;
  NormParams<T> norm1, norm2;

  ResBlock() = default;
  ResBlock(ParamRegistry<T>& reg, const std::string& prefix, int ch, NormMode nm, Rng& rng)
      : conv1(reg, prefix + ".conv1", ch, ch, 3, 1, 1, rng),
        conv2(reg, prefix + ".conv2", ch, ch, 3, 1, 1, rng),
        norm1(reg, prefix + ".norm1", ch, nm),
        norm2(reg, prefix + ".norm2", ch, nm) {}

  TensorT<T> forward(const TensorT<T>& x) const {
    auto h = relu(norm1.forward(conv1.forward(x)));
    return add(x, norm2.forward(conv2.forward(h)));
  }
};

template <typename T>
struct LinearLayer {
  TensorT<T> w, b;

  LinearLayer() = default;
  LinearLayer(ParamRegistry<T>& reg, const std::string& prefix, int in_dim, int out_dim, Rng& rng,
              double stddev = -1) {
    if (stddev < 0) stddev = std::sqrt(2.0 / in_dim);
    w = reg.create(prefix + ".w", {out_dim, in_dim}, rng, stddev);
    b = reg.create_const(prefix + ".b", {out_dim}, T(0));
  }

  TensorT<T> forward(const TensorT<T>& x) const { return linear(x, w, b); }
};

}  // namespace hvtr
