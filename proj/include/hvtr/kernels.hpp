#pragma once

// The kernel set used by the rendering pipeline: dense linear algebra via
// Eigen behind each contract, adjoints hand-derived and checked against
// central finite differences in the test suite.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "hvtr/tensor.hpp"

namespace hvtr {

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

namespace detail {

template <typename T>
void check_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* op) {
  check(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  detail::check_same_shape(a, b, "add");
  TensorT<T> out(a.shape());
  const int64_t n = a.numel();
  const T* pa = a.data();
  const T* pb = b.data();
  T* po = out.data();
  for (int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
  if (detail::tracing<T>({&a, &b})) {
    detail::mark_op_output(out);
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    TapeT<T>::current()->record([ai, bi, oi, n] {
      const T* go = detail::out_grad(oi);
      if (!go) return;
      if (ai->requires_grad) {
        T* ga = detail::acc_grad(ai);
        for (int64_t i = 0; i < n; ++i) ga[i] += go[i];
      }
      if (bi->requires_grad) {
        T* gb = detail::acc_grad(bi);
        for (int64_t i = 0; i < n; ++i) gb[i] += go[i];
      }
    });
  }
  return out;
}

template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
  detail::check_same_shape(a, b, "sub");
  TensorT<T> out(a.shape());
  const int64_t n = a.numel();
  const T* pa = a.data();
  const T* pb = b.data();
  T* po = out.data();
  for (int64_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
  if (detail::tracing<T>({&a, &b})) {
    detail::mark_op_output(out);
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    TapeT<T>::current()->record([ai, bi, oi, n] {
      const T* go = detail::out_grad(oi);
      if (!go) return;
      if (ai->requires_grad) {
        T* ga = detail::acc_grad(ai);
        for (int64_t i = 0; i < n; ++i) ga[i] += go[i];
      }
      if (bi->requires_grad) {
        T* gb = detail::acc_grad(bi);
        for (int64_t i = 0; i < n; ++i) gb[i] -= go[i];
      }
    });
  }
  return out;
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  detail::check_same_shape(a, b, "mul");
  TensorT<T> out(a.shape());
  const int64_t n = a.numel();
  const T* pa = a.data();
  const T* pb = b.data();
  T* po = out.data();
  for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
  if (detail::tracing<T>({&a, &b})) {
    detail::mark_op_output(out);
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    TapeT<T>::current()->record([ai, bi, oi, n] {
      const T* go = detail::out_grad(oi);
      if (!go) return;
      const T* pa = ai->storage->values.data();
      const T* pb = bi->storage->values.data();
      if (ai->requires_grad) {
        T* ga = detail::acc_grad(ai);
        for (int64_t i = 0; i < n; ++i) ga[i] += go[i] * pb[i];
      }
      if (bi->requires_grad) {
        T* gb = detail::acc_grad(bi);
        for (int64_t i = 0; i < n; ++i) gb[i] += go[i] * pa[i];
      }
    });
  }
  return out;
}

template <typename T>
TensorT<T> scale(const TensorT<T>& a, T c) {
  TensorT<T> out(a.shape());
  const int64_t n = a.numel();
  const T* pa = a.data();
  T* po = out.data();
  for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * c;
  if (detail::tracing<T>({&a})) {
    detail::mark_op_output(out);
    auto ai = a.impl(), oi = out.impl();
    TapeT<T>::current()->record([ai, oi, c, n] {
      const T* go = detail::out_grad(oi);
      if (!go) return;
      T* ga = detail::acc_grad(ai);
      for (int64_t i = 0; i < n; ++i) ga[i] += go[i] * c;
    });
  }
  return out;
}

// out = a + c * b, the workhorse of weighted loss sums.
template <typename T>
TensorT<T> add_scaled(const TensorT<T>& a, const TensorT<T>& b, T c) {
  return add(a, scale(b, c));
}

// ---------------------------------------------------------------------------
// Activations

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
  TensorT<T> out(x.shape());
  const int64_t n = x.numel();
  const T* px = x.data();
  T* po = out.data();
  for (int64_t i = 0; i < n; ++i) po[i] = px[i] > T(0) ? px[i] : T(0);
  if (detail::tracing<T>({&x})) {
    detail::mark_op_output(out);
    auto xi = x.impl(), oi = out.impl();
    TapeT<T>::current()->record([xi, oi, n] {
      const T* go = detail::out_grad(oi);
      if (!go) return;
      const T* px = xi->storage->values.data();
      T* gx = detail::acc_grad(xi);
      for (int64_t i = 0; i < n; ++i)
        if (px[i] > T(0)) gx[i] += go[i];
    });
  }
  return out;
}

template <typename T>
TensorT<T> leaky_relu(const TensorT<T>& x, T slope) {
  TensorT<T> out(x.shape());
  const int64_t n = x.numel();
  const T* px = x.data();
  T* po = out.data();
  for (int64_t i = 0; i < n; ++i) po[i] = px[i] > T(0) ? px[i] : slope * px[i];
  if (detail::tracing<T>({&x})) {
    detail::mark_op_output(out);
    auto xi = x.impl(), oi = out.impl();
    TapeT<T>::current()->record([xi, oi, n, slope] {
      const T* go = detail::out_grad(oi);
      if (!go) return;
      const T* px = xi->storage->values.data();
      T* gx = detail::acc_grad(xi);
      for (int64_t i = 0; i < n; ++i) gx[i] += go[i] * (px[i] > T(0) ? T(1) : slope);
    });
  }
  return out;
}

template <typename T>
TensorT<T> sigmoid(const TensorT<T>& x) {
  TensorT<T> out(x.shape());
  const int64_t n = x.numel();
  const T* px = x.data();
  T* po = out.data();
  for (int64_t i = 0; i < n; ++i) {
    const T v = px[i];
    po[i] = v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
  }
  if (detail::tracing<T>({&x})) {
    detail::mark_op_output(out);
    auto xi = x.impl(), oi = out.impl();
    TapeT<T>::current()->record([xi, oi, n] {
      const T* go = detail::out_grad(oi);
      if (!go) return;
      const T* py = oi->storage->values.data();
      T* gx = detail::acc_grad(xi);
      for (int64_t i = 0; i < n; ++i) gx[i] += go[i] * py[i] * (T(1) - py[i]);
    });
  }
  return out;
}

template <typename T>
TensorT<T> tanh_op(const TensorT<T>& x) {
  TensorT<T> out(x.shape());
  const int64_t n = x.numel();
  const T* px = x.data();
  T* po = out.data();
  for (int64_t i = 0; i < n; ++i) po[i] = std::tanh(px[i]);
  if (detail::tracing<T>({&x})) {
    detail::mark_op_output(out);
    auto xi = x.impl(), oi = out.impl();
    TapeT<T>::current()->record([xi, oi, n] {
      const T* go = detail::out_grad(oi);
      if (!go) return;
      const T* py = oi->storage->values.data();
      T* gx = detail::acc_grad(xi);
      for (int64_t i = 0; i < n; ++i) gx[i] += go[i] * (T(1) - py[i] * py[i]);
    });
  }
  return out;
}

// softplus keeps predicted densities nonnegative with smooth gradients.
template <typename T>
TensorT<T> softplus(const TensorT<T>& x) {
  TensorT<T> out(x.shape());
  const int64_t n = x.numel();
  const T* px = x.data();
  T* po = out.data();
  for (int64_t i = 0; i < n; ++i) {
    const T v = px[i];
    po[i] = v > T(30) ? v : std::log1p(std::exp(std::min(v, T(30))));
  }
  if (detail::tracing<T>({&x})) {
    detail::mark_op_output(out);
    auto xi = x.impl(), oi = out.impl();
    TapeT<T>::current()->record([xi, oi, n] {
      const T* go = detail::out_grad(oi);
      if (!go) return;
      const T* px = xi->storage->values.data();
      T* gx = detail::acc_grad(xi);
      for (int64_t i = 0; i < n; ++i) {
        const T v = px[i];
        const T s = v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
        gx[i] += go[i] * s;
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions and losses

template <typename T>
TensorT<T> sum(const TensorT<T>& x) {
  TensorT<T> out(Shape{1});
  const int64_t n = x.numel();
  const T* px = x.data();
  T acc = T(0);
  for (int64_t i = 0; i < n; ++i) acc += px[i];
  out.data()[0] = acc;
  if (detail::tracing<T>({&x})) {
    detail::mark_op_output(out);
    auto xi = x.impl(), oi = out.impl();
    TapeT<T>::current()->record([xi, oi, n] {
      const T* go = detail::out_grad(oi);
      if (!go) return;
      T* gx = detail::acc_grad(xi);
      for (int64_t i = 0; i < n; ++i) gx[i] += go[0];
    });
  }
  return out;
}

template <typename T>
TensorT<T> mean(const TensorT<T>& x) {
  return scale(sum(x), T(1) / T(x.numel()));
}

template <typename T>
TensorT<T> l1_loss(const TensorT<T>& a, const TensorT<T>& b) {
  detail::check_same_shape(a, b, "l1_loss");
  TensorT<T> out(Shape{1});
  const int64_t n = a.numel();
  const T* pa = a.data();
  const T* pb = b.data();
  T acc = T(0);
  for (int64_t i = 0; i < n; ++i) acc += std::abs(pa[i] - pb[i]);
  out.data()[0] = acc / T(n);
  if (detail::tracing<T>({&a, &b})) {
    detail::mark_op_output(out);
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    TapeT<T>::current()->record([ai, bi, oi, n] {
      const T* go = detail::out_grad(oi);
      if (!go) return;
      const T* pa = ai->storage->values.data();
      const T* pb = bi->storage->values.data();
      const T w = go[0] / T(n);
      if (ai->requires_grad) {
        T* ga = detail::acc_grad(ai);
        for (int64_t i = 0; i < n; ++i) {
          const T d = pa[i] - pb[i];
          ga[i] += w * (d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0)));
        }
      }
      if (bi->requires_grad) {
        T* gb = detail::acc_grad(bi);
        for (int64_t i = 0; i < n; ++i) {
          const T d = pa[i] - pb[i];
          gb[i] -= w * (d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0)));
        }
      }
    });
  }
  return out;
}

template <typename T>
TensorT<T> mse_loss(const TensorT<T>& a, const TensorT<T>& b) {
  detail::check_same_shape(a, b, "mse_loss");
  TensorT<T> out(Shape{1});
  const int64_t n = a.numel();
  const T* pa = a.data();
  const T* pb = b.data();
  T acc = T(0);
  for (int64_t i = 0; i < n; ++i) {
    const T d = pa[i] - pb[i];
    acc += d * d;
  }
  out.data()[0] = acc / T(n);
  if (detail::tracing<T>({&a, &b})) {
    detail::mark_op_output(out);
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    TapeT<T>::current()->record([ai, bi, oi, n] {
      const T* go = detail::out_grad(oi);
      if (!go) return;
      const T* pa = ai->storage->values.data();
      const T* pb = bi->storage->values.data();
      const T w = T(2) * go[0] / T(n);
      if (ai->requires_grad) {
        T* ga = detail::acc_grad(ai);
        for (int64_t i = 0; i < n; ++i) ga[i] += w * (pa[i] - pb[i]);
      }
      if (bi->requires_grad) {
        T* gb = detail::acc_grad(bi);
        for (int64_t i = 0; i < n; ++i) gb[i] -= w * (pa[i] - pb[i]);
      }
    });
  }
  return out;
}

namespace detail {

// Shared core of the mask-weighted means. `mask` is per-pixel (1x1xHxW when
// `a` is NxCxHxW, broadcast over channels; or exactly a's shape). Mean is
// taken over mask-weighted elements: sum(m*f(a-b)) / (C * sum(m)).
template <typename T, bool kSquared>
TensorT<T> masked_mean_loss(const TensorT<T>& a, const TensorT<T>& b, const TensorT<T>& mask) {
  detail::check_same_shape(a, b, kSquared ? "mse_loss_masked" : "l1_loss_masked");
  int64_t pixels, channels;
  if (mask.shape() == a.shape()) {
    pixels = a.numel();
    channels = 1;
  } else {
    check(a.rank() == 4 && mask.rank() == 4 && mask.dim(0) == a.dim(0) && mask.dim(1) == 1 &&
              mask.dim(2) == a.dim(2) && mask.dim(3) == a.dim(3),
          "masked loss: mask " + shape_str(mask.shape()) + " does not broadcast over " +
              shape_str(a.shape()));
    pixels = (int64_t)a.dim(0) * a.dim(2) * a.dim(3);
    channels = a.dim(1);
  }
  const T* pm = mask.data();
  T msum = T(0);
  for (int64_t i = 0; i < pixels; ++i) msum += pm[i];
  const T denom = std::max(msum * T(channels), std::numeric_limits<T>::min());

  const int64_t plane = (channels == 1) ? 1 : (int64_t)a.dim(2) * a.dim(3);
  auto mask_at = [pm, channels, plane](int64_t i) -> T {
    if (channels == 1) return pm[i];
    // NCHW flat index -> (n, hw) pixel index
    const int64_t hw = i % plane;
    const int64_t n = i / (plane * channels);
    return pm[n * plane + hw];
  };

  TensorT<T> out(Shape{1});
  const int64_t n = a.numel();
  const T* pa = a.data();
  const T* pb = b.data();
  T acc = T(0);
  for (int64_t i = 0; i < n; ++i) {
    const T d = pa[i] - pb[i];
    acc += mask_at(i) * (kSquared ? d * d : std::abs(d));
  }
  out.data()[0] = acc / denom;
  if (detail::tracing<T>({&a, &b})) {
    detail::mark_op_output(out);
    auto ai = a.impl(), bi = b.impl(), mi = mask.impl(), oi = out.impl();
    TapeT<T>::current()->record([ai, bi, mi, oi, n, denom, mask_at] {
      const T* go = detail::out_grad(oi);
      if (!go) return;
      const T* pa = ai->storage->values.data();
      const T* pb = bi->storage->values.data();
      const T w = go[0] / denom;
      for (int pass = 0; pass < 2; ++pass) {
        auto& ti = pass == 0 ? ai : bi;
        if (!ti->requires_grad) continue;
        const T sgn = pass == 0 ? T(1) : T(-1);
        T* g = detail::acc_grad(ti);
        for (int64_t i = 0; i < n; ++i) {
          const T d = pa[i] - pb[i];
          const T dd = kSquared ? T(2) * d : (d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0)));
          g[i] += sgn * w * mask_at(i) * dd;
        }
      }
    });
  }
  return out;
}

}  // namespace detail

template <typename T>
TensorT<T> l1_loss_masked(const TensorT<T>& a, const TensorT<T>& b, const TensorT<T>& mask) {
  return detail::masked_mean_loss<T, false>(a, b, mask);
}

template <typename T>
TensorT<T> mse_loss_masked(const TensorT<T>& a, const TensorT<T>& b, const TensorT<T>& mask) {
  return detail::masked_mean_loss<T, true>(a, b, mask);
}

// ---------------------------------------------------------------------------
// Linear layer: y[M,O] = x[M,K] . w[O,K]^T + b[O]

template <typename T>
TensorT<T> linear(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
  check(x.rank() == 2 && w.rank() == 2, "linear: x and w must be rank 2");
  const int M = x.dim(0), K = x.dim(1), O = w.dim(0);
  check(w.dim(1) == K, "linear: input features " + shape_str(x.shape()) +
                           " do not match weight " + shape_str(w.shape()));
  check(!b.defined() || (b.rank() == 1 && b.dim(0) == O), "linear: bias must be [O]");
  TensorT<T> out(Shape{M, O});
  ConstMatMap<T> xm(x.data(), M, K), wm(w.data(), O, K);
  MatMap<T> om(out.data(), M, O);
  om.noalias() = xm * wm.transpose();
  if (b.defined()) om.rowwise() += ConstMatMap<T>(b.data(), 1, O).row(0);
  if (detail::tracing<T>({&x, &w, &b})) {
    detail::mark_op_output(out);
    auto xi = x.impl(), wi = w.impl(), bi = b.impl(), oi = out.impl();
    TapeT<T>::current()->record([xi, wi, bi, oi, M, K, O] {
      const T* go = detail::out_grad(oi);
      if (!go) return;
      ConstMatMap<T> gom(go, M, O);
      if (xi->requires_grad) {
        MatMap<T> gxm(detail::acc_grad(xi), M, K);
        ConstMatMap<T> wm(wi->storage->values.data(), O, K);
        gxm.noalias() += gom * wm;
      }
      if (wi->requires_grad) {
        MatMap<T> gwm(detail::acc_grad(wi), O, K);
        ConstMatMap<T> xm(xi->storage->values.data(), M, K);
        gwm.noalias() += gom.transpose() * xm;
      }
      if (bi && bi->requires_grad) {
        MatMap<T> gbm(detail::acc_grad(bi), 1, O);
        gbm.row(0) += gom.colwise().sum();
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convolutions (NCHW, zero padding, square kernels)

inline int conv_out_size(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

namespace detail {

// col[oh*ow, C*k*k] from x[C,H,W]
template <typename T>
void im2col(const T* x, int C, int H, int W, int k, int stride, int pad, int OH, int OW, T* col) {
  for (int oy = 0; oy < OH; ++oy)
    for (int ox = 0; ox < OW; ++ox) {
      T* row = col + ((int64_t)oy * OW + ox) * C * k * k;
      for (int c = 0; c < C; ++c) {
        const T* xc = x + (int64_t)c * H * W;
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * stride - pad + ky;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * stride - pad + kx;
            *row++ = (iy >= 0 && iy < H && ix >= 0 && ix < W) ? xc[(int64_t)iy * W + ix] : T(0);
          }
        }
      }
    }
}

// scatter-add of col back into dx[C,H,W]
template <typename T>
void col2im_acc(const T* col, int C, int H, int W, int k, int stride, int pad, int OH, int OW,
                T* dx) {
  for (int oy = 0; oy < OH; ++oy)
    for (int ox = 0; ox < OW; ++ox) {
      const T* row = col + ((int64_t)oy * OW + ox) * C * k * k;
      for (int c = 0; c < C; ++c) {
        T* xc = dx + (int64_t)c * H * W;
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * stride - pad + ky;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * stride - pad + kx;
            if (iy >= 0 && iy < H && ix >= 0 && ix < W) xc[(int64_t)iy * W + ix] += row[0];
            ++row;
          }
        }
      }
    }
}

}  // namespace detail

// x: [N,C,H,W], w: [O,C,k,k], b: [O] (optional, pass undefined to skip)
template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b, int stride,
                  int pad) {
  check(x.rank() == 4 && w.rank() == 4, "conv2d: x must be NCHW and w OCkk");
  check(w.dim(2) == w.dim(3), "conv2d: kernel must be square");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int O = w.dim(0), k = w.dim(2);
  check(w.dim(1) == C, "conv2d: input has " + std::to_string(C) + " channels (" +
                           shape_str(x.shape()) + ") but weight expects " +
                           std::to_string(w.dim(1)) + " (" + shape_str(w.shape()) + ")");
  check(k >= 1 && stride >= 1 && pad >= 0, "conv2d: require k>=1, stride>=1, pad>=0");
  check(H + 2 * pad >= k && W + 2 * pad >= k, "conv2d: kernel larger than padded input");
  check(!b.defined() || (b.rank() == 1 && b.dim(0) == O), "conv2d: bias must be [O]");
  const int OH = conv_out_size(H, k, stride, pad), OW = conv_out_size(W, k, stride, pad);
  TensorT<T> out(Shape{N, O, OH, OW});

  const int64_t ck2 = (int64_t)C * k * k;
  std::vector<T> col((int64_t)OH * OW * ck2);
  for (int n = 0; n < N; ++n) {
    detail::im2col(x.data() + (int64_t)n * C * H * W, C, H, W, k, stride, pad, OH, OW, col.data());
    // out_n[OH*OW, O] = col . w[O, ck2]^T ; store transposed into NCHW
    ConstMatMap<T> cm(col.data(), (int64_t)OH * OW, ck2), wm(w.data(), O, ck2);
    MatMap<T> om(out.data() + (int64_t)n * O * OH * OW, O, (int64_t)OH * OW);
    om.noalias() = wm * cm.transpose();
    if (b.defined()) om.colwise() += Eigen::Map<const Eigen::Vector<T, Eigen::Dynamic>>(b.data(), O);
  }

  if (detail::tracing<T>({&x, &w, &b})) {
    detail::mark_op_output(out);
    auto xi = x.impl(), wi = w.impl(), bi = b.impl(), oi = out.impl();
    TapeT<T>::current()->record([xi, wi, bi, oi, N, C, H, W, O, k, stride, pad, OH, OW, ck2] {
      const T* go = detail::out_grad(oi);
      if (!go) return;
      std::vector<T> col((int64_t)OH * OW * ck2);
      std::vector<T> dcol;
      for (int n = 0; n < N; ++n) {
        ConstMatMap<T> gom(go + (int64_t)n * O * OH * OW, O, (int64_t)OH * OW);
        if (wi->requires_grad || xi->requires_grad) {
          if (wi->requires_grad) {
            detail::im2col(xi->storage->values.data() + (int64_t)n * C * H * W, C, H, W, k, stride,
                           pad, OH, OW, col.data());
            ConstMatMap<T> cm(col.data(), (int64_t)OH * OW, ck2);
            MatMap<T> gwm(detail::acc_grad(wi), O, ck2);
            gwm.noalias() += gom * cm;
          }
          if (xi->requires_grad) {
            dcol.resize((int64_t)OH * OW * ck2);
            ConstMatMap<T> wm(wi->storage->values.data(), O, ck2);
            MatMap<T> dcm(dcol.data(), (int64_t)OH * OW, ck2);
            dcm.noalias() = gom.transpose() * wm;
            detail::col2im_acc(dcol.data(), C, H, W, k, stride, pad, OH, OW,
                               detail::acc_grad(xi) + (int64_t)n * C * H * W);
          }
        }
        if (bi && bi->requires_grad) {
          T* gb = detail::acc_grad(bi);
          for (int o = 0; o < O; ++o) gb[o] += gom.row(o).sum();
        }
      }
    });
  }
  return out;
}

// x: [N,I,H,W], w: [I,O,k,k]; out size (H-1)*stride - 2*pad + k
template <typename T>
TensorT<T> conv_transpose2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b,
                            int stride, int pad) {
  check(x.rank() == 4 && w.rank() == 4, "conv_transpose2d: x must be NCHW and w IOkk");
  check(w.dim(2) == w.dim(3), "conv_transpose2d: kernel must be square");
  const int N = x.dim(0), I = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int O = w.dim(1), k = w.dim(2);
  check(w.dim(0) == I, "conv_transpose2d: input has " + std::to_string(I) + " channels (" +
                           shape_str(x.shape()) + ") but weight expects " +
                           std::to_string(w.dim(0)) + " (" + shape_str(w.shape()) + ")");
  check(k >= 1 && stride >= 1 && pad >= 0, "conv_transpose2d: require k>=1, stride>=1, pad>=0");
  const int OH = (H - 1) * stride - 2 * pad + k, OW = (W - 1) * stride - 2 * pad + k;
  check(OH > 0 && OW > 0, "conv_transpose2d: non-positive output size");
  check(!b.defined() || (b.rank() == 1 && b.dim(0) == O), "conv_transpose2d: bias must be [O]");
  TensorT<T> out(Shape{N, O, OH, OW});

  const int64_t ok2 = (int64_t)O * k * k;
  std::vector<T> cols((int64_t)H * W * ok2);
  for (int n = 0; n < N; ++n) {
    // cols[H*W, O*k*k] = x_rows[H*W, I] . w[I, O*k*k]
    ConstMatMap<T> xm(x.data() + (int64_t)n * I * H * W, I, (int64_t)H * W);
    ConstMatMap<T> wm(w.data(), I, ok2);
    MatMap<T> cm(cols.data(), (int64_t)H * W, ok2);
    cm.noalias() = xm.transpose() * wm;
    T* po = out.data() + (int64_t)n * O * OH * OW;
    if (b.defined()) {
      for (int o = 0; o < O; ++o)
        std::fill(po + (int64_t)o * OH * OW, po + (int64_t)(o + 1) * OH * OW, b.data()[o]);
    }
    for (int iy = 0; iy < H; ++iy)
      for (int ix = 0; ix < W; ++ix) {
        const T* row = cols.data() + ((int64_t)iy * W + ix) * ok2;
        for (int o = 0; o < O; ++o)
          for (int ky = 0; ky < k; ++ky) {
            const int oy = iy * stride - pad + ky;
            for (int kx = 0; kx < k; ++kx) {
              const int ox = ix * stride - pad + kx;
              if (oy >= 0 && oy < OH && ox >= 0 && ox < OW)
                po[((int64_t)o * OH + oy) * OW + ox] += row[(o * k + ky) * k + kx];
            }
          }
      }
  }

  if (detail::tracing<T>({&x, &w, &b})) {
    detail::mark_op_output(out);
    auto xi = x.impl(), wi = w.impl(), bi = b.impl(), oi = out.impl();
    TapeT<T>::current()->record([xi, wi, bi, oi, N, I, H, W, O, k, stride, pad, OH, OW, ok2] {
      const T* go = detail::out_grad(oi);
      if (!go) return;
      std::vector<T> dcols((int64_t)H * W * ok2);
      for (int n = 0; n < N; ++n) {
        const T* gon = go + (int64_t)n * O * OH * OW;
        // gather: dcols[iy*W+ix, o*k*k+..] = go[o, iy*s-p+ky, ix*s-p+kx]
        for (int iy = 0; iy < H; ++iy)
          for (int ix = 0; ix < W; ++ix) {
            T* row = dcols.data() + ((int64_t)iy * W + ix) * ok2;
            for (int o = 0; o < O; ++o)
              for (int ky = 0; ky < k; ++ky) {
                const int oy = iy * stride - pad + ky;
                for (int kx = 0; kx < k; ++kx) {
                  const int ox = ix * stride - pad + kx;
                  row[(o * k + ky) * k + kx] = (oy >= 0 && oy < OH && ox >= 0 && ox < OW)
                                                   ? gon[((int64_t)o * OH + oy) * OW + ox]
                                                   : T(0);
                }
              }
          }
        ConstMatMap<T> dcm(dcols.data(), (int64_t)H * W, ok2);
        if (xi->requires_grad) {
          ConstMatMap<T> wm(wi->storage->values.data(), I, ok2);
          MatMap<T> gxm(detail::acc_grad(xi) + (int64_t)n * I * H * W, I, (int64_t)H * W);
          gxm.noalias() += (dcm * wm.transpose()).transpose();
        }
        if (wi->requires_grad) {
          ConstMatMap<T> xm(xi->storage->values.data() + (int64_t)n * I * H * W, I, (int64_t)H * W);
          MatMap<T> gwm(detail::acc_grad(wi), I, ok2);
          gwm.noalias() += xm * dcm;
        }
        if (bi && bi->requires_grad) {
          T* gb = detail::acc_grad(bi);
          for (int o = 0; o < O; ++o) {
            T acc = T(0);
            const T* p = gon + (int64_t)o * OH * OW;
            for (int64_t i = 0; i < (int64_t)OH * OW; ++i) acc += p[i];
            gb[o] += acc;
          }
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization. Instance mode normalizes each (n,c) plane over HxW; batch
// mode normalizes each channel over NxHxW. Affine params gamma/beta are [C].

enum class NormMode { kInstance, kBatch };

template <typename T>
TensorT<T> norm_layer(const TensorT<T>& x, const TensorT<T>& gamma, const TensorT<T>& beta,
                      NormMode mode, T eps = T(1e-5)) {
  check(x.rank() == 4, "norm_layer: x must be NCHW");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  check(gamma.rank() == 1 && gamma.dim(0) == C && beta.rank() == 1 && beta.dim(0) == C,
        "norm_layer: gamma/beta must be [C]");
  const int64_t plane = (int64_t)H * W;
  const int groups = (mode == NormMode::kInstance) ? N * C : C;
  const int64_t gsize = (mode == NormMode::kInstance) ? plane : (int64_t)N * plane;

  TensorT<T> out(x.shape());
  std::vector<T> inv_std(groups), xhat;
  const bool trace = detail::tracing<T>({&x, &gamma, &beta});
  if (trace) xhat.resize(x.numel());

  const T* px = x.data();
  T* po = out.data();
  auto group_index = [&](int n, int c) { return mode == NormMode::kInstance ? n * C + c : c; };
  // two passes: moments, then normalize
  std::vector<T> mean_g(groups, T(0));
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const T* p = px + ((int64_t)n * C + c) * plane;
      T m = T(0);
      for (int64_t i = 0; i < plane; ++i) m += p[i];
      mean_g[group_index(n, c)] += m;
    }
  for (int g = 0; g < groups; ++g) mean_g[g] /= T(gsize);
  std::vector<T> var_g(groups, T(0));
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const T* p = px + ((int64_t)n * C + c) * plane;
      const T m = mean_g[group_index(n, c)];
      T v = T(0);
      for (int64_t i = 0; i < plane; ++i) {
        const T d = p[i] - m;
        v += d * d;
      }
      var_g[group_index(n, c)] += v;
    }
  for (int g = 0; g < groups; ++g) inv_std[g] = T(1) / std::sqrt(var_g[g] / T(gsize) + eps);

  const T* pg = gamma.data();
  const T* pb = beta.data();
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const int64_t base = ((int64_t)n * C + c) * plane;
      const int g = group_index(n, c);
      const T m = mean_g[g], is = inv_std[g], ga = pg[c], be = pb[c];
      for (int64_t i = 0; i < plane; ++i) {
        const T xh = (px[base + i] - m) * is;
        if (trace) xhat[base + i] = xh;
        po[base + i] = ga * xh + be;
      }
    }

  if (trace) {
    detail::mark_op_output(out);
    auto xi = x.impl(), gi = gamma.impl(), bi = beta.impl(), oi = out.impl();
    auto mode_c = mode;
    TapeT<T>::current()->record([xi, gi, bi, oi, xhat = std::move(xhat),
                                 inv_std = std::move(inv_std), N, C, plane, gsize, mode_c] {
      const T* go = detail::out_grad(oi);
      if (!go) return;
      const T* pg = gi->storage->values.data();
      auto group_index = [&](int n, int c) { return mode_c == NormMode::kInstance ? n * C + c : c; };
      if (gi->requires_grad || bi->requires_grad) {
        T* gga = gi->requires_grad ? detail::acc_grad(gi) : nullptr;
        T* gbe = bi->requires_grad ? detail::acc_grad(bi) : nullptr;
        for (int n = 0; n < N; ++n)
          for (int c = 0; c < C; ++c) {
            const int64_t base = ((int64_t)n * C + c) * plane;
            T sg = T(0), sb = T(0);
            for (int64_t i = 0; i < plane; ++i) {
              sg += go[base + i] * xhat[base + i];
              sb += go[base + i];
            }
            if (gga) gga[c] += sg;
            if (gbe) gbe[c] += sb;
          }
      }
      if (xi->requires_grad) {
        T* gx = detail::acc_grad(xi);
        const int groups = mode_c == NormMode::kInstance ? N * C : C;
        // per group: gx = inv_std * gamma * (dxh - mean(dxh) - xhat * mean(dxh*xhat))
        std::vector<T> s1(groups, T(0)), s2(groups, T(0));
        for (int n = 0; n < N; ++n)
          for (int c = 0; c < C; ++c) {
            const int64_t base = ((int64_t)n * C + c) * plane;
            const int g = group_index(n, c);
            const T ga = pg[c];
            for (int64_t i = 0; i < plane; ++i) {
              const T dxh = go[base + i] * ga;
              s1[g] += dxh;
              s2[g] += dxh * xhat[base + i];
            }
          }
        for (int g = 0; g < groups; ++g) {
          s1[g] /= T(gsize);
          s2[g] /= T(gsize);
        }
        for (int n = 0; n < N; ++n)
          for (int c = 0; c < C; ++c) {
            const int64_t base = ((int64_t)n * C + c) * plane;
            const int g = group_index(n, c);
            const T ga = pg[c], is = inv_std[g];
            for (int64_t i = 0; i < plane; ++i) {
              const T dxh = go[base + i] * ga;
              gx[base + i] += is * (dxh - s1[g] - xhat[base + i] * s2[g]);
            }
          }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Concat / slice along the channel-like axis (axis 1 of rank-2 or rank-4)

template <typename T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b) {
  check(a.rank() == b.rank() && (a.rank() == 2 || a.rank() == 4),
        "concat_channels: rank-2 or rank-4 inputs required");
  Shape os = a.shape();
  if (a.rank() == 2) {
    check(a.dim(0) == b.dim(0), "concat_channels: row mismatch");
    os[1] += b.dim(1);
  } else {
    check(a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2) && a.dim(3) == b.dim(3),
          "concat_channels: spatial/batch mismatch " + shape_str(a.shape()) + " vs " +
              shape_str(b.shape()));
    os[1] += b.dim(1);
  }
  TensorT<T> out(os);
  const int64_t outer = a.dim(0);
  const int64_t inner = (a.rank() == 4) ? (int64_t)a.dim(2) * a.dim(3) : 1;
  const int64_t ca = a.dim(1) * inner, cb = b.dim(1) * inner;
  for (int64_t n = 0; n < outer; ++n) {
    std::copy_n(a.data() + n * ca, ca, out.data() + n * (ca + cb));
    std::copy_n(b.data() + n * cb, cb, out.data() + n * (ca + cb) + ca);
  }
  if (detail::tracing<T>({&a, &b})) {
    detail::mark_op_output(out);
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    TapeT<T>::current()->record([ai, bi, oi, outer, ca, cb] {
      const T* go = detail::out_grad(oi);
      if (!go) return;
      if (ai->requires_grad) {
        T* ga = detail::acc_grad(ai);
        for (int64_t n = 0; n < outer; ++n)
          for (int64_t i = 0; i < ca; ++i) ga[n * ca + i] += go[n * (ca + cb) + i];
      }
      if (bi->requires_grad) {
        T* gb = detail::acc_grad(bi);
        for (int64_t n = 0; n < outer; ++n)
          for (int64_t i = 0; i < cb; ++i) gb[n * cb + i] += go[n * (ca + cb) + ca + i];
      }
    });
  }
  return out;
}

template <typename T>
TensorT<T> slice_channels(const TensorT<T>& x, int c0, int c1) {
  check(x.rank() == 2 || x.rank() == 4, "slice_channels: rank-2 or rank-4 input required");
  const int C = x.dim(1);
  check(0 <= c0 && c0 < c1 && c1 <= C, "slice_channels: bad range");
  Shape os = x.shape();
  os[1] = c1 - c0;
  TensorT<T> out(os);
  const int64_t outer = x.dim(0);
  const int64_t inner = (x.rank() == 4) ? (int64_t)x.dim(2) * x.dim(3) : 1;
  for (int64_t n = 0; n < outer; ++n)
    std::copy_n(x.data() + (n * C + c0) * inner, (int64_t)(c1 - c0) * inner,
                out.data() + n * (c1 - c0) * inner);
  if (detail::tracing<T>({&x})) {
    detail::mark_op_output(out);
    auto xi = x.impl(), oi = out.impl();
    TapeT<T>::current()->record([xi, oi, outer, inner, C, c0, c1] {
      const T* go = detail::out_grad(oi);
      if (!go) return;
      T* gx = detail::acc_grad(xi);
      for (int64_t n = 0; n < outer; ++n)
        for (int64_t i = 0; i < (int64_t)(c1 - c0) * inner; ++i)
          gx[(n * C + c0) * inner + i] += go[n * (c1 - c0) * inner + i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Area downsample by integer factor (average over SxS blocks)

template <typename T>
TensorT<T> spatial_area_downsample(const TensorT<T>& x, int S) {
  check(x.rank() == 4, "spatial_area_downsample: x must be NCHW");
  check(S >= 1 && x.dim(2) % S == 0 && x.dim(3) % S == 0,
        "spatial_area_downsample: spatial dims " + shape_str(x.shape()) +
            " not divisible by factor " + std::to_string(S));
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int OH = H / S, OW = W / S;
  TensorT<T> out(Shape{N, C, OH, OW});
  const T inv = T(1) / T(S * S);
  const T* px = x.data();
  T* po = out.data();
  for (int64_t nc = 0; nc < (int64_t)N * C; ++nc) {
    const T* p = px + nc * H * W;
    T* q = po + nc * OH * OW;
    for (int oy = 0; oy < OH; ++oy)
      for (int ox = 0; ox < OW; ++ox) {
        T acc = T(0);
        for (int dy = 0; dy < S; ++dy)
          for (int dx = 0; dx < S; ++dx) acc += p[(int64_t)(oy * S + dy) * W + ox * S + dx];
        q[(int64_t)oy * OW + ox] = acc * inv;
      }
  }
  if (detail::tracing<T>({&x})) {
    detail::mark_op_output(out);
    auto xi = x.impl(), oi = out.impl();
    TapeT<T>::current()->record([xi, oi, N, C, H, W, OH, OW, S, inv] {
      const T* go = detail::out_grad(oi);
      if (!go) return;
      T* gx = detail::acc_grad(xi);
      for (int64_t nc = 0; nc < (int64_t)N * C; ++nc) {
        const T* q = go + nc * OH * OW;
        T* p = gx + nc * H * W;
        for (int oy = 0; oy < OH; ++oy)
          for (int ox = 0; ox < OW; ++ox) {
            const T g = q[(int64_t)oy * OW + ox] * inv;
            for (int dy = 0; dy < S; ++dy)
              for (int dx = 0; dx < S; ++dx) p[(int64_t)(oy * S + dy) * W + ox * S + dx] += g;
          }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Replicate padding (used by the pyramid loss so constants survive borders)

template <typename T>
TensorT<T> replicate_pad2d(const TensorT<T>& x, int p) {
  check(x.rank() == 4 && p >= 0, "replicate_pad2d: x must be NCHW, p>=0");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int OH = H + 2 * p, OW = W + 2 * p;
  TensorT<T> out(Shape{N, C, OH, OW});
  const T* px = x.data();
  T* po = out.data();
  for (int64_t nc = 0; nc < (int64_t)N * C; ++nc)
    for (int oy = 0; oy < OH; ++oy) {
      const int iy = std::clamp(oy - p, 0, H - 1);
      for (int ox = 0; ox < OW; ++ox) {
        const int ix = std::clamp(ox - p, 0, W - 1);
        po[nc * OH * OW + (int64_t)oy * OW + ox] = px[nc * H * W + (int64_t)iy * W + ix];
      }
    }
  if (detail::tracing<T>({&x})) {
    detail::mark_op_output(out);
    auto xi = x.impl(), oi = out.impl();
    TapeT<T>::current()->record([xi, oi, N, C, H, W, OH, OW, p] {
      const T* go = detail::out_grad(oi);
      if (!go) return;
      T* gx = detail::acc_grad(xi);
      for (int64_t nc = 0; nc < (int64_t)N * C; ++nc)
        for (int oy = 0; oy < OH; ++oy) {
          const int iy = std::clamp(oy - p, 0, H - 1);
          for (int ox = 0; ox < OW; ++ox) {
            const int ix = std::clamp(ox - p, 0, W - 1);
            gx[nc * H * W + (int64_t)iy * W + ix] += go[nc * OH * OW + (int64_t)oy * OW + ox];
          }
        }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bilinear texture lookup. feat: [C,H,W], coords: [M,2] in [0,1]^2, out [M,C].
// Out-of-range coordinates clamp to the border. Texel centers sit at
// (i+0.5)/W so a coordinate exactly at a center returns that texel.

template <typename T>
TensorT<T> grid_sample_bilinear(const TensorT<T>& feat, const TensorT<T>& coords) {
  check(feat.rank() == 3, "grid_sample_bilinear: feat must be [C,H,W]");
  check(coords.rank() == 2 && coords.dim(1) == 2, "grid_sample_bilinear: coords must be [M,2]");
  const int C = feat.dim(0), H = feat.dim(1), W = feat.dim(2);
  const int M = coords.dim(0);
  const T* pc = coords.data();
  for (int64_t i = 0; i < (int64_t)M * 2; ++i)
    check(std::isfinite((double)pc[i]), "grid_sample_bilinear: non-finite coordinate");
  TensorT<T> out(Shape{M, C});
  const T* pf = feat.data();
  T* po = out.data();

  struct Tap {
    int x0, x1, y0, y1;
    T fx, fy;
  };
  std::vector<Tap> taps(M);
  for (int m = 0; m < M; ++m) {
    const T gx = pc[m * 2 + 0] * T(W) - T(0.5);
    const T gy = pc[m * 2 + 1] * T(H) - T(0.5);
    const int x0 = (int)std::floor(gx), y0 = (int)std::floor(gy);
    Tap t;
    t.fx = gx - T(x0);
    t.fy = gy - T(y0);
    t.x0 = std::clamp(x0, 0, W - 1);
    t.x1 = std::clamp(x0 + 1, 0, W - 1);
    t.y0 = std::clamp(y0, 0, H - 1);
    t.y1 = std::clamp(y0 + 1, 0, H - 1);
    taps[m] = t;
    for (int c = 0; c < C; ++c) {
      const T* fc = pf + (int64_t)c * H * W;
      const T v00 = fc[(int64_t)t.y0 * W + t.x0], v01 = fc[(int64_t)t.y0 * W + t.x1];
      const T v10 = fc[(int64_t)t.y1 * W + t.x0], v11 = fc[(int64_t)t.y1 * W + t.x1];
      po[(int64_t)m * C + c] = (T(1) - t.fy) * ((T(1) - t.fx) * v00 + t.fx * v01) +
                               t.fy * ((T(1) - t.fx) * v10 + t.fx * v11);
    }
  }

  if (detail::tracing<T>({&feat, &coords})) {
    detail::mark_op_output(out);
    auto fi = feat.impl(), ci = coords.impl(), oi = out.impl();
    TapeT<T>::current()->record([fi, ci, oi, taps = std::move(taps), C, H, W, M] {
      const T* go = detail::out_grad(oi);
      if (!go) return;
      const T* pf = fi->storage->values.data();
      T* gf = fi->requires_grad ? detail::acc_grad(fi) : nullptr;
      T* gc = ci->requires_grad ? detail::acc_grad(ci) : nullptr;
      for (int m = 0; m < M; ++m) {
        const Tap& t = taps[m];
        T dgx = T(0), dgy = T(0);
        for (int c = 0; c < C; ++c) {
          const T g = go[(int64_t)m * C + c];
          if (gf) {
            T* fc = gf + (int64_t)c * H * W;
            fc[(int64_t)t.y0 * W + t.x0] += g * (T(1) - t.fy) * (T(1) - t.fx);
            fc[(int64_t)t.y0 * W + t.x1] += g * (T(1) - t.fy) * t.fx;
            fc[(int64_t)t.y1 * W + t.x0] += g * t.fy * (T(1) - t.fx);
            fc[(int64_t)t.y1 * W + t.x1] += g * t.fy * t.fx;
          }
          if (gc) {
            const T* fc = pf + (int64_t)c * H * W;
            const T v00 = fc[(int64_t)t.y0 * W + t.x0], v01 = fc[(int64_t)t.y0 * W + t.x1];
            const T v10 = fc[(int64_t)t.y1 * W + t.x0], v11 = fc[(int64_t)t.y1 * W + t.x1];
            dgx += g * ((T(1) - t.fy) * (v01 - v00) + t.fy * (v11 - v10));
            dgy += g * ((T(1) - t.fx) * (v10 - v00) + t.fx * (v11 - v01));
          }
        }
        if (gc) {
          gc[m * 2 + 0] += dgx * T(W);
          gc[m * 2 + 1] += dgy * T(H);
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Multiply a NCHW tensor by a constant per-pixel mask [N,1,H,W] (no grad to
// the mask; it comes from the rasterizer).

template <typename T>
TensorT<T> mask_mul(const TensorT<T>& x, const TensorT<T>& mask) {
  check(x.rank() == 4 && mask.rank() == 4 && mask.dim(1) == 1 && mask.dim(0) == x.dim(0) &&
            mask.dim(2) == x.dim(2) && mask.dim(3) == x.dim(3),
        "mask_mul: mask must be [N,1,H,W] matching x " + shape_str(x.shape()));
  const int N = x.dim(0), C = x.dim(1);
  const int64_t plane = (int64_t)x.dim(2) * x.dim(3);
  TensorT<T> out(x.shape());
  const T* px = x.data();
  const T* pm = mask.data();
  T* po = out.data();
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int64_t i = 0; i < plane; ++i)
        po[((int64_t)n * C + c) * plane + i] = px[((int64_t)n * C + c) * plane + i] * pm[n * plane + i];
  if (detail::tracing<T>({&x})) {
    detail::mark_op_output(out);
    auto xi = x.impl(), mi = mask.impl(), oi = out.impl();
    TapeT<T>::current()->record([xi, mi, oi, N, C, plane] {
      const T* go = detail::out_grad(oi);
      if (!go) return;
      const T* pm = mi->storage->values.data();
      T* gx = detail::acc_grad(xi);
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
          for (int64_t i = 0; i < plane; ++i)
            gx[((int64_t)n * C + c) * plane + i] += go[((int64_t)n * C + c) * plane + i] * pm[n * plane + i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scatter per-row features into an image at given pixel indices; pixels not
// listed stay zero. rows: [R,C], out: [1,C,H,W]. Backward is the gather.

template <typename T>
TensorT<T> scatter_rows_to_image(const TensorT<T>& rows, const std::vector<int>& pixel_indices,
                                 int H, int W) {
  check(rows.rank() == 2, "scatter_rows_to_image: rows must be [R,C]");
  const int R = rows.dim(0), C = rows.dim(1);
  check((int)pixel_indices.size() == R, "scatter_rows_to_image: index count mismatch");
  for (int i : pixel_indices) check(i >= 0 && i < H * W, "scatter_rows_to_image: index out of range");
  TensorT<T> out(Shape{1, C, H, W});
  const T* pr = rows.data();
  T* po = out.data();
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) po[(int64_t)c * H * W + pixel_indices[r]] = pr[(int64_t)r * C + c];
  if (detail::tracing<T>({&rows})) {
    detail::mark_op_output(out);
    auto ri = rows.impl(), oi = out.impl();
    TapeT<T>::current()->record([ri, oi, pixel_indices, R, C, H, W] {
      const T* go = detail::out_grad(oi);
      if (!go) return;
      T* gr = detail::acc_grad(ri);
      for (int r = 0; r < R; ++r)
        for (int c = 0; c < C; ++c)
          gr[(int64_t)r * C + c] += go[(int64_t)c * H * W + pixel_indices[r]];
    });
  }
  return out;
}

}  // namespace hvtr
