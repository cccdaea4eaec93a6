#pragma once

// Adam with bias correction over a named parameter list.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "hvtr/tensor.hpp"

namespace hvtr {

template <typename T>
struct AdamStateT {
  T lr = T(2e-4);
  T beta1 = T(0.5);
  T beta2 = T(0.999);
  T eps = T(1e-8);
  int64_t step = 0;
  // slot i matches parameter i of every adam_step call with this state
  std::vector<std::vector<T>> m, v;
};

using AdamState = AdamStateT<float>;

// One Adam update over `params` (order must be stable across calls).
// Parameters without an allocated grad are treated as zero-grad.
template <typename T>
void adam_step(std::vector<TensorT<T>>& params, AdamStateT<T>& state) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].numel(), T(0));
      state.v[i].assign(params[i].numel(), T(0));
    }
  }
  check(state.m.size() == params.size(), "adam_step: parameter count changed");
  for (size_t i = 0; i < params.size(); ++i) {
    if (!params[i].grad_allocated()) continue;
    const auto& g = params[i].grad();
    for (int64_t j = 0; j < (int64_t)g.size(); ++j)
      if (!std::isfinite((double)g[j]))
        throw std::runtime_error("adam_step: non-finite gradient in parameter '" +
                                 (params[i].name().empty() ? std::string("<unnamed>")
                                                           : params[i].name()) +
                                 "'");
  }
  state.step += 1;
  const T bc1 = T(1) - std::pow(state.beta1, (T)state.step);
  const T bc2 = T(1) - std::pow(state.beta2, (T)state.step);
  for (size_t i = 0; i < params.size(); ++i) {
    check((int64_t)state.m[i].size() == params[i].numel(),
          "adam_step: shape of parameter '" + params[i].name() + "' changed");
    T* p = params[i].data();
    const bool has_grad = params[i].grad_allocated();
    const T* g = has_grad ? params[i].grad().data() : nullptr;
    T* m = state.m[i].data();
    T* v = state.v[i].data();
    const int64_t n = params[i].numel();
    for (int64_t j = 0; j < n; ++j) {
      const T gj = has_grad ? g[j] : T(0);
      m[j] = state.beta1 * m[j] + (T(1) - state.beta1) * gj;
      v[j] = state.beta2 * v[j] + (T(1) - state.beta2) * gj * gj;
      const T mhat = m[j] / bc1;
      const T vhat = v[j] / bc2;
      p[j] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

template <typename T>
void zero_grads(std::vector<TensorT<T>>& params) {
  for (auto& p : params) p.zero_grad();
}

}  // namespace hvtr
