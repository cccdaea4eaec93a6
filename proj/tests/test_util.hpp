#pragma once

// Shared test helpers: the central finite-difference gradient oracle and a
// few scene builders. The oracle re-runs the forward map around perturbed
// inputs and never touches the analytic backward path it is checking.

#include <catch2/catch_amalgamated.hpp>

#include <functional>

#include "hvtr/kernels.hpp"
#include "hvtr/rng.hpp"

namespace hvtr_test {

using hvtr::Shape;
using hvtr::TensorT;

// Max relative error between analytic gradients and central differences,
// step 1e-5, 64-bit. relative = |a - n| / max(1, |a|, |n|).
struct GradCheck {
  double max_rel_err = 0;
  double worst_analytic = 0, worst_numeric = 0;
  std::string worst_input;
};

template <typename Forward>
GradCheck grad_check(std::vector<TensorT<double>> inputs, Forward&& forward,
                     double step = 1e-5) {
  using hvtr::TapeT;
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }

  // analytic gradients
  {
    TapeT<double> tape;
    typename TapeT<double>::Scope scope(tape);
    auto loss = forward(inputs);
    REQUIRE(loss.numel() == 1);
    hvtr::backward(tape, loss);
  }

  GradCheck result;
  for (size_t ti = 0; ti < inputs.size(); ++ti) {
    auto& t = inputs[ti];
    for (int64_t i = 0; i < t.numel(); ++i) {
      const double analytic = t.grad_allocated() ? t.grad()[i] : 0.0;
      const double saved = t.data()[i];
      t.data()[i] = saved + step;
      const double fp = forward(inputs).item();
      t.data()[i] = saved - step;
      const double fm = forward(inputs).item();
      t.data()[i] = saved;
      const double numeric = (fp - fm) / (2 * step);
      const double rel =
          std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst_analytic = analytic;
        result.worst_numeric = numeric;
        result.worst_input = "input " + std::to_string(ti) + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

inline TensorT<double> random_tensor(Shape shape, hvtr::Rng& rng, double scale = 1.0) {
  TensorT<double> t(shape);
  for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.normal(0.0, scale);
  return t;
}

}  // namespace hvtr_test
