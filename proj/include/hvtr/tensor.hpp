#pragma once

// Dense row-major tensors with reverse-mode autodiff on an explicit tape.
// The scalar type is a template parameter: float is the production dtype,
// double exists for the finite-difference gradient checks in the test suite.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hvtr/common.hpp"

namespace hvtr {

using Shape = std::vector<int>;

inline int64_t numel_of(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

// Values and grad live in one storage block so reshaped views of a tensor
// see the same gradient buffer.
template <typename T>
struct TensorStorage {
  std::vector<T> values;
  std::vector<T> grad;  // empty until the backward pass first touches it
};

template <typename T>
struct TensorImpl {
  Shape shape;
  std::shared_ptr<TensorStorage<T>> storage;
  bool requires_grad = false;
  std::string name;
};

template <typename T>
class TensorT {
 public:
  using Scalar = T;

  TensorT() = default;

  explicit TensorT(Shape shape, T fill = T(0), bool requires_grad = false) {
    impl_ = std::make_shared<TensorImpl<T>>();
    impl_->shape = std::move(shape);
    for (int d : impl_->shape)
      check(d > 0, "tensor dimension must be positive, got shape " + shape_str(impl_->shape));
    impl_->storage = std::make_shared<TensorStorage<T>>();
    impl_->storage->values.assign(numel_of(impl_->shape), fill);
    impl_->requires_grad = requires_grad;
  }

  static TensorT zeros(Shape shape) { return TensorT(std::move(shape)); }
  static TensorT full(Shape shape, T v) { return TensorT(std::move(shape), v); }
  static TensorT scalar(T v) { return TensorT(Shape{1}, v); }

  static TensorT from_vector(Shape shape, std::vector<T> values) {
    TensorT t;
    t.impl_ = std::make_shared<TensorImpl<T>>();
    t.impl_->shape = std::move(shape);
    check(numel_of(t.impl_->shape) == (int64_t)values.size(),
          "value count does not match shape " + shape_str(t.impl_->shape));
    t.impl_->storage = std::make_shared<TensorStorage<T>>();
    t.impl_->storage->values = std::move(values);
    return t;
  }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int rank() const { return (int)impl_->shape.size(); }
  int dim(int i) const { return impl_->shape[i]; }
  int64_t numel() const { return numel_of(impl_->shape); }

  T* data() { return impl_->storage->values.data(); }
  const T* data() const { return impl_->storage->values.data(); }
  std::vector<T>& values() { return impl_->storage->values; }
  const std::vector<T>& values() const { return impl_->storage->values; }

  T item() const {
    check(numel() == 1, "item() requires a scalar tensor, got " + shape_str(shape()));
    return impl_->storage->values[0];
  }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool rg) { impl_->requires_grad = rg; }

  const std::string& name() const { return impl_->name; }
  TensorT& set_name(std::string n) {
    impl_->name = std::move(n);
    return *this;
  }

  bool grad_allocated() const { return !impl_->storage->grad.empty(); }
  void ensure_grad() {
    if (impl_->storage->grad.empty()) impl_->storage->grad.assign(numel(), T(0));
  }
  T* grad_data() {
    ensure_grad();
    return impl_->storage->grad.data();
  }
  const std::vector<T>& grad() const { return impl_->storage->grad; }
  void zero_grad() {
    if (!impl_->storage->grad.empty())
      std::fill(impl_->storage->grad.begin(), impl_->storage->grad.end(), T(0));
  }

  // Shares storage (values and grad); only the shape differs.
  TensorT reshape(Shape shape) const {
    check(numel_of(shape) == numel(),
          "reshape " + shape_str(this->shape()) + " -> " + shape_str(shape) + " changes numel");
    TensorT t;
    t.impl_ = std::make_shared<TensorImpl<T>>();
    t.impl_->shape = std::move(shape);
    t.impl_->storage = impl_->storage;
    t.impl_->requires_grad = impl_->requires_grad;
    t.impl_->name = impl_->name;
    return t;
  }

  // Value copy cut off from the graph.
  TensorT detached() const {
    TensorT t;
    t.impl_ = std::make_shared<TensorImpl<T>>();
    t.impl_->shape = impl_->shape;
    t.impl_->storage = std::make_shared<TensorStorage<T>>();
    t.impl_->storage->values = impl_->storage->values;
    t.impl_->requires_grad = false;
    return t;
  }

  std::shared_ptr<TensorImpl<T>> impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl<T>> impl_;
};

// Ordered record of executed operations. Ops append their backward closure
// during the forward pass; backward() replays them in reverse, which is a
// valid topological order by construction.
template <typename T>
class TapeT {
 public:
  TapeT() = default;
  TapeT(const TapeT&) = delete;
  TapeT& operator=(const TapeT&) = delete;

  void record(std::function<void()> fn) { ops_.push_back(std::move(fn)); }
  void note_output(std::shared_ptr<TensorStorage<T>> s) { outputs_.push_back(std::move(s)); }
  size_t size() const { return ops_.size(); }
  void clear() {
    ops_.clear();
    outputs_.clear();
  }

  // Intermediate (op-output) grads are scratch per traversal; zeroing them
  // here makes repeated backward calls accumulate exactly into the leaves.
  void zero_output_grads() {
    for (auto& s : outputs_)
      if (!s->grad.empty()) std::fill(s->grad.begin(), s->grad.end(), T(0));
  }

  void run_backward() {
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
  }

  // RAII ambient-tape scope: ops record onto the innermost active tape.
  class Scope {
   public:
    explicit Scope(TapeT& t) : prev_(current_ref()) { current_ref() = &t; }
    ~Scope() { current_ref() = prev_; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    TapeT* prev_;
  };

  static TapeT* current() { return current_ref(); }

 private:
  static TapeT*& current_ref() {
    static thread_local TapeT* cur = nullptr;
    return cur;
  }
  std::vector<std::function<void()>> ops_;
  std::vector<std::shared_ptr<TensorStorage<T>>> outputs_;
};

// Populates grad of every requires_grad leaf reachable from `loss`.
// Repeated calls without zero_grad() accumulate.
template <typename T>
void backward(TapeT<T>& tape, TensorT<T>& loss) {
  check(loss.defined() && loss.numel() == 1,
        "backward() requires a scalar loss" +
            (loss.defined() ? std::string(", got ") + shape_str(loss.shape()) : std::string()));
  tape.zero_output_grads();
  loss.grad_data()[0] += T(1);
  tape.run_backward();
}

namespace detail {

// True when an op executed now should be recorded for backward. Undefined
// tensors (optional inputs like a skipped bias) are ignored.
template <typename T>
bool tracing(std::initializer_list<const TensorT<T>*> inputs) {
  if (!TapeT<T>::current()) return false;
  for (const TensorT<T>* t : inputs)
    if (t->defined() && t->requires_grad()) return true;
  return false;
}

// Marks an op result: it requires grad and its grad buffer is scratch that
// the next backward traversal resets.
template <typename T>
void mark_op_output(TensorT<T>& out) {
  out.set_requires_grad(true);
  TapeT<T>::current()->note_output(out.impl()->storage);
}

// Output grad buffer, or nullptr when this output never reached the loss.
template <typename T>
T* out_grad(const std::shared_ptr<TensorImpl<T>>& impl) {
  auto& g = impl->storage->grad;
  return g.empty() ? nullptr : g.data();
}

template <typename T>
T* acc_grad(const std::shared_ptr<TensorImpl<T>>& impl) {
  auto& g = impl->storage->grad;
  if (g.empty()) g.assign(impl->storage->values.size(), T(0));
  return g.data();
}

}  // namespace detail

using Tensor = TensorT<float>;
using Tape = TapeT<float>;

}  // namespace hvtr
