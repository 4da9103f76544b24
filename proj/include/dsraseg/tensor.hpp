// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace dsraseg {

// Dense row-major shape; 4-D NCHW for image tensors, {1} for scalars.
using Shape = std::vector<int>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);
bool same_shape(const Shape& a, const Shape& b);

namespace detail {

// Shared storage behind Tensor handles. `tape_id` marks the tape on whose
// grad path this node was produced; leaves use `requires_grad` instead.
struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated lazily; same length as data once live
  bool requires_grad = false;
  uint64_t tape_id = 0;
};

}  // namespace detail

// Handle-semantics fp64 tensor. Copies share storage; clone() deep-copies.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int ndim() const;
  int dim(int i) const;
  int64_t numel() const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);

  double* data();
  const double* data() const;

  // Gradient buffer; allocated (zero-filled) on first mutable access.
  double* grad();
  const double* grad() const;  // nullptr until allocated
  bool has_grad() const;
  void zero_grad();

  double item() const;  // requires numel() == 1

  // NCHW element access; requires ndim() == 4. Debug-friendly, not for hot loops.
  double& at(int n, int c, int h, int w);
  double at(int n, int c, int h, int w) const;

  // Deep copy of the values; the copy is a detached constant.
  Tensor clone() const;

  bool all_finite() const;

  std::shared_ptr<detail::TensorNode> node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

// Records backward closures in execution order; backward() replays them in
// exact reverse order. One tape may be active per thread at a time, and a
// tape can be consumed by backward() once.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::function<void()> backward_step);
  // Seeds d(loss)/d(loss) = 1 and replays the tape. `loss` must be scalar.
  void backward(const Tensor& loss);

  size_t size() const { return steps_.size(); }
  bool consumed() const { return consumed_; }
  uint64_t id() const { return id_; }

  static Tape* current();

 private:
  std::vector<std::function<void()>> steps_;
  bool consumed_ = false;
  uint64_t id_ = 0;
};

// Suspends tape recording while alive (inference / metric evaluation).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

namespace detail {

// True when an active tape is recording (no NoGradGuard in scope).
bool tracing();
// True when `t` feeds gradients on the current tape: a grad-requiring leaf,
// or an intermediate produced on this same tape. Intermediates from other
// (dead) tapes are constants.
bool on_grad_path(const Tensor& t);
// Marks an op output as belonging to the current tape's grad path.
void mark_on_path(Tensor& t);
// Ensures the grad buffer exists and returns it.
std::vector<double>& grad_buf(const Tensor& t);
// Grad buffer of an op output inside a backward closure; nullptr means no
// gradient ever reached this output, so the closure can return early.
const double* grad_if_any(const Tensor& t);

}  // namespace detail

}  // namespace dsraseg
