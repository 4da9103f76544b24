// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#include "dsraseg/tensor.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <utility>

#include "dsraseg/errors.hpp"

namespace dsraseg {

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return s.empty() ? 0 : n;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

namespace {

std::shared_ptr<detail::TensorNode> make_node(Shape shape, bool requires_grad) {
  if (shape.empty()) throw ConfigError("tensor shape must have at least one dimension");
  for (int d : shape) {
    if (d <= 0) throw ConfigError("tensor shape has non-positive extent " + shape_str(shape));
  }
  auto node = std::make_shared<detail::TensorNode>();
  node->shape = std::move(shape);
  node->data.assign(static_cast<size_t>(shape_numel(node->shape)), 0.0);
  node->requires_grad = requires_grad;
  return node;
}

thread_local Tape* t_active_tape = nullptr;
thread_local int t_nograd_depth = 0;
std::atomic<uint64_t> g_tape_counter{1};

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return Tensor(make_node(std::move(shape), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto node = make_node(std::move(shape), requires_grad);
  for (auto& v : node->data) v = value;
  return Tensor(std::move(node));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> values, bool requires_grad) {
  auto node = make_node(std::move(shape), requires_grad);
  if (static_cast<int64_t>(values.size()) != shape_numel(node->shape)) {
    throw ConfigError("from_data: " + std::to_string(values.size()) + " values for shape " +
                      shape_str(node->shape));
  }
  node->data = std::move(values);
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

const Shape& Tensor::shape() const {
  if (!node_) throw ConfigError("use of an undefined tensor");
  return node_->shape;
}

int Tensor::ndim() const { return static_cast<int>(shape().size()); }

int Tensor::dim(int i) const {
  const Shape& s = shape();
  if (i < 0 || i >= static_cast<int>(s.size()))
    throw ConfigError("dim index " + std::to_string(i) + " out of range for " + shape_str(s));
  return s[static_cast<size_t>(i)];
}

int64_t Tensor::numel() const { return shape_numel(shape()); }

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  if (!node_) throw ConfigError("use of an undefined tensor");
  node_->requires_grad = flag;
}

double* Tensor::data() {
  if (!node_) throw ConfigError("use of an undefined tensor");
  return node_->data.data();
}

const double* Tensor::data() const {
  if (!node_) throw ConfigError("use of an undefined tensor");
  return node_->data.data();
}

double* Tensor::grad() { return detail::grad_buf(*this).data(); }

const double* Tensor::grad() const {
  if (!node_) throw ConfigError("use of an undefined tensor");
  return node_->grad.empty() ? nullptr : node_->grad.data();
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

void Tensor::zero_grad() {
  if (node_ && !node_->grad.empty()) node_->grad.assign(node_->grad.size(), 0.0);
}

double Tensor::item() const {
  if (numel() != 1) throw ConfigError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

double& Tensor::at(int n, int c, int h, int w) {
  const Shape& s = shape();
  if (s.size() != 4) throw ConfigError("at(n,c,h,w) on tensor of shape " + shape_str(s));
  return node_->data[static_cast<size_t>(((static_cast<int64_t>(n) * s[1] + c) * s[2] + h) * s[3] + w)];
}

double Tensor::at(int n, int c, int h, int w) const {
  return const_cast<Tensor*>(this)->at(n, c, h, w);
}

Tensor Tensor::clone() const {
  if (!node_) throw ConfigError("use of an undefined tensor");
  return Tensor::from_data(node_->shape, node_->data);
}

bool Tensor::all_finite() const {
  if (!node_) return false;
  for (double v : node_->data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tape::Tape() {
  if (t_active_tape != nullptr)
    throw NumericError("a tape is already active on this thread");
  id_ = g_tape_counter.fetch_add(1, std::memory_order_relaxed);
  t_active_tape = this;
}

Tape::~Tape() {
  if (t_active_tape == this) t_active_tape = nullptr;
}

void Tape::record(std::function<void()> backward_step) {
  if (consumed_) throw NumericError("recording on a consumed tape");
  steps_.push_back(std::move(backward_step));
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw NumericError("tape already consumed by backward()");
  if (loss.numel() != 1)
    throw NumericError("backward() root must be scalar, got " + shape_str(loss.shape()));
  consumed_ = true;
  detail::grad_buf(loss)[0] = 1.0;
  for (size_t i = steps_.size(); i > 0; --i) steps_[i - 1]();
}

Tape* Tape::current() { return t_active_tape; }

NoGradGuard::NoGradGuard() { ++t_nograd_depth; }
NoGradGuard::~NoGradGuard() { --t_nograd_depth; }

namespace detail {

bool tracing() { return t_active_tape != nullptr && t_nograd_depth == 0; }

bool on_grad_path(const Tensor& t) {
  if (!t.defined()) return false;
  const auto& node = *t.node();
  if (node.requires_grad) return true;
  return t_active_tape != nullptr && node.tape_id == t_active_tape->id();
}

void mark_on_path(Tensor& t) {
  if (t_active_tape != nullptr) t.node()->tape_id = t_active_tape->id();
}

std::vector<double>& grad_buf(const Tensor& t) {
  auto node = t.node();
  if (!node) throw ConfigError("use of an undefined tensor");
  if (node->grad.empty()) node->grad.assign(node->data.size(), 0.0);
  return node->grad;
}

const double* grad_if_any(const Tensor& t) {
  auto node = t.node();
  if (!node || node->grad.empty()) return nullptr;
  return node->grad.data();
}

}  // namespace detail

}  // namespace dsraseg
