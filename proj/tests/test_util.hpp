// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dsraseg/rng.hpp"
#include "dsraseg/tensor.hpp"

namespace dsraseg::testing {

inline Tensor rand_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                          bool requires_grad = false) {
  Tensor t = Tensor::zeros(std::move(shape), requires_grad);
  double* v = t.data();
  for (int64_t i = 0; i < t.numel(); ++i) v[i] = rng.uniform(lo, hi);
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  const double* pa = a.data();
  const double* pb = b.data();
  for (int64_t i = 0; i < a.numel(); ++i) {
    const double d = pa[i] > pb[i] ? pa[i] - pb[i] : pb[i] - pa[i];
    if (d > m) m = d;
  }
  return m;
}

inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.numel() != b.numel()) return false;
  const double* pa = a.data();
  const double* pb = b.data();
  for (int64_t i = 0; i < a.numel(); ++i)
    if (pa[i] != pb[i]) return false;
  return true;
}

}  // namespace dsraseg::testing
