// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dsraseg/tensor.hpp"

namespace dsraseg {

struct GradcheckInput {
  std::string name;
  Tensor tensor;
};

struct GradcheckReport {
  double max_rel_error = 0.0;
  int64_t elements = 0;
  // One entry per checked input, in input order: (name, max rel error).
  std::vector<std::pair<std::string, double>> per_input;
  bool pass(double tol = 1e-4) const { return max_rel_error < tol; }
};

// Compares tape gradients against central finite differences.
//
// Non-scalar outputs are reduced to a scalar through a fixed random probe:
// s = sum(f(x) * v) with v ~ U[-1, 1) drawn from probe_seed, so every output
// element participates. The relative error per element is
//   |analytic - numeric| / max(1, |analytic|, |numeric|).
// `f` is evaluated twice up front; any bitwise mismatch raises NumericError
// (non-deterministic function). Input values are restored bitwise.
GradcheckReport gradcheck(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                          std::vector<GradcheckInput> inputs, double step = 1e-5,
                          uint64_t probe_seed = 0x5eedd5ULL);

}  // namespace dsraseg
