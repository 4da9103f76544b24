// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#include "dsraseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "dsraseg/errors.hpp"
#include "dsraseg/ops.hpp"
#include "dsraseg/rng.hpp"

namespace dsraseg {

namespace {

double probe_dot(const Tensor& y, const std::vector<double>& v) {
  if (y.numel() != static_cast<int64_t>(v.size()))
    throw NumericError("gradcheck: output shape changed between evaluations");
  const double* py = y.data();
  double acc = 0.0;
  for (size_t i = 0; i < v.size(); ++i) acc += py[i] * v[i];
  return acc;
}

}  // namespace

GradcheckReport gradcheck(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                          std::vector<GradcheckInput> inputs, double step, uint64_t probe_seed) {
  if (inputs.empty()) throw ConfigError("gradcheck: no inputs to check");

  std::vector<Tensor> xs;
  xs.reserve(inputs.size());
  for (auto& gi : inputs) xs.push_back(gi.tensor);

  // Determinism probe: two independent forward passes must agree bitwise.
  std::vector<double> base;
  {
    NoGradGuard ng;
    Tensor y0 = f(xs);
    assert_finite(y0, "gradcheck output");
    Tensor y1 = f(xs);
    if (y0.numel() != y1.numel() ||
        std::memcmp(y0.data(), y1.data(), static_cast<size_t>(y0.numel()) * sizeof(double)) != 0) {
      throw NumericError("gradcheck: function is not deterministic (repeated evaluation mismatch)");
    }
    base.assign(y0.data(), y0.data() + y0.numel());
  }

  Rng rng(probe_seed);
  std::vector<double> probe(base.size());
  for (auto& v : probe) v = rng.uniform(-1.0, 1.0);

  // Analytic gradients through the tape.
  std::vector<std::vector<double>> analytic(inputs.size());
  std::vector<bool> old_flags(inputs.size());
  for (size_t i = 0; i < inputs.size(); ++i) {
    old_flags[i] = xs[i].requires_grad();
    xs[i].set_requires_grad(true);
    xs[i].zero_grad();
  }
  {
    Tape tape;
    Tensor y = f(xs);
    Tensor probe_t = Tensor::from_data(y.shape(), probe);
    Tensor s = sum(mul(y, probe_t));
    tape.backward(s);
  }
  for (size_t i = 0; i < inputs.size(); ++i) {
    const double* g = xs[i].grad();
    const int64_t n = xs[i].numel();
    if (g == nullptr) {
      analytic[i].assign(static_cast<size_t>(n), 0.0);
    } else {
      analytic[i].assign(g, g + n);
    }
    xs[i].set_requires_grad(old_flags[i]);
  }

  // Central differences, one element at a time.
  GradcheckReport report;
  NoGradGuard ng;
  for (size_t i = 0; i < inputs.size(); ++i) {
    double worst = 0.0;
    double* px = xs[i].data();
    const int64_t n = xs[i].numel();
    for (int64_t k = 0; k < n; ++k) {
      const double saved = px[k];
      px[k] = saved + step;
      const double fp = probe_dot(f(xs), probe);
      px[k] = saved - step;
      const double fm = probe_dot(f(xs), probe);
      px[k] = saved;
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic[i][static_cast<size_t>(k)];
      if (!std::isfinite(numeric) || !std::isfinite(a))
        throw NumericError("gradcheck: non-finite gradient for input " + inputs[i].name);
      const double rel = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      worst = std::max(worst, rel);
    }
    report.per_input.emplace_back(inputs[i].name, worst);
    report.max_rel_error = std::max(report.max_rel_error, worst);
    report.elements += n;
  }
  return report;
}

}  // namespace dsraseg
