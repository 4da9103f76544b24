// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#include "oracles/reference_ops.hpp"

#include <algorithm>
#include <cmath>

#include "dsraseg/errors.hpp"

namespace dsraseg::testing {

Tensor ref_conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
                  int pad) {
  const Shape& is = input.shape();
  const Shape& ws = weight.shape();
  const int n = is[0], ci = is[1], h = is[2], w = is[3];
  const int co = ws[0], kh = ws[2], kw = ws[3];
  if (ws[1] != ci) throw ConfigError("ref_conv2d: channel mismatch");
  const int oh = (h + 2 * pad - kh) / stride + 1;
  const int ow = (w + 2 * pad - kw) / stride + 1;

  Tensor out = Tensor::zeros({n, co, oh, ow});
  double* o = out.data();
  const double* x = input.data();
  const double* wt = weight.data();
  const double* b = bias.data();
  for (int in = 0; in < n; ++in)
    for (int oc = 0; oc < co; ++oc)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double acc = b[oc];
          for (int ic = 0; ic < ci; ++ic)
            for (int ky = 0; ky < kh; ++ky)
              for (int kx = 0; kx < kw; ++kx) {
                const int iy = oy * stride - pad + ky;
                const int ix = ox * stride - pad + kx;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                acc += x[((static_cast<int64_t>(in) * ci + ic) * h + iy) * w + ix] *
                       wt[((static_cast<int64_t>(oc) * ci + ic) * kh + ky) * kw + kx];
              }
          o[((static_cast<int64_t>(in) * co + oc) * oh + oy) * ow + ox] = acc;
        }
  return out;
}

Tensor ref_bilinear(const Tensor& input, int out_h, int out_w) {
  const Shape& is = input.shape();
  const int n = is[0], c = is[1], h = is[2], w = is[3];
  Tensor out = Tensor::zeros({n, c, out_h, out_w});
  double* o = out.data();
  const double* x = input.data();
  for (int in = 0; in < n; ++in)
    for (int ic = 0; ic < c; ++ic) {
      const double* plane = x + (static_cast<int64_t>(in) * c + ic) * h * w;
      for (int oy = 0; oy < out_h; ++oy)
        for (int ox = 0; ox < out_w; ++ox) {
          const double sy =
              std::clamp((oy + 0.5) * (static_cast<double>(h) / out_h) - 0.5, 0.0,
                         static_cast<double>(h - 1));
          const double sx =
              std::clamp((ox + 0.5) * (static_cast<double>(w) / out_w) - 0.5, 0.0,
                         static_cast<double>(w - 1));
          const int y0 = static_cast<int>(std::floor(sy));
          const int x0 = static_cast<int>(std::floor(sx));
          const int y1 = std::min(y0 + 1, h - 1);
          const int x1 = std::min(x0 + 1, w - 1);
          const double ty = sy - y0, tx = sx - x0;
          const double v = (1.0 - ty) * (1.0 - tx) * plane[y0 * w + x0] +
                           (1.0 - ty) * tx * plane[y0 * w + x1] +
                           ty * (1.0 - tx) * plane[y1 * w + x0] + ty * tx * plane[y1 * w + x1];
          o[((static_cast<int64_t>(in) * c + ic) * out_h + oy) * out_w + ox] = v;
        }
    }
  return out;
}

Tensor ref_softmax_channels(const Tensor& input) {
  const Shape& is = input.shape();
  const int n = is[0], c = is[1], h = is[2], w = is[3];
  Tensor out = Tensor::zeros(is);
  double* o = out.data();
  const double* x = input.data();
  const int64_t plane = static_cast<int64_t>(h) * w;
  for (int in = 0; in < n; ++in)
    for (int64_t p = 0; p < plane; ++p) {
      const int64_t base = static_cast<int64_t>(in) * c * plane + p;
      double mx = x[base];
      for (int ic = 1; ic < c; ++ic) mx = std::max(mx, x[base + ic * plane]);
      double den = 0.0;
      for (int ic = 0; ic < c; ++ic) den += std::exp(x[base + ic * plane] - mx);
      for (int ic = 0; ic < c; ++ic) o[base + ic * plane] = std::exp(x[base + ic * plane] - mx) / den;
    }
  return out;
}

Tensor ref_softmax_spatial(const Tensor& input) {
  const Shape& is = input.shape();
  const int n = is[0], c = is[1], h = is[2], w = is[3];
  Tensor out = Tensor::zeros(is);
  double* o = out.data();
  const double* x = input.data();
  const int64_t plane = static_cast<int64_t>(h) * w;
  for (int in = 0; in < n; ++in)
    for (int ic = 0; ic < c; ++ic) {
      const int64_t base = (static_cast<int64_t>(in) * c + ic) * plane;
      double mx = x[base];
      for (int64_t p = 1; p < plane; ++p) mx = std::max(mx, x[base + p]);
      double den = 0.0;
      for (int64_t p = 0; p < plane; ++p) den += std::exp(x[base + p] - mx);
      for (int64_t p = 0; p < plane; ++p) o[base + p] = std::exp(x[base + p] - mx) / den;
    }
  return out;
}

}  // namespace dsraseg::testing
