// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "dsraseg/tensor.hpp"

namespace dsraseg {

// Differentiable kernels. All image tensors are NCHW fp64. Each op validates
// shapes, computes the forward result, and (when a tape is recording and an
// input lies on the grad path) records one backward closure on the tape.

// Elementwise; shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);

Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);

// Concatenates along the channel axis; all inputs share N, H, W.
Tensor concat_channels(const std::vector<Tensor>& xs);

// 2-D cross-correlation with zero padding.
//   input  [N, Ci, H, W], weight [Co, Ci, Kh, Kw], bias [Co]
//   output [N, Co, (H+2p-Kh)/stride+1, (W+2p-Kw)/stride+1]
// Errors on channel mismatch or a non-positive output extent.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
              int padding);

// Bilinear interpolation to (out_h, out_w) with half-pixel centers:
//   src = (dst + 0.5) * (in_extent / out_extent) - 0.5, clamped to [0, in-1].
// Computed in lerp form, so identity resizes are bitwise exact and constant
// maps stay exactly constant.
Tensor bilinear_resize(const Tensor& input, int out_h, int out_w);

// Convenience: resize `input` to the spatial extent of `ref`.
Tensor resize_like(const Tensor& input, const Tensor& ref);

// Softmax over the channel axis, one distribution per (n, y, x).
Tensor softmax_channels(const Tensor& input);
// Softmax over all spatial positions, one distribution per (n, c).
Tensor softmax_spatial(const Tensor& input);

// Full reductions to a scalar tensor of shape {1}.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// Throws NumericError when any element is NaN/Inf.
void assert_finite(const Tensor& t, const char* what);

}  // namespace dsraseg
