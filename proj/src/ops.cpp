// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#include "dsraseg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "dsraseg/errors.hpp"
#include "dsraseg/parallel.hpp"

namespace dsraseg {

namespace {

using detail::grad_buf;
using detail::grad_if_any;
using detail::mark_on_path;
using detail::on_grad_path;
using detail::tracing;

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!same_shape(a.shape(), b.shape())) {
    throw ConfigError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                      shape_str(b.shape()));
  }
}

void check_4d(const Tensor& t, const char* op) {
  if (t.ndim() != 4)
    throw ConfigError(std::string(op) + ": expected a 4-D NCHW tensor, got " + shape_str(t.shape()));
}

// Shared scaffolding for unary/binary elementwise ops.
template <typename Fwd, typename RecordBwd>
Tensor make_op(Shape out_shape, Fwd&& fwd, RecordBwd&& record, bool any_on_path) {
  Tensor out = Tensor::zeros(std::move(out_shape));
  fwd(out);
  if (tracing() && any_on_path) {
    mark_on_path(out);
    record(out);
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  const int64_t n = a.numel();
  const bool pa = on_grad_path(a), pb = on_grad_path(b);
  return make_op(
      a.shape(),
      [&](Tensor& out) {
        const double* pa_ = a.data();
        const double* pb_ = b.data();
        double* po = out.data();
        for (int64_t i = 0; i < n; ++i) po[i] = pa_[i] + pb_[i];
      },
      [&](Tensor& out) {
        Tape::current()->record([a, b, out, n, pa, pb]() {
          const double* g = grad_if_any(out);
          if (!g) return;
          if (pa) {
            double* ga = grad_buf(a).data();
            for (int64_t i = 0; i < n; ++i) ga[i] += g[i];
          }
          if (pb) {
            double* gb = grad_buf(b).data();
            for (int64_t i = 0; i < n; ++i) gb[i] += g[i];
          }
        });
      },
      pa || pb);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  const int64_t n = a.numel();
  const bool pa = on_grad_path(a), pb = on_grad_path(b);
  return make_op(
      a.shape(),
      [&](Tensor& out) {
        const double* pa_ = a.data();
        const double* pb_ = b.data();
        double* po = out.data();
        for (int64_t i = 0; i < n; ++i) po[i] = pa_[i] - pb_[i];
      },
      [&](Tensor& out) {
        Tape::current()->record([a, b, out, n, pa, pb]() {
          const double* g = grad_if_any(out);
          if (!g) return;
          if (pa) {
            double* ga = grad_buf(a).data();
            for (int64_t i = 0; i < n; ++i) ga[i] += g[i];
          }
          if (pb) {
            double* gb = grad_buf(b).data();
            for (int64_t i = 0; i < n; ++i) gb[i] -= g[i];
          }
        });
      },
      pa || pb);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  const int64_t n = a.numel();
  const bool pa = on_grad_path(a), pb = on_grad_path(b);
  return make_op(
      a.shape(),
      [&](Tensor& out) {
        const double* pa_ = a.data();
        const double* pb_ = b.data();
        double* po = out.data();
        for (int64_t i = 0; i < n; ++i) po[i] = pa_[i] * pb_[i];
      },
      [&](Tensor& out) {
        Tape::current()->record([a, b, out, n, pa, pb]() {
          const double* g = grad_if_any(out);
          if (!g) return;
          if (pa) {
            double* ga = grad_buf(a).data();
            const double* vb = b.data();
            for (int64_t i = 0; i < n; ++i) ga[i] += g[i] * vb[i];
          }
          if (pb) {
            double* gb = grad_buf(b).data();
            const double* va = a.data();
            for (int64_t i = 0; i < n; ++i) gb[i] += g[i] * va[i];
          }
        });
      },
      pa || pb);
}

Tensor scale(const Tensor& a, double factor) {
  const int64_t n = a.numel();
  const bool pa = on_grad_path(a);
  return make_op(
      a.shape(),
      [&](Tensor& out) {
        const double* pa_ = a.data();
        double* po = out.data();
        for (int64_t i = 0; i < n; ++i) po[i] = pa_[i] * factor;
      },
      [&](Tensor& out) {
        Tape::current()->record([a, out, n, factor]() {
          const double* g = grad_if_any(out);
          if (!g) return;
          double* ga = grad_buf(a).data();
          for (int64_t i = 0; i < n; ++i) ga[i] += g[i] * factor;
        });
      },
      pa);
}

Tensor add_scalar(const Tensor& a, double value) {
  const int64_t n = a.numel();
  const bool pa = on_grad_path(a);
  return make_op(
      a.shape(),
      [&](Tensor& out) {
        const double* pa_ = a.data();
        double* po = out.data();
        for (int64_t i = 0; i < n; ++i) po[i] = pa_[i] + value;
      },
      [&](Tensor& out) {
        Tape::current()->record([a, out, n]() {
          const double* g = grad_if_any(out);
          if (!g) return;
          double* ga = grad_buf(a).data();
          for (int64_t i = 0; i < n; ++i) ga[i] += g[i];
        });
      },
      pa);
}

Tensor relu(const Tensor& a) {
  const int64_t n = a.numel();
  const bool pa = on_grad_path(a);
  return make_op(
      a.shape(),
      [&](Tensor& out) {
        const double* pa_ = a.data();
        double* po = out.data();
        for (int64_t i = 0; i < n; ++i) po[i] = pa_[i] > 0.0 ? pa_[i] : 0.0;
      },
      [&](Tensor& out) {
        Tape::current()->record([a, out, n]() {
          const double* g = grad_if_any(out);
          if (!g) return;
          double* ga = grad_buf(a).data();
          const double* va = a.data();
          for (int64_t i = 0; i < n; ++i) {
            if (va[i] > 0.0) ga[i] += g[i];
          }
        });
      },
      pa);
}

namespace {
inline double stable_sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}
}  // namespace

Tensor sigmoid(const Tensor& a) {
  const int64_t n = a.numel();
  const bool pa = on_grad_path(a);
  return make_op(
      a.shape(),
      [&](Tensor& out) {
        const double* pa_ = a.data();
        double* po = out.data();
        for (int64_t i = 0; i < n; ++i) po[i] = stable_sigmoid(pa_[i]);
      },
      [&](Tensor& out) {
        Tape::current()->record([a, out, n]() {
          const double* g = grad_if_any(out);
          if (!g) return;
          double* ga = grad_buf(a).data();
          const double* s = out.data();
          for (int64_t i = 0; i < n; ++i) ga[i] += g[i] * s[i] * (1.0 - s[i]);
        });
      },
      pa);
}

Tensor concat_channels(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw ConfigError("concat_channels: empty input list");
  for (const auto& x : xs) check_4d(x, "concat_channels");
  const int N = xs[0].dim(0), H = xs[0].dim(2), W = xs[0].dim(3);
  int C = 0;
  bool any_path = false;
  for (const auto& x : xs) {
    if (x.dim(0) != N || x.dim(2) != H || x.dim(3) != W) {
      throw ConfigError("concat_channels: mismatched N/H/W between " + shape_str(xs[0].shape()) +
                        " and " + shape_str(x.shape()));
    }
    C += x.dim(1);
    any_path = any_path || on_grad_path(x);
  }
  Tensor out = Tensor::zeros({N, C, H, W});
  const int64_t plane = static_cast<int64_t>(H) * W;
  {
    double* po = out.data();
    int c_off = 0;
    for (const auto& x : xs) {
      const int ci = x.dim(1);
      const double* px = x.data();
      for (int nn = 0; nn < N; ++nn) {
        std::memcpy(po + (static_cast<int64_t>(nn) * C + c_off) * plane,
                    px + static_cast<int64_t>(nn) * ci * plane,
                    static_cast<size_t>(ci * plane) * sizeof(double));
      }
      c_off += ci;
    }
  }
  if (tracing() && any_path) {
    mark_on_path(out);
    std::vector<Tensor> inputs = xs;
    std::vector<bool> path(xs.size());
    for (size_t i = 0; i < xs.size(); ++i) path[i] = on_grad_path(xs[i]);
    Tape::current()->record([inputs, path, out, N, C, plane]() {
      const double* g = grad_if_any(out);
      if (!g) return;
      int c_off = 0;
      for (size_t i = 0; i < inputs.size(); ++i) {
        const int ci = inputs[i].dim(1);
        if (path[i]) {
          double* gi = grad_buf(inputs[i]).data();
          for (int nn = 0; nn < N; ++nn) {
            const double* gsrc = g + (static_cast<int64_t>(nn) * C + c_off) * plane;
            double* gdst = gi + static_cast<int64_t>(nn) * ci * plane;
            for (int64_t k = 0; k < ci * plane; ++k) gdst[k] += gsrc[k];
          }
        }
        c_off += ci;
      }
    });
  }
  return out;
}

namespace {

struct ConvDims {
  int N, Ci, H, W, Co, Kh, Kw, Ho, Wo, stride, pad;
};

// Output ranges for which the corresponding input index stays in bounds:
// idx = o*stride + k - pad must lie in [0, extent).
inline void valid_out_range(int k, int pad, int stride, int extent, int out_extent, int& o0,
                            int& o1) {
  const int lo_num = pad - k;
  o0 = lo_num <= 0 ? 0 : (lo_num + stride - 1) / stride;
  const int hi_num = extent - 1 + pad - k;
  o1 = hi_num < 0 ? -1 : std::min(out_extent - 1, hi_num / stride);
}

void conv2d_forward(const ConvDims& d, const double* in, const double* w, const double* b,
                    double* out) {
  const int64_t in_plane = static_cast<int64_t>(d.H) * d.W;
  const int64_t out_plane = static_cast<int64_t>(d.Ho) * d.Wo;
  parallel_for(0, static_cast<int64_t>(d.N) * d.Co, [&](int64_t job) {
    const int n = static_cast<int>(job / d.Co);
    const int co = static_cast<int>(job % d.Co);
    double* dst = out + (static_cast<int64_t>(n) * d.Co + co) * out_plane;
    const double bias = b[co];
    for (int64_t i = 0; i < out_plane; ++i) dst[i] = bias;
    for (int ci = 0; ci < d.Ci; ++ci) {
      const double* src = in + (static_cast<int64_t>(n) * d.Ci + ci) * in_plane;
      const double* wk = w + (static_cast<int64_t>(co) * d.Ci + ci) * d.Kh * d.Kw;
      for (int ky = 0; ky < d.Kh; ++ky) {
        int oy0, oy1;
        valid_out_range(ky, d.pad, d.stride, d.H, d.Ho, oy0, oy1);
        for (int kx = 0; kx < d.Kw; ++kx) {
          const double wv = wk[ky * d.Kw + kx];
          if (wv == 0.0) continue;
          int ox0, ox1;
          valid_out_range(kx, d.pad, d.stride, d.W, d.Wo, ox0, ox1);
          for (int oy = oy0; oy <= oy1; ++oy) {
            const double* srow = src + static_cast<int64_t>(oy * d.stride + ky - d.pad) * d.W +
                                 (kx - d.pad);
            double* drow = dst + static_cast<int64_t>(oy) * d.Wo;
            if (d.stride == 1) {
              for (int ox = ox0; ox <= ox1; ++ox) drow[ox] += wv * srow[ox];
            } else {
              for (int ox = ox0; ox <= ox1; ++ox) drow[ox] += wv * srow[ox * d.stride];
            }
          }
        }
      }
    }
  });
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
              int padding) {
  check_4d(input, "conv2d input");
  check_4d(weight, "conv2d weight");
  if (bias.ndim() != 1)
    throw ConfigError("conv2d: bias must be 1-D, got " + shape_str(bias.shape()));
  if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
  if (padding < 0) throw ConfigError("conv2d: padding must be >= 0");

  ConvDims d;
  d.N = input.dim(0);
  d.Ci = input.dim(1);
  d.H = input.dim(2);
  d.W = input.dim(3);
  d.Co = weight.dim(0);
  d.Kh = weight.dim(2);
  d.Kw = weight.dim(3);
  d.stride = stride;
  d.pad = padding;
  if (weight.dim(1) != d.Ci) {
    throw ConfigError("conv2d: weight expects " + std::to_string(weight.dim(1)) +
                      " input channels, input has " + std::to_string(d.Ci));
  }
  if (bias.dim(0) != d.Co)
    throw ConfigError("conv2d: bias has " + std::to_string(bias.dim(0)) + " entries for " +
                      std::to_string(d.Co) + " output channels");
  d.Ho = (d.H + 2 * padding - d.Kh) / stride + 1;
  d.Wo = (d.W + 2 * padding - d.Kw) / stride + 1;
  if (d.H + 2 * padding - d.Kh < 0 || d.W + 2 * padding - d.Kw < 0 || d.Ho <= 0 || d.Wo <= 0) {
    throw ConfigError("conv2d: non-positive output extent for input " + shape_str(input.shape()) +
                      ", kernel " + shape_str(weight.shape()) + ", stride " +
                      std::to_string(stride) + ", padding " + std::to_string(padding));
  }

  Tensor out = Tensor::zeros({d.N, d.Co, d.Ho, d.Wo});
  conv2d_forward(d, input.data(), weight.data(), bias.data(), out.data());

  const bool pi = on_grad_path(input), pw = on_grad_path(weight), pb = on_grad_path(bias);
  if (tracing() && (pi || pw || pb)) {
    mark_on_path(out);
    Tensor in_t = input, w_t = weight, b_t = bias;
    Tape::current()->record([in_t, w_t, b_t, out, d, pi, pw, pb]() {
      const double* g = grad_if_any(out);
      if (!g) return;
      const int64_t in_plane = static_cast<int64_t>(d.H) * d.W;
      const int64_t out_plane = static_cast<int64_t>(d.Ho) * d.Wo;

      if (pb) {
        double* gb = grad_buf(b_t).data();
        for (int co = 0; co < d.Co; ++co) {
          double acc = 0.0;
          for (int n = 0; n < d.N; ++n) {
            const double* grow = g + (static_cast<int64_t>(n) * d.Co + co) * out_plane;
            for (int64_t i = 0; i < out_plane; ++i) acc += grow[i];
          }
          gb[co] += acc;
        }
      }

      if (pw) {
        // One job per output channel: each writes a disjoint dW slab.
        double* gw = grad_buf(w_t).data();
        const double* in = in_t.data();
        parallel_for(0, d.Co, [&](int64_t co) {
          for (int ci = 0; ci < d.Ci; ++ci) {
            double* gwk = gw + (co * d.Ci + ci) * d.Kh * d.Kw;
            for (int ky = 0; ky < d.Kh; ++ky) {
              int oy0, oy1;
              valid_out_range(ky, d.pad, d.stride, d.H, d.Ho, oy0, oy1);
              for (int kx = 0; kx < d.Kw; ++kx) {
                int ox0, ox1;
                valid_out_range(kx, d.pad, d.stride, d.W, d.Wo, ox0, ox1);
                double acc = 0.0;
                for (int n = 0; n < d.N; ++n) {
                  const double* src = in + (static_cast<int64_t>(n) * d.Ci + ci) * in_plane;
                  const double* gpl = g + (static_cast<int64_t>(n) * d.Co + co) * out_plane;
                  for (int oy = oy0; oy <= oy1; ++oy) {
                    const double* srow =
                        src + static_cast<int64_t>(oy * d.stride + ky - d.pad) * d.W + (kx - d.pad);
                    const double* grow = gpl + static_cast<int64_t>(oy) * d.Wo;
                    if (d.stride == 1) {
                      for (int ox = ox0; ox <= ox1; ++ox) acc += grow[ox] * srow[ox];
                    } else {
                      for (int ox = ox0; ox <= ox1; ++ox) acc += grow[ox] * srow[ox * d.stride];
                    }
                  }
                }
                gwk[ky * d.Kw + kx] += acc;
              }
            }
          }
        });
      }

      if (pi) {
        // One job per sample: each writes a disjoint dInput slab.
        double* gi = grad_buf(in_t).data();
        const double* w = w_t.data();
        parallel_for(0, d.N, [&](int64_t n) {
          for (int co = 0; co < d.Co; ++co) {
            const double* gpl = g + (n * d.Co + co) * out_plane;
            for (int ci = 0; ci < d.Ci; ++ci) {
              double* gsl = gi + (n * d.Ci + ci) * in_plane;
              const double* wk = w + (static_cast<int64_t>(co) * d.Ci + ci) * d.Kh * d.Kw;
              for (int ky = 0; ky < d.Kh; ++ky) {
                int oy0, oy1;
                valid_out_range(ky, d.pad, d.stride, d.H, d.Ho, oy0, oy1);
                for (int kx = 0; kx < d.Kw; ++kx) {
                  const double wv = wk[ky * d.Kw + kx];
                  if (wv == 0.0) continue;
                  int ox0, ox1;
                  valid_out_range(kx, d.pad, d.stride, d.W, d.Wo, ox0, ox1);
                  for (int oy = oy0; oy <= oy1; ++oy) {
                    double* grow =
                        gsl + static_cast<int64_t>(oy * d.stride + ky - d.pad) * d.W + (kx - d.pad);
                    const double* gorow = gpl + static_cast<int64_t>(oy) * d.Wo;
                    if (d.stride == 1) {
                      for (int ox = ox0; ox <= ox1; ++ox) grow[ox] += wv * gorow[ox];
                    } else {
                      for (int ox = ox0; ox <= ox1; ++ox) grow[ox * d.stride] += wv * gorow[ox];
                    }
                  }
                }
              }
            }
          }
        });
      }
    });
  }
  return out;
}

namespace {

struct Axis {
  std::vector<int> i0, i1;
  std::vector<double> t;
};

// Half-pixel source coordinates, clamped; lerp parameter per output index.
Axis resize_axis(int in_extent, int out_extent) {
  Axis ax;
  ax.i0.resize(static_cast<size_t>(out_extent));
  ax.i1.resize(static_cast<size_t>(out_extent));
  ax.t.resize(static_cast<size_t>(out_extent));
  const double ratio = static_cast<double>(in_extent) / static_cast<double>(out_extent);
  for (int o = 0; o < out_extent; ++o) {
    double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    if (src < 0.0) src = 0.0;
    const double hi = static_cast<double>(in_extent - 1);
    if (src > hi) src = hi;
    const int i0 = static_cast<int>(src);
    ax.i0[static_cast<size_t>(o)] = i0;
    ax.i1[static_cast<size_t>(o)] = std::min(i0 + 1, in_extent - 1);
    ax.t[static_cast<size_t>(o)] = src - static_cast<double>(i0);
  }
  return ax;
}

}  // namespace

Tensor bilinear_resize(const Tensor& input, int out_h, int out_w) {
  check_4d(input, "bilinear_resize");
  if (out_h <= 0 || out_w <= 0)
    throw ConfigError("bilinear_resize: non-positive output extent " + std::to_string(out_h) +
                      "x" + std::to_string(out_w));
  const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const Axis ay = resize_axis(H, out_h);
  const Axis ax = resize_axis(W, out_w);

  Tensor out = Tensor::zeros({N, C, out_h, out_w});
  const int64_t in_plane = static_cast<int64_t>(H) * W;
  const int64_t out_plane = static_cast<int64_t>(out_h) * out_w;
  {
    const double* src = input.data();
    double* dst = out.data();
    parallel_for(0, static_cast<int64_t>(N) * C, [&](int64_t pc) {
      const double* sp = src + pc * in_plane;
      double* dp = dst + pc * out_plane;
      for (int oy = 0; oy < out_h; ++oy) {
        const double* r0 = sp + static_cast<int64_t>(ay.i0[oy]) * W;
        const double* r1 = sp + static_cast<int64_t>(ay.i1[oy]) * W;
        const double ty = ay.t[oy];
        double* drow = dp + static_cast<int64_t>(oy) * out_w;
        for (int ox = 0; ox < out_w; ++ox) {
          const int x0 = ax.i0[ox], x1 = ax.i1[ox];
          const double tx = ax.t[ox];
          const double a = r0[x0] + tx * (r0[x1] - r0[x0]);
          const double b = r1[x0] + tx * (r1[x1] - r1[x0]);
          drow[ox] = a + ty * (b - a);
        }
      }
    });
  }

  if (tracing() && on_grad_path(input)) {
    mark_on_path(out);
    Tensor in_t = input;
    Tape::current()->record([in_t, out, ay, ax, N, C, W, out_h, out_w, in_plane, out_plane]() {
      const double* g = grad_if_any(out);
      if (!g) return;
      double* gi = grad_buf(in_t).data();
      parallel_for(0, static_cast<int64_t>(N) * C, [&](int64_t pc) {
        double* gp = gi + pc * in_plane;
        const double* gout = g + pc * out_plane;
        for (int oy = 0; oy < out_h; ++oy) {
          const int y0 = ay.i0[oy], y1 = ay.i1[oy];
          const double ty = ay.t[oy];
          const double* grow = gout + static_cast<int64_t>(oy) * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int x0 = ax.i0[ox], x1 = ax.i1[ox];
            const double tx = ax.t[ox];
            const double gv = grow[ox];
            gp[static_cast<int64_t>(y0) * W + x0] += gv * (1.0 - ty) * (1.0 - tx);
            gp[static_cast<int64_t>(y0) * W + x1] += gv * (1.0 - ty) * tx;
            gp[static_cast<int64_t>(y1) * W + x0] += gv * ty * (1.0 - tx);
            gp[static_cast<int64_t>(y1) * W + x1] += gv * ty * tx;
          }
        }
      });
    });
  }
  return out;
}

Tensor resize_like(const Tensor& input, const Tensor& ref) {
  check_4d(ref, "resize_like ref");
  return bilinear_resize(input, ref.dim(2), ref.dim(3));
}

namespace {

// Softmax over strided groups: `groups` distributions, each of `len` entries
// spaced `stride` apart starting at base(group).
template <typename BaseFn>
void softmax_groups(const double* in, double* out, int64_t groups, int len, int64_t stride,
                    BaseFn base) {
  for (int64_t gidx = 0; gidx < groups; ++gidx) {
    const int64_t b = base(gidx);
    double m = in[b];
    for (int j = 1; j < len; ++j) m = std::max(m, in[b + j * stride]);
    double z = 0.0;
    for (int j = 0; j < len; ++j) {
      const double e = std::exp(in[b + j * stride] - m);
      out[b + j * stride] = e;
      z += e;
    }
    const double inv = 1.0 / z;
    for (int j = 0; j < len; ++j) out[b + j * stride] *= inv;
  }
}

template <typename BaseFn>
void softmax_groups_backward(const double* y, const double* g, double* gi, int64_t groups,
                             int len, int64_t stride, BaseFn base) {
  for (int64_t gidx = 0; gidx < groups; ++gidx) {
    const int64_t b = base(gidx);
    double dot = 0.0;
    for (int j = 0; j < len; ++j) dot += g[b + j * stride] * y[b + j * stride];
    for (int j = 0; j < len; ++j) {
      const int64_t k = b + j * stride;
      gi[k] += y[k] * (g[k] - dot);
    }
  }
}

}  // namespace

Tensor softmax_channels(const Tensor& input) {
  check_4d(input, "softmax_channels");
  const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const int64_t plane = static_cast<int64_t>(H) * W;
  Tensor out = Tensor::zeros(input.shape());
  auto base = [C, plane](int64_t gidx) {
    const int64_t n = gidx / plane;
    const int64_t px = gidx % plane;
    return n * C * plane + px;
  };
  softmax_groups(input.data(), out.data(), static_cast<int64_t>(N) * plane, C, plane, base);
  if (tracing() && on_grad_path(input)) {
    mark_on_path(out);
    Tensor in_t = input;
    Tape::current()->record([in_t, out, N, C, plane, base]() {
      const double* g = grad_if_any(out);
      if (!g) return;
      softmax_groups_backward(out.data(), g, grad_buf(in_t).data(),
                              static_cast<int64_t>(N) * plane, C, plane, base);
    });
  }
  return out;
}

Tensor softmax_spatial(const Tensor& input) {
  check_4d(input, "softmax_spatial");
  const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const int64_t plane = static_cast<int64_t>(H) * W;
  if (plane > INT32_MAX) throw ConfigError("softmax_spatial: plane too large");
  Tensor out = Tensor::zeros(input.shape());
  auto base = [plane](int64_t gidx) { return gidx * plane; };
  softmax_groups(input.data(), out.data(), static_cast<int64_t>(N) * C, static_cast<int>(plane),
                 1, base);
  if (tracing() && on_grad_path(input)) {
    mark_on_path(out);
    Tensor in_t = input;
    Tape::current()->record([in_t, out, N, C, plane, base]() {
      const double* g = grad_if_any(out);
      if (!g) return;
      softmax_groups_backward(out.data(), g, grad_buf(in_t).data(), static_cast<int64_t>(N) * C,
                              static_cast<int>(plane), 1, base);
    });
  }
  return out;
}

Tensor sum(const Tensor& a) {
  const int64_t n = a.numel();
  double acc = 0.0;
  const double* pa = a.data();
  for (int64_t i = 0; i < n; ++i) acc += pa[i];
  Tensor out = Tensor::scalar(acc);
  if (tracing() && on_grad_path(a)) {
    mark_on_path(out);
    Tensor a_t = a;
    Tape::current()->record([a_t, out, n]() {
      const double* g = grad_if_any(out);
      if (!g) return;
      double* ga = grad_buf(a_t).data();
      for (int64_t i = 0; i < n; ++i) ga[i] += g[0];
    });
  }
  return out;
}

Tensor mean(const Tensor& a) {
  const int64_t n = a.numel();
  double acc = 0.0;
  const double* pa = a.data();
  for (int64_t i = 0; i < n; ++i) acc += pa[i];
  Tensor out = Tensor::scalar(acc / static_cast<double>(n));
  if (tracing() && on_grad_path(a)) {
    mark_on_path(out);
    Tensor a_t = a;
    Tape::current()->record([a_t, out, n]() {
      const double* g = grad_if_any(out);
      if (!g) return;
      const double gv = g[0] / static_cast<double>(n);
      double* ga = grad_buf(a_t).data();
      for (int64_t i = 0; i < n; ++i) ga[i] += gv;
    });
  }
  return out;
}

void assert_finite(const Tensor& t, const char* what) {
  if (!t.all_finite()) throw NumericError(std::string(what) + ": non-finite values detected");
}

}  // namespace dsraseg
