// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#include "dsraseg/supervision.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dsraseg/errors.hpp"
#include "dsraseg/ops.hpp"

namespace dsraseg {

namespace {

using detail::grad_buf;
using detail::grad_if_any;
using detail::mark_on_path;
using detail::on_grad_path;
using detail::tracing;

void check_logits_vs_labels(const Tensor& logits, const LabelMap& labels, int num_classes,
                            const char* op) {
  if (logits.ndim() != 4)
    throw ConfigError(std::string(op) + ": logits must be [N,K,h,w], got " +
                      shape_str(logits.shape()));
  if (logits.dim(1) != num_classes)
    throw ConfigError(std::string(op) + ": logits carry " + std::to_string(logits.dim(1)) +
                      " channels for " + std::to_string(num_classes) + " classes");
  if (logits.dim(0) != labels.n || logits.dim(2) != labels.h || logits.dim(3) != labels.w) {
    throw ConfigError(std::string(op) + ": logits " + shape_str(logits.shape()) +
                      " do not match labels [" + std::to_string(labels.n) + "," +
                      std::to_string(labels.h) + "," + std::to_string(labels.w) + "]");
  }
  check_labels(labels, num_classes, op);
}

inline double stable_sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

BackgroundMask make_background_mask(const LabelMap& labels, int num_classes) {
  if (num_classes < 1) throw ConfigError("make_background_mask: num_classes must be >= 1");
  check_labels(labels, num_classes, "make_background_mask");
  Tensor mask = Tensor::zeros({labels.n, num_classes, labels.h, labels.w});
  double* pm = mask.data();
  const int64_t plane = static_cast<int64_t>(labels.h) * labels.w;
  for (int i = 0; i < labels.n; ++i) {
    for (int k = 0; k < num_classes; ++k) {
      double* dst = pm + (static_cast<int64_t>(i) * num_classes + k) * plane;
      const int32_t* src = labels.v.data() + static_cast<int64_t>(i) * plane;
      for (int64_t px = 0; px < plane; ++px) dst[px] = src[px] == k + 1 ? 0.0 : 1.0;
    }
  }
  return BackgroundMask{mask};
}

Tensor dice_loss(const Tensor& fg_logits, const LabelMap& labels, double smooth) {
  const int K = fg_logits.defined() && fg_logits.ndim() == 4 ? fg_logits.dim(1) : -1;
  check_logits_vs_labels(fg_logits, labels, K, "dice_loss");
  if (smooth < 0.0) throw ConfigError("dice_loss: smooth must be >= 0");

  const int N = labels.n;
  const int64_t plane = static_cast<int64_t>(labels.h) * labels.w;
  const int64_t groups = static_cast<int64_t>(N) * K;

  Tensor prob = Tensor::zeros(fg_logits.shape());
  {
    const double* z = fg_logits.data();
    double* p = prob.data();
    const int64_t total = fg_logits.numel();
    for (int64_t i = 0; i < total; ++i) p[i] = stable_sigmoid(z[i]);
  }

  std::vector<double> inter(static_cast<size_t>(groups)), denom(static_cast<size_t>(groups));
  double acc = 0.0;
  {
    const double* p = prob.data();
    for (int i = 0; i < N; ++i) {
      const int32_t* lab = labels.v.data() + static_cast<int64_t>(i) * plane;
      for (int k = 0; k < K; ++k) {
        const double* pp = p + (static_cast<int64_t>(i) * K + k) * plane;
        double isum = 0.0, psum = 0.0, gsum = 0.0;
        for (int64_t px = 0; px < plane; ++px) {
          const double g = lab[px] == k + 1 ? 1.0 : 0.0;
          isum += pp[px] * g;
          psum += pp[px];
          gsum += g;
        }
        const int64_t gi = static_cast<int64_t>(i) * K + k;
        inter[static_cast<size_t>(gi)] = isum;
        denom[static_cast<size_t>(gi)] = psum + gsum;
        acc += 1.0 - (2.0 * isum + smooth) / (psum + gsum + smooth);
      }
    }
  }
  Tensor out = Tensor::scalar(acc / static_cast<double>(groups));

  if (tracing() && on_grad_path(fg_logits)) {
    mark_on_path(out);
    Tensor z_t = fg_logits;
    LabelMap lab = labels;
    Tape::current()->record([z_t, prob, out, lab, inter, denom, smooth, N, K, plane, groups]() {
      const double* g = grad_if_any(out);
      if (!g) return;
      const double scale = g[0] / static_cast<double>(groups);
      double* gz = grad_buf(z_t).data();
      const double* p = prob.data();
      for (int i = 0; i < N; ++i) {
        const int32_t* labp = lab.v.data() + static_cast<int64_t>(i) * plane;
        for (int k = 0; k < K; ++k) {
          const int64_t gi = static_cast<int64_t>(i) * K + k;
          const double num = 2.0 * inter[static_cast<size_t>(gi)] + smooth;
          const double den = denom[static_cast<size_t>(gi)] + smooth;
          const int64_t off = (static_cast<int64_t>(i) * K + k) * plane;
          for (int64_t px = 0; px < plane; ++px) {
            const double pv = p[off + px];
            const double gt = labp[px] == k + 1 ? 1.0 : 0.0;
            // d(1 - dice)/dp = -(2*g*den - num) / den^2
            const double ddice = (2.0 * gt * den - num) / (den * den);
            gz[off + px] += scale * (-ddice) * pv * (1.0 - pv);
          }
        }
      }
    });
  }
  return out;
}

Tensor ce_loss(const Tensor& fg_logits, const Tensor& bg_logits, const LabelMap& labels,
               CeBackground mode) {
  const int K = fg_logits.defined() && fg_logits.ndim() == 4 ? fg_logits.dim(1) : -1;
  check_logits_vs_labels(fg_logits, labels, K, "ce_loss");
  if (mode == CeBackground::kBgHead) {
    if (!bg_logits.defined() || !same_shape(bg_logits.shape(), fg_logits.shape()))
      throw ConfigError("ce_loss: background-head mode needs bg logits shaped like fg logits");
  }

  const int N = labels.n;
  const int64_t plane = static_cast<int64_t>(labels.h) * labels.w;
  const int64_t count = static_cast<int64_t>(N) * plane;
  const bool use_bg = mode == CeBackground::kBgHead;

  double acc = 0.0;
  {
    const double* zf = fg_logits.data();
    const double* zb = use_bg ? bg_logits.data() : nullptr;
    for (int i = 0; i < N; ++i) {
      const int32_t* lab = labels.v.data() + static_cast<int64_t>(i) * plane;
      for (int64_t px = 0; px < plane; ++px) {
        double s0 = 0.0;
        if (use_bg) {
          s0 = zb[(static_cast<int64_t>(i) * K) * plane + px];
          for (int k = 1; k < K; ++k)
            s0 = std::min(s0, zb[(static_cast<int64_t>(i) * K + k) * plane + px]);
        }
        double m = s0;
        for (int k = 0; k < K; ++k)
          m = std::max(m, zf[(static_cast<int64_t>(i) * K + k) * plane + px]);
        double z = std::exp(s0 - m);
        for (int k = 0; k < K; ++k)
          z += std::exp(zf[(static_cast<int64_t>(i) * K + k) * plane + px] - m);
        const int32_t l = lab[px];
        const double s_label =
            l == 0 ? s0 : zf[(static_cast<int64_t>(i) * K + (l - 1)) * plane + px];
        acc += m - s_label + std::log(z);
      }
    }
  }
  Tensor out = Tensor::scalar(acc / static_cast<double>(count));

  const bool pf = on_grad_path(fg_logits);
  const bool pb = use_bg && on_grad_path(bg_logits);
  if (tracing() && (pf || pb)) {
    mark_on_path(out);
    Tensor zf_t = fg_logits, zb_t = bg_logits;
    LabelMap lab = labels;
    Tape::current()->record([zf_t, zb_t, out, lab, N, K, plane, count, use_bg, pf, pb]() {
      const double* g = grad_if_any(out);
      if (!g) return;
      const double scale = g[0] / static_cast<double>(count);
      const double* zf = zf_t.data();
      const double* zb = use_bg ? zb_t.data() : nullptr;
      double* gf = pf ? grad_buf(zf_t).data() : nullptr;
      double* gb = pb ? grad_buf(zb_t).data() : nullptr;
      for (int i = 0; i < N; ++i) {
        const int32_t* labp = lab.v.data() + static_cast<int64_t>(i) * plane;
        for (int64_t px = 0; px < plane; ++px) {
          double s0 = 0.0;
          int bg_arg = 0;
          if (use_bg) {
            s0 = zb[(static_cast<int64_t>(i) * K) * plane + px];
            for (int k = 1; k < K; ++k) {
              const double v = zb[(static_cast<int64_t>(i) * K + k) * plane + px];
              if (v < s0) {
                s0 = v;
                bg_arg = k;
              }
            }
          }
          double m = s0;
          for (int k = 0; k < K; ++k)
            m = std::max(m, zf[(static_cast<int64_t>(i) * K + k) * plane + px]);
          double z = std::exp(s0 - m);
          for (int k = 0; k < K; ++k)
            z += std::exp(zf[(static_cast<int64_t>(i) * K + k) * plane + px] - m);
          const int32_t l = labp[px];
          if (gf) {
            for (int k = 0; k < K; ++k) {
              const int64_t idx = (static_cast<int64_t>(i) * K + k) * plane + px;
              const double pk = std::exp(zf[idx] - m) / z;
              gf[idx] += scale * (pk - (l == k + 1 ? 1.0 : 0.0));
            }
          }
          if (gb) {
            // Background score is min over channels; its gradient routes to
            // the (first) minimizing channel.
            const double p0 = std::exp(s0 - m) / z;
            const int64_t idx = (static_cast<int64_t>(i) * K + bg_arg) * plane + px;
            gb[idx] += scale * (p0 - (l == 0 ? 1.0 : 0.0));
          }
        }
      }
    });
  }
  return out;
}

namespace {

// 15x15 box average of a binary plane, dividing by the number of in-image
// taps. The summed-area table holds exact small integers, so a constant
// plane averages to exactly that constant.
void boxavg15(const double* m, int h, int w, double* out) {
  const int R = 7;
  std::vector<double> sat(static_cast<size_t>(h + 1) * (w + 1), 0.0);
  for (int y = 0; y < h; ++y) {
    const double* row = m + static_cast<int64_t>(y) * w;
    double rowsum = 0.0;
    for (int x = 0; x < w; ++x) {
      rowsum += row[x];
      sat[static_cast<size_t>(y + 1) * (w + 1) + (x + 1)] =
          sat[static_cast<size_t>(y) * (w + 1) + (x + 1)] + rowsum;
    }
  }
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - R), y1 = std::min(h - 1, y + R);
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - R), x1 = std::min(w - 1, x + R);
      const double s = sat[static_cast<size_t>(y1 + 1) * (w + 1) + (x1 + 1)] -
                       sat[static_cast<size_t>(y0) * (w + 1) + (x1 + 1)] -
                       sat[static_cast<size_t>(y1 + 1) * (w + 1) + x0] +
                       sat[static_cast<size_t>(y0) * (w + 1) + x0];
      const double cnt = static_cast<double>((y1 - y0 + 1) * (x1 - x0 + 1));
      out[static_cast<int64_t>(y) * w + x] = s / cnt;
    }
  }
}

}  // namespace

Tensor bce_loss(const Tensor& bg_logits, const BackgroundMask& bg_mask, bool boundary_weighted) {
  if (!bg_logits.defined() || bg_logits.ndim() != 4)
    throw ConfigError("bce_loss: logits must be [N,K,h,w]");
  if (!bg_mask.mask.defined() || !same_shape(bg_logits.shape(), bg_mask.mask.shape()))
    throw ConfigError("bce_loss: mask shape " +
                      (bg_mask.mask.defined() ? shape_str(bg_mask.mask.shape()) : "(undefined)") +
                      " does not match logits " + shape_str(bg_logits.shape()));
  const int N = bg_logits.dim(0), K = bg_logits.dim(1), h = bg_logits.dim(2),
            w = bg_logits.dim(3);
  const int64_t plane = static_cast<int64_t>(h) * w;
  const int64_t groups = static_cast<int64_t>(N) * K;

  // Per-pixel weights and per-(n,k) weight sums; weights are constants.
  std::vector<double> weights(static_cast<size_t>(bg_logits.numel()), 1.0);
  std::vector<double> wsum(static_cast<size_t>(groups), static_cast<double>(plane));
  const double* mk = bg_mask.mask.data();
  if (boundary_weighted) {
    std::vector<double> avg(static_cast<size_t>(plane));
    for (int64_t gidx = 0; gidx < groups; ++gidx) {
      const double* mp = mk + gidx * plane;
      boxavg15(mp, h, w, avg.data());
      double* wp = weights.data() + gidx * plane;
      double s = 0.0;
      for (int64_t px = 0; px < plane; ++px) {
        wp[px] = 1.0 + 5.0 * std::abs(avg[static_cast<size_t>(px)] - mp[px]);
        s += wp[px];
      }
      wsum[static_cast<size_t>(gidx)] = s;
    }
  }

  double acc = 0.0;
  {
    const double* z = bg_logits.data();
    for (int64_t gidx = 0; gidx < groups; ++gidx) {
      const double* zp = z + gidx * plane;
      const double* mp = mk + gidx * plane;
      const double* wp = weights.data() + gidx * plane;
      double swl = 0.0;
      for (int64_t px = 0; px < plane; ++px) {
        const double zv = zp[px];
        const double l = std::max(zv, 0.0) - zv * mp[px] + std::log1p(std::exp(-std::abs(zv)));
        swl += wp[px] * l;
      }
      acc += swl / wsum[static_cast<size_t>(gidx)];
    }
  }
  Tensor out = Tensor::scalar(acc / static_cast<double>(groups));

  if (tracing() && on_grad_path(bg_logits)) {
    mark_on_path(out);
    Tensor z_t = bg_logits;
    Tensor m_t = bg_mask.mask;
    Tape::current()->record([z_t, m_t, out, weights, wsum, groups, plane]() {
      const double* g = grad_if_any(out);
      if (!g) return;
      const double scale = g[0] / static_cast<double>(groups);
      double* gz = grad_buf(z_t).data();
      const double* z = z_t.data();
      const double* m = m_t.data();
      for (int64_t gidx = 0; gidx < groups; ++gidx) {
        const double inv = scale / wsum[static_cast<size_t>(gidx)];
        const int64_t off = gidx * plane;
        for (int64_t px = 0; px < plane; ++px) {
          gz[off + px] +=
              inv * weights[static_cast<size_t>(off + px)] * (stable_sigmoid(z[off + px]) - m[off + px]);
        }
      }
    });
  }
  return out;
}

void LossSpec::validate() const {
  if (w_dice < 0.0 || w_ce < 0.0 || w_bce < 0.0)
    throw ConfigError("LossSpec: term weights must be >= 0");
  if (w_dice == 0.0 && w_ce == 0.0 && w_bce == 0.0)
    throw ConfigError("LossSpec: all term weights are zero");
  double ssum = 0.0;
  for (double sw : stage_weights) {
    if (sw < 0.0) throw ConfigError("LossSpec: stage weights must be >= 0");
    ssum += sw;
  }
  if (ssum == 0.0) throw ConfigError("LossSpec: all stage weights are zero");
  if (smooth < 0.0) throw ConfigError("LossSpec: smooth must be >= 0");
}

std::pair<Tensor, LossBreakdown> total_loss(const StageOutputs& stages, const LabelMap& labels,
                                            const LossSpec& spec, int num_classes,
                                            CeBackground ce_mode) {
  spec.validate();
  check_labels(labels, num_classes, "total_loss");

  LossBreakdown bd;
  Tensor total;
  for (int s = 0; s < 4; ++s) {
    const double sw = spec.stage_weights[static_cast<size_t>(s)];
    if (sw == 0.0) continue;
    const SegOutput& out = stages.r[static_cast<size_t>(s)];
    if (!out.fg.defined() || !out.bg.defined())
      throw ConfigError("total_loss: stage " + std::to_string(s) + " output is undefined");
    LabelMap target = nearest_resize(labels, out.fg.dim(2), out.fg.dim(3));

    Tensor stage_sum;
    auto add_term = [&](Tensor term, double weight, double& slot_stage, double& slot_total) {
      slot_stage = term.item();
      slot_total += sw * term.item();
      Tensor weighted = scale(term, weight * sw);
      stage_sum = stage_sum.defined() ? add(stage_sum, weighted) : weighted;
    };
    if (spec.w_dice != 0.0)
      add_term(dice_loss(out.fg, target, spec.smooth), spec.w_dice,
               bd.stages[static_cast<size_t>(s)].dice, bd.dice);
    if (spec.w_ce != 0.0)
      add_term(ce_loss(out.fg, out.bg, target, ce_mode), spec.w_ce,
               bd.stages[static_cast<size_t>(s)].ce, bd.ce);
    if (spec.w_bce != 0.0)
      add_term(bce_loss(out.bg, make_background_mask(target, num_classes), spec.boundary_weighted),
               spec.w_bce, bd.stages[static_cast<size_t>(s)].bce, bd.bce);

    total = total.defined() ? add(total, stage_sum) : stage_sum;
  }
  bd.total = total.item();
  return {total, bd};
}

}  // namespace dsraseg
