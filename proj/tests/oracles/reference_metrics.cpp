// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#include "oracles/reference_metrics.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace dsraseg::testing {

using metrics::BinaryMask;
using metrics::DiceIou;
using metrics::Maybe;
using metrics::MulticlassOverlap;
using metrics::ProbMap;

DiceIou ref_dice_iou(const BinaryMask& pred, const BinaryMask& gt) {
  int64_t np = 0, ng = 0, ni = 0;
  for (size_t i = 0; i < gt.v.size(); ++i) {
    np += pred.v[i] != 0;
    ng += gt.v[i] != 0;
    ni += pred.v[i] != 0 && gt.v[i] != 0;
  }
  DiceIou r;
  if (np + ng == 0) {
    r.dice = 1.0;
    r.iou = 1.0;
  } else {
    r.dice = 2.0 * static_cast<double>(ni) / static_cast<double>(np + ng);
    r.iou = static_cast<double>(ni) / static_cast<double>(np + ng - ni);
  }
  return r;
}

double ref_mae(const ProbMap& pred, const BinaryMask& gt) {
  double acc = 0.0;
  for (size_t i = 0; i < gt.v.size(); ++i) acc += std::abs(pred.v[i] - (gt.v[i] ? 1.0 : 0.0));
  return acc / static_cast<double>(gt.v.size());
}

Maybe ref_weighted_fmeasure(const ProbMap& pred, const BinaryMask& gt) {
  const int h = gt.h, w = gt.w;
  int64_t ng = 0;
  for (uint8_t v : gt.v) ng += v != 0;
  if (ng == 0) return {0.0, false};

  const size_t total = gt.v.size();
  std::vector<double> e(total);
  for (size_t i = 0; i < total; ++i) e[i] = std::abs(pred.v[i] - (gt.v[i] ? 1.0 : 0.0));

  // Full-scan distance transform: for every pixel, its squared distance to
  // the nearest GT pixel and the mean error over ALL equidistant GT pixels.
  std::vector<double> et(e);
  std::vector<int64_t> d2(total, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const size_t i = static_cast<size_t>(y) * w + x;
      if (gt.v[i]) continue;
      int64_t best = std::numeric_limits<int64_t>::max();
      double esum = 0.0;
      int ecnt = 0;
      for (int gy = 0; gy < h; ++gy)
        for (int gx = 0; gx < w; ++gx) {
          if (!gt.at(gy, gx)) continue;
          const int64_t dy = gy - y, dx = gx - x;
          const int64_t dd = dy * dy + dx * dx;
          if (dd < best) {
            best = dd;
            esum = 0.0;
            ecnt = 0;
          }
          if (dd == best) {
            esum += e[static_cast<size_t>(gy) * w + gx];
            ++ecnt;
          }
        }
      d2[i] = best;
      et[i] = esum / ecnt;
    }

  // Direct 7x7 Gaussian (sigma 5) built separably, zero padded.
  double g[7];
  double gsum = 0.0;
  for (int i = 0; i < 7; ++i) {
    g[i] = std::exp(-static_cast<double>((i - 3) * (i - 3)) / 50.0);
    gsum += g[i];
  }
  std::vector<double> ea(total, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int dy = -3; dy <= 3; ++dy)
        for (int dx = -3; dx <= 3; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
          acc += g[dy + 3] / gsum * (g[dx + 3] / gsum) *
                 et[static_cast<size_t>(yy) * w + xx];
        }
      ea[static_cast<size_t>(y) * w + x] = acc;
    }

  double on_loss = 0.0, fpw = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const size_t i = static_cast<size_t>(y) * w + x;
      if (gt.v[i]) {
        on_loss += ea[i] < e[i] ? ea[i] : e[i];
      } else {
        const double b =
            2.0 - std::exp(std::log(0.5) / 5.0 * std::sqrt(static_cast<double>(d2[i])));
        fpw += e[i] * b;
      }
    }
  const double tpw = static_cast<double>(ng) - on_loss;
  const double recall = 1.0 - on_loss / static_cast<double>(ng);
  const double precision = tpw / (DBL_EPSILON + tpw + fpw);
  return {2.0 * recall * precision / (DBL_EPSILON + recall + precision), true};
}

namespace {

double ref_object(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double m = 0.0;
  for (double v : xs) m += v;
  m /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double v : xs) var += (v - m) * (v - m);
  const double sd = xs.size() > 1 ? std::sqrt(var / static_cast<double>(xs.size() - 1)) : 0.0;
  return 2.0 * m / (m * m + 1.0 + sd + DBL_EPSILON);
}

double ref_ssim(const ProbMap& p, const BinaryMask& g, int y0, int y1, int x0, int x1) {
  const int64_t n = static_cast<int64_t>(y1 - y0) * (x1 - x0);
  if (n <= 0) return 0.0;
  std::vector<double> xs, ys;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      xs.push_back(p.at(y, x));
      ys.push_back(g.at(y, x) ? 1.0 : 0.0);
    }
  double mx = 0.0, my = 0.0;
  for (double v : xs) mx += v;
  for (double v : ys) my += v;
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sx = 0.0, sy = 0.0, sxy = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    sx += (xs[static_cast<size_t>(i)] - mx) * (xs[static_cast<size_t>(i)] - mx);
    sy += (ys[static_cast<size_t>(i)] - my) * (ys[static_cast<size_t>(i)] - my);
    sxy += (xs[static_cast<size_t>(i)] - mx) * (ys[static_cast<size_t>(i)] - my);
  }
  const double dn = static_cast<double>(n - 1) + DBL_EPSILON;
  sx /= dn;
  sy /= dn;
  sxy /= dn;
  const double alpha = 4.0 * mx * my * sxy;
  const double beta = (mx * mx + my * my) * (sx + sy);
  if (alpha != 0.0) return alpha / (beta + DBL_EPSILON);
  return beta == 0.0 ? 1.0 : 0.0;
}

}  // namespace

double ref_s_measure(const ProbMap& pred, const BinaryMask& gt) {
  const int64_t total = static_cast<int64_t>(gt.v.size());
  int64_t ng = 0;
  for (uint8_t v : gt.v) ng += v != 0;
  double pm = 0.0;
  for (double v : pred.v) pm += v;
  pm /= static_cast<double>(total);
  if (ng == 0) return 1.0 - pm;
  if (ng == total) return pm;

  std::vector<double> fg, bg;
  for (size_t i = 0; i < gt.v.size(); ++i) {
    if (gt.v[i]) {
      fg.push_back(pred.v[i]);
    } else {
      bg.push_back(1.0 - pred.v[i]);
    }
  }
  const double mu = static_cast<double>(ng) / static_cast<double>(total);
  const double s_obj = mu * ref_object(fg) + (1.0 - mu) * ref_object(bg);

  // 1-based centroid, rounded half up in exact integer arithmetic (the
  // rounding convention is pinned; see repo docs).
  int64_t sx = 0, sy = 0;
  for (int y = 0; y < gt.h; ++y)
    for (int x = 0; x < gt.w; ++x)
      if (gt.at(y, x)) {
        sx += x + 1;
        sy += y + 1;
      }
  const int cx = static_cast<int>((2 * sx + ng) / (2 * ng));
  const int cy = static_cast<int>((2 * sy + ng) / (2 * ng));

  const double area = static_cast<double>(total);
  const double w1 = static_cast<double>(cx) * cy / area;
  const double w2 = static_cast<double>(gt.w - cx) * cy / area;
  const double w3 = static_cast<double>(cx) * (gt.h - cy) / area;
  const double w4 = 1.0 - w1 - w2 - w3;
  const double s_reg = w1 * ref_ssim(pred, gt, 0, cy, 0, cx) +
                       w2 * ref_ssim(pred, gt, 0, cy, cx, gt.w) +
                       w3 * ref_ssim(pred, gt, cy, gt.h, 0, cx) +
                       w4 * ref_ssim(pred, gt, cy, gt.h, cx, gt.w);
  const double s = 0.5 * s_obj + 0.5 * s_reg;
  return s > 0.0 ? s : 0.0;
}

double ref_e_measure_mean(const ProbMap& pred, const BinaryMask& gt) {
  const size_t total = gt.v.size();
  int64_t ng = 0;
  for (uint8_t v : gt.v) ng += v != 0;

  double acc = 0.0;
  for (int j = 0; j < 256; ++j) {
    const double t = (j + 0.5) / 256.0;
    std::vector<uint8_t> fm(total);
    int64_t nf = 0;
    for (size_t i = 0; i < total; ++i) {
      fm[i] = pred.v[i] >= t;
      nf += fm[i];
    }
    double score;
    if (ng == 0) {
      score = 1.0 - static_cast<double>(nf) / static_cast<double>(total);
    } else if (static_cast<size_t>(ng) == total) {
      score = static_cast<double>(nf) / static_cast<double>(total);
    } else {
      const double mf = static_cast<double>(nf) / static_cast<double>(total);
      const double mg = static_cast<double>(ng) / static_cast<double>(total);
      double esum = 0.0;
      for (size_t i = 0; i < total; ++i) {
        const double fc = fm[i] - mf;
        const double gc = (gt.v[i] ? 1.0 : 0.0) - mg;
        const double align = 2.0 * gc * fc / (gc * gc + fc * fc + DBL_EPSILON);
        esum += (align + 1.0) * (align + 1.0) / 4.0;
      }
      score = esum / static_cast<double>(total);
    }
    acc += score;
  }
  return acc / 256.0;
}

namespace {

// All boundary pixels of the mask: set pixels with a 4-neighbor outside it,
// where off-image counts as outside.
std::vector<std::pair<int, int>> ref_boundary(const BinaryMask& m) {
  std::vector<std::pair<int, int>> pts;
  const auto off = [&](int y, int x) {
    return y < 0 || y >= m.h || x < 0 || x >= m.w || !m.at(y, x);
  };
  for (int y = 0; y < m.h; ++y)
    for (int x = 0; x < m.w; ++x)
      if (m.at(y, x) &&
          (off(y - 1, x) || off(y + 1, x) || off(y, x - 1) || off(y, x + 1)))
        pts.emplace_back(y, x);
  return pts;
}

}  // namespace

Maybe ref_hd95(const BinaryMask& pred, const BinaryMask& gt) {
  const auto bp = ref_boundary(pred);
  const auto bg = ref_boundary(gt);
  if (bp.empty() || bg.empty()) return {0.0, false};

  std::vector<double> pool;
  pool.reserve(bp.size() + bg.size());
  const auto directed = [&pool](const std::vector<std::pair<int, int>>& from,
                                const std::vector<std::pair<int, int>>& to) {
    for (const auto& [fy, fx] : from) {
      int64_t best = std::numeric_limits<int64_t>::max();
      for (const auto& [ty, tx] : to) {
        const int64_t dy = fy - ty, dx = fx - tx;
        best = std::min(best, dy * dy + dx * dx);
      }
      pool.push_back(std::sqrt(static_cast<double>(best)));
    }
  };
  directed(bp, bg);
  directed(bg, bp);
  std::sort(pool.begin(), pool.end());

  const double rank = 0.95 * static_cast<double>(pool.size() - 1);
  const size_t lo = static_cast<size_t>(rank);
  const double frac = rank - static_cast<double>(lo);
  const double v = lo + 1 < pool.size() ? pool[lo] + frac * (pool[lo + 1] - pool[lo]) : pool[lo];
  return {v, true};
}

MulticlassOverlap ref_multiclass_dice(const LabelMap& pred, const LabelMap& gt, int num_classes) {
  MulticlassOverlap out;
  out.dice.assign(static_cast<size_t>(num_classes), 0.0);
  out.iou.assign(static_cast<size_t>(num_classes), 0.0);
  out.present_gt.assign(static_cast<size_t>(num_classes), false);
  double dsum = 0.0, isum = 0.0;
  int present = 0;
  for (int k = 1; k <= num_classes; ++k) {
    int64_t np = 0, ng = 0, ni = 0;
    for (size_t i = 0; i < gt.v.size(); ++i) {
      const bool p = pred.v[i] == k, g = gt.v[i] == k;
      np += p;
      ng += g;
      ni += p && g;
    }
    const size_t ki = static_cast<size_t>(k - 1);
    if (np + ng > 0) {
      out.dice[ki] = 2.0 * static_cast<double>(ni) / static_cast<double>(np + ng);
      out.iou[ki] = static_cast<double>(ni) / static_cast<double>(np + ng - ni);
    }
    if (ng > 0) {
      out.present_gt[ki] = true;
      dsum += out.dice[ki];
      isum += out.iou[ki];
      ++present;
    }
  }
  out.defined = present > 0;
  if (out.defined) {
    out.mdice = dsum / present;
    out.miou = isum / present;
  }
  return out;
}

}  // namespace dsraseg::testing
