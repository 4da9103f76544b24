// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#include "dsraseg/metrics.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "dsraseg/errors.hpp"
#include "dsraseg/image_io.hpp"

namespace fs = std::filesystem;

namespace dsraseg::metrics {

namespace {

constexpr double kEps = DBL_EPSILON;  // 2.220446049250313e-16
constexpr int32_t kFar = INT32_MAX / 4;

void check_pair_shapes(int ph, int pw, int gh, int gw, const char* op) {
  if (ph != gh || pw != gw) {
    throw ConfigError(std::string(op) + ": size mismatch " + std::to_string(ph) + "x" +
                      std::to_string(pw) + " vs " + std::to_string(gh) + "x" +
                      std::to_string(gw));
  }
  if (ph <= 0 || pw <= 0) throw ConfigError(std::string(op) + ": empty extent");
}

void check_prob(const ProbMap& p, const char* op) {
  for (double v : p.v) {
    if (!(v >= 0.0 && v <= 1.0))
      throw ConfigError(std::string(op) + ": probability value outside [0,1]");
  }
}

}  // namespace

BinaryMask BinaryMask::zeros(int h, int w) {
  BinaryMask m;
  m.h = h;
  m.w = w;
  m.v.assign(static_cast<size_t>(h) * w, 0);
  return m;
}

int64_t BinaryMask::count() const {
  int64_t c = 0;
  for (uint8_t x : v) c += x != 0;
  return c;
}

ProbMap ProbMap::zeros(int h, int w) {
  ProbMap m;
  m.h = h;
  m.w = w;
  m.v.assign(static_cast<size_t>(h) * w, 0.0);
  return m;
}

DiceIou dice_iou(const BinaryMask& pred, const BinaryMask& gt) {
  check_pair_shapes(pred.h, pred.w, gt.h, gt.w, "dice_iou");
  int64_t inter = 0, np = 0, ng = 0;
  for (size_t i = 0; i < gt.v.size(); ++i) {
    const bool p = pred.v[i] != 0, g = gt.v[i] != 0;
    inter += p && g;
    np += p;
    ng += g;
  }
  if (np == 0 && ng == 0) return {1.0, 1.0};
  const int64_t uni = np + ng - inter;
  DiceIou r;
  r.dice = static_cast<double>(2 * inter) / static_cast<double>(np + ng);
  r.iou = uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
  return r;
}

MulticlassOverlap multiclass_dice(const LabelMap& pred, const LabelMap& gt, int num_classes) {
  if (pred.n != 1 || gt.n != 1) throw ConfigError("multiclass_dice: expects single images");
  check_pair_shapes(pred.h, pred.w, gt.h, gt.w, "multiclass_dice");
  check_labels(pred, num_classes, "multiclass_dice pred");
  check_labels(gt, num_classes, "multiclass_dice gt");

  MulticlassOverlap out;
  out.dice.assign(static_cast<size_t>(num_classes), 0.0);
  out.iou.assign(static_cast<size_t>(num_classes), 0.0);
  out.present_gt.assign(static_cast<size_t>(num_classes), 0);
  int present = 0;
  for (int k = 1; k <= num_classes; ++k) {
    int64_t inter = 0, np = 0, ng = 0;
    for (size_t i = 0; i < gt.v.size(); ++i) {
      const bool p = pred.v[i] == k, g = gt.v[i] == k;
      inter += p && g;
      np += p;
      ng += g;
    }
    if (ng == 0) continue;
    out.present_gt[static_cast<size_t>(k - 1)] = 1;
    ++present;
    const double dice = static_cast<double>(2 * inter) / static_cast<double>(np + ng);
    const double iou = static_cast<double>(inter) / static_cast<double>(np + ng - inter);
    out.dice[static_cast<size_t>(k - 1)] = dice;
    out.iou[static_cast<size_t>(k - 1)] = iou;
    out.mdice += dice;
    out.miou += iou;
  }
  if (present > 0) {
    out.defined = true;
    out.mdice /= present;
    out.miou /= present;
  } else {
    out.mdice = 0.0;
    out.miou = 0.0;
  }
  return out;
}

double mae(const ProbMap& pred, const BinaryMask& gt) {
  check_pair_shapes(pred.h, pred.w, gt.h, gt.w, "mae");
  check_prob(pred, "mae");
  double acc = 0.0;
  for (size_t i = 0; i < gt.v.size(); ++i) acc += std::abs(pred.v[i] - (gt.v[i] ? 1.0 : 0.0));
  return acc / static_cast<double>(gt.v.size());
}

namespace {

// Per-row distances to the nearest set pixel on each side. `left[x]` is the
// offset to the closest set pixel at column <= x (kFar if none), `right[x]`
// likewise for columns >= x.
struct RowDist {
  int h = 0, w = 0;
  std::vector<int32_t> left, right;

  int32_t l(int r, int c) const { return left[static_cast<size_t>(r) * w + c]; }
  int32_t r(int r_, int c) const { return right[static_cast<size_t>(r_) * w + c]; }
};

RowDist build_rowdist(const BinaryMask& mask) {
  RowDist rd;
  rd.h = mask.h;
  rd.w = mask.w;
  rd.left.assign(mask.v.size(), kFar);
  rd.right.assign(mask.v.size(), kFar);
  for (int y = 0; y < mask.h; ++y) {
    int32_t run = kFar;
    for (int x = 0; x < mask.w; ++x) {
      run = mask.at(y, x) ? 0 : (run >= kFar ? kFar : run + 1);
      rd.left[static_cast<size_t>(y) * mask.w + x] = run;
    }
    run = kFar;
    for (int x = mask.w - 1; x >= 0; --x) {
      run = mask.at(y, x) ? 0 : (run >= kFar ? kFar : run + 1);
      rd.right[static_cast<size_t>(y) * mask.w + x] = run;
    }
  }
  return rd;
}

// Exact squared distance from (r, c) to the nearest set pixel, scanning rows
// outward and pruning once the row offset alone exceeds the best. When
// `err` is given, also averages err[site] over the full equidistant set
// (direction-symmetric, so results are invariant under transposition).
int64_t nearest_site(const RowDist& rd, int r, int c, const double* err, double* err_mean) {
  int64_t best = INT64_MAX;
  double sum = 0.0;
  int cnt = 0;
  auto visit_row = [&](int rr, int64_t dr2) {
    const int32_t lo = rd.l(rr, c);
    const int32_t ro = rd.r(rr, c);
    const int32_t dmin = std::min(lo, ro);
    if (dmin >= kFar) return;
    const int64_t d2 = dr2 + static_cast<int64_t>(dmin) * dmin;
    if (d2 > best) return;
    if (d2 < best) {
      best = d2;
      sum = 0.0;
      cnt = 0;
    }
    if (err != nullptr) {
      const size_t row_off = static_cast<size_t>(rr) * rd.w;
      if (lo == dmin) {
        sum += err[row_off + (c - lo)];
        ++cnt;
      }
      if (ro == dmin && !(lo == dmin && ro == 0)) {  // same pixel only when both are 0
        sum += err[row_off + (c + ro)];
        ++cnt;
      }
    }
  };
  visit_row(r, 0);
  for (int d = 1;; ++d) {
    const int64_t dr2 = static_cast<int64_t>(d) * d;
    if (dr2 > best) break;
    const int up = r - d, dn = r + d;
    bool any = false;
    if (up >= 0) {
      visit_row(up, dr2);
      any = true;
    }
    if (dn < rd.h) {
      visit_row(dn, dr2);
      any = true;
    }
    if (!any) break;
  }
  if (err_mean != nullptr) *err_mean = cnt > 0 ? sum / cnt : 0.0;
  return best;
}

}  // namespace

Maybe weighted_fmeasure(const ProbMap& pred, const BinaryMask& gt) {
  check_pair_shapes(pred.h, pred.w, gt.h, gt.w, "weighted_fmeasure");
  check_prob(pred, "weighted_fmeasure");
  const int h = gt.h, w = gt.w;
  const int64_t ng = gt.count();
  if (ng == 0) return {0.0, false};

  const size_t total = gt.v.size();
  std::vector<double> E(total);
  for (size_t i = 0; i < total; ++i) E[i] = std::abs(pred.v[i] - (gt.v[i] ? 1.0 : 0.0));

  // Errors outside the object are moved to their nearest GT pixel (averaged
  // over equidistant ties); D2 keeps the squared distance for the decay term.
  RowDist rd = build_rowdist(gt);
  std::vector<double> Et(E);
  std::vector<int64_t> D2(total, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const size_t i = static_cast<size_t>(y) * w + x;
      if (gt.v[i]) continue;
      double em = 0.0;
      D2[i] = nearest_site(rd, y, x, E.data(), &em);
      Et[i] = em;
    }
  }

  // 7x7 Gaussian (sigma 5), zero padded; kernel normalized to unit sum.
  double kern[7][7];
  double ksum = 0.0;
  for (int i = -3; i <= 3; ++i) {
    for (int j = -3; j <= 3; ++j) {
      kern[i + 3][j + 3] = std::exp(-static_cast<double>(i * i + j * j) / 50.0);
      ksum += kern[i + 3][j + 3];
    }
  }
  for (auto& row : kern) {
    for (double& v : row) v /= ksum;
  }
  std::vector<double> EA(total, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -3; i <= 3; ++i) {
        const int yy = y + i;
        if (yy < 0 || yy >= h) continue;
        for (int j = -3; j <= 3; ++j) {
          const int xx = x + j;
          if (xx < 0 || xx >= w) continue;
          acc += kern[i + 3][j + 3] * Et[static_cast<size_t>(yy) * w + xx];
        }
      }
      EA[static_cast<size_t>(y) * w + x] = acc;
    }
  }

  // Inside the object keep the smaller of the raw and diffused error; outside
  // the raw error is discounted by distance so far-off false positives cost
  // less. The substituted Et only feeds the diffusion above.
  double tp_loss = 0.0, fpw = 0.0, r_loss = 0.0;
  for (size_t i = 0; i < total; ++i) {
    if (gt.v[i]) {
      const double ew = std::min(E[i], EA[i]);
      tp_loss += ew;
      r_loss += ew;
    } else {
      const double B = 2.0 - std::exp(std::log(0.5) / 5.0 * std::sqrt(static_cast<double>(D2[i])));
      fpw += E[i] * B;
    }
  }
  const double tpw = static_cast<double>(ng) - tp_loss;
  const double recall = 1.0 - r_loss / static_cast<double>(ng);
  const double precision = tpw / (kEps + tpw + fpw);
  const double q = 2.0 * recall * precision / (kEps + recall + precision);
  return {q, true};
}

namespace {

// Object-level similarity of the masked values: favors responses near 1
// with low spread. `vals` are the prediction values on the region.
double object_score(const std::vector<double>& vals) {
  const size_t n = vals.size();
  if (n == 0) return 0.0;
  double meanv = 0.0;
  for (double v : vals) meanv += v;
  meanv /= static_cast<double>(n);
  double var = 0.0;
  for (double v : vals) var += (v - meanv) * (v - meanv);
  const double sd = n > 1 ? std::sqrt(var / static_cast<double>(n - 1)) : 0.0;
  return 2.0 * meanv / (meanv * meanv + 1.0 + sd + kEps);
}

// Region similarity over one quadrant; empty quadrants contribute nothing.
double region_ssim(const ProbMap& pred, const BinaryMask& gt, int y0, int y1, int x0, int x1) {
  const int64_t n = static_cast<int64_t>(y1 - y0) * (x1 - x0);
  if (n <= 0) return 0.0;
  double mx = 0.0, my = 0.0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      mx += pred.at(y, x);
      my += gt.at(y, x) ? 1.0 : 0.0;
    }
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sx = 0.0, sy = 0.0, sxy = 0.0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const double dx = pred.at(y, x) - mx;
      const double dy = (gt.at(y, x) ? 1.0 : 0.0) - my;
      sx += dx * dx;
      sy += dy * dy;
      sxy += dx * dy;
    }
  }
  const double denom_n = static_cast<double>(n - 1) + kEps;
  sx /= denom_n;
  sy /= denom_n;
  sxy /= denom_n;
  const double alpha = 4.0 * mx * my * sxy;
  const double beta = (mx * mx + my * my) * (sx + sy);
  if (alpha != 0.0) return alpha / (beta + kEps);
  return beta == 0.0 ? 1.0 : 0.0;
}

}  // namespace

double s_measure(const ProbMap& pred, const BinaryMask& gt) {
  check_pair_shapes(pred.h, pred.w, gt.h, gt.w, "s_measure");
  check_prob(pred, "s_measure");
  const int64_t total = static_cast<int64_t>(gt.v.size());
  const int64_t ng = gt.count();
  double pmean = 0.0;
  for (double v : pred.v) pmean += v;
  pmean /= static_cast<double>(total);
  if (ng == 0) return 1.0 - pmean;    // empty GT: reward an all-background map
  if (ng == total) return pmean;      // full GT: reward an all-foreground map

  // Object level: foreground values on GT, inverted values off GT.
  std::vector<double> fgv, bgv;
  fgv.reserve(static_cast<size_t>(ng));
  bgv.reserve(static_cast<size_t>(total - ng));
  for (size_t i = 0; i < gt.v.size(); ++i) {
    if (gt.v[i]) {
      fgv.push_back(pred.v[i]);
    } else {
      bgv.push_back(1.0 - pred.v[i]);
    }
  }
  const double mu = static_cast<double>(ng) / static_cast<double>(total);
  const double s_obj = mu * object_score(fgv) + (1.0 - mu) * object_score(bgv);

  // Region level: split at the GT centroid (1-based, round half up) and
  // compare the four quadrants weighted by area.
  int64_t sum_x1 = 0, sum_y1 = 0;
  for (int y = 0; y < gt.h; ++y) {
    for (int x = 0; x < gt.w; ++x) {
      if (gt.at(y, x)) {
        sum_x1 += x + 1;
        sum_y1 += y + 1;
      }
    }
  }
  const int cx = static_cast<int>((2 * sum_x1 + ng) / (2 * ng));  // columns in left half
  const int cy = static_cast<int>((2 * sum_y1 + ng) / (2 * ng));  // rows in top half
  const double area = static_cast<double>(total);
  const double w1 = static_cast<double>(static_cast<int64_t>(cx) * cy) / area;
  const double w2 = static_cast<double>(static_cast<int64_t>(gt.w - cx) * cy) / area;
  const double w3 = static_cast<double>(static_cast<int64_t>(cx) * (gt.h - cy)) / area;
  const double w4 = 1.0 - w1 - w2 - w3;
  const double s_reg = w1 * region_ssim(pred, gt, 0, cy, 0, cx) +
                       w2 * region_ssim(pred, gt, 0, cy, cx, gt.w) +
                       w3 * region_ssim(pred, gt, cy, gt.h, 0, cx) +
                       w4 * region_ssim(pred, gt, cy, gt.h, cx, gt.w);

  return std::max(0.0, 0.5 * s_obj + 0.5 * s_reg);
}

double e_measure_mean(const ProbMap& pred, const BinaryMask& gt) {
  check_pair_shapes(pred.h, pred.w, gt.h, gt.w, "e_measure_mean");
  check_prob(pred, "e_measure_mean");
  const size_t total = gt.v.size();
  const int64_t ng = gt.count();
  const double mu_gt = static_cast<double>(ng) / static_cast<double>(total);

  double acc = 0.0;
  for (int j = 0; j < 256; ++j) {
    const double t = (static_cast<double>(j) + 0.5) / 256.0;
    int64_t nf = 0;
    for (size_t i = 0; i < total; ++i) nf += pred.v[i] >= t;
    double score;
    if (ng == 0) {
      // Empty GT: every predicted pixel is a miss.
      score = 1.0 - static_cast<double>(nf) / static_cast<double>(total);
    } else if (ng == static_cast<int64_t>(total)) {
      score = static_cast<double>(nf) / static_cast<double>(total);
    } else {
      const double mu_fm = static_cast<double>(nf) / static_cast<double>(total);
      double esum = 0.0;
      for (size_t i = 0; i < total; ++i) {
        const double fc = (pred.v[i] >= t ? 1.0 : 0.0) - mu_fm;
        const double gc = (gt.v[i] ? 1.0 : 0.0) - mu_gt;
        const double align = 2.0 * gc * fc / (gc * gc + fc * fc + kEps);
        const double enh = (align + 1.0) * (align + 1.0) / 4.0;
        esum += enh;
      }
      score = esum / static_cast<double>(total);
    }
    acc += score;
  }
  return acc / 256.0;
}

namespace {

// Mask pixels with a 4-neighbor outside the mask; image borders count as
// outside, so a full-frame mask still has a boundary ring.
BinaryMask boundary_of(const BinaryMask& m) {
  BinaryMask b = BinaryMask::zeros(m.h, m.w);
  for (int y = 0; y < m.h; ++y) {
    for (int x = 0; x < m.w; ++x) {
      if (!m.at(y, x)) continue;
      const bool edge = y == 0 || y == m.h - 1 || x == 0 || x == m.w - 1 || !m.at(y - 1, x) ||
                        !m.at(y + 1, x) || !m.at(y, x - 1) || !m.at(y, x + 1);
      if (edge) b.at(y, x) = 1;
    }
  }
  return b;
}

void directed_distances(const BinaryMask& from, const RowDist& to, std::vector<double>& out) {
  for (int y = 0; y < from.h; ++y) {
    for (int x = 0; x < from.w; ++x) {
      if (!from.at(y, x)) continue;
      const int64_t d2 = nearest_site(to, y, x, nullptr, nullptr);
      out.push_back(std::sqrt(static_cast<double>(d2)));
    }
  }
}

}  // namespace

Maybe hd95(const BinaryMask& pred, const BinaryMask& gt) {
  check_pair_shapes(pred.h, pred.w, gt.h, gt.w, "hd95");
  if (pred.count() == 0 || gt.count() == 0) return {0.0, false};
  const BinaryMask bp = boundary_of(pred);
  const BinaryMask bg = boundary_of(gt);
  const RowDist rp = build_rowdist(bp);
  const RowDist rg = build_rowdist(bg);
  std::vector<double> dists;
  directed_distances(bp, rg, dists);
  directed_distances(bg, rp, dists);
  std::sort(dists.begin(), dists.end());
  const size_t m = dists.size();
  const double rank = 0.95 * static_cast<double>(m - 1);
  const size_t lo = static_cast<size_t>(rank);
  const double frac = rank - static_cast<double>(lo);
  const double val =
      lo + 1 < m ? dists[lo] + frac * (dists[lo + 1] - dists[lo]) : dists[m - 1];
  return {val, true};
}

// ---------------------------------------------------------------------------

namespace {

std::map<std::string, fs::path> list_images(const std::string& dir) {
  if (!fs::is_directory(dir)) throw DataError("evaluate_dir: not a directory: " + dir);
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (ext != ".png" && ext != ".pgm") continue;
    const std::string stem = entry.path().stem().string();
    if (!out.emplace(stem, entry.path()).second)
      throw DataError("evaluate_dir: duplicate image stem '" + stem + "' in " + dir);
  }
  return out;
}

}  // namespace

ImageResult evaluate_prob_pair(const ProbMap& pred, const BinaryMask& gt) {
  check_pair_shapes(pred.h, pred.w, gt.h, gt.w, "evaluate pair");
  BinaryMask pbin = BinaryMask::zeros(pred.h, pred.w);
  for (size_t i = 0; i < pred.v.size(); ++i) pbin.v[i] = pred.v[i] >= 0.5;

  ImageResult r;
  const DiceIou di = dice_iou(pbin, gt);
  r.mdice = di.dice;
  r.miou = di.iou;
  r.overlap_ok = true;
  const Maybe wf = weighted_fmeasure(pred, gt);
  r.wfm = wf.value;
  r.wfm_ok = wf.defined;
  r.sm = s_measure(pred, gt);
  r.mem = e_measure_mean(pred, gt);
  r.sm_ok = true;
  r.mae = mae(pred, gt);
  const Maybe hd = hd95(pbin, gt);
  r.hd95 = hd.value;
  r.hd95_ok = hd.defined;
  return r;
}

ImageResult evaluate_label_pair(const LabelMap& pl, const LabelMap& gl, int num_classes) {
  check_pair_shapes(pl.h, pl.w, gl.h, gl.w, "evaluate pair");

  ImageResult r;
  const MulticlassOverlap ov = multiclass_dice(pl, gl, num_classes);
  r.mdice = ov.mdice;
  r.miou = ov.miou;
  r.overlap_ok = ov.defined;

  // Soft metrics run one-vs-rest on hard class masks, averaged over the
  // classes present in GT; hd95 needs a boundary on both sides.
  double wfm_acc = 0.0, sm_acc = 0.0, mem_acc = 0.0, mae_acc = 0.0, hd_acc = 0.0;
  int soft_n = 0, hd_n = 0;
  for (int k = 1; k <= num_classes; ++k) {
    BinaryMask pk = BinaryMask::zeros(pl.h, pl.w);
    BinaryMask gk = BinaryMask::zeros(gl.h, gl.w);
    ProbMap pp = ProbMap::zeros(pl.h, pl.w);
    for (size_t i = 0; i < pl.v.size(); ++i) {
      pk.v[i] = pl.v[i] == k;
      gk.v[i] = gl.v[i] == k;
      pp.v[i] = pk.v[i] ? 1.0 : 0.0;
    }
    if (!ov.present_gt[static_cast<size_t>(k - 1)]) continue;
    ++soft_n;
    const Maybe wf = weighted_fmeasure(pp, gk);
    wfm_acc += wf.value;  // defined: class present in GT
    sm_acc += s_measure(pp, gk);
    mem_acc += e_measure_mean(pp, gk);
    mae_acc += mae(pp, gk);
    const Maybe hd = hd95(pk, gk);
    if (hd.defined) {
      hd_acc += hd.value;
      ++hd_n;
    }
  }
  if (soft_n > 0) {
    r.wfm = wfm_acc / soft_n;
    r.sm = sm_acc / soft_n;
    r.mem = mem_acc / soft_n;
    r.mae = mae_acc / soft_n;
    r.wfm_ok = true;
    r.sm_ok = true;
  }
  if (hd_n > 0) {
    r.hd95 = hd_acc / hd_n;
    r.hd95_ok = true;
  }
  if (soft_n == 0) {
    // No foreground class in GT at all: only a trivial MAE remains.
    double m = 0.0;
    for (int32_t v : pl.v) m += v != 0 ? 1.0 : 0.0;
    r.mae = m / static_cast<double>(pl.v.size());
  }
  return r;
}

void finalize_report(MetricsReport& rep) {
  rep.mean = ImageResult{};
  rep.n_overlap = rep.n_wfm = rep.n_sm = rep.n_hd95 = 0;
  ImageResult& m = rep.mean;
  m.name = "mean";
  for (const ImageResult& r : rep.images) {
    if (r.overlap_ok) {
      m.mdice += r.mdice;
      m.miou += r.miou;
      ++rep.n_overlap;
    }
    if (r.wfm_ok) {
      m.wfm += r.wfm;
      ++rep.n_wfm;
    }
    if (r.sm_ok) {
      m.sm += r.sm;
      m.mem += r.mem;
      ++rep.n_sm;
    }
    m.mae += r.mae;
    if (r.hd95_ok) {
      m.hd95 += r.hd95;
      ++rep.n_hd95;
    }
  }
  if (rep.n_overlap) {
    m.mdice /= rep.n_overlap;
    m.miou /= rep.n_overlap;
    m.overlap_ok = true;
  }
  if (rep.n_wfm) {
    m.wfm /= rep.n_wfm;
    m.wfm_ok = true;
  }
  if (rep.n_sm) {
    m.sm /= rep.n_sm;
    m.mem /= rep.n_sm;
    m.sm_ok = true;
  }
  if (!rep.images.empty()) m.mae /= static_cast<double>(rep.images.size());
  if (rep.n_hd95) {
    m.hd95 /= rep.n_hd95;
    m.hd95_ok = true;
  }
}

namespace {

ImageResult eval_binary_pair(const ImageU8& pred, const ImageU8& gt) {
  if (pred.channels != 1)
    throw DataError("evaluate_dir: binary-mode prediction must be grayscale");
  if (gt.channels != 1) throw DataError("evaluate_dir: ground truth must be grayscale");
  check_pair_shapes(pred.h, pred.w, gt.h, gt.w, "evaluate_dir pair");
  ProbMap prob = ProbMap::zeros(pred.h, pred.w);
  BinaryMask gbin = BinaryMask::zeros(gt.h, gt.w);
  for (size_t i = 0; i < prob.v.size(); ++i) {
    // v/255 >= 0.5 exactly when v >= 128, so overlap matches byte thresholds.
    prob.v[i] = static_cast<double>(pred.pix[i]) / 255.0;
    gbin.v[i] = gt.pix[i] >= 128;
  }
  return evaluate_prob_pair(prob, gbin);
}

ImageResult eval_multiclass_pair(const ImageU8& pred, const ImageU8& gt, int num_classes) {
  if (pred.channels != 1 || gt.channels != 1)
    throw DataError("evaluate_dir: label maps must be single-channel");
  check_pair_shapes(pred.h, pred.w, gt.h, gt.w, "evaluate_dir pair");
  LabelMap pl = LabelMap::zeros(1, pred.h, pred.w);
  LabelMap gl = LabelMap::zeros(1, gt.h, gt.w);
  for (size_t i = 0; i < pred.pix.size(); ++i) {
    pl.v[i] = pred.pix[i];
    gl.v[i] = gt.pix[i];
    if (pl.v[i] > num_classes || gl.v[i] > num_classes)
      throw DataError("evaluate_dir: label value exceeds class count " +
                      std::to_string(num_classes));
  }
  return evaluate_label_pair(pl, gl, num_classes);
}

}  // namespace

MetricsReport evaluate_dir(const std::string& pred_dir, const std::string& gt_dir, EvalMode mode,
                           int num_classes) {
  if (mode == EvalMode::kMulticlass && num_classes < 1)
    throw ConfigError("evaluate_dir: multiclass mode needs num_classes >= 1");
  const auto preds = list_images(pred_dir);
  const auto gts = list_images(gt_dir);
  std::string missing;
  for (const auto& [stem, path] : gts) {
    if (!preds.count(stem)) missing += " pred:" + stem;
  }
  for (const auto& [stem, path] : preds) {
    if (!gts.count(stem)) missing += " gt:" + stem;
  }
  if (!missing.empty()) throw DataError("evaluate_dir: unmatched images:" + missing);
  if (preds.empty()) throw DataError("evaluate_dir: no images found in " + pred_dir);

  MetricsReport rep;
  rep.mode = mode;
  rep.num_classes = mode == EvalMode::kBinary ? 1 : num_classes;
  for (const auto& [stem, ppath] : preds) {
    const ImageU8 pimg = read_image(ppath.string());
    const ImageU8 gimg = read_image(gts.at(stem).string());
    ImageResult r = mode == EvalMode::kBinary ? eval_binary_pair(pimg, gimg)
                                              : eval_multiclass_pair(pimg, gimg, num_classes);
    r.name = stem;
    rep.images.push_back(std::move(r));
  }
  finalize_report(rep);
  return rep;
}

namespace {

std::string fmt_val(double v, bool ok) {
  if (!ok) return "";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void csv_row(std::ostream& os, const ImageResult& r) {
  os << r.name << "," << fmt_val(r.mdice, r.overlap_ok) << "," << fmt_val(r.miou, r.overlap_ok)
     << "," << fmt_val(r.wfm, r.wfm_ok) << "," << fmt_val(r.sm, r.sm_ok) << ","
     << fmt_val(r.mem, r.sm_ok) << "," << fmt_val(r.mae, true) << ","
     << fmt_val(r.hd95, r.hd95_ok) << "\n";
}

}  // namespace

void write_csv(const MetricsReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("write_csv: cannot open " + path);
  out << "image,mdice,miou,wfm,sm,mem,mae,hd95\n";
  for (const auto& r : report.images) csv_row(out, r);
  csv_row(out, report.mean);
  if (!out) throw DataError("write_csv: short write to " + path);
}

std::string summary_table(const MetricsReport& report) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-8s %7s %7s %7s %7s %7s %8s %7s\n", "images", "mDice",
                "mIoU", "wFm", "Sm", "mEm", "MAE", "HD95");
  os << buf;
  const ImageResult& m = report.mean;
  auto pct = [](double v, bool ok) {
    return ok ? v * 100.0 : std::numeric_limits<double>::quiet_NaN();
  };
  std::snprintf(buf, sizeof(buf), "%-8zu %7.2f %7.2f %7.2f %7.2f %7.2f %8.3f %7.2f\n",
                report.images.size(), pct(m.mdice, m.overlap_ok), pct(m.miou, m.overlap_ok),
                pct(m.wfm, m.wfm_ok), pct(m.sm, m.sm_ok), pct(m.mem, m.sm_ok),
                m.mae * 100.0, m.hd95_ok ? m.hd95 : std::numeric_limits<double>::quiet_NaN());
  os << buf;
  std::snprintf(buf, sizeof(buf),
                "defined: overlap %d/%zu, wfm %d/%zu, sm/mem %d/%zu, hd95 %d/%zu; "
                "[0,1] metrics and MAE scaled by 100, hd95 in pixels\n",
                report.n_overlap, report.images.size(), report.n_wfm, report.images.size(),
                report.n_sm, report.images.size(), report.n_hd95, report.images.size());
  os << buf;
  return os.str();
}

}  // namespace dsraseg::metrics
