// Independent reference implementations used only by tests. These are kept
// deliberately separate from the library code paths they check: direct
// formula evaluation, dense grids, finite differences and brute-force
// matching.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "tempokit/eval_metrics.hpp"
#include "tempokit/math.hpp"
#include "tempokit/temporal_space.hpp"

namespace oracles {

using tempokit::Interval;
using tempokit::LabeledInterval;
using tempokit::Matrix;
using tempokit::ScoredMoment;
using tempokit::TemporalTokenSpace;

// Piecewise-linear interpolation written from the definition: locate the
// segment by scanning anchor times, then blend.
inline std::vector<double> interp_encode(const TemporalTokenSpace& space, double tau) {
  const std::size_t n = space.n_anchors;
  std::size_t seg = n - 2;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double left = static_cast<double>(k) / static_cast<double>(n - 1);
    const double right = static_cast<double>(k + 1) / static_cast<double>(n - 1);
    if (tau >= left && tau <= right) {
      seg = k;
      break;
    }
  }
  const double left = static_cast<double>(seg) / static_cast<double>(n - 1);
  const double t = (tau - left) * static_cast<double>(n - 1);
  std::vector<double> out(space.dim);
  for (std::size_t j = 0; j < space.dim; ++j) {
    out[j] = (1.0 - t) * space.anchors.at(seg, j) + t * space.anchors.at(seg + 1, j);
  }
  return out;
}

// Dense grid search for the nearest curve point; ties to the smallest tau.
inline double grid_decode(const TemporalTokenSpace& space, std::span<const double> embedding,
                          std::size_t steps = 100000) {
  double best_tau = 0.0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g <= steps; ++g) {
    const double tau = static_cast<double>(g) / static_cast<double>(steps);
    const auto point = interp_encode(space, tau);
    double d2 = 0.0;
    for (std::size_t j = 0; j < embedding.size(); ++j) {
      const double r = point[j] - embedding[j];
      d2 += r * r;
    }
    if (d2 < best_d2) {
      best_d2 = d2;
      best_tau = tau;
    }
  }
  return best_tau;
}

// <upstream, surrogate(anchors)> where the surrogate re-adds the neighbor sum
// and subtracts a frozen copy; the frozen copy is a constant, so it drops out
// of differences and is omitted here.
inline double surrogate_objective(const Matrix& anchors, double tau,
                                  std::span<const double> upstream, bool ntp_enabled,
                                  bool include_self_term) {
  const std::size_t n = anchors.rows;
  const double p = tau * static_cast<double>(n - 1);
  std::size_t a = static_cast<std::size_t>(std::floor(p));
  if (a > n - 2) a = n - 2;
  const double f = p - static_cast<double>(a);

  auto adjusted = [&](std::size_t k, std::size_t j) {
    double v = anchors.at(k, j);
    if (!ntp_enabled) return v;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == k && !include_self_term) continue;
      v += std::ldexp(1.0, -static_cast<int>(i > k ? i - k : k - i)) * anchors.at(i, j);
    }
    return v;
  };
  double value = 0.0;
  for (std::size_t j = 0; j < anchors.cols; ++j) {
    value += upstream[j] * ((1.0 - f) * adjusted(a, j) + f * adjusted(a + 1, j));
  }
  return value;
}

// Central finite differences of the surrogate objective, per anchor entry.
inline Matrix fd_anchor_grad(const TemporalTokenSpace& space, double tau,
                             std::span<const double> upstream, bool ntp_enabled,
                             bool include_self_term = true, double h = 1e-5) {
  Matrix grad(space.n_anchors, space.dim);
  for (std::size_t i = 0; i < space.n_anchors; ++i) {
    for (std::size_t j = 0; j < space.dim; ++j) {
      Matrix probe = space.anchors;
      probe.at(i, j) += h;
      const double up = surrogate_objective(probe, tau, upstream, ntp_enabled, include_self_term);
      probe.at(i, j) -= 2.0 * h;
      const double down =
          surrogate_objective(probe, tau, upstream, ntp_enabled, include_self_term);
      grad.at(i, j) = (up - down) / (2.0 * h);
    }
  }
  return grad;
}

inline double frobenius_rel_err(const Matrix& a, const Matrix& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    num += d * d;
    den += b.data[i] * b.data[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

// Cyclic Jacobi eigendecomposition for small symmetric matrices; returns
// (eigenvalues, eigenvectors as columns).
inline std::pair<std::vector<double>, Matrix> jacobi_eig(Matrix a) {
  const std::size_t n = a.rows;
  Matrix v(n, n);
  for (std::size_t i = 0; i < n; ++i) v.at(i, i) = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += a.at(p, q) * a.at(p, q);
    }
    if (off < 1e-24) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a.at(p, q)) < 1e-300) continue;
        const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * a.at(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a.at(k, p), akq = a.at(k, q);
          a.at(k, p) = c * akp - s * akq;
          a.at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a.at(p, k), aqk = a.at(q, k);
          a.at(p, k) = c * apk - s * aqk;
          a.at(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v.at(k, p), vkq = v.at(k, q);
          v.at(k, p) = c * vkp - s * vkq;
          v.at(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a.at(i, i);
  return {eig, v};
}

// ---- metric re-implementations ------------------------------------------------

inline double iou(const Interval& a, const Interval& b) {
  const double lo = std::max(a.start, b.start);
  const double hi = std::min(a.end, b.end);
  const double inter = hi > lo ? hi - lo : 0.0;
  const double uni = (a.end - a.start) + (b.end - b.start) - inter;
  return uni <= 0.0 ? 0.0 : inter / uni;
}

inline double recall_at(std::span<const Interval> preds, std::span<const Interval> gts,
                        double threshold) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (iou(preds[i], gts[i]) >= threshold) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(preds.size());
}

inline double mean_iou(std::span<const Interval> preds, std::span<const Interval> gts) {
  double s = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) s += iou(preds[i], gts[i]);
  return s / static_cast<double>(preds.size());
}

// Same greedy definition as the library, written independently: sort all
// same-class pairs above the threshold by IoU and assign one-to-one.
inline std::size_t greedy_f1_tp(const std::vector<LabeledInterval>& preds,
                                const std::vector<LabeledInterval>& gts, double threshold) {
  struct Edge {
    double iou;
    std::size_t p, g;
  };
  std::vector<Edge> edges;
  for (std::size_t p = 0; p < preds.size(); ++p) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (preds[p].label != gts[g].label) continue;
      const double v = iou(preds[p].interval, gts[g].interval);
      if (v >= threshold) edges.push_back({v, p, g});
    }
  }
  std::stable_sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.p != b.p) return a.p < b.p;
    return a.g < b.g;
  });
  std::vector<bool> pu(preds.size(), false), gu(gts.size(), false);
  std::size_t tp = 0;
  for (const auto& e : edges) {
    if (pu[e.p] || gu[e.g]) continue;
    pu[e.p] = gu[e.g] = true;
    ++tp;
  }
  return tp;
}

// Exhaustive maximum one-to-one matching over thresholded same-class pairs,
// for small instances.
inline std::size_t optimal_f1_tp(const std::vector<LabeledInterval>& preds,
                                 const std::vector<LabeledInterval>& gts, double threshold) {
  const std::size_t np = preds.size();
  std::vector<std::vector<std::size_t>> compatible(np);
  for (std::size_t p = 0; p < np; ++p) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (preds[p].label == gts[g].label && iou(preds[p].interval, gts[g].interval) >= threshold) {
        compatible[p].push_back(g);
      }
    }
  }
  std::size_t best = 0;
  std::vector<bool> used(gts.size(), false);
  auto recurse = [&](auto&& self, std::size_t p, std::size_t matched) -> void {
    best = std::max(best, matched);
    if (p == np) return;
    self(self, p + 1, matched);  // leave p unmatched
    for (std::size_t g : compatible[p]) {
      if (used[g]) continue;
      used[g] = true;
      self(self, p + 1, matched + 1);
      used[g] = false;
    }
  };
  recurse(recurse, 0, 0);
  return best;
}

inline double f1_from_tp(std::size_t tp, std::size_t n_pred, std::size_t n_gt) {
  const double precision = n_pred == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(n_pred);
  const double recall = static_cast<double>(tp) / static_cast<double>(n_gt);
  return precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
}

// All-points AP re-implementation for one query and one threshold.
inline double average_precision(std::vector<ScoredMoment> preds, const std::vector<Interval>& gts,
                                double threshold) {
  std::stable_sort(preds.begin(), preds.end(),
                   [](const ScoredMoment& a, const ScoredMoment& b) { return a.score > b.score; });
  std::vector<bool> used(gts.size(), false);
  double ap = 0.0, prev_recall = 0.0;
  std::size_t tp = 0;
  for (std::size_t r = 0; r < preds.size(); ++r) {
    double best_v = 0.0;
    std::size_t best_g = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g]) continue;
      const double v = iou(preds[r].interval, gts[g]);
      if (v > best_v) {
        best_v = v;
        best_g = g;
      }
    }
    if (best_g < gts.size() && best_v >= threshold) {
      used[best_g] = true;
      ++tp;
      const double recall = static_cast<double>(tp) / static_cast<double>(gts.size());
      ap += (recall - prev_recall) * (static_cast<double>(tp) / static_cast<double>(r + 1));
      prev_recall = recall;
    }
  }
  return ap;
}

}  // namespace oracles
