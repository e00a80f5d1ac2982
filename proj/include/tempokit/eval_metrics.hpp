#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tempokit/errors.hpp"

namespace tempokit {

struct Interval {
  double start = 0.0;
  double end = 0.0;

  void validate() const {
    if (!(start <= end)) throw ValidationError("interval start must not exceed end");
  }

  double length() const { return end - start; }
};

// |a n b| / |a u b|; zero when the union has zero length.
inline double interval_iou(const Interval& a, const Interval& b) {
  a.validate();
  b.validate();
  const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double uni = a.length() + b.length() - inter;
  return uni <= 0.0 ? 0.0 : inter / uni;
}

struct GroundingReport {
  std::map<double, double> recall_at;
  double mean_iou = 0.0;
};

// Recall at each IoU threshold plus mean IoU over aligned (pred, gt) pairs.
inline GroundingReport grounding_metrics(std::span<const Interval> preds,
                                         std::span<const Interval> gts,
                                         std::span<const double> thresholds) {
  if (preds.size() != gts.size()) throw ShapeError("preds and gts must be aligned");
  if (preds.empty()) throw ValidationError("no queries to evaluate");
  GroundingReport report;
  std::vector<double> ious(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) ious[i] = interval_iou(preds[i], gts[i]);
  for (double t : thresholds) {
    std::size_t hit = 0;
    for (double v : ious) {
      if (v >= t) ++hit;
    }
    report.recall_at[t] = static_cast<double>(hit) / static_cast<double>(ious.size());
  }
  double s = 0.0;
  for (double v : ious) s += v;
  report.mean_iou = s / static_cast<double>(ious.size());
  return report;
}

struct LabeledInterval {
  Interval interval;
  std::string label;
};

struct LabeledSegmentation {
  std::vector<LabeledInterval> segments;
  // Optional direct frame labels; when both sides carry them, MoF compares
  // these instead of rasterizing.
  std::optional<std::vector<std::string>> frame_labels;
};

struct ActionSegReport {
  double mof = 0.0;
  std::map<double, double> f1_at;
};

namespace detail {

// Half-open rasterization on a shared grid spanning the ground truth.
inline std::vector<std::string> rasterize(const LabeledSegmentation& seg, double span_start,
                                          std::size_t n_frames, double fps) {
  std::vector<std::string> labels(n_frames);
  for (std::size_t f = 0; f < n_frames; ++f) {
    const double t = span_start + static_cast<double>(f) / fps;
    for (const auto& s : seg.segments) {
      if (t >= s.interval.start && t < s.interval.end) {
        labels[f] = s.label;
        break;
      }
    }
  }
  return labels;
}

struct MatchEdge {
  double iou;
  std::size_t pred;
  std::size_t gt;
};

// Greedy one-to-one matching by descending IoU over same-class pairs with
// IoU >= threshold; returns the number of matched predictions.
inline std::size_t greedy_tp(const std::vector<LabeledInterval>& preds,
                             const std::vector<LabeledInterval>& gts, double threshold) {
  std::vector<MatchEdge> edges;
  for (std::size_t p = 0; p < preds.size(); ++p) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (preds[p].label != gts[g].label) continue;
      const double iou = interval_iou(preds[p].interval, gts[g].interval);
      if (iou >= threshold) edges.push_back({iou, p, g});
    }
  }
  std::sort(edges.begin(), edges.end(), [](const MatchEdge& a, const MatchEdge& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.pred != b.pred) return a.pred < b.pred;
    return a.gt < b.gt;
  });
  std::vector<bool> pred_used(preds.size(), false), gt_used(gts.size(), false);
  std::size_t tp = 0;
  for (const auto& e : edges) {
    if (pred_used[e.pred] || gt_used[e.gt]) continue;
    pred_used[e.pred] = true;
    gt_used[e.gt] = true;
    ++tp;
  }
  return tp;
}

}  // namespace detail

// Frame-level accuracy (MoF) and segmental F1 at the given overlap
// thresholds. Unless both sides supply frame labels, frames are rasterized
// half-open [start, end) at the declared rate over the ground-truth span.
inline ActionSegReport action_seg_metrics(const LabeledSegmentation& pred,
                                          const LabeledSegmentation& gt,
                                          std::span<const double> f1_overlaps, double fps = 1.0) {
  if (gt.segments.empty()) throw ValidationError("empty ground-truth segmentation");
  for (const auto& s : gt.segments) s.interval.validate();
  for (const auto& s : pred.segments) s.interval.validate();
  for (std::size_t i = 1; i < gt.segments.size(); ++i) {
    if (gt.segments[i].interval.start != gt.segments[i - 1].interval.end) {
      throw ValidationError("ground-truth segments must cover the span without gaps");
    }
  }

  ActionSegReport report;
  if (pred.frame_labels && gt.frame_labels) {
    const auto& pl = *pred.frame_labels;
    const auto& gl = *gt.frame_labels;
    if (pl.size() != gl.size()) throw ShapeError("frame label arrays differ in length");
    if (gl.empty()) throw ValidationError("empty frame label arrays");
    std::size_t same = 0;
    for (std::size_t i = 0; i < gl.size(); ++i) {
      if (pl[i] == gl[i]) ++same;
    }
    report.mof = static_cast<double>(same) / static_cast<double>(gl.size());
  } else {
    if (!(fps > 0.0)) throw ValidationError("frame rate must be positive");
    const double span_start = gt.segments.front().interval.start;
    const double span_end = gt.segments.back().interval.end;
    const auto n_frames =
        static_cast<std::size_t>(std::ceil((span_end - span_start) * fps - 1e-9));
    if (n_frames == 0) throw ValidationError("ground truth spans zero frames at this rate");
    const auto pl = detail::rasterize(pred, span_start, n_frames, fps);
    const auto gl = detail::rasterize(gt, span_start, n_frames, fps);
    std::size_t same = 0;
    for (std::size_t i = 0; i < n_frames; ++i) {
      if (pl[i] == gl[i]) ++same;
    }
    report.mof = static_cast<double>(same) / static_cast<double>(n_frames);
  }

  for (double k : f1_overlaps) {
    const std::size_t tp = detail::greedy_tp(pred.segments, gt.segments, k);
    const double precision =
        pred.segments.empty() ? 0.0 : static_cast<double>(tp) / static_cast<double>(pred.segments.size());
    const double recall = static_cast<double>(tp) / static_cast<double>(gt.segments.size());
    report.f1_at[k] =
        precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
  }
  return report;
}

struct ScoredMoment {
  Interval interval;
  double score = 0.0;
};

struct HighlightReport {
  double map = 0.0;
  double r1_at_05 = 0.0;
  std::vector<std::size_t> skipped_queries;  // queries with empty ground truth
};

inline std::vector<double> default_iou_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 9; ++i) grid.push_back(0.5 + 0.05 * i);
  return grid;
}

namespace detail {

// All-points average precision at one IoU threshold: walk predictions by
// descending score, match each to the best unmatched ground truth, and sum
// precision increments at every recall step.
inline double average_precision(const std::vector<ScoredMoment>& ranked,
                                const std::vector<Interval>& gts, double threshold) {
  std::vector<bool> gt_used(gts.size(), false);
  double ap = 0.0;
  double prev_recall = 0.0;
  std::size_t tp = 0;
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    std::size_t best = gts.size();
    double best_iou = 0.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gt_used[g]) continue;
      const double iou = interval_iou(ranked[r].interval, gts[g]);
      if (iou > best_iou) {
        best_iou = iou;
        best = g;
      }
    }
    if (best < gts.size() && best_iou >= threshold) {
      gt_used[best] = true;
      ++tp;
      const double recall = static_cast<double>(tp) / static_cast<double>(gts.size());
      const double precision = static_cast<double>(tp) / static_cast<double>(r + 1);
      ap += (recall - prev_recall) * precision;
      prev_recall = recall;
    }
  }
  return ap;
}

}  // namespace detail

// Mean average precision over the IoU grid (averaged per query, then over
// queries) and top-1 recall at IoU 0.5. Queries with empty ground truth are
// excluded and reported.
inline HighlightReport highlight_metrics(const std::vector<std::vector<ScoredMoment>>& preds,
                                         const std::vector<std::vector<Interval>>& gts,
                                         std::span<const double> iou_grid) {
  if (preds.size() != gts.size()) throw ShapeError("preds and gts must be aligned per query");
  if (iou_grid.empty()) throw ValidationError("empty IoU grid");
  HighlightReport report;
  double map_sum = 0.0;
  double r1_sum = 0.0;
  std::size_t evaluated = 0;
  for (std::size_t q = 0; q < preds.size(); ++q) {
    if (gts[q].empty()) {
      report.skipped_queries.push_back(q);
      continue;
    }
    std::vector<ScoredMoment> ranked = preds[q];
    for (const auto& m : ranked) {
      if (!std::isfinite(m.score)) throw ValidationError("moment scores must be finite");
      m.interval.validate();
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const ScoredMoment& a, const ScoredMoment& b) { return a.score > b.score; });
    double ap_sum = 0.0;
    for (double t : iou_grid) ap_sum += detail::average_precision(ranked, gts[q], t);
    map_sum += ap_sum / static_cast<double>(iou_grid.size());
    if (!ranked.empty()) {
      double best = 0.0;
      for (const auto& g : gts[q]) best = std::max(best, interval_iou(ranked.front().interval, g));
      if (best >= 0.5) r1_sum += 1.0;
    }
    ++evaluated;
  }
  if (evaluated == 0) throw ValidationError("no queries with ground truth to evaluate");
  report.map = map_sum / static_cast<double>(evaluated);
  report.r1_at_05 = r1_sum / static_cast<double>(evaluated);
  return report;
}

}  // namespace tempokit
