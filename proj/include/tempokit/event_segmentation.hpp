#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "tempokit/errors.hpp"
#include "tempokit/math.hpp"
#include "tempokit/temporal_space.hpp"

namespace tempokit {

// Axis-aligned box in normalized image coordinates. Zero-area boxes are
// rejected at ingestion; the instance-distance term needs a real center.
struct Box {
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;

  void validate() const {
    if (!(x1 < x2 && y1 < y2)) {
      throw ValidationError("box must satisfy x1 < x2 and y1 < y2");
    }
    for (double v : {x1, y1, x2, y2}) {
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("box coordinates must lie in [0, 1]");
    }
  }

  double center_x() const { return 0.5 * (x1 + x2); }
  double center_y() const { return 0.5 * (y1 + y2); }
};

inline double box_iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = ix * iy;
  const double uni = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter;
  return uni <= 0.0 ? 0.0 : inter / uni;
}

constexpr std::int64_t kNoTrack = -1;

struct Detection {
  std::int64_t track_id = kNoTrack;  // kNoTrack before linking
  std::string class_label;
  Box box;
  std::vector<double> roi_feature;
};

struct LumaGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> values;  // row-major

  bool shape_matches(const LumaGrid& other) const {
    return height == other.height && width == other.width;
  }
};

// One sampled frame: global visual feature, optional luminance grid for
// difference scoring, and the detections observed in it.
struct FrameRecord {
  std::int64_t index = 0;
  NormalizedTime time;
  std::vector<double> feature;
  std::optional<LumaGrid> luma;
  std::vector<Detection> detections;
};

// Inclusive range of positions into the sampled-frame list.
struct SubSegment {
  std::size_t first = 0;
  std::size_t last = 0;
};

struct Event {
  std::int64_t start_frame = 0;  // frame indices, inclusive
  std::int64_t end_frame = 0;
  NormalizedTime start_time;
  NormalizedTime end_time;
  std::optional<std::string> caption;
};

// Mean absolute luma difference between consecutive frames, scaled to [0,1].
// A stand-in for an external content detector; precomputed scores can be
// supplied to segment_video instead.
inline std::vector<double> frame_diff_scores(std::span<const FrameRecord> frames) {
  if (frames.size() < 2) throw ValidationError("frame differences need at least 2 frames");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (!frames[i].luma) {
      throw ValidationError("frame at position " + std::to_string(i) +
                            " has no luma grid; supply precomputed scores instead");
    }
    if (i > 0 && !frames[i].luma->shape_matches(*frames[0].luma)) {
      throw ValidationError("luma grids must share one shape across the video");
    }
  }
  std::vector<double> scores(frames.size() - 1);
  const std::size_t pixels = frames[0].luma->values.size();
  for (std::size_t i = 0; i + 1 < frames.size(); ++i) {
    const auto& a = frames[i].luma->values;
    const auto& b = frames[i + 1].luma->values;
    double acc = 0.0;
    for (std::size_t p = 0; p < pixels; ++p) {
      acc += std::abs(static_cast<int>(a[p]) - static_cast<int>(b[p]));
    }
    scores[i] = acc / (255.0 * static_cast<double>(pixels));
  }
  return scores;
}

// Convolution with a normalized Gaussian kernel, radius ceil(3*sigma),
// reflect padding. Output length equals input length.
inline std::vector<double> gaussian_smooth(std::span<const double> scores, double sigma) {
  if (scores.empty()) throw ValidationError("cannot smooth an empty score array");
  if (!(sigma > 0.0)) throw ValidationError("sigma must be positive");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * static_cast<std::size_t>(radius) + 1);
  double sum = 0.0;
  for (int j = -radius; j <= radius; ++j) {
    const double w = std::exp(-0.5 * (j / sigma) * (j / sigma));
    kernel[static_cast<std::size_t>(j + radius)] = w;
    sum += w;
  }
  for (double& w : kernel) w /= sum;

  const std::int64_t n = static_cast<std::int64_t>(scores.size());
  auto reflect = [n](std::int64_t idx) {
    while (idx < 0 || idx >= n) {
      if (idx < 0) idx = -idx - 1;
      if (idx >= n) idx = 2 * n - 1 - idx;
    }
    return static_cast<std::size_t>(idx);
  };
  std::vector<double> out(scores.size());
  for (std::int64_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = -radius; j <= radius; ++j) {
      acc += kernel[static_cast<std::size_t>(j + radius)] * scores[reflect(i + j)];
    }
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

// Local maxima strictly above the threshold. Boundary entries compare only
// their existing neighbor; a plateau of equal maxima reports its leftmost
// index. Split index i means a boundary between frames i and i+1.
inline std::vector<std::size_t> find_split_points(std::span<const double> smoothed,
                                                  double threshold) {
  const std::size_t n = smoothed.size();
  auto qualifies = [&](std::size_t i) {
    if (!(smoothed[i] > threshold)) return false;
    if (i > 0 && smoothed[i] < smoothed[i - 1]) return false;
    if (i + 1 < n && smoothed[i] < smoothed[i + 1]) return false;
    return true;
  };
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!qualifies(i)) continue;
    if (i > 0 && smoothed[i] == smoothed[i - 1] && qualifies(i - 1)) continue;
    out.push_back(i);
  }
  return out;
}

namespace detail {

inline std::map<std::int64_t, const Detection*> detections_by_track(const FrameRecord& f) {
  std::map<std::int64_t, const Detection*> by_id;
  for (const auto& d : f.detections) {
    if (d.track_id == kNoTrack) {
      throw ValidationError("consistency needs detections with assigned track ids");
    }
    if (!by_id.emplace(d.track_id, &d).second) {
      throw ValidationError("duplicate track id " + std::to_string(d.track_id) +
                            " within one frame");
    }
  }
  return by_id;
}

}  // namespace detail

// Semantic agreement of the two frames flanking a split: global-feature
// cosine plus the mean instance term cos(roi', roi'') * (1 - Dist) over the
// union of tracks. Dist is the box-center distance over the image diagonal,
// clamped to [0, 1], and is defined as 1 when the track appears in only one
// frame, which zeroes that instance's contribution.
inline double consistency(const FrameRecord& prev_last, const FrameRecord& next_first) {
  double value = cosine(prev_last.feature, next_first.feature);

  const auto prev_by_id = detail::detections_by_track(prev_last);
  const auto next_by_id = detail::detections_by_track(next_first);
  std::set<std::int64_t> union_ids;
  for (const auto& [id, _] : prev_by_id) union_ids.insert(id);
  for (const auto& [id, _] : next_by_id) union_ids.insert(id);
  if (union_ids.empty()) return value;

  double instance_sum = 0.0;
  for (std::int64_t id : union_ids) {
    const auto pi = prev_by_id.find(id);
    const auto ni = next_by_id.find(id);
    if (pi == prev_by_id.end() || ni == next_by_id.end()) continue;  // Dist = 1, term is 0
    const Detection& a = *pi->second;
    const Detection& b = *ni->second;
    const double dx = a.box.center_x() - b.box.center_x();
    const double dy = a.box.center_y() - b.box.center_y();
    const double dist = std::min(1.0, std::sqrt(dx * dx + dy * dy) / std::numbers::sqrt2);
    instance_sum += cosine(a.roi_feature, b.roi_feature) * (1.0 - dist);
  }
  return value + instance_sum / static_cast<double>(union_ids.size());
}

namespace detail {

inline void check_cover(const std::vector<SubSegment>& segs, std::size_t n_frames) {
  if (segs.empty() || n_frames == 0) throw ValidationError("sub-segments must cover the video");
  if (segs.front().first != 0 || segs.back().last != n_frames - 1) {
    throw ValidationError("sub-segments must start at the first frame and end at the last");
  }
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (segs[i].last < segs[i].first) throw ValidationError("sub-segment with last < first");
    if (i > 0 && segs[i].first != segs[i - 1].last + 1) {
      throw ValidationError("sub-segments must be ordered, disjoint and covering");
    }
  }
}

inline Event to_event(std::span<const FrameRecord> frames, const SubSegment& s) {
  Event e;
  e.start_frame = frames[s.first].index;
  e.end_frame = frames[s.last].index;
  e.start_time = frames[s.first].time;
  e.end_time = frames[s.last].time;
  return e;
}

}  // namespace detail

// Single left-to-right merge pass over adjacent sub-segments: merge when the
// boundary consistency exceeds merge_threshold. Afterwards, events shorter
// than min_event_frames fold into the more consistent neighbor. The optional
// fixpoint mode repeats the consistency pass until stable.
inline std::vector<Event> merge_segments(const std::vector<SubSegment>& subsegments,
                                         std::span<const FrameRecord> frames,
                                         double merge_threshold,
                                         std::size_t min_event_frames = 1,
                                         bool to_fixpoint = false) {
  detail::check_cover(subsegments, frames.size());

  std::vector<SubSegment> groups = subsegments;
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<SubSegment> merged;
    merged.push_back(groups.front());
    for (std::size_t i = 1; i < groups.size(); ++i) {
      const double c = consistency(frames[merged.back().last], frames[groups[i].first]);
      if (c > merge_threshold) {
        merged.back().last = groups[i].last;
        changed = true;
      } else {
        merged.push_back(groups[i]);
      }
    }
    groups = std::move(merged);
    if (!to_fixpoint) break;
  }

  // Fold runts into whichever neighbor they agree with more.
  while (groups.size() > 1) {
    std::size_t short_idx = groups.size();
    for (std::size_t i = 0; i < groups.size(); ++i) {
      if (groups[i].last - groups[i].first + 1 < min_event_frames) {
        short_idx = i;
        break;
      }
    }
    if (short_idx == groups.size()) break;
    double left_c = -std::numeric_limits<double>::infinity();
    double right_c = -std::numeric_limits<double>::infinity();
    if (short_idx > 0) {
      left_c = consistency(frames[groups[short_idx - 1].last], frames[groups[short_idx].first]);
    }
    if (short_idx + 1 < groups.size()) {
      right_c = consistency(frames[groups[short_idx].last], frames[groups[short_idx + 1].first]);
    }
    if (left_c >= right_c) {
      groups[short_idx - 1].last = groups[short_idx].last;
      groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(short_idx));
    } else {
      groups[short_idx + 1].first = groups[short_idx].first;
      groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(short_idx));
    }
  }

  std::vector<Event> events;
  events.reserve(groups.size());
  for (const auto& g : groups) events.push_back(detail::to_event(frames, g));
  return events;
}

struct SegmentationConfig {
  double sigma = 2.0;
  enum class ThresholdMode { Adaptive, Fixed };
  ThresholdMode threshold_mode = ThresholdMode::Adaptive;
  double adaptive_c = 1.0;       // threshold = mean + c * std of smoothed scores
  double fixed_threshold = 0.5;  // used in Fixed mode
  double merge_threshold = 1.0;
  std::size_t min_event_frames = 3;
  bool merge_to_fixpoint = false;
};

// Full boundary-detection pipeline: difference scores (computed or ingested),
// Gaussian smoothing, thresholded local-maxima splitting, consistency merge.
inline std::vector<Event> segment_video(std::span<const FrameRecord> frames,
                                        const SegmentationConfig& config,
                                        const std::vector<double>* precomputed_scores = nullptr) {
  if (frames.empty()) throw ValidationError("cannot segment an empty video");
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].index <= frames[i - 1].index) {
      throw ValidationError("frame indices must be strictly increasing");
    }
  }
  if (frames.size() == 1) {
    return {detail::to_event(frames, SubSegment{0, 0})};
  }

  std::vector<double> scores;
  if (precomputed_scores) {
    if (precomputed_scores->size() != frames.size() - 1) {
      throw ShapeError("precomputed scores must have length frames-1");
    }
    scores = *precomputed_scores;
  } else {
    scores = frame_diff_scores(frames);
  }

  const std::vector<double> smoothed = gaussian_smooth(scores, config.sigma);
  double threshold = config.fixed_threshold;
  if (config.threshold_mode == SegmentationConfig::ThresholdMode::Adaptive) {
    threshold = mean(smoothed) + config.adaptive_c * population_stddev(smoothed);
  }
  const std::vector<std::size_t> splits = find_split_points(smoothed, threshold);

  std::vector<SubSegment> subsegments;
  std::size_t first = 0;
  for (std::size_t s : splits) {
    subsegments.push_back({first, s});
    first = s + 1;
  }
  subsegments.push_back({first, frames.size() - 1});

  return merge_segments(subsegments, frames, config.merge_threshold, config.min_event_frames,
                        config.merge_to_fixpoint);
}

}  // namespace tempokit
