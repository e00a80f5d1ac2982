#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tempokit/errors.hpp"
#include "tempokit/event_segmentation.hpp"
#include "tempokit/math.hpp"

namespace tempokit {

struct TrackerParams {
  double iou_min = 0.3;
  double feature_cos_min = 0.5;
  std::size_t max_gap_frames = 5;
  double iou_weight = 1.0;
  double cos_weight = 1.0;
};

struct Observation {
  std::int64_t frame_index = 0;
  Box box;
  std::vector<double> roi_feature;
};

// Spatio-temporal trajectory of one instance across the sampled frames.
struct InstanceTrack {
  std::int64_t track_id = 0;
  std::string class_label;
  std::vector<Observation> observations;  // strictly increasing frame_index

  std::int64_t first_frame() const { return observations.front().frame_index; }
  std::int64_t last_frame() const { return observations.back().frame_index; }
};

struct FrameDetections {
  std::int64_t frame_index = 0;
  std::vector<Detection> detections;  // track_id ignored on input
};

// Greedy frame-by-frame association. Candidates pair an open track's last
// observation with a same-class detection; eligibility needs IoU >= iou_min
// and roi cosine >= feature_cos_min; score is the weighted sum of the two.
// Matches are taken in descending score, one-to-one per frame, ties broken
// by older track then lower detection index. Unmatched detections open new
// tracks; tracks unseen for more than max_gap_frames close.
inline std::vector<InstanceTrack> link_tracks(std::span<const FrameDetections> per_frame,
                                              const TrackerParams& params = {}) {
  for (std::size_t i = 1; i < per_frame.size(); ++i) {
    if (per_frame[i].frame_index < per_frame[i - 1].frame_index) {
      throw ValidationError("detection frames must be non-decreasing");
    }
  }

  std::vector<InstanceTrack> tracks;
  std::vector<std::size_t> open;  // indices into tracks

  struct Candidate {
    double score;
    std::size_t open_pos;  // position in `open`
    std::size_t det_idx;
  };

  std::size_t i = 0;
  while (i < per_frame.size()) {
    const std::int64_t frame = per_frame[i].frame_index;
    // batch duplicate frame entries together
    std::vector<const Detection*> dets;
    while (i < per_frame.size() && per_frame[i].frame_index == frame) {
      for (const auto& d : per_frame[i].detections) {
        d.box.validate();
        dets.push_back(&d);
      }
      ++i;
    }

    std::erase_if(open, [&](std::size_t t) {
      return frame - tracks[t].last_frame() > static_cast<std::int64_t>(params.max_gap_frames);
    });

    std::vector<Candidate> candidates;
    for (std::size_t op = 0; op < open.size(); ++op) {
      const InstanceTrack& t = tracks[open[op]];
      const Observation& last = t.observations.back();
      for (std::size_t d = 0; d < dets.size(); ++d) {
        if (dets[d]->class_label != t.class_label) continue;
        const double iou = box_iou(last.box, dets[d]->box);
        if (iou < params.iou_min) continue;
        const double cos = cosine_or_zero(last.roi_feature, dets[d]->roi_feature);
        if (cos < params.feature_cos_min) continue;
        candidates.push_back({params.iou_weight * iou + params.cos_weight * cos, op, d});
      }
    }
    std::sort(candidates.begin(), candidates.end(), [&](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      if (tracks[open[a.open_pos]].track_id != tracks[open[b.open_pos]].track_id) {
        return tracks[open[a.open_pos]].track_id < tracks[open[b.open_pos]].track_id;
      }
      return a.det_idx < b.det_idx;
    });

    std::vector<bool> track_taken(open.size(), false);
    std::vector<bool> det_taken(dets.size(), false);
    for (const Candidate& c : candidates) {
      if (track_taken[c.open_pos] || det_taken[c.det_idx]) continue;
      track_taken[c.open_pos] = true;
      det_taken[c.det_idx] = true;
      tracks[open[c.open_pos]].observations.push_back(
          {frame, dets[c.det_idx]->box, dets[c.det_idx]->roi_feature});
    }
    for (std::size_t d = 0; d < dets.size(); ++d) {
      if (det_taken[d]) continue;
      InstanceTrack t;
      t.track_id = static_cast<std::int64_t>(tracks.size());
      t.class_label = dets[d]->class_label;
      t.observations.push_back({frame, dets[d]->box, dets[d]->roi_feature});
      tracks.push_back(std::move(t));
      open.push_back(tracks.size() - 1);
    }
  }
  return tracks;
}

// Row id of the distinguished whole-video row.
constexpr std::int64_t kVideoRowId = -1;

constexpr std::array<std::string_view, 5> kClueKinds = {"scene", "instance", "action",
                                                        "attribute", "caption"};

struct Clue {
  std::string kind;
  std::string text;

  friend bool operator==(const Clue& a, const Clue& b) {
    return a.kind == b.kind && a.text == b.text;
  }
};

struct MatrixCell {
  bool present = false;
  std::vector<Clue> clues;
  std::optional<std::string> caption;

  friend bool operator==(const MatrixCell&, const MatrixCell&) = default;
};

// Tracks x events grid; row 0 is the whole video, which counts as a track
// and is present in every column.
struct InstanceEventMatrix {
  std::vector<InstanceTrack> tracks;
  std::vector<Event> events;
  std::vector<std::vector<MatrixCell>> cells;  // [1 + tracks][events]

  std::size_t row_count() const { return tracks.size() + 1; }

  // row 0 = video; rows 1.. map to tracks[row - 1]
  std::int64_t row_id(std::size_t row) const {
    return row == 0 ? kVideoRowId : tracks[row - 1].track_id;
  }

  std::size_t row_of(std::int64_t track_id) const {
    if (track_id == kVideoRowId) return 0;
    for (std::size_t t = 0; t < tracks.size(); ++t) {
      if (tracks[t].track_id == track_id) return t + 1;
    }
    throw ReferenceError("no track with id " + std::to_string(track_id));
  }

  const MatrixCell& cell(std::size_t row, std::size_t col) const { return cells[row][col]; }
  MatrixCell& cell(std::size_t row, std::size_t col) { return cells[row][col]; }
};

inline InstanceEventMatrix build_matrix(std::vector<InstanceTrack> tracks,
                                        std::vector<Event> events) {
  if (events.empty()) throw ValidationError("matrix needs at least one event");
  for (std::size_t j = 1; j < events.size(); ++j) {
    if (events[j].start_frame <= events[j - 1].end_frame) {
      throw ValidationError("events overlap or are out of order");
    }
    if (events[j].start_frame != events[j - 1].end_frame + 1) {
      throw ValidationError("events must partition the frame range without gaps");
    }
  }

  InstanceEventMatrix m;
  m.tracks = std::move(tracks);
  m.events = std::move(events);
  m.cells.assign(m.row_count(), std::vector<MatrixCell>(m.events.size()));
  for (auto& cell : m.cells[0]) cell.present = true;  // the video row spans everything
  for (std::size_t t = 0; t < m.tracks.size(); ++t) {
    for (const Observation& obs : m.tracks[t].observations) {
      for (std::size_t j = 0; j < m.events.size(); ++j) {
        if (obs.frame_index >= m.events[j].start_frame &&
            obs.frame_index <= m.events[j].end_frame) {
          m.cells[t + 1][j].present = true;
        }
      }
    }
  }
  return m;
}

// External clue/caption annotations addressed at (track row, event column).
struct ClueRecord {
  std::int64_t track_id = kVideoRowId;  // kVideoRowId addresses the video row
  std::size_t event_index = 0;
  std::string kind;  // one of kClueKinds
  std::string text;
};

// Appends clue text to the addressed cell; the caption kind overwrites the
// cell caption. Idempotent: applying the same records twice changes nothing.
inline InstanceEventMatrix attach_clues(InstanceEventMatrix matrix,
                                        std::span<const ClueRecord> records) {
  for (std::size_t r = 0; r < records.size(); ++r) {
    const ClueRecord& rec = records[r];
    const std::string where = "clue record " + std::to_string(r) + " (track " +
                              std::to_string(rec.track_id) + ", event " +
                              std::to_string(rec.event_index) + ")";
    if (std::find(kClueKinds.begin(), kClueKinds.end(), rec.kind) == kClueKinds.end()) {
      throw ValidationError(where + ": unknown clue kind '" + rec.kind + "'");
    }
    if (rec.event_index >= matrix.events.size()) {
      throw ReferenceError(where + ": event index out of range");
    }
    std::size_t row;
    try {
      row = matrix.row_of(rec.track_id);
    } catch (const ReferenceError&) {
      throw ReferenceError(where + ": no such track");
    }
    MatrixCell& cell = matrix.cell(row, rec.event_index);
    if (!cell.present) {
      throw ReferenceError(where + ": cell is not present (track never enters this event)");
    }
    if (rec.kind == "caption") {
      cell.caption = rec.text;
    } else {
      const Clue clue{rec.kind, rec.text};
      if (std::find(cell.clues.begin(), cell.clues.end(), clue) == cell.clues.end()) {
        cell.clues.push_back(clue);
      }
    }
  }
  return matrix;
}

}  // namespace tempokit
