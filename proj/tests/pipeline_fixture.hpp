// Deterministic end-to-end fixture: a 48-frame synthetic video in three
// visually distinct blocks with four instances, written as the CLI's input
// files. Byte-stable by construction so golden comparisons hold.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tempokit/json_io.hpp"

namespace pipeline_fixture {

namespace fs = std::filesystem;
using tempokit::OrderedJson;

constexpr std::size_t kFrames = 48;
constexpr std::size_t kLumaSide = 16;
constexpr double kDurationSeconds = 96.0;

struct Instance {
  std::string label;
  std::size_t first_frame;
  std::size_t last_frame;
  double base_x;
  double base_y;
  std::size_t roi_axis;
};

inline const std::vector<Instance>& instances() {
  static const std::vector<Instance> list = {
      {"person", 0, 47, 0.40, 0.30, 0},
      {"dog", 0, 15, 0.10, 0.70, 1},
      {"cat", 16, 31, 0.15, 0.65, 2},
      {"bird", 32, 47, 0.70, 0.10, 3},
  };
  return list;
}

inline std::size_t block_of(std::size_t frame) { return frame / 16; }

inline OrderedJson detection_json(const Instance& inst, std::size_t frame, bool with_track_id,
                                  std::int64_t track_id) {
  const double drift = 0.004 * static_cast<double>(frame - inst.first_frame);
  const double x1 = inst.base_x + drift;
  const double y1 = inst.base_y;
  OrderedJson d;
  if (with_track_id) d["track_id"] = track_id;
  d["class_label"] = inst.label;
  d["box"] = OrderedJson::array({x1, y1, x1 + 0.2, y1 + 0.2});
  OrderedJson roi = OrderedJson::array({0.0, 0.0, 0.0, 0.0});
  roi[inst.roi_axis] = 1.0;
  d["roi_feature"] = roi;
  return d;
}

// frames.jsonl + luma.raw: three 16-frame blocks with luma 40 / 128 / 220 and
// mutually orthogonal global features; detections carry track ids (tracking
// runs before segmentation).
inline void write_frames(const fs::path& dir) {
  std::string luma_raw;
  std::string jsonl;
  for (std::size_t i = 0; i < kFrames; ++i) {
    const std::size_t block = block_of(i);
    const std::uint8_t shade = block == 0 ? 40 : block == 1 ? 128 : 220;
    luma_raw.append(kLumaSide * kLumaSide, static_cast<char>(shade));

    OrderedJson f;
    f["index"] = i;
    f["time"] = static_cast<double>(i) / static_cast<double>(kFrames - 1);
    OrderedJson feature = OrderedJson::array({0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0});
    feature[block] = 1.0;
    f["feature"] = feature;
    f["luma"] = OrderedJson{{"path", "luma.raw"},
                            {"shape", OrderedJson::array({kLumaSide, kLumaSide})},
                            {"offset", i * kLumaSide * kLumaSide}};
    OrderedJson dets = OrderedJson::array();
    std::int64_t next_id = 0;
    for (const auto& inst : instances()) {
      const std::int64_t track_id = next_id++;
      if (i < inst.first_frame || i > inst.last_frame) continue;
      dets.push_back(detection_json(inst, i, true, track_id));
    }
    f["detections"] = std::move(dets);
    jsonl += f.dump();
    jsonl += '\n';
  }
  tempokit::write_file(dir / "luma.raw", luma_raw);
  tempokit::write_file(dir / "frames.jsonl", jsonl);
}

// detections.jsonl: the same observations without track ids, for `track`.
inline void write_detections(const fs::path& dir) {
  std::string jsonl;
  for (std::size_t i = 0; i < kFrames; ++i) {
    for (const auto& inst : instances()) {
      if (i < inst.first_frame || i > inst.last_frame) continue;
      OrderedJson d = detection_json(inst, i, false, 0);
      OrderedJson with_frame;
      with_frame["frame_index"] = i;
      for (const auto& [k, v] : d.items()) with_frame[k] = v;
      jsonl += with_frame.dump();
      jsonl += '\n';
    }
  }
  tempokit::write_file(dir / "detections.jsonl", jsonl);
}

inline void write_clues(const fs::path& dir) {
  auto clue = [](std::int64_t track, std::size_t event, const char* kind, const char* text) {
    return OrderedJson{{"track", track}, {"event", event}, {"kind", kind}, {"text", text}};
  };
  const std::vector<OrderedJson> records = {
      clue(-1, 0, "caption", "A person walks a dog across a sunny park."),
      clue(-1, 1, "caption", "The person plays with a cat near the fountain."),
      clue(-1, 2, "caption", "The person watches a bird fly away."),
      clue(-1, 0, "scene", "a sunny park"),
      clue(-1, 0, "action", "walking a dog"),
      clue(-1, 1, "scene", "a stone fountain"),
      clue(0, 0, "caption", "The person strolls along the path."),
      clue(0, 1, "caption", "The person kneels by the fountain."),
      clue(0, 2, "caption", "The person waves goodbye."),
      clue(0, 0, "attribute", "wearing a red jacket"),
      clue(1, 0, "caption", "The dog trots beside its owner."),
      clue(2, 1, "caption", "The cat naps on the fountain edge."),
      clue(3, 2, "caption", "The bird circles overhead."),
  };
  std::string jsonl;
  for (const auto& r : records) {
    jsonl += r.dump();
    jsonl += '\n';
  }
  tempokit::write_file(dir / "clues.jsonl", jsonl);
}

inline void write_plan(const fs::path& dir) {
  OrderedJson plan;
  plan["segment_captioning"] = 1;
  plan["segment_qa"] = 1;
  plan["instance_qa"] = 1;
  plan["direct_localization"] = 1;
  plan["inferential_localization"] = 1;
  plan["composed_retrieval"] = 1;
  plan["instance_activity_summarizing"] = 1;
  plan["cross_segment_qa"] = 1;
  tempokit::write_file(dir / "plan.json", plan.dump(2) + "\n");
}

inline void write_config(const fs::path& dir) {
  const OrderedJson config = {
      {"rng_seed", 11},
      {"gen", {{"video_id", "fixture"}, {"duration_seconds", kDurationSeconds}}},
  };
  tempokit::write_file(dir / "config.json", config.dump(2) + "\n");
}

inline void write_all(const fs::path& dir) {
  fs::create_directories(dir);
  write_frames(dir);
  write_detections(dir);
  write_clues(dir);
  write_plan(dir);
  write_config(dir);
}

}  // namespace pipeline_fixture
