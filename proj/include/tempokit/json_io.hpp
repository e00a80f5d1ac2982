#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tempokit/errors.hpp"
#include "tempokit/eval_metrics.hpp"
#include "tempokit/event_segmentation.hpp"
#include "tempokit/event_sequence.hpp"
#include "tempokit/grounding_trainer.hpp"
#include "tempokit/instance_tracking.hpp"
#include "tempokit/instruction_engine.hpp"
#include "tempokit/math.hpp"
#include "tempokit/temporal_space.hpp"

namespace tempokit {

// Insertion-ordered JSON keeps emitted field order stable for diff-based
// golden tests.
using OrderedJson = nlohmann::ordered_json;

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path.string());
  return std::move(ss).str();
}

inline void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

inline OrderedJson parse_json(std::string_view text, const std::string& what) {
  const auto parsed = OrderedJson::parse(text, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded()) throw ParseError("invalid JSON in " + what, 1);
  return parsed;
}

// ---- anchor space container -------------------------------------------------
// JSON header line, then n_anchors * dim little-endian 32-bit floats.
// In-memory math stays in doubles; the file payload is the f32 snapshot.

inline void save_space(const TemporalTokenSpace& space, const std::filesystem::path& path) {
  space.validate();
  OrderedJson header = {
      {"n_anchors", space.n_anchors},
      {"dim", space.dim},
      {"rng_seed", space.rng_seed},
      {"layout", "row-major-f32-le"},
  };
  std::string out = header.dump();
  out += '\n';
  out.reserve(out.size() + space.anchors.data.size() * 4);
  for (double v : space.anchors.data) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    out += static_cast<char>(bits & 0xFF);
    out += static_cast<char>((bits >> 8) & 0xFF);
    out += static_cast<char>((bits >> 16) & 0xFF);
    out += static_cast<char>((bits >> 24) & 0xFF);
  }
  write_file(path, out);
}

inline TemporalTokenSpace load_space(const std::filesystem::path& path) {
  const std::string raw = read_file(path);
  const std::size_t eol = raw.find('\n');
  if (eol == std::string::npos) throw ParseError("space file has no header line", 1);
  const OrderedJson header = parse_json(raw.substr(0, eol), path.string());
  TemporalTokenSpace space;
  try {
    space.n_anchors = header.at("n_anchors").get<std::size_t>();
    space.dim = header.at("dim").get<std::size_t>();
    space.rng_seed = header.at("rng_seed").get<std::uint64_t>();
    if (header.at("layout").get<std::string>() != "row-major-f32-le") {
      throw ValidationError("unsupported layout in " + path.string());
    }
  } catch (const OrderedJson::exception& e) {
    throw ParseError(std::string("bad space header: ") + e.what(), 1);
  }
  const std::size_t expected = space.n_anchors * space.dim * 4;
  if (raw.size() - eol - 1 != expected) {
    throw ValidationError("space payload has " + std::to_string(raw.size() - eol - 1) +
                          " bytes, expected " + std::to_string(expected));
  }
  space.anchors = Matrix(space.n_anchors, space.dim);
  const char* p = raw.data() + eol + 1;
  for (double& v : space.anchors.data) {
    std::uint32_t bits = 0;
    bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[0]));
    bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[1])) << 8;
    bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[2])) << 16;
    bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[3])) << 24;
    v = static_cast<double>(std::bit_cast<float>(bits));
    p += 4;
  }
  space.validate();
  return space;
}

// ---- shared JSON helpers ----------------------------------------------------

namespace detail {

inline OrderedJson box_to_json(const Box& b) { return OrderedJson::array({b.x1, b.y1, b.x2, b.y2}); }

inline Box box_from_json(const OrderedJson& j) {
  if (!j.is_array() || j.size() != 4) throw ValidationError("box must be [x1, y1, x2, y2]");
  Box b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  b.validate();
  return b;
}

inline std::vector<double> doubles_from_json(const OrderedJson& j, const char* what) {
  if (!j.is_array()) throw ValidationError(std::string(what) + " must be an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) out.push_back(v.get<double>());
  return out;
}

// Per-line JSONL iteration with 1-based line numbers in errors.
template <typename Fn>
void for_each_jsonl_line(std::string_view text, Fn&& fn) {
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    const std::string_view line = text.substr(pos, eol - pos);
    ++line_no;
    pos = eol + 1;
    if (line.empty()) continue;
    const auto parsed = OrderedJson::parse(line, nullptr, /*allow_exceptions=*/false);
    if (parsed.is_discarded()) throw ParseError("invalid JSON object", line_no);
    fn(parsed, line_no);
  }
}

}  // namespace detail

// ---- frames -----------------------------------------------------------------
// One FrameRecord per line. Luma grids live in a sidecar raw file (8-bit,
// row-major) referenced by path relative to the frames file, shape and byte
// offset.

inline OrderedJson detection_to_json(const Detection& d) {
  OrderedJson j;
  if (d.track_id != kNoTrack) j["track_id"] = d.track_id;
  j["class_label"] = d.class_label;
  j["box"] = detail::box_to_json(d.box);
  j["roi_feature"] = d.roi_feature;
  return j;
}

inline Detection detection_from_json(const OrderedJson& j) {
  Detection d;
  if (j.contains("track_id")) d.track_id = j["track_id"].get<std::int64_t>();
  d.class_label = j.at("class_label").get<std::string>();
  d.box = detail::box_from_json(j.at("box"));
  d.roi_feature = detail::doubles_from_json(j.at("roi_feature"), "roi_feature");
  return d;
}

inline std::vector<FrameRecord> load_frames(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const std::filesystem::path base = path.parent_path();
  std::vector<FrameRecord> frames;
  std::map<std::string, std::string> sidecars;  // path -> raw bytes
  detail::for_each_jsonl_line(text, [&](const OrderedJson& j, std::size_t line_no) {
    try {
      FrameRecord f;
      f.index = j.at("index").get<std::int64_t>();
      f.time = NormalizedTime::checked(j.at("time").get<double>());
      f.feature = detail::doubles_from_json(j.at("feature"), "feature");
      if (j.contains("luma")) {
        const auto& lj = j["luma"];
        const std::string rel = lj.at("path").get<std::string>();
        const auto& shape = lj.at("shape");
        if (!shape.is_array() || shape.size() != 2) {
          throw ValidationError("luma shape must be [height, width]");
        }
        LumaGrid grid;
        grid.height = shape[0].get<std::size_t>();
        grid.width = shape[1].get<std::size_t>();
        const std::size_t offset = lj.value("offset", std::size_t{0});
        auto it = sidecars.find(rel);
        if (it == sidecars.end()) {
          it = sidecars.emplace(rel, read_file(base / rel)).first;
        }
        const std::string& raw = it->second;
        const std::size_t count = grid.height * grid.width;
        if (offset + count > raw.size()) {
          throw ValidationError("luma sidecar " + rel + " too small for offset " +
                                std::to_string(offset));
        }
        grid.values.assign(raw.begin() + static_cast<std::ptrdiff_t>(offset),
                           raw.begin() + static_cast<std::ptrdiff_t>(offset + count));
        f.luma = std::move(grid);
      }
      if (j.contains("detections")) {
        for (const auto& dj : j["detections"]) f.detections.push_back(detection_from_json(dj));
      }
      frames.push_back(std::move(f));
    } catch (const OrderedJson::exception& e) {
      throw ParseError(std::string("bad frame record: ") + e.what(), line_no);
    }
  });
  return frames;
}

// ---- events -----------------------------------------------------------------

inline OrderedJson event_to_json(const Event& e) {
  return OrderedJson{{"start_time", e.start_time.tau},
                     {"end_time", e.end_time.tau},
                     {"start_frame", e.start_frame},
                     {"end_frame", e.end_frame}};
}

inline Event event_from_json(const OrderedJson& j) {
  Event e;
  e.start_time = NormalizedTime::checked(j.at("start_time").get<double>());
  e.end_time = NormalizedTime::checked(j.at("end_time").get<double>());
  e.start_frame = j.at("start_frame").get<std::int64_t>();
  e.end_frame = j.at("end_frame").get<std::int64_t>();
  if (j.contains("caption")) e.caption = j["caption"].get<std::string>();
  return e;
}

inline std::string events_to_jsonl(std::span<const Event> events) {
  std::string out;
  for (const Event& e : events) {
    out += event_to_json(e).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<Event> events_from_jsonl(std::string_view text) {
  std::vector<Event> events;
  detail::for_each_jsonl_line(text, [&](const OrderedJson& j, std::size_t line_no) {
    try {
      events.push_back(event_from_json(j));
    } catch (const OrderedJson::exception& e) {
      throw ParseError(std::string("bad event record: ") + e.what(), line_no);
    }
  });
  return events;
}

// ---- detections / tracks ------------------------------------------------------

inline std::vector<FrameDetections> detections_from_jsonl(std::string_view text) {
  std::vector<FrameDetections> out;
  detail::for_each_jsonl_line(text, [&](const OrderedJson& j, std::size_t line_no) {
    try {
      const auto frame = j.at("frame_index").get<std::int64_t>();
      Detection d = detection_from_json(j);
      if (out.empty() || out.back().frame_index != frame) {
        out.push_back({frame, {}});
      }
      out.back().detections.push_back(std::move(d));
    } catch (const OrderedJson::exception& e) {
      throw ParseError(std::string("bad detection record: ") + e.what(), line_no);
    }
  });
  return out;
}

inline OrderedJson track_to_json(const InstanceTrack& t) {
  OrderedJson obs = OrderedJson::array();
  for (const Observation& o : t.observations) {
    obs.push_back(OrderedJson{{"frame_index", o.frame_index},
                              {"box", detail::box_to_json(o.box)},
                              {"roi_feature", o.roi_feature}});
  }
  return OrderedJson{{"track_id", t.track_id},
                     {"class_label", t.class_label},
                     {"observations", std::move(obs)}};
}

inline InstanceTrack track_from_json(const OrderedJson& j) {
  InstanceTrack t;
  t.track_id = j.at("track_id").get<std::int64_t>();
  t.class_label = j.at("class_label").get<std::string>();
  for (const auto& oj : j.at("observations")) {
    Observation o;
    o.frame_index = oj.at("frame_index").get<std::int64_t>();
    o.box = detail::box_from_json(oj.at("box"));
    o.roi_feature = detail::doubles_from_json(oj.at("roi_feature"), "roi_feature");
    t.observations.push_back(std::move(o));
  }
  if (t.observations.empty()) throw ValidationError("track without observations");
  return t;
}

inline std::string tracks_to_jsonl(std::span<const InstanceTrack> tracks) {
  std::string out;
  for (const InstanceTrack& t : tracks) {
    out += track_to_json(t).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<InstanceTrack> tracks_from_jsonl(std::string_view text) {
  std::vector<InstanceTrack> tracks;
  detail::for_each_jsonl_line(text, [&](const OrderedJson& j, std::size_t line_no) {
    try {
      tracks.push_back(track_from_json(j));
    } catch (const OrderedJson::exception& e) {
      throw ParseError(std::string("bad track record: ") + e.what(), line_no);
    }
  });
  return tracks;
}

// ---- clue records -------------------------------------------------------------
// {"track": -1 | id | "VIDEO", "event": j, "kind": "...", "text": "..."}

inline std::vector<ClueRecord> clues_from_jsonl(std::string_view text) {
  std::vector<ClueRecord> out;
  detail::for_each_jsonl_line(text, [&](const OrderedJson& j, std::size_t line_no) {
    try {
      ClueRecord r;
      const auto& track = j.at("track");
      if (track.is_string()) {
        if (track.get<std::string>() != "VIDEO") {
          throw ValidationError("track must be an id or \"VIDEO\"");
        }
        r.track_id = kVideoRowId;
      } else {
        r.track_id = track.get<std::int64_t>();
      }
      r.event_index = j.at("event").get<std::size_t>();
      r.kind = j.at("kind").get<std::string>();
      r.text = j.at("text").get<std::string>();
      out.push_back(std::move(r));
    } catch (const OrderedJson::exception& e) {
      throw ParseError(std::string("bad clue record: ") + e.what(), line_no);
    }
  });
  return out;
}

// ---- instance-event matrix -----------------------------------------------------

inline OrderedJson matrix_to_json(const InstanceEventMatrix& m) {
  OrderedJson tracks = OrderedJson::array();
  for (const auto& t : m.tracks) tracks.push_back(track_to_json(t));
  OrderedJson events = OrderedJson::array();
  for (const auto& e : m.events) events.push_back(event_to_json(e));
  OrderedJson cells = OrderedJson::array();
  for (std::size_t row = 0; row < m.row_count(); ++row) {
    for (std::size_t col = 0; col < m.events.size(); ++col) {
      const MatrixCell& c = m.cell(row, col);
      OrderedJson cj{{"track", m.row_id(row)}, {"event", col}, {"present", c.present}};
      OrderedJson clues = OrderedJson::array();
      for (const Clue& clue : c.clues) {
        clues.push_back(OrderedJson{{"kind", clue.kind}, {"text", clue.text}});
      }
      cj["clues"] = std::move(clues);
      if (c.caption) cj["caption"] = *c.caption;
      cells.push_back(std::move(cj));
    }
  }
  return OrderedJson{
      {"tracks", std::move(tracks)}, {"events", std::move(events)}, {"cells", std::move(cells)}};
}

inline InstanceEventMatrix matrix_from_json(const OrderedJson& j) {
  std::vector<InstanceTrack> tracks;
  for (const auto& tj : j.at("tracks")) tracks.push_back(track_from_json(tj));
  std::vector<Event> events;
  for (const auto& ej : j.at("events")) events.push_back(event_from_json(ej));
  InstanceEventMatrix m = build_matrix(std::move(tracks), std::move(events));
  for (const auto& cj : j.at("cells")) {
    const auto row = m.row_of(cj.at("track").get<std::int64_t>());
    const auto col = cj.at("event").get<std::size_t>();
    if (col >= m.events.size()) throw ValidationError("cell event index out of range");
    MatrixCell& cell = m.cell(row, col);
    if (cj.at("present").get<bool>() != cell.present) {
      throw ValidationError("cell presence disagrees with tracks and events");
    }
    for (const auto& clue : cj.at("clues")) {
      cell.clues.push_back({clue.at("kind").get<std::string>(), clue.at("text").get<std::string>()});
    }
    if (cj.contains("caption")) cell.caption = cj["caption"].get<std::string>();
  }
  return m;
}

// ---- instruction records ---------------------------------------------------------

inline OrderedJson instruction_record_to_json(const InstructionRecord& r) {
  OrderedJson conversation = OrderedJson::array();
  for (const auto& turn : r.conversation) {
    conversation.push_back(
        OrderedJson{{"role", turn.role == ConversationTurn::Role::User ? "User" : "Assistant"},
                    {"text", turn.text}});
  }
  OrderedJson grounding = OrderedJson::array();
  for (const auto& g : r.grounding) {
    grounding.push_back(OrderedJson{{"start", g.start}, {"end", g.end}});
  }
  OrderedJson cells = OrderedJson::array();
  for (const auto& c : r.source_cells) {
    cells.push_back(OrderedJson{{"track", c.track_id}, {"event", c.event_index}});
  }
  return OrderedJson{{"video_id", r.video_id},
                     {"task", std::string(to_string(r.task))},
                     {"conversation", std::move(conversation)},
                     {"grounding", std::move(grounding)},
                     {"source_cells", std::move(cells)}};
}

inline std::string instruction_records_to_jsonl(std::span<const InstructionRecord> records) {
  std::string out;
  for (const auto& r : records) {
    out += instruction_record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

// ---- metric inputs -----------------------------------------------------------------

struct QueryInterval {
  std::string query_id;
  Interval interval;
  double score = 0.0;
  bool has_score = false;
};

inline std::vector<QueryInterval> query_intervals_from_jsonl(std::string_view text) {
  std::vector<QueryInterval> out;
  detail::for_each_jsonl_line(text, [&](const OrderedJson& j, std::size_t line_no) {
    try {
      QueryInterval q;
      q.query_id = j.at("query_id").is_string() ? j["query_id"].get<std::string>()
                                                : j["query_id"].dump();
      q.interval = {j.at("start").get<double>(), j.at("end").get<double>()};
      q.interval.validate();
      if (j.contains("score")) {
        q.score = j["score"].get<double>();
        q.has_score = true;
      }
      out.push_back(std::move(q));
    } catch (const OrderedJson::exception& e) {
      throw ParseError(std::string("bad query record: ") + e.what(), line_no);
    }
  });
  return out;
}

inline std::vector<LabeledInterval> labeled_intervals_from_jsonl(std::string_view text) {
  std::vector<LabeledInterval> out;
  detail::for_each_jsonl_line(text, [&](const OrderedJson& j, std::size_t line_no) {
    try {
      LabeledInterval s;
      s.label = j.at("label").get<std::string>();
      s.interval = {j.at("start").get<double>(), j.at("end").get<double>()};
      s.interval.validate();
      out.push_back(std::move(s));
    } catch (const OrderedJson::exception& e) {
      throw ParseError(std::string("bad segment record: ") + e.what(), line_no);
    }
  });
  return out;
}

// ---- reports -------------------------------------------------------------------------

inline OrderedJson grounding_report_to_json(const GroundingReport& r) {
  OrderedJson recalls;
  for (const auto& [t, v] : r.recall_at) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "R@%.2f", t);
    recalls[buf] = v;
  }
  return OrderedJson{{"recall", std::move(recalls)}, {"mean_iou", r.mean_iou}};
}

inline OrderedJson action_seg_report_to_json(const ActionSegReport& r) {
  OrderedJson f1s;
  for (const auto& [k, v] : r.f1_at) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "F1@%.2f", k);
    f1s[buf] = v;
  }
  return OrderedJson{{"mof", r.mof}, {"f1", std::move(f1s)}};
}

inline OrderedJson highlight_report_to_json(const HighlightReport& r) {
  return OrderedJson{
      {"map", r.map}, {"r1_at_0.5", r.r1_at_05}, {"skipped_queries", r.skipped_queries}};
}

inline OrderedJson continuity_report_to_json(const ContinuityReport& r) {
  return OrderedJson{{"adjacent_mean_cos", r.adjacent_mean_cos},
                     {"random_mean_cos", r.random_mean_cos},
                     {"pca1_spearman", r.pca1_spearman},
                     {"unsupervised_displacement", r.unsupervised_displacement}};
}

inline std::string pca_scores_to_csv(std::span<const double> scores) {
  std::string out = "index,pca1\n";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), scores[i]);
    out += std::to_string(i);
    out += ',';
    out.append(buf, res.ptr);
    out += '\n';
  }
  return out;
}

// ---- provenance -------------------------------------------------------------------------

inline constexpr std::string_view kToolVersion = "0.1.0";

// Every CLI output file X is accompanied by X.prov.json recording the tool
// version, effective config (and its hash), input content hashes and seed,
// so outputs are reproducible byte for byte.
struct Provenance {
  OrderedJson config;
  std::map<std::string, std::string> input_hashes;  // basename -> fnv1a64:<hex>
  std::uint64_t seed = 0;
};

inline OrderedJson provenance_to_json(const Provenance& p) {
  OrderedJson inputs;
  for (const auto& [name, hash] : p.input_hashes) inputs[name] = hash;
  return OrderedJson{{"tool_version", std::string(kToolVersion)},
                     {"config_hash", "fnv1a64:" + fnv1a64_hex(p.config.dump())},
                     {"config", p.config},
                     {"inputs", std::move(inputs)},
                     {"seed", p.seed}};
}

inline void write_provenance(const std::filesystem::path& output_path, const Provenance& p) {
  std::filesystem::path prov = output_path;
  prov += ".prov.json";
  write_file(prov, provenance_to_json(p).dump(2) + "\n");
}

inline std::string hash_of_file(const std::filesystem::path& path) {
  return "fnv1a64:" + fnv1a64_hex(read_file(path));
}

}  // namespace tempokit
