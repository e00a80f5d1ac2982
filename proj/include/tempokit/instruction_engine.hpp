#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include "tempokit/errors.hpp"
#include "tempokit/eval_metrics.hpp"
#include "tempokit/event_sequence.hpp"
#include "tempokit/instance_tracking.hpp"
#include "tempokit/math.hpp"
#include "tempokit/prompt_templates.hpp"
#include "tempokit/rng.hpp"

namespace tempokit {

// Completion interface for the external text LLM. Implementations: a remote
// HTTP client (remote_llm_client.hpp) and the deterministic mock below.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const std::string& prompt) = 0;
};

// Canned replies keyed by a stable hash of the prompt. Unregistered prompts
// get a deterministic fallback that embeds the prompt hash, shaped as a
// dialogue so every task can digest it; Echo mode returns the prompt itself.
class MockLlmClient final : public LlmClient {
 public:
  enum class Fallback { HashReply, Echo };

  explicit MockLlmClient(Fallback fallback = Fallback::HashReply) : fallback_(fallback) {}

  void add_reply(std::string_view prompt, std::string reply) {
    canned_[fnv1a64(prompt)] = std::move(reply);
  }

  std::string complete(const std::string& prompt) override {
    if (prompt.empty()) throw ValidationError("cannot complete an empty prompt");
    const auto it = canned_.find(fnv1a64(prompt));
    if (it != canned_.end()) return it->second;
    if (fallback_ == Fallback::Echo) return prompt;
    const std::string hex = fnv1a64_hex(prompt);
    return "User: mock question " + hex + "\nAssistant: mock answer " + hex;
  }

 private:
  Fallback fallback_;
  std::unordered_map<std::uint64_t, std::string> canned_;
};

struct ConversationTurn {
  enum class Role { User, Assistant };
  Role role;
  std::string text;

  friend bool operator==(const ConversationTurn&, const ConversationTurn&) = default;
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace detail

// Line-prefix reply parsing: lines starting with "User:" or "Assistant:"
// open a new turn, other lines continue the current one, everything is
// whitespace-trimmed. A reply with neither prefix becomes a single
// Assistant turn.
inline std::vector<ConversationTurn> parse_reply(const std::string& reply) {
  std::vector<ConversationTurn> turns;
  std::size_t pos = 0;
  bool saw_prefix = false;
  while (pos <= reply.size()) {
    const std::size_t eol = std::min(reply.find('\n', pos), reply.size());
    const std::string_view line(reply.data() + pos, eol - pos);
    if (line.starts_with("User:")) {
      turns.push_back({ConversationTurn::Role::User, detail::trim(line.substr(5))});
      saw_prefix = true;
    } else if (line.starts_with("Assistant:")) {
      turns.push_back({ConversationTurn::Role::Assistant, detail::trim(line.substr(10))});
      saw_prefix = true;
    } else if (saw_prefix && !turns.empty()) {
      const std::string continuation = detail::trim(line);
      if (!continuation.empty()) {
        if (!turns.back().text.empty()) turns.back().text += "\n";
        turns.back().text += continuation;
      }
    }
    if (eol == reply.size()) break;
    pos = eol + 1;
  }
  if (!saw_prefix) {
    const std::string whole = detail::trim(reply);
    turns.clear();
    if (!whole.empty()) turns.push_back({ConversationTurn::Role::Assistant, whole});
  }
  return turns;
}

// Reference to a matrix cell: the track row (kVideoRowId for the video row)
// and the event column.
struct SourceCellRef {
  std::int64_t track_id = kVideoRowId;
  std::size_t event_index = 0;

  friend bool operator==(const SourceCellRef&, const SourceCellRef&) = default;
};

struct InstructionRecord {
  std::string video_id;
  TaskKind task;
  std::vector<ConversationTurn> conversation;  // alternates, starts with User
  std::vector<Interval> grounding;             // seconds, event spans from the matrix
  std::vector<SourceCellRef> source_cells;
};

inline void validate_record(const InstructionRecord& r, double duration_seconds) {
  if (r.conversation.empty()) throw ValidationError("record has an empty conversation");
  for (std::size_t i = 0; i < r.conversation.size(); ++i) {
    const auto expected =
        i % 2 == 0 ? ConversationTurn::Role::User : ConversationTurn::Role::Assistant;
    if (r.conversation[i].role != expected) {
      throw ValidationError("conversation roles must alternate starting with User");
    }
  }
  for (const Interval& g : r.grounding) {
    g.validate();
    if (g.start < 0.0 || g.end > duration_seconds + 1e-9) {
      throw ValidationError("grounding interval escapes the video");
    }
  }
}

using GenerationPlan = std::map<TaskKind, std::size_t>;

struct GenerationIssue {
  TaskKind task;
  std::size_t instance_index = 0;  // which requested instance of this task
  std::string message;
  std::string raw_reply;
};

struct GenerationResult {
  std::vector<InstructionRecord> records;
  std::vector<GenerationIssue> issues;
};

struct GenOptions {
  std::string video_id = "video";
  double duration_seconds = 0.0;  // required
  std::size_t max_in_flight = 4;  // concurrent client calls
};

namespace detail {

inline std::string seconds_span(const Event& e, double duration) {
  return format_fixed(e.start_time.seconds(duration), 2) + "s-" +
         format_fixed(e.end_time.seconds(duration), 2) + "s";
}

inline Interval event_interval(const Event& e, double duration) {
  return {e.start_time.seconds(duration), e.end_time.seconds(duration)};
}

// Last assistant text of the parsed reply; the whole reply when it carries
// no role prefixes.
inline std::string assistant_gist(const std::string& reply) {
  const auto turns = parse_reply(reply);
  for (auto it = turns.rbegin(); it != turns.rend(); ++it) {
    if (it->role == ConversationTurn::Role::Assistant) return it->text;
  }
  return {};
}

inline bool valid_dialogue(const std::vector<ConversationTurn>& turns) {
  if (turns.size() < 2) return false;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    const auto expected =
        i % 2 == 0 ? ConversationTurn::Role::User : ConversationTurn::Role::Assistant;
    if (turns[i].role != expected || turns[i].text.empty()) return false;
  }
  return true;
}

inline std::string strip_enumeration(std::string_view line) {
  std::string t = trim(line);
  std::size_t i = 0;
  while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) ++i;
  if (i > 0 && i < t.size() && (t[i] == '.' || t[i] == ')')) {
    return trim(std::string_view(t).substr(i + 1));
  }
  return t;
}

inline std::string replace_all(std::string text, std::string_view needle,
                               std::string_view replacement) {
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    text.replace(pos, needle.size(), replacement);
    pos += replacement.size();
  }
  return text;
}

// One planned task instance, prepared before any client call.
struct PendingInstance {
  TaskKind task;
  std::size_t instance_index = 0;
  std::string prompt;
  std::vector<SourceCellRef> cells;
  std::vector<std::size_t> event_cols;  // referenced columns, ascending where relevant
  std::string error;                    // non-empty: selection already failed
};

}  // namespace detail

// Draws source cells from the matrix, fills the task template, runs the
// client, and assembles conversations with grounding copied from the matrix
// event spans. Deterministic for a given (matrix, plan, seed, client).
// Client failures and unparseable replies become issues; generation
// continues.
inline GenerationResult generate_instructions(const InstanceEventMatrix& matrix,
                                              LlmClient& client, const GenerationPlan& plan,
                                              std::uint64_t rng_seed,
                                              const GenOptions& options = {}) {
  if (!(options.duration_seconds > 0.0)) {
    throw ValidationError("generation needs a positive video duration");
  }
  const double duration = options.duration_seconds;
  Rng rng(rng_seed);

  // Deterministic eligibility pools.
  std::vector<std::size_t> captioned_video_cols;
  std::vector<std::size_t> clued_video_cols;
  for (std::size_t j = 0; j < matrix.events.size(); ++j) {
    if (matrix.cell(0, j).caption) captioned_video_cols.push_back(j);
    if (!matrix.cell(0, j).clues.empty()) clued_video_cols.push_back(j);
  }
  std::vector<std::pair<std::size_t, std::size_t>> captioned_track_cells;  // (row, col)
  for (std::size_t t = 0; t < matrix.tracks.size(); ++t) {
    for (std::size_t j = 0; j < matrix.events.size(); ++j) {
      const auto& c = matrix.cell(t + 1, j);
      if (c.present && c.caption) captioned_track_cells.emplace_back(t + 1, j);
    }
  }
  std::vector<std::size_t> multi_caption_tracks;  // rows with >= 2 captioned cells
  for (std::size_t t = 0; t < matrix.tracks.size(); ++t) {
    std::size_t captioned = 0;
    for (std::size_t j = 0; j < matrix.events.size(); ++j) {
      const auto& c = matrix.cell(t + 1, j);
      if (c.present && c.caption) ++captioned;
    }
    if (captioned >= 2) multi_caption_tracks.push_back(t + 1);
  }

  auto track_caption_lines = [&](std::size_t row, std::vector<std::size_t>* cols) {
    std::string lines;
    for (std::size_t j = 0; j < matrix.events.size(); ++j) {
      const auto& c = matrix.cell(row, j);
      if (!(c.present && c.caption)) continue;
      if (!lines.empty()) lines += "\n";
      lines += detail::seconds_span(matrix.events[j], duration) + " : " + *c.caption;
      if (cols) cols->push_back(j);
    }
    return lines;
  };

  // Stage 1: select cells and build prompts, consuming the rng in plan order.
  std::vector<detail::PendingInstance> pending;
  for (const auto& [task, count] : plan) {
    for (std::size_t n = 0; n < count; ++n) {
      detail::PendingInstance p;
      p.task = task;
      p.instance_index = n;
      std::map<std::string, std::string> bind;
      switch (task) {
        case TaskKind::SegmentCaptioning: {
          if (clued_video_cols.empty()) {
            p.error = "no video cells with clues";
            break;
          }
          const std::size_t j = clued_video_cols[rng.uniform_index(clued_video_cols.size())];
          std::string descriptions;
          for (const Clue& c : matrix.cell(0, j).clues) {
            if (!descriptions.empty()) descriptions += "\n";
            descriptions += c.text;
          }
          bind["descriptions"] = descriptions;
          p.cells = {{kVideoRowId, j}};
          p.event_cols = {j};
          break;
        }
        case TaskKind::SegmentQA:
        case TaskKind::DirectLocalization:
        case TaskKind::InferentialLocalization: {
          if (captioned_video_cols.empty()) {
            p.error = "no video cells with captions";
            break;
          }
          const std::size_t j =
              captioned_video_cols[rng.uniform_index(captioned_video_cols.size())];
          const std::string& caption = *matrix.cell(0, j).caption;
          bind[task == TaskKind::SegmentQA ? "segment_caption" : "content"] = caption;
          p.cells = {{kVideoRowId, j}};
          p.event_cols = {j};
          break;
        }
        case TaskKind::InstanceQA: {
          if (captioned_track_cells.empty()) {
            p.error = "no present track cells with captions";
            break;
          }
          const auto [row, j] =
              captioned_track_cells[rng.uniform_index(captioned_track_cells.size())];
          bind["instance_class"] = matrix.tracks[row - 1].class_label;
          bind["segment_caption"] = *matrix.cell(row, j).caption;
          p.cells = {{matrix.row_id(row), j}};
          p.event_cols = {j};
          break;
        }
        case TaskKind::ComposedRetrieval: {
          if (captioned_video_cols.size() < 2) {
            p.error = "need two captioned video cells";
            break;
          }
          const std::size_t a = rng.uniform_index(captioned_video_cols.size());
          std::size_t b = rng.uniform_index(captioned_video_cols.size() - 1);
          if (b >= a) ++b;
          const std::size_t src = captioned_video_cols[a];
          const std::size_t tgt = captioned_video_cols[b];
          bind["source_clip_content"] = *matrix.cell(0, src).caption;
          bind["target_clip_content"] = *matrix.cell(0, tgt).caption;
          p.cells = {{kVideoRowId, src}, {kVideoRowId, tgt}};
          p.event_cols = {src, tgt};
          break;
        }
        case TaskKind::InstanceActivitySummarizing:
        case TaskKind::CrossSegmentQA: {
          if (multi_caption_tracks.empty()) {
            p.error = "no track with two or more captioned cells";
            break;
          }
          const std::size_t row =
              multi_caption_tracks[rng.uniform_index(multi_caption_tracks.size())];
          const std::string lines = track_caption_lines(row, &p.event_cols);
          bind["instance_class"] = matrix.tracks[row - 1].class_label;
          bind[task == TaskKind::CrossSegmentQA ? "segment_caption" : "descriptions"] = lines;
          for (std::size_t j : p.event_cols) p.cells.push_back({matrix.row_id(row), j});
          break;
        }
      }
      if (p.error.empty()) p.prompt = fill_prompt(template_for(task), bind);
      pending.push_back(std::move(p));
    }
  }

  // Stage 2: client calls, optionally concurrent, results kept in plan order.
  std::vector<std::string> replies(pending.size());
  std::vector<std::string> call_errors(pending.size());
  const std::size_t workers = std::max<std::size_t>(1, options.max_in_flight);
  for (std::size_t base = 0; base < pending.size(); base += workers) {
    const std::size_t batch = std::min(workers, pending.size() - base);
    std::vector<std::future<void>> futures;
    for (std::size_t w = 0; w < batch; ++w) {
      const std::size_t idx = base + w;
      if (!pending[idx].error.empty()) continue;
      futures.push_back(std::async(std::launch::async, [&, idx] {
        try {
          replies[idx] = client.complete(pending[idx].prompt);
        } catch (const std::exception& e) {
          call_errors[idx] = e.what();
        }
      }));
    }
    for (auto& f : futures) f.get();
  }

  // Stage 3: assemble records.
  GenerationResult result;
  for (std::size_t idx = 0; idx < pending.size(); ++idx) {
    const auto& p = pending[idx];
    auto fail = [&](const std::string& msg, const std::string& raw) {
      result.issues.push_back({p.task, p.instance_index, msg, raw});
    };
    if (!p.error.empty()) {
      fail(p.error, "");
      continue;
    }
    if (!call_errors[idx].empty()) {
      fail("client error: " + call_errors[idx], "");
      continue;
    }
    const std::string& reply = replies[idx];

    InstructionRecord rec;
    rec.video_id = options.video_id;
    rec.task = p.task;
    rec.source_cells = p.cells;
    for (std::size_t j : p.event_cols) {
      rec.grounding.push_back(detail::event_interval(matrix.events[j], duration));
    }
    const std::string span0 =
        p.event_cols.empty() ? std::string{}
                             : detail::seconds_span(matrix.events[p.event_cols.front()], duration);

    switch (p.task) {
      case TaskKind::SegmentCaptioning:
      case TaskKind::InstanceActivitySummarizing: {
        const std::string gist = detail::assistant_gist(reply);
        if (gist.empty()) {
          fail("reply carries no usable text", reply);
          continue;
        }
        std::string request;
        if (p.task == TaskKind::SegmentCaptioning) {
          request = "Please describe the segment " + span0 + " of the video.";
        } else {
          const std::string cls = matrix.tracks[matrix.row_of(p.cells.front().track_id) - 1]
                                      .class_label;
          request = "Summarize the activities of the " + cls + " throughout the video.";
        }
        rec.conversation = {{ConversationTurn::Role::User, request},
                            {ConversationTurn::Role::Assistant, gist}};
        break;
      }
      case TaskKind::SegmentQA:
      case TaskKind::InstanceQA:
      case TaskKind::CrossSegmentQA: {
        auto turns = parse_reply(reply);
        if (!detail::valid_dialogue(turns)) {
          fail("reply is not a User/Assistant dialogue", reply);
          continue;
        }
        rec.conversation = std::move(turns);
        break;
      }
      case TaskKind::DirectLocalization: {
        const std::string gist = detail::assistant_gist(reply);
        if (gist.empty()) {
          fail("reply carries no usable text", reply);
          continue;
        }
        rec.conversation = {
            {ConversationTurn::Role::User, "Find the segment of the video that shows: " + gist},
            {ConversationTurn::Role::Assistant, "The matching segment is " + span0 + "."}};
        break;
      }
      case TaskKind::InferentialLocalization: {
        const std::string gist = detail::assistant_gist(reply);
        std::string question;
        std::size_t pos = 0;
        while (pos <= gist.size() && question.empty()) {
          const std::size_t eol = std::min(gist.find('\n', pos), gist.size());
          question = detail::strip_enumeration(std::string_view(gist).substr(pos, eol - pos));
          if (eol == gist.size()) break;
          pos = eol + 1;
        }
        if (question.empty()) {
          fail("reply contains no question", reply);
          continue;
        }
        rec.conversation = {
            {ConversationTurn::Role::User, question},
            {ConversationTurn::Role::Assistant, "The matching segment is " + span0 + "."}};
        break;
      }
      case TaskKind::ComposedRetrieval: {
        std::string gist = detail::assistant_gist(reply);
        if (gist.empty()) {
          fail("reply carries no usable text", reply);
          continue;
        }
        gist = detail::replace_all(std::move(gist), "{{SOURCE_CLIP}}", "clip " + span0);
        const std::string tgt_span =
            detail::seconds_span(matrix.events[p.event_cols.back()], duration);
        rec.conversation = {
            {ConversationTurn::Role::User, gist},
            {ConversationTurn::Role::Assistant, "The matching segment is " + tgt_span + "."}};
        break;
      }
    }

    validate_record(rec, duration);
    result.records.push_back(std::move(rec));
  }
  return result;
}

// Machine-readable shape of an emitted instruction record. Role alternation
// beyond "first role is User" is enforced by validate_record, which the
// generator always runs.
inline std::string_view instruction_record_schema_json() {
  return R"JSON({
  "$schema": "http://json-schema.org/draft-07/schema#",
  "title": "InstructionRecord",
  "type": "object",
  "required": ["video_id", "task", "conversation", "grounding", "source_cells"],
  "additionalProperties": false,
  "properties": {
    "video_id": {"type": "string"},
    "task": {"enum": ["segment_captioning", "segment_qa", "instance_qa",
                       "direct_localization", "inferential_localization",
                       "composed_retrieval", "instance_activity_summarizing",
                       "cross_segment_qa"]},
    "conversation": {
      "type": "array",
      "minItems": 1,
      "items": {
        "type": "object",
        "required": ["role", "text"],
        "additionalProperties": false,
        "properties": {
          "role": {"enum": ["User", "Assistant"]},
          "text": {"type": "string"}
        }
      }
    },
    "grounding": {
      "type": "array",
      "items": {
        "type": "object",
        "required": ["start", "end"],
        "additionalProperties": false,
        "properties": {
          "start": {"type": "number", "minimum": 0},
          "end": {"type": "number", "minimum": 0}
        }
      }
    },
    "source_cells": {
      "type": "array",
      "items": {
        "type": "object",
        "required": ["track", "event"],
        "additionalProperties": false,
        "properties": {
          "track": {"type": "integer"},
          "event": {"type": "integer", "minimum": 0}
        }
      }
    }
  }
})JSON";
}

}  // namespace tempokit
