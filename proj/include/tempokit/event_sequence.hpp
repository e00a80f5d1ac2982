#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tempokit/errors.hpp"
#include "tempokit/math.hpp"
#include "tempokit/temporal_space.hpp"

namespace tempokit {

struct GroundedEvent {
  NormalizedTime start;
  NormalizedTime end;
  std::string caption;
};

// Ordered list of captioned events over one video's normalized timeline.
struct EventSequence {
  std::vector<GroundedEvent> events;

  void validate() const {
    for (std::size_t i = 0; i < events.size(); ++i) {
      const auto& e = events[i];
      if (!(e.start.tau >= 0.0 && e.start.tau <= 1.0 && e.end.tau >= 0.0 && e.end.tau <= 1.0)) {
        throw RangeError("event " + std::to_string(i) + ": times must lie in [0, 1]");
      }
      if (e.end.tau < e.start.tau) {
        throw ValidationError("event " + std::to_string(i) + ": end before start");
      }
      if (e.caption.empty()) {
        throw ValidationError("event " + std::to_string(i) + ": empty caption");
      }
      if (i > 0 && e.start.tau < events[i - 1].start.tau) {
        throw ValidationError("events must be ordered by start time");
      }
    }
  }
};

// Textual surface form for timestamps: either normalized-time markers at six
// decimals, or the seconds style "15.50s-30.75s : caption".
struct TimeFormat {
  enum class Kind { Token, Seconds };
  Kind kind = Kind::Token;
  double duration_seconds = 0.0;

  static TimeFormat token() { return {Kind::Token, 0.0}; }
  static TimeFormat seconds(double duration) {
    if (!(duration > 0.0)) throw ValidationError("seconds format needs a positive duration");
    return {Kind::Seconds, duration};
  }
};

namespace detail {

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

inline std::string escape_caption(std::string_view caption) {
  std::string out;
  out.reserve(caption.size());
  for (char c : caption) {
    if (c == '\\') {
      out += "\\\\";
    } else if (c == '\n') {
      out += "\\n";
    } else {
      out += c;
    }
  }
  return out;
}

inline std::string unescape_caption(std::string_view text, std::size_t line) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '\\') {
      out += text[i];
      continue;
    }
    if (i + 1 >= text.size()) throw ParseError("dangling escape in caption", line);
    const char next = text[++i];
    if (next == '\\') {
      out += '\\';
    } else if (next == 'n') {
      out += '\n';
    } else {
      throw ParseError(std::string("unknown escape '\\") + next + "' in caption", line);
    }
  }
  return out;
}

inline double parse_double(std::string_view s, std::size_t line, const char* what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ParseError(std::string("bad ") + what + " value '" + std::string(s) + "'", line);
  }
  return v;
}

}  // namespace detail

// One line per event; captions are newline-escaped. Token format:
//   <t=0.250000> <t=0.500000> a dog runs
// Seconds format:
//   15.50s-30.75s : a dog runs
inline std::string render_event_sequence(const EventSequence& seq, const TimeFormat& fmt) {
  seq.validate();
  if (fmt.kind == TimeFormat::Kind::Seconds && !(fmt.duration_seconds > 0.0)) {
    throw ValidationError("seconds format needs a positive duration");
  }
  std::string out;
  for (std::size_t i = 0; i < seq.events.size(); ++i) {
    const auto& e = seq.events[i];
    if (i > 0) out += '\n';
    if (fmt.kind == TimeFormat::Kind::Token) {
      out += "<t=" + detail::format_fixed(e.start.tau, 6) + "> <t=" +
             detail::format_fixed(e.end.tau, 6) + "> " + detail::escape_caption(e.caption);
    } else {
      out += detail::format_fixed(e.start.seconds(fmt.duration_seconds), 2) + "s-" +
             detail::format_fixed(e.end.seconds(fmt.duration_seconds), 2) +
             "s : " + detail::escape_caption(e.caption);
    }
  }
  return out;
}

// Inverse of render for in-range values. Malformed lines raise ParseError
// with the 1-based line number; end < start raises ValidationError.
inline EventSequence parse_event_sequence(std::string_view text, const TimeFormat& fmt) {
  EventSequence seq;
  if (text.empty()) return seq;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    const std::string_view line = text.substr(pos, eol - pos);
    const bool last = eol == text.size();
    ++line_no;
    pos = eol + 1;
    if (line.empty() && last) break;  // tolerate one trailing newline

    GroundedEvent ev;
    if (fmt.kind == TimeFormat::Kind::Token) {
      if (!line.starts_with("<t=")) throw ParseError("expected '<t=' marker", line_no);
      const std::size_t c1 = line.find('>');
      if (c1 == std::string_view::npos) throw ParseError("unterminated time marker", line_no);
      const std::string_view first = line.substr(3, c1 - 3);
      const std::string_view rest = line.substr(c1 + 1);
      if (!rest.starts_with(" <t=")) throw ParseError("expected second time marker", line_no);
      const std::size_t c2 = rest.find('>');
      if (c2 == std::string_view::npos) throw ParseError("unterminated time marker", line_no);
      const std::string_view second = rest.substr(4, c2 - 4);
      std::string_view caption = rest.substr(c2 + 1);
      if (!caption.starts_with(' ')) throw ParseError("expected caption after markers", line_no);
      caption.remove_prefix(1);
      const double a = detail::parse_double(first, line_no, "time");
      const double b = detail::parse_double(second, line_no, "time");
      if (!(a >= 0.0 && a <= 1.0)) {
        throw RangeError("line " + std::to_string(line_no) + ": time " + std::to_string(a) +
                         " outside [0, 1]");
      }
      if (!(b >= 0.0 && b <= 1.0)) {
        throw RangeError("line " + std::to_string(line_no) + ": time " + std::to_string(b) +
                         " outside [0, 1]");
      }
      ev.start = NormalizedTime{a};
      ev.end = NormalizedTime{b};
      ev.caption = detail::unescape_caption(caption, line_no);
    } else {
      const std::size_t s1 = line.find("s-");
      if (s1 == std::string_view::npos) throw ParseError("expected 'START s-END s : caption'", line_no);
      const std::size_t s2 = line.find("s : ", s1 + 2);
      if (s2 == std::string_view::npos) throw ParseError("expected 's : ' separator", line_no);
      const double start_s = detail::parse_double(line.substr(0, s1), line_no, "seconds");
      const double end_s = detail::parse_double(line.substr(s1 + 2, s2 - s1 - 2), line_no, "seconds");
      ev.start = NormalizedTime::from_seconds(start_s, fmt.duration_seconds);
      ev.end = NormalizedTime::from_seconds(end_s, fmt.duration_seconds);
      ev.caption = detail::unescape_caption(line.substr(s2 + 4), line_no);
    }
    if (ev.end.tau < ev.start.tau) {
      throw ValidationError("line " + std::to_string(line_no) + ": end before start");
    }
    if (ev.caption.empty()) throw ParseError("empty caption", line_no);
    seq.events.push_back(std::move(ev));

    if (last) break;
  }
  seq.validate();
  return seq;
}

// ---- sequence files -------------------------------------------------------
// First line declares the format: `#format=token` or
// `#format=seconds;duration=<float>`; the body follows.

inline std::string render_sequence_file(const EventSequence& seq, const TimeFormat& fmt) {
  std::string header = "#format=";
  if (fmt.kind == TimeFormat::Kind::Token) {
    header += "token";
  } else {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), fmt.duration_seconds);
    header += "seconds;duration=" + std::string(buf, res.ptr);
  }
  return header + "\n" + render_event_sequence(seq, fmt);
}

inline std::pair<EventSequence, TimeFormat> parse_sequence_file(std::string_view text) {
  const std::size_t eol = std::min(text.find('\n'), text.size());
  const std::string_view header = text.substr(0, eol);
  TimeFormat fmt;
  if (header == "#format=token") {
    fmt = TimeFormat::token();
  } else if (header.starts_with("#format=seconds;duration=")) {
    fmt = TimeFormat::seconds(
        detail::parse_double(header.substr(25), 1, "duration"));
  } else {
    throw ParseError("bad or missing format header", 1);
  }
  const std::string_view body = eol < text.size() ? text.substr(eol + 1) : std::string_view{};
  return {parse_event_sequence(body, fmt), fmt};
}

// ---- sequence scoring ------------------------------------------------------

struct TimeMarker {
  NormalizedTime tau;
};

// Either an opaque text-token id or a continuous time marker.
using SequenceToken = std::variant<std::int64_t, TimeMarker>;

struct TokenizedTarget {
  std::vector<SequenceToken> tokens;

  // Each event contributes exactly two time markers followed by at least one
  // caption token.
  void validate_event_pattern() const {
    std::size_t i = 0;
    while (i < tokens.size()) {
      if (!std::holds_alternative<TimeMarker>(tokens[i]) || i + 1 >= tokens.size() ||
          !std::holds_alternative<TimeMarker>(tokens[i + 1])) {
        throw ValidationError("each event must start with two time markers");
      }
      i += 2;
      std::size_t caption_tokens = 0;
      while (i < tokens.size() && std::holds_alternative<std::int64_t>(tokens[i])) {
        ++caption_tokens;
        ++i;
      }
      if (caption_tokens == 0) {
        throw ValidationError("each event needs at least one caption token");
      }
    }
  }
};

inline TokenizedTarget tokenize_sequence(
    const EventSequence& seq,
    const std::function<std::vector<std::int64_t>(const std::string&)>& caption_tokens) {
  seq.validate();
  TokenizedTarget target;
  for (const auto& e : seq.events) {
    target.tokens.emplace_back(TimeMarker{e.start});
    target.tokens.emplace_back(TimeMarker{e.end});
    for (std::int64_t id : caption_tokens(e.caption)) target.tokens.emplace_back(id);
  }
  target.validate_event_pattern();
  return target;
}

// Mean negative log-probability of the target under per-position
// log-densities. Text rows must be normalized (log-sum-exp 0 within 1e-6);
// time-marker positions are scored by the supplied evaluator, since the
// probability model over continuous time lives outside this toolkit.
inline double sequence_nll(const TokenizedTarget& target, const Matrix& logprobs,
                           const std::function<double(NormalizedTime)>& time_logprob) {
  const std::size_t l = target.tokens.size();
  if (l == 0) throw ValidationError("cannot score an empty target");
  if (logprobs.rows != l) {
    throw ShapeError("logprobs has " + std::to_string(logprobs.rows) + " rows, target has " +
                     std::to_string(l) + " tokens");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < l; ++i) {
    if (const auto* marker = std::get_if<TimeMarker>(&target.tokens[i])) {
      if (!time_logprob) throw ValidationError("target has time markers but no time evaluator");
      total += time_logprob(marker->tau);
      continue;
    }
    const double lse = log_sum_exp(logprobs.row(i));
    if (!(std::abs(lse) <= 1e-6)) {
      throw ValidationError("logprob row " + std::to_string(i) +
                            " is not normalized (log-sum-exp " + std::to_string(lse) + ")");
    }
    const std::int64_t id = std::get<std::int64_t>(target.tokens[i]);
    if (id < 0 || static_cast<std::size_t>(id) >= logprobs.cols) {
      throw RangeError("token id " + std::to_string(id) + " outside vocabulary of size " +
                       std::to_string(logprobs.cols));
    }
    total += logprobs.at(i, static_cast<std::size_t>(id));
  }
  return -total / static_cast<double>(l);
}

}  // namespace tempokit
