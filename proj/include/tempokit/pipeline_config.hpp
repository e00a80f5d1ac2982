#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "tempokit/errors.hpp"
#include "tempokit/event_segmentation.hpp"
#include "tempokit/instance_tracking.hpp"
#include "tempokit/json_io.hpp"

namespace tempokit {

// Every module default in one document. Unknown keys are rejected so a typo
// never silently falls back to a default; the loaded config is echoed into
// every output's provenance.
struct PipelineConfig {
  std::size_t n_anchors = 300;
  std::size_t m_frames = 300;
  std::size_t dim = 64;
  std::uint64_t rng_seed = 0;

  SegmentationConfig segmentation;
  TrackerParams tracker;

  struct Trainer {
    std::size_t n_anchors = 64;
    std::size_t dim = 16;
    double learning_rate = 0.1;
    std::size_t steps = 500;
    std::size_t supervise_every = 8;
    std::uint64_t rng_seed = 5;
  } trainer;

  struct Llm {
    std::string endpoint;
    std::string model;
    std::string auth_env = "TEMPOKIT_LLM_TOKEN";
    int retries = 3;
    int timeout_seconds = 30;
    int backoff_ms = 100;
    std::size_t max_in_flight = 4;
  } llm;

  struct Gen {
    std::string video_id = "video";
    double duration_seconds = 0.0;
  } gen;
};

namespace detail {

inline void reject_unknown_keys(const OrderedJson& j, std::initializer_list<const char*> known,
                                const std::string& scope) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) {
      if (key == k) {
        ok = true;
        break;
      }
    }
    if (!ok) throw ValidationError("unknown config key '" + scope + key + "'");
  }
}

template <typename T>
void maybe_get(const OrderedJson& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline PipelineConfig pipeline_config_from_json(const OrderedJson& j) {
  PipelineConfig c;
  detail::reject_unknown_keys(
      j, {"n_anchors", "m_frames", "dim", "rng_seed", "segmentation", "tracker", "trainer",
          "llm", "gen"},
      "");
  detail::maybe_get(j, "n_anchors", c.n_anchors);
  detail::maybe_get(j, "m_frames", c.m_frames);
  detail::maybe_get(j, "dim", c.dim);
  detail::maybe_get(j, "rng_seed", c.rng_seed);

  if (j.contains("segmentation")) {
    const auto& s = j.at("segmentation");
    detail::reject_unknown_keys(s,
                                {"sigma", "threshold_mode", "adaptive_c", "fixed_threshold",
                                 "merge_threshold", "min_event_frames", "merge_to_fixpoint"},
                                "segmentation.");
    detail::maybe_get(s, "sigma", c.segmentation.sigma);
    if (s.contains("threshold_mode")) {
      const auto mode = s.at("threshold_mode").get<std::string>();
      if (mode == "adaptive") {
        c.segmentation.threshold_mode = SegmentationConfig::ThresholdMode::Adaptive;
      } else if (mode == "fixed") {
        c.segmentation.threshold_mode = SegmentationConfig::ThresholdMode::Fixed;
      } else {
        throw ValidationError("segmentation.threshold_mode must be 'adaptive' or 'fixed'");
      }
    }
    detail::maybe_get(s, "adaptive_c", c.segmentation.adaptive_c);
    detail::maybe_get(s, "fixed_threshold", c.segmentation.fixed_threshold);
    detail::maybe_get(s, "merge_threshold", c.segmentation.merge_threshold);
    detail::maybe_get(s, "min_event_frames", c.segmentation.min_event_frames);
    detail::maybe_get(s, "merge_to_fixpoint", c.segmentation.merge_to_fixpoint);
  }
  if (j.contains("tracker")) {
    const auto& t = j.at("tracker");
    detail::reject_unknown_keys(
        t, {"iou_min", "feature_cos_min", "max_gap_frames", "iou_weight", "cos_weight"},
        "tracker.");
    detail::maybe_get(t, "iou_min", c.tracker.iou_min);
    detail::maybe_get(t, "feature_cos_min", c.tracker.feature_cos_min);
    detail::maybe_get(t, "max_gap_frames", c.tracker.max_gap_frames);
    detail::maybe_get(t, "iou_weight", c.tracker.iou_weight);
    detail::maybe_get(t, "cos_weight", c.tracker.cos_weight);
  }
  if (j.contains("trainer")) {
    const auto& t = j.at("trainer");
    detail::reject_unknown_keys(
        t, {"n_anchors", "dim", "learning_rate", "steps", "supervise_every", "rng_seed"},
        "trainer.");
    detail::maybe_get(t, "n_anchors", c.trainer.n_anchors);
    detail::maybe_get(t, "dim", c.trainer.dim);
    detail::maybe_get(t, "learning_rate", c.trainer.learning_rate);
    detail::maybe_get(t, "steps", c.trainer.steps);
    detail::maybe_get(t, "supervise_every", c.trainer.supervise_every);
    detail::maybe_get(t, "rng_seed", c.trainer.rng_seed);
  }
  if (j.contains("llm")) {
    const auto& l = j.at("llm");
    detail::reject_unknown_keys(l,
                                {"endpoint", "model", "auth_env", "retries", "timeout_seconds",
                                 "backoff_ms", "max_in_flight"},
                                "llm.");
    detail::maybe_get(l, "endpoint", c.llm.endpoint);
    detail::maybe_get(l, "model", c.llm.model);
    detail::maybe_get(l, "auth_env", c.llm.auth_env);
    detail::maybe_get(l, "retries", c.llm.retries);
    detail::maybe_get(l, "timeout_seconds", c.llm.timeout_seconds);
    detail::maybe_get(l, "backoff_ms", c.llm.backoff_ms);
    detail::maybe_get(l, "max_in_flight", c.llm.max_in_flight);
  }
  if (j.contains("gen")) {
    const auto& g = j.at("gen");
    detail::reject_unknown_keys(g, {"video_id", "duration_seconds"}, "gen.");
    detail::maybe_get(g, "video_id", c.gen.video_id);
    detail::maybe_get(g, "duration_seconds", c.gen.duration_seconds);
  }
  return c;
}

inline OrderedJson pipeline_config_to_json(const PipelineConfig& c) {
  return OrderedJson{
      {"n_anchors", c.n_anchors},
      {"m_frames", c.m_frames},
      {"dim", c.dim},
      {"rng_seed", c.rng_seed},
      {"segmentation",
       {{"sigma", c.segmentation.sigma},
        {"threshold_mode",
         c.segmentation.threshold_mode == SegmentationConfig::ThresholdMode::Adaptive ? "adaptive"
                                                                                      : "fixed"},
        {"adaptive_c", c.segmentation.adaptive_c},
        {"fixed_threshold", c.segmentation.fixed_threshold},
        {"merge_threshold", c.segmentation.merge_threshold},
        {"min_event_frames", c.segmentation.min_event_frames},
        {"merge_to_fixpoint", c.segmentation.merge_to_fixpoint}}},
      {"tracker",
       {{"iou_min", c.tracker.iou_min},
        {"feature_cos_min", c.tracker.feature_cos_min},
        {"max_gap_frames", c.tracker.max_gap_frames},
        {"iou_weight", c.tracker.iou_weight},
        {"cos_weight", c.tracker.cos_weight}}},
      {"trainer",
       {{"n_anchors", c.trainer.n_anchors},
        {"dim", c.trainer.dim},
        {"learning_rate", c.trainer.learning_rate},
        {"steps", c.trainer.steps},
        {"supervise_every", c.trainer.supervise_every},
        {"rng_seed", c.trainer.rng_seed}}},
      {"llm",
       {{"endpoint", c.llm.endpoint},
        {"model", c.llm.model},
        {"auth_env", c.llm.auth_env},
        {"retries", c.llm.retries},
        {"timeout_seconds", c.llm.timeout_seconds},
        {"backoff_ms", c.llm.backoff_ms},
        {"max_in_flight", c.llm.max_in_flight}}},
      {"gen", {{"video_id", c.gen.video_id}, {"duration_seconds", c.gen.duration_seconds}}},
  };
}

}  // namespace tempokit
