// Command-line front end: wires the library modules into file-to-file
// pipelines with reproducible, provenance-stamped outputs.

#include <cstdio>
#include <filesystem>
#include <future>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tempokit/remote_llm_client.hpp"
#include "tempokit/tempokit.hpp"

namespace fs = std::filesystem;
using namespace tempokit;

namespace {

struct GlobalState {
  std::string config_path;
  std::size_t jobs = 1;
  PipelineConfig config;

  void load_config() {
    if (config_path.empty()) return;
    config = pipeline_config_from_json(parse_json(read_file(config_path), config_path));
  }

  Provenance provenance(std::uint64_t seed,
                        const std::vector<fs::path>& inputs) const {
    Provenance p;
    p.config = pipeline_config_to_json(config);
    p.seed = seed;
    for (const auto& in : inputs) p.input_hashes[in.filename().string()] = hash_of_file(in);
    return p;
  }
};

void print_json_line(const OrderedJson& j) { std::cout << j.dump() << "\n"; }

TemporalTokenSpace space_from_flags(const std::string& space_path, std::size_t n, std::size_t dim,
                                    std::uint64_t seed, bool n_given) {
  if (!space_path.empty()) {
    TemporalTokenSpace s = load_space(space_path);
    if (n_given && s.n_anchors != n) {
      throw ValidationError("space file has " + std::to_string(s.n_anchors) +
                            " anchors, --n says " + std::to_string(n));
    }
    return s;
  }
  return TemporalTokenSpace::seeded(n, dim, seed);
}

std::vector<double> parse_embedding_json(const std::string& text) {
  const OrderedJson j = parse_json(text, "embedding");
  if (!j.is_array()) throw ValidationError("embedding must be a JSON array");
  std::vector<double> out;
  for (const auto& v : j) out.push_back(v.get<double>());
  return out;
}

// Sequence-event records: {"start_time", "end_time", "caption"}.
EventSequence sequence_from_jsonl(std::string_view text) {
  EventSequence seq;
  detail::for_each_jsonl_line(text, [&](const OrderedJson& j, std::size_t line_no) {
    try {
      GroundedEvent e;
      e.start = NormalizedTime::checked(j.at("start_time").get<double>());
      e.end = NormalizedTime::checked(j.at("end_time").get<double>());
      e.caption = j.at("caption").get<std::string>();
      seq.events.push_back(std::move(e));
    } catch (const OrderedJson::exception& ex) {
      throw ParseError(std::string("bad sequence event: ") + ex.what(), line_no);
    }
  });
  seq.validate();
  return seq;
}

std::string sequence_to_jsonl(const EventSequence& seq) {
  std::string out;
  for (const auto& e : seq.events) {
    out += OrderedJson{{"start_time", e.start.tau}, {"end_time", e.end.tau}, {"caption", e.caption}}
               .dump();
    out += '\n';
  }
  return out;
}

std::vector<double> parse_threshold_list(const std::string& csv) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    const std::size_t comma = std::min(csv.find(',', pos), csv.size());
    const std::string item = csv.substr(pos, comma - pos);
    if (!item.empty()) out.push_back(std::stod(item));
    if (comma == csv.size()) break;
    pos = comma + 1;
  }
  if (out.empty()) throw ValidationError("empty threshold list");
  return out;
}

// Central finite differences on the frozen-StopGrad surrogate; the gradient
// is linear in the anchors so agreement is limited only by roundoff.
struct GradCheckReport {
  std::size_t trials = 0;
  double max_rel_err = 0.0;
  bool pass = false;
};

GradCheckReport run_gradcheck(std::size_t trials, std::uint64_t seed) {
  GradCheckReport report;
  report.trials = trials;
  Rng rng(seed);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const std::size_t n = 3 + rng.uniform_index(10);
    const std::size_t dim = 2 + rng.uniform_index(5);
    const TemporalTokenSpace space = TemporalTokenSpace::seeded(n, dim, rng.next_u64());
    const NormalizedTime tau{rng.uniform()};
    std::vector<double> upstream(dim);
    for (double& u : upstream) u = rng.gaussian();
    const NtpOptions opts{true, true};

    const AnchorGradients analytic = grad_wrt_anchors(space, tau, upstream, opts);

    const auto pos = position_of(space, tau);
    auto surrogate_objective = [&](const Matrix& anchors) {
      auto adjusted = [&](std::size_t k, std::size_t j) {
        double adj = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          adj += std::ldexp(1.0, -static_cast<int>(i > k ? i - k : k - i)) * anchors.at(i, j);
        }
        return anchors.at(k, j) + adj;  // frozen copy cancels out of differences
      };
      double value = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        value += upstream[j] * ((1.0 - pos.frac) * adjusted(pos.lower, j) +
                                pos.frac * adjusted(pos.lower + 1, j));
      }
      return value;
    };

    const double h = 1e-5;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < dim; ++j) {
        Matrix probe = space.anchors;
        probe.at(i, j) += h;
        const double up = surrogate_objective(probe);
        probe.at(i, j) -= 2.0 * h;
        const double down = surrogate_objective(probe);
        const double fd = (up - down) / (2.0 * h);
        const double diff = fd - analytic.grad.at(i, j);
        num += diff * diff;
        den += analytic.grad.at(i, j) * analytic.grad.at(i, j);
      }
    }
    const double rel = std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
    report.max_rel_err = std::max(report.max_rel_err, rel);
  }
  report.pass = report.max_rel_err < 1e-6;
  return report;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tempokit: temporal token spaces, event boundaries and grounding metrics"};
  app.require_subcommand(1);
  auto state = std::make_shared<GlobalState>();
  app.add_option("--config", state->config_path, "pipeline config JSON; flags override");
  app.add_option("--jobs", state->jobs, "parallel workers / concurrent LLM calls")
      ->check(CLI::PositiveNumber);

  // ---- space init ----
  auto* space_cmd = app.add_subcommand("space", "token space utilities");
  space_cmd->require_subcommand(1);
  {
    auto* init = space_cmd->add_subcommand("init", "create a seeded anchor space file");
    auto n = std::make_shared<std::size_t>(0);
    auto dim = std::make_shared<std::size_t>(0);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto out = std::make_shared<std::string>();
    auto* n_opt = init->add_option("--n", *n, "anchor count");
    auto* dim_opt = init->add_option("--dim", *dim, "embedding width");
    auto* seed_opt = init->add_option("--seed", *seed, "rng seed");
    init->add_option("--out", *out, "output space file")->required();
    init->callback([=]() {
      state->load_config();
      if (!*n_opt) *n = state->config.n_anchors;
      if (!*dim_opt) *dim = state->config.dim;
      if (!*seed_opt) *seed = state->config.rng_seed;
      const auto space = TemporalTokenSpace::seeded(*n, *dim, *seed);
      save_space(space, *out);
      write_provenance(*out, state->provenance(*seed, {}));
    });
  }

  // ---- encode-time ----
  {
    auto* cmd = app.add_subcommand("encode-time", "embedding of a normalized time");
    auto space_path = std::make_shared<std::string>();
    auto n = std::make_shared<std::size_t>(0);
    auto dim = std::make_shared<std::size_t>(0);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto tau = std::make_shared<double>(0.0);
    cmd->add_option("--space", *space_path, "space file");
    auto* n_opt = cmd->add_option("--n", *n, "anchor count (cross-check or seeded build)");
    auto* dim_opt = cmd->add_option("--dim", *dim, "embedding width for seeded build");
    auto* seed_opt = cmd->add_option("--seed", *seed, "seed for seeded build");
    cmd->add_option("--tau", *tau, "normalized time in [0, 1]")->required();
    cmd->callback([=]() {
      state->load_config();
      if (!*n_opt) *n = state->config.n_anchors;
      if (!*dim_opt) *dim = state->config.dim;
      if (!*seed_opt) *seed = state->config.rng_seed;
      const auto space = space_from_flags(*space_path, *n, *dim, *seed, n_opt->count() > 0);
      print_json_line(OrderedJson(encode_time(space, NormalizedTime::checked(*tau))));
    });
  }

  // ---- decode-time ----
  {
    auto* cmd = app.add_subcommand("decode-time", "nearest tau for an embedding");
    auto space_path = std::make_shared<std::string>();
    auto embedding = std::make_shared<std::string>();
    auto embedding_file = std::make_shared<std::string>();
    cmd->add_option("--space", *space_path, "space file")->required();
    cmd->add_option("--embedding", *embedding, "embedding as a JSON array");
    cmd->add_option("--embedding-file", *embedding_file, "file holding the JSON array");
    cmd->callback([=]() {
      state->load_config();
      if (embedding->empty() == embedding_file->empty()) {
        throw ValidationError("give exactly one of --embedding or --embedding-file");
      }
      const auto space = load_space(*space_path);
      const auto vec = parse_embedding_json(
          embedding->empty() ? read_file(*embedding_file) : *embedding);
      const auto res = decode_time(space, vec);
      print_json_line(OrderedJson{{"tau", res.tau.tau}, {"residual", res.residual}});
    });
  }

  // ---- segment ----
  {
    auto* cmd = app.add_subcommand("segment", "frames JSONL -> events JSONL");
    auto frames = std::make_shared<std::vector<std::string>>();
    auto scores = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto sigma = std::make_shared<double>(0.0);
    auto merge_threshold = std::make_shared<double>(0.0);
    auto min_event_frames = std::make_shared<std::size_t>(0);
    auto threshold_mode = std::make_shared<std::string>();
    auto adaptive_c = std::make_shared<double>(0.0);
    auto fixed_threshold = std::make_shared<double>(0.0);
    cmd->add_option("--frames", *frames, "frames JSONL (repeatable; several run in parallel)")
        ->required();
    cmd->add_option("--scores", *scores, "precomputed difference scores (JSON array)");
    cmd->add_option("--out", *out,
                    "events JSONL, or a directory when several --frames are given")
        ->required();
    auto* sigma_opt = cmd->add_option("--sigma", *sigma, "gaussian sigma");
    auto* merge_opt = cmd->add_option("--merge-threshold", *merge_threshold, "merge threshold");
    auto* min_opt = cmd->add_option("--min-event-frames", *min_event_frames, "runt size");
    auto* mode_opt = cmd->add_option("--threshold-mode", *threshold_mode, "adaptive|fixed");
    auto* c_opt = cmd->add_option("--adaptive-c", *adaptive_c, "adaptive threshold scale");
    auto* fixed_opt = cmd->add_option("--fixed-threshold", *fixed_threshold, "fixed threshold");
    cmd->callback([=]() {
      state->load_config();
      SegmentationConfig seg = state->config.segmentation;
      if (*sigma_opt) seg.sigma = *sigma;
      if (*merge_opt) seg.merge_threshold = *merge_threshold;
      if (*min_opt) seg.min_event_frames = *min_event_frames;
      if (*mode_opt) {
        if (*threshold_mode == "adaptive") {
          seg.threshold_mode = SegmentationConfig::ThresholdMode::Adaptive;
        } else if (*threshold_mode == "fixed") {
          seg.threshold_mode = SegmentationConfig::ThresholdMode::Fixed;
        } else {
          throw ValidationError("--threshold-mode must be adaptive or fixed");
        }
      }
      if (*c_opt) seg.adaptive_c = *adaptive_c;
      if (*fixed_opt) seg.fixed_threshold = *fixed_threshold;

      std::optional<std::vector<double>> precomputed;
      if (!scores->empty()) {
        const OrderedJson j = parse_json(read_file(*scores), *scores);
        precomputed = detail::doubles_from_json(j, "scores");
      }
      if (precomputed && frames->size() > 1) {
        throw ValidationError("--scores only applies to a single --frames input");
      }

      auto run_one = [&](const std::string& frames_path, const fs::path& out_path) {
        const auto frame_records = load_frames(frames_path);
        const auto events =
            segment_video(frame_records, seg, precomputed ? &*precomputed : nullptr);
        write_file(out_path, events_to_jsonl(events));
        std::vector<fs::path> inputs{frames_path};
        if (!scores->empty()) inputs.push_back(*scores);
        write_provenance(out_path, state->provenance(state->config.rng_seed, inputs));
      };

      if (frames->size() == 1) {
        run_one(frames->front(), *out);
        return;
      }
      fs::create_directories(*out);
      std::vector<std::future<void>> futures;
      std::size_t next = 0;
      const std::size_t workers = std::max<std::size_t>(1, state->jobs);
      while (next < frames->size()) {
        futures.clear();
        for (std::size_t w = 0; w < workers && next < frames->size(); ++w, ++next) {
          const std::string in = (*frames)[next];
          const fs::path out_path =
              fs::path(*out) / (fs::path(in).stem().string() + ".events.jsonl");
          futures.push_back(std::async(std::launch::async, run_one, in, out_path));
        }
        for (auto& f : futures) f.get();
      }
    });
  }

  // ---- track ----
  {
    auto* cmd = app.add_subcommand("track", "detections JSONL -> tracks JSONL");
    auto detections = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto iou_min = std::make_shared<double>(0.0);
    auto cos_min = std::make_shared<double>(0.0);
    auto max_gap = std::make_shared<std::size_t>(0);
    cmd->add_option("--detections", *detections, "detections JSONL")->required();
    cmd->add_option("--out", *out, "tracks JSONL")->required();
    auto* iou_opt = cmd->add_option("--iou-min", *iou_min, "association IoU gate");
    auto* cos_opt = cmd->add_option("--cos-min", *cos_min, "association cosine gate");
    auto* gap_opt = cmd->add_option("--max-gap", *max_gap, "frames a track may go unseen");
    cmd->callback([=]() {
      state->load_config();
      TrackerParams params = state->config.tracker;
      if (*iou_opt) params.iou_min = *iou_min;
      if (*cos_opt) params.feature_cos_min = *cos_min;
      if (*gap_opt) params.max_gap_frames = *max_gap;
      const auto per_frame = detections_from_jsonl(read_file(*detections));
      const auto tracks = link_tracks(per_frame, params);
      write_file(*out, tracks_to_jsonl(tracks));
      write_provenance(*out, state->provenance(state->config.rng_seed, {*detections}));
    });
  }

  // ---- matrix ----
  {
    auto* cmd = app.add_subcommand("matrix", "tracks + events + clues -> matrix JSON");
    auto tracks_path = std::make_shared<std::string>();
    auto events_path = std::make_shared<std::string>();
    auto clues_path = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    cmd->add_option("--tracks", *tracks_path, "tracks JSONL")->required();
    cmd->add_option("--events", *events_path, "events JSONL")->required();
    cmd->add_option("--clues", *clues_path, "clue records JSONL");
    cmd->add_option("--out", *out, "matrix JSON")->required();
    cmd->callback([=]() {
      state->load_config();
      auto matrix = build_matrix(tracks_from_jsonl(read_file(*tracks_path)),
                                 events_from_jsonl(read_file(*events_path)));
      std::vector<fs::path> inputs{*tracks_path, *events_path};
      if (!clues_path->empty()) {
        matrix = attach_clues(std::move(matrix), clues_from_jsonl(read_file(*clues_path)));
        inputs.push_back(*clues_path);
      }
      write_file(*out, matrix_to_json(matrix).dump(2) + "\n");
      write_provenance(*out, state->provenance(state->config.rng_seed, inputs));
    });
  }

  // ---- gen ----
  {
    auto* cmd = app.add_subcommand("gen", "matrix JSON -> instruction JSONL");
    auto matrix_path = std::make_shared<std::string>();
    auto plan_path = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto seed = std::make_shared<std::uint64_t>(0);
    auto duration = std::make_shared<double>(0.0);
    auto video_id = std::make_shared<std::string>();
    auto client_kind = std::make_shared<std::string>("mock");
    auto endpoint = std::make_shared<std::string>();
    auto model = std::make_shared<std::string>();
    cmd->add_option("--matrix", *matrix_path, "matrix JSON")->required();
    cmd->add_option("--plan", *plan_path, "JSON map of task name -> count")->required();
    cmd->add_option("--out", *out, "instruction records JSONL")->required();
    auto* seed_opt = cmd->add_option("--seed", *seed, "sampling seed");
    auto* dur_opt = cmd->add_option("--duration", *duration, "video duration in seconds");
    auto* vid_opt = cmd->add_option("--video-id", *video_id, "video id for the records");
    cmd->add_option("--client", *client_kind, "mock | echo | remote")
        ->check(CLI::IsMember({"mock", "echo", "remote"}));
    auto* ep_opt = cmd->add_option("--endpoint", *endpoint, "remote chat endpoint");
    auto* model_opt = cmd->add_option("--model", *model, "remote model name");
    cmd->callback([=]() {
      state->load_config();
      if (!*seed_opt) *seed = state->config.rng_seed;
      if (!*dur_opt) *duration = state->config.gen.duration_seconds;
      if (!*vid_opt) *video_id = state->config.gen.video_id;

      const auto matrix = matrix_from_json(parse_json(read_file(*matrix_path), *matrix_path));
      GenerationPlan plan;
      for (const auto& [name, count] :
           parse_json(read_file(*plan_path), *plan_path).items()) {
        plan[task_from_string(name)] = count.get<std::size_t>();
      }

      std::unique_ptr<LlmClient> client;
      if (*client_kind == "remote") {
        RemoteClientConfig rc;
        rc.endpoint = *ep_opt ? *endpoint : state->config.llm.endpoint;
        rc.model = *model_opt ? *model : state->config.llm.model;
        rc.auth_env = state->config.llm.auth_env;
        rc.retries = state->config.llm.retries;
        rc.timeout_seconds = state->config.llm.timeout_seconds;
        rc.backoff_ms = state->config.llm.backoff_ms;
        if (rc.endpoint.empty()) throw ValidationError("remote client needs --endpoint");
        client = std::make_unique<RemoteLlmClient>(rc);
      } else {
        client = std::make_unique<MockLlmClient>(*client_kind == "echo"
                                                     ? MockLlmClient::Fallback::Echo
                                                     : MockLlmClient::Fallback::HashReply);
      }

      GenOptions opts;
      opts.video_id = *video_id;
      opts.duration_seconds = *duration;
      opts.max_in_flight = state->jobs > 1 ? state->jobs : state->config.llm.max_in_flight;
      const auto result = generate_instructions(matrix, *client, plan, *seed, opts);

      write_file(*out, instruction_records_to_jsonl(result.records));
      if (!result.issues.empty()) {
        std::string issues;
        for (const auto& issue : result.issues) {
          issues += OrderedJson{{"task", std::string(to_string(issue.task))},
                                {"instance", issue.instance_index},
                                {"message", issue.message},
                                {"raw_reply", issue.raw_reply}}
                        .dump();
          issues += '\n';
        }
        fs::path issues_path = *out;
        issues_path += ".issues.jsonl";
        write_file(issues_path, issues);
      }
      write_provenance(*out, state->provenance(*seed, {*matrix_path, *plan_path}));
    });
  }

  // ---- seq ----
  {
    auto* seq_cmd = app.add_subcommand("seq", "event-sequence text codec");
    seq_cmd->require_subcommand(1);

    auto* render = seq_cmd->add_subcommand("render", "events JSONL -> sequence text");
    auto r_events = std::make_shared<std::string>();
    auto r_out = std::make_shared<std::string>();
    auto r_format = std::make_shared<std::string>("token");
    auto r_duration = std::make_shared<double>(0.0);
    render->add_option("--events", *r_events, "sequence events JSONL")->required();
    render->add_option("--out", *r_out, "output text file")->required();
    render->add_option("--format", *r_format, "token | seconds")
        ->check(CLI::IsMember({"token", "seconds"}));
    render->add_option("--duration", *r_duration, "duration for the seconds format");
    render->callback([=]() {
      state->load_config();
      const auto seq = sequence_from_jsonl(read_file(*r_events));
      const TimeFormat fmt = *r_format == "token" ? TimeFormat::token()
                                                  : TimeFormat::seconds(*r_duration);
      write_file(*r_out, render_sequence_file(seq, fmt) + "\n");
      write_provenance(*r_out, state->provenance(state->config.rng_seed, {*r_events}));
    });

    auto* parse = seq_cmd->add_subcommand("parse", "sequence text -> events JSONL");
    auto p_in = std::make_shared<std::string>();
    auto p_out = std::make_shared<std::string>();
    parse->add_option("--in", *p_in, "sequence text file with format header")->required();
    parse->add_option("--out", *p_out, "sequence events JSONL")->required();
    parse->callback([=]() {
      state->load_config();
      const auto [seq, fmt] = parse_sequence_file(read_file(*p_in));
      (void)fmt;
      write_file(*p_out, sequence_to_jsonl(seq));
      write_provenance(*p_out, state->provenance(state->config.rng_seed, {*p_in}));
    });
  }

  // ---- continuity ----
  {
    auto* cmd = app.add_subcommand("continuity", "train with/without propagation and compare");
    auto out_dir = std::make_shared<std::string>();
    auto n = std::make_shared<std::size_t>(0);
    auto dim = std::make_shared<std::size_t>(0);
    auto steps = std::make_shared<std::size_t>(0);
    auto lr = std::make_shared<double>(0.0);
    auto every = std::make_shared<std::size_t>(0);
    auto seed = std::make_shared<std::uint64_t>(0);
    cmd->add_option("--out-dir", *out_dir, "directory for report.json and CSVs")->required();
    auto* n_opt = cmd->add_option("--n", *n, "anchor count");
    auto* dim_opt = cmd->add_option("--dim", *dim, "embedding width");
    auto* steps_opt = cmd->add_option("--steps", *steps, "descent steps");
    auto* lr_opt = cmd->add_option("--lr", *lr, "learning rate");
    auto* every_opt = cmd->add_option("--every", *every, "supervise every k-th anchor");
    auto* seed_opt = cmd->add_option("--seed", *seed, "rng seed");
    cmd->callback([=]() {
      state->load_config();
      const auto& t = state->config.trainer;
      TrainConfig cfg;
      cfg.n_anchors = *n_opt ? *n : t.n_anchors;
      cfg.dim = *dim_opt ? *dim : t.dim;
      cfg.steps = *steps_opt ? *steps : t.steps;
      cfg.learning_rate = *lr_opt ? *lr : t.learning_rate;
      cfg.rng_seed = *seed_opt ? *seed : t.rng_seed;
      const std::size_t stride = *every_opt ? *every : t.supervise_every;
      if (stride == 0) throw ValidationError("--every must be positive");
      for (std::size_t k = 1; k <= cfg.n_anchors; k += stride) {
        cfg.supervised_indices.push_back(k);
      }
      cfg.targets = sinusoidal_targets(cfg.n_anchors, cfg.dim, cfg.supervised_indices);

      const ContinuityOutcome outcome = continuity_experiment(cfg);
      fs::create_directories(*out_dir);
      const fs::path dir(*out_dir);
      const Provenance prov = state->provenance(cfg.rng_seed, {});

      const fs::path report_path = dir / "report.json";
      write_file(report_path,
                 OrderedJson{{"with_ntp", continuity_report_to_json(outcome.with_ntp.report)},
                             {"without_ntp",
                              continuity_report_to_json(outcome.without_ntp.report)}}
                         .dump(2) +
                     "\n");
      write_provenance(report_path, prov);

      const fs::path ntp_csv = dir / "pca_with_ntp.csv";
      write_file(ntp_csv, pca_scores_to_csv(outcome.with_ntp.pca_scores));
      write_provenance(ntp_csv, prov);

      const fs::path plain_csv = dir / "pca_without_ntp.csv";
      write_file(plain_csv, pca_scores_to_csv(outcome.without_ntp.pca_scores));
      write_provenance(plain_csv, prov);
    });
  }

  // ---- metrics ----
  {
    auto* metrics_cmd = app.add_subcommand("metrics", "evaluation metric reports");
    metrics_cmd->require_subcommand(1);

    auto write_report = [state](const OrderedJson& report, const std::string& out,
                                const std::vector<fs::path>& inputs) {
      print_json_line(report);
      if (!out.empty()) {
        write_file(out, report.dump(2) + "\n");
        write_provenance(out, state->provenance(state->config.rng_seed, inputs));
      }
    };

    {
      auto* cmd = metrics_cmd->add_subcommand("grounding", "R@tIoU and mean IoU");
      auto pred = std::make_shared<std::string>();
      auto gt = std::make_shared<std::string>();
      auto out = std::make_shared<std::string>();
      auto thresholds = std::make_shared<std::string>("0.3,0.5,0.7");
      cmd->add_option("--pred", *pred, "predictions JSONL {query_id, start, end}")->required();
      cmd->add_option("--gt", *gt, "ground truth JSONL {query_id, start, end}")->required();
      cmd->add_option("--out", *out, "also write the report here");
      cmd->add_option("--thresholds", *thresholds, "comma-separated IoU thresholds");
      cmd->callback([=]() {
        state->load_config();
        const auto preds = query_intervals_from_jsonl(read_file(*pred));
        const auto gts = query_intervals_from_jsonl(read_file(*gt));
        std::map<std::string, Interval> pred_by_id;
        for (const auto& p : preds) {
          if (!pred_by_id.emplace(p.query_id, p.interval).second) {
            throw ValidationError("duplicate prediction for query " + p.query_id);
          }
        }
        std::vector<Interval> aligned_pred, aligned_gt;
        for (const auto& g : gts) {
          const auto it = pred_by_id.find(g.query_id);
          if (it == pred_by_id.end()) {
            throw ValidationError("no prediction for query " + g.query_id);
          }
          aligned_pred.push_back(it->second);
          aligned_gt.push_back(g.interval);
        }
        const auto report =
            grounding_metrics(aligned_pred, aligned_gt, parse_threshold_list(*thresholds));
        write_report(grounding_report_to_json(report), *out, {*pred, *gt});
      });
    }

    {
      auto* cmd = metrics_cmd->add_subcommand("actionseg", "MoF and segmental F1");
      auto pred = std::make_shared<std::string>();
      auto gt = std::make_shared<std::string>();
      auto out = std::make_shared<std::string>();
      auto overlaps = std::make_shared<std::string>("0.10,0.25,0.50");
      auto fps = std::make_shared<double>(1.0);
      cmd->add_option("--pred", *pred, "predicted segments JSONL {label, start, end}")->required();
      cmd->add_option("--gt", *gt, "ground-truth segments JSONL {label, start, end}")->required();
      cmd->add_option("--out", *out, "also write the report here");
      cmd->add_option("--overlaps", *overlaps, "comma-separated F1 overlap thresholds");
      cmd->add_option("--fps", *fps, "frame rate for MoF rasterization");
      cmd->callback([=]() {
        state->load_config();
        LabeledSegmentation p{labeled_intervals_from_jsonl(read_file(*pred)), std::nullopt};
        LabeledSegmentation g{labeled_intervals_from_jsonl(read_file(*gt)), std::nullopt};
        const auto report =
            action_seg_metrics(p, g, parse_threshold_list(*overlaps), *fps);
        write_report(action_seg_report_to_json(report), *out, {*pred, *gt});
      });
    }

    {
      auto* cmd = metrics_cmd->add_subcommand("highlight", "mAP over an IoU grid and R1@0.5");
      auto pred = std::make_shared<std::string>();
      auto gt = std::make_shared<std::string>();
      auto out = std::make_shared<std::string>();
      cmd->add_option("--pred", *pred, "scored moments JSONL {query_id, start, end, score}")
          ->required();
      cmd->add_option("--gt", *gt, "ground truth JSONL {query_id, start, end}")->required();
      cmd->add_option("--out", *out, "also write the report here");
      cmd->callback([=]() {
        state->load_config();
        const auto preds = query_intervals_from_jsonl(read_file(*pred));
        const auto gts = query_intervals_from_jsonl(read_file(*gt));
        std::map<std::string, std::size_t> query_pos;
        std::vector<std::string> query_ids;
        auto index_of = [&](const std::string& id) {
          const auto [it, inserted] = query_pos.emplace(id, query_ids.size());
          if (inserted) query_ids.push_back(id);
          return it->second;
        };
        std::vector<std::vector<ScoredMoment>> pred_by_query;
        std::vector<std::vector<Interval>> gt_by_query;
        for (const auto& g : gts) {
          const std::size_t q = index_of(g.query_id);
          if (q >= gt_by_query.size()) {
            gt_by_query.resize(q + 1);
            pred_by_query.resize(q + 1);
          }
          gt_by_query[q].push_back(g.interval);
        }
        for (const auto& p : preds) {
          const std::size_t q = index_of(p.query_id);
          if (q >= gt_by_query.size()) {
            gt_by_query.resize(q + 1);
            pred_by_query.resize(q + 1);
          }
          pred_by_query[q].push_back({p.interval, p.has_score ? p.score : 0.0});
        }
        const auto grid = default_iou_grid();
        const auto report = highlight_metrics(pred_by_query, gt_by_query, grid);
        OrderedJson j = highlight_report_to_json(report);
        OrderedJson skipped = OrderedJson::array();
        for (std::size_t q : report.skipped_queries) skipped.push_back(query_ids[q]);
        j["skipped_queries"] = std::move(skipped);
        write_report(j, *out, {*pred, *gt});
      });
    }
  }

  // ---- gradcheck ----
  {
    auto* cmd = app.add_subcommand("gradcheck", "finite-difference check of gradient routing");
    auto trials = std::make_shared<std::size_t>(100);
    auto seed = std::make_shared<std::uint64_t>(2024);
    cmd->add_option("--trials", *trials, "number of random triples");
    cmd->add_option("--seed", *seed, "rng seed");
    cmd->callback([=]() {
      const auto report = run_gradcheck(*trials, *seed);
      print_json_line(OrderedJson{
          {"trials", report.trials}, {"max_rel_err", report.max_rel_err}, {"pass", report.pass}});
      if (!report.pass) throw ValidationError("gradient check failed");
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const IoError& e) {
    std::cerr << OrderedJson{{"type", "io"}, {"error", e.what()}}.dump() << "\n";
    return 2;
  } catch (const ClientError& e) {
    std::cerr << OrderedJson{{"type", "client"}, {"error", e.what()}}.dump() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << OrderedJson{{"type", "validation"}, {"error", e.what()}}.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << OrderedJson{{"type", "internal"}, {"error", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}
