#include <sys/wait.h>

#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "pipeline_fixture.hpp"
#include "tempokit/json_io.hpp"
#include "tempokit/temporal_space.hpp"

using namespace tempokit;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code;
  std::string out;
  std::string err;
};

fs::path work_dir() {
  const fs::path dir = fs::temp_directory_path() / "tempokit_cli_test";
  fs::create_directories(dir);
  return dir;
}

RunResult run_cli(const std::string& args) {
  const fs::path dir = work_dir();
  const std::string out_path = (dir / "_stdout.txt").string();
  const std::string err_path = (dir / "_stderr.txt").string();
  const std::string cmd =
      std::string(TEMPOKIT_CLI_PATH) + " " + args + " > " + out_path + " 2> " + err_path;
  const int rc = std::system(cmd.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  result.out = read_file(out_path);
  result.err = read_file(err_path);
  return result;
}

bool regen_goldens() { return std::getenv("TEMPOKIT_REGEN_GOLDENS") != nullptr; }

// Compare a produced file against its checked-in golden; with
// TEMPOKIT_REGEN_GOLDENS set, (re)write the golden instead.
void check_golden(const fs::path& actual_path, const std::string& golden_rel) {
  const fs::path golden = fs::path(TEMPOKIT_TEST_DIR) / "golden" / "pipeline" / golden_rel;
  const std::string actual = read_file(actual_path);
  if (regen_goldens()) {
    fs::create_directories(golden.parent_path());
    write_file(golden, actual);
    return;
  }
  INFO("golden file: " << golden.string());
  REQUIRE(actual == read_file(golden));
}

const fs::path& fixture_dir() {
  static const fs::path dir = [] {
    const fs::path d = work_dir() / "fixture";
    pipeline_fixture::write_all(d);
    return d;
  }();
  return dir;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_CASE("full pipeline reproduces the checked-in goldens") {
  const fs::path fx = fixture_dir();
  for (const char* name :
       {"frames.jsonl", "luma.raw", "detections.jsonl", "clues.jsonl", "plan.json",
        "config.json"}) {
    check_golden(fx / name, std::string("inputs/") + name);
  }

  const fs::path out1 = work_dir() / "run_jobs1";
  fs::create_directories(out1);
  const std::string cfg = "--config " + q(fx / "config.json") + " ";

  auto run_chain = [&](const fs::path& out, const std::string& jobs) {
    RunResult r = run_cli(cfg + jobs + " segment --frames " + q(fx / "frames.jsonl") +
                          " --out " + q(out / "events.jsonl"));
    INFO(r.err);
    REQUIRE(r.exit_code == 0);
    r = run_cli(cfg + jobs + " track --detections " + q(fx / "detections.jsonl") + " --out " +
                q(out / "tracks.jsonl"));
    INFO(r.err);
    REQUIRE(r.exit_code == 0);
    r = run_cli(cfg + jobs + " matrix --tracks " + q(out / "tracks.jsonl") + " --events " +
                q(out / "events.jsonl") + " --clues " + q(fx / "clues.jsonl") + " --out " +
                q(out / "matrix.json"));
    INFO(r.err);
    REQUIRE(r.exit_code == 0);
    r = run_cli(cfg + jobs + " gen --matrix " + q(out / "matrix.json") + " --plan " +
                q(fx / "plan.json") + " --client mock --out " + q(out / "instructions.jsonl"));
    INFO(r.err);
    REQUIRE(r.exit_code == 0);
  };

  run_chain(out1, "--jobs 1");
  for (const char* name : {"events.jsonl", "tracks.jsonl", "matrix.json", "instructions.jsonl"}) {
    check_golden(out1 / name, std::string("outputs/") + name);
    check_golden(out1 / (std::string(name) + ".prov.json"),
                 std::string("outputs/") + name + ".prov.json");
  }
  // the mock run never skips records
  REQUIRE_FALSE(fs::exists(out1 / "instructions.jsonl.issues.jsonl"));

  SECTION("a parallel run is byte-identical") {
    const fs::path out8 = work_dir() / "run_jobs8";
    fs::create_directories(out8);
    run_chain(out8, "--jobs 8");
    for (const char* name :
         {"events.jsonl", "tracks.jsonl", "matrix.json", "instructions.jsonl"}) {
      REQUIRE(read_file(out8 / name) == read_file(out1 / name));
    }
  }

  SECTION("re-running is byte-identical, provenance included") {
    const fs::path out2 = work_dir() / "run_again";
    fs::create_directories(out2);
    run_chain(out2, "--jobs 1");
    for (const char* name :
         {"events.jsonl", "tracks.jsonl", "matrix.json", "instructions.jsonl"}) {
      REQUIRE(read_file(out2 / name) == read_file(out1 / name));
      REQUIRE(read_file(out2 / (std::string(name) + ".prov.json")) ==
              read_file(out1 / (std::string(name) + ".prov.json")));
    }
  }
}

TEST_CASE("segment runs several videos in parallel") {
  const fs::path fx = fixture_dir();
  const fs::path multi = work_dir() / "multi_in";
  fs::create_directories(multi);
  fs::copy_file(fx / "frames.jsonl", multi / "a.jsonl", fs::copy_options::overwrite_existing);
  fs::copy_file(fx / "frames.jsonl", multi / "b.jsonl", fs::copy_options::overwrite_existing);
  fs::copy_file(fx / "luma.raw", multi / "luma.raw", fs::copy_options::overwrite_existing);

  const fs::path out = work_dir() / "multi_out";
  const RunResult r =
      run_cli("--jobs 4 segment --frames " + q(multi / "a.jsonl") + " --frames " +
              q(multi / "b.jsonl") + " --out " + q(out));
  INFO(r.err);
  REQUIRE(r.exit_code == 0);
  REQUIRE(fs::exists(out / "a.events.jsonl"));
  REQUIRE(read_file(out / "a.events.jsonl") == read_file(out / "b.events.jsonl"));
}

TEST_CASE("encode-time and decode-time single-value utilities") {
  const fs::path dir = work_dir();
  const fs::path space_path = dir / "s.bin";
  RunResult r = run_cli("space init --n 5 --dim 4 --seed 9 --out " + q(space_path));
  REQUIRE(r.exit_code == 0);
  REQUIRE(fs::exists(dir / "s.bin.prov.json"));

  r = run_cli("encode-time --n 5 --tau 0.625 --space " + q(space_path));
  REQUIRE(r.exit_code == 0);
  const auto emb = nlohmann::json::parse(r.out);
  REQUIRE(emb.is_array());
  REQUIRE(emb.size() == 4);
  const auto space = load_space(space_path);
  const auto expected = encode_time(space, NormalizedTime{0.625});
  for (std::size_t j = 0; j < 4; ++j) REQUIRE(emb[j].get<double>() == expected[j]);

  r = run_cli("decode-time --space " + q(space_path) + " --embedding '" +
              nlohmann::json(expected).dump() + "'");
  REQUIRE(r.exit_code == 0);
  const auto decoded = nlohmann::json::parse(r.out);
  REQUIRE(decoded.at("tau").get<double>() == Catch::Approx(0.625).margin(1e-9));
  REQUIRE(decoded.at("residual").get<double>() <= 1e-9);

  // --n that disagrees with the space file is a validation error
  r = run_cli("encode-time --n 7 --tau 0.5 --space " + q(space_path));
  REQUIRE(r.exit_code == 1);
  REQUIRE_THAT(r.err, Catch::Matchers::ContainsSubstring("validation"));
}

TEST_CASE("metrics subcommands print JSON reports") {
  const fs::path dir = work_dir() / "metrics";
  fs::create_directories(dir);

  std::string gt;
  gt += OrderedJson{{"query_id", "q1"}, {"start", 0.0}, {"end", 10.0}}.dump() + "\n";
  gt += OrderedJson{{"query_id", "q2"}, {"start", 5.0}, {"end", 9.0}}.dump() + "\n";
  write_file(dir / "gt.jsonl", gt);
  write_file(dir / "pred.jsonl", gt);  // predictions equal ground truth

  RunResult r = run_cli("metrics grounding --pred " + q(dir / "pred.jsonl") + " --gt " +
                        q(dir / "gt.jsonl"));
  REQUIRE(r.exit_code == 0);
  auto report = nlohmann::json::parse(r.out);
  REQUIRE(report.at("mean_iou").get<double>() == 1.0);
  REQUIRE(report.at("recall").at("R@0.50").get<double>() == 1.0);

  std::string seg;
  seg += OrderedJson{{"label", "pour"}, {"start", 0.0}, {"end", 8.0}}.dump() + "\n";
  seg += OrderedJson{{"label", "stir"}, {"start", 8.0}, {"end", 16.0}}.dump() + "\n";
  write_file(dir / "seg.jsonl", seg);
  r = run_cli("metrics actionseg --pred " + q(dir / "seg.jsonl") + " --gt " +
              q(dir / "seg.jsonl") + " --fps 2");
  REQUIRE(r.exit_code == 0);
  report = nlohmann::json::parse(r.out);
  REQUIRE(report.at("mof").get<double>() == 1.0);
  REQUIRE(report.at("f1").at("F1@0.50").get<double>() == 1.0);

  std::string moments;
  moments += OrderedJson{{"query_id", "q1"}, {"start", 0.0}, {"end", 10.0}, {"score", 0.9}}.dump() +
             "\n";
  write_file(dir / "moments.jsonl", moments);
  std::string hgt;
  hgt += OrderedJson{{"query_id", "q1"}, {"start", 0.0}, {"end", 10.0}}.dump() + "\n";
  write_file(dir / "hgt.jsonl", hgt);
  r = run_cli("metrics highlight --pred " + q(dir / "moments.jsonl") + " --gt " +
              q(dir / "hgt.jsonl") + " --out " + q(dir / "hl.json"));
  REQUIRE(r.exit_code == 0);
  report = nlohmann::json::parse(r.out);
  REQUIRE(report.at("map").get<double>() == 1.0);
  REQUIRE(report.at("r1_at_0.5").get<double>() == 1.0);
  REQUIRE(fs::exists(dir / "hl.json.prov.json"));
}

TEST_CASE("seq render and parse round-trip through files") {
  const fs::path dir = work_dir() / "seq";
  fs::create_directories(dir);
  std::string events;
  events += OrderedJson{{"start_time", 0.155}, {"end_time", 0.3075},
                        {"caption", "A group of children"}}
                .dump() +
            "\n";
  events +=
      OrderedJson{{"start_time", 0.5}, {"end_time", 0.75}, {"caption", "a dog catches a ball"}}
          .dump() +
      "\n";
  write_file(dir / "events.jsonl", events);

  RunResult r = run_cli("seq render --events " + q(dir / "events.jsonl") +
                        " --format seconds --duration 100 --out " + q(dir / "seq.txt"));
  REQUIRE(r.exit_code == 0);
  const std::string text = read_file(dir / "seq.txt");
  REQUIRE(text.starts_with("#format=seconds;duration=100\n15.50s-30.75s : A group of children\n"));

  r = run_cli("seq parse --in " + q(dir / "seq.txt") + " --out " + q(dir / "parsed.jsonl"));
  REQUIRE(r.exit_code == 0);
  REQUIRE(read_file(dir / "parsed.jsonl") == events);
}

TEST_CASE("continuity subcommand writes a report and CSVs") {
  const fs::path dir = work_dir() / "continuity";
  const RunResult r = run_cli("continuity --n 16 --dim 4 --steps 25 --every 4 --seed 3 --out-dir " +
                              q(dir));
  INFO(r.err);
  REQUIRE(r.exit_code == 0);
  const auto report = nlohmann::json::parse(read_file(dir / "report.json"));
  for (const char* arm : {"with_ntp", "without_ntp"}) {
    for (const char* key : {"adjacent_mean_cos", "random_mean_cos", "pca1_spearman",
                            "unsupervised_displacement"}) {
      REQUIRE(report.at(arm).contains(key));
    }
  }
  REQUIRE(report.at("without_ntp").at("unsupervised_displacement").get<double>() == 0.0);
  const std::string csv = read_file(dir / "pca_with_ntp.csv");
  REQUIRE(csv.starts_with("index,pca1\n"));
  REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 17);  // header plus 16 anchors
  REQUIRE(fs::exists(dir / "report.json.prov.json"));
}

TEST_CASE("gradcheck runs the finite-difference suite") {
  const RunResult r = run_cli("gradcheck --trials 20 --seed 4");
  REQUIRE(r.exit_code == 0);
  const auto report = nlohmann::json::parse(r.out);
  REQUIRE(report.at("pass").get<bool>());
  REQUIRE(report.at("max_rel_err").get<double>() < 1e-6);
}

TEST_CASE("CLI error handling and exit codes") {
  SECTION("unknown subcommands print usage and exit 1") {
    const RunResult r = run_cli("frobnicate");
    REQUIRE(r.exit_code == 1);
  }

  SECTION("missing input files exit 2 with a JSON error line") {
    const RunResult r = run_cli("track --detections /nonexistent.jsonl --out /tmp/x.jsonl");
    REQUIRE(r.exit_code == 2);
    const auto err = nlohmann::json::parse(r.err);
    REQUIRE(err.at("type") == "io");
  }

  SECTION("unknown config keys are rejected") {
    const fs::path bad = work_dir() / "bad_config.json";
    write_file(bad, R"({"n_anchors": 10, "surprise": true})");
    const RunResult r = run_cli("--config " + q(bad) + " gradcheck --trials 1");
    REQUIRE(r.exit_code == 1);
    REQUIRE_THAT(r.err, Catch::Matchers::ContainsSubstring("surprise"));
  }

  SECTION("validation failures exit 1") {
    const fs::path dir = work_dir();
    run_cli("space init --n 5 --dim 4 --seed 9 --out " + q(dir / "s5.bin"));
    const RunResult r = run_cli("encode-time --tau 1.5 --space " + q(dir / "s5.bin"));
    REQUIRE(r.exit_code == 1);
    const auto err = nlohmann::json::parse(r.err);
    REQUIRE(err.at("type") == "validation");
    REQUIRE_THAT(err.at("error").get<std::string>(),
                 Catch::Matchers::ContainsSubstring("1.5"));
  }
}
