#include "tempokit/eval_metrics.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <vector>

#include "oracles.hpp"
#include "tempokit/rng.hpp"

using namespace tempokit;

namespace {

Interval rand_interval(Rng& rng, double span = 100.0) {
  const double a = span * rng.uniform();
  const double len = 1.0 + 0.2 * span * rng.uniform();
  return {a, a + len};
}

LabeledSegmentation random_covering_segmentation(Rng& rng, std::size_t max_segments,
                                                 const std::vector<std::string>& labels,
                                                 double span = 60.0) {
  LabeledSegmentation seg;
  const std::size_t n = 1 + rng.uniform_index(max_segments);
  std::vector<double> cuts = {0.0, span};
  for (std::size_t i = 1; i < n; ++i) cuts.push_back(span * rng.uniform());
  std::sort(cuts.begin(), cuts.end());
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] - cuts[i] < 1e-6) continue;
    seg.segments.push_back({{cuts[i], cuts[i + 1]}, labels[rng.uniform_index(labels.size())]});
  }
  if (seg.segments.empty()) seg.segments.push_back({{0.0, span}, labels[0]});
  return seg;
}

}  // namespace

TEST_CASE("interval_iou") {
  SECTION("identical intervals overlap fully") {
    REQUIRE(interval_iou({3.0, 8.0}, {3.0, 8.0}) == 1.0);
  }

  SECTION("touching intervals have zero intersection") {
    REQUIRE(interval_iou({0.0, 5.0}, {5.0, 10.0}) == 0.0);
  }

  SECTION("partial overlap follows the arithmetic") {
    REQUIRE(interval_iou({0.0, 10.0}, {5.0, 15.0}) == Catch::Approx(5.0 / 15.0).margin(1e-15));
  }

  SECTION("zero-length union scores zero") {
    REQUIRE(interval_iou({2.0, 2.0}, {2.0, 2.0}) == 0.0);
  }

  SECTION("symmetric, bounded and shift-invariant") {
    Rng rng(19);
    for (int t = 0; t < 200; ++t) {
      const Interval a = rand_interval(rng), b = rand_interval(rng);
      const double v = interval_iou(a, b);
      REQUIRE(v == interval_iou(b, a));
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
      const double shift = 64.0;  // power of two, exact in fp
      REQUIRE(interval_iou({a.start + shift, a.end + shift}, {b.start + shift, b.end + shift}) ==
              Catch::Approx(v).margin(1e-12));
    }
  }
}

TEST_CASE("grounding_metrics") {
  const std::vector<double> thresholds = {0.3, 0.5, 0.7};

  SECTION("perfect predictions max out every number") {
    const std::vector<Interval> gts = {{0.0, 5.0}, {10.0, 20.0}, {30.0, 31.0}};
    const auto report = grounding_metrics(gts, gts, thresholds);
    for (const auto& [t, r] : report.recall_at) REQUIRE(r == 1.0);
    REQUIRE(report.mean_iou == 1.0);
  }

  SECTION("fully disjoint predictions score zero") {
    const std::vector<Interval> preds = {{0.0, 1.0}, {2.0, 3.0}};
    const std::vector<Interval> gts = {{10.0, 11.0}, {20.0, 21.0}};
    const auto report = grounding_metrics(preds, gts, thresholds);
    for (const auto& [t, r] : report.recall_at) REQUIRE(r == 0.0);
    REQUIRE(report.mean_iou == 0.0);
  }

  SECTION("50 random query sets match the per-query oracle") {
    Rng rng(27);
    for (int t = 0; t < 50; ++t) {
      std::vector<Interval> preds, gts;
      const std::size_t n = 1 + rng.uniform_index(10);
      for (std::size_t i = 0; i < n; ++i) {
        preds.push_back(rand_interval(rng));
        gts.push_back(rand_interval(rng));
      }
      const auto report = grounding_metrics(preds, gts, thresholds);
      REQUIRE(report.mean_iou == Catch::Approx(oracles::mean_iou(preds, gts)).margin(1e-9));
      for (double thr : thresholds) {
        REQUIRE(report.recall_at.at(thr) ==
                Catch::Approx(oracles::recall_at(preds, gts, thr)).margin(1e-9));
      }
    }
  }

  SECTION("recall is monotone non-increasing in the threshold") {
    Rng rng(71);
    std::vector<Interval> preds, gts;
    for (int i = 0; i < 40; ++i) {
      preds.push_back(rand_interval(rng));
      gts.push_back(rand_interval(rng));
    }
    const std::vector<double> grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    const auto report = grounding_metrics(preds, gts, grid);
    double prev = 1.0;
    for (double t : grid) {
      REQUIRE(report.recall_at.at(t) <= prev + 1e-12);
      prev = report.recall_at.at(t);
    }
  }

  SECTION("misaligned lists are shape errors") {
    const std::vector<Interval> one = {{0.0, 1.0}};
    const std::vector<Interval> two = {{0.0, 1.0}, {1.0, 2.0}};
    REQUIRE_THROWS_AS(grounding_metrics(one, two, thresholds), ShapeError);
  }
}

TEST_CASE("action_seg_metrics") {
  const std::vector<double> overlaps = {0.10, 0.25, 0.50};

  SECTION("identical segmentations are perfect") {
    LabeledSegmentation gt;
    gt.segments = {{{0.0, 10.0}, "pour"}, {{10.0, 25.0}, "stir"}, {{25.0, 30.0}, "serve"}};
    const auto report = action_seg_metrics(gt, gt, overlaps, 2.0);
    REQUIRE(report.mof == 1.0);
    for (const auto& [k, f1] : report.f1_at) REQUIRE(f1 == 1.0);
  }

  SECTION("half-right frame labels give MoF one half") {
    // alternating two-class ground truth; prediction constant 'a'
    LabeledSegmentation gt, pred;
    for (int i = 0; i < 10; ++i) {
      gt.segments.push_back({{static_cast<double>(i), static_cast<double>(i + 1)},
                             i % 2 ? "b" : "a"});
    }
    pred.segments = {{{0.0, 10.0}, "a"}};
    const auto report = action_seg_metrics(pred, gt, overlaps, 1.0);
    REQUIRE(report.mof == 0.5);
  }

  SECTION("identity holds only for identical segmentations") {
    LabeledSegmentation gt;
    gt.segments = {{{0.0, 10.0}, "pour"}, {{10.0, 20.0}, "stir"}};
    LabeledSegmentation off;
    off.segments = {{{0.0, 12.0}, "pour"}, {{12.0, 20.0}, "stir"}};
    const auto report = action_seg_metrics(off, gt, overlaps, 4.0);
    REQUIRE(report.mof < 1.0);
  }

  SECTION("randomized small cases match independent greedy and optimal matching") {
    Rng rng(83);
    const std::vector<std::string> labels = {"a", "b", "c"};
    std::size_t greedy_vs_optimal_gaps = 0;
    for (int t = 0; t < 60; ++t) {
      const auto gt = random_covering_segmentation(rng, 6, labels);
      auto pred = random_covering_segmentation(rng, 6, labels);
      const auto report = action_seg_metrics(pred, gt, overlaps, 4.0);
      for (double k : overlaps) {
        const std::size_t tp_greedy = oracles::greedy_f1_tp(pred.segments, gt.segments, k);
        const std::size_t tp_opt = oracles::optimal_f1_tp(pred.segments, gt.segments, k);
        REQUIRE(report.f1_at.at(k) ==
                Catch::Approx(oracles::f1_from_tp(tp_greedy, pred.segments.size(),
                                                  gt.segments.size()))
                    .margin(1e-9));
        REQUIRE(tp_greedy <= tp_opt);
        if (tp_greedy != tp_opt) {
          ++greedy_vs_optimal_gaps;  // surfaced: greedy missed an optimal matching
          WARN("greedy matching differs from optimal at overlap " << k << " (trial " << t << ")");
        }
      }
    }
    // at this scale the greedy rule should essentially always be optimal
    REQUIRE(greedy_vs_optimal_gaps <= 2);
  }

  SECTION("empty ground truth is an input error") {
    LabeledSegmentation pred;
    pred.segments = {{{0.0, 1.0}, "a"}};
    REQUIRE_THROWS_AS(action_seg_metrics(pred, {}, overlaps, 1.0), ValidationError);
  }

  SECTION("a uniform rescale of times and rate leaves the report unchanged") {
    Rng rng(29);
    const std::vector<std::string> labels = {"a", "b"};
    const auto gt = random_covering_segmentation(rng, 5, labels);
    const auto pred = random_covering_segmentation(rng, 5, labels);
    const auto base = action_seg_metrics(pred, gt, overlaps, 4.0);

    auto scale = [](LabeledSegmentation s, double f) {
      for (auto& seg : s.segments) {
        seg.interval.start *= f;
        seg.interval.end *= f;
      }
      return s;
    };
    const auto scaled = action_seg_metrics(scale(pred, 4.0), scale(gt, 4.0), overlaps, 1.0);
    REQUIRE(scaled.mof == Catch::Approx(base.mof).margin(1e-12));
    for (double k : overlaps) {
      REQUIRE(scaled.f1_at.at(k) == Catch::Approx(base.f1_at.at(k)).margin(1e-12));
    }
  }
}

TEST_CASE("highlight_metrics") {
  SECTION("a single exact prediction is perfect") {
    const std::vector<std::vector<ScoredMoment>> preds = {{{{10.0, 20.0}, 0.9}}};
    const std::vector<std::vector<Interval>> gts = {{{10.0, 20.0}}};
    const auto report = highlight_metrics(preds, gts, default_iou_grid());
    REQUIRE(report.map == 1.0);
    REQUIRE(report.r1_at_05 == 1.0);
  }

  SECTION("IoU 0.6 against a four-threshold grid averages to 0.75") {
    // pred [0, 6], gt [0, 10]: intersection 6, union 10, IoU 0.6
    const std::vector<std::vector<ScoredMoment>> preds = {{{{0.0, 6.0}, 1.0}}};
    const std::vector<std::vector<Interval>> gts = {{{0.0, 10.0}}};
    const std::vector<double> grid = {0.5, 0.55, 0.6, 0.65};
    const auto report = highlight_metrics(preds, gts, grid);
    REQUIRE(report.map == Catch::Approx(0.75).margin(1e-12));
  }

  SECTION("random multi-query cases match the brute-force re-implementation") {
    Rng rng(37);
    const auto grid = default_iou_grid();
    for (int t = 0; t < 50; ++t) {
      const std::size_t queries = 1 + rng.uniform_index(5);
      std::vector<std::vector<ScoredMoment>> preds(queries);
      std::vector<std::vector<Interval>> gts(queries);
      for (std::size_t q = 0; q < queries; ++q) {
        const std::size_t np = rng.uniform_index(10);
        for (std::size_t i = 0; i < np; ++i) {
          preds[q].push_back({rand_interval(rng), rng.uniform()});
        }
        const std::size_t ng = 1 + rng.uniform_index(4);
        for (std::size_t i = 0; i < ng; ++i) gts[q].push_back(rand_interval(rng));
      }
      const auto report = highlight_metrics(preds, gts, grid);

      double map_sum = 0.0;
      for (std::size_t q = 0; q < queries; ++q) {
        double ap_sum = 0.0;
        for (double thr : grid) ap_sum += oracles::average_precision(preds[q], gts[q], thr);
        map_sum += ap_sum / static_cast<double>(grid.size());
      }
      REQUIRE(report.map == Catch::Approx(map_sum / static_cast<double>(queries)).margin(1e-9));
    }
  }

  SECTION("queries with empty ground truth are excluded and reported") {
    const std::vector<std::vector<ScoredMoment>> preds = {{{{0.0, 5.0}, 1.0}}, {{{0.0, 5.0}, 1.0}}};
    const std::vector<std::vector<Interval>> gts = {{}, {{0.0, 5.0}}};
    const auto report = highlight_metrics(preds, gts, default_iou_grid());
    REQUIRE(report.skipped_queries == std::vector<std::size_t>{0});
    REQUIRE(report.map == 1.0);
    REQUIRE(report.r1_at_05 == 1.0);
  }

  SECTION("r1 counts only the single top-scored prediction") {
    const std::vector<std::vector<ScoredMoment>> preds = {
        {{{50.0, 60.0}, 0.9}, {{10.0, 20.0}, 0.4}}};  // top-ranked one misses
    const std::vector<std::vector<Interval>> gts = {{{10.0, 20.0}}};
    const auto report = highlight_metrics(preds, gts, default_iou_grid());
    REQUIRE(report.r1_at_05 == 0.0);
  }
}
