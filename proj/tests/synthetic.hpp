// Synthetic inputs for segmentation and pipeline tests: known boundaries,
// controlled noise.
#pragma once

#include <cstdint>
#include <vector>

#include "tempokit/event_segmentation.hpp"
#include "tempokit/rng.hpp"
#include "tempokit/temporal_space.hpp"

namespace synthetic {

using tempokit::Event;
using tempokit::FrameRecord;
using tempokit::NormalizedTime;
using tempokit::Rng;

struct BoundaryFixture {
  std::vector<FrameRecord> frames;          // orthogonal block features, no luma
  std::vector<double> scores;               // noisy difference scores with spikes
  std::vector<std::size_t> true_boundaries; // score indices of the injected spikes
};

// 120 frames in 5 blocks; spikes of height 0.8 over a 0.1 baseline with
// Gaussian noise sigma 0.02. Block features are mutually orthogonal so the
// consistency merge never joins blocks.
inline BoundaryFixture make_boundary_fixture(std::uint64_t seed) {
  constexpr std::size_t kFrames = 120;
  BoundaryFixture fx;
  fx.true_boundaries = {23, 47, 71, 95};

  Rng rng(seed);
  fx.scores.resize(kFrames - 1);
  for (std::size_t i = 0; i < fx.scores.size(); ++i) {
    double s = 0.1 + 0.02 * rng.gaussian();
    if (s < 0.0) s = 0.0;
    fx.scores[i] = s;
  }
  for (std::size_t b : fx.true_boundaries) fx.scores[b] = 0.8;

  for (std::size_t i = 0; i < kFrames; ++i) {
    FrameRecord f;
    f.index = static_cast<std::int64_t>(i);
    f.time = NormalizedTime{static_cast<double>(i) / static_cast<double>(kFrames - 1)};
    std::size_t block = 0;
    for (std::size_t b : fx.true_boundaries) {
      if (i > b) ++block;
    }
    f.feature.assign(8, 0.0);
    f.feature[block] = 1.0;
    fx.frames.push_back(std::move(f));
  }
  return fx;
}

}  // namespace synthetic
