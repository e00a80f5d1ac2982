#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "tempokit/errors.hpp"
#include "tempokit/math.hpp"
#include "tempokit/rng.hpp"
#include "tempokit/temporal_space.hpp"

namespace tempokit {

// Full-batch gradient-descent setup over a seeded token space. Plain descent,
// no momentum, so the single-step update law stays exactly checkable.
struct TrainConfig {
  std::size_t n_anchors = 64;
  std::size_t dim = 16;
  double learning_rate = 0.1;
  std::size_t steps = 500;
  std::vector<std::size_t> supervised_indices;  // 1-based token indices
  Matrix targets;                               // |K| x dim, row order matches indices
  bool ntp_enabled = true;
  bool include_self_term = true;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (n_anchors < 2) throw ValidationError("train config: need at least 2 anchors");
    if (dim == 0) throw ValidationError("train config: need a positive dim");
    if (!(learning_rate > 0.0)) throw ValidationError("train config: learning rate must be > 0");
    if (supervised_indices.empty()) throw ValidationError("train config: empty supervised set");
    std::set<std::size_t> seen;
    for (std::size_t k : supervised_indices) {
      if (k < 1 || k > n_anchors) {
        throw ValidationError("train config: supervised index " + std::to_string(k) +
                              " outside 1.." + std::to_string(n_anchors));
      }
      if (!seen.insert(k).second) {
        throw ValidationError("train config: duplicate supervised index " + std::to_string(k));
      }
    }
    if (targets.rows != supervised_indices.size() || targets.cols != dim) {
      throw ShapeError("train config: targets must be |K| x dim");
    }
    if (!targets.all_finite()) throw ValidationError("train config: targets must be finite");
  }
};

struct TrainResult {
  TemporalTokenSpace space;
  // loss before each step plus the final loss, so loss_curve[0] is the
  // untrained loss and loss_curve[steps] the result.
  std::vector<double> loss_curve;
};

// Minimizes sum_k ||ntp_forward(space, k) - target_k||^2. Gradients are
// routed per token index, so without propagation anchors outside the
// supervised set are bitwise untouched.
inline TrainResult train_anchors(const TrainConfig& config) {
  config.validate();
  TrainResult result;
  result.space = TemporalTokenSpace::seeded(config.n_anchors, config.dim, config.rng_seed);
  auto& anchors = result.space.anchors;
  const NtpOptions opts{config.ntp_enabled, config.include_self_term};

  for (std::size_t step = 0; step <= config.steps; ++step) {
    double loss = 0.0;
    for (std::size_t ki = 0; ki < config.supervised_indices.size(); ++ki) {
      const auto row = anchors.row(config.supervised_indices[ki] - 1);
      loss += std::pow(l2_distance(row, config.targets.row(ki)), 2);
    }
    if (!std::isfinite(loss)) throw TrainingError("loss diverged to a non-finite value", step);
    result.loss_curve.push_back(loss);
    if (step == config.steps) break;

    Matrix grad(config.n_anchors, config.dim);
    std::vector<double> upstream(config.dim);
    for (std::size_t ki = 0; ki < config.supervised_indices.size(); ++ki) {
      const std::size_t token = config.supervised_indices[ki];
      const auto row = anchors.row(token - 1);
      const auto target = config.targets.row(ki);
      for (std::size_t j = 0; j < config.dim; ++j) upstream[j] = 2.0 * (row[j] - target[j]);
      detail::accumulate_anchor_grad(result.space, position_of_token(result.space, token),
                                     upstream, opts, grad);
    }
    for (std::size_t i = 0; i < grad.data.size(); ++i) {
      const double g = grad.data[i];
      if (g == 0.0) continue;  // leave unrouted anchors bitwise intact
      anchors.data[i] -= config.learning_rate * g;
    }
  }
  return result;
}

struct PcaResult {
  std::vector<double> scores;     // per-row projection on the first component
  std::vector<double> component;  // unit first principal direction
};

// First principal component by power iteration on the covariance of the
// mean-centered rows. Tolerance 1e-10, at most 10000 iterations, seeded
// start vector. Sign fixed so the largest-magnitude entry is positive.
inline PcaResult pca_first_component(const Matrix& m, std::uint64_t seed = 0) {
  if (m.rows < 2) throw ValidationError("pca: need at least two rows");
  const std::size_t n = m.rows, d = m.cols;

  Matrix centered = m;
  for (std::size_t j = 0; j < d; ++j) {
    double mu = 0.0;
    for (std::size_t i = 0; i < n; ++i) mu += centered.at(i, j);
    mu /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) centered.at(i, j) -= mu;
  }

  Matrix cov(d, d);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += centered.at(i, a) * centered.at(i, b);
      s /= static_cast<double>(n - 1);
      cov.at(a, b) = s;
      cov.at(b, a) = s;
    }
  }
  double total_var = 0.0;
  for (std::size_t a = 0; a < d; ++a) total_var += cov.at(a, a);
  if (total_var == 0.0) throw DegenerateInputError("pca: zero-variance input");

  Rng rng(seed);
  std::vector<double> v(d), next(d);
  for (double& x : v) x = rng.gaussian();
  double norm = l2_norm(v);
  for (double& x : v) x /= norm;

  constexpr double kTol = 1e-10;
  constexpr std::size_t kMaxIter = 10000;
  for (std::size_t it = 0; it < kMaxIter; ++it) {
    for (std::size_t a = 0; a < d; ++a) {
      double s = 0.0;
      for (std::size_t b = 0; b < d; ++b) s += cov.at(a, b) * v[b];
      next[a] = s;
    }
    norm = l2_norm(next);
    if (norm == 0.0) {
      // start vector landed in the null space; redraw
      for (double& x : v) x = rng.gaussian();
      norm = l2_norm(v);
      for (double& x : v) x /= norm;
      continue;
    }
    for (double& x : next) x /= norm;
    double delta = 0.0;
    for (std::size_t a = 0; a < d; ++a) delta = std::max(delta, std::abs(next[a] - v[a]));
    v = next;
    if (delta <= kTol) break;
  }

  std::size_t argmax = 0;
  for (std::size_t a = 1; a < d; ++a) {
    if (std::abs(v[a]) > std::abs(v[argmax])) argmax = a;
  }
  if (v[argmax] < 0.0) {
    for (double& x : v) x = -x;
  }

  PcaResult out;
  out.component = v;
  out.scores.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.scores[i] = dot(centered.row(i), v);
  return out;
}

// Continuity summary of a trained anchor matrix relative to its init.
struct ContinuityReport {
  double adjacent_mean_cos = 0.0;       // mean cos over all (k, k+1) anchor pairs
  double random_mean_cos = 0.0;         // mean cos over 1000 seeded non-adjacent pairs
  double pca1_spearman = 0.0;           // |Spearman| of (anchor index, first PC score)
  double unsupervised_displacement = 0.0;  // max L2 movement among unsupervised anchors
};

struct ContinuityArm {
  ContinuityReport report;
  std::vector<double> pca_scores;  // per-anchor first-PC score, for CSV plotting
  std::vector<double> loss_curve;
  TemporalTokenSpace space;
};

struct ContinuityOutcome {
  ContinuityArm with_ntp;
  ContinuityArm without_ntp;
};

namespace detail {

inline ContinuityReport continuity_report(const TemporalTokenSpace& trained,
                                          const TemporalTokenSpace& initial,
                                          const std::vector<std::size_t>& supervised,
                                          std::uint64_t pair_seed,
                                          std::vector<double>* pca_scores_out) {
  ContinuityReport r;
  const std::size_t n = trained.n_anchors;

  double adj = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    adj += cosine_or_zero(trained.anchor(i), trained.anchor(i + 1));
  }
  r.adjacent_mean_cos = adj / static_cast<double>(n - 1);

  Rng rng(pair_seed);
  constexpr std::size_t kPairs = 1000;
  double rnd = 0.0;
  for (std::size_t p = 0; p < kPairs; ++p) {
    std::size_t i = rng.uniform_index(n), j = rng.uniform_index(n);
    while (i == j || (i > j ? i - j : j - i) < 2) {
      i = rng.uniform_index(n);
      j = rng.uniform_index(n);
    }
    rnd += cosine_or_zero(trained.anchor(i), trained.anchor(j));
  }
  r.random_mean_cos = rnd / static_cast<double>(kPairs);

  const PcaResult pca = pca_first_component(trained.anchors);
  std::vector<double> index(n);
  for (std::size_t i = 0; i < n; ++i) index[i] = static_cast<double>(i);
  r.pca1_spearman = std::abs(spearman(pca.scores, index));
  if (pca_scores_out) *pca_scores_out = pca.scores;

  std::set<std::size_t> sup(supervised.begin(), supervised.end());
  double max_disp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (sup.count(i + 1)) continue;
    max_disp = std::max(max_disp, l2_distance(trained.anchor(i), initial.anchor(i)));
  }
  r.unsupervised_displacement = max_disp;
  return r;
}

}  // namespace detail

// Smooth quarter-period sinusoid over the index range, one phase offset per
// dimension; the resulting curve traces an arc whose first PC is monotone in
// the index.
inline Matrix sinusoidal_targets(std::size_t n_anchors, std::size_t dim,
                                 const std::vector<std::size_t>& indices) {
  Matrix t(indices.size(), dim);
  for (std::size_t ki = 0; ki < indices.size(); ++ki) {
    const double u =
        static_cast<double>(indices[ki] - 1) / static_cast<double>(n_anchors - 1);
    for (std::size_t j = 0; j < dim; ++j) {
      const double phase = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(dim);
      t.at(ki, j) = std::sin(0.5 * std::numbers::pi * u + phase);
    }
  }
  return t;
}

// Default experiment scale: every 8th anchor supervised with smooth targets.
inline TrainConfig default_continuity_config() {
  TrainConfig c;
  c.n_anchors = 64;
  c.dim = 16;
  c.learning_rate = 0.1;
  c.steps = 500;
  c.rng_seed = 5;
  for (std::size_t k = 1; k <= c.n_anchors; k += 8) c.supervised_indices.push_back(k);
  c.targets = sinusoidal_targets(c.n_anchors, c.dim, c.supervised_indices);
  return c;
}

// Trains the same seeded space twice, with and without neighbor propagation,
// and reports how continuous each learned token space ended up.
inline ContinuityOutcome continuity_experiment(const TrainConfig& base) {
  base.validate();
  const std::uint64_t pair_seed = base.rng_seed ^ 0x9e3779b97f4a7c15ULL;
  const TemporalTokenSpace initial =
      TemporalTokenSpace::seeded(base.n_anchors, base.dim, base.rng_seed);

  ContinuityOutcome out;
  for (bool ntp : {true, false}) {
    TrainConfig cfg = base;
    cfg.ntp_enabled = ntp;
    ContinuityArm& arm = ntp ? out.with_ntp : out.without_ntp;
    TrainResult trained = train_anchors(cfg);
    arm.report = detail::continuity_report(trained.space, initial, cfg.supervised_indices,
                                           pair_seed, &arm.pca_scores);
    arm.loss_curve = std::move(trained.loss_curve);
    arm.space = std::move(trained.space);
  }
  return out;
}

}  // namespace tempokit
