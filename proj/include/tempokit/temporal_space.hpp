#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tempokit/errors.hpp"
#include "tempokit/math.hpp"
#include "tempokit/rng.hpp"

namespace tempokit {

// Fraction of the video duration, in [0, 1].
struct NormalizedTime {
  double tau = 0.0;

  // Validates the value. Float noise within kSlack of the endpoints is
  // clamped; anything further out raises RangeError naming the value.
  static NormalizedTime checked(double raw) {
    constexpr double kSlack = 1e-12;
    if (!(raw >= -kSlack && raw <= 1.0 + kSlack)) {
      throw RangeError("normalized time " + std::to_string(raw) + " outside [0, 1]");
    }
    if (raw < 0.0) raw = 0.0;
    if (raw > 1.0) raw = 1.0;
    return NormalizedTime{raw};
  }

  static NormalizedTime from_seconds(double seconds, double duration_seconds) {
    if (!(duration_seconds > 0.0)) {
      throw ValidationError("video duration must be positive, got " +
                            std::to_string(duration_seconds));
    }
    return checked(seconds / duration_seconds);
  }

  double seconds(double duration_seconds) const { return tau * duration_seconds; }

  friend bool operator==(NormalizedTime a, NormalizedTime b) { return a.tau == b.tau; }
};

// N learnable anchor embeddings spanning the normalized timeline. Anchor k
// (1-based token <k>) sits at tau = (k-1)/(N-1), so the two endpoints are
// anchored and the curve between anchors is defined by interpolation.
struct TemporalTokenSpace {
  std::size_t n_anchors = 0;
  std::size_t dim = 0;
  std::uint64_t rng_seed = 0;
  Matrix anchors;  // n_anchors x dim

  // Gaussian init, mean 0, stddev 0.02, fully determined by the seed.
  static TemporalTokenSpace seeded(std::size_t n_anchors, std::size_t dim, std::uint64_t seed) {
    TemporalTokenSpace s;
    s.n_anchors = n_anchors;
    s.dim = dim;
    s.rng_seed = seed;
    s.anchors = Matrix(n_anchors, dim);
    Rng rng(seed);
    for (double& v : s.anchors.data) v = rng.gaussian(0.0, 0.02);
    s.validate();
    return s;
  }

  void validate() const {
    if (n_anchors < 2) throw ValidationError("token space needs at least 2 anchors");
    if (dim == 0) throw ValidationError("token space needs a positive embedding dim");
    if (anchors.rows != n_anchors || anchors.cols != dim) {
      throw ShapeError("anchor matrix shape does not match n_anchors x dim");
    }
    if (!anchors.all_finite()) throw ValidationError("anchor values must be finite");
  }

  std::span<const double> anchor(std::size_t row) const { return anchors.row(row); }
  std::span<double> anchor(std::size_t row) { return anchors.row(row); }

  // tau of the 0-based anchor row.
  double anchor_tau(std::size_t row) const {
    return static_cast<double>(row) / static_cast<double>(n_anchors - 1);
  }
};

// A point on the anchor curve: blend of rows `lower` and `lower + 1` with
// weights (1 - frac, frac). frac == 0 lands exactly on an anchor.
struct InterpolatedPosition {
  std::size_t lower = 0;
  double frac = 0.0;
};

inline InterpolatedPosition position_of(const TemporalTokenSpace& space, NormalizedTime t) {
  const double p = t.tau * static_cast<double>(space.n_anchors - 1);
  double a = std::floor(p);
  if (a > static_cast<double>(space.n_anchors - 2)) a = static_cast<double>(space.n_anchors - 2);
  return {static_cast<std::size_t>(a), p - a};
}

inline InterpolatedPosition position_of_token(const TemporalTokenSpace& space, std::size_t token) {
  if (token < 1 || token > space.n_anchors) {
    throw RangeError("token index " + std::to_string(token) + " outside 1.." +
                     std::to_string(space.n_anchors));
  }
  return {token - 1, 0.0};
}

// Embedding of an arbitrary normalized time: piecewise-linear interpolation
// between the two surrounding anchors. Endpoints reproduce the anchor rows
// with zero arithmetic error.
inline std::vector<double> encode_time(const TemporalTokenSpace& space, NormalizedTime t) {
  const auto [a, f] = position_of(space, t);
  const auto lo = space.anchor(a);
  const auto hi = space.anchor(a + 1);
  std::vector<double> out(space.dim);
  for (std::size_t j = 0; j < space.dim; ++j) out[j] = (1.0 - f) * lo[j] + f * hi[j];
  return out;
}

struct DecodeResult {
  NormalizedTime tau;
  double residual = 0.0;  // Euclidean distance from the embedding to the curve
};

// Nearest point on the piecewise-linear anchor curve, by closed-form
// projection onto each of the N-1 segments. Ties go to the smallest tau.
// The exact inverse of encode_time for embeddings on the curve.
inline DecodeResult decode_time(const TemporalTokenSpace& space,
                                std::span<const double> embedding) {
  if (embedding.size() != space.dim) {
    throw ShapeError("embedding has dim " + std::to_string(embedding.size()) + ", space has " +
                     std::to_string(space.dim));
  }
  const std::size_t segments = space.n_anchors - 1;
  double best_d2 = std::numeric_limits<double>::infinity();
  double best_tau = 0.0;
  for (std::size_t k = 0; k < segments; ++k) {
    const auto a = space.anchor(k);
    const auto b = space.anchor(k + 1);
    double dd = 0.0, de = 0.0;
    for (std::size_t j = 0; j < space.dim; ++j) {
      const double d = b[j] - a[j];
      dd += d * d;
      de += d * (embedding[j] - a[j]);
    }
    double t = dd == 0.0 ? 0.0 : de / dd;
    t = std::clamp(t, 0.0, 1.0);
    double d2 = 0.0;
    for (std::size_t j = 0; j < space.dim; ++j) {
      const double r = a[j] + t * (b[j] - a[j]) - embedding[j];
      d2 += r * r;
    }
    if (d2 < best_d2) {
      best_d2 = d2;
      best_tau = (static_cast<double>(k) + t) / static_cast<double>(segments);
    }
  }
  return {NormalizedTime{best_tau}, std::sqrt(best_d2)};
}

// Forward pass of neighbor propagation for token <k> (1-based). The adjusted
// value adds a neighbor sum and subtracts the same stored value detached, so
// the returned embedding is the anchor row itself, bit for bit; the mechanism
// only reroutes gradients (see grad_wrt_anchors).
inline std::vector<double> ntp_forward(const TemporalTokenSpace& space, std::size_t token) {
  const auto pos = position_of_token(space, token);
  const auto row = space.anchor(pos.lower);
  return {row.begin(), row.end()};
}

struct NtpOptions {
  bool enabled = true;
  // Literal reading of the propagation sum keeps the i == k term, giving the
  // token's own anchor total weight 2 (identity + self term). Switch off to
  // drop the self term (weight 1) for ablation.
  bool include_self_term = true;
};

struct AnchorGradients {
  Matrix grad;                    // same shape as the anchor matrix
  std::vector<double> upstream;   // the upstream gradient that produced it
};

namespace detail {

// Weight of anchor i in the gradient of propagated token k (both 0-based).
inline double ntp_weight(std::size_t i, std::size_t k, bool include_self_term) {
  const std::size_t dist = i > k ? i - k : k - i;
  double w = (i == k) ? 1.0 : 0.0;
  if (i != k || include_self_term) {
    w += std::ldexp(1.0, -static_cast<int>(dist));  // exact 2^-dist, underflows to 0 far out
  }
  return w;
}

inline void accumulate_anchor_grad(const TemporalTokenSpace& space, InterpolatedPosition pos,
                                   std::span<const double> upstream, const NtpOptions& opts,
                                   Matrix& grad) {
  if (upstream.size() != space.dim) {
    throw ShapeError("upstream has dim " + std::to_string(upstream.size()) + ", space has " +
                     std::to_string(space.dim));
  }
  const double wl = 1.0 - pos.frac;
  const double wh = pos.frac;
  for (std::size_t i = 0; i < space.n_anchors; ++i) {
    double w;
    if (opts.enabled) {
      w = wl * ntp_weight(i, pos.lower, opts.include_self_term) +
          wh * ntp_weight(i, pos.lower + 1, opts.include_self_term);
    } else {
      w = (i == pos.lower ? wl : 0.0) + (i == pos.lower + 1 ? wh : 0.0);
    }
    if (w == 0.0) continue;  // keep untouched rows exactly zero
    auto g = grad.row(i);
    for (std::size_t j = 0; j < space.dim; ++j) g[j] += w * upstream[j];
  }
}

}  // namespace detail

// Gradient of <upstream, encoded-value> with respect to every anchor, at the
// interpolated position of tau. With propagation enabled the upstream routes
// to all anchors with exponentially decaying weights; otherwise only the two
// interpolating anchors receive it.
inline AnchorGradients grad_wrt_anchors(const TemporalTokenSpace& space, NormalizedTime tau,
                                        std::span<const double> upstream,
                                        const NtpOptions& opts = {}) {
  AnchorGradients out;
  out.grad = Matrix(space.n_anchors, space.dim);
  out.upstream.assign(upstream.begin(), upstream.end());
  detail::accumulate_anchor_grad(space, position_of(space, tau), upstream, opts, out.grad);
  return out;
}

// Same routing, addressed by token index. frac is exactly zero, so the
// disabled-propagation path touches a single row.
inline AnchorGradients grad_wrt_anchor_token(const TemporalTokenSpace& space, std::size_t token,
                                             std::span<const double> upstream,
                                             const NtpOptions& opts = {}) {
  AnchorGradients out;
  out.grad = Matrix(space.n_anchors, space.dim);
  out.upstream.assign(upstream.begin(), upstream.end());
  detail::accumulate_anchor_grad(space, position_of_token(space, token), upstream, opts, out.grad);
  return out;
}

// Adds the temporal embedding at each frame's timestamp to the frame feature,
// a positional encoding over the sampled frames.
inline Matrix inject_time(const TemporalTokenSpace& space, const Matrix& frame_features,
                          std::span<const NormalizedTime> frame_times) {
  if (frame_features.cols != space.dim) {
    throw ShapeError("frame features have width " + std::to_string(frame_features.cols) +
                     ", space has dim " + std::to_string(space.dim));
  }
  if (frame_features.rows != frame_times.size()) {
    throw ShapeError("feature rows and frame times differ in length");
  }
  for (std::size_t i = 0; i + 1 < frame_times.size(); ++i) {
    if (frame_times[i + 1].tau < frame_times[i].tau) {
      throw ValidationError("frame times must be sorted non-decreasing");
    }
  }
  Matrix out = frame_features;
  for (std::size_t i = 0; i < out.rows; ++i) {
    const auto emb = encode_time(space, frame_times[i]);
    auto row = out.row(i);
    for (std::size_t j = 0; j < out.cols; ++j) row[j] += emb[j];
  }
  return out;
}

// Inclusive-endpoint uniform sampling: tau_i = i / (m - 1).
inline std::vector<NormalizedTime> uniform_frame_times(std::size_t m) {
  if (m == 0) throw ValidationError("need at least one frame time");
  std::vector<NormalizedTime> out(m);
  if (m == 1) {
    out[0] = NormalizedTime{0.0};
    return out;
  }
  for (std::size_t i = 0; i < m; ++i) {
    out[i] = NormalizedTime{static_cast<double>(i) / static_cast<double>(m - 1)};
  }
  return out;
}

}  // namespace tempokit
