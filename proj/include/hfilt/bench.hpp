#pragma once
// Monte-Carlo filter comparison: paired trials of the reinforcement, H-infinity,
// and Kalman filters under bounded noise, with per-state RMS and the empirical
// attenuation ratio as the figures of merit.

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hfilt/approx.hpp"
#include "hfilt/config.hpp"
#include "hfilt/game.hpp"
#include "hfilt/linalg.hpp"
#include "hfilt/plant.hpp"

namespace hfilt::bench {

using linalg::Mat;
using linalg::Vec;

struct UnstableFilter : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filter CARE: A P + P A' + Qc - P C' Rc^{-1} C P = 0, K = P C' Rc^{-1}.
inline Mat solve_kalman_gain(const plant::LinearPlant& sys, const Mat& Qc, const Mat& Rc) {
  Eigen::FullPivLU<Mat> lu(Rc);
  if (!lu.isInvertible()) throw game::SingularR("solve_kalman_gain: Rc is singular");
  const Mat M = sys.C.transpose() * lu.solve(sys.C);
  const Mat P = linalg::gare_solve(sys.A, M, Qc);
  return P * sys.C.transpose() * lu.inverse();
}

// Kalman baseline built from the true covariance of the sampled bounded noise.
// Each component is the affine map w_i = 2 w_bar_i X - w_bar_i of a draw X of
// `dist`, so Var(w_i) = (2 w_bar_i)^2 Var(X). Noise held constant over a step
// of length dt has equivalent white-noise spectral density Var * dt.
inline Mat kalman_gain_from_bounds(const plant::LinearPlant& sys, const plant::NoiseBounds& bounds,
                                   const plant::NoiseDistribution& dist, double dt) {
  if (!(dt > 0.0)) throw plant::InvalidParams("kalman_gain_from_bounds: dt must be positive");
  const double var01 = dist.variance01();
  if (!(var01 > 0.0)) {
    throw plant::InvalidParams("kalman_gain_from_bounds: distribution has zero variance");
  }
  const Vec qdiag = (2.0 * bounds.w_bar.array()).square() * var01 * dt;
  const Vec rdiag = (2.0 * bounds.v_bar.array()).square() * var01 * dt;
  return solve_kalman_gain(sys, Mat(qdiag.asDiagonal()), Mat(rdiag.asDiagonal()));
}

// Sinusoidal steering excitation on the first input channel.
struct Steering {
  double amplitude = 0.0;
  double frequency = 0.0;

  Vec at(double t, Eigen::Index input_dim) const {
    Vec u = Vec::Zero(input_dim);
    if (input_dim > 0) u(0) = amplitude * std::sin(frequency * t);
    return u;
  }
};

struct FilterSpec {
  std::string name;
  Mat K;
};

// Per-filter outcome of one trial: RMS per estimated output component
// (1e4 * sqrt of the rectangle-rule integral of the squared error) and the
// empirical attenuation ratio (integrated weighted error energy over
// integrated noise penalty; 0 when the trial is noiseless).
struct FilterMetrics {
  Vec rms;
  double ratio = 0.0;
};

inline void require_stable(const plant::LinearPlant& sys, const Mat& K, const std::string& name) {
  if (K.rows() != sys.state_dim() || K.cols() != sys.meas_dim()) {
    throw linalg::DimensionMismatch("compare: filter '" + name + "' gain has wrong shape");
  }
  if (!linalg::is_hurwitz(sys.A - K * sys.C)) {
    throw UnstableFilter("compare: filter '" + name + "' gives a non-Hurwitz A - K C");
  }
}

namespace detail {

// SplitMix64 finalizer; decorrelates consecutive seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Noise penalty density in the attenuation-ratio denominator for the
// configured mode. In bounded mode a sampled component can land on the bound
// itself (measure-zero draw of X = 0); the penalty's limit there is finite,
// so nudge inside the open interval instead of rejecting the sample.
inline double noise_penalty(const Vec& w, const Vec& v, const game::GameWeights& weights) {
  if (weights.mode == game::Mode::quadratic) {
    return w.dot(weights.Q.llt().solve(w)) + v.dot(weights.R.llt().solve(v));
  }
  const double inside = 1.0 - 1e-12;
  const Vec wc = w.cwiseMax(-inside * weights.bounds.w_bar).cwiseMin(inside * weights.bounds.w_bar);
  const Vec vc = v.cwiseMax(-inside * weights.bounds.v_bar).cwiseMin(inside * weights.bounds.v_bar);
  return game::nq_penalty(wc, weights.bounds.w_bar, weights.Q.diagonal()) +
         game::nq_penalty(vc, weights.bounds.v_bar, weights.R.diagonal());
}

}  // namespace detail

// Seed for one (distribution, trial) cell: independent of trial count and of
// the order trials are run in.
inline std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t dist_index,
                                std::uint64_t trial) {
  std::uint64_t z = detail::mix64(seed + 0x9e3779b97f4a7c15ULL);
  z = detail::mix64(z ^ (dist_index + 1));
  return detail::mix64(z ^ (trial + 1));
}

// One RK4 step of the joint plant/filter dynamics with u, w, v held constant
// over the step. The innovation uses the continuous plant state within the
// substeps (the D feedthrough cancels out of it), so a noiseless trial from
// matched initial states keeps the estimation error at exactly zero and the
// continuous-time attenuation bound survives discretization.
inline void joint_step(const plant::LinearPlant& sys, const std::vector<FilterSpec>& filters,
                       Vec& x, std::vector<Vec>& x_hat, const Vec& u, const Vec& w, const Vec& v,
                       double dt) {
  const Eigen::Index n = sys.state_dim();
  Vec s(n * static_cast<Eigen::Index>(1 + filters.size()));
  s.head(n) = x;
  for (std::size_t f = 0; f < filters.size(); ++f) {
    s.segment(n * static_cast<Eigen::Index>(1 + f), n) = x_hat[f];
  }
  const Vec bu = sys.B * u;
  const auto rhs = [&](const Vec& state) -> Vec {
    Vec ds(state.size());
    const Vec xs = state.head(n);
    ds.head(n) = sys.A * xs + bu + w;
    const Vec meas = sys.C * xs + v;
    for (std::size_t f = 0; f < filters.size(); ++f) {
      const Eigen::Index off = n * static_cast<Eigen::Index>(1 + f);
      const Vec xh = state.segment(off, n);
      ds.segment(off, n) = sys.A * xh + bu + filters[f].K * (meas - sys.C * xh);
    }
    return ds;
  };
  s = plant::rk4_step(rhs, s, dt);
  x = s.head(n);
  for (std::size_t f = 0; f < filters.size(); ++f) {
    x_hat[f] = s.segment(n * static_cast<Eigen::Index>(1 + f), n);
  }
}

// One paired trial: every filter sees the identical noise realization, the
// identical steering input, and starts from x_hat(0) = x(0) = 0. Noise is
// drawn fresh at each sample and held over the step; integrals use the
// rectangle rule on the sampling grid. A null distribution runs the
// noiseless trial.
inline std::vector<FilterMetrics> run_trial(const plant::LinearPlant& sys,
                                            const game::GameWeights& weights,
                                            const std::vector<FilterSpec>& filters,
                                            const plant::NoiseDistribution* dist,
                                            const Steering& steer, double duration_s,
                                            double sample_hz, std::mt19937_64& rng) {
  if (filters.empty()) throw plant::InvalidParams("run_trial: no filters given");
  if (!(duration_s > 0.0) || !(sample_hz > 0.0)) {
    throw plant::InvalidParams("run_trial: duration and sampling rate must be positive");
  }
  for (const FilterSpec& f : filters) require_stable(sys, f.K, f.name);

  const Eigen::Index n = sys.state_dim();
  const Eigen::Index r = sys.meas_dim();
  const Eigen::Index m = sys.output_dim();
  const double dt = 1.0 / sample_hz;
  const long steps = std::lround(duration_s * sample_hz);

  Vec x = Vec::Zero(n);
  std::vector<Vec> x_hat(filters.size(), Vec::Zero(n));
  std::vector<Vec> err_sq(filters.size(), Vec::Zero(m));
  std::vector<double> num(filters.size(), 0.0);
  double den = 0.0;

  Vec w = Vec::Zero(n);
  Vec v = Vec::Zero(r);
  for (long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const Vec u = steer.at(t, sys.input_dim());
    if (dist != nullptr) {
      for (Eigen::Index i = 0; i < n; ++i) {
        w(i) = plant::sample_bounded_noise(*dist, weights.bounds.w_bar(i), rng);
      }
      for (Eigen::Index j = 0; j < r; ++j) {
        v(j) = plant::sample_bounded_noise(*dist, weights.bounds.v_bar(j), rng);
      }
      den += detail::noise_penalty(w, v, weights) * dt;
    }

    for (std::size_t f = 0; f < filters.size(); ++f) {
      const Vec z_err = sys.L * (x - x_hat[f]);
      err_sq[f] += z_err.cwiseAbs2() * dt;
      num[f] += z_err.dot(weights.S * z_err) * dt;
    }

    joint_step(sys, filters, x, x_hat, u, w, v, dt);
  }

  std::vector<FilterMetrics> out(filters.size());
  for (std::size_t f = 0; f < filters.size(); ++f) {
    out[f].rms = 1e4 * err_sq[f].cwiseSqrt();
    out[f].ratio = den > 0.0 ? num[f] / den : 0.0;
  }
  return out;
}

// Trial-averaged metrics for one distribution.
struct ComparisonRow {
  std::string distribution;
  std::vector<std::string> filter_names;
  std::vector<FilterMetrics> mean;
};

// Full comparison: for each distribution, the named fixed gains (reinforcement
// and H-infinity) plus a Kalman baseline recomputed from that distribution's
// true covariance, averaged over `trials` paired trials.
inline std::vector<ComparisonRow> run_comparison(const plant::LinearPlant& sys,
                                                 const game::GameWeights& weights,
                                                 const std::vector<FilterSpec>& fixed_filters,
                                                 const config::CompareSetup& setup) {
  if (setup.distributions.empty()) {
    throw plant::InvalidParams("run_comparison: no distributions configured");
  }
  const double dt = 1.0 / setup.sample_hz;
  const Steering steer{setup.steer_amplitude, setup.steer_frequency};

  std::vector<ComparisonRow> rows;
  rows.reserve(setup.distributions.size());
  for (std::size_t d = 0; d < setup.distributions.size(); ++d) {
    const plant::NoiseDistribution& dist = setup.distributions[d];
    std::vector<FilterSpec> filters = fixed_filters;
    filters.push_back({"kalman", kalman_gain_from_bounds(sys, weights.bounds, dist, dt)});

    ComparisonRow row;
    row.distribution = dist.label();
    for (const FilterSpec& f : filters) row.filter_names.push_back(f.name);
    row.mean.assign(filters.size(), FilterMetrics{Vec::Zero(sys.output_dim()), 0.0});

    for (long trial = 0; trial < setup.trials; ++trial) {
      std::mt19937_64 rng(trial_seed(setup.seed, d, static_cast<std::uint64_t>(trial)));
      const std::vector<FilterMetrics> res = run_trial(sys, weights, filters, &dist, steer,
                                                       setup.duration_s, setup.sample_hz, rng);
      for (std::size_t f = 0; f < filters.size(); ++f) {
        row.mean[f].rms += res[f].rms;
        row.mean[f].ratio += res[f].ratio;
      }
    }
    const double inv = 1.0 / static_cast<double>(setup.trials);
    for (FilterMetrics& metrics : row.mean) {
      metrics.rms *= inv;
      metrics.ratio *= inv;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// Extracts just the gain block from a checkpoint stream, regardless of which
// value/noise network types the checkpoint holds.
inline Mat load_gain_from_checkpoint(std::istream& is) {
  std::string token;
  if (!(is >> token) || token != "hfilt-checkpoint") {
    throw approx::CheckpointError("checkpoint: missing hfilt-checkpoint header");
  }
  long version = 0;
  if (!(is >> version) || version != 1) {
    throw approx::CheckpointError("checkpoint: unsupported version");
  }
  while (is >> token) {
    if (token != "gain") continue;
    Eigen::Index n = 0, r = 0;
    if (!(is >> n >> r) || n <= 0 || r <= 0) {
      throw approx::CheckpointError("checkpoint: bad gain dimensions");
    }
    Mat K(n, r);
    for (Eigen::Index i = 0; i < K.size(); ++i) {
      if (!(is >> K.data()[i])) {
        throw approx::CheckpointError("checkpoint: truncated gain block");
      }
    }
    return K;
  }
  throw approx::CheckpointError("checkpoint: no gain block found");
}

// CSV emission: one row per (distribution, filter); RMS columns are per
// estimated output component.
inline void write_comparison_csv(std::ostream& os, const std::vector<ComparisonRow>& rows) {
  if (rows.empty()) throw plant::InvalidParams("write_comparison_csv: no rows");
  const Eigen::Index m = rows.front().mean.front().rms.size();
  os << "distribution,filter";
  for (Eigen::Index i = 1; i <= m; ++i) os << ",rms_" << i;
  os << ",ratio\n";
  os.precision(17);
  for (const ComparisonRow& row : rows) {
    for (std::size_t f = 0; f < row.filter_names.size(); ++f) {
      os << row.distribution << ',' << row.filter_names[f];
      for (Eigen::Index i = 0; i < m; ++i) os << ',' << row.mean[f].rms(i);
      os << ',' << row.mean[f].ratio << '\n';
    }
  }
}

}  // namespace hfilt::bench
