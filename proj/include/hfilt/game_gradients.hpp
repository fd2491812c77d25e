#pragma once

// Gradients of the noise penalties with respect to the noise itself; kept
// next to the game definitions because they are the analytic counterparts of
// nq_penalty and the quadratic substitute.

#include "hfilt/game.hpp"

namespace hfilt::game {

// dF/dw_i = 2 q_i w_bar_i atanh(w_i / w_bar_i); the logarithmic term's
// derivative cancels inside the closed form.
inline Vec nq_penalty_gradient(const Vec& noise, const Vec& bounds_diag, const Vec& weight_diag) {
  if (noise.size() != bounds_diag.size() || noise.size() != weight_diag.size()) {
    throw DimensionMismatch("nq_penalty_gradient: length mismatch");
  }
  Vec g(noise.size());
  for (Eigen::Index i = 0; i < noise.size(); ++i) {
    const double ratio = noise(i) / bounds_diag(i);
    if (std::abs(ratio) >= 1.0) {
      throw OutOfDomain("nq_penalty_gradient: |noise| must be strictly below the bound");
    }
    g(i) = 2.0 * weight_diag(i) * bounds_diag(i) * std::atanh(ratio);
  }
  return g;
}

// Gradient of the mode's noise penalty: 2 Q^{-1} w in quadratic mode, the
// nonquadratic form above in bounded mode (weight = the matching diagonal).
inline Vec penalty_gradient_w(const Vec& w, const GameWeights& weights, Mode mode) {
  if (mode == Mode::quadratic) return 2.0 * weights.Q.llt().solve(w);
  return nq_penalty_gradient(w, weights.bounds.w_bar, weights.Q.diagonal());
}

inline Vec penalty_gradient_v(const Vec& v, const GameWeights& weights, Mode mode) {
  if (mode == Mode::quadratic) return 2.0 * weights.R.llt().solve(v);
  return nq_penalty_gradient(v, weights.bounds.v_bar, weights.R.diagonal());
}

}  // namespace hfilt::game
