#pragma once

// The zero-sum estimation game: quadratic and nonquadratic (bounded-noise)
// utilities, the Hamiltonian, worst-case noise formulas, the fixed
// measurement-noise substitution, analytic gains, and the saddle-point
// perturbation identity.

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "hfilt/linalg.hpp"
#include "hfilt/plant.hpp"

namespace hfilt::game {

using linalg::DimensionMismatch;
using linalg::Mat;
using linalg::Vec;
using plant::InvalidParams;

struct OutOfDomain : std::runtime_error {
  explicit OutOfDomain(const std::string& what) : std::runtime_error(what) {}
};

struct SingularR : std::runtime_error {
  explicit SingularR(const std::string& what) : std::runtime_error(what) {}
};

enum class Mode { quadratic, bounded };

inline bool is_diagonal(const Mat& a) {
  const double scale = 1.0 + a.cwiseAbs().maxCoeff();
  return (a - Mat(a.diagonal().asDiagonal())).cwiseAbs().maxCoeff() <= 1e-13 * scale;
}

// Weights of the performance index plus the attenuation level and noise
// bounds. In bounded mode the noise penalty is evaluated componentwise, which
// is exact only for diagonal Q and R, so non-diagonal weights are rejected.
struct GameWeights {
  Mat Q, R, S;
  double gamma;
  plant::NoiseBounds bounds;
  Mode mode;

  GameWeights(Mat Q_, Mat R_, Mat S_, double gamma_, plant::NoiseBounds bounds_, Mode mode_)
      : Q(std::move(Q_)),
        R(std::move(R_)),
        S(std::move(S_)),
        gamma(gamma_),
        bounds(std::move(bounds_)),
        mode(mode_) {
    linalg::require_square(Q, "Q");
    linalg::require_square(R, "R");
    linalg::require_square(S, "S");
    for (const auto* m : {&Q, &R, &S}) {
      if (!linalg::is_symmetric(*m) || !linalg::is_positive_definite(*m)) {
        throw InvalidParams("GameWeights: Q, R, S must be symmetric positive definite");
      }
    }
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
      throw InvalidParams("GameWeights: gamma must be positive and finite");
    }
    if (bounds.w_bar.size() != Q.rows()) {
      throw DimensionMismatch("GameWeights: w_bar length must match Q dimension");
    }
    if (bounds.v_bar.size() != R.rows()) {
      throw DimensionMismatch("GameWeights: v_bar length must match R dimension");
    }
    if (mode == Mode::bounded && (!is_diagonal(Q) || !is_diagonal(R))) {
      throw InvalidParams("GameWeights: bounded mode requires diagonal Q and R");
    }
  }
};

// Nonquadratic noise penalty, componentwise closed form of the defining
// integral (exact for a diagonal weight):
//   F(w) = 2 sum_i q_i w_bar_i [ w_i atanh(w_i/w_bar_i)
//                                + (w_bar_i/2) ln(1 - (w_i/w_bar_i)^2) ].
inline double nq_penalty(const Vec& noise, const Vec& bounds_diag, const Vec& weight_diag) {
  if (noise.size() != bounds_diag.size() || noise.size() != weight_diag.size()) {
    throw DimensionMismatch("nq_penalty: noise, bounds, and weights must share length");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < noise.size(); ++i) {
    const double wb = bounds_diag(i);
    const double q = weight_diag(i);
    if (!(wb > 0.0)) throw InvalidParams("nq_penalty: bounds must be positive");
    if (!(q > 0.0)) throw InvalidParams("nq_penalty: weights must be positive");
    const double ratio = noise(i) / wb;
    if (std::abs(ratio) >= 1.0) {
      throw OutOfDomain("nq_penalty: |noise| must be strictly below the bound (component " +
                        std::to_string(i) + ")");
    }
    total += 2.0 * q * wb *
             (noise(i) * std::atanh(ratio) + 0.5 * wb * std::log1p(-ratio * ratio));
  }
  return total;
}

namespace detail {

inline void require_mode_weights(const GameWeights& weights, Mode mode) {
  if (mode == Mode::bounded && (!is_diagonal(weights.Q) || !is_diagonal(weights.R))) {
    throw InvalidParams("bounded mode requires diagonal Q and R");
  }
}

}  // namespace detail

// Running cost l = ||L x_tilde||^2_S - gamma^2 (penalty(w) + penalty(v));
// quadratic mode uses w' Q^{-1} w and v' R^{-1} v, bounded mode the
// nonquadratic closed form.
inline double utility(const Vec& x_tilde, const Vec& w, const Vec& v, const GameWeights& weights,
                      const Mat& L, Mode mode) {
  if (L.cols() != x_tilde.size()) throw DimensionMismatch("utility: L cols must match state dim");
  if (L.rows() != weights.S.rows()) throw DimensionMismatch("utility: S must match L rows");
  if (w.size() != weights.Q.rows()) throw DimensionMismatch("utility: w must match Q dimension");
  if (v.size() != weights.R.rows()) throw DimensionMismatch("utility: v must match R dimension");
  detail::require_mode_weights(weights, mode);

  const Vec z = L * x_tilde;
  const double state_cost = z.dot(weights.S * z);
  const double g2 = weights.gamma * weights.gamma;
  if (mode == Mode::quadratic) {
    const double pw = w.dot(weights.Q.llt().solve(w));
    const double pv = v.dot(weights.R.llt().solve(v));
    return state_cost - g2 * (pw + pv);
  }
  const double pw = nq_penalty(w, weights.bounds.w_bar, weights.Q.diagonal());
  const double pv = nq_penalty(v, weights.bounds.v_bar, weights.R.diagonal());
  return state_cost - g2 * (pw + pv);
}

// H = l(x_tilde, w, v) + grad_V' ((A - K C) x_tilde + w - K v).
inline double hamiltonian(const Vec& x_tilde, const Mat& K, const Vec& v, const Vec& w,
                          const Vec& grad_V, const plant::LinearPlant& sys,
                          const GameWeights& weights, Mode mode) {
  if (grad_V.size() != sys.state_dim()) {
    throw DimensionMismatch("hamiltonian: grad_V must have state dimension");
  }
  const Vec drift = plant::error_dynamics(sys, K, x_tilde, w, v);
  return utility(x_tilde, w, v, weights, sys.L, mode) + grad_V.dot(drift);
}

// Saturating worst-case noise pair:
//   w* =  W tanh( (2 gamma^2 Q W)^{-1} grad_V ),
//   v* = -V tanh( (2 gamma^2 R V)^{-1} K' grad_V ),
// with W = diag(w_bar), V = diag(v_bar). Strictly interior for finite inputs.
inline std::pair<Vec, Vec> worst_noise_bounded(const Vec& grad_V, const Mat& K,
                                               const GameWeights& weights) {
  detail::require_mode_weights(weights, Mode::bounded);
  if (K.rows() != grad_V.size() || K.cols() != weights.R.rows()) {
    throw DimensionMismatch("worst_noise_bounded: K must be n x r");
  }
  const double g2 = 2.0 * weights.gamma * weights.gamma;
  const Vec kg = K.transpose() * grad_V;
  Vec w_star(grad_V.size()), v_star(kg.size());
  for (Eigen::Index i = 0; i < w_star.size(); ++i) {
    const double wb = weights.bounds.w_bar(i);
    w_star(i) = wb * linalg::interior_tanh(grad_V(i) / (g2 * weights.Q(i, i) * wb));
  }
  for (Eigen::Index j = 0; j < v_star.size(); ++j) {
    const double vb = weights.bounds.v_bar(j);
    v_star(j) = -vb * linalg::interior_tanh(kg(j) / (g2 * weights.R(j, j) * vb));
  }
  return {std::move(w_star), std::move(v_star)};
}

// Stationary noise of the quadratic game:
//   w* = (2 gamma^2)^{-1} Q grad_V,  v* = -(2 gamma^2)^{-1} R K' grad_V.
inline std::pair<Vec, Vec> worst_noise_quadratic(const Vec& grad_V, const Mat& K,
                                                 const GameWeights& weights) {
  if (K.rows() != grad_V.size() || K.cols() != weights.R.rows()) {
    throw DimensionMismatch("worst_noise_quadratic: K must be n x r");
  }
  const double inv = 1.0 / (2.0 * weights.gamma * weights.gamma);
  return {inv * (weights.Q * grad_V), -inv * (weights.R * (K.transpose() * grad_V))};
}

// The v* branch of the worst-case formulas with an arbitrary (not optimal)
// gain substituted; used to restore convexity in K before the gain update.
inline Vec fixed_measurement_noise(const Vec& /*x_tilde*/, const Mat& K, const Vec& grad_V,
                                   const GameWeights& weights, Mode mode) {
  if (K.rows() != grad_V.size() || K.cols() != weights.R.rows()) {
    throw DimensionMismatch("fixed_measurement_noise: K must be n x r");
  }
  const double g2 = 2.0 * weights.gamma * weights.gamma;
  const Vec kg = K.transpose() * grad_V;
  if (mode == Mode::quadratic) return (-1.0 / g2) * (weights.R * kg);

  detail::require_mode_weights(weights, Mode::bounded);
  Vec v(kg.size());
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    const double vb = weights.bounds.v_bar(j);
    v(j) = -vb * linalg::interior_tanh(kg(j) / (g2 * weights.R(j, j) * vb));
  }
  return v;
}

// K* = P C' R^{-1}.
inline Mat hinf_gain(const Mat& P, const Mat& C, const Mat& R) {
  linalg::require_square(P, "P");
  linalg::require_square(R, "R");
  if (C.cols() != P.rows()) throw DimensionMismatch("hinf_gain: C cols must match P");
  if (C.rows() != R.rows()) throw DimensionMismatch("hinf_gain: R must match C rows");
  Eigen::FullPivLU<Mat> lu(R);
  if (!lu.isInvertible()) throw SingularR("hinf_gain: R is singular");
  return P * lu.solve(C).transpose();  // solve R X = C, then P X'
}

// M = C' R^{-1} C - gamma^{-2} L' S L, the quadratic coefficient of the
// Riccati equation associated with the game.
inline Mat riccati_m_matrix(const plant::LinearPlant& sys, const GameWeights& weights) {
  Eigen::FullPivLU<Mat> lu(weights.R);
  if (!lu.isInvertible()) throw SingularR("riccati_m_matrix: R is singular");
  const double inv_g2 = 1.0 / (weights.gamma * weights.gamma);
  return sys.C.transpose() * lu.solve(sys.C) -
         inv_g2 * sys.L.transpose() * weights.S * sys.L;
}

struct AnalyticSolution {
  Mat P;  // stabilizing Riccati solution
  Mat K;  // P C' R^{-1}
};

// Analytic filter design: solve the Riccati equation for the configured
// attenuation level and form the gain.
inline AnalyticSolution solve_hinf(const plant::LinearPlant& sys, const GameWeights& weights,
                                   linalg::GareDiagnostics* diag = nullptr) {
  const Mat M = riccati_m_matrix(sys, weights);
  Mat P = linalg::gare_solve(sys.A, M, weights.Q, diag);
  Mat K = hinf_gain(P, sys.C, weights.R);
  return {std::move(P), std::move(K)};
}

// Difference H(K* + alpha dK, v(K* + alpha dK)) - H(K*, v(K*)) in the
// quadratic game with V = gamma^2 x' P^{-1} x and w held at its worst case.
// Only the K-dependent terms survive the difference; C x_tilde is recovered
// from K* = P C' R^{-1} as R K*' P^{-1} x_tilde, so the plant itself is not
// needed. Equals alpha^2 gamma^2 ||dK' P^{-1} x_tilde||^2_R at the saddle.
inline double saddle_perturbation_gap(const Vec& x_tilde, const Mat& K_star, const Mat& P,
                                      const Mat& dK, double alpha, const GameWeights& weights) {
  linalg::require_square(P, "P");
  if (P.rows() != x_tilde.size()) throw DimensionMismatch("saddle gap: P must match state dim");
  linalg::require_same_shape(K_star, dK, "saddle gap: K_star vs dK");
  if (K_star.rows() != P.rows() || K_star.cols() != weights.R.rows()) {
    throw DimensionMismatch("saddle gap: K must be n x r");
  }

  const double g2 = weights.gamma * weights.gamma;
  const Vec pinv_x = P.llt().solve(x_tilde);
  const Vec grad_V = 2.0 * g2 * pinv_x;
  const Vec cx = weights.R * (K_star.transpose() * pinv_x);  // = C x_tilde at the saddle

  // K-dependent part of H with v = v(K) substituted:
  //   -gamma^2 v' R^{-1} v - grad_V' K (C x_tilde + v)
  // = (4 gamma^2)^{-1} (K' grad_V)' R (K' grad_V) - grad_V' K (C x_tilde).
  auto h_part = [&](const Mat& K) {
    const Vec kg = K.transpose() * grad_V;
    return kg.dot(weights.R * kg) / (4.0 * g2) - grad_V.dot(K * cx);
  };
  return h_part(K_star + alpha * dK) - h_part(K_star);
}

}  // namespace hfilt::game
