#pragma once

// Continuous-time linear plant, the two-state single-track (bicycle) vehicle
// model, bounded-noise distributions on [0, 1], and fixed-step RK4 helpers
// for the plant, the estimator, and the estimation-error dynamics.

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include "hfilt/linalg.hpp"

namespace hfilt::plant {

using linalg::DimensionMismatch;
using linalg::Mat;
using linalg::Vec;

struct InvalidParams : std::runtime_error {
  explicit InvalidParams(const std::string& what) : std::runtime_error(what) {}
};

// x' = A x + B u + w,  y = C x + D u + v,  z = L x.
// D is a direct feedthrough of the (known) input into the measurement; it is
// zero for most plants and subtracted inside the estimator innovation.
struct LinearPlant {
  Mat A, B, C, L, D;

  LinearPlant(Mat A_, Mat B_, Mat C_, Mat L_, Mat D_ = Mat())
      : A(std::move(A_)), B(std::move(B_)), C(std::move(C_)), L(std::move(L_)), D(std::move(D_)) {
    linalg::require_square(A, "A");
    if (D.size() == 0) D = Mat::Zero(C.rows(), B.cols());
    if (B.rows() != A.rows()) throw DimensionMismatch("LinearPlant: B rows != state dim");
    if (C.cols() != A.rows()) throw DimensionMismatch("LinearPlant: C cols != state dim");
    if (L.cols() != A.rows()) throw DimensionMismatch("LinearPlant: L cols != state dim");
    if (D.rows() != C.rows() || D.cols() != B.cols()) {
      throw DimensionMismatch("LinearPlant: D must be (measurement dim) x (input dim)");
    }
    if (!A.allFinite() || !B.allFinite() || !C.allFinite() || !L.allFinite() || !D.allFinite()) {
      throw InvalidParams("LinearPlant: matrices must be finite");
    }
  }

  Eigen::Index state_dim() const { return A.rows(); }
  Eigen::Index input_dim() const { return B.cols(); }
  Eigen::Index meas_dim() const { return C.rows(); }
  Eigen::Index output_dim() const { return L.rows(); }
};

// Componentwise bounds |w_i| <= w_bar_i on process noise and |v_j| <= v_bar_j
// on measurement noise.
struct NoiseBounds {
  Vec w_bar, v_bar;

  NoiseBounds(Vec w, Vec v) : w_bar(std::move(w)), v_bar(std::move(v)) {
    if (w_bar.size() == 0 || v_bar.size() == 0) {
      throw InvalidParams("NoiseBounds: bound vectors must be nonempty");
    }
    if (w_bar.minCoeff() <= 0.0 || v_bar.minCoeff() <= 0.0) {
      throw InvalidParams("NoiseBounds: every bound must be strictly positive");
    }
    if (!w_bar.allFinite() || !v_bar.allFinite()) {
      throw InvalidParams("NoiseBounds: bounds must be finite");
    }
  }
};

// Single-track lateral-dynamics parameters. Cornering stiffnesses follow the
// convention where k_f, k_r < 0 for ordinary tires.
struct BicycleParams {
  double m;      // vehicle mass [kg]
  double a;      // CG to front axle [m]
  double b;      // CG to rear axle [m]
  double k_f;    // front cornering stiffness [N/rad]
  double k_r;    // rear cornering stiffness [N/rad]
  double I_zz;   // yaw inertia [kg m^2]
  double u_lon;  // longitudinal speed [m/s]
};

// States are sideslip angle and yaw rate; the input is the steering angle;
// measurements are lateral acceleration (with steering feedthrough) and yaw
// rate. z = x, i.e. both states are to be estimated.
inline LinearPlant bicycle_plant(const BicycleParams& p) {
  if (!(p.m > 0.0) || !(p.a > 0.0) || !(p.b > 0.0) || !(p.I_zz > 0.0) || !(p.u_lon > 0.0)) {
    throw InvalidParams("bicycle_plant: m, a, b, I_zz, u_lon must be positive");
  }
  if (p.k_f == 0.0 || p.k_r == 0.0) {
    throw InvalidParams("bicycle_plant: cornering stiffnesses must be nonzero");
  }

  const double mu = p.m * p.u_lon;
  Mat A(2, 2), B(2, 1), C(2, 2), D(2, 1);
  A << (p.k_f + p.k_r) / mu, (p.a * p.k_f - p.b * p.k_r) / (mu * p.u_lon) - 1.0,
      (p.a * p.k_f - p.b * p.k_r) / p.I_zz,
      (p.a * p.a * p.k_f + p.b * p.b * p.k_r) / (p.u_lon * p.I_zz);
  B << -p.k_f / mu, -p.a * p.k_f / p.I_zz;
  C << (p.k_f + p.k_r) / p.m, (p.a * p.k_f - p.b * p.k_r) / mu, 0.0, 1.0;
  D << -p.k_f / p.m, 0.0;
  return LinearPlant(A, B, C, Mat::Identity(2, 2), D);
}

enum class NoiseKind { Uniform01, Beta, Triangular };

// A random variable X supported on [0, 1]; bounded noise is the affine map
// w = 2 w_bar X - w_bar. Mean and variance are closed-form for the Kalman
// baseline's true-covariance computation.
class NoiseDistribution {
 public:
  static NoiseDistribution uniform01() { return NoiseDistribution(NoiseKind::Uniform01, 0, 0, 0); }

  static NoiseDistribution beta(double alpha, double beta) {
    if (!(alpha > 0.0) || !(beta > 0.0)) {
      throw InvalidParams("NoiseDistribution: Beta shape parameters must be positive");
    }
    return NoiseDistribution(NoiseKind::Beta, alpha, beta, 0);
  }

  static NoiseDistribution triangular(double lo, double hi, double mode) {
    if (!(0.0 <= lo && lo < hi && hi <= 1.0) || !(lo <= mode && mode <= hi)) {
      throw InvalidParams("NoiseDistribution: Triangular requires 0 <= lo <= mode <= hi <= 1");
    }
    return NoiseDistribution(NoiseKind::Triangular, lo, hi, mode);
  }

  NoiseKind kind() const { return kind_; }

  // One draw of X in [0, 1].
  double sample01(std::mt19937_64& rng) const {
    switch (kind_) {
      case NoiseKind::Uniform01:
        return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      case NoiseKind::Beta: {
        // Gamma-ratio method: X = G_a / (G_a + G_b).
        std::gamma_distribution<double> ga(p1_, 1.0), gb(p2_, 1.0);
        const double x = ga(rng);
        const double y = gb(rng);
        const double s = x + y;
        return s > 0.0 ? x / s : 0.5;
      }
      case NoiseKind::Triangular: {
        // Inverse CDF.
        const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        const double span = p2_ - p1_;
        const double cut = (p3_ - p1_) / span;
        if (u < cut) return p1_ + std::sqrt(u * span * (p3_ - p1_));
        return p2_ - std::sqrt((1.0 - u) * span * (p2_ - p3_));
      }
    }
    return 0.5;  // unreachable
  }

  double mean01() const {
    switch (kind_) {
      case NoiseKind::Uniform01:
        return 0.5;
      case NoiseKind::Beta:
        return p1_ / (p1_ + p2_);
      case NoiseKind::Triangular:
        return (p1_ + p2_ + p3_) / 3.0;
    }
    return 0.5;
  }

  double variance01() const {
    switch (kind_) {
      case NoiseKind::Uniform01:
        return 1.0 / 12.0;
      case NoiseKind::Beta: {
        const double s = p1_ + p2_;
        return p1_ * p2_ / (s * s * (s + 1.0));
      }
      case NoiseKind::Triangular:
        return (p1_ * p1_ + p2_ * p2_ + p3_ * p3_ - p1_ * p2_ - p1_ * p3_ - p2_ * p3_) / 18.0;
    }
    return 0.0;
  }

  std::string label() const {
    std::ostringstream os;
    switch (kind_) {
      case NoiseKind::Uniform01:
        os << "U(0,1)";
        break;
      case NoiseKind::Beta:
        os << "Beta(" << p1_ << "," << p2_ << ")";
        break;
      case NoiseKind::Triangular:
        os << "Triangular(" << p1_ << "," << p2_ << "," << p3_ << ")";
        break;
    }
    return os.str();
  }

 private:
  NoiseDistribution(NoiseKind kind, double p1, double p2, double p3)
      : kind_(kind), p1_(p1), p2_(p2), p3_(p3) {}

  NoiseKind kind_;
  double p1_, p2_, p3_;  // Beta(alpha, beta) or Triangular(lo, hi, mode)
};

// One bounded-noise component: maps a draw X in [0, 1] to [-bound, +bound].
inline double sample_bounded_noise(const NoiseDistribution& dist, double bound,
                                   std::mt19937_64& rng) {
  if (!(bound > 0.0)) throw InvalidParams("sample_bounded_noise: bound must be positive");
  return 2.0 * bound * dist.sample01(rng) - bound;
}

// Estimation-error drift: x_tilde' = (A - K C) x_tilde + w - K v.
inline Vec error_dynamics(const LinearPlant& plant, const Mat& K, const Vec& x_tilde, const Vec& w,
                          const Vec& v) {
  const Eigen::Index n = plant.state_dim();
  const Eigen::Index r = plant.meas_dim();
  if (K.rows() != n || K.cols() != r) throw DimensionMismatch("error_dynamics: K must be n x r");
  if (x_tilde.size() != n || w.size() != n) {
    throw DimensionMismatch("error_dynamics: x_tilde and w must have state dimension");
  }
  if (v.size() != r) throw DimensionMismatch("error_dynamics: v must have measurement dimension");
  return (plant.A - K * plant.C) * x_tilde + w - K * v;
}

// Classic RK4 with the right-hand side frozen in whatever f captures
// (zero-order-hold inputs and noise).
template <typename F>
Vec rk4_step(F&& f, const Vec& x, double dt) {
  const Vec k1 = f(x);
  const Vec k2 = f(Vec(x + 0.5 * dt * k1));
  const Vec k3 = f(Vec(x + 0.5 * dt * k2));
  const Vec k4 = f(Vec(x + dt * k3));
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// One RK4 step of the estimator x_hat' = A x_hat + B u + K (y - C x_hat - D u)
// with u and y held over the step.
inline Vec estimator_step(const LinearPlant& plant, const Mat& K, const Vec& x_hat, const Vec& u,
                          const Vec& y, double dt) {
  const Eigen::Index n = plant.state_dim();
  const Eigen::Index r = plant.meas_dim();
  if (K.rows() != n || K.cols() != r) throw DimensionMismatch("estimator_step: K must be n x r");
  if (x_hat.size() != n) throw DimensionMismatch("estimator_step: x_hat must have state dimension");
  if (u.size() != plant.input_dim()) {
    throw DimensionMismatch("estimator_step: u must have input dimension");
  }
  if (y.size() != r) throw DimensionMismatch("estimator_step: y must have measurement dimension");
  if (!(dt > 0.0)) throw InvalidParams("estimator_step: dt must be positive");

  const Vec bias = plant.B * u + K * (y - plant.D * u);
  return rk4_step(
      [&](const Vec& xh) -> Vec { return (plant.A - K * plant.C) * xh + bias; }, x_hat, dt);
}

// One RK4 step of the plant x' = A x + B u + w with u and w held over the step.
inline Vec plant_step(const LinearPlant& plant, const Vec& x, const Vec& u, const Vec& w,
                      double dt) {
  const Eigen::Index n = plant.state_dim();
  if (x.size() != n || w.size() != n) {
    throw DimensionMismatch("plant_step: x and w must have state dimension");
  }
  if (u.size() != plant.input_dim()) {
    throw DimensionMismatch("plant_step: u must have input dimension");
  }
  if (!(dt > 0.0)) throw InvalidParams("plant_step: dt must be positive");

  const Vec bias = plant.B * u + w;
  return rk4_step([&](const Vec& xs) -> Vec { return plant.A * xs + bias; }, x, dt);
}

}  // namespace hfilt::plant
