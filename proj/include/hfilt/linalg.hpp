#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace hfilt::linalg {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct SingularSylvester : std::runtime_error {
  explicit SingularSylvester(const std::string& what) : std::runtime_error(what) {}
};

struct NoStabilizingInit : std::runtime_error {
  explicit NoStabilizingInit(const std::string& what) : std::runtime_error(what) {}
};

struct NewtonDiverged : std::runtime_error {
  explicit NewtonDiverged(const std::string& what) : std::runtime_error(what) {}
};

struct DimensionMismatch : std::runtime_error {
  explicit DimensionMismatch(const std::string& what) : std::runtime_error(what) {}
};

inline void require_square(const Mat& a, const char* name) {
  if (a.rows() != a.cols()) {
    throw DimensionMismatch(std::string(name) + " must be square, got " +
                            std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
}

inline void require_same_shape(const Mat& a, const Mat& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatch(std::string(what) + ": shapes " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()));
  }
}

inline bool is_symmetric(const Mat& a, double rtol = 1e-10) {
  return (a - a.transpose()).norm() <= rtol * (1.0 + a.norm());
}

inline double max_eigenvalue_real_part(const Mat& a) {
  Eigen::EigenSolver<Mat> es(a, /*computeEigenvectors=*/false);
  return es.eigenvalues().real().maxCoeff();
}

// Stability margin is strict: real parts must lie below -1e-10.
inline bool is_hurwitz(const Mat& a) { return max_eigenvalue_real_part(a) < -1e-10; }

// Positive definiteness of the symmetric part.
inline bool is_positive_definite(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (a + a.transpose()),
                                        Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() > 0.0;
}

// tanh that never reaches +/-1: the library tanh rounds to exactly 1 for
// arguments beyond ~19, which would let a scaled output touch its bound.
// Pulling the value one epsilon inside keeps bound-scaled quantities strictly
// interior while staying within two ulps of the true saturation level.
inline double interior_tanh(double z) {
  constexpr double cap = 1.0 - std::numeric_limits<double>::epsilon();
  const double t = std::tanh(z);
  return t > cap ? cap : (t < -cap ? -cap : t);
}

/// Solves the continuous Lyapunov equation A X + X A^T + Qs = 0 for symmetric X
/// by Kronecker vectorization: (I (x) A + A (x) I) vec(X) = -vec(Qs).
/// Intended for small n; the dense linear system is (n^2)x(n^2).
inline Mat lyap_solve(const Mat& A, const Mat& Qs) {
  require_square(A, "A");
  require_same_shape(A, Qs, "lyap_solve(A, Qs)");
  if (!is_symmetric(Qs)) throw DimensionMismatch("lyap_solve: Qs must be symmetric");

  const Eigen::Index n = A.rows();
  Mat system = Mat::Zero(n * n, n * n);
  // vec() is column-major: vec(A X) = (I (x) A) vec(X), vec(X A^T) = (A (x) I) vec(X).
  for (Eigen::Index j = 0; j < n; ++j) {
    system.block(j * n, j * n, n, n) += A;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index k = 0; k < n; ++k) {
        system(j * n + i, k * n + i) += A(j, k);
      }
    }
  }

  Eigen::FullPivLU<Mat> lu(system);
  if (!lu.isInvertible()) {
    throw SingularSylvester("lyap_solve: I(x)A + A(x)I is rank deficient "
                            "(A has eigenvalues with lambda_i + lambda_j = 0)");
  }

  Vec rhs(n * n);
  for (Eigen::Index j = 0; j < n; ++j) rhs.segment(j * n, n) = -Qs.col(j);
  const Vec x = lu.solve(rhs);

  Mat X(n, n);
  for (Eigen::Index j = 0; j < n; ++j) X.col(j) = x.segment(j * n, n);
  X = 0.5 * (X + X.transpose());

  const double residual = (A * X + X * A.transpose() + Qs).norm();
  if (residual > 1e-10 * (1.0 + Qs.norm())) {
    throw SingularSylvester("lyap_solve: solution residual " + std::to_string(residual) +
                            " exceeds tolerance; system is near-singular");
  }
  return X;
}

inline double gare_residual_norm(const Mat& A, const Mat& M, const Mat& Qn, const Mat& P) {
  return (A * P + P * A.transpose() + Qn - P * M * P).norm();
}

struct GareDiagnostics {
  std::vector<double> residuals;  // residual Frobenius norm after each Newton step
  int iterations = 0;
};

/// Solves the game algebraic Riccati equation
///   A P + P A^T + Qn - P M P = 0
/// for the stabilizing solution (A - P M Hurwitz) by Newton-Kleinman iteration:
/// each step solves (A - Pk M) X + X (A - Pk M)^T + Qn + Pk M Pk = 0.
/// M may be sign-indefinite (M = C^T R^-1 C - gamma^-2 L^T S L); an infeasible
/// attenuation level surfaces as NoStabilizingInit or NewtonDiverged.
inline Mat gare_solve(const Mat& A, const Mat& M, const Mat& Qn,
                      GareDiagnostics* diag = nullptr) {
  require_square(A, "A");
  require_same_shape(A, M, "gare_solve(A, M)");
  require_same_shape(A, Qn, "gare_solve(A, Qn)");
  if (!is_symmetric(M)) throw DimensionMismatch("gare_solve: M must be symmetric");
  if (!is_symmetric(Qn)) throw DimensionMismatch("gare_solve: Qn must be symmetric");

  const Eigen::Index n = A.rows();
  Mat P = Mat::Zero(n, n);
  if (!is_hurwitz(A)) {
    // Pick the candidate shift with the largest stability margin: the first
    // Hurwitz hit can sit arbitrarily close to the axis, which leaves the
    // opening Lyapunov solve near-singular.
    double best_margin = 1e-10;
    bool found = false;
    for (double c = 1.0; c <= 65536.0; c *= 2.0) {
      const double margin = -max_eigenvalue_real_part(A - c * M);
      if (margin > best_margin) {
        best_margin = margin;
        P = c * Mat::Identity(n, n);
        found = true;
      }
    }
    if (!found) {
      throw NoStabilizingInit("gare_solve: no stabilizing initial iterate found; "
                              "the attenuation level may be infeasible");
    }
  }

  const double accept_tol = 1e-9 * (1.0 + Qn.norm());
  const double target_tol = 1e-14 * (1.0 + Qn.norm());
  constexpr int kMaxIterations = 200;

  double best = std::numeric_limits<double>::infinity();
  Mat best_P = P;
  double prev = std::numeric_limits<double>::infinity();

  for (int k = 0; k < kMaxIterations; ++k) {
    const Mat Acl = A - P * M;
    Mat next = lyap_solve(Acl, Qn + P * M * P);
    next = 0.5 * (next + next.transpose());
    const double res = gare_residual_norm(A, M, Qn, next);
    P = next;
    if (diag != nullptr) {
      diag->residuals.push_back(res);
      diag->iterations = k + 1;
    }
    if (res < best) {
      best = res;
      best_P = P;
    }
    if (res <= target_tol) break;
    if (k > 0 && res >= prev && best <= accept_tol) break;  // stalled at the numeric floor
    prev = res;
  }

  if (best > accept_tol) {
    throw NewtonDiverged("gare_solve: residual " + std::to_string(best) +
                         " failed to contract below tolerance within iteration budget; "
                         "the attenuation level may be infeasible");
  }
  P = best_P;

  if (!is_positive_definite(P)) {
    throw NewtonDiverged("gare_solve: converged solution is not positive definite; "
                         "the attenuation level may be infeasible");
  }
  if (!is_hurwitz(A - P * M)) {
    throw NewtonDiverged("gare_solve: converged solution is not stabilizing; "
                         "the attenuation level may be infeasible");
  }
  return P;
}

}  // namespace hfilt::linalg
