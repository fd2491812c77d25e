#pragma once

#include <Eigen/Dense>

#include <random>

namespace testutil {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                              double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

inline VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

inline MatrixXd random_symmetric(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  MatrixXd m = random_matrix(rng, n, n, scale);
  return 0.5 * (m + m.transpose());
}

inline MatrixXd random_spd(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  MatrixXd m = random_matrix(rng, n, n, scale);
  return m * m.transpose() + 0.1 * scale * MatrixXd::Identity(n, n);
}

// Shifts a random matrix left of the imaginary axis.
inline MatrixXd random_hurwitz(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  MatrixXd m = random_matrix(rng, n, n, scale);
  Eigen::EigenSolver<MatrixXd> es(m, false);
  const double shift = es.eigenvalues().real().maxCoeff();
  return m - (shift + 0.5 * scale) * MatrixXd::Identity(n, n);
}

}  // namespace testutil
