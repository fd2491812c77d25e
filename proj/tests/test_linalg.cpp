#include <catch2/catch_amalgamated.hpp>

#include <hfilt/linalg.hpp>

#include <cmath>
#include <random>

#include "test_util.hpp"

using namespace hfilt::linalg;
using testutil::random_hurwitz;
using testutil::random_matrix;
using testutil::random_spd;
using testutil::random_symmetric;

namespace {
Mat scalar(double v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return m;
}
}  // namespace

TEST_CASE("lyap_solve scalar and diagonal cases") {
  const Mat X = lyap_solve(scalar(-1.0), scalar(2.0));
  CHECK(X(0, 0) == Catch::Approx(1.0).margin(1e-14));

  const Mat X2 = lyap_solve(-Mat::Identity(2, 2), 2.0 * Mat::Identity(2, 2));
  CHECK((X2 - Mat::Identity(2, 2)).norm() < 1e-13);
}

TEST_CASE("lyap_solve random instances satisfy the equation") {
  std::mt19937_64 rng(12345);
  for (int trial = 0; trial < 50; ++trial) {
    const Mat A = random_hurwitz(rng, 3);
    const Mat Qs = random_symmetric(rng, 3);
    const Mat X = lyap_solve(A, Qs);
    const double residual = (A * X + X * A.transpose() + Qs).norm();
    CHECK(residual <= 1e-10 * (1.0 + Qs.norm()));
    CHECK((X - X.transpose()).norm() < 1e-14 * (1.0 + X.norm()));
  }
}

TEST_CASE("lyap_solve rejects resonant spectra") {
  Mat A = Mat::Zero(2, 2);
  A(0, 0) = 1.0;
  A(1, 1) = -1.0;  // lambda_1 + lambda_2 = 0
  CHECK_THROWS_AS(lyap_solve(A, Mat::Identity(2, 2)), SingularSylvester);
}

TEST_CASE("lyap_solve validates shapes") {
  CHECK_THROWS_AS(lyap_solve(Mat::Zero(2, 3), Mat::Identity(2, 2)), DimensionMismatch);
  CHECK_THROWS_AS(lyap_solve(-Mat::Identity(2, 2), Mat::Identity(3, 3)), DimensionMismatch);
  Mat Qs(2, 2);
  Qs << 1.0, 2.0, 3.0, 4.0;  // not symmetric
  CHECK_THROWS_AS(lyap_solve(-Mat::Identity(2, 2), Qs), DimensionMismatch);
}

TEST_CASE("gare_solve scalar instances match the quadratic formula") {
  // -2P + 1 - 0.5 P^2 = 0, positive root
  const Mat P1 = gare_solve(scalar(-1.0), scalar(0.5), scalar(1.0));
  CHECK(P1(0, 0) == Catch::Approx(-2.0 + std::sqrt(6.0)).epsilon(0).margin(1e-10));

  // Kalman case: -2P + 1 - P^2 = 0
  const Mat P2 = gare_solve(scalar(-1.0), scalar(1.0), scalar(1.0));
  CHECK(P2(0, 0) == Catch::Approx(std::sqrt(2.0) - 1.0).epsilon(0).margin(1e-10));
}

TEST_CASE("gare_solve random stabilizable instances") {
  std::mt19937_64 rng(777);
  std::uniform_int_distribution<int> dim(2, 4);
  int solved = 0;
  int rejected = 0;
  while (solved < 40) {
    const Eigen::Index n = dim(rng);
    const Mat A = random_hurwitz(rng, n);
    const Mat C = random_matrix(rng, n, n);
    const Mat L = random_matrix(rng, n, n);
    const double gamma = 4.0;
    const Mat M = C.transpose() * C - (1.0 / (gamma * gamma)) * L.transpose() * L;
    const Mat Q = random_spd(rng, n);
    GareDiagnostics diag;
    Mat P;
    try {
      P = gare_solve(A, M, Q, &diag);
    } catch (const NewtonDiverged&) {
      ++rejected;
      continue;
    } catch (const NoStabilizingInit&) {
      ++rejected;
      continue;
    }
    ++solved;
    CHECK(gare_residual_norm(A, M, Q, P) <= 1e-9 * (1.0 + Q.norm()));
    CHECK((P - P.transpose()).norm() <= 1e-12 * P.norm());
    CHECK(is_positive_definite(P));
    CHECK(is_hurwitz(A - P * M));

    // Residuals contract monotonically after the first step; only the final
    // entry may sit at the numeric floor.
    for (size_t k = 2; k + 1 < diag.residuals.size(); ++k) {
      CHECK(diag.residuals[k] <= diag.residuals[k - 1] * (1.0 + 1e-9) + 1e-13);
    }
  }
  CHECK(rejected < 10);
}

TEST_CASE("gare_solve reports an unreachable stabilizing start") {
  CHECK_THROWS_AS(gare_solve(scalar(1.0), scalar(-1.0), scalar(1.0)), NoStabilizingInit);
}

TEST_CASE("gare_solve starts from scaled identity when A is unstable") {
  // A = [1], M = 1, Q = 1: P = 1 + sqrt(2) stabilizes (A - PM = -sqrt(2)).
  const Mat P = gare_solve(scalar(1.0), scalar(1.0), scalar(1.0));
  CHECK(P(0, 0) == Catch::Approx(1.0 + std::sqrt(2.0)).epsilon(0).margin(1e-10));
}

TEST_CASE("hurwitz and definiteness predicates") {
  Mat rot(2, 2);
  rot << 0.0, 1.0, -1.0, 0.0;  // purely imaginary spectrum
  CHECK_FALSE(is_hurwitz(rot));
  CHECK(is_hurwitz(rot - 0.1 * Mat::Identity(2, 2)));
  CHECK(is_positive_definite(Mat::Identity(3, 3)));
  Mat ind(2, 2);
  ind << 1.0, 0.0, 0.0, -1e-3;
  CHECK_FALSE(is_positive_definite(ind));
}
