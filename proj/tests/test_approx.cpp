#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "hfilt/approx.hpp"
#include "test_util.hpp"

using namespace hfilt;
using approx::GainNet;
using approx::LinearNoiseNet;
using approx::Mlp;
using approx::QuadraticValueNet;
using linalg::Mat;
using linalg::Vec;

namespace {

double rel_err(const Vec& got, const Vec& want) {
  return (got - want).norm() / std::max(want.norm(), 1e-12);
}

// Central finite differences over parameters of a scalar functional.
template <typename Net, typename F>
Vec fd_over_params(Net& net, F&& scalar_of_net, double h) {
  const Vec p0 = net.params();
  Vec g(p0.size());
  for (Eigen::Index k = 0; k < p0.size(); ++k) {
    Vec p = p0;
    p(k) = p0(k) + h;
    net.set_params(p);
    const double fp = scalar_of_net(net);
    p(k) = p0(k) - h;
    net.set_params(p);
    const double fm = scalar_of_net(net);
    g(k) = (fp - fm) / (2.0 * h);
  }
  net.set_params(p0);
  return g;
}

}  // namespace

TEST_CASE("QuadraticValueNet forward and gradients", "[approx][quadratic]") {
  QuadraticValueNet net(2);

  SECTION("monomial features and the worked example") {
    Vec omega(3);
    omega << 1.0, 1.0, 1.0;
    net.set_params(omega);
    Vec x(2);
    x << 1.0, 2.0;
    const Vec sigma = net.features(x);
    CHECK(sigma(0) == 1.0);
    CHECK(sigma(1) == 2.0);
    CHECK(sigma(2) == 4.0);
    CHECK(net.forward(x) == 7.0);
  }

  SECTION("fresh net starts positive semidefinite with 0.1 on squares") {
    QuadraticValueNet fresh(3);
    const Vec p = fresh.params();
    REQUIRE(p.size() == 6);
    // order: x1^2, x1x2, x1x3, x2^2, x2x3, x3^2
    CHECK(p(0) == 0.1);
    CHECK(p(1) == 0.0);
    CHECK(p(2) == 0.0);
    CHECK(p(3) == 0.1);
    CHECK(p(4) == 0.0);
    CHECK(p(5) == 0.1);
  }

  SECTION("input gradient closed form") {
    Vec omega(3);
    omega << 1.5, -0.7, 2.2;
    net.set_params(omega);
    Vec x(2);
    x << 0.3, -0.9;
    const Vec g = net.input_gradient(x);
    CHECK(g(0) == Catch::Approx(2.0 * 1.5 * 0.3 + (-0.7) * (-0.9)).epsilon(1e-14));
    CHECK(g(1) == Catch::Approx((-0.7) * 0.3 + 2.0 * 2.2 * (-0.9)).epsilon(1e-14));
    CHECK(net.input_gradient(Vec::Zero(2)).norm() == 0.0);
  }

  SECTION("parameter gradient is the feature vector") {
    std::mt19937_64 rng(3);
    const Vec x = testutil::random_vector(rng, 2);
    CHECK((net.param_gradient(x) - net.features(x)).norm() == 0.0);
  }

  SECTION("mixed gradient: (dsigma/dx) c, independent of omega") {
    std::mt19937_64 rng(5);
    const Vec x = testutil::random_vector(rng, 2);
    const Vec c = testutil::random_vector(rng, 2);
    const Vec m1 = net.mixed_gradient(x, c);
    net.set_params(testutil::random_vector(rng, 3));
    const Vec m2 = net.mixed_gradient(x, c);
    CHECK((m1 - m2).norm() == 0.0);
    CHECK(net.mixed_gradient(x, Vec::Zero(2)).norm() == 0.0);

    // Finite differences of input_gradient(x)' c over omega (exact: linear).
    const double h = 1e-4;
    const Vec fd = fd_over_params(
        net, [&](QuadraticValueNet& n) { return n.input_gradient(x).dot(c); }, h);
    CHECK(rel_err(m2, fd) <= 1e-9);
  }

  SECTION("weights_from_form reproduces x' Z x") {
    std::mt19937_64 rng(7);
    const Mat Z = testutil::random_symmetric(rng, 3, 2.0);
    QuadraticValueNet net3(3);
    net3.set_params(QuadraticValueNet::weights_from_form(Z));
    for (int trial = 0; trial < 20; ++trial) {
      const Vec x = testutil::random_vector(rng, 3);
      REQUIRE(net3.forward(x) == Catch::Approx(x.dot(Z * x)).epsilon(1e-12));
    }
  }
}

TEST_CASE("LinearNoiseNet", "[approx][linear]") {
  LinearNoiseNet net(2);
  std::mt19937_64 rng(11);

  SECTION("starts at zero and maps through eta transpose") {
    CHECK(net.forward(Vec::Ones(2)).norm() == 0.0);
    const Mat eta = testutil::random_matrix(rng, 2, 2);
    net.set_params(Eigen::Map<const Vec>(eta.data(), 4));
    const Vec x = testutil::random_vector(rng, 2);
    CHECK((net.forward(x) - eta.transpose() * x).norm() == 0.0);
  }

  SECTION("parameter gradient is x upstream'") {
    const Vec x = testutil::random_vector(rng, 2);
    const Vec c = testutil::random_vector(rng, 2);
    const Vec g = net.param_gradient(x, c);
    const Mat expected = x * c.transpose();
    CHECK((g - Eigen::Map<const Vec>(expected.data(), 4)).norm() == 0.0);

    // Against finite differences of c' forward(x).
    const Vec fd = fd_over_params(
        net, [&](LinearNoiseNet& n) { return c.dot(n.forward(x)); }, 1e-5);
    CHECK(rel_err(g, fd) <= 1e-9);
  }
}

TEST_CASE("Mlp forward respects the scaled-tanh bound", "[approx][mlp]") {
  std::mt19937_64 rng(13);
  Vec range(2);
  range << 0.01, 0.05;
  Mlp net({2, 16, 16, 2}, range, rng);

  SECTION("zero parameters give zero output") {
    Mlp zeroed = net;
    zeroed.set_params(Vec::Zero(net.param_count()));
    CHECK(zeroed.forward(Vec::Ones(2)).norm() == 0.0);
  }

  SECTION("outputs strictly inside the range for random and extreme weights") {
    Mlp wild = net;
    wild.set_params(net.params() * 1000.0);  // drive the output tanh to saturation
    for (int trial = 0; trial < 10000; ++trial) {
      const Vec x = testutil::random_vector(rng, 2, 5.0);
      const Vec y1 = net.forward(x);
      const Vec y2 = wild.forward(x);
      for (int i = 0; i < 2; ++i) {
        REQUIRE(std::abs(y1(i)) < range(i));
        REQUIRE(std::abs(y2(i)) < range(i));
      }
    }
  }

  SECTION("deterministic evaluation") {
    const Vec x = testutil::random_vector(rng, 2);
    const Vec y1 = net.forward(x);
    const Vec y2 = net.forward(x);
    CHECK((y1 - y2).norm() == 0.0);

    std::mt19937_64 rng_a(99), rng_b(99);
    Mlp a({2, 8, 8, 1}, Vec::Ones(1), rng_a);
    Mlp b({2, 8, 8, 1}, Vec::Ones(1), rng_b);
    CHECK((a.params() - b.params()).norm() == 0.0);
  }
}

TEST_CASE("Mlp gradients match finite differences", "[approx][mlp]") {
  std::mt19937_64 rng(17);

  SECTION("input gradient, scalar net") {
    Vec range(1);
    range << 100.0;
    for (int trial = 0; trial < 30; ++trial) {
      Mlp net({2, 8, 8, 1}, range, rng);
      const Vec x = testutil::random_vector(rng, 2);
      const Vec g = net.input_gradient(x);
      Vec fd(2);
      const double h = 1e-5;
      for (int k = 0; k < 2; ++k) {
        Vec xp = x, xm = x;
        xp(k) += h;
        xm(k) -= h;
        fd(k) = (net.forward(xp)(0) - net.forward(xm)(0)) / (2.0 * h);
      }
      REQUIRE(rel_err(g, fd) <= 1e-5);
    }
  }

  SECTION("parameter gradient, vector output") {
    Vec range(2);
    range << 0.5, 2.0;
    for (int trial = 0; trial < 20; ++trial) {
      Mlp net({2, 6, 6, 2}, range, rng);
      const Vec x = testutil::random_vector(rng, 2);
      const Vec c = testutil::random_vector(rng, 2);
      const Vec g = net.param_gradient(x, c);
      const Vec fd = fd_over_params(
          net, [&](Mlp& n) { return c.dot(n.forward(x)); }, 1e-5);
      REQUIRE(rel_err(g, fd) <= 1e-4);
    }
  }

  SECTION("mixed gradient against nested finite differences") {
    Vec range(1);
    range << 50.0;
    for (int trial = 0; trial < 20; ++trial) {
      Mlp net({2, 6, 6, 1}, range, rng);
      const Vec x = testutil::random_vector(rng, 2);
      const Vec c = testutil::random_vector(rng, 2);
      const Vec g = net.mixed_gradient(x, c);
      const Vec fd = fd_over_params(
          net, [&](Mlp& n) { return n.input_gradient(x).dot(c); }, 1e-5);
      REQUIRE(rel_err(g, fd) <= 1e-4);
    }
  }

  SECTION("scalar-output guards") {
    Vec range(2);
    range << 1.0, 1.0;
    Mlp net({2, 4, 4, 2}, range, rng);
    CHECK_THROWS_AS(net.input_gradient(Vec::Zero(2)), approx::NotScalarOutput);
    CHECK_THROWS_AS(net.mixed_gradient(Vec::Zero(2), Vec::Zero(2)), approx::NotScalarOutput);
  }
}

TEST_CASE("adam_step", "[approx][optim]") {
  SECTION("zero gradient leaves parameters in place") {
    Vec p(2);
    p << 1.0, -2.0;
    approx::AdamState st(2);
    adam_step(p, Vec::Zero(2), st, 0.1);
    CHECK(p(0) == 1.0);
    CHECK(p(1) == -2.0);
    CHECK(st.step == 1);
  }

  SECTION("first step follows the hand-evaluated recurrence") {
    Vec p(2), g(2);
    p << 1.0, -2.0;
    g << 0.5, -3.0;
    approx::AdamState st(2);
    adam_step(p, g, st, 0.01);
    // t = 1: m_hat = g, v_hat = g^2, update = lr g / (|g| + eps).
    CHECK(p(0) == Catch::Approx(1.0 - 0.01 * 0.5 / (0.5 + 1e-8)).margin(1e-15));
    CHECK(p(1) == Catch::Approx(-2.0 + 0.01 * 3.0 / (3.0 + 1e-8)).margin(1e-15));
  }

  SECTION("constant gradient stream moves monotonically against it") {
    Vec p(1);
    p << 0.0;
    Vec g(1);
    g << 2.0;
    approx::AdamState st(1);
    double prev = p(0);
    for (int i = 0; i < 50; ++i) {
      adam_step(p, g, st, 0.05);
      REQUIRE(p(0) < prev);
      prev = p(0);
    }
  }

  SECTION("shape validation") {
    Vec p(2);
    approx::AdamState st(3);
    CHECK_THROWS_AS(adam_step(p, Vec::Zero(2), st, 0.1), approx::ShapeMismatch);
    approx::AdamState st2(2);
    CHECK_THROWS_AS(adam_step(p, Vec::Zero(3), st2, 0.1), approx::ShapeMismatch);
  }
}

TEST_CASE("gd_step", "[approx][optim]") {
  Vec p(1), g(1);
  p << 1.0;
  g << 2.0;
  approx::gd_step(p, g, 0.05);
  CHECK(p(0) == Catch::Approx(0.9).margin(1e-15));
  approx::gd_step(p, Vec::Zero(1), 0.05);
  CHECK(p(0) == Catch::Approx(0.9).margin(1e-15));
  approx::gd_step(p, g, 0.0);
  CHECK(p(0) == Catch::Approx(0.9).margin(1e-15));
  CHECK_THROWS_AS(approx::gd_step(p, Vec::Zero(2), 0.1), approx::ShapeMismatch);
}

TEST_CASE("checkpoint round-trips are exact", "[approx][io]") {
  std::mt19937_64 rng(23);

  SECTION("quadratic net") {
    QuadraticValueNet net(3);
    net.set_params(testutil::random_vector(rng, 6, 3.0));
    std::stringstream ss;
    net.save(ss);
    const QuadraticValueNet back = QuadraticValueNet::load(ss);
    CHECK((back.params() - net.params()).norm() == 0.0);
  }

  SECTION("linear noise net and gain") {
    LinearNoiseNet noise(2);
    noise.set_params(testutil::random_vector(rng, 4));
    std::stringstream s1;
    noise.save(s1);
    CHECK((LinearNoiseNet::load(s1).params() - noise.params()).norm() == 0.0);

    GainNet gain(2, 2);
    gain.set_params(testutil::random_vector(rng, 4));
    std::stringstream s2;
    gain.save(s2);
    CHECK((GainNet::load(s2).params() - gain.params()).norm() == 0.0);
  }

  SECTION("mlp with widths and range header") {
    Vec range(2);
    range << 0.01, 0.05;
    Mlp net({2, 16, 16, 2}, range, rng);
    std::stringstream ss;
    net.save(ss);
    const Mlp back = Mlp::load(ss);
    REQUIRE(back.widths() == net.widths());
    CHECK((back.range() - net.range()).norm() == 0.0);
    CHECK((back.params() - net.params()).norm() == 0.0);
    const Vec x = testutil::random_vector(rng, 2);
    CHECK((back.forward(x) - net.forward(x)).norm() == 0.0);
  }

  SECTION("malformed input is rejected") {
    std::stringstream bad1("mlp 3 2 4");
    CHECK_THROWS_AS(Mlp::load(bad1), approx::CheckpointError);
    std::stringstream bad2("quadratic -1");
    CHECK_THROWS_AS(QuadraticValueNet::load(bad2), approx::CheckpointError);
    std::stringstream bad3("gain 2 2\n1 2 3");
    CHECK_THROWS_AS(GainNet::load(bad3), approx::CheckpointError);
  }
}
