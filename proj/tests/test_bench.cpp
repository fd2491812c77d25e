#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "hfilt/bench.hpp"
#include "hfilt/config.hpp"
#include "hfilt/tpi.hpp"
#include "test_util.hpp"

using namespace hfilt;
using linalg::Mat;
using linalg::Vec;
using nlohmann::json;

namespace {

json bicycle_config() {
  return json::parse(R"({
    "plant": {"bicycle": {"m": 1412.0, "a": 1.06, "b": 1.85, "k_f": -128916.0,
                          "k_r": -85944.0, "I_zz": 1536.7, "u": 20.0}},
    "weights": {"mode": "quadratic", "Q": 20.0, "R": 10.0, "S": 1.0, "gamma": 1.0,
                "w_bar": 0.1, "v_bar": 0.1},
    "design": "hinf",
    "train": {"optimizer": "adam", "iterations": 100, "halve_every": 5000,
              "init_scale": 5.0, "hidden": [32, 16]},
    "compare": {"trials": 7, "duration_s": 2.0, "sample_hz": 100.0, "seed": 3}
  })");
}

json scalar_config(double gamma) {
  json j = json::parse(R"({
    "plant": {"A": [[-1.0]], "B": [[0.0]], "C": [[1.0]], "L": [[1.0]]},
    "weights": {"mode": "quadratic", "Q": 1.0, "R": 1.0, "S": 1.0, "gamma": 1.0,
                "w_bar": 1.0, "v_bar": 1.0}
  })");
  j["weights"]["gamma"] = gamma;
  return j;
}

}  // namespace

TEST_CASE("config parses the bicycle experiment") {
  const config::Experiment exp = config::parse(bicycle_config());

  CHECK(exp.plant.state_dim() == 2);
  CHECK(exp.plant.meas_dim() == 2);
  CHECK(exp.plant.A(0, 0) == Catch::Approx(-7.6080).margin(5e-4));
  CHECK(exp.weights.Q.isApprox(20.0 * Mat::Identity(2, 2)));
  CHECK(exp.weights.R.isApprox(10.0 * Mat::Identity(2, 2)));
  CHECK(exp.weights.gamma == 1.0);
  CHECK(exp.weights.mode == game::Mode::quadratic);
  CHECK(exp.design == config::Design::hinf);

  CHECK(exp.train.tpi.optimizer == tpi::Optimizer::adam);
  CHECK(exp.train.tpi.iterations == 100);
  CHECK(exp.train.tpi.lr_schedule.halve_every == 5000);
  CHECK(exp.train.tpi.alpha_omega == 0.05);  // untouched default
  CHECK(exp.train.tpi.state_box.isApprox(0.1 * Vec::Ones(2)));
  CHECK(exp.train.init_scale == 5.0);
  REQUIRE(exp.train.hidden.size() == 2);
  CHECK(exp.train.hidden[0] == 32);
  CHECK(exp.train.hidden[1] == 16);

  CHECK(exp.compare.trials == 7);
  CHECK(exp.compare.duration_s == 2.0);
  CHECK(exp.compare.sample_hz == 100.0);
  CHECK(exp.compare.seed == 3);
  // Default distribution set, in order.
  REQUIRE(exp.compare.distributions.size() == 4);
  CHECK(exp.compare.distributions[0].label() == "U(0,1)");
  CHECK(exp.compare.distributions[1].label() == "Beta(2,2)");
  CHECK(exp.compare.distributions[2].label() == "Triangular(0,1,0.6)");
  CHECK(exp.compare.distributions[3].label() == "Beta(4,2)");
  // Steering defaults from the comparison protocol.
  CHECK(exp.compare.steer_amplitude == Catch::Approx(0.5 * std::numbers::pi / 180.0));
  CHECK(exp.compare.steer_frequency == Catch::Approx(2.0 * std::numbers::pi / 3.0));
}

TEST_CASE("config errors name the offending field") {
  json j = bicycle_config();
  j["weights"].erase("gamma");
  CHECK_THROWS_WITH(config::parse(j), Catch::Matchers::ContainsSubstring("weights.gamma"));

  j = bicycle_config();
  j.erase("plant");
  CHECK_THROWS_WITH(config::parse(j), Catch::Matchers::ContainsSubstring("'plant'"));

  j = bicycle_config();
  j["plant"]["bicycle"].erase("I_zz");
  CHECK_THROWS_WITH(config::parse(j), Catch::Matchers::ContainsSubstring("plant.bicycle.I_zz"));

  j = bicycle_config();
  j["weights"]["mode"] = "cubic";
  CHECK_THROWS_AS(config::parse(j), config::ConfigError);

  j = bicycle_config();
  j["design"] = "h2";
  CHECK_THROWS_AS(config::parse(j), config::ConfigError);

  j = bicycle_config();
  j["compare"]["trials"] = 0;
  CHECK_THROWS_WITH(config::parse(j), Catch::Matchers::ContainsSubstring("compare.trials"));

  j = bicycle_config();
  j["weights"]["Q"] = -1.0;  // indefinite weight rejected by the game layer
  CHECK_THROWS_AS(config::parse(j), config::ConfigError);

  // A raw-matrix plant needs all of A, B, C, L.
  j = scalar_config(1.5);
  j["plant"].erase("C");
  CHECK_THROWS_WITH(config::parse(j), Catch::Matchers::ContainsSubstring("plant.C"));
}

TEST_CASE("config accepts scalar, diagonal, and full weight forms") {
  json j = bicycle_config();
  j["weights"]["Q"] = {20.0, 5.0};
  j["weights"]["R"] = {{10.0, 1.0}, {1.0, 10.0}};
  const config::Experiment exp = config::parse(j);
  Mat qd(2, 2), rf(2, 2);
  qd << 20.0, 0.0, 0.0, 5.0;
  rf << 10.0, 1.0, 1.0, 10.0;
  CHECK(exp.weights.Q.isApprox(qd));
  CHECK(exp.weights.R.isApprox(rf));

  j["weights"]["Q"] = {20.0, 5.0, 1.0};  // wrong diagonal length
  CHECK_THROWS_AS(config::parse(j), config::ConfigError);
}

TEST_CASE("config parses explicit distribution lists") {
  json j = bicycle_config();
  j["compare"]["distributions"] = {{{"type", "beta"}, {"alpha", 4.0}, {"beta", 2.0}},
                                   {{"type", "uniform01"}}};
  const config::Experiment exp = config::parse(j);
  REQUIRE(exp.compare.distributions.size() == 2);
  CHECK(exp.compare.distributions[0].label() == "Beta(4,2)");
  CHECK(exp.compare.distributions[1].label() == "U(0,1)");

  j["compare"]["distributions"] = {{{"type", "cauchy"}}};
  CHECK_THROWS_WITH(config::parse(j),
                    Catch::Matchers::ContainsSubstring("compare.distributions[0]"));
}

TEST_CASE("scalar Kalman gain matches the closed form") {
  // -2p + qc - p^2/rc = 0 with qc = rc = 1: p = sqrt(2) - 1 = K.
  const plant::LinearPlant sys(Mat::Constant(1, 1, -1.0), Mat::Zero(1, 1), Mat::Identity(1, 1),
                               Mat::Identity(1, 1));
  const Mat K = bench::solve_kalman_gain(sys, Mat::Identity(1, 1), Mat::Identity(1, 1));
  CHECK(K(0, 0) == Catch::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-12));
}

TEST_CASE("kalman_gain_from_bounds composes the variance map with the CARE") {
  const plant::LinearPlant sys(Mat::Constant(1, 1, -1.0), Mat::Zero(1, 1), Mat::Identity(1, 1),
                               Mat::Identity(1, 1));
  const double dt = 0.005;

  SECTION("uniform: Var = bound^2 / 3") {
    const double w_bar = 0.2, v_bar = 0.05;
    const plant::NoiseBounds bounds(Vec::Constant(1, w_bar), Vec::Constant(1, v_bar));
    const double qc = w_bar * w_bar / 3.0 * dt;
    const double rc = v_bar * v_bar / 3.0 * dt;
    const Mat expected =
        bench::solve_kalman_gain(sys, Mat::Constant(1, 1, qc), Mat::Constant(1, 1, rc));
    const Mat got = bench::kalman_gain_from_bounds(sys, bounds,
                                                   plant::NoiseDistribution::uniform01(), dt);
    CHECK(got(0, 0) == Catch::Approx(expected(0, 0)).epsilon(1e-12));
    // Scalar CARE closed form: p = rc (-1 + sqrt(1 + qc/rc)), K = p/rc.
    const double p = rc * (-1.0 + std::sqrt(1.0 + qc / rc));
    CHECK(got(0, 0) == Catch::Approx(p / rc).epsilon(1e-9));
  }

  SECTION("Beta(2,2): Var = bound^2 / 5") {
    const double w_bar = 0.3;
    const plant::NoiseBounds bounds(Vec::Constant(1, w_bar), Vec::Constant(1, w_bar));
    const double qc = w_bar * w_bar / 5.0 * dt;
    const Mat expected =
        bench::solve_kalman_gain(sys, Mat::Constant(1, 1, qc), Mat::Constant(1, 1, qc));
    const Mat got = bench::kalman_gain_from_bounds(sys, bounds,
                                                   plant::NoiseDistribution::beta(2.0, 2.0), dt);
    CHECK(got(0, 0) == Catch::Approx(expected(0, 0)).epsilon(1e-12));
  }

  SECTION("bad dt rejected") {
    const plant::NoiseBounds bounds(Vec::Ones(1), Vec::Ones(1));
    CHECK_THROWS_AS(
        bench::kalman_gain_from_bounds(sys, bounds, plant::NoiseDistribution::uniform01(), 0.0),
        plant::InvalidParams);
  }
}

TEST_CASE("noiseless paired trial tracks exactly") {
  const config::Experiment exp = config::parse(bicycle_config());
  const game::AnalyticSolution sol = game::solve_hinf(exp.plant, exp.weights);
  const std::vector<bench::FilterSpec> filters{
      {"hinf", sol.K},
      {"kalman", bench::kalman_gain_from_bounds(exp.plant, exp.weights.bounds,
                                                plant::NoiseDistribution::uniform01(), 0.005)}};
  std::mt19937_64 rng(1);
  // Steering active, but x(0) = x_hat(0) = 0 and no noise: zero error forever.
  const bench::Steering steer{0.01, 2.0};
  const auto metrics =
      bench::run_trial(exp.plant, exp.weights, filters, nullptr, steer, 1.0, 200.0, rng);
  REQUIRE(metrics.size() == 2);
  for (const bench::FilterMetrics& m : metrics) {
    CHECK(m.rms.isZero(0.0));
    CHECK(m.ratio == 0.0);
  }
}

TEST_CASE("duplicate filters see identical noise") {
  const config::Experiment exp = config::parse(bicycle_config());
  const game::AnalyticSolution sol = game::solve_hinf(exp.plant, exp.weights);
  const Mat kalman = bench::kalman_gain_from_bounds(exp.plant, exp.weights.bounds,
                                                    plant::NoiseDistribution::beta(2.0, 2.0),
                                                    1.0 / 200.0);
  const std::vector<bench::FilterSpec> filters{
      {"a", sol.K}, {"kalman", kalman}, {"b", sol.K}};
  const plant::NoiseDistribution dist = plant::NoiseDistribution::beta(2.0, 2.0);
  std::mt19937_64 rng(7);
  const bench::Steering steer{0.008, 2.0};
  const auto metrics =
      bench::run_trial(exp.plant, exp.weights, filters, &dist, steer, 2.0, 200.0, rng);
  REQUIRE(metrics.size() == 3);
  // Identical gains produce bitwise-identical metrics; the interleaved third
  // filter must not perturb them.
  CHECK(metrics[0].rms == metrics[2].rms);
  CHECK(metrics[0].ratio == metrics[2].ratio);
  CHECK(metrics[0].rms != metrics[1].rms);
  CHECK((metrics[0].rms.array() > 0.0).all());
}

TEST_CASE("unstable filters are rejected before simulation") {
  // A = +1 with K = 0 leaves A - KC = 1: not Hurwitz.
  const plant::LinearPlant sys(Mat::Constant(1, 1, 1.0), Mat::Zero(1, 1), Mat::Identity(1, 1),
                               Mat::Identity(1, 1));
  const game::GameWeights weights(Mat::Identity(1, 1), Mat::Identity(1, 1), Mat::Identity(1, 1),
                                  1.5, plant::NoiseBounds(Vec::Ones(1), Vec::Ones(1)),
                                  game::Mode::quadratic);
  const std::vector<bench::FilterSpec> filters{{"zero", Mat::Zero(1, 1)}};
  std::mt19937_64 rng(0);
  CHECK_THROWS_AS(bench::run_trial(sys, weights, filters, nullptr, bench::Steering{}, 1.0, 100.0,
                                   rng),
                  bench::UnstableFilter);
  CHECK_THROWS_WITH(bench::require_stable(sys, Mat::Zero(1, 1), "zero"),
                    Catch::Matchers::ContainsSubstring("zero"));
}

TEST_CASE("trial seeds depend on distribution and trial only") {
  CHECK(bench::trial_seed(5, 0, 0) != bench::trial_seed(5, 0, 1));
  CHECK(bench::trial_seed(5, 0, 0) != bench::trial_seed(5, 1, 0));
  CHECK(bench::trial_seed(5, 2, 9) == bench::trial_seed(5, 2, 9));
  CHECK(bench::trial_seed(5, 2, 9) != bench::trial_seed(6, 2, 9));
}

TEST_CASE("comparison rows are reproducible and paired") {
  json j = bicycle_config();
  j["compare"]["trials"] = 3;
  j["compare"]["duration_s"] = 1.0;
  j["compare"]["distributions"] = {{{"type", "uniform01"}}, {{"type", "beta"}, {"alpha", 4.0}, {"beta", 2.0}}};
  const config::Experiment exp = config::parse(j);
  const game::AnalyticSolution sol = game::solve_hinf(exp.plant, exp.weights);
  const std::vector<bench::FilterSpec> fixed{{"reinforcement", sol.K}, {"hinf", sol.K}};

  const auto rows1 = bench::run_comparison(exp.plant, exp.weights, fixed, exp.compare);
  const auto rows2 = bench::run_comparison(exp.plant, exp.weights, fixed, exp.compare);
  REQUIRE(rows1.size() == 2);
  CHECK(rows1[0].distribution == "U(0,1)");
  CHECK(rows1[1].distribution == "Beta(4,2)");
  REQUIRE(rows1[0].filter_names.size() == 3);
  CHECK(rows1[0].filter_names[2] == "kalman");

  for (std::size_t d = 0; d < rows1.size(); ++d) {
    for (std::size_t f = 0; f < rows1[d].mean.size(); ++f) {
      CHECK(rows1[d].mean[f].rms == rows2[d].mean[f].rms);
      CHECK(rows1[d].mean[f].ratio == rows2[d].mean[f].ratio);
    }
    // The duplicated analytic gain gives byte-identical columns.
    CHECK(rows1[d].mean[0].rms == rows1[d].mean[1].rms);
    CHECK(rows1[d].mean[0].ratio == rows1[d].mean[1].ratio);
  }

  std::ostringstream csv1, csv2;
  bench::write_comparison_csv(csv1, rows1);
  bench::write_comparison_csv(csv2, rows2);
  CHECK(csv1.str() == csv2.str());
  CHECK(csv1.str().rfind("distribution,filter,rms_1,rms_2,ratio\n", 0) == 0);
}

TEST_CASE("attenuation ratio stays below gamma^2 on the scalar plant") {
  // A = -1, C = L = 1, Q = R = S = 1, gamma = sqrt(2): K* = sqrt(6) - 2.
  const config::Experiment exp = config::parse(scalar_config(std::sqrt(2.0)));
  const game::AnalyticSolution sol = game::solve_hinf(exp.plant, exp.weights);
  CHECK(sol.K(0, 0) == Catch::Approx(std::sqrt(6.0) - 2.0).epsilon(1e-10));

  const std::vector<bench::FilterSpec> filters{{"hinf", sol.K}};
  const plant::NoiseDistribution dist = plant::NoiseDistribution::uniform01();
  const double bound = exp.weights.gamma * exp.weights.gamma * 1.05;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    std::mt19937_64 rng(bench::trial_seed(11, 0, trial));
    const auto metrics = bench::run_trial(exp.plant, exp.weights, filters, &dist,
                                          bench::Steering{}, 5.0, 200.0, rng);
    CHECK(metrics[0].ratio <= bound);
    CHECK(metrics[0].ratio > 0.0);
  }
}

TEST_CASE("gain extraction finds the gain block in any checkpoint") {
  Mat k(2, 2);
  k << 0.25, -0.5, 1.5, 0.125;

  SECTION("quadratic-value checkpoint") {
    tpi::TpiNets<approx::QuadraticValueNet, approx::LinearNoiseNet> nets{
        approx::QuadraticValueNet(2), approx::GainNet(k), approx::LinearNoiseNet(2)};
    std::stringstream ss;
    tpi::save_checkpoint(ss, nets);
    CHECK(bench::load_gain_from_checkpoint(ss).isApprox(k));
  }

  SECTION("mlp checkpoint stores the gain between network blocks") {
    std::mt19937_64 rng(3);
    tpi::TpiNets<approx::Mlp, approx::Mlp> nets{
        approx::Mlp({2, 8, 1}, Vec::Constant(1, 50.0), rng), approx::GainNet(k),
        approx::Mlp({2, 8, 2}, Vec::Constant(2, 0.1), rng)};
    std::stringstream ss;
    tpi::save_checkpoint(ss, nets);
    CHECK(bench::load_gain_from_checkpoint(ss).isApprox(k));
  }

  SECTION("malformed checkpoints are rejected") {
    std::stringstream bad("not-a-checkpoint 1\nquadratic 2\n");
    CHECK_THROWS_AS(bench::load_gain_from_checkpoint(bad), approx::CheckpointError);

    std::stringstream wrong_version("hfilt-checkpoint 2\n");
    CHECK_THROWS_AS(bench::load_gain_from_checkpoint(wrong_version), approx::CheckpointError);

    std::stringstream truncated("hfilt-checkpoint 1\ngain 2 2\n1.0 2.0\n");
    CHECK_THROWS_AS(bench::load_gain_from_checkpoint(truncated), approx::CheckpointError);

    std::stringstream gainless("hfilt-checkpoint 1\nquadratic 1\n1.0 1.0 1.0\n");
    CHECK_THROWS_AS(bench::load_gain_from_checkpoint(gainless), approx::CheckpointError);
  }
}

TEST_CASE("steering excitation drives only the first input") {
  const bench::Steering steer{0.5, 3.0};
  const Vec u = steer.at(0.4, 2);
  CHECK(u(0) == Catch::Approx(0.5 * std::sin(3.0 * 0.4)));
  CHECK(u(1) == 0.0);
  CHECK(bench::Steering{}.at(1.0, 1)(0) == 0.0);
}
