// Command-line harness: analytic Riccati filter design (solve-gare), the
// reinforcement training loop (train), the Monte-Carlo filter comparison
// (compare), and a single-trajectory dump (simulate).
//
// Exit codes: 0 success, 1 validation/configuration error, 2 numerical failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hfilt/approx.hpp"
#include "hfilt/bench.hpp"
#include "hfilt/config.hpp"
#include "hfilt/game.hpp"
#include "hfilt/linalg.hpp"
#include "hfilt/plant.hpp"
#include "hfilt/tpi.hpp"

namespace {

using namespace hfilt;
using linalg::Mat;
using linalg::Vec;

struct Options {
  std::string config;
  std::string out;
  std::string mode;
  std::string checkpoint;
  std::uint64_t seed = 0;
  long trials = 0;
  long iterations = 0;
  bool seed_given = false;
  bool trials_given = false;
  bool iterations_given = false;
};

const Eigen::IOFormat kMatrixFormat(6, 0, "  ", "\n", "  ", "");

// Applies --mode/--seed/--iterations overrides on top of the parsed config.
void apply_overrides(config::Experiment& exp, const Options& opt) {
  if (!opt.mode.empty()) {
    game::Mode mode;
    if (opt.mode == "quadratic") {
      mode = game::Mode::quadratic;
    } else if (opt.mode == "bounded") {
      mode = game::Mode::bounded;
    } else {
      throw config::ConfigError("--mode must be 'quadratic' or 'bounded'");
    }
    // Rebuild the weights so mode-specific structure checks rerun.
    exp.weights = game::GameWeights(exp.weights.Q, exp.weights.R, exp.weights.S,
                                    exp.weights.gamma, exp.weights.bounds, mode);
    exp.train.tpi.mode = mode;
  }
  if (opt.seed_given) {
    exp.train.tpi.seed = opt.seed;
    exp.compare.seed = opt.seed;
  }
  if (opt.iterations_given) exp.train.tpi.iterations = opt.iterations;
  if (opt.trials_given) {
    if (opt.trials <= 0) throw config::ConfigError("--trials must be positive");
    exp.compare.trials = opt.trials;
  }
}

std::ofstream open_output(const std::string& path) {
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(parent, ec);  // failure surfaces below
  }
  std::ofstream os(path);
  if (!os) throw config::ConfigError("cannot open output file '" + path + "'");
  return os;
}

Mat reinforcement_gain_or_fallback(const Options& opt, const Mat& analytic_gain) {
  if (opt.checkpoint.empty()) {
    std::cout << "note: no --checkpoint given; reinforcement column uses the analytic gain\n";
    return analytic_gain;
  }
  std::ifstream is(opt.checkpoint);
  if (!is) throw approx::CheckpointError("checkpoint: cannot open '" + opt.checkpoint + "'");
  return bench::load_gain_from_checkpoint(is);
}

int run_solve_gare(const Options& opt) {
  config::Experiment exp = config::load_file(opt.config);
  Options local = opt;
  apply_overrides(exp, local);

  const Mat M = exp.design == config::Design::kalman
                    ? Mat(exp.plant.C.transpose() *
                          exp.weights.R.llt().solve(exp.plant.C))
                    : game::riccati_m_matrix(exp.plant, exp.weights);
  const Mat P = linalg::gare_solve(exp.plant.A, M, exp.weights.Q);
  const Mat K = game::hinf_gain(P, exp.plant.C, exp.weights.R);
  const Mat residual_mat = exp.plant.A * P + P * exp.plant.A.transpose() + exp.weights.Q -
                           P * M * P;
  const double residual = residual_mat.norm();
  const double tol = 1e-9 * (1.0 + exp.weights.Q.norm());

  std::cout << "design: " << (exp.design == config::Design::kalman ? "kalman" : "hinf") << "\n";
  std::cout << "P =\n" << P.format(kMatrixFormat) << "\n";
  std::cout << "K =\n" << K.format(kMatrixFormat) << "\n";
  std::cout.precision(17);
  std::cout << "residual = " << residual << " (tolerance " << tol << ")\n";

  if (!opt.out.empty()) {
    std::ofstream os = open_output(opt.out);
    os << "name,row,col,value\n";
    os.precision(17);
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
      for (Eigen::Index j = 0; j < P.cols(); ++j) {
        os << "P," << i << ',' << j << ',' << P(i, j) << '\n';
      }
    }
    for (Eigen::Index i = 0; i < K.rows(); ++i) {
      for (Eigen::Index j = 0; j < K.cols(); ++j) {
        os << "K," << i << ',' << j << ',' << K(i, j) << '\n';
      }
    }
    os << "residual,0,0," << residual << '\n';
  }

  if (!(residual <= tol)) {
    std::cerr << "solve-gare: residual exceeds tolerance\n";
    return 2;
  }
  return 0;
}

// Shared tail of the train subcommand: drives the trainer, keeps every record
// produced before a divergence, writes the CSV, and checkpoints the nets.
template <class ValueNet, class NoiseNet>
int drive_training(tpi::Trainer<ValueNet, NoiseNet>& trainer, const tpi::Reference* reference,
                   long iterations, const std::string& out_prefix) {
  std::vector<tpi::TrainRecord> records;
  records.reserve(static_cast<std::size_t>(iterations));
  std::string failure;
  try {
    for (long k = 0; k < iterations; ++k) records.push_back(trainer.iterate(reference));
  } catch (const tpi::Diverged& ex) {
    failure = ex.what();
  }

  {
    std::ofstream os = open_output(out_prefix + ".csv");
    tpi::write_records_csv(os, records);
  }
  std::cout << "wrote " << records.size() << " training records to " << out_prefix << ".csv\n";

  if (!failure.empty()) {
    std::cerr << "train: " << failure << " (last finite record retained)\n";
    return 2;
  }

  {
    std::ofstream os = open_output(out_prefix + ".ckpt");
    tpi::save_checkpoint(os, trainer.nets());
  }
  std::cout << "wrote checkpoint to " << out_prefix << ".ckpt\n";

  if (!records.empty()) {
    const tpi::TrainRecord& last = records.back();
    std::cout.precision(6);
    std::cout << "final value_loss = " << last.value_loss
              << ", gain_loss = " << last.gain_loss << "\n";
    if (std::isfinite(last.e_omega)) {
      std::cout << "final e_omega = " << last.e_omega << ", e_theta = " << last.e_theta << "\n";
    }
  }
  return 0;
}

int run_train(const Options& opt) {
  config::Experiment exp = config::load_file(opt.config);
  apply_overrides(exp, opt);
  const std::string prefix = opt.out.empty() ? "train" : opt.out;
  const tpi::TpiConfig& cfg = exp.train.tpi;

  if (cfg.mode == game::Mode::quadratic) {
    const tpi::Reference reference = tpi::gare_reference(exp.plant, exp.weights);
    auto nets = tpi::consistent_quadratic_nets(exp.plant, exp.weights, exp.train.init_scale);
    tpi::Trainer trainer(cfg, exp.plant, exp.weights, std::move(nets));
    return drive_training(trainer, &reference, cfg.iterations, prefix);
  }

  std::mt19937_64 init_rng(cfg.seed);
  auto nets = tpi::bounded_mlp_nets(exp.plant, exp.weights, exp.train.hidden,
                                    exp.train.value_range, init_rng);
  tpi::Trainer trainer(cfg, exp.plant, exp.weights, std::move(nets));
  return drive_training(trainer, nullptr, cfg.iterations, prefix);
}

int run_compare(const Options& opt) {
  config::Experiment exp = config::load_file(opt.config);
  apply_overrides(exp, opt);

  const game::AnalyticSolution analytic = game::solve_hinf(exp.plant, exp.weights);
  std::vector<bench::FilterSpec> fixed;
  fixed.push_back({"reinforcement", reinforcement_gain_or_fallback(opt, analytic.K)});
  fixed.push_back({"hinf", analytic.K});

  const std::vector<bench::ComparisonRow> rows =
      bench::run_comparison(exp.plant, exp.weights, fixed, exp.compare);

  const std::string out_path = opt.out.empty() ? "compare.csv" : opt.out;
  {
    std::ofstream os = open_output(out_path);
    bench::write_comparison_csv(os, rows);
  }
  std::cout << "wrote " << out_path << " (" << exp.compare.trials << " trials per distribution)\n";

  std::cout.precision(4);
  for (const bench::ComparisonRow& row : rows) {
    std::cout << row.distribution << ":\n";
    for (std::size_t f = 0; f < row.filter_names.size(); ++f) {
      std::cout << "  " << row.filter_names[f] << " rms = [" << row.mean[f].rms.transpose()
                << "], ratio = " << row.mean[f].ratio << "\n";
    }
  }
  return 0;
}

int run_simulate(const Options& opt) {
  config::Experiment exp = config::load_file(opt.config);
  apply_overrides(exp, opt);

  const game::AnalyticSolution analytic = game::solve_hinf(exp.plant, exp.weights);
  const double dt = 1.0 / exp.compare.sample_hz;
  const plant::NoiseDistribution& dist = exp.compare.distributions.front();

  std::vector<bench::FilterSpec> filters;
  filters.push_back({"reinforcement", reinforcement_gain_or_fallback(opt, analytic.K)});
  filters.push_back({"hinf", analytic.K});
  filters.push_back(
      {"kalman", bench::kalman_gain_from_bounds(exp.plant, exp.weights.bounds, dist, dt)});
  for (const bench::FilterSpec& f : filters) bench::require_stable(exp.plant, f.K, f.name);

  const Eigen::Index n = exp.plant.state_dim();
  const Eigen::Index r = exp.plant.meas_dim();
  const bench::Steering steer{exp.compare.steer_amplitude, exp.compare.steer_frequency};
  const long steps = std::lround(exp.compare.duration_s * exp.compare.sample_hz);

  const std::string out_path = opt.out.empty() ? "simulate.csv" : opt.out;
  std::ofstream os = open_output(out_path);
  os << "t";
  for (Eigen::Index i = 1; i <= n; ++i) os << ",x_" << i;
  for (Eigen::Index j = 1; j <= r; ++j) os << ",y_" << j;
  for (const bench::FilterSpec& f : filters) {
    for (Eigen::Index i = 1; i <= n; ++i) os << ',' << f.name << "_" << i;
  }
  os << '\n';
  os.precision(17);

  // Same stream as the first trial of the first distribution in compare.
  std::mt19937_64 rng(bench::trial_seed(exp.compare.seed, 0, 0));
  Vec x = Vec::Zero(n);
  std::vector<Vec> x_hat(filters.size(), Vec::Zero(n));
  Vec w(n), v(r);
  for (long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const Vec u = steer.at(t, exp.plant.input_dim());
    for (Eigen::Index i = 0; i < n; ++i) {
      w(i) = plant::sample_bounded_noise(dist, exp.weights.bounds.w_bar(i), rng);
    }
    for (Eigen::Index j = 0; j < r; ++j) {
      v(j) = plant::sample_bounded_noise(dist, exp.weights.bounds.v_bar(j), rng);
    }
    const Vec y = exp.plant.C * x + exp.plant.D * u + v;

    os << t;
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << x(i);
    for (Eigen::Index j = 0; j < r; ++j) os << ',' << y(j);
    for (const Vec& xh : x_hat) {
      for (Eigen::Index i = 0; i < n; ++i) os << ',' << xh(i);
    }
    os << '\n';

    bench::joint_step(exp.plant, filters, x, x_hat, u, w, v, dt);
  }
  std::cout << "wrote " << steps << " samples to " << out_path << "\n";
  return 0;
}

int dispatch(int (*body)(const Options&), const Options& opt) {
  try {
    return body(opt);
  } catch (const config::ConfigError& ex) {
    std::cerr << ex.what() << "\n";
    return 1;
  } catch (const approx::CheckpointError& ex) {
    std::cerr << ex.what() << "\n";
    return 1;
  } catch (const plant::InvalidParams& ex) {
    std::cerr << ex.what() << "\n";
    return 1;
  } catch (const linalg::DimensionMismatch& ex) {
    std::cerr << ex.what() << "\n";
    return 1;
  } catch (const linalg::NoStabilizingInit& ex) {
    std::cerr << ex.what() << "\n";
    return 2;
  } catch (const linalg::NewtonDiverged& ex) {
    std::cerr << ex.what() << "\n";
    return 2;
  } catch (const linalg::SingularSylvester& ex) {
    std::cerr << ex.what() << "\n";
    return 2;
  } catch (const game::SingularR& ex) {
    std::cerr << ex.what() << "\n";
    return 2;
  } catch (const game::OutOfDomain& ex) {
    std::cerr << ex.what() << "\n";
    return 2;
  } catch (const bench::UnstableFilter& ex) {
    std::cerr << ex.what() << "\n";
    return 2;
  } catch (const tpi::Diverged& ex) {
    std::cerr << ex.what() << "\n";
    return 2;
  } catch (const std::exception& ex) {
    std::cerr << ex.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust estimation toolkit: game-Riccati filter design, reinforcement "
               "training, and Monte-Carlo filter comparison"};
  app.require_subcommand(1);

  Options opt;
  auto add_common = [&](CLI::App* sub, bool with_checkpoint) {
    sub->add_option("--config", opt.config, "experiment configuration file (JSON)")->required();
    sub->add_option("--out", opt.out, "output path (train: prefix for .csv/.ckpt)");
    sub->add_option("--seed", opt.seed, "RNG seed override");
    sub->add_option("--mode", opt.mode, "penalty mode override (quadratic|bounded)");
    sub->add_option("--trials", opt.trials, "comparison trial count override");
    sub->add_option("--iterations", opt.iterations, "training iteration count override");
    if (with_checkpoint) {
      sub->add_option("--checkpoint", opt.checkpoint, "trained checkpoint for the reinforcement gain");
    }
  };

  CLI::App* solve = app.add_subcommand("solve-gare", "solve the filter Riccati equation");
  add_common(solve, false);
  CLI::App* train = app.add_subcommand("train", "run the reinforcement training loop");
  add_common(train, false);
  CLI::App* compare = app.add_subcommand("compare", "Monte-Carlo filter comparison");
  add_common(compare, true);
  CLI::App* simulate = app.add_subcommand("simulate", "dump one noisy trajectory");
  add_common(simulate, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex);
    return code == 0 ? 0 : 1;
  }

  CLI::App* active = app.get_subcommands().front();
  opt.seed_given = active->count("--seed") > 0;
  opt.trials_given = active->count("--trials") > 0;
  opt.iterations_given = active->count("--iterations") > 0;

  if (active == solve) return dispatch(run_solve_gare, opt);
  if (active == train) return dispatch(run_train, opt);
  if (active == compare) return dispatch(run_compare, opt);
  return dispatch(run_simulate, opt);
}
