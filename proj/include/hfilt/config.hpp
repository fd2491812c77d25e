#pragma once
// Experiment configuration: one JSON file describes the plant, the game
// weights, and the optional training and comparison sections. Every error
// names the offending field so a malformed file is diagnosable from the CLI.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hfilt/game.hpp"
#include "hfilt/plant.hpp"
#include "hfilt/tpi.hpp"

namespace hfilt::config {

using linalg::Mat;
using linalg::Vec;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Analytic design family for solve-gare: the full game Riccati equation or
// the Kalman one (gamma term disabled, M = C' R^{-1} C).
enum class Design { hinf, kalman };

struct TrainSetup {
  tpi::TpiConfig tpi;
  double init_scale = 5.0;                    // quadratic warm-start Z0 = init_scale * I
  std::vector<Eigen::Index> hidden = {64, 64};  // bounded-mode hidden widths
  double value_range = 100.0;                 // bounded-mode value net output range
};

struct CompareSetup {
  long trials = 100;
  double duration_s = 25.0;
  double sample_hz = 200.0;
  double steer_amplitude = 0.5 * std::numbers::pi / 180.0;
  double steer_frequency = 2.0 * std::numbers::pi / 3.0;
  std::vector<plant::NoiseDistribution> distributions;
  std::uint64_t seed = 0;

  CompareSetup()
      : distributions{plant::NoiseDistribution::uniform01(),
                      plant::NoiseDistribution::beta(2.0, 2.0),
                      plant::NoiseDistribution::triangular(0.0, 1.0, 0.6),
                      plant::NoiseDistribution::beta(4.0, 2.0)} {}
};

struct Experiment {
  plant::LinearPlant plant;
  game::GameWeights weights;
  Design design = Design::hinf;
  TrainSetup train;
  CompareSetup compare;
};

namespace detail {

using nlohmann::json;

inline const json& require_field(const json& j, const char* key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) {
    throw ConfigError("config: missing field '" + path + key + "'");
  }
  return j.at(key);
}

inline double require_number(const json& j, const char* key, const std::string& path) {
  const json& f = require_field(j, key, path);
  if (!f.is_number()) throw ConfigError("config: field '" + path + key + "' must be a number");
  return f.get<double>();
}

inline double number_or(const json& j, const char* key, const std::string& path, double fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  const json& f = j.at(key);
  if (!f.is_number()) throw ConfigError("config: field '" + path + key + "' must be a number");
  return f.get<double>();
}

inline long integer_or(const json& j, const char* key, const std::string& path, long fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  const json& f = j.at(key);
  if (!f.is_number_integer()) {
    throw ConfigError("config: field '" + path + key + "' must be an integer");
  }
  return f.get<long>();
}

inline std::string string_or(const json& j, const char* key, const std::string& path,
                             const std::string& fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  const json& f = j.at(key);
  if (!f.is_string()) throw ConfigError("config: field '" + path + key + "' must be a string");
  return f.get<std::string>();
}

// Scalar -> s * I, flat array -> diagonal, array of arrays -> full matrix.
inline Mat parse_matrix(const json& f, Eigen::Index n, const std::string& where) {
  if (f.is_number()) return f.get<double>() * Mat::Identity(n, n);
  if (f.is_array() && !f.empty() && f.front().is_number()) {
    if (static_cast<Eigen::Index>(f.size()) != n) {
      throw ConfigError("config: field '" + where + "' diagonal must have " + std::to_string(n) +
                        " entries");
    }
    Vec d(n);
    for (Eigen::Index i = 0; i < n; ++i) d(i) = f.at(i).get<double>();
    return d.asDiagonal();
  }
  if (f.is_array() && !f.empty() && f.front().is_array()) {
    const auto rows = static_cast<Eigen::Index>(f.size());
    const auto cols = static_cast<Eigen::Index>(f.front().size());
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      const json& row = f.at(i);
      if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
        throw ConfigError("config: field '" + where + "' rows must have equal length");
      }
      for (Eigen::Index jx = 0; jx < cols; ++jx) m(i, jx) = row.at(jx).get<double>();
    }
    if (rows != n || cols != n) {
      throw ConfigError("config: field '" + where + "' must be " + std::to_string(n) + "x" +
                        std::to_string(n));
    }
    return m;
  }
  throw ConfigError("config: field '" + where + "' must be a scalar, diagonal, or matrix");
}

// Free-shape variant for plant matrices.
inline Mat parse_matrix_free(const json& f, const std::string& where) {
  if (!f.is_array() || f.empty() || !f.front().is_array()) {
    throw ConfigError("config: field '" + where + "' must be an array of rows");
  }
  const auto rows = static_cast<Eigen::Index>(f.size());
  const auto cols = static_cast<Eigen::Index>(f.front().size());
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = f.at(i);
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigError("config: field '" + where + "' rows must have equal length");
    }
    for (Eigen::Index jx = 0; jx < cols; ++jx) m(i, jx) = row.at(jx).get<double>();
  }
  return m;
}

// Scalar -> replicated, array -> componentwise.
inline Vec parse_vector(const json& f, Eigen::Index n, const std::string& where) {
  if (f.is_number()) return f.get<double>() * Vec::Ones(n);
  if (f.is_array()) {
    if (static_cast<Eigen::Index>(f.size()) != n) {
      throw ConfigError("config: field '" + where + "' must have " + std::to_string(n) +
                        " entries");
    }
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!f.at(i).is_number()) {
        throw ConfigError("config: field '" + where + "' entries must be numbers");
      }
      v(i) = f.at(i).get<double>();
    }
    return v;
  }
  throw ConfigError("config: field '" + where + "' must be a scalar or an array");
}

inline plant::LinearPlant parse_plant(const json& root) {
  const json& p = require_field(root, "plant", "");
  if (p.contains("bicycle")) {
    const json& b = p.at("bicycle");
    plant::BicycleParams params{.m = require_number(b, "m", "plant.bicycle."),
                                .a = require_number(b, "a", "plant.bicycle."),
                                .b = require_number(b, "b", "plant.bicycle."),
                                .k_f = require_number(b, "k_f", "plant.bicycle."),
                                .k_r = require_number(b, "k_r", "plant.bicycle."),
                                .I_zz = require_number(b, "I_zz", "plant.bicycle."),
                                .u_lon = require_number(b, "u", "plant.bicycle.")};
    return plant::bicycle_plant(params);
  }
  if (p.contains("A")) {
    Mat A = parse_matrix_free(p.at("A"), "plant.A");
    Mat B = parse_matrix_free(require_field(p, "B", "plant."), "plant.B");
    Mat C = parse_matrix_free(require_field(p, "C", "plant."), "plant.C");
    Mat L = parse_matrix_free(require_field(p, "L", "plant."), "plant.L");
    Mat D = p.contains("D") ? parse_matrix_free(p.at("D"), "plant.D") : Mat();
    return plant::LinearPlant(std::move(A), std::move(B), std::move(C), std::move(L),
                              std::move(D));
  }
  throw ConfigError("config: field 'plant' needs either 'bicycle' or matrices 'A','B','C','L'");
}

inline game::GameWeights parse_weights(const json& root, const plant::LinearPlant& sys) {
  const json& w = require_field(root, "weights", "");
  const Eigen::Index n = sys.state_dim();
  const Eigen::Index r = sys.meas_dim();
  const std::string mode_name = string_or(w, "mode", "weights.", "quadratic");
  game::Mode mode;
  if (mode_name == "quadratic") {
    mode = game::Mode::quadratic;
  } else if (mode_name == "bounded") {
    mode = game::Mode::bounded;
  } else {
    throw ConfigError("config: field 'weights.mode' must be 'quadratic' or 'bounded'");
  }
  Mat Q = parse_matrix(require_field(w, "Q", "weights."), n, "weights.Q");
  Mat R = parse_matrix(require_field(w, "R", "weights."), r, "weights.R");
  Mat S = parse_matrix(require_field(w, "S", "weights."), sys.output_dim(), "weights.S");
  const double gamma = require_number(w, "gamma", "weights.");
  Vec w_bar = parse_vector(require_field(w, "w_bar", "weights."), n, "weights.w_bar");
  Vec v_bar = parse_vector(require_field(w, "v_bar", "weights."), r, "weights.v_bar");
  try {
    return game::GameWeights(std::move(Q), std::move(R), std::move(S), gamma,
                             plant::NoiseBounds(std::move(w_bar), std::move(v_bar)), mode);
  } catch (const std::exception& ex) {
    throw ConfigError(std::string("config: invalid 'weights': ") + ex.what());
  }
}

inline plant::NoiseDistribution parse_distribution(const json& d, const std::string& where) {
  const std::string type = string_or(d, "type", where + ".", "");
  if (type == "uniform01") return plant::NoiseDistribution::uniform01();
  if (type == "beta") {
    return plant::NoiseDistribution::beta(require_number(d, "alpha", where + "."),
                                          require_number(d, "beta", where + "."));
  }
  if (type == "triangular") {
    return plant::NoiseDistribution::triangular(require_number(d, "lo", where + "."),
                                                require_number(d, "hi", where + "."),
                                                require_number(d, "mode", where + "."));
  }
  throw ConfigError("config: field '" + where +
                    ".type' must be 'uniform01', 'beta', or 'triangular'");
}

inline TrainSetup parse_train(const json& root, const plant::LinearPlant& sys, game::Mode mode) {
  TrainSetup setup;
  setup.tpi.mode = mode;
  setup.tpi.state_box = 0.1 * Vec::Ones(sys.state_dim());
  if (!root.contains("train")) return setup;
  const json& t = root.at("train");

  setup.tpi.alpha_omega = number_or(t, "alpha_omega", "train.", setup.tpi.alpha_omega);
  setup.tpi.alpha_theta = number_or(t, "alpha_theta", "train.", setup.tpi.alpha_theta);
  setup.tpi.alpha_eta = number_or(t, "alpha_eta", "train.", setup.tpi.alpha_eta);
  setup.tpi.num_agents =
      static_cast<int>(integer_or(t, "num_agents", "train.", setup.tpi.num_agents));
  setup.tpi.dt = number_or(t, "dt", "train.", setup.tpi.dt);
  setup.tpi.reset_horizon = integer_or(t, "reset_horizon", "train.", setup.tpi.reset_horizon);
  setup.tpi.iterations = integer_or(t, "iterations", "train.", setup.tpi.iterations);
  setup.tpi.lr_schedule.halve_every =
      integer_or(t, "halve_every", "train.", setup.tpi.lr_schedule.halve_every);
  setup.tpi.seed = static_cast<std::uint64_t>(integer_or(t, "seed", "train.", 0));
  if (t.contains("state_box")) {
    setup.tpi.state_box = parse_vector(t.at("state_box"), sys.state_dim(), "train.state_box");
  }
  const std::string opt = string_or(t, "optimizer", "train.", "");
  if (opt == "gd") {
    setup.tpi.optimizer = tpi::Optimizer::gd;
  } else if (opt == "adam") {
    setup.tpi.optimizer = tpi::Optimizer::adam;
  } else if (!opt.empty()) {
    throw ConfigError("config: field 'train.optimizer' must be 'gd' or 'adam'");
  }
  setup.init_scale = number_or(t, "init_scale", "train.", setup.init_scale);
  setup.value_range = number_or(t, "value_range", "train.", setup.value_range);
  if (t.contains("hidden")) {
    const json& h = t.at("hidden");
    if (!h.is_array() || h.empty()) {
      throw ConfigError("config: field 'train.hidden' must be a nonempty array");
    }
    setup.hidden.clear();
    for (const json& e : h) {
      if (!e.is_number_integer() || e.get<long>() <= 0) {
        throw ConfigError("config: field 'train.hidden' entries must be positive integers");
      }
      setup.hidden.push_back(e.get<Eigen::Index>());
    }
  }
  return setup;
}

inline CompareSetup parse_compare(const json& root) {
  CompareSetup setup;
  if (!root.contains("compare")) return setup;
  const json& c = root.at("compare");
  setup.trials = integer_or(c, "trials", "compare.", setup.trials);
  setup.duration_s = number_or(c, "duration_s", "compare.", setup.duration_s);
  setup.sample_hz = number_or(c, "sample_hz", "compare.", setup.sample_hz);
  setup.steer_amplitude =
      number_or(c, "steer_amplitude_rad", "compare.", setup.steer_amplitude);
  setup.steer_frequency =
      number_or(c, "steer_frequency_rad_s", "compare.", setup.steer_frequency);
  setup.seed = static_cast<std::uint64_t>(integer_or(c, "seed", "compare.", 0));
  if (c.contains("distributions")) {
    const json& ds = c.at("distributions");
    if (!ds.is_array() || ds.empty()) {
      throw ConfigError("config: field 'compare.distributions' must be a nonempty array");
    }
    setup.distributions.clear();
    for (std::size_t i = 0; i < ds.size(); ++i) {
      setup.distributions.push_back(
          parse_distribution(ds.at(i), "compare.distributions[" + std::to_string(i) + "]"));
    }
  }
  if (setup.trials <= 0) throw ConfigError("config: field 'compare.trials' must be positive");
  if (!(setup.duration_s > 0.0)) {
    throw ConfigError("config: field 'compare.duration_s' must be positive");
  }
  if (!(setup.sample_hz > 0.0)) {
    throw ConfigError("config: field 'compare.sample_hz' must be positive");
  }
  return setup;
}

}  // namespace detail

inline Experiment parse(const nlohmann::json& root) {
  plant::LinearPlant sys = detail::parse_plant(root);
  game::GameWeights weights = detail::parse_weights(root, sys);

  Design design = Design::hinf;
  const std::string d = detail::string_or(root, "design", "", "hinf");
  if (d == "kalman") {
    design = Design::kalman;
  } else if (d != "hinf") {
    throw ConfigError("config: field 'design' must be 'hinf' or 'kalman'");
  }

  TrainSetup train = detail::parse_train(root, sys, weights.mode);
  CompareSetup compare = detail::parse_compare(root);
  try {
    tpi::validate_config(train.tpi, sys.state_dim());
  } catch (const std::exception& ex) {
    throw ConfigError(std::string("config: invalid 'train': ") + ex.what());
  }
  return Experiment{std::move(sys), std::move(weights), design, std::move(train),
                    std::move(compare)};
}

inline Experiment load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  nlohmann::json root;
  try {
    in >> root;
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("config: JSON parse error: ") + ex.what());
  }
  return parse(root);
}

}  // namespace hfilt::config
