#pragma once

// Ternary policy iteration: simultaneous stochastic approximation of the
// value function, the filter gain, and the worst-case process noise for the
// estimation game. Each iteration advances a pool of error-state agents one
// integration step, then applies one gradient step per network:
//
//   value  omega^{k+1} = omega^k - a_w E[ sign(H) dH/domega ]   (v held fixed)
//   gain   theta^{k+1} = theta^k - a_t E[ dH/dtheta ]           (minimizer)
//   noise  eta^{k+1}   = eta^k   - a_e E[ d(-H)/deta ]          (maximizer)
//
// The gain and noise gradients are both evaluated at (omega^{k+1}, theta^k,
// eta^k) before either is applied.

#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hfilt/approx.hpp"
#include "hfilt/game.hpp"
#include "hfilt/game_gradients.hpp"
#include "hfilt/linalg.hpp"
#include "hfilt/plant.hpp"

namespace hfilt::tpi {

using linalg::Mat;
using linalg::Vec;

struct Diverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyDataset : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ZeroReference : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Optimizer { gd, adam };

// Learning-rate schedule: constant when halve_every <= 0, otherwise the base
// rate is multiplied by 2^-floor(k / halve_every) at iteration k.
struct LrSchedule {
  long halve_every = 0;

  double factor(long iteration) const {
    if (halve_every <= 0) return 1.0;
    return std::exp2(-static_cast<double>(iteration / halve_every));
  }
};

struct TpiConfig {
  double alpha_omega = 0.05;
  double alpha_theta = 0.05;
  double alpha_eta = 0.05;
  int num_agents = 64;
  double dt = 0.005;
  long reset_horizon = 400;
  Vec state_box;  // per-dimension half-width of the reset box
  long iterations = 25000;
  LrSchedule lr_schedule;
  game::Mode mode = game::Mode::quadratic;
  Optimizer optimizer = Optimizer::gd;
  std::uint64_t seed = 0;
};

inline void validate_config(const TpiConfig& cfg, Eigen::Index state_dim) {
  if (cfg.alpha_omega <= 0.0 || cfg.alpha_theta <= 0.0 || cfg.alpha_eta <= 0.0) {
    throw plant::InvalidParams("TpiConfig: learning rates must be positive");
  }
  if (cfg.num_agents <= 0) throw plant::InvalidParams("TpiConfig: num_agents must be positive");
  if (cfg.dt <= 0.0) throw plant::InvalidParams("TpiConfig: dt must be positive");
  if (cfg.reset_horizon <= 0) {
    throw plant::InvalidParams("TpiConfig: reset_horizon must be positive");
  }
  if (cfg.iterations < 0) throw plant::InvalidParams("TpiConfig: iterations must be nonnegative");
  if (cfg.state_box.size() != state_dim) {
    throw plant::InvalidParams("TpiConfig: state_box length must match the state dimension");
  }
  if ((cfg.state_box.array() <= 0.0).any()) {
    throw plant::InvalidParams("TpiConfig: state_box entries must be positive");
  }
}

// The three networks trained together. ValueNet maps state -> scalar value,
// NoiseNet maps state -> process noise, and the gain is always the linear
// GainNet whose parameters are the filter gain itself.
template <class ValueNet, class NoiseNet>
struct TpiNets {
  ValueNet value;
  approx::GainNet gain;
  NoiseNet noise;
};

struct AgentPool {
  std::vector<Vec> states;
  std::vector<long> steps;
  long forced_resets = 0;  // non-finite states replaced during generation
};

inline Vec sample_box(const Vec& box, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Vec x(box.size());
  for (Eigen::Index i = 0; i < box.size(); ++i) x(i) = box(i) * unit(rng);
  return x;
}

inline AgentPool make_pool(const TpiConfig& cfg, std::mt19937_64& rng) {
  AgentPool pool;
  pool.states.reserve(static_cast<std::size_t>(cfg.num_agents));
  pool.steps.reserve(static_cast<std::size_t>(cfg.num_agents));
  for (int i = 0; i < cfg.num_agents; ++i) pool.states.push_back(sample_box(cfg.state_box, rng));
  // Stagger the reset phases so the pool never respawns in lockstep; a
  // synchronized pool spends most of every horizon window fully decayed when
  // the interim closed loop is stable, starving the gradient signal.
  std::uniform_int_distribution<long> phase(0, cfg.reset_horizon - 1);
  for (int i = 0; i < cfg.num_agents; ++i) pool.steps.push_back(phase(rng));
  return pool;
}

// Hamiltonian along with the pieces the three phase gradients reuse. scale
// accumulates the absolute magnitudes of the summed terms so that the value
// phase can decide when H is indistinguishable from zero.
struct HamiltonianParts {
  double h = 0.0;
  double scale = 0.0;
  Vec g;  // dV/dx at the sample
  Vec w;
  Vec v;
  Vec f;  // error-state drift under (w, v)
};

template <class ValueNet, class NoiseNet>
HamiltonianParts hamiltonian_parts(const Vec& x, const TpiNets<ValueNet, NoiseNet>& nets,
                                   const plant::LinearPlant& sys, const game::GameWeights& weights,
                                   game::Mode mode) {
  HamiltonianParts parts;
  parts.g = nets.value.input_gradient(x);
  parts.w = nets.noise.forward(x);
  parts.v = game::fixed_measurement_noise(x, nets.gain.K(), parts.g, weights, mode);
  parts.f = plant::error_dynamics(sys, nets.gain.K(), x, parts.w, parts.v);

  const Vec z = sys.L * x;
  const double state_cost = z.dot(weights.S * z);
  const double gamma2 = weights.gamma * weights.gamma;
  double pen_w = 0.0;
  double pen_v = 0.0;
  if (mode == game::Mode::quadratic) {
    pen_w = parts.w.dot(weights.Q.llt().solve(parts.w));
    pen_v = parts.v.dot(weights.R.llt().solve(parts.v));
  } else {
    pen_w = game::nq_penalty(parts.w, weights.bounds.w_bar, weights.Q.diagonal());
    pen_v = game::nq_penalty(parts.v, weights.bounds.v_bar, weights.R.diagonal());
  }
  const double drift_term = parts.g.dot(parts.f);
  parts.h = state_cost - gamma2 * (pen_w + pen_v) + drift_term;
  parts.scale = std::abs(state_cost) + gamma2 * (std::abs(pen_w) + std::abs(pen_v)) +
                parts.g.cwiseProduct(parts.f).cwiseAbs().sum();
  return parts;
}

// sign(H) with a relative dead zone: zero when |H| is below 1e-9 times the
// summed magnitude of its terms, so cancellation noise at a solved policy
// does not produce random-walk updates.
inline double tolerant_sign(double h, double scale) {
  if (std::abs(h) <= 1e-9 * scale) return 0.0;
  return h > 0.0 ? 1.0 : -1.0;
}

namespace detail {

// Per-sample dH/dtheta with dV/dx constant: explicit term -g (C x + v)^T
// plus the chain through v(theta), which vanishes when v is exactly
// stationary but is carried so the gradient stays exact for any applied v.
inline Mat gain_sample_gradient(const Vec& x, const HamiltonianParts& parts,
                                const plant::LinearPlant& sys, const game::GameWeights& weights,
                                game::Mode mode, const Mat& gain) {
  const double gamma2 = weights.gamma * weights.gamma;
  Mat grad = -parts.g * (sys.C * x + parts.v).transpose();

  const Vec kg = gain.transpose() * parts.g;
  const Vec hv = -gamma2 * game::penalty_gradient_v(parts.v, weights, mode) - kg;
  Vec d(parts.v.size());
  if (mode == game::Mode::quadratic) {
    d = -(weights.R * hv) / (2.0 * gamma2);
  } else {
    for (Eigen::Index j = 0; j < parts.v.size(); ++j) {
      const double t = parts.v(j) / weights.bounds.v_bar(j);
      d(j) = -(1.0 - t * t) * hv(j) / (2.0 * gamma2 * weights.R(j, j));
    }
  }
  grad.noalias() += parts.g * d.transpose();
  return grad;
}

// Upstream vector for the noise net in the maximizer's loss -H:
// d(-H)/dw = -(g - gamma^2 dF/dw).
inline Vec noise_sample_upstream(const HamiltonianParts& parts, const game::GameWeights& weights,
                                 game::Mode mode) {
  const double gamma2 = weights.gamma * weights.gamma;
  return -(parts.g - gamma2 * game::penalty_gradient_w(parts.w, weights, mode));
}

}  // namespace detail

// One simulation step for every agent: zero-order-hold noise sampled at the
// pre-step state, RK4 on the error dynamics, then reset bookkeeping. Returns
// the post-step (post-reset) states as the iteration's dataset.
template <class ValueNet, class NoiseNet>
std::vector<Vec> generate_dataset(AgentPool& pool, const TpiNets<ValueNet, NoiseNet>& nets,
                                  const plant::LinearPlant& sys, const game::GameWeights& weights,
                                  const TpiConfig& cfg, std::mt19937_64& rng) {
  const Vec limit = 2.0 * cfg.state_box;
  for (std::size_t i = 0; i < pool.states.size(); ++i) {
    Vec& x = pool.states[i];
    const Vec g = nets.value.input_gradient(x);
    const Vec w = nets.noise.forward(x);
    const Vec v = game::fixed_measurement_noise(x, nets.gain.K(), g, weights, cfg.mode);
    x = plant::rk4_step(
        [&](const Vec& state) { return plant::error_dynamics(sys, nets.gain.K(), state, w, v); }, x,
        cfg.dt);
    pool.steps[i] += 1;

    if (!x.allFinite()) {
      x = sample_box(cfg.state_box, rng);
      pool.steps[i] = 0;
      pool.forced_resets += 1;
      continue;
    }
    if (pool.steps[i] > cfg.reset_horizon || (x.cwiseAbs().array() > limit.array()).any()) {
      x = sample_box(cfg.state_box, rng);
      pool.steps[i] = 0;
    }
  }
  return pool.states;
}

template <class ValueNet, class NoiseNet>
double value_loss(const std::vector<Vec>& dataset, const TpiNets<ValueNet, NoiseNet>& nets,
                  const plant::LinearPlant& sys, const game::GameWeights& weights,
                  game::Mode mode) {
  if (dataset.empty()) throw EmptyDataset("value_loss: dataset is empty");
  double total = 0.0;
  for (const Vec& x : dataset) {
    total += std::abs(hamiltonian_parts(x, nets, sys, weights, mode).h);
  }
  return total / static_cast<double>(dataset.size());
}

template <class ValueNet, class NoiseNet>
double gain_loss(const std::vector<Vec>& dataset, const TpiNets<ValueNet, NoiseNet>& nets,
                 const plant::LinearPlant& sys, const game::GameWeights& weights, game::Mode mode) {
  if (dataset.empty()) throw EmptyDataset("gain_loss: dataset is empty");
  double total = 0.0;
  for (const Vec& x : dataset) {
    total += hamiltonian_parts(x, nets, sys, weights, mode).h;
  }
  return total / static_cast<double>(dataset.size());
}

// d E[|H|] / domega with the measurement noise v treated as a constant: only
// the drift term g^T f depends on omega, so each sample contributes
// sign(H) * d(dV/dx . f)/domega, the mixed second derivative of the net.
template <class ValueNet, class NoiseNet>
Vec value_phase_gradient(const std::vector<Vec>& dataset, const TpiNets<ValueNet, NoiseNet>& nets,
                         const plant::LinearPlant& sys, const game::GameWeights& weights,
                         game::Mode mode) {
  if (dataset.empty()) throw EmptyDataset("value_phase_gradient: dataset is empty");
  Vec grad = Vec::Zero(nets.value.param_count());
  for (const Vec& x : dataset) {
    const HamiltonianParts parts = hamiltonian_parts(x, nets, sys, weights, mode);
    const double s = tolerant_sign(parts.h, parts.scale);
    if (s != 0.0) grad += s * nets.value.mixed_gradient(x, parts.f);
  }
  return grad / static_cast<double>(dataset.size());
}

// d E[H] / dtheta with dV/dx held constant; see detail::gain_sample_gradient.
template <class ValueNet, class NoiseNet>
Mat gain_phase_gradient(const std::vector<Vec>& dataset, const TpiNets<ValueNet, NoiseNet>& nets,
                        const plant::LinearPlant& sys, const game::GameWeights& weights,
                        game::Mode mode) {
  if (dataset.empty()) throw EmptyDataset("gain_phase_gradient: dataset is empty");
  Mat grad = Mat::Zero(nets.gain.K().rows(), nets.gain.K().cols());
  for (const Vec& x : dataset) {
    const HamiltonianParts parts = hamiltonian_parts(x, nets, sys, weights, mode);
    grad += detail::gain_sample_gradient(x, parts, sys, weights, mode, nets.gain.K());
  }
  return grad / static_cast<double>(dataset.size());
}

// d E[-H] / deta: dH/dw = g - gamma^2 dF/dw pushed through the noise net's
// parameter Jacobian and negated for the maximizing player.
template <class ValueNet, class NoiseNet>
Vec noise_phase_gradient(const std::vector<Vec>& dataset, const TpiNets<ValueNet, NoiseNet>& nets,
                         const plant::LinearPlant& sys, const game::GameWeights& weights,
                         game::Mode mode) {
  if (dataset.empty()) throw EmptyDataset("noise_phase_gradient: dataset is empty");
  Vec grad = Vec::Zero(nets.noise.param_count());
  for (const Vec& x : dataset) {
    const HamiltonianParts parts = hamiltonian_parts(x, nets, sys, weights, mode);
    grad += nets.noise.param_gradient(x, detail::noise_sample_upstream(parts, weights, mode));
  }
  return grad / static_cast<double>(dataset.size());
}

// Reference solution the quadratic-mode trainer should converge to.
struct Reference {
  Vec omega_star;  // quadratic value weights of gamma^2 P^{-1}
  Mat theta_star;  // analytic filter gain
  Mat eta_star;    // linear worst-noise map, w* = eta*^T x
};

inline Reference gare_reference(const plant::LinearPlant& sys, const game::GameWeights& weights) {
  const game::AnalyticSolution sol = game::solve_hinf(sys, weights);
  const double gamma2 = weights.gamma * weights.gamma;
  const Mat p_inv = sol.P.llt().solve(Mat::Identity(sol.P.rows(), sol.P.cols()));
  Reference ref;
  ref.omega_star = approx::QuadraticValueNet::weights_from_form(gamma2 * p_inv);
  ref.theta_star = sol.K;
  ref.eta_star = p_inv * weights.Q;  // transpose of w* = Q P^{-1} x
  return ref;
}

// Quadratic-mode warm start from a single inverse-covariance guess Z0 = z_scale * I.
// The value net carries V0 = x^T Z0 x while gain and noise start at their
// stationary points for that surface: theta0 = Z0^{-1} C^T R^{-1} (so v = -C x
// pointwise) and w0 = Q Z0 x / gamma^2. Seeding the triple self-consistently
// matters: the sign-based value update admits a second, spurious low-Z Bellman
// root per weakly observed mode, and an inconsistent start (e.g. all-small
// random weights) lets the transient push the value surface through that
// root's basin, after which the gain chases Z^{-1} C^T R^{-1} off to infinity.
inline TpiNets<approx::QuadraticValueNet, approx::LinearNoiseNet> consistent_quadratic_nets(
    const plant::LinearPlant& sys, const game::GameWeights& weights, double z_scale) {
  if (!(z_scale > 0.0) || !std::isfinite(z_scale)) {
    throw plant::InvalidParams("consistent_quadratic_nets: z_scale must be positive and finite");
  }
  const Eigen::Index n = sys.A.rows();
  const double gamma2 = weights.gamma * weights.gamma;
  const Mat z0 = z_scale * Mat::Identity(n, n);
  const Mat theta0 = sys.C.transpose() * weights.R.inverse() / z_scale;
  const Mat eta0 = (weights.Q * z0).transpose() / gamma2;
  TpiNets<approx::QuadraticValueNet, approx::LinearNoiseNet> nets{
      approx::QuadraticValueNet(n), approx::GainNet(n, sys.C.rows()), approx::LinearNoiseNet(n)};
  nets.value.set_params(approx::QuadraticValueNet::weights_from_form(z0));
  nets.gain.set_params(Eigen::Map<const Vec>(theta0.data(), theta0.size()));
  nets.noise.set_params(Eigen::Map<const Vec>(eta0.data(), eta0.size()));
  return nets;
}

// Bounded-mode network stack: SELU/Tanh MLPs for the value function and the
// process noise (whose output range is the componentwise noise bound), with a
// zero gain start — safe whenever the open-loop A is already Hurwitz. The
// value net consumes the generator before the noise net, so one seed pins
// both initializations.
inline TpiNets<approx::Mlp, approx::Mlp> bounded_mlp_nets(const plant::LinearPlant& sys,
                                                          const game::GameWeights& weights,
                                                          const std::vector<Eigen::Index>& hidden,
                                                          double value_range,
                                                          std::mt19937_64& rng) {
  if (!(value_range > 0.0) || !std::isfinite(value_range)) {
    throw plant::InvalidParams("bounded_mlp_nets: value_range must be positive and finite");
  }
  const Eigen::Index n = sys.state_dim();
  std::vector<Eigen::Index> value_widths{n};
  std::vector<Eigen::Index> noise_widths{n};
  for (Eigen::Index h : hidden) {
    value_widths.push_back(h);
    noise_widths.push_back(h);
  }
  value_widths.push_back(1);
  noise_widths.push_back(n);
  approx::Mlp value(value_widths, Vec::Constant(1, value_range), rng);
  approx::Mlp noise(noise_widths, weights.bounds.w_bar, rng);
  return {std::move(value), approx::GainNet(n, sys.meas_dim()), std::move(noise)};
}

inline std::pair<double, double> relative_errors(const Vec& omega, const Mat& theta,
                                                 const Vec& omega_star, const Mat& theta_star) {
  const double omega_norm = omega_star.norm();
  const double theta_norm = theta_star.norm();
  if (omega_norm == 0.0 || theta_norm == 0.0) {
    throw ZeroReference("relative_errors: reference norm is zero");
  }
  return {(omega - omega_star).norm() / omega_norm, (theta - theta_star).norm() / theta_norm};
}

struct TrainRecord {
  long iteration = 0;
  double value_loss = 0.0;
  double gain_loss = 0.0;
  double e_omega = std::numeric_limits<double>::quiet_NaN();
  double e_theta = std::numeric_limits<double>::quiet_NaN();
};

// Training CSV: one row per iteration, reference-error columns empty when no
// reference was supplied.
inline void write_records_csv(std::ostream& os, const std::vector<TrainRecord>& records) {
  os << "iter,value_loss,gain_loss,e_omega,e_theta\n";
  os.precision(17);
  for (const TrainRecord& rec : records) {
    os << rec.iteration << ',' << rec.value_loss << ',' << rec.gain_loss << ',';
    if (std::isfinite(rec.e_omega)) os << rec.e_omega;
    os << ',';
    if (std::isfinite(rec.e_theta)) os << rec.e_theta;
    os << '\n';
  }
}

template <class ValueNet, class NoiseNet>
class Trainer {
 public:
  Trainer(TpiConfig cfg, plant::LinearPlant sys, game::GameWeights weights,
          TpiNets<ValueNet, NoiseNet> nets)
      : cfg_(std::move(cfg)),
        sys_(std::move(sys)),
        weights_(std::move(weights)),
        nets_(std::move(nets)),
        rng_(cfg_.seed),
        adam_omega_(nets_.value.param_count()),
        adam_theta_(nets_.gain.param_count()),
        adam_eta_(nets_.noise.param_count()) {
    validate_config(cfg_, sys_.state_dim());
    pool_ = make_pool(cfg_, rng_);
  }

  const TpiNets<ValueNet, NoiseNet>& nets() const { return nets_; }
  TpiNets<ValueNet, NoiseNet>& nets() { return nets_; }
  const AgentPool& pool() const { return pool_; }
  long iteration() const { return iteration_; }

  // One full TPI iteration: dataset, value step, then gain and noise steps
  // both evaluated before either is applied.
  TrainRecord iterate(const Reference* reference = nullptr) {
    const std::vector<Vec> dataset = generate_dataset(pool_, nets_, sys_, weights_, cfg_, rng_);

    TrainRecord rec;
    rec.iteration = iteration_;
    const double factor = cfg_.lr_schedule.factor(iteration_);

    // Value phase at omega^k; the loss is logged before the step.
    {
      double loss = 0.0;
      Vec grad = Vec::Zero(nets_.value.param_count());
      for (const Vec& x : dataset) {
        const HamiltonianParts parts = hamiltonian_parts(x, nets_, sys_, weights_, cfg_.mode);
        loss += std::abs(parts.h);
        const double s = tolerant_sign(parts.h, parts.scale);
        if (s != 0.0) grad += s * nets_.value.mixed_gradient(x, parts.f);
      }
      const double count = static_cast<double>(dataset.size());
      rec.value_loss = loss / count;
      apply(nets_.value, grad / count, adam_omega_, cfg_.alpha_omega * factor);
    }

    // Gain and noise phases at (omega^{k+1}, theta^k, eta^k); both gradients
    // are assembled before either parameter set moves.
    {
      double loss = 0.0;
      Mat theta_grad = Mat::Zero(nets_.gain.K().rows(), nets_.gain.K().cols());
      Vec eta_grad = Vec::Zero(nets_.noise.param_count());
      for (const Vec& x : dataset) {
        const HamiltonianParts parts = hamiltonian_parts(x, nets_, sys_, weights_, cfg_.mode);
        loss += parts.h;
        theta_grad +=
            detail::gain_sample_gradient(x, parts, sys_, weights_, cfg_.mode, nets_.gain.K());
        eta_grad +=
            nets_.noise.param_gradient(x, detail::noise_sample_upstream(parts, weights_, cfg_.mode));
      }
      const double count = static_cast<double>(dataset.size());
      rec.gain_loss = loss / count;
      apply_gain(theta_grad / count, cfg_.alpha_theta * factor);
      apply(nets_.noise, eta_grad / count, adam_eta_, cfg_.alpha_eta * factor);
    }

    if (reference != nullptr) {
      const auto [e_omega, e_theta] = relative_errors(nets_.value.params(), nets_.gain.K(),
                                                      reference->omega_star, reference->theta_star);
      rec.e_omega = e_omega;
      rec.e_theta = e_theta;
    }

    iteration_ += 1;
    check_health(rec);
    return rec;
  }

  std::vector<TrainRecord> train(const Reference* reference = nullptr) {
    std::vector<TrainRecord> records;
    records.reserve(static_cast<std::size_t>(cfg_.iterations));
    for (long k = 0; k < cfg_.iterations; ++k) records.push_back(iterate(reference));
    return records;
  }

 private:
  template <class Net>
  void apply(Net& net, const Vec& grad, approx::AdamState& state, double lr) {
    Vec params = net.params();
    if (cfg_.optimizer == Optimizer::adam) {
      approx::adam_step(params, grad, state, lr);
    } else {
      approx::gd_step(params, grad, lr);
    }
    net.set_params(params);
  }

  void apply_gain(const Mat& grad, double lr) {
    Vec params = nets_.gain.params();
    const Vec flat = Eigen::Map<const Vec>(grad.data(), grad.size());
    if (cfg_.optimizer == Optimizer::adam) {
      approx::adam_step(params, flat, adam_theta_, lr);
    } else {
      approx::gd_step(params, flat, lr);
    }
    nets_.gain.set_params(params);
  }

  void check_health(const TrainRecord& rec) const {
    if (!std::isfinite(rec.value_loss) || !std::isfinite(rec.gain_loss) ||
        rec.value_loss > 1e12 || std::abs(rec.gain_loss) > 1e12) {
      throw Diverged("tpi: loss exceeded the divergence threshold");
    }
    if (!nets_.value.params().allFinite() || !nets_.gain.params().allFinite() ||
        !nets_.noise.params().allFinite()) {
      throw Diverged("tpi: network parameters are no longer finite");
    }
  }

  TpiConfig cfg_;
  plant::LinearPlant sys_;
  game::GameWeights weights_;
  TpiNets<ValueNet, NoiseNet> nets_;
  AgentPool pool_;
  std::mt19937_64 rng_;
  approx::AdamState adam_omega_;
  approx::AdamState adam_theta_;
  approx::AdamState adam_eta_;
  long iteration_ = 0;
};

// Checkpoint: magic line, then the value, gain, and noise blocks in that
// order, each in its network's own text format.
template <class ValueNet, class NoiseNet>
void save_checkpoint(std::ostream& os, const TpiNets<ValueNet, NoiseNet>& nets) {
  os << "hfilt-checkpoint 1\n";
  nets.value.save(os);
  nets.gain.save(os);
  nets.noise.save(os);
}

template <class ValueNet, class NoiseNet>
TpiNets<ValueNet, NoiseNet> load_checkpoint(std::istream& is) {
  std::string token;
  is >> token;
  if (token != "hfilt-checkpoint") {
    throw approx::CheckpointError("checkpoint: missing hfilt-checkpoint header");
  }
  long version = 0;
  if (!(is >> version) || version != 1) {
    throw approx::CheckpointError("checkpoint: unsupported version");
  }
  ValueNet value = ValueNet::load(is);
  approx::GainNet gain = approx::GainNet::load(is);
  NoiseNet noise = NoiseNet::load(is);
  return TpiNets<ValueNet, NoiseNet>{std::move(value), std::move(gain), std::move(noise)};
}

}  // namespace hfilt::tpi
