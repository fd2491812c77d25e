#pragma once

// Function approximators for the three-network solver: the quadratic value
// net and linear noise net of the analytic experiment, and the SELU/Tanh
// multilayer perceptron of the bounded-noise experiment. All gradients are
// exact, including the mixed derivative grad_params[(dV/dx)' c] needed by the
// value loss, plus Adam and plain gradient-descent steps and a text
// checkpoint format.

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hfilt/linalg.hpp"

namespace hfilt::approx {

using linalg::Mat;
using linalg::Vec;

struct NotScalarOutput : std::runtime_error {
  explicit NotScalarOutput(const std::string& what) : std::runtime_error(what) {}
};

struct ShapeMismatch : std::runtime_error {
  explicit ShapeMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct CheckpointError : std::runtime_error {
  explicit CheckpointError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Serialization helpers: whitespace-separated text, 17 significant digits so
// doubles round-trip exactly.

namespace detail {

inline void write_values(std::ostream& os, const double* data, Eigen::Index count) {
  os << std::setprecision(17);
  for (Eigen::Index i = 0; i < count; ++i) os << data[i] << '\n';
}

inline void read_values(std::istream& is, double* data, Eigen::Index count, const char* what) {
  for (Eigen::Index i = 0; i < count; ++i) {
    if (!(is >> data[i])) {
      throw CheckpointError(std::string("checkpoint: truncated data in ") + what);
    }
  }
}

inline void expect_token(std::istream& is, const std::string& expected) {
  std::string tok;
  if (!(is >> tok) || tok != expected) {
    throw CheckpointError("checkpoint: expected '" + expected + "', got '" + tok + "'");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// QuadraticValueNet: V(x; omega) = omega' sigma(x) with sigma the degree-two
// monomials in canonical order, e.g. n = 2 -> [x1^2, x1 x2, x2^2].

class QuadraticValueNet {
 public:
  explicit QuadraticValueNet(Eigen::Index n) : n_(n), omega_(Vec::Zero(feature_count(n))) {
    if (n <= 0) throw std::invalid_argument("QuadraticValueNet: n must be positive");
    // Small positive weight on the squared features keeps the initial V
    // positive semidefinite.
    Eigen::Index idx = 0;
    for (Eigen::Index i = 0; i < n_; ++i) {
      omega_(idx) = 0.1;
      idx += n_ - i;
    }
  }

  static Eigen::Index feature_count(Eigen::Index n) { return n * (n + 1) / 2; }

  Eigen::Index input_dim() const { return n_; }
  Eigen::Index param_count() const { return omega_.size(); }
  const Vec& params() const { return omega_; }

  void set_params(const Vec& p) {
    if (p.size() != omega_.size()) throw ShapeMismatch("QuadraticValueNet: wrong weight count");
    omega_ = p;
  }

  Vec features(const Vec& x) const {
    check_input(x);
    Vec sigma(param_count());
    Eigen::Index idx = 0;
    for (Eigen::Index i = 0; i < n_; ++i) {
      for (Eigen::Index j = i; j < n_; ++j) sigma(idx++) = x(i) * x(j);
    }
    return sigma;
  }

  double forward(const Vec& x) const { return omega_.dot(features(x)); }

  // dV/dx.
  Vec input_gradient(const Vec& x) const {
    check_input(x);
    Vec g = Vec::Zero(n_);
    Eigen::Index idx = 0;
    for (Eigen::Index i = 0; i < n_; ++i) {
      for (Eigen::Index j = i; j < n_; ++j, ++idx) {
        if (i == j) {
          g(i) += 2.0 * omega_(idx) * x(i);
        } else {
          g(i) += omega_(idx) * x(j);
          g(j) += omega_(idx) * x(i);
        }
      }
    }
    return g;
  }

  // dV/domega = sigma(x): the net is linear in its parameters.
  Vec param_gradient(const Vec& x) const { return features(x); }

  // d/domega [ (dV/dx)' c ] — independent of omega.
  Vec mixed_gradient(const Vec& x, const Vec& c) const {
    check_input(x);
    if (c.size() != n_) throw ShapeMismatch("QuadraticValueNet: c must have input dimension");
    Vec g(param_count());
    Eigen::Index idx = 0;
    for (Eigen::Index i = 0; i < n_; ++i) {
      for (Eigen::Index j = i; j < n_; ++j, ++idx) {
        g(idx) = (i == j) ? 2.0 * x(i) * c(i) : x(j) * c(i) + x(i) * c(j);
      }
    }
    return g;
  }

  // Weights representing x' Z x for symmetric Z (diagonal entries map
  // one-to-one, off-diagonal pairs fold into a single monomial).
  static Vec weights_from_form(const Mat& Z) {
    linalg::require_square(Z, "Z");
    const Eigen::Index n = Z.rows();
    Vec w(feature_count(n));
    Eigen::Index idx = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i; j < n; ++j) w(idx++) = (i == j) ? Z(i, i) : Z(i, j) + Z(j, i);
    }
    return w;
  }

  void save(std::ostream& os) const {
    os << "quadratic " << n_ << '\n';
    detail::write_values(os, omega_.data(), omega_.size());
  }

  static QuadraticValueNet load(std::istream& is) {
    detail::expect_token(is, "quadratic");
    Eigen::Index n = 0;
    if (!(is >> n) || n <= 0) throw CheckpointError("checkpoint: bad quadratic net dimension");
    QuadraticValueNet net(n);
    detail::read_values(is, net.omega_.data(), net.omega_.size(), "quadratic net");
    return net;
  }

 private:
  void check_input(const Vec& x) const {
    if (x.size() != n_) throw linalg::DimensionMismatch("QuadraticValueNet: wrong input length");
  }

  Eigen::Index n_;
  Vec omega_;
};

// ---------------------------------------------------------------------------
// LinearNoiseNet: w(x; eta) = eta' x with eta an n x n weight matrix,
// initialized at zero.

class LinearNoiseNet {
 public:
  explicit LinearNoiseNet(Eigen::Index n) : eta_(Mat::Zero(n, n)) {
    if (n <= 0) throw std::invalid_argument("LinearNoiseNet: n must be positive");
  }

  Eigen::Index input_dim() const { return eta_.rows(); }
  Eigen::Index output_dim() const { return eta_.rows(); }
  Eigen::Index param_count() const { return eta_.size(); }
  const Mat& eta() const { return eta_; }

  Vec params() const { return Eigen::Map<const Vec>(eta_.data(), eta_.size()); }

  void set_params(const Vec& p) {
    if (p.size() != eta_.size()) throw ShapeMismatch("LinearNoiseNet: wrong weight count");
    eta_ = Eigen::Map<const Mat>(p.data(), eta_.rows(), eta_.cols());
  }

  Vec forward(const Vec& x) const {
    if (x.size() != eta_.rows()) throw linalg::DimensionMismatch("LinearNoiseNet: wrong input");
    return eta_.transpose() * x;
  }

  // d/deta [ upstream' (eta' x) ] = x upstream', flattened like params().
  Vec param_gradient(const Vec& x, const Vec& upstream) const {
    if (x.size() != eta_.rows() || upstream.size() != eta_.cols()) {
      throw ShapeMismatch("LinearNoiseNet: gradient shape mismatch");
    }
    const Mat g = x * upstream.transpose();
    return Eigen::Map<const Vec>(g.data(), g.size());
  }

  void save(std::ostream& os) const {
    os << "linear " << eta_.rows() << '\n';
    detail::write_values(os, eta_.data(), eta_.size());
  }

  static LinearNoiseNet load(std::istream& is) {
    detail::expect_token(is, "linear");
    Eigen::Index n = 0;
    if (!(is >> n) || n <= 0) throw CheckpointError("checkpoint: bad linear net dimension");
    LinearNoiseNet net(n);
    detail::read_values(is, net.eta_.data(), net.eta_.size(), "linear net");
    return net;
  }

 private:
  Mat eta_;
};

// ---------------------------------------------------------------------------
// GainNet: the filter gain parameterized directly, K(theta) = theta.

class GainNet {
 public:
  GainNet(Eigen::Index n, Eigen::Index r) : theta_(Mat::Zero(n, r)) {
    if (n <= 0 || r <= 0) throw std::invalid_argument("GainNet: dimensions must be positive");
  }

  explicit GainNet(Mat theta) : theta_(std::move(theta)) {}

  const Mat& K() const { return theta_; }
  Mat& K() { return theta_; }
  Eigen::Index param_count() const { return theta_.size(); }

  Vec params() const { return Eigen::Map<const Vec>(theta_.data(), theta_.size()); }

  void set_params(const Vec& p) {
    if (p.size() != theta_.size()) throw ShapeMismatch("GainNet: wrong weight count");
    theta_ = Eigen::Map<const Mat>(p.data(), theta_.rows(), theta_.cols());
  }

  void save(std::ostream& os) const {
    os << "gain " << theta_.rows() << ' ' << theta_.cols() << '\n';
    detail::write_values(os, theta_.data(), theta_.size());
  }

  static GainNet load(std::istream& is) {
    detail::expect_token(is, "gain");
    Eigen::Index n = 0, r = 0;
    if (!(is >> n >> r) || n <= 0 || r <= 0) {
      throw CheckpointError("checkpoint: bad gain dimensions");
    }
    GainNet net(n, r);
    detail::read_values(is, net.theta_.data(), net.theta_.size(), "gain");
    return net;
  }

 private:
  Mat theta_;
};

// ---------------------------------------------------------------------------
// Mlp: fully connected net with SELU hidden layers and a Tanh output layer
// scaled componentwise by a range vector, so outputs stay strictly inside
// (-range, +range) for any parameters.

namespace detail {

// Standard self-normalizing constants.
constexpr double kSeluLambda = 1.0507009873554805;
constexpr double kSeluAlpha = 1.6732632423543772;

inline double selu(double z) {
  return z > 0.0 ? kSeluLambda * z : kSeluLambda * kSeluAlpha * (std::exp(z) - 1.0);
}
inline double selu_d(double z) {
  return z > 0.0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(z);
}
inline double selu_dd(double z) {
  return z > 0.0 ? 0.0 : kSeluLambda * kSeluAlpha * std::exp(z);
}

}  // namespace detail

class Mlp {
 public:
  // widths = [n_in, hidden..., n_out]; range has n_out entries. Weights start
  // as fan-in-scaled normal draws (std = 1/sqrt(fan_in)), biases at zero.
  Mlp(std::vector<Eigen::Index> widths, Vec range, std::mt19937_64& rng)
      : widths_(std::move(widths)), range_(std::move(range)) {
    if (widths_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output");
    for (Eigen::Index w : widths_) {
      if (w <= 0) throw std::invalid_argument("Mlp: widths must be positive");
    }
    if (range_.size() != widths_.back()) throw ShapeMismatch("Mlp: range must match n_out");
    if (range_.minCoeff() <= 0.0) throw std::invalid_argument("Mlp: range must be positive");

    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      const double std_dev = 1.0 / std::sqrt(static_cast<double>(widths_[l]));
      Mat W(widths_[l + 1], widths_[l]);
      for (Eigen::Index i = 0; i < W.rows(); ++i) {
        for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = std_dev * normal(rng);
      }
      W_.push_back(std::move(W));
      b_.push_back(Vec::Zero(widths_[l + 1]));
    }
  }

  Eigen::Index input_dim() const { return widths_.front(); }
  Eigen::Index output_dim() const { return widths_.back(); }
  const std::vector<Eigen::Index>& widths() const { return widths_; }
  const Vec& range() const { return range_; }

  Eigen::Index param_count() const {
    Eigen::Index total = 0;
    for (std::size_t l = 0; l < W_.size(); ++l) total += W_[l].size() + b_[l].size();
    return total;
  }

  Vec params() const {
    Vec p(param_count());
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < W_.size(); ++l) {
      p.segment(at, W_[l].size()) = Eigen::Map<const Vec>(W_[l].data(), W_[l].size());
      at += W_[l].size();
      p.segment(at, b_[l].size()) = b_[l];
      at += b_[l].size();
    }
    return p;
  }

  void set_params(const Vec& p) {
    if (p.size() != param_count()) throw ShapeMismatch("Mlp: wrong parameter count");
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < W_.size(); ++l) {
      W_[l] = Eigen::Map<const Mat>(p.data() + at, W_[l].rows(), W_[l].cols());
      at += W_[l].size();
      b_[l] = p.segment(at, b_[l].size());
      at += b_[l].size();
    }
  }

  Vec forward(const Vec& x) const {
    check_input(x);
    Vec a = x;
    for (std::size_t l = 0; l < W_.size(); ++l) {
      Vec z = W_[l] * a + b_[l];
      if (l + 1 < W_.size()) {
        a = z.unaryExpr([](double v) { return detail::selu(v); });
      } else {
        a.resize(z.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) {
          a(i) = range_(i) * linalg::interior_tanh(z(i));
        }
      }
    }
    return a;
  }

  // dV/dx for a scalar-output net.
  Vec input_gradient(const Vec& x) const {
    require_scalar("input_gradient");
    const Trace t = run(x);
    Vec zbar = output_zbar(t, Vec::Ones(1));
    for (std::size_t l = W_.size(); l-- > 1;) {
      const Vec abar = W_[l].transpose() * zbar;
      zbar = abar.cwiseProduct(
          t.z[l - 1].unaryExpr([](double v) { return detail::selu_d(v); }));
    }
    return W_[0].transpose() * zbar;
  }

  // Flat gradient of upstream' forward(x) over all parameters.
  Vec param_gradient(const Vec& x, const Vec& upstream) const {
    if (upstream.size() != output_dim()) throw ShapeMismatch("Mlp: upstream must match n_out");
    const Trace t = run(x);
    Vec grad = Vec::Zero(param_count());
    Vec zbar = output_zbar(t, upstream);
    for (std::size_t l = W_.size(); l-- > 0;) {
      write_layer_grad(grad, l, zbar * t.a[l].transpose(), zbar);
      if (l == 0) break;
      const Vec abar = W_[l].transpose() * zbar;
      zbar = abar.cwiseProduct(
          t.z[l - 1].unaryExpr([](double v) { return detail::selu_d(v); }));
    }
    return grad;
  }

  // Scalar-output convenience: gradient of V itself.
  Vec param_gradient(const Vec& x) const {
    require_scalar("param_gradient");
    return param_gradient(x, Vec::Ones(1));
  }

  // Flat gradient over parameters of G = (dV/dx)' c with c constant,
  // computed by a forward tangent sweep (tangent of x is c) followed by a
  // reverse sweep through both the primal and tangent chains.
  Vec mixed_gradient(const Vec& x, const Vec& c) const {
    require_scalar("mixed_gradient");
    if (c.size() != input_dim()) throw ShapeMismatch("Mlp: c must have input dimension");
    const std::size_t L = W_.size();
    const Trace t = run(x);

    // Tangent sweep: tz[l] = W_l ta_l, ta_{l+1} = phi'(z_l) . tz[l].
    std::vector<Vec> ta(L + 1), tz(L);
    ta[0] = c;
    for (std::size_t l = 0; l < L; ++l) {
      tz[l] = W_[l] * ta[l];
      if (l + 1 < L) {
        ta[l + 1] = tz[l].cwiseProduct(
            t.z[l].unaryExpr([](double v) { return detail::selu_d(v); }));
      } else {
        Vec d(tz[l].size());
        for (Eigen::Index i = 0; i < d.size(); ++i) {
          const double th = std::tanh(t.z[l](i));
          d(i) = range_(i) * (1.0 - th * th);
        }
        ta[l + 1] = tz[l].cwiseProduct(d);
      }
    }

    // Reverse sweep with adjoint pairs for the primal and tangent values.
    Vec grad = Vec::Zero(param_count());
    Vec abar = Vec::Zero(1);
    Vec tabar = Vec::Ones(1);  // G = ta[L](0)
    for (std::size_t l = L; l-- > 0;) {
      Vec phi_d(t.z[l].size()), phi_dd(t.z[l].size());
      if (l + 1 < L) {
        for (Eigen::Index i = 0; i < t.z[l].size(); ++i) {
          phi_d(i) = detail::selu_d(t.z[l](i));
          phi_dd(i) = detail::selu_dd(t.z[l](i));
        }
      } else {
        for (Eigen::Index i = 0; i < t.z[l].size(); ++i) {
          const double th = std::tanh(t.z[l](i));
          phi_d(i) = range_(i) * (1.0 - th * th);
          phi_dd(i) = range_(i) * (-2.0 * th * (1.0 - th * th));
        }
      }
      const Vec zbar =
          abar.cwiseProduct(phi_d) + tabar.cwiseProduct(phi_dd).cwiseProduct(tz[l]);
      const Vec tzbar = tabar.cwiseProduct(phi_d);
      write_layer_grad(grad, l, zbar * t.a[l].transpose() + tzbar * ta[l].transpose(), zbar);
      if (l == 0) break;
      abar = W_[l].transpose() * zbar;
      tabar = W_[l].transpose() * tzbar;
    }
    return grad;
  }

  void save(std::ostream& os) const {
    os << "mlp " << widths_.size();
    for (Eigen::Index w : widths_) os << ' ' << w;
    os << '\n';
    detail::write_values(os, range_.data(), range_.size());
    const Vec p = params();
    detail::write_values(os, p.data(), p.size());
  }

  static Mlp load(std::istream& is) {
    detail::expect_token(is, "mlp");
    std::size_t depth = 0;
    if (!(is >> depth) || depth < 2 || depth > 64) {
      throw CheckpointError("checkpoint: bad mlp depth");
    }
    std::vector<Eigen::Index> widths(depth);
    for (auto& w : widths) {
      if (!(is >> w) || w <= 0) throw CheckpointError("checkpoint: bad mlp width");
    }
    Vec range(widths.back());
    detail::read_values(is, range.data(), range.size(), "mlp range");
    if (range.minCoeff() <= 0.0) throw CheckpointError("checkpoint: mlp range must be positive");
    std::mt19937_64 rng(0);
    Mlp net(widths, range, rng);
    Vec p(net.param_count());
    detail::read_values(is, p.data(), p.size(), "mlp weights");
    net.set_params(p);
    return net;
  }

 private:
  struct Trace {
    std::vector<Vec> z;  // pre-activations per layer
    std::vector<Vec> a;  // a[0] = x, a[l+1] = phi(z[l])
  };

  Trace run(const Vec& x) const {
    check_input(x);
    Trace t;
    t.a.reserve(W_.size() + 1);
    t.z.reserve(W_.size());
    t.a.push_back(x);
    for (std::size_t l = 0; l < W_.size(); ++l) {
      t.z.push_back(W_[l] * t.a.back() + b_[l]);
      if (l + 1 < W_.size()) {
        t.a.push_back(t.z.back().unaryExpr([](double v) { return detail::selu(v); }));
      } else {
        Vec out(t.z.back().size());
        for (Eigen::Index i = 0; i < out.size(); ++i) {
          out(i) = range_(i) * linalg::interior_tanh(t.z.back()(i));
        }
        t.a.push_back(std::move(out));
      }
    }
    return t;
  }

  // Adjoint of the output pre-activation for a given upstream on the output.
  Vec output_zbar(const Trace& t, const Vec& upstream) const {
    const Vec& zL = t.z.back();
    Vec zbar(zL.size());
    for (Eigen::Index i = 0; i < zL.size(); ++i) {
      const double th = std::tanh(zL(i));
      zbar(i) = upstream(i) * range_(i) * (1.0 - th * th);
    }
    return zbar;
  }

  void write_layer_grad(Vec& grad, std::size_t layer, const Mat& dW, const Vec& db) const {
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < layer; ++l) at += W_[l].size() + b_[l].size();
    grad.segment(at, dW.size()) += Eigen::Map<const Vec>(dW.data(), dW.size());
    grad.segment(at + dW.size(), db.size()) += db;
  }

  void check_input(const Vec& x) const {
    if (x.size() != input_dim()) throw linalg::DimensionMismatch("Mlp: wrong input length");
  }

  void require_scalar(const char* op) const {
    if (output_dim() != 1) {
      throw NotScalarOutput(std::string("Mlp::") + op + " requires a scalar output");
    }
  }

  std::vector<Mat> W_;
  std::vector<Vec> b_;
  std::vector<Eigen::Index> widths_;
  Vec range_;
};

// ---------------------------------------------------------------------------
// Optimizers.

struct AdamState {
  Vec m, v;
  long long step = 0;

  explicit AdamState(Eigen::Index n) : m(Vec::Zero(n)), v(Vec::Zero(n)) {}
};

// One Adam update with beta1 = 0.9, beta2 = 0.999, eps = 1e-8 and bias
// correction.
inline void adam_step(Vec& params, const Vec& grads, AdamState& state, double lr) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ShapeMismatch("adam_step: parameter, gradient, and state sizes must match");
  }
  if (!(lr > 0.0)) throw std::invalid_argument("adam_step: lr must be positive");
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  ++state.step;
  state.m = beta1 * state.m + (1.0 - beta1) * grads;
  state.v = beta2 * state.v + (1.0 - beta2) * grads.cwiseProduct(grads);
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  params -= (lr / c1) * state.m.cwiseQuotient(((state.v / c2).cwiseSqrt().array() + eps).matrix());
}

inline void gd_step(Vec& params, const Vec& grads, double lr) {
  if (params.size() != grads.size()) {
    throw ShapeMismatch("gd_step: parameter and gradient sizes must match");
  }
  if (lr < 0.0) throw std::invalid_argument("gd_step: lr must be nonnegative");
  params -= lr * grads;
}

}  // namespace hfilt::approx
