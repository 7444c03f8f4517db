#ifndef GOIMDA_EXPFAM_HPP
#define GOIMDA_EXPFAM_HPP

#include <memory>
#include <numbers>
#include <string>
#include <string_view>

#include "goimda/core.hpp"
#include "goimda/diffcore.hpp"

namespace goimda {

/// Scalar exponential family h(y) exp(eta T(y) - A(eta)) with T(y) = y.
///
/// The base measure h(y) never depends on model parameters, so nll() drops
/// -log h(y); loss values are therefore comparable only within a family.
class ExponentialFamily {
 public:
  virtual ~ExponentialFamily() = default;

  virtual std::string_view name() const = 0;
  virtual double log_partition(double eta) const = 0;  // A
  virtual double mean(double eta) const = 0;           // A'
  virtual double variance(double eta) const = 0;       // A''
  virtual double third(double eta) const = 0;          // A'''
  virtual double sufficient_stat(double y) const { return y; }
  virtual double neg_log_base(double y) const = 0;     // -log h(y)
  /// Shannon entropy of p_eta, base measure included.
  virtual double entropy(double eta) const = 0;
  virtual double entropy_derivative(double eta) const = 0;
  virtual double sample(double eta, Rng& rng) const = 0;
  /// True when labels live on {0, 1} and expectations have a closed form.
  virtual bool is_binary() const { return false; }
};

class BernoulliFamily final : public ExponentialFamily {
 public:
  std::string_view name() const override { return "bernoulli"; }

  double log_partition(double eta) const override {
    // log(1 + e^eta) without overflow on either tail.
    return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
  }
  double mean(double eta) const override {
    if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
    const double e = std::exp(eta);
    return e / (1.0 + e);
  }
  double variance(double eta) const override { return mean(eta) * mean(-eta); }
  double third(double eta) const override {
    const double p = mean(eta);
    return p * (1.0 - p) * (1.0 - 2.0 * p);
  }
  double neg_log_base(double) const override { return 0.0; }
  double entropy(double eta) const override { return log_partition(eta) - eta * mean(eta); }
  double entropy_derivative(double eta) const override { return -eta * variance(eta); }
  double sample(double eta, Rng& rng) const override {
    std::bernoulli_distribution b(mean(eta));
    return b(rng) ? 1.0 : 0.0;
  }
  bool is_binary() const override { return true; }
};

/// Unit-variance Gaussian with identity link.
class GaussianFamily final : public ExponentialFamily {
 public:
  std::string_view name() const override { return "gaussian"; }

  double log_partition(double eta) const override { return 0.5 * eta * eta; }
  double mean(double eta) const override { return eta; }
  double variance(double) const override { return 1.0; }
  double third(double) const override { return 0.0; }
  double neg_log_base(double y) const override { return 0.5 * y * y + 0.5 * std::log(2.0 * std::numbers::pi); }
  double entropy(double) const override { return 0.5 * (1.0 + std::log(2.0 * std::numbers::pi)); }
  double entropy_derivative(double) const override { return 0.0; }
  double sample(double eta, Rng& rng) const override {
    std::normal_distribution<double> nd(eta, 1.0);
    return nd(rng);
  }
};

inline const ExponentialFamily& bernoulli() {
  static const BernoulliFamily f;
  return f;
}

inline const ExponentialFamily& gaussian() {
  static const GaussianFamily f;
  return f;
}

inline const ExponentialFamily& family_by_name(std::string_view name) {
  if (name == "bernoulli") return bernoulli();
  if (name == "gaussian") return gaussian();
  throw ConfigError("unknown exponential family: " + std::string(name));
}

/// Negative log-likelihood with the base-measure term dropped.
inline double nll(const ExponentialFamily& fam, double eta, double y) {
  if (!std::isfinite(eta)) throw DomainError("nll: natural parameter is not finite");
  return -eta * fam.sufficient_stat(y) + fam.log_partition(eta);
}

inline double predictive_mean(const ExponentialFamily& fam, double eta) {
  if (std::isnan(eta)) throw DomainError("predictive_mean: natural parameter is NaN");
  return fam.mean(eta);
}

// ---------------------------------------------------------------------------

/// Maps (parameters, input) to the natural parameter eta_theta(x), with the
/// derivatives the acquisition rule and the minimizer Jacobian need.
class NaturalParamModel {
 public:
  virtual ~NaturalParamModel() = default;

  virtual std::string kind() const = 0;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t num_params() const = 0;
  virtual ParameterLayout layout() const { return single_block_layout(num_params()); }

  virtual double eta(const Vector& theta, const Vector& x) const = 0;
  /// d eta / d theta
  virtual Vector eta_grad(const Vector& theta, const Vector& x) const = 0;
  /// (d^2 eta / d theta^2) v; zero for models linear in theta.
  virtual Vector eta_hvp(const Vector& theta, const Vector& x, const Vector& v) const = 0;
  /// d eta / d x
  virtual Vector eta_grad_x(const Vector& theta, const Vector& x) const = 0;

  /// d^2 eta / dx^2. Default: central difference of eta_grad_x.
  virtual Matrix eta_hess_x(const Vector& theta, const Vector& x) const {
    const auto dx = x.size();
    Matrix h(dx, dx);
    for (Eigen::Index j = 0; j < dx; ++j) {
      const double step = 1e-6 * (1.0 + std::abs(x[j]));
      Vector xp = x, xm = x;
      xp[j] += step;
      xm[j] -= step;
      h.col(j) = (eta_grad_x(theta, xp) - eta_grad_x(theta, xm)) / (2.0 * step);
    }
    return 0.5 * (h + h.transpose());
  }

  /// d/dtheta of d eta/dx, shaped d_x by d_theta. Default: central difference.
  virtual Matrix eta_cross(const Vector& theta, const Vector& x) const {
    const auto p = theta.size();
    Matrix c(x.size(), p);
    for (Eigen::Index j = 0; j < p; ++j) {
      const double step = 1e-6 * (1.0 + std::abs(theta[j]));
      Vector tp = theta, tm = theta;
      tp[j] += step;
      tm[j] -= step;
      c.col(j) = (eta_grad_x(tp, x) - eta_grad_x(tm, x)) / (2.0 * step);
    }
    return c;
  }
};

using ModelStructurePtr = std::shared_ptr<const NaturalParamModel>;

/// Exponential-family NLL of a natural-parameter model.
class NllLoss final : public LossFunction {
 public:
  NllLoss(ModelStructurePtr model, const ExponentialFamily& fam) : model_(std::move(model)), fam_(&fam) {}

  double value(const Vector& theta, const Example& ex) const override {
    return nll(*fam_, model_->eta(theta, ex.x), ex.y);
  }

  Vector gradient(const Vector& theta, const Example& ex) const override {
    const double eta = model_->eta(theta, ex.x);
    return (fam_->mean(eta) - fam_->sufficient_stat(ex.y)) * model_->eta_grad(theta, ex.x);
  }

  Vector hvp(const Vector& theta, const Example& ex, const Vector& v) const override {
    const double eta = model_->eta(theta, ex.x);
    const Vector g = model_->eta_grad(theta, ex.x);
    Vector out = fam_->variance(eta) * g.dot(v) * g;
    const double resid = fam_->mean(eta) - fam_->sufficient_stat(ex.y);
    if (resid != 0.0) out += resid * model_->eta_hvp(theta, ex.x, v);
    return out;
  }

  Vector gauss_newton_hvp(const Vector& theta, const Example& ex, const Vector& v) const override {
    const double eta = model_->eta(theta, ex.x);
    const Vector g = model_->eta_grad(theta, ex.x);
    return fam_->variance(eta) * g.dot(v) * g;
  }

  const NaturalParamModel& model() const { return *model_; }
  const ExponentialFamily& family() const { return *fam_; }

 private:
  ModelStructurePtr model_;
  const ExponentialFamily* fam_;
};

/// Gradient of E_{y ~ p_0}[l(theta; (x_c, y))] given an estimate of the
/// true predictive mean at x_c: eta_grad(x_c) * (A'(eta_theta(x_c)) - true_mean).
inline Vector expected_loss_grad(const ExponentialFamily& fam, const NaturalParamModel& model,
                                 const Vector& theta, const Vector& x_c, double true_mean) {
  const double bias = fam.mean(model.eta(theta, x_c)) - true_mean;
  return bias * model.eta_grad(theta, x_c);
}

}  // namespace goimda

#endif  // GOIMDA_EXPFAM_HPP
