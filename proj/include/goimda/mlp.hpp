#ifndef GOIMDA_MLP_HPP
#define GOIMDA_MLP_HPP

#include <string>
#include <vector>

#include "goimda/core.hpp"
#include "goimda/dual.hpp"
#include "goimda/expfam.hpp"
#include "goimda/models.hpp"

namespace goimda {

/// Fully connected tanh network with a scalar linear output eta(x).
///
/// Forward and backward passes are templated on the scalar type so the same
/// code runs on doubles (values, gradients) and on Dual numbers (exact
/// directional derivatives of gradients: parameter HVPs, input Hessians and
/// mixed input/parameter derivatives).
class MlpStructure final : public NaturalParamModel {
 public:
  MlpStructure(std::size_t input_dim, std::vector<std::size_t> hidden) : input_dim_(input_dim) {
    require(input_dim > 0, "mlp: input dimension must be positive");
    widths_.push_back(input_dim);
    for (auto h : hidden) {
      require(h > 0, "mlp: hidden widths must be positive");
      widths_.push_back(h);
    }
    widths_.push_back(1);
    std::size_t offset = 0;
    for (std::size_t l = 1; l < widths_.size(); ++l) {
      const std::size_t w = widths_[l] * widths_[l - 1];
      layout_.push_back({"layer" + std::to_string(l - 1) + ".weight", offset, w});
      offset += w;
      layout_.push_back({"layer" + std::to_string(l - 1) + ".bias", offset, widths_[l]});
      offset += widths_[l];
    }
    num_params_ = offset;
  }

  std::string kind() const override {
    std::string k = "mlp:" + std::to_string(input_dim_);
    for (std::size_t l = 1; l + 1 < widths_.size(); ++l) k += "-" + std::to_string(widths_[l]);
    return k;
  }
  std::size_t input_dim() const override { return input_dim_; }
  std::size_t num_params() const override { return num_params_; }
  ParameterLayout layout() const override { return layout_; }

  /// N(0, 1/fan_in) weights, zero biases.
  Vector init_params(Rng& rng) const {
    Vector theta = Vector::Zero(static_cast<Eigen::Index>(num_params_));
    std::normal_distribution<double> nd(0.0, 1.0);
    std::size_t offset = 0;
    for (std::size_t l = 1; l < widths_.size(); ++l) {
      const double scale = 1.0 / std::sqrt(static_cast<double>(widths_[l - 1]));
      for (std::size_t i = 0; i < widths_[l] * widths_[l - 1]; ++i) theta[offset + i] = scale * nd(rng);
      offset += widths_[l] * widths_[l - 1] + widths_[l];
    }
    return theta;
  }

  double eta(const Vector& theta, const Vector& x) const override {
    check(theta, x);
    return pass<double>(theta.data(), x.data(), nullptr, nullptr);
  }

  Vector eta_grad(const Vector& theta, const Vector& x) const override {
    check(theta, x);
    Vector g(theta.size());
    pass<double>(theta.data(), x.data(), g.data(), nullptr);
    return g;
  }

  Vector eta_grad_x(const Vector& theta, const Vector& x) const override {
    check(theta, x);
    Vector gx(x.size());
    pass<double>(theta.data(), x.data(), nullptr, gx.data());
    return gx;
  }

  Vector eta_hvp(const Vector& theta, const Vector& x, const Vector& v) const override {
    check(theta, x);
    require(v.size() == theta.size(), "mlp: hvp direction has wrong length");
    std::vector<Dual> th(theta.size()), xs(x.size()), g(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) th[i] = Dual(theta[i], v[i]);
    for (Eigen::Index i = 0; i < x.size(); ++i) xs[i] = Dual(x[i]);
    pass<Dual>(th.data(), xs.data(), g.data(), nullptr);
    Vector out(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) out[i] = g[i].tan;
    return out;
  }

  Matrix eta_hess_x(const Vector& theta, const Vector& x) const override {
    check(theta, x);
    const auto d = x.size();
    Matrix h(d, d);
    std::vector<Dual> th(theta.size()), xs(d), gx(d);
    for (Eigen::Index i = 0; i < theta.size(); ++i) th[i] = Dual(theta[i]);
    for (Eigen::Index j = 0; j < d; ++j) {
      for (Eigen::Index i = 0; i < d; ++i) xs[i] = Dual(x[i], i == j ? 1.0 : 0.0);
      pass<Dual>(th.data(), xs.data(), nullptr, gx.data());
      for (Eigen::Index i = 0; i < d; ++i) h(i, j) = gx[i].tan;
    }
    return 0.5 * (h + h.transpose());
  }

  /// Row i holds d/dtheta of (d eta / d x_i): seed the input tangent with
  /// e_i and read the tangent of the parameter gradient.
  Matrix eta_cross(const Vector& theta, const Vector& x) const override {
    check(theta, x);
    const auto d = x.size();
    Matrix c(d, theta.size());
    std::vector<Dual> th(theta.size()), xs(d), g(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) th[i] = Dual(theta[i]);
    for (Eigen::Index j = 0; j < d; ++j) {
      for (Eigen::Index i = 0; i < d; ++i) xs[i] = Dual(x[i], i == j ? 1.0 : 0.0);
      pass<Dual>(th.data(), xs.data(), g.data(), nullptr);
      for (Eigen::Index i = 0; i < theta.size(); ++i) c(j, i) = g[i].tan;
    }
    return c;
  }

 private:
  void check(const Vector& theta, const Vector& x) const {
    require(static_cast<std::size_t>(theta.size()) == num_params_, "mlp: parameter vector has wrong length");
    require(static_cast<std::size_t>(x.size()) == input_dim_, "mlp: input has wrong dimension");
  }

  /// Returns eta; fills d eta/d theta and d eta/d x when the outputs are non-null.
  template <typename T>
  T pass(const auto* theta, const auto* x, T* grad_theta, T* grad_x) const {
    const std::size_t layers = widths_.size() - 1;
    std::vector<std::vector<T>> act(layers + 1);
    act[0].assign(x, x + widths_[0]);
    std::vector<std::size_t> offsets(layers);
    std::size_t offset = 0;
    for (std::size_t l = 0; l < layers; ++l) {
      offsets[l] = offset;
      const std::size_t in = widths_[l], out = widths_[l + 1];
      const auto* w = theta + offset;
      const auto* b = theta + offset + in * out;
      act[l + 1].resize(out);
      for (std::size_t i = 0; i < out; ++i) {
        T z = T(b[i]);
        for (std::size_t j = 0; j < in; ++j) z += T(w[i * in + j]) * act[l][j];
        act[l + 1][i] = (l + 1 < layers) ? tanh(z) : z;
      }
      offset += in * out + out;
    }
    const T eta = act[layers][0];
    if (grad_theta == nullptr && grad_x == nullptr) return eta;

    std::vector<T> delta{T(1.0)};
    for (std::size_t l = layers; l-- > 0;) {
      const std::size_t in = widths_[l], out = widths_[l + 1];
      const auto* w = theta + offsets[l];
      if (grad_theta != nullptr) {
        T* gw = grad_theta + offsets[l];
        T* gb = gw + in * out;
        for (std::size_t i = 0; i < out; ++i) {
          for (std::size_t j = 0; j < in; ++j) gw[i * in + j] = delta[i] * act[l][j];
          gb[i] = delta[i];
        }
      }
      std::vector<T> prev(in, T(0.0));
      for (std::size_t j = 0; j < in; ++j)
        for (std::size_t i = 0; i < out; ++i) prev[j] += T(w[i * in + j]) * delta[i];
      if (l > 0)
        for (std::size_t j = 0; j < in; ++j) prev[j] = prev[j] * (T(1.0) - act[l][j] * act[l][j]);
      delta = std::move(prev);
    }
    if (grad_x != nullptr)
      for (std::size_t j = 0; j < widths_[0]; ++j) grad_x[j] = delta[j];
    return eta;
  }

  static double tanh(double z) { return std::tanh(z); }
  static Dual tanh(const Dual& z) { return goimda::tanh(z); }

  std::size_t input_dim_;
  std::vector<std::size_t> widths_;
  ParameterLayout layout_;
  std::size_t num_params_ = 0;
};

struct MlpTrainConfig {
  std::vector<std::size_t> hidden{16, 16};
  double ridge = 1e-4;
  double learning_rate = 0.01;
  int max_epochs = 2000;
  /// Stop once the objective improved by less than `plateau_tol` (relative)
  /// over the last `patience` epochs.
  int patience = 100;
  double plateau_tol = 1e-6;
  bool warm_start = true;
};

/// Full-batch Adam on mean NLL + ridge penalty.
class MlpTrainer final : public ModelTrainer {
 public:
  MlpTrainer(std::size_t input_dim, const ExponentialFamily& fam, MlpTrainConfig cfg)
      : structure_(std::make_shared<MlpStructure>(input_dim, cfg.hidden)), fam_(&fam), cfg_(std::move(cfg)) {}

  std::shared_ptr<const MlpStructure> structure() const { return structure_; }
  const ExponentialFamily& family() const override { return *fam_; }
  bool seed_independent() const override { return false; }

  FitResult fit(const Dataset& data, std::uint64_t seed, const FittedModel* warm) const override {
    require(!data.empty(), "mlp fit: empty data");
    Rng rng(seed);
    Vector theta = (warm != nullptr && cfg_.warm_start && warm->num_params() == structure_->num_params())
                       ? warm->params()
                       : structure_->init_params(rng);
    const NllLoss loss(structure_, *fam_);
    Vector m = Vector::Zero(theta.size()), v = Vector::Zero(theta.size());
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double best = objective_value(loss, theta, data, cfg_.ridge);
    std::vector<double> trace;
    FitReport report;
    int epoch = 0;
    for (; epoch < cfg_.max_epochs; ++epoch) {
      const Vector g = objective_gradient(loss, theta, data, cfg_.ridge);
      m = b1 * m + (1 - b1) * g;
      v = b2 * v + (1 - b2) * g.cwiseProduct(g);
      const double c1 = 1 - std::pow(b1, epoch + 1), c2 = 1 - std::pow(b2, epoch + 1);
      theta -= cfg_.learning_rate * ((m / c1).array() / ((v / c2).array().sqrt() + eps)).matrix();
      if (!theta.allFinite()) throw NumericError("mlp fit: parameters diverged at epoch " + std::to_string(epoch));
      const double obj = objective_value(loss, theta, data, cfg_.ridge);
      trace.push_back(obj);
      best = std::min(best, obj);
      if (static_cast<int>(trace.size()) > cfg_.patience) {
        const double old = trace[trace.size() - 1 - static_cast<std::size_t>(cfg_.patience)];
        if (old - obj <= cfg_.plateau_tol * (1.0 + std::abs(old))) break;
      }
    }
    report.iterations = epoch;
    report.grad_norm = objective_gradient(loss, theta, data, cfg_.ridge).cwiseAbs().maxCoeff();
    report.converged = epoch < cfg_.max_epochs;
    if (!report.converged) report.message = "epoch budget exhausted before the objective plateaued";
    FittedModel model{structure_, fam_, ParameterVector(theta, structure_->layout()), cfg_.ridge};
    return {std::move(model), report};
  }

 private:
  std::shared_ptr<const MlpStructure> structure_;
  const ExponentialFamily* fam_;
  MlpTrainConfig cfg_;
};

}  // namespace goimda

#endif  // GOIMDA_MLP_HPP
