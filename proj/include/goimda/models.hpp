#ifndef GOIMDA_MODELS_HPP
#define GOIMDA_MODELS_HPP

#include <memory>
#include <string>
#include <utility>

#include "goimda/core.hpp"
#include "goimda/diffcore.hpp"
#include "goimda/expfam.hpp"

namespace goimda {

// ---------------------------------------------------------------------------
// Feature maps for canonical-link GLMs, eta = phi(x)' theta.

class FeatureMap {
 public:
  virtual ~FeatureMap() = default;
  virtual std::string kind() const = 0;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t output_dim() const = 0;
  virtual Vector features(const Vector& x) const = 0;
  /// d phi / d x, shaped output_dim by input_dim.
  virtual Matrix jacobian(const Vector& x) const = 0;
  /// sum_k w_k d^2 phi_k / dx^2
  virtual Matrix weighted_hessian(const Vector& x, const Vector& w) const = 0;
};

using FeatureMapPtr = std::shared_ptr<const FeatureMap>;

class IdentityFeatures final : public FeatureMap {
 public:
  explicit IdentityFeatures(std::size_t d, bool intercept = false) : d_(d), intercept_(intercept) {}

  std::string kind() const override { return intercept_ ? "identity+1" : "identity"; }
  std::size_t input_dim() const override { return d_; }
  std::size_t output_dim() const override { return d_ + (intercept_ ? 1 : 0); }

  Vector features(const Vector& x) const override {
    if (!intercept_) return x;
    Vector f(x.size() + 1);
    f << 1.0, x;
    return f;
  }
  Matrix jacobian(const Vector&) const override {
    const auto d = static_cast<Eigen::Index>(d_);
    Matrix j = Matrix::Zero(static_cast<Eigen::Index>(output_dim()), d);
    j.bottomRows(d) = Matrix::Identity(d, d);
    return j;
  }
  Matrix weighted_hessian(const Vector&, const Vector&) const override {
    const auto d = static_cast<Eigen::Index>(d_);
    return Matrix::Zero(d, d);
  }

 private:
  std::size_t d_;
  bool intercept_;
};

/// [1, x_i, x_i x_j (i <= j)]
class QuadraticFeatures final : public FeatureMap {
 public:
  explicit QuadraticFeatures(std::size_t d) : d_(d) {}

  std::string kind() const override { return "quadratic"; }
  std::size_t input_dim() const override { return d_; }
  std::size_t output_dim() const override { return 1 + d_ + d_ * (d_ + 1) / 2; }

  Vector features(const Vector& x) const override {
    Vector f(static_cast<Eigen::Index>(output_dim()));
    Eigen::Index k = 0;
    f[k++] = 1.0;
    for (std::size_t i = 0; i < d_; ++i) f[k++] = x[i];
    for (std::size_t i = 0; i < d_; ++i)
      for (std::size_t j = i; j < d_; ++j) f[k++] = x[i] * x[j];
    return f;
  }
  Matrix jacobian(const Vector& x) const override {
    Matrix jac = Matrix::Zero(static_cast<Eigen::Index>(output_dim()), static_cast<Eigen::Index>(d_));
    Eigen::Index k = 1;
    for (std::size_t i = 0; i < d_; ++i) jac(k++, i) = 1.0;
    for (std::size_t i = 0; i < d_; ++i)
      for (std::size_t j = i; j < d_; ++j) {
        jac(k, i) += x[j];
        jac(k, j) += x[i];
        ++k;
      }
    return jac;
  }
  Matrix weighted_hessian(const Vector&, const Vector& w) const override {
    const auto d = static_cast<Eigen::Index>(d_);
    Matrix h = Matrix::Zero(d, d);
    Eigen::Index k = 1 + d;
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = i; j < d; ++j) {
        if (i == j) {
          h(i, i) += 2.0 * w[k];
        } else {
          h(i, j) += w[k];
          h(j, i) += w[k];
        }
        ++k;
      }
    return h;
  }

 private:
  std::size_t d_;
};

/// Gaussian radial basis functions around fixed centres, plus a constant.
class RbfFeatures final : public FeatureMap {
 public:
  RbfFeatures(Matrix centers, double lengthscale) : centers_(std::move(centers)), ls_(lengthscale) {
    require(centers_.rows() > 0 && ls_ > 0.0, "rbf features: need centres and a positive lengthscale");
  }

  std::string kind() const override { return "rbf"; }
  std::size_t input_dim() const override { return static_cast<std::size_t>(centers_.cols()); }
  std::size_t output_dim() const override { return static_cast<std::size_t>(centers_.rows()) + 1; }
  const Matrix& centers() const { return centers_; }
  double lengthscale() const { return ls_; }

  Vector features(const Vector& x) const override {
    Vector f(centers_.rows() + 1);
    f[0] = 1.0;
    for (Eigen::Index k = 0; k < centers_.rows(); ++k) f[k + 1] = bump(x, k);
    return f;
  }
  Matrix jacobian(const Vector& x) const override {
    Matrix j = Matrix::Zero(centers_.rows() + 1, centers_.cols());
    const double inv = 1.0 / (ls_ * ls_);
    for (Eigen::Index k = 0; k < centers_.rows(); ++k)
      j.row(k + 1) = -bump(x, k) * inv * (x - centers_.row(k).transpose()).transpose();
    return j;
  }
  Matrix weighted_hessian(const Vector& x, const Vector& w) const override {
    const auto d = centers_.cols();
    Matrix h = Matrix::Zero(d, d);
    const double inv = 1.0 / (ls_ * ls_);
    for (Eigen::Index k = 0; k < centers_.rows(); ++k) {
      const double wk = w[k + 1] * bump(x, k);
      if (wk == 0.0) continue;
      const Vector r = x - centers_.row(k).transpose();
      h += wk * (inv * inv * r * r.transpose() - inv * Matrix::Identity(d, d));
    }
    return h;
  }

 private:
  double bump(const Vector& x, Eigen::Index k) const {
    return std::exp(-0.5 * (x - centers_.row(k).transpose()).squaredNorm() / (ls_ * ls_));
  }

  Matrix centers_;
  double ls_;
};

/// Canonical-link GLM structure over a feature map.
class GlmStructure final : public NaturalParamModel {
 public:
  explicit GlmStructure(FeatureMapPtr features) : features_(std::move(features)) {}

  std::string kind() const override { return "glm:" + features_->kind(); }
  std::size_t input_dim() const override { return features_->input_dim(); }
  std::size_t num_params() const override { return features_->output_dim(); }
  const FeatureMap& feature_map() const { return *features_; }

  double eta(const Vector& theta, const Vector& x) const override { return features_->features(x).dot(theta); }
  Vector eta_grad(const Vector&, const Vector& x) const override { return features_->features(x); }
  Vector eta_hvp(const Vector& theta, const Vector&, const Vector&) const override {
    return Vector::Zero(theta.size());
  }
  Vector eta_grad_x(const Vector& theta, const Vector& x) const override {
    return features_->jacobian(x).transpose() * theta;
  }
  Matrix eta_hess_x(const Vector& theta, const Vector& x) const override {
    return features_->weighted_hessian(x, theta);
  }
  Matrix eta_cross(const Vector&, const Vector& x) const override { return features_->jacobian(x).transpose(); }

 private:
  FeatureMapPtr features_;
};

inline ModelStructurePtr linear_glm(std::size_t d, bool intercept = false) {
  return std::make_shared<GlmStructure>(std::make_shared<IdentityFeatures>(d, intercept));
}

// ---------------------------------------------------------------------------

struct FitReport {
  bool converged = true;
  double grad_norm = 0.0;
  int iterations = 0;
  std::string message;
};

/// Structure + family + fitted parameters. The training objective is
/// mean NLL + 0.5 * ridge * |theta|^2.
struct FittedModel {
  ModelStructurePtr structure;
  const ExponentialFamily* family = nullptr;
  ParameterVector theta;
  double ridge = 0.0;

  const ExponentialFamily& fam() const { return *family; }
  const Vector& params() const { return theta.values(); }
  std::size_t num_params() const { return theta.size(); }

  double eta(const Vector& x) const { return structure->eta(theta.values(), x); }
  double mean(const Vector& x) const { return family->mean(eta(x)); }
  Vector eta_grad(const Vector& x) const { return structure->eta_grad(theta.values(), x); }
  Vector eta_grad_x(const Vector& x) const { return structure->eta_grad_x(theta.values(), x); }

  FittedModel with_params(Vector v) const {
    FittedModel m = *this;
    m.theta = theta.with_values(std::move(v));
    return m;
  }
};

struct FitResult {
  FittedModel model;
  FitReport report;
};

/// Produces fitted models from data; one per model family (GLM, MLP).
class ModelTrainer {
 public:
  virtual ~ModelTrainer() = default;
  /// `warm` (nullable) provides a starting point from the previous round.
  virtual FitResult fit(const Dataset& data, std::uint64_t seed, const FittedModel* warm) const = 0;
  /// True when fits do not depend on the seed, so member parameters are
  /// comparable across an ensemble.
  virtual bool seed_independent() const = 0;
  virtual const ExponentialFamily& family() const = 0;
};

using TrainerPtr = std::shared_ptr<const ModelTrainer>;

// ---------------------------------------------------------------------------
// Training objective helpers shared by the GLM and MLP fitters.

inline double objective_value(const NllLoss& loss, const Vector& theta, const Dataset& data, double ridge) {
  return mean_loss(loss, theta, data) + 0.5 * ridge * theta.squaredNorm();
}

inline Vector objective_gradient(const NllLoss& loss, const Vector& theta, const Dataset& data, double ridge) {
  return batch_gradient(loss, theta, data) + ridge * theta;
}

}  // namespace goimda

#endif  // GOIMDA_MODELS_HPP
