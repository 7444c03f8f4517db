#ifndef GOIMDA_DIFFCORE_HPP
#define GOIMDA_DIFFCORE_HPP

#include <algorithm>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "goimda/core.hpp"

namespace goimda {

struct ParameterBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;

  bool operator==(const ParameterBlock&) const = default;
};

using ParameterLayout = std::vector<ParameterBlock>;

inline ParameterLayout single_block_layout(std::size_t n, std::string name = "theta") {
  return {ParameterBlock{std::move(name), 0, n}};
}

/// Flat parameter vector with named blocks. Solvers only ever see `values`;
/// the layout exists so models can address their weights by name.
class ParameterVector {
 public:
  ParameterVector() = default;

  explicit ParameterVector(Vector values)
      : values_(std::move(values)), layout_(single_block_layout(static_cast<std::size_t>(values_.size()))) {
    validate();
  }

  ParameterVector(Vector values, ParameterLayout layout)
      : values_(std::move(values)), layout_(std::move(layout)) {
    validate();
  }

  const Vector& values() const { return values_; }
  const ParameterLayout& layout() const { return layout_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

  const ParameterBlock& block_info(const std::string& name) const {
    for (const auto& b : layout_)
      if (b.name == name) return b;
    throw ContractError("parameter block not found: " + name);
  }

  Eigen::VectorBlock<const Vector> block(const std::string& name) const {
    const auto& b = block_info(name);
    return values_.segment(static_cast<Eigen::Index>(b.offset), static_cast<Eigen::Index>(b.size));
  }

  /// Same layout, new values.
  ParameterVector with_values(Vector v) const { return ParameterVector(std::move(v), layout_); }

  bool same_layout(const ParameterVector& o) const { return layout_ == o.layout_; }

 private:
  void validate() const {
    std::size_t total = 0;
    for (const auto& b : layout_) {
      require(b.offset == total, "parameter layout: blocks must be contiguous and ordered");
      total += b.size;
    }
    require(total == size(), "parameter layout: block sizes do not sum to the vector length");
    if (!values_.allFinite()) throw NumericError("parameter vector has non-finite entries");
  }

  Vector values_;
  ParameterLayout layout_;
};

enum class Curvature { Exact, GaussNewton };

/// Per-example differentiable loss l(theta; (x, y)).
class LossFunction {
 public:
  virtual ~LossFunction() = default;

  virtual double value(const Vector& theta, const Example& ex) const = 0;
  virtual Vector gradient(const Vector& theta, const Example& ex) const = 0;

  /// Hessian-vector product for one example. The fallback is a central
  /// difference of the analytic gradient along v.
  virtual Vector hvp(const Vector& theta, const Example& ex, const Vector& v) const {
    const double vn = v.norm();
    if (vn == 0.0) return Vector::Zero(theta.size());
    const double h = 1e-4 * (1.0 + theta.norm()) / (1.0 + vn);
    return (gradient(theta + h * v, ex) - gradient(theta - h * v, ex)) / (2.0 * h);
  }

  /// Generalized Gauss-Newton product; equals hvp for losses that are
  /// convex in their parameters.
  virtual Vector gauss_newton_hvp(const Vector& theta, const Example& ex, const Vector& v) const {
    return hvp(theta, ex, v);
  }
};

/// f(theta) = 0.5 theta' A theta, independent of the example.
class QuadraticLoss final : public LossFunction {
 public:
  explicit QuadraticLoss(Matrix a) : a_(std::move(a)) {
    require(a_.rows() == a_.cols(), "quadratic loss: matrix must be square");
  }
  static QuadraticLoss identity(std::size_t n) {
    return QuadraticLoss(Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)));
  }

  double value(const Vector& theta, const Example&) const override { return 0.5 * theta.dot(a_ * theta); }
  Vector gradient(const Vector& theta, const Example&) const override {
    return 0.5 * (a_ + a_.transpose()) * theta;
  }
  Vector hvp(const Vector&, const Example&, const Vector& v) const override {
    return 0.5 * (a_ + a_.transpose()) * v;
  }

 private:
  Matrix a_;
};

inline double mean_loss(const LossFunction& loss, const Vector& theta, const Dataset& batch) {
  require(!batch.empty(), "mean_loss: empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double l = loss.value(theta, batch[i]);
    if (!std::isfinite(l)) throw NumericError("non-finite loss at example " + std::to_string(i));
    total += l;
  }
  return total / static_cast<double>(batch.size());
}

/// Mean gradient over the batch.
inline Vector batch_gradient(const LossFunction& loss, const Vector& theta, const Dataset& batch) {
  require(!batch.empty(), "batch_gradient: empty batch");
  if (!theta.allFinite()) throw NumericError("batch_gradient: non-finite parameters");
  Vector g = Vector::Zero(theta.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double l = loss.value(theta, batch[i]);
    if (!std::isfinite(l)) throw NumericError("non-finite loss at example " + std::to_string(i));
    Vector gi = loss.gradient(theta, batch[i]);
    if (!gi.allFinite()) throw NumericError("non-finite gradient at example " + std::to_string(i));
    g += gi;
  }
  return g / static_cast<double>(batch.size());
}

inline Vector batch_gradient(const LossFunction& loss, const ParameterVector& params, const Dataset& batch) {
  return batch_gradient(loss, params.values(), batch);
}

/// Empirical Hessian (mean over batch) applied to v.
inline Vector hvp(const LossFunction& loss, const Vector& theta, const Dataset& batch, const Vector& v,
                  Curvature curvature = Curvature::Exact) {
  require(v.size() == theta.size(), "hvp: direction and parameters differ in length");
  require(!batch.empty(), "hvp: empty batch");
  Vector out = Vector::Zero(theta.size());
  for (const auto& ex : batch)
    out += curvature == Curvature::Exact ? loss.hvp(theta, ex, v) : loss.gauss_newton_hvp(theta, ex, v);
  return out / static_cast<double>(batch.size());
}

inline Vector hvp(const LossFunction& loss, const ParameterVector& params, const Dataset& batch,
                  const ParameterVector& v, Curvature curvature = Curvature::Exact) {
  require(params.same_layout(v), "hvp: direction layout does not match parameter layout");
  return hvp(loss, params.values(), batch, v.values(), curvature);
}

inline constexpr std::size_t kDenseCap = 2000;

/// Explicit Hessian, assembled column by column from hvp. Testing/oracle path.
inline DenseMatrix dense_hessian(const LossFunction& loss, const Vector& theta, const Dataset& batch,
                                 Curvature curvature = Curvature::Exact, std::size_t cap = kDenseCap) {
  require(!batch.empty(), "dense_hessian: empty batch");
  const auto n = theta.size();
  if (static_cast<std::size_t>(n) > cap)
    throw CapacityError("dense_hessian: dimension " + std::to_string(n) + " exceeds cap " + std::to_string(cap));
  DenseMatrix h(n, n);
  for (Eigen::Index j = 0; j < n; ++j) h.col(j) = hvp(loss, theta, batch, Vector::Unit(n, j), curvature);
  return 0.5 * (h + h.transpose());
}

inline bool is_symmetric(const DenseMatrix& m, double rel_tol = 1e-10) {
  if (m.rows() != m.cols()) return false;
  const double scale = m.cwiseAbs().maxCoeff();
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * std::max(scale, 1e-300);
}

}  // namespace goimda

#endif  // GOIMDA_DIFFCORE_HPP
