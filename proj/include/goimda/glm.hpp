#ifndef GOIMDA_GLM_HPP
#define GOIMDA_GLM_HPP

#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "goimda/core.hpp"
#include "goimda/expfam.hpp"
#include "goimda/models.hpp"

namespace goimda {

/// Maps v to H^{-1} v. Produced by the ihvp solvers or by a dense factorization.
using InverseApplier = std::function<Vector(const Vector&)>;

struct GlmFitOptions {
  int max_iters = 100;
  double grad_tol = 1e-8;
};

namespace detail {

/// Rows are the feature vectors d eta / d theta; valid for any structure that
/// is linear in theta.
inline Matrix feature_rows(const NaturalParamModel& s, const Vector& theta, const Dataset& data) {
  Matrix phi(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(s.num_params()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data[i].x.allFinite()) throw ContractError("glm fit: non-finite features at example " + std::to_string(i));
    phi.row(static_cast<Eigen::Index>(i)) = s.eta_grad(theta, data[i].x).transpose();
  }
  return phi;
}

inline double weighted_objective(const ExponentialFamily& fam, const Matrix& phi, const Vector& y,
                                 const Vector& w, double ridge, const Vector& theta) {
  const Vector eta = phi * theta;
  double total = 0.5 * ridge * theta.squaredNorm();
  for (Eigen::Index i = 0; i < eta.size(); ++i) total += w[i] * nll(fam, eta[i], y[i]);
  return total;
}

}  // namespace detail

/// Damped Newton on sum_i w_i l_i(theta) + ridge/2 |theta|^2 with backtracking.
///
/// Converged means the gradient max-norm is below tolerance and the Newton
/// step has stopped moving the iterate; on separable data the gradient can
/// vanish while the parameters keep growing, which is reported as a warning.
inline FitResult fit_glm_weighted(ModelStructurePtr structure, const ExponentialFamily& fam, const Dataset& data,
                                  const Vector& weights, double ridge, const Vector& init,
                                  GlmFitOptions opts = {}) {
  require(!data.empty(), "glm fit: empty data");
  require(weights.size() == static_cast<Eigen::Index>(data.size()), "glm fit: one weight per example");
  require(ridge >= 0.0, "glm fit: ridge must be nonnegative");
  require(init.size() == static_cast<Eigen::Index>(structure->num_params()), "glm fit: init has wrong length");

  const Matrix phi = detail::feature_rows(*structure, init, data);
  Vector y(phi.rows());
  for (std::size_t i = 0; i < data.size(); ++i) y[static_cast<Eigen::Index>(i)] = fam.sufficient_stat(data[i].y);

  Vector theta = init;
  FitReport report;
  report.converged = false;
  auto grad_at = [&](const Vector& th, Vector& g, Matrix& h) {
    const Vector eta = phi * th;
    Vector r(eta.size()), c(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      r[i] = weights[i] * (fam.mean(eta[i]) - y[i]);
      c[i] = weights[i] * fam.variance(eta[i]);
    }
    g = phi.transpose() * r + ridge * th;
    h = phi.transpose() * c.asDiagonal() * phi;
    h.diagonal().array() += ridge;
  };

  Vector g;
  Matrix h;
  int it = 0;
  for (; it < opts.max_iters; ++it) {
    grad_at(theta, g, h);
    Eigen::LDLT<Matrix> ldlt(h);
    Vector step = ldlt.solve(-g);
    if (ldlt.info() != Eigen::Success || !step.allFinite()) {
      report.message = "newton step not finite (singular Hessian)";
      break;
    }
    const double gmax = g.cwiseAbs().maxCoeff();
    if (gmax <= opts.grad_tol && step.cwiseAbs().maxCoeff() <= 1e-4 * (1.0 + theta.cwiseAbs().maxCoeff())) {
      theta += step;
      report.converged = true;
      ++it;
      break;
    }
    const double f0 = detail::weighted_objective(fam, phi, y, weights, ridge, theta);
    const double slope = g.dot(step);
    const double slack = 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(f0));
    double t = 1.0;
    while (t > 1e-12) {
      const double f1 = detail::weighted_objective(fam, phi, y, weights, ridge, theta + t * step);
      if (f1 <= f0 + 1e-4 * t * slope + slack) break;
      t *= 0.5;
    }
    theta += t * step;
  }
  grad_at(theta, g, h);
  report.iterations = it;
  report.grad_norm = g.cwiseAbs().maxCoeff();
  if (!report.converged && report.message.empty())
    report.message = "no convergence after " + std::to_string(it) + " Newton iterations, gradient max-norm " +
                     std::to_string(report.grad_norm);
  ParameterVector params(theta, structure->layout());
  return {FittedModel{std::move(structure), &fam, std::move(params), ridge}, report};
}

/// Mean-NLL fit, objective (1/n) sum_i l_i + ridge/2 |theta|^2.
inline FitResult fit_glm(const Dataset& data, const ExponentialFamily& fam, double ridge, const Vector& init,
                         ModelStructurePtr structure = nullptr, GlmFitOptions opts = {}) {
  require(!data.empty(), "glm fit: empty data");
  if (!structure) structure = linear_glm(static_cast<std::size_t>(data.front().x.size()));
  const Vector w = Vector::Constant(static_cast<Eigen::Index>(data.size()), 1.0 / static_cast<double>(data.size()));
  return fit_glm_weighted(std::move(structure), fam, data, w, ridge, init, opts);
}

/// (1/n) sum A''(eta_i) phi_i phi_i' + ridge I
inline DenseMatrix glm_hessian(const FittedModel& model, const Dataset& data) {
  require(!data.empty(), "glm_hessian: empty data");
  const auto p = static_cast<Eigen::Index>(model.num_params());
  if (static_cast<std::size_t>(p) > kDenseCap) throw CapacityError("glm_hessian: dimension exceeds dense cap");
  DenseMatrix h = DenseMatrix::Zero(p, p);
  for (const auto& ex : data) {
    const Vector f = model.eta_grad(ex.x);
    h.selfadjointView<Eigen::Lower>().rankUpdate(f, model.fam().variance(f.dot(model.params())));
  }
  h = h.selfadjointView<Eigen::Lower>();
  h /= static_cast<double>(data.size());
  h.diagonal().array() += model.ridge;
  return h;
}

/// Fits whose result does not depend on the seed.
class GlmTrainer final : public ModelTrainer {
 public:
  GlmTrainer(ModelStructurePtr structure, const ExponentialFamily& fam, double ridge, GlmFitOptions opts = {})
      : structure_(std::move(structure)), fam_(&fam), ridge_(ridge), opts_(opts) {}

  FitResult fit(const Dataset& data, std::uint64_t, const FittedModel* warm) const override {
    const Vector init = (warm != nullptr && warm->num_params() == structure_->num_params())
                            ? warm->params()
                            : Vector::Zero(static_cast<Eigen::Index>(structure_->num_params()));
    return fit_glm(data, *fam_, ridge_, init, structure_, opts_);
  }
  bool seed_independent() const override { return true; }
  const ExponentialFamily& family() const override { return *fam_; }
  const ModelStructurePtr& structure() const { return structure_; }
  double ridge() const { return ridge_; }

 private:
  ModelStructurePtr structure_;
  const ExponentialFamily* fam_;
  double ridge_;
  GlmFitOptions opts_;
};

inline InverseApplier dense_inverse_applier(const DenseMatrix& h) {
  auto ldlt = std::make_shared<Eigen::LDLT<Matrix>>(h);
  if (ldlt->info() != Eigen::Success) throw SingularityError("dense inverse: factorization failed");
  return [ldlt](const Vector& v) { return Vector(ldlt->solve(v)); };
}

/// -phi' H^{-1} phi A''(eta); never positive.
inline double pe_score(const FittedModel& model, const InverseApplier& h_inv, const Vector& x_c) {
  const Vector f = model.eta_grad(x_c);
  return -f.dot(h_inv(f)) * model.fam().variance(f.dot(model.params()));
}

/// (grad G)' H^{-1} phi * phi'(theta - theta_0) * A''(eta)
inline double goi_score_glm(const FittedModel& model, const InverseApplier& h_inv, const Vector& goal_grad,
                            const Vector& bias, const Vector& x_c) {
  require(goal_grad.size() == static_cast<Eigen::Index>(model.num_params()) && bias.size() == goal_grad.size(),
          "goi_score_glm: goal gradient and bias must match the parameter length");
  const Vector f = model.eta_grad(x_c);
  return goal_grad.dot(h_inv(f)) * f.dot(bias) * model.fam().variance(f.dot(model.params()));
}

/// Both sides of log|H_c^{-1}| = log|H^{-1}| - log(1 + w x'H^{-1}x), where
/// H_c = H + w x x' and w = a2 / n_data.
inline std::pair<double, double> logdet_update_check(const DenseMatrix& h, const Vector& x_c, double a2,
                                                     double n_data = 1.0) {
  require(h.rows() == h.cols() && h.rows() == x_c.size(), "logdet_update_check: shape mismatch");
  require(a2 >= 0.0 && n_data > 0.0, "logdet_update_check: a2 must be nonnegative");
  const double w = a2 / n_data;
  Eigen::LLT<Matrix> llt(h);
  if (llt.info() != Eigen::Success) throw DomainError("logdet_update_check: H is not positive definite");
  const double logdet_h = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const Matrix hc = h + w * x_c * x_c.transpose();
  Eigen::LLT<Matrix> lltc(hc);
  if (lltc.info() != Eigen::Success) throw DomainError("logdet_update_check: updated H is not positive definite");
  const double lhs = -2.0 * lltc.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double rhs = -logdet_h - std::log1p(w * x_c.dot(llt.solve(x_c)));
  return {lhs, rhs};
}

}  // namespace goimda

#endif  // GOIMDA_GLM_HPP
