#ifndef GOIMDA_GOALS_HPP
#define GOIMDA_GOALS_HPP

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "goimda/core.hpp"
#include "goimda/expfam.hpp"
#include "goimda/lowdisc.hpp"
#include "goimda/models.hpp"
#include "goimda/surrogate.hpp"

namespace goimda {

enum class GoalKind { OptValue, NLL, Focal, Entropy };
enum class GoalSense { Minimize, Maximize };

inline std::string to_string(GoalKind k) {
  switch (k) {
    case GoalKind::OptValue: return "opt_value";
    case GoalKind::NLL: return "nll";
    case GoalKind::Focal: return "focal";
    default: return "entropy";
  }
}

inline GoalKind goal_kind_from_string(const std::string& s) {
  if (s == "opt_value") return GoalKind::OptValue;
  if (s == "nll") return GoalKind::NLL;
  if (s == "focal") return GoalKind::Focal;
  if (s == "entropy") return GoalKind::Entropy;
  throw ConfigError("unknown goal kind: " + s);
}

inline std::string to_string(GoalSense s) { return s == GoalSense::Maximize ? "maximize" : "minimize"; }

inline GoalSense goal_sense_from_string(const std::string& s) {
  if (s == "minimize") return GoalSense::Minimize;
  if (s == "maximize") return GoalSense::Maximize;
  throw ConfigError("unknown goal sense: " + s);
}

struct RecommendConfig {
  int restarts = 20;
  int max_iters = 500;
  double tol = 1e-6;
  /// Newton steps on the free coordinates after descent; keeps x* accurate
  /// enough for finite-difference checks of the Jacobian.
  int polish_steps = 20;
};

struct GoalObjective {
  GoalKind kind = GoalKind::NLL;
  GoalSense sense = GoalSense::Minimize;
  std::vector<Vector> targets;  // U, for the three target-set goals
  double focal_gamma = 0.0;
  Box box;  // OptValue only
  RecommendConfig inner;

  void validate() const {
    if (kind == GoalKind::OptValue) {
      require(box.dim() > 0, "goal: opt_value needs a search box");
    } else {
      require(!targets.empty(), "goal: target set must be non-empty");
    }
    require(focal_gamma >= 0.0, "goal: focal gamma must be nonnegative");
  }

  /// s in the influence definition: +1 for maximization, -1 for minimization.
  double sign() const { return sense == GoalSense::Maximize ? 1.0 : -1.0; }
};

struct RecommendedDesign {
  Vector x_star;
  double inner_value = 0.0;
  bool converged = false;
  int restarts_used = 0;
  double projected_grad = 0.0;
  std::vector<bool> at_bound;  // per-dimension: coordinate sits on a box face

  bool on_boundary() const {
    for (bool b : at_bound)
      if (b) return true;
    return false;
  }
};

namespace detail {

inline double pred_mean(const FittedModel& m, const Vector& x) { return m.fam().mean(m.eta(x)); }

inline Vector pred_mean_grad(const FittedModel& m, const Vector& x) {
  return m.fam().variance(m.eta(x)) * m.eta_grad_x(x);
}

/// Hessian in x of A'(eta(x)).
inline Matrix pred_mean_hess(const FittedModel& m, const Vector& x) {
  const double eta = m.eta(x);
  const Vector gx = m.eta_grad_x(x);
  return m.fam().third(eta) * gx * gx.transpose() + m.fam().variance(eta) * m.structure->eta_hess_x(m.params(), x);
}

inline std::vector<bool> bound_flags(const Box& box, const Vector& x) {
  std::vector<bool> f(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double slack = 1e-12 * (box.upper[i] - box.lower[i]);
    f[static_cast<std::size_t>(i)] = x[i] <= box.lower[i] + slack || x[i] >= box.upper[i] - slack;
  }
  return f;
}

/// Gradient with components zeroed where the box blocks descent.
inline Vector projected_gradient(const Box& box, const Vector& x, const Vector& g) {
  Vector pg = g;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double slack = 1e-12 * (box.upper[i] - box.lower[i]);
    if ((x[i] <= box.lower[i] + slack && g[i] > 0.0) || (x[i] >= box.upper[i] - slack && g[i] < 0.0)) pg[i] = 0.0;
  }
  return pg;
}

struct LocalResult {
  Vector x;
  double value = 0.0;
  double pg = 0.0;
  bool finite = true;
};

inline LocalResult descend(const FittedModel& m, const Box& box, Vector x, const RecommendConfig& cfg) {
  LocalResult out;
  double f = pred_mean(m, x);
  double t = 0.1 * box.diameter();
  Vector g = pred_mean_grad(m, x);
  double gscale = std::max(g.cwiseAbs().maxCoeff(), 1e-300);
  t /= gscale;
  for (int it = 0; it < cfg.max_iters; ++it) {
    if (!std::isfinite(f) || !g.allFinite()) {
      out.finite = false;
      break;
    }
    if (projected_gradient(box, x, g).cwiseAbs().maxCoeff() <= cfg.tol) break;
    bool moved = false;
    for (int bt = 0; bt < 60; ++bt) {
      const Vector xn = box.clamp(x - t * g);
      const double fn = pred_mean(m, xn);
      if (std::isfinite(fn) && fn <= f - 1e-4 * g.dot(x - xn)) {
        moved = (xn - x).cwiseAbs().maxCoeff() > 0.0;
        x = xn;
        f = fn;
        t *= 2.0;
        break;
      }
      t *= 0.5;
    }
    g = pred_mean_grad(m, x);
    if (!moved) break;
  }
  // Newton polish on the free coordinates.
  for (int k = 0; k < cfg.polish_steps && out.finite; ++k) {
    const Vector pg = projected_gradient(box, x, g);
    if (pg.cwiseAbs().maxCoeff() <= 1e-13) break;
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (pg[i] != 0.0) free.push_back(i);
    const Matrix h = pred_mean_hess(m, x);
    Matrix hf(static_cast<Eigen::Index>(free.size()), static_cast<Eigen::Index>(free.size()));
    Vector gf(static_cast<Eigen::Index>(free.size()));
    for (std::size_t a = 0; a < free.size(); ++a) {
      gf[static_cast<Eigen::Index>(a)] = g[free[a]];
      for (std::size_t b = 0; b < free.size(); ++b)
        hf(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = h(free[a], free[b]);
    }
    Eigen::LLT<Matrix> llt(hf);
    if (llt.info() != Eigen::Success) break;
    const Vector sf = llt.solve(-gf);
    Vector xn = x;
    for (std::size_t a = 0; a < free.size(); ++a) xn[free[a]] += sf[static_cast<Eigen::Index>(a)];
    xn = box.clamp(xn);
    const double fn = pred_mean(m, xn);
    const Vector gn = pred_mean_grad(m, xn);
    if (!std::isfinite(fn) || !gn.allFinite()) break;
    const double pg_new = projected_gradient(box, xn, gn).cwiseAbs().maxCoeff();
    if (fn > f + 1e-12 * (1.0 + std::abs(f)) && pg_new >= pg.cwiseAbs().maxCoeff()) break;
    x = xn;
    f = fn;
    g = gn;
  }
  out.x = x;
  out.value = f;
  out.pg = projected_gradient(box, x, g).cwiseAbs().maxCoeff();
  out.finite = out.finite && std::isfinite(f);
  return out;
}

}  // namespace detail

/// Multi-start projected gradient descent on the predictive mean A'(eta(x)).
inline RecommendedDesign recommend_minimizer(const FittedModel& model, const Box& box, const RecommendConfig& cfg = {}) {
  require(box.dim() == model.structure->input_dim(), "recommend_minimizer: box dimension mismatch");
  require(cfg.restarts >= 1, "recommend_minimizer: need at least one restart");
  const auto starts = halton_in_box(box, static_cast<std::size_t>(cfg.restarts));
  RecommendedDesign best;
  best.inner_value = std::numeric_limits<double>::infinity();
  int finite_runs = 0;
  std::string trace;
  for (const auto& s : starts) {
    const auto r = detail::descend(model, box, s, cfg);
    ++best.restarts_used;
    if (!r.finite) {
      trace += " restart " + std::to_string(best.restarts_used - 1) + " non-finite;";
      continue;
    }
    ++finite_runs;
    if (r.value < best.inner_value) {
      best.x_star = r.x;
      best.inner_value = r.value;
      best.projected_grad = r.pg;
    }
  }
  if (finite_runs == 0) throw NonConvergenceError("recommend_minimizer: all restarts diverged:" + trace);
  best.converged = best.projected_grad <= cfg.tol;
  best.at_bound = detail::bound_flags(box, best.x_star);
  return best;
}

namespace detail {

inline void jacobian_factors(const FittedModel& m, const Vector& x, Matrix& inner, Matrix& cross) {
  const double eta = m.eta(x);
  const Vector gx = m.eta_grad_x(x);
  const Vector gt = m.eta_grad(x);
  const double a2 = m.fam().variance(eta), a3 = m.fam().third(eta);
  inner = a3 * gx * gx.transpose() + a2 * m.structure->eta_hess_x(m.params(), x);
  cross = a3 * gx * gt.transpose() + a2 * m.structure->eta_cross(m.params(), x);
}

}  // namespace detail

/// d x* / d theta = -[grad_x^2 A'(eta)]^{-1} [d/dtheta grad_x A'(eta)], d_x by d_theta.
inline DenseMatrix minimizer_jacobian(const FittedModel& model, const RecommendedDesign& design) {
  require(design.converged, "minimizer_jacobian: design did not converge");
  if (design.on_boundary()) throw BoundaryError("minimizer_jacobian: design lies on the box boundary");
  Matrix inner, cross;
  detail::jacobian_factors(model, design.x_star, inner, cross);
  Eigen::LLT<Matrix> llt(inner);
  if (llt.info() != Eigen::Success) throw SingularityError("minimizer_jacobian: inner Hessian is not positive definite");
  return -llt.solve(cross);
}

/// Boundary fallback: coordinates on a box face are held fixed (zero rows),
/// the rest follow the interior formula restricted to the free block.
inline DenseMatrix minimizer_jacobian_active_set(const FittedModel& model, const RecommendedDesign& design) {
  require(design.converged, "minimizer_jacobian: design did not converge");
  Matrix inner, cross;
  detail::jacobian_factors(model, design.x_star, inner, cross);
  std::vector<Eigen::Index> free;
  for (std::size_t i = 0; i < design.at_bound.size(); ++i)
    if (!design.at_bound[i]) free.push_back(static_cast<Eigen::Index>(i));
  DenseMatrix jac = DenseMatrix::Zero(inner.rows(), cross.cols());
  if (free.empty()) return jac;
  const auto nf = static_cast<Eigen::Index>(free.size());
  Matrix hf(nf, nf), cf(nf, cross.cols());
  for (Eigen::Index a = 0; a < nf; ++a) {
    cf.row(a) = cross.row(free[a]);
    for (Eigen::Index b = 0; b < nf; ++b) hf(a, b) = inner(free[a], free[b]);
  }
  Eigen::LLT<Matrix> llt(hf);
  if (llt.info() != Eigen::Success) throw SingularityError("minimizer_jacobian: inner Hessian is not positive definite");
  const Matrix jf = -llt.solve(cf);
  for (Eigen::Index a = 0; a < nf; ++a) jac.row(free[a]) = jf.row(a);
  return jac;
}

// ---------------------------------------------------------------------------
// Goal values and gradients

namespace detail {

/// -(1 - q)^gamma log q and its derivative in eta, for q = sigma(s * eta).
inline void focal_term(double eta, double s, double gamma, double& value, double& deta) {
  const double z = s * eta;
  const double q = bernoulli().mean(z);
  const double one_minus_q = bernoulli().mean(-z);
  const double log_q = -bernoulli().log_partition(-z);
  const double w = gamma == 0.0 ? 1.0 : std::pow(one_minus_q, gamma);
  value = -w * log_q;
  // d/dq of -(1-q)^g log q = g (1-q)^{g-1} log q - (1-q)^g / q; dq/deta = s q (1-q).
  double dq_first = 0.0;
  if (gamma != 0.0 && one_minus_q > 0.0) dq_first = gamma * std::pow(one_minus_q, gamma - 1.0) * log_q * q * one_minus_q;
  const double dq_second = -w * one_minus_q;  // (1-q)^g / q * q (1-q)
  deta = s * (dq_first + dq_second);
}

}  // namespace detail

struct GoalEvaluation {
  double value = 0.0;
  Vector gradient;
  std::optional<RecommendedDesign> design;
  bool boundary_fallback = false;
};

/// Value and theta-gradient of G. Target-set goals sum over U without
/// normalization. OptValue evaluates A'(eta_hat_0(x*)) on the surrogate's mean
/// natural parameter; a supplied design is reused instead of re-optimizing.
inline GoalEvaluation evaluate_goal(const GoalObjective& goal, const FittedModel& model,
                                    const LabelSurrogate* surrogate, const RecommendedDesign* design = nullptr,
                                    bool need_gradient = true) {
  goal.validate();
  const auto& fam = model.fam();
  GoalEvaluation ev;
  const auto p = static_cast<Eigen::Index>(model.num_params());
  ev.gradient = Vector::Zero(p);
  switch (goal.kind) {
    case GoalKind::OptValue: {
      require(surrogate != nullptr, "goal: opt_value needs a surrogate for eta_0");
      RecommendedDesign d = design != nullptr ? *design : recommend_minimizer(model, goal.box, goal.inner);
      const double eta0 = surrogate->eta(d.x_star);
      ev.value = fam.mean(eta0);
      if (need_gradient) {
        require(d.converged, "goal: opt_value gradient needs a converged design");
        DenseMatrix jac;
        if (d.on_boundary()) {
          jac = minimizer_jacobian_active_set(model, d);
          ev.boundary_fallback = true;
        } else {
          jac = minimizer_jacobian(model, d);
        }
        ev.gradient = fam.variance(eta0) * jac.transpose() * surrogate->eta_grad_x(d.x_star);
      }
      ev.design = std::move(d);
      break;
    }
    case GoalKind::NLL: {
      require(surrogate != nullptr, "goal: nll needs a surrogate for label expectations");
      for (const auto& x : goal.targets) {
        const double eta = model.eta(x), m = surrogate->mean(x);
        ev.value += fam.log_partition(eta) - eta * m;
        if (need_gradient) ev.gradient += (fam.mean(eta) - m) * model.eta_grad(x);
      }
      break;
    }
    case GoalKind::Focal: {
      require(surrogate != nullptr, "goal: focal needs a surrogate for label expectations");
      require(fam.is_binary(), "goal: focal loss is defined for binary labels only");
      for (const auto& x : goal.targets) {
        const double eta = model.eta(x), m = surrogate->mean(x);
        double v1, d1, v0, d0;
        detail::focal_term(eta, 1.0, goal.focal_gamma, v1, d1);
        detail::focal_term(eta, -1.0, goal.focal_gamma, v0, d0);
        ev.value += m * v1 + (1.0 - m) * v0;
        if (need_gradient) ev.gradient += (m * d1 + (1.0 - m) * d0) * model.eta_grad(x);
      }
      break;
    }
    case GoalKind::Entropy: {
      for (const auto& x : goal.targets) {
        const double eta = model.eta(x);
        ev.value += fam.entropy(eta);
        if (need_gradient) ev.gradient += fam.entropy_derivative(eta) * model.eta_grad(x);
      }
      break;
    }
  }
  if (need_gradient && !ev.gradient.allFinite()) throw NumericError("goal gradient is not finite");
  return ev;
}

inline double goal_value(const GoalObjective& goal, const FittedModel& model, const LabelSurrogate* surrogate) {
  return evaluate_goal(goal, model, surrogate, nullptr, false).value;
}

inline Vector goal_gradient(const GoalObjective& goal, const FittedModel& model, const LabelSurrogate* surrogate) {
  return evaluate_goal(goal, model, surrogate).gradient;
}

}  // namespace goimda

#endif  // GOIMDA_GOALS_HPP
