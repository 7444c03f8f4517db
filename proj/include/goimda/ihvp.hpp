#ifndef GOIMDA_IHVP_HPP
#define GOIMDA_IHVP_HPP

#include <algorithm>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "goimda/core.hpp"
#include "goimda/diffcore.hpp"
#include "goimda/glm.hpp"

namespace goimda {

/// Linear operator v -> H v, with a stochastic minibatch variant for LiSSA.
class HvpOracle {
 public:
  virtual ~HvpOracle() = default;
  virtual std::size_t dim() const = 0;
  virtual Vector apply(const Vector& v) const = 0;
  /// H restricted to the examples in `indices` (mean over them).
  virtual Vector apply_subset(const Vector& v, const std::vector<std::size_t>& indices) const = 0;
  /// Number of examples behind the operator; 0 when it is not data-backed.
  virtual std::size_t num_examples() const { return 0; }

  /// Minibatch estimate on `batch` examples drawn without replacement.
  Vector apply_minibatch(const Vector& v, std::size_t batch, Rng& rng) const {
    const std::size_t n = num_examples();
    if (n == 0 || batch >= n) return apply(v);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < batch; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(batch);
    return apply_subset(v, idx);
  }
};

class DenseHvpOracle final : public HvpOracle {
 public:
  explicit DenseHvpOracle(DenseMatrix h) : h_(std::move(h)) {
    require(h_.rows() == h_.cols() && h_.rows() > 0, "dense oracle: matrix must be square");
  }
  std::size_t dim() const override { return static_cast<std::size_t>(h_.rows()); }
  Vector apply(const Vector& v) const override {
    require(v.size() == h_.rows(), "dense oracle: dimension mismatch");
    return h_ * v;
  }
  Vector apply_subset(const Vector& v, const std::vector<std::size_t>&) const override { return apply(v); }
  const DenseMatrix& matrix() const { return h_; }

 private:
  DenseMatrix h_;
};

/// Empirical loss Hessian over a dataset plus ridge * I.
class LossHvpOracle final : public HvpOracle {
 public:
  LossHvpOracle(std::shared_ptr<const LossFunction> loss, Vector theta, Dataset data, double ridge = 0.0,
                Curvature curvature = Curvature::Exact)
      : loss_(std::move(loss)), theta_(std::move(theta)), data_(std::move(data)), ridge_(ridge), curv_(curvature) {
    require(!data_.empty(), "loss oracle: empty data");
  }
  std::size_t dim() const override { return static_cast<std::size_t>(theta_.size()); }
  std::size_t num_examples() const override { return data_.size(); }

  Vector apply(const Vector& v) const override { return hvp(*loss_, theta_, data_, v, curv_) + ridge_ * v; }

  Vector apply_subset(const Vector& v, const std::vector<std::size_t>& indices) const override {
    require(!indices.empty(), "loss oracle: empty subset");
    Vector out = Vector::Zero(v.size());
    for (auto i : indices) {
      require(i < data_.size(), "loss oracle: subset index out of range");
      out += curv_ == Curvature::Exact ? loss_->hvp(theta_, data_[i], v) : loss_->gauss_newton_hvp(theta_, data_[i], v);
    }
    return out / static_cast<double>(indices.size()) + ridge_ * v;
  }

 private:
  std::shared_ptr<const LossFunction> loss_;
  Vector theta_;
  Dataset data_;
  double ridge_;
  Curvature curv_;
};

enum class IhvpMethod { Auto, Cg, Lissa, Direct };

struct IhvpConfig {
  IhvpMethod method = IhvpMethod::Auto;
  double damping = 1e-3;
  int max_iters = 1000;
  double tol = 1e-10;
  /// <= 0 selects 1 / (1.5 * power-iteration estimate of |H + damping I|).
  double lissa_scale = 0.0;
  std::size_t lissa_batch = 64;
  int lissa_repeats = 2;
  /// Solve (H^2 + damping I) u = H v instead of (H + damping I) u = v.
  bool cg_normal_equations = false;
  /// Auto picks CG up to this many examples and LiSSA above.
  std::size_t auto_cg_max_examples = 10000;
};

struct IhvpDiagnostics {
  std::string method;
  int iterations = 0;
  double residual = 0.0;  // relative, of the system actually solved
  double effective_damping = 0.0;
  std::size_t oracle_calls = 0;
  bool converged = false;
  double lissa_scale = 0.0;
  std::vector<double> norm_trace;  // LiSSA iterate norms (first repeat)
};

struct IhvpResult {
  Vector u;
  IhvpDiagnostics diag;
};

/// Largest-magnitude eigenvalue of the oracle (plus shift) by power iteration.
inline double power_iteration(const HvpOracle& oracle, double shift, Rng& rng, int iters = 100) {
  Vector b = standard_normal_vector(oracle.dim(), rng);
  b.normalize();
  double lambda = 0.0;
  for (int i = 0; i < iters; ++i) {
    Vector hb = oracle.apply(b) + shift * b;
    const double nrm = hb.norm();
    if (!std::isfinite(nrm)) throw NumericError("power iteration: non-finite value");
    if (nrm == 0.0) return 0.0;
    lambda = nrm;
    b = hb / nrm;
  }
  return lambda;
}

/// Exact (H + damping I) u = v via a symmetric factorization. Oracle path.
inline Vector direct_solve(const DenseMatrix& h, const Vector& v, double damping = 0.0) {
  require(h.rows() == h.cols() && h.rows() == v.size(), "direct_solve: shape mismatch");
  if (static_cast<std::size_t>(h.rows()) > kDenseCap) throw CapacityError("direct_solve: dimension exceeds dense cap");
  if (!is_symmetric(h, 1e-8)) throw ContractError("direct_solve: matrix is not symmetric");
  Matrix a = h;
  a.diagonal().array() += damping;
  Eigen::LDLT<Matrix> ldlt(a);
  const double dmax = ldlt.vectorD().cwiseAbs().maxCoeff();
  const double dmin = ldlt.vectorD().cwiseAbs().minCoeff();
  if (ldlt.info() != Eigen::Success || dmax == 0.0 ||
      dmin <= static_cast<double>(a.rows()) * std::numeric_limits<double>::epsilon() * dmax)
    throw SingularityError("direct_solve: matrix is singular to working precision");
  return ldlt.solve(v);
}

namespace detail {

/// Conjugate gradient on a generic SPD operator. Returns false when a
/// direction of non-positive curvature is met.
template <typename Op>
bool cg_core(const Op& op, const Vector& b, const IhvpConfig& cfg, Vector& x, IhvpDiagnostics& d) {
  x = Vector::Zero(b.size());
  const double bn = b.norm();
  if (bn == 0.0) {
    d.converged = true;
    d.residual = 0.0;
    return true;
  }
  Vector r = b, p = b;
  double rr = r.squaredNorm();
  for (int k = 0; k < cfg.max_iters; ++k) {
    const Vector ap = op(p);
    ++d.oracle_calls;
    const double pap = p.dot(ap);
    if (!std::isfinite(pap) || !ap.allFinite())
      throw NumericError("cg: non-finite value at iteration " + std::to_string(d.iterations));
    if (pap <= 0.0) return false;
    const double alpha = rr / pap;
    x += alpha * p;
    r -= alpha * ap;
    ++d.iterations;
    const double rr_new = r.squaredNorm();
    if (!std::isfinite(rr_new)) throw NumericError("cg: non-finite residual at iteration " + std::to_string(d.iterations));
    d.residual = std::sqrt(rr_new) / bn;
    if (d.residual <= cfg.tol) {
      d.converged = true;
      return true;
    }
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  return true;
}

}  // namespace detail

/// Damped CG. On negative curvature the damping is raised tenfold, at most
/// three times; the diagnostics carry the damping finally used.
inline IhvpResult solve_cg(const HvpOracle& oracle, const Vector& v, const IhvpConfig& cfg) {
  require(v.size() == static_cast<Eigen::Index>(oracle.dim()), "solve_cg: dimension mismatch");
  if (!v.allFinite()) throw NumericError("solve_cg: right-hand side is not finite");
  IhvpResult res;
  res.diag.method = cfg.cg_normal_equations ? "cg-normal" : "cg";
  double lambda = cfg.damping;
  for (int attempt = 0; attempt <= 3; ++attempt) {
    res.diag.iterations = 0;
    res.diag.converged = false;
    res.diag.effective_damping = lambda;
    bool ok = false;
    if (cfg.cg_normal_equations) {
      const Vector rhs = oracle.apply(v);
      ++res.diag.oracle_calls;
      auto op = [&](const Vector& p) {
        ++res.diag.oracle_calls;
        return Vector(oracle.apply(oracle.apply(p)) + lambda * p);
      };
      ok = detail::cg_core(op, rhs, cfg, res.u, res.diag);
    } else {
      auto op = [&](const Vector& p) { return Vector(oracle.apply(p) + lambda * p); };
      ok = detail::cg_core(op, v, cfg, res.u, res.diag);
    }
    if (ok) return res;
    lambda = std::max(10.0 * lambda, 1e-6);
  }
  res.diag.converged = false;
  return res;
}

/// Stochastic Neumann-series estimate of (H + damping I)^{-1} v.
inline IhvpResult solve_lissa(const HvpOracle& oracle, const Vector& v, const IhvpConfig& cfg, Rng& rng) {
  require(v.size() == static_cast<Eigen::Index>(oracle.dim()), "solve_lissa: dimension mismatch");
  require(cfg.lissa_repeats >= 1 && cfg.max_iters >= 1, "solve_lissa: need at least one repeat and iteration");
  IhvpResult res;
  res.diag.method = "lissa";
  res.diag.effective_damping = cfg.damping;
  double scale = cfg.lissa_scale;
  if (scale <= 0.0) {
    const double rho = power_iteration(oracle, cfg.damping, rng);
    res.diag.oracle_calls += 100;
    scale = rho > 0.0 ? 1.0 / (1.5 * rho) : 1.0;
  }
  res.diag.lissa_scale = scale;
  const double limit = 1e6 * std::max(v.norm(), 1e-300);
  res.u = Vector::Zero(v.size());
  for (int rep = 0; rep < cfg.lissa_repeats; ++rep) {
    Vector u = v;
    for (int j = 0; j < cfg.max_iters; ++j) {
      const Vector hu = oracle.apply_minibatch(u, cfg.lissa_batch, rng) + cfg.damping * u;
      ++res.diag.oracle_calls;
      u = v + u - scale * hu;
      const double nrm = u.norm();
      if (!std::isfinite(nrm)) throw NumericError("lissa: non-finite iterate in repeat " + std::to_string(rep));
      if (nrm > limit)
        throw DivergenceError("lissa: iterate norm exceeded 1e6 |v| in repeat " + std::to_string(rep) +
                              " at iteration " + std::to_string(j));
      if (rep == 0) res.diag.norm_trace.push_back(nrm);
    }
    res.u += scale * u;
    res.diag.iterations += cfg.max_iters;
  }
  res.u /= static_cast<double>(cfg.lissa_repeats);
  const Vector r = oracle.apply(res.u) + cfg.damping * res.u - v;
  ++res.diag.oracle_calls;
  res.diag.residual = v.norm() > 0.0 ? r.norm() / v.norm() : r.norm();
  res.diag.converged = true;
  return res;
}

/// Dispatch on cfg.method. Direct assembles the dense matrix from the oracle.
inline IhvpResult solve_ihvp(const HvpOracle& oracle, const Vector& v, const IhvpConfig& cfg, Rng& rng) {
  IhvpMethod m = cfg.method;
  if (m == IhvpMethod::Auto) m = oracle.num_examples() > cfg.auto_cg_max_examples ? IhvpMethod::Lissa : IhvpMethod::Cg;
  switch (m) {
    case IhvpMethod::Lissa: return solve_lissa(oracle, v, cfg, rng);
    case IhvpMethod::Direct: {
      const auto n = static_cast<Eigen::Index>(oracle.dim());
      if (static_cast<std::size_t>(n) > kDenseCap) throw CapacityError("direct solve: dimension exceeds dense cap");
      DenseMatrix h(n, n);
      for (Eigen::Index j = 0; j < n; ++j) h.col(j) = oracle.apply(Vector::Unit(n, j));
      h = 0.5 * (h + h.transpose());
      IhvpResult res{direct_solve(h, v, cfg.damping), {}};
      res.diag.method = "direct";
      res.diag.effective_damping = cfg.damping;
      res.diag.oracle_calls = static_cast<std::size_t>(n);
      res.diag.converged = true;
      return res;
    }
    default: return solve_cg(oracle, v, cfg);
  }
}

inline std::string to_string(IhvpMethod m) {
  switch (m) {
    case IhvpMethod::Cg: return "cg";
    case IhvpMethod::Lissa: return "lissa";
    case IhvpMethod::Direct: return "direct";
    default: return "auto";
  }
}

inline IhvpMethod ihvp_method_from_string(const std::string& s) {
  if (s == "auto") return IhvpMethod::Auto;
  if (s == "cg") return IhvpMethod::Cg;
  if (s == "lissa") return IhvpMethod::Lissa;
  if (s == "direct") return IhvpMethod::Direct;
  throw ConfigError("unknown ihvp method: " + s);
}

}  // namespace goimda

#endif  // GOIMDA_IHVP_HPP
