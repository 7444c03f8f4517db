#ifndef GOIMDA_GP_HPP
#define GOIMDA_GP_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "goimda/core.hpp"
#include "goimda/history.hpp"
#include "goimda/lowdisc.hpp"
#include "goimda/problems.hpp"

namespace goimda {

/// Hyperparameters are picked by log marginal likelihood over a grid:
/// lengthscale = m * diameter / sqrt(d), signal variance = m (standardized
/// targets). Noise is fixed; in original units when given.
struct GpConfig {
  std::vector<double> lengthscale_mult{0.05, 0.1, 0.2, 0.5, 1.0, 2.0};
  std::vector<double> signal_mult{0.5, 1.0, 2.0};
  std::optional<double> noise_variance;
  double default_noise = 1e-6;  // standardized units, used when noise is unknown
  double ucb_beta = 2.0;
  std::size_t recommend_grid = 1024;
};

struct GaussianProcess {
  Matrix x;  // n x d
  Vector alpha;
  Matrix chol_l;
  double y_mean = 0.0, y_scale = 1.0;
  double lengthscale = 1.0, signal_var = 1.0, noise_var = 1e-6;  // standardized
  double jitter = 0.0;
  double log_marginal = 0.0;

  double kernel(const Vector& a, const Vector& b) const {
    return signal_var * std::exp(-0.5 * (a - b).squaredNorm() / (lengthscale * lengthscale));
  }
  Vector k_star(const Vector& q) const {
    Vector k(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) k[i] = kernel(q, x.row(i).transpose());
    return k;
  }
};

struct GpPrediction {
  double mean = 0.0;
  double var = 0.0;         // predictive variance of an observation, original units
  double latent_var = 0.0;  // variance of f(x), original units
  bool clamped = false;
};

namespace detail {

inline bool gp_factor(GaussianProcess& gp, const Vector& ys) {
  const auto n = gp.x.rows();
  Matrix k(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) k(i, j) = k(j, i) = gp.kernel(gp.x.row(i).transpose(), gp.x.row(j).transpose());
  for (double jit : {0.0, 1e-10, 1e-8, 1e-6, 1e-4}) {
    Matrix a = k;
    a.diagonal().array() += gp.noise_var + jit;
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success) continue;
    gp.chol_l = llt.matrixL();
    gp.alpha = llt.solve(ys);
    gp.jitter = jit;
    gp.log_marginal = -0.5 * ys.dot(gp.alpha) - gp.chol_l.diagonal().array().log().sum() -
                      0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
    return true;
  }
  return false;
}

}  // namespace detail

inline GaussianProcess gp_fit(const std::vector<Vector>& xs, const std::vector<double>& ys, double box_diameter,
                              const GpConfig& cfg = {}) {
  require(!xs.empty() && xs.size() == ys.size(), "gp_fit: need matching non-empty inputs and targets");
  require(box_diameter > 0.0, "gp_fit: box diameter must be positive");
  const auto n = static_cast<Eigen::Index>(xs.size());
  const auto d = xs.front().size();
  GaussianProcess base;
  base.x.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) base.x.row(i) = xs[static_cast<std::size_t>(i)].transpose();
  Vector y = Eigen::Map<const Vector>(ys.data(), n);
  base.y_mean = y.mean();
  const double var = n >= 2 ? (y.array() - base.y_mean).square().sum() / static_cast<double>(n) : 0.0;
  base.y_scale = var > 0.0 ? std::sqrt(var) : 1.0;
  const Vector ystd = (y.array() - base.y_mean) / base.y_scale;
  base.noise_var = cfg.noise_variance ? *cfg.noise_variance / (base.y_scale * base.y_scale) : cfg.default_noise;

  GaussianProcess best;
  bool found = false;
  const double unit = box_diameter / std::sqrt(static_cast<double>(d));
  for (double lm : cfg.lengthscale_mult)
    for (double sm : cfg.signal_mult) {
      GaussianProcess cand = base;
      cand.lengthscale = lm * unit;
      cand.signal_var = sm;
      if (!detail::gp_factor(cand, ystd)) continue;
      if (!found || cand.log_marginal > best.log_marginal) {
        best = std::move(cand);
        found = true;
      }
    }
  if (!found) throw NumericError("gp_fit: kernel matrix not positive definite after jitter escalation to 1e-4");
  return best;
}

inline GpPrediction gp_posterior(const GaussianProcess& gp, const Vector& q) {
  const Vector k = gp.k_star(q);
  GpPrediction p;
  p.mean = gp.y_mean + gp.y_scale * k.dot(gp.alpha);
  const Vector v = gp.chol_l.triangularView<Eigen::Lower>().solve(k);
  double latent = gp.signal_var - v.squaredNorm();
  if (latent < 0.0) {
    latent = 0.0;
    p.clamped = true;
  }
  const double s2 = gp.y_scale * gp.y_scale;
  p.latent_var = s2 * latent;
  p.var = s2 * (latent + gp.noise_var);
  return p;
}

/// Gradient of the posterior mean in x.
inline Vector gp_mean_grad(const GaussianProcess& gp, const Vector& q) {
  Vector g = Vector::Zero(q.size());
  const double inv = 1.0 / (gp.lengthscale * gp.lengthscale);
  for (Eigen::Index i = 0; i < gp.x.rows(); ++i) {
    const Vector r = q - gp.x.row(i).transpose();
    g -= gp.alpha[i] * gp.kernel(q, gp.x.row(i).transpose()) * inv * r;
  }
  return gp.y_scale * g;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

/// Expected improvement below `best` (minimization). sigma = 0 gives max(best - mu, 0).
inline double acq_ei(double mu, double sigma, double best) {
  if (sigma <= 0.0) return std::max(best - mu, 0.0);
  const double z = (best - mu) / sigma;
  return std::max((best - mu) * normal_cdf(z) + sigma * normal_pdf(z), 0.0);
}

/// Probability of improvement; sigma = 0 gives 1, 0.5 or 0 as mu is below, at or above best.
inline double acq_pi(double mu, double sigma, double best) {
  if (sigma <= 0.0) return mu < best ? 1.0 : (mu == best ? 0.5 : 0.0);
  return normal_cdf((best - mu) / sigma);
}

/// Negated lower confidence bound, so larger is better.
inline double acq_ucb(double mu, double sigma, double beta) { return -(mu - beta * sigma); }

inline double acq_ei(const GaussianProcess& gp, const Vector& x, double best) {
  const auto p = gp_posterior(gp, x);
  return acq_ei(p.mean, std::sqrt(p.latent_var), best);
}
inline double acq_pi(const GaussianProcess& gp, const Vector& x, double best) {
  const auto p = gp_posterior(gp, x);
  return acq_pi(p.mean, std::sqrt(p.latent_var), best);
}
inline double acq_ucb(const GaussianProcess& gp, const Vector& x, double beta) {
  const auto p = gp_posterior(gp, x);
  return acq_ucb(p.mean, std::sqrt(p.latent_var), beta);
}

enum class BaselineKind { EI, UCB, PI, Random };

inline std::string to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::EI: return "ei";
    case BaselineKind::UCB: return "ucb";
    case BaselineKind::PI: return "pi";
    default: return "random";
  }
}

inline BaselineKind baseline_from_string(const std::string& s) {
  if (s == "ei") return BaselineKind::EI;
  if (s == "ucb") return BaselineKind::UCB;
  if (s == "pi") return BaselineKind::PI;
  if (s == "random") return BaselineKind::Random;
  throw ConfigError("unknown baseline: " + s);
}

/// Minimizer of the posterior mean: best of the training inputs and a fixed
/// Halton grid, then projected gradient descent from the five best points.
inline Vector gp_recommend(const GaussianProcess& gp, const Box& box, std::size_t grid) {
  std::vector<Vector> starts = halton_in_box(box, grid);
  for (Eigen::Index i = 0; i < gp.x.rows(); ++i) starts.push_back(gp.x.row(i).transpose());
  std::vector<std::pair<double, std::size_t>> vals;
  for (std::size_t i = 0; i < starts.size(); ++i) vals.push_back({gp_posterior(gp, starts[i]).mean, i});
  std::sort(vals.begin(), vals.end());
  Vector best = starts[vals.front().second];
  double best_v = vals.front().first;
  for (std::size_t s = 0; s < std::min<std::size_t>(5, vals.size()); ++s) {
    Vector x = starts[vals[s].second];
    double f = vals[s].first;
    double t = 0.01 * box.diameter();
    for (int it = 0; it < 200; ++it) {
      const Vector g = gp_mean_grad(gp, x);
      const double gn = g.norm();
      if (gn < 1e-10) break;
      bool moved = false;
      for (int bt = 0; bt < 40; ++bt) {
        const Vector xn = box.clamp(x - (t / gn) * g);
        const double fn = gp_posterior(gp, xn).mean;
        if (fn < f) {
          x = xn;
          f = fn;
          moved = true;
          t *= 2.0;
          break;
        }
        t *= 0.5;
      }
      if (!moved) break;
    }
    if (f < best_v) {
      best_v = f;
      best = x;
    }
  }
  return best;
}

/// GP Bayesian-optimization loop on the same initial design, candidate pools
/// and observation stream layout as run_loop with the same seed.
inline AcquisitionHistory bo_loop(const NoisyOptProblem& problem, BaselineKind kind, int budget,
                                  const GpConfig& cfg, std::uint64_t seed) {
  require(budget >= 0, "bo_loop: budget must be nonnegative");
  AcquisitionHistory hist;
  Rng init_rng(derive_seed(seed, 10));
  Dataset labeled = problem.initial_labeled(init_rng);
  Rng pool_rng(derive_seed(seed, 11));
  Rng obs_rng(derive_seed(seed, 12));
  Rng pick_rng(derive_seed(seed, 13));
  const Box& box = problem.objective().box;
  GpConfig c = cfg;
  if (!c.noise_variance) c.noise_variance = problem.objective().noise_sd * problem.objective().noise_sd;
  if (*c.noise_variance <= 0.0) c.noise_variance.reset();

  auto fit = [&]() {
    std::vector<Vector> xs;
    std::vector<double> ys;
    for (const auto& ex : labeled) {
      xs.push_back(ex.x);
      ys.push_back(ex.y);
    }
    return gp_fit(xs, ys, box.diameter(), c);
  };
  auto record_metric = [&](const GaussianProcess& gp, StepRecord& rec) {
    const Vector rx = gp_recommend(gp, box, c.recommend_grid);
    rec.metric_name = "immediate_regret";
    rec.metric = problem.regret_at(rx);
    rec.recommended_x = rx;
  };

  try {
    GaussianProcess gp = fit();
    StepRecord rec0;
    record_metric(gp, rec0);
    hist.records.push_back(std::move(rec0));
    for (int step = 1; step <= budget; ++step) {
      StepRecord rec;
      rec.step = step;
      rec.solver = "gp-" + to_string(kind);
      const auto pool = problem.pool(step, pool_rng);
      if (pool.empty()) {
        hist.status = "exhausted";
        break;
      }
      std::size_t pick = 0;
      if (kind == BaselineKind::Random) {
        std::uniform_int_distribution<std::size_t> u(0, pool.size() - 1);
        pick = u(pick_rng);
      } else {
        double best_y = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < gp.x.rows(); ++i)
          best_y = std::min(best_y, gp_posterior(gp, gp.x.row(i).transpose()).mean);
        std::vector<double> scores(pool.size());
        int clamps = 0;
        for (std::size_t i = 0; i < pool.size(); ++i) {
          const auto p = gp_posterior(gp, pool[i].x);
          clamps += p.clamped ? 1 : 0;
          const double sd = std::sqrt(p.latent_var);
          scores[i] = kind == BaselineKind::EI   ? acq_ei(p.mean, sd, best_y)
                      : kind == BaselineKind::PI ? acq_pi(p.mean, sd, best_y)
                                                 : acq_ucb(p.mean, sd, c.ucb_beta);
        }
        pick = select_next(scores);
        rec.score = scores[pick];
        if (clamps > 0) rec.note = std::to_string(clamps) + " posterior variances clamped at zero";
      }
      const double y = problem.observe(pool[pick], obs_rng);
      labeled.push_back({pool[pick].x, y});
      rec.chosen_x = pool[pick].x;
      rec.observed_y = y;
      gp = fit();
      record_metric(gp, rec);
      hist.records.push_back(std::move(rec));
    }
  } catch (const Error& e) {
    hist.status = "error";
    hist.error = e.what();
  }
  return hist;
}

}  // namespace goimda

#endif  // GOIMDA_GP_HPP
