#ifndef GOIMDA_ACQUISITION_HPP
#define GOIMDA_ACQUISITION_HPP

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "goimda/core.hpp"
#include "goimda/expfam.hpp"
#include "goimda/glm.hpp"
#include "goimda/goals.hpp"
#include "goimda/history.hpp"
#include "goimda/ihvp.hpp"
#include "goimda/models.hpp"
#include "goimda/surrogate.hpp"

namespace goimda {

/// A pool element; `id` lets problems map a candidate back to stored labels.
struct Candidate {
  Vector x;
  std::size_t id = 0;
};

struct MetricValue {
  std::string name;
  double value = kNaN;
  std::optional<Vector> recommended_x;
};

/// Data source and evaluation protocol for one acquisition run.
class AcquisitionProblem {
 public:
  virtual ~AcquisitionProblem() = default;
  virtual const ExponentialFamily& family() const = 0;
  virtual Dataset initial_labeled(Rng& rng) const = 0;
  /// Fixed pools shrink as points are acquired; otherwise the pool is redrawn each step.
  virtual bool fixed_pool() const = 0;
  virtual std::vector<Candidate> pool(int step, Rng& rng) const = 0;
  virtual double observe(const Candidate& c, Rng& rng) const = 0;
  virtual MetricValue evaluate(const FittedModel& model, const RecommendedDesign* design) const = 0;
  /// True parameters, when the generator is a model of the fitted class.
  virtual std::optional<Vector> true_params() const { return std::nullopt; }
  /// Whether evaluate() wants the model's recommended minimizer.
  virtual bool needs_design() const { return false; }
  virtual const Box* search_box() const { return nullptr; }
};

struct AcquisitionState {
  Dataset labeled;
  std::vector<Candidate> pool;
  FittedModel model;
  std::optional<JackknifeEnsemble> ensemble;
  int step = 0;
};

/// Where the prediction-bias factor of the score comes from.
///   Surrogate:  A'(eta_theta(x_c)) - surrogate mean (output space)
///   TrueParams / JackknifeParams / Ones:  parameter-space bias delta with
///     b(x_c) ~ A''(eta) grad eta' delta
enum class BiasSource { Surrogate, TrueParams, JackknifeParams, Ones };

inline std::string to_string(BiasSource b) {
  switch (b) {
    case BiasSource::Surrogate: return "surrogate";
    case BiasSource::TrueParams: return "true";
    case BiasSource::JackknifeParams: return "jackknife";
    default: return "ones";
  }
}

inline BiasSource bias_source_from_string(const std::string& s) {
  if (s == "surrogate") return BiasSource::Surrogate;
  if (s == "true") return BiasSource::TrueParams;
  if (s == "jackknife") return BiasSource::JackknifeParams;
  if (s == "ones") return BiasSource::Ones;
  throw ConfigError("unknown bias source: " + s);
}

struct AcquisitionConfig {
  TrainerPtr trainer;
  bool random = false;  // uniform choice from the pool instead of scoring
  BiasSource bias = BiasSource::Surrogate;
  std::size_t ensemble_size = 5;
  IhvpConfig ihvp;
  Curvature curvature = Curvature::Exact;
  /// Scores through the label expectation instead of the closed form.
  bool generic_path = false;
  std::size_t n_draws = 64;
  /// Optional early stop once the goal estimate falls below this value.
  std::optional<double> goal_threshold;
};

struct GoalDirection {
  Vector u;
  Vector goal_grad;
  double goal_value = kNaN;
  IhvpDiagnostics diag;
  std::optional<RecommendedDesign> design;
  bool boundary_fallback = false;
};

/// u = H^{-1} grad G for an explicit oracle.
inline GoalDirection precompute_goal_direction(const HvpOracle& oracle, const Vector& goal_grad,
                                               const IhvpConfig& cfg, Rng& rng) {
  GoalDirection gd;
  gd.goal_grad = goal_grad;
  auto res = solve_ihvp(oracle, goal_grad, cfg, rng);
  gd.u = std::move(res.u);
  gd.diag = std::move(res.diag);
  return gd;
}

/// Oracle for the training-objective Hessian of the state's model.
inline std::shared_ptr<HvpOracle> model_hvp_oracle(const AcquisitionState& state, Curvature curvature) {
  auto loss = std::make_shared<NllLoss>(state.model.structure, state.model.fam());
  return std::make_shared<LossHvpOracle>(loss, state.model.params(), state.labeled, state.model.ridge, curvature);
}

/// grad G for the target-set NLL goal with the bias written in parameter
/// form: sum_U A''(eta) grad eta (grad eta' delta).
inline Vector param_bias_goal_gradient(const GoalObjective& goal, const FittedModel& model, const Vector& delta) {
  Vector g = Vector::Zero(static_cast<Eigen::Index>(model.num_params()));
  for (const auto& x : goal.targets) {
    const Vector f = model.eta_grad(x);
    g += model.fam().variance(model.eta(x)) * f.dot(delta) * f;
  }
  return g;
}

/// u'grad eta(x_c) * (A'(eta(x_c)) - surrogate mean(x_c)).
inline double goi_score(const FittedModel& model, const Vector& u, const Vector& x_c, const LabelSurrogate& s) {
  const double bias = model.mean(x_c) - s.mean(x_c);
  if (bias == 0.0) return 0.0;
  return u.dot(model.eta_grad(x_c)) * bias;
}

/// E_{y ~ surrogate} u' grad l(theta; (x_c, y)).
inline double goi_score_expected(const FittedModel& model, const Vector& u, const Vector& x_c,
                                 const LabelSurrogate& s, std::size_t n_draws, Rng& rng) {
  const double ug = u.dot(model.eta_grad(x_c));
  const double mean = model.mean(x_c);
  const auto& fam = model.fam();
  return expected_over_labels(
      s, x_c, [&](double y) { return ug * (mean - fam.sufficient_stat(y)); }, n_draws, rng);
}

/// u'grad eta(x_c) * grad eta(x_c)'delta * A''(eta(x_c)).
inline double goi_score_param_bias(const FittedModel& model, const Vector& u, const Vector& x_c, const Vector& delta) {
  const Vector f = model.eta_grad(x_c);
  return u.dot(f) * f.dot(delta) * model.fam().variance(model.eta(x_c));
}

/// Index of the largest score; ties and NaNs resolve to the lowest index.
inline std::size_t select_next(const std::vector<double>& scores) {
  if (scores.empty()) throw ExhaustionError("select_next: candidate pool is empty");
  std::size_t best = 0;
  double bv = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) continue;
    if (!any || scores[i] > bv) {
      best = i;
      bv = scores[i];
      any = true;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------

namespace detail {

struct StepScores {
  std::vector<double> scores;
  GoalDirection direction;
};

inline StepScores score_pool(AcquisitionState& state, const GoalObjective& goal, const AcquisitionConfig& cfg,
                             const AcquisitionProblem& problem, std::uint64_t step_seed,
                             const RecommendedDesign* design) {
  const auto& model = state.model;
  const bool param_bias = cfg.bias != BiasSource::Surrogate;
  // The parameter-form NLL gradient needs no label expectations.
  const bool param_goal = param_bias && goal.kind == GoalKind::NLL;
  const bool goal_needs_surrogate = goal.kind != GoalKind::Entropy && !param_goal;
  if (cfg.bias == BiasSource::Surrogate || cfg.bias == BiasSource::JackknifeParams || goal_needs_surrogate) {
    const std::size_t r = std::min(cfg.ensemble_size, state.labeled.size());
    state.ensemble.emplace(train_ensemble(state.labeled, r, *cfg.trainer, derive_seed(step_seed, 1), &model));
  } else {
    state.ensemble.reset();
  }

  Vector delta;
  if (param_bias) {
    if (cfg.bias == BiasSource::TrueParams) {
      auto t = problem.true_params();
      require(t.has_value(), "acquisition: true-bias strategy needs the generator's parameters");
      delta = model.params() - *t;
    } else if (cfg.bias == BiasSource::JackknifeParams) {
      delta = bias_estimate(*state.ensemble, model.theta);
    } else {
      delta = Vector::Ones(static_cast<Eigen::Index>(model.num_params()));
    }
  }

  StepScores out;
  Vector grad;
  double gval = kNaN;
  std::optional<RecommendedDesign> used_design;
  bool fallback = false;
  if (param_goal) {
    grad = param_bias_goal_gradient(goal, model, delta);
  } else {
    const LabelSurrogate* s = state.ensemble ? &*state.ensemble : nullptr;
    auto ev = evaluate_goal(goal, model, s, design);
    grad = std::move(ev.gradient);
    gval = ev.value;
    used_design = std::move(ev.design);
    fallback = ev.boundary_fallback;
  }
  Rng rng(derive_seed(step_seed, 2));
  auto oracle = model_hvp_oracle(state, cfg.curvature);
  out.direction = precompute_goal_direction(*oracle, grad, cfg.ihvp, rng);
  out.direction.goal_value = gval;
  out.direction.design = std::move(used_design);
  out.direction.boundary_fallback = fallback;

  const double sign = -goal.sign();
  const Vector& u = out.direction.u;
  out.scores.resize(state.pool.size());
  Rng draw_rng(derive_seed(step_seed, 3));
  for (std::size_t i = 0; i < state.pool.size(); ++i) {
    const Vector& x = state.pool[i].x;
    double raw;
    if (param_bias)
      raw = goi_score_param_bias(model, u, x, delta);
    else if (cfg.generic_path)
      raw = goi_score_expected(model, u, x, *state.ensemble, cfg.n_draws, draw_rng);
    else
      raw = goi_score(model, u, x, *state.ensemble);
    out.scores[i] = sign * raw;
  }
  return out;
}

}  // namespace detail

/// The outer acquisition loop: refit, score the pool, query, augment.
inline AcquisitionHistory run_loop(const AcquisitionProblem& problem, const GoalObjective& goal, int budget,
                                   const AcquisitionConfig& cfg, std::uint64_t seed) {
  require(budget >= 0, "run_loop: budget must be nonnegative");
  require(cfg.trainer != nullptr, "run_loop: no trainer configured");
  AcquisitionHistory hist;
  AcquisitionState state;
  Rng init_rng(derive_seed(seed, 10));
  state.labeled = problem.initial_labeled(init_rng);
  Rng pool_rng(derive_seed(seed, 11));
  if (problem.fixed_pool()) state.pool = problem.pool(0, pool_rng);
  Rng obs_rng(derive_seed(seed, 12));
  Rng pick_rng(derive_seed(seed, 13));

  auto fit_model = [&](const FittedModel* warm, StepRecord& rec) {
    FitResult fr = cfg.trainer->fit(state.labeled, derive_seed(seed, 20, state.step), warm);
    if (!fr.report.converged) rec.note = fr.report.message;
    state.model = std::move(fr.model);
  };
  auto evaluate = [&](StepRecord& rec) -> std::optional<RecommendedDesign> {
    std::optional<RecommendedDesign> design;
    if (problem.needs_design()) design = recommend_minimizer(state.model, *problem.search_box(), goal.inner);
    auto mv = problem.evaluate(state.model, design ? &*design : nullptr);
    rec.metric_name = mv.name;
    rec.metric = mv.value;
    rec.recommended_x = mv.recommended_x;
    return design;
  };

  std::optional<RecommendedDesign> design;
  try {
    StepRecord rec0;
    rec0.step = 0;
    fit_model(nullptr, rec0);
    design = evaluate(rec0);
    hist.records.push_back(std::move(rec0));
  } catch (const Error& e) {
    hist.status = "error";
    hist.error = std::string("step 0: ") + e.what();
    return hist;
  }

  for (int step = 1; step <= budget; ++step) {
    StepRecord rec;
    rec.step = step;
    try {
      if (!problem.fixed_pool()) state.pool = problem.pool(step, pool_rng);
      if (state.pool.empty()) {
        hist.status = "exhausted";
        break;
      }
      std::size_t pick;
      if (cfg.random) {
        std::uniform_int_distribution<std::size_t> u(0, state.pool.size() - 1);
        pick = u(pick_rng);
        rec.solver = "none";
      } else {
        const RecommendedDesign* d =
            (goal.kind == GoalKind::OptValue && design && problem.search_box() != nullptr) ? &*design : nullptr;
        auto ss = detail::score_pool(state, goal, cfg, problem, derive_seed(seed, 30, step), d);
        pick = select_next(ss.scores);
        rec.score = ss.scores[pick];
        rec.goal_value = ss.direction.goal_value;
        rec.solver = ss.direction.diag.method;
        rec.solver_iterations = ss.direction.diag.iterations;
        rec.solver_residual = ss.direction.diag.residual;
        rec.damping = ss.direction.diag.effective_damping;
        if (ss.direction.boundary_fallback) rec.note = "boundary design: active dimensions held fixed";
      }
      const Candidate chosen = state.pool[pick];
      const double y = problem.observe(chosen, obs_rng);
      if (problem.fixed_pool()) state.pool.erase(state.pool.begin() + static_cast<std::ptrdiff_t>(pick));
      state.labeled.push_back({chosen.x, y});
      state.step = step;
      rec.chosen_x = chosen.x;
      rec.observed_y = y;
      const FittedModel prev = state.model;
      fit_model(&prev, rec);
      design = evaluate(rec);
      hist.records.push_back(std::move(rec));
      if (cfg.goal_threshold && std::isfinite(hist.records.back().goal_value) &&
          hist.records.back().goal_value <= *cfg.goal_threshold)
        break;
    } catch (const Error& e) {
      hist.status = "error";
      hist.error = "step " + std::to_string(step) + ": " + e.what();
      break;
    }
  }
  return hist;
}

// ---------------------------------------------------------------------------

struct InfluenceCheck {
  double approx = 0.0;
  double oracle = 0.0;
};

/// First-order prediction of G(theta^eps) - G(theta) against an actual
/// weighted refit. GLM structures only (theta enters eta linearly).
inline InfluenceCheck influence_vs_retrain(const AcquisitionState& state, const Vector& x_c, double y_c, double eps,
                                           const GoalObjective& goal, const LabelSurrogate* surrogate) {
  require(eps >= 0.0 && eps <= 0.1, "influence_vs_retrain: eps must lie in [0, 0.1]");
  if (eps == 0.0) return {0.0, 0.0};
  const auto& model = state.model;
  const auto& fam = model.fam();
  const DenseMatrix h = glm_hessian(model, state.labeled);
  const auto ev = evaluate_goal(goal, model, surrogate);
  const Vector f = model.eta_grad(x_c);
  const Vector grad_l = (fam.mean(f.dot(model.params())) - fam.sufficient_stat(y_c)) * f;
  const double influence = ev.gradient.dot(direct_solve(h, grad_l, 0.0));

  Dataset aug = state.labeled;
  aug.push_back({x_c, y_c});
  Vector w = Vector::Constant(static_cast<Eigen::Index>(aug.size()), 1.0 / static_cast<double>(state.labeled.size()));
  w[w.size() - 1] = eps;
  GlmFitOptions opts;
  opts.grad_tol = 1e-10;
  const auto refit = fit_glm_weighted(model.structure, fam, aug, w, model.ridge, model.params(), opts);
  if (refit.report.grad_norm > 1e-10) throw NonConvergenceError("influence_vs_retrain: refit " + refit.report.message);
  const double g_eps = evaluate_goal(goal, refit.model, surrogate, nullptr, false).value;
  return {-influence * eps, g_eps - ev.value};
}

}  // namespace goimda

#endif  // GOIMDA_ACQUISITION_HPP
