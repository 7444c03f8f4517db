#ifndef GOIMDA_PROBLEMS_HPP
#define GOIMDA_PROBLEMS_HPP

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "goimda/acquisition.hpp"
#include "goimda/benchfuncs.hpp"
#include "goimda/lowdisc.hpp"

namespace goimda {

/// Logistic GLM over PPCA inputs: fixed pool, held-out test accuracy.
class PpcaLogisticProblem final : public AcquisitionProblem {
 public:
  PpcaLogisticProblem(PpcaTask task, std::size_t pool_size, std::size_t test_size, std::uint64_t seed)
      : task_(std::move(task)) {
    Rng rng(derive_seed(seed, 0x9001));
    pool_ = gen_ppca_logistic(task_, pool_size, rng);
    test_ = gen_ppca_logistic(task_, test_size, rng);
    // One labelled point per class, the first of each in pool order.
    for (std::size_t i = 0; i < pool_.size() && (first_pos_ == npos || first_neg_ == npos); ++i) {
      if (pool_[i].y == 1.0 && first_pos_ == npos) first_pos_ = i;
      if (pool_[i].y == 0.0 && first_neg_ == npos) first_neg_ = i;
    }
    require(first_pos_ != npos && first_neg_ != npos, "ppca problem: pool lacks one of the two classes");
  }

  const ExponentialFamily& family() const override { return bernoulli(); }
  Dataset initial_labeled(Rng&) const override { return {pool_[first_pos_], pool_[first_neg_]}; }
  bool fixed_pool() const override { return true; }
  std::vector<Candidate> pool(int, Rng&) const override {
    std::vector<Candidate> out;
    out.reserve(pool_.size() - 2);
    for (std::size_t i = 0; i < pool_.size(); ++i)
      if (i != first_pos_ && i != first_neg_) out.push_back({pool_[i].x, i});
    return out;
  }
  double observe(const Candidate& c, Rng&) const override { return pool_.at(c.id).y; }
  MetricValue evaluate(const FittedModel& model, const RecommendedDesign*) const override {
    std::size_t hits = 0;
    for (const auto& ex : test_) hits += ((model.eta(ex.x) > 0.0) == (ex.y == 1.0)) ? 1 : 0;
    return {"test_accuracy", static_cast<double>(hits) / static_cast<double>(test_.size()), std::nullopt};
  }
  std::optional<Vector> true_params() const override { return task_.theta_true; }

  const Dataset& test_set() const { return test_; }
  const Dataset& pool_set() const { return pool_; }
  const PpcaTask& task() const { return task_; }

 private:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  PpcaTask task_;
  Dataset pool_, test_;
  std::size_t first_pos_ = npos, first_neg_ = npos;
};

/// Noisy black-box minimization; the pool is redrawn every step as rotated
/// Halton points and the metric is immediate regret of the recommendation.
class NoisyOptProblem final : public AcquisitionProblem {
 public:
  NoisyOptProblem(NoisyObjective obj, std::size_t n_initial, std::size_t pool_size)
      : obj_(std::move(obj)), n_initial_(n_initial), pool_size_(pool_size) {}

  const ExponentialFamily& family() const override { return gaussian(); }
  const NoisyObjective& objective() const { return obj_; }
  std::size_t pool_size() const { return pool_size_; }

  /// Uniform initial design; `rng` is the run's design stream, so runs that
  /// share a seed share their initial observations.
  Dataset initial_labeled(Rng& rng) const override {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Dataset out;
    for (std::size_t i = 0; i < n_initial_; ++i) {
      Vector z(static_cast<Eigen::Index>(obj_.dim()));
      for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = u(rng);
      Vector x = obj_.box.from_unit(z);
      const double y = goimda::observe(obj_, x, rng);
      out.push_back({std::move(x), y});
    }
    return out;
  }
  bool fixed_pool() const override { return false; }
  std::vector<Candidate> pool(int, Rng& rng) const override {
    const auto pts = halton_in_box(obj_.box, pool_size_, &rng);
    std::vector<Candidate> out;
    out.reserve(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) out.push_back({pts[i], i});
    return out;
  }
  double observe(const Candidate& c, Rng& rng) const override { return goimda::observe(obj_, c.x, rng); }
  MetricValue evaluate(const FittedModel&, const RecommendedDesign* design) const override {
    require(design != nullptr, "noisy opt: evaluation needs the recommended design");
    return {"immediate_regret", regret_at(design->x_star), design->x_star};
  }
  bool needs_design() const override { return true; }
  const Box* search_box() const override { return &obj_.box; }

  /// f(x) - f*, clamped at zero (f* is exact, so only rounding goes below).
  double regret_at(const Vector& x) const { return std::max(0.0, obj_.f(x) - obj_.optimum_value); }

 private:
  NoisyObjective obj_;
  std::size_t n_initial_;
  std::size_t pool_size_;
};

/// Two-dimensional binary toy task for the active-learning instantiation:
/// labels from a fixed nonlinear logit, fixed pool, held-out accuracy.
class ToyClassificationProblem final : public AcquisitionProblem {
 public:
  ToyClassificationProblem(std::size_t pool_size, std::size_t test_size, std::size_t n_initial, std::uint64_t seed)
      : n_initial_(n_initial) {
    Rng rng(derive_seed(seed, 0x70f));
    pool_ = generate(pool_size, rng);
    test_ = generate(test_size, rng);
    require(pool_.size() > n_initial_, "toy problem: pool smaller than the initial design");
  }

  /// eta_0(x) = 4 (x2 - 0.8 sin(2 x1)) on [-2, 2]^2.
  static double true_eta(const Vector& x) { return 4.0 * (x[1] - 0.8 * std::sin(2.0 * x[0])); }

  const ExponentialFamily& family() const override { return bernoulli(); }
  Dataset initial_labeled(Rng&) const override { return Dataset(pool_.begin(), pool_.begin() + n_initial_); }
  bool fixed_pool() const override { return true; }
  std::vector<Candidate> pool(int, Rng&) const override {
    std::vector<Candidate> out;
    for (std::size_t i = n_initial_; i < pool_.size(); ++i) out.push_back({pool_[i].x, i});
    return out;
  }
  double observe(const Candidate& c, Rng&) const override { return pool_.at(c.id).y; }
  MetricValue evaluate(const FittedModel& model, const RecommendedDesign*) const override {
    std::size_t hits = 0;
    for (const auto& ex : test_) hits += ((model.eta(ex.x) > 0.0) == (ex.y == 1.0)) ? 1 : 0;
    return {"test_accuracy", static_cast<double>(hits) / static_cast<double>(test_.size()), std::nullopt};
  }
  const Dataset& test_set() const { return test_; }

 private:
  static Dataset generate(std::size_t n, Rng& rng) {
    std::uniform_real_distribution<double> u(-2.0, 2.0), v(0.0, 1.0);
    Dataset out;
    for (std::size_t i = 0; i < n; ++i) {
      Vector x(2);
      x << u(rng), u(rng);
      const double p = bernoulli().mean(true_eta(x));
      out.push_back({x, v(rng) < p ? 1.0 : 0.0});
    }
    return out;
  }

  std::size_t n_initial_;
  Dataset pool_, test_;
};

}  // namespace goimda

#endif  // GOIMDA_PROBLEMS_HPP
