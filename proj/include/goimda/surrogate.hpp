#ifndef GOIMDA_SURROGATE_HPP
#define GOIMDA_SURROGATE_HPP

#include <algorithm>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "goimda/core.hpp"
#include "goimda/expfam.hpp"
#include "goimda/models.hpp"

namespace goimda {

/// Stand-in for the unknown data-generating distribution p_0(y | x).
class LabelSurrogate {
 public:
  virtual ~LabelSurrogate() = default;
  virtual const ExponentialFamily& family() const = 0;
  /// Estimate of A'(eta_0(x)).
  virtual double mean(const Vector& x) const = 0;
  /// Estimate of eta_0(x) and its input gradient.
  virtual double eta(const Vector& x) const = 0;
  virtual Vector eta_grad_x(const Vector& x) const = 0;
};

/// A single fitted model used as its own surrogate.
class ModelSurrogate final : public LabelSurrogate {
 public:
  explicit ModelSurrogate(FittedModel m) : m_(std::move(m)) {}
  const ExponentialFamily& family() const override { return m_.fam(); }
  double mean(const Vector& x) const override { return m_.mean(x); }
  double eta(const Vector& x) const override { return m_.eta(x); }
  Vector eta_grad_x(const Vector& x) const override { return m_.eta_grad_x(x); }
  const FittedModel& model() const { return m_; }

 private:
  FittedModel m_;
};

struct EnsembleMember {
  FittedModel model;
  std::vector<std::size_t> held_out;  // indices of the left-out fold
  std::vector<std::size_t> trained_on;
  std::uint64_t seed = 0;
  bool excluded = false;
  std::string note;
};

/// r models, member i trained on the data with fold i left out.
class JackknifeEnsemble final : public LabelSurrogate {
 public:
  JackknifeEnsemble(std::vector<EnsembleMember> members, bool params_comparable)
      : members_(std::move(members)), comparable_(params_comparable) {
    for (const auto& m : members_)
      if (!m.excluded) active_.push_back(&m - members_.data());
    if (active_.size() < 2) throw NumericError("jackknife ensemble: fewer than two members trained successfully");
  }
  JackknifeEnsemble(const JackknifeEnsemble& o) : JackknifeEnsemble(o.members_, o.comparable_) {}
  JackknifeEnsemble& operator=(const JackknifeEnsemble& o) {
    members_ = o.members_;
    comparable_ = o.comparable_;
    active_ = o.active_;
    return *this;
  }

  std::size_t r() const { return members_.size(); }
  std::size_t active_count() const { return active_.size(); }
  const std::vector<EnsembleMember>& members() const { return members_; }
  bool params_comparable() const { return comparable_; }

  const ExponentialFamily& family() const override { return members_[active_.front()].model.fam(); }

  double mean(const Vector& x) const override {
    double s = 0.0;
    for (auto i : active_) s += members_[i].model.mean(x);
    return s / static_cast<double>(active_.size());
  }
  double eta(const Vector& x) const override {
    double s = 0.0;
    for (auto i : active_) s += members_[i].model.eta(x);
    return s / static_cast<double>(active_.size());
  }
  Vector eta_grad_x(const Vector& x) const override {
    Vector g = Vector::Zero(x.size());
    for (auto i : active_) g += members_[i].model.eta_grad_x(x);
    return g / static_cast<double>(active_.size());
  }

  /// Mean of the active members' parameter vectors.
  Vector mean_params() const {
    require(comparable_, "jackknife ensemble: member parameters are not comparable (independent initializations)");
    Vector s = Vector::Zero(members_[active_.front()].model.params().size());
    for (auto i : active_) s += members_[i].model.params();
    return s / static_cast<double>(active_.size());
  }

 private:
  std::vector<EnsembleMember> members_;
  bool comparable_;
  std::vector<std::size_t> active_;
};

/// Leave-fold-out resampling: one shuffle with `seed`, r folds whose sizes
/// differ by at most one. Members get seeds derived from `seed` unless
/// `shared_init` is set, in which case all share one initialization seed.
inline JackknifeEnsemble train_ensemble(const Dataset& data, std::size_t r, const ModelTrainer& trainer,
                                        std::uint64_t seed, const FittedModel* warm = nullptr,
                                        bool shared_init = false) {
  require(r >= 2, "train_ensemble: need at least two members");
  require(data.size() >= r, "train_ensemble: fewer examples than members");
  std::vector<std::size_t> perm(data.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x6a6b));
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<EnsembleMember> members(r);
  const std::size_t base = data.size() / r, extra = data.size() % r;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t len = base + (i < extra ? 1 : 0);
    members[i].held_out.assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                               perm.begin() + static_cast<std::ptrdiff_t>(pos + len));
    std::sort(members[i].held_out.begin(), members[i].held_out.end());
    pos += len;
  }
  for (std::size_t i = 0; i < r; ++i) {
    auto& m = members[i];
    Dataset subset;
    for (std::size_t k = 0; k < data.size(); ++k)
      if (!std::binary_search(m.held_out.begin(), m.held_out.end(), k)) {
        subset.push_back(data[k]);
        m.trained_on.push_back(k);
      }
    m.seed = shared_init ? derive_seed(seed, 0x5eed) : derive_seed(seed, 0x5eed, i + 1);
    try {
      FitResult fr = trainer.fit(subset, m.seed, warm);
      m.model = std::move(fr.model);
      if (!fr.report.converged) m.note = fr.report.message;
    } catch (const Error& e) {
      m.excluded = true;
      m.note = e.what();
    }
  }
  return JackknifeEnsemble(std::move(members), trainer.seed_independent() || shared_init);
}

inline double surrogate_mean(const LabelSurrogate& s, const Vector& x) { return s.mean(x); }

/// theta minus the average member parameters.
inline Vector bias_estimate(const JackknifeEnsemble& ens, const ParameterVector& main_params) {
  const Vector avg = ens.mean_params();
  require(avg.size() == main_params.values().size(), "bias_estimate: architecture mismatch with main model");
  for (const auto& m : ens.members())
    if (!m.excluded) require(m.model.theta.same_layout(main_params), "bias_estimate: parameter layout mismatch");
  return main_params.values() - avg;
}

/// E_{y ~ p_surrogate(.|x)} f(y). Binary families use the exact two-point
/// expectation; others average `n_draws` samples at the surrogate's eta.
inline double expected_over_labels(const LabelSurrogate& s, const Vector& x, const std::function<double(double)>& f,
                                   std::size_t n_draws, Rng& rng) {
  require(n_draws >= 1, "expected_over_labels: need at least one draw");
  const auto& fam = s.family();
  if (fam.is_binary()) {
    const double p = s.mean(x);
    return p * f(1.0) + (1.0 - p) * f(0.0);
  }
  const double eta = s.eta(x);
  double total = 0.0;
  for (std::size_t i = 0; i < n_draws; ++i) total += f(fam.sample(eta, rng));
  return total / static_cast<double>(n_draws);
}

}  // namespace goimda

#endif  // GOIMDA_SURROGATE_HPP
