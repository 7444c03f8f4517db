#ifndef GOIMDA_HARNESS_RUNNER_HPP
#define GOIMDA_HARNESS_RUNNER_HPP

#include <atomic>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "goimda/acquisition.hpp"
#include "goimda/benchfuncs.hpp"
#include "goimda/glm.hpp"
#include "goimda/gp.hpp"
#include "goimda/harness/config.hpp"
#include "goimda/harness/stats.hpp"
#include "goimda/lowdisc.hpp"
#include "goimda/mlp.hpp"
#include "goimda/problems.hpp"

namespace goimda::harness {

/// Shortest round-trip decimal; "nan" and "inf" for the non-finite cases.
inline std::string fmt_num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Space-separated coordinates; empty when absent.
inline std::string fmt_vec(const std::optional<Vector>& v) {
  if (!v) return "";
  std::string out;
  for (Eigen::Index i = 0; i < v->size(); ++i) {
    if (i > 0) out += ' ';
    out += fmt_num((*v)[i]);
  }
  return out;
}

struct RunRecord {
  std::string method;
  int replication = 0;
  std::uint64_t seed = 0;
  AcquisitionHistory history;
};

/// Per-step summary of one method's metric across replications.
struct MetricSummary {
  int step = 0;
  std::size_t n = 0;
  double mean = kNaN, ci_lo = kNaN, ci_hi = kNaN, q25 = kNaN, median = kNaN, q75 = kNaN;
};

struct MetricSeries {
  std::string method;
  std::string metric_name;
  std::vector<std::vector<double>> values;  // [replication][step]
  std::vector<MetricSummary> steps;
};

struct ExperimentResult {
  std::vector<RunRecord> runs;  // method-major, then replication
  std::vector<MetricSeries> series;
  std::size_t failures = 0;

  std::vector<AcquisitionHistory> histories(const std::string& method) const {
    std::vector<AcquisitionHistory> out;
    for (const auto& r : runs)
      if (r.method == method) out.push_back(r.history);
    return out;
  }
};

// ---------------------------------------------------------------------------
// Method construction

namespace detail {

inline Matrix rbf_centres(const Box& box, std::size_t per_axis) {
  const std::size_t d = box.dim();
  std::vector<Vector> pts;
  if (d <= 2) {
    const std::size_t total = d == 1 ? per_axis : per_axis * per_axis;
    for (std::size_t k = 0; k < total; ++k) {
      Vector z(static_cast<Eigen::Index>(d));
      std::size_t rem = k;
      for (std::size_t a = 0; a < d; ++a) {
        z[static_cast<Eigen::Index>(a)] =
            per_axis == 1 ? 0.5 : static_cast<double>(rem % per_axis) / static_cast<double>(per_axis - 1);
        rem /= per_axis;
      }
      pts.push_back(box.from_unit(z));
    }
  } else {
    pts = halton_in_box(box, per_axis * per_axis);
  }
  Matrix c(static_cast<Eigen::Index>(pts.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < pts.size(); ++i) c.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  return c;
}

inline TrainerPtr rbf_trainer(const Box& box, std::size_t per_axis, double unit_lengthscale,
                              const ExponentialFamily& fam, double ridge) {
  const double ls = unit_lengthscale * box.diameter() / std::sqrt(static_cast<double>(box.dim()));
  auto features = std::make_shared<RbfFeatures>(rbf_centres(box, per_axis), ls);
  return std::make_shared<GlmTrainer>(std::make_shared<GlmStructure>(features), fam, ridge);
}

inline std::vector<Vector> inputs_of(const Dataset& d) {
  std::vector<Vector> out;
  out.reserve(d.size());
  for (const auto& e : d) out.push_back(e.x);
  return out;
}

inline GoalObjective target_goal(const GoalSection& g, std::vector<Vector> targets) {
  GoalObjective goal;
  goal.kind = goal_kind_from_string(g.kind);
  goal.sense = goal_sense_from_string(g.sense);
  goal.focal_gamma = g.focal_gamma;
  goal.targets = std::move(targets);
  return goal;
}

inline AcquisitionHistory run_logistic(const ExperimentConfig& cfg, const std::string& method, std::uint64_t seed) {
  const auto& s = cfg.logistic;
  const auto task = make_ppca_task(s.d, s.l, s.noise_sd, derive_seed(seed, 0x7a5c), s.margin_sd);
  const PpcaLogisticProblem problem(task, s.pool_size, s.test_size, seed);
  const GoalObjective goal = target_goal(cfg.goal, inputs_of(problem.test_set()));
  AcquisitionConfig ac;
  ac.trainer = std::make_shared<GlmTrainer>(linear_glm(s.d), bernoulli(), s.ridge);
  ac.ensemble_size = cfg.ensemble_size;
  ac.ihvp = cfg.ihvp.to_config();
  if (method == "random")
    ac.random = true;
  else if (method == "true_bias")
    ac.bias = BiasSource::TrueParams;
  else if (method == "jackknife")
    ac.bias = BiasSource::JackknifeParams;
  else
    ac.bias = BiasSource::Ones;
  return run_loop(problem, goal, cfg.budget, ac, seed);
}

inline AcquisitionHistory run_noisy(const ExperimentConfig& cfg, const std::string& method, std::uint64_t seed) {
  const auto& s = cfg.noisy_opt;
  const NoisyOptProblem problem(make_objective(s.objective, s.noise_sd), s.n_initial, s.pool_size);
  if (method != "goimda") {
    GpConfig gc;
    gc.ucb_beta = cfg.gp.ucb_beta;
    gc.recommend_grid = cfg.gp.recommend_grid;
    return bo_loop(problem, baseline_from_string(method), cfg.budget, gc, seed);
  }
  const Box& box = problem.objective().box;
  GoalObjective goal;
  goal.kind = GoalKind::OptValue;
  goal.sense = GoalSense::Minimize;
  goal.box = box;
  AcquisitionConfig ac;
  ac.trainer = rbf_trainer(box, s.rbf_grid, s.rbf_lengthscale, gaussian(), s.ridge);
  ac.ensemble_size = cfg.ensemble_size;
  ac.ihvp = cfg.ihvp.to_config();
  ac.bias = BiasSource::Surrogate;
  return run_loop(problem, goal, cfg.budget, ac, seed);
}

inline AcquisitionHistory run_toy(const ExperimentConfig& cfg, const std::string& method, std::uint64_t seed) {
  const auto& s = cfg.al_toy;
  const ToyClassificationProblem problem(s.pool_size, s.test_size, s.n_initial, seed);
  const GoalObjective goal = target_goal(cfg.goal, inputs_of(problem.test_set()));
  AcquisitionConfig ac;
  if (s.model == "mlp") {
    MlpTrainConfig mc;
    mc.hidden = s.hidden;
    mc.ridge = s.ridge;
    mc.max_epochs = s.max_epochs;
    ac.trainer = std::make_shared<MlpTrainer>(2, bernoulli(), mc);
  } else {
    ac.trainer = rbf_trainer(Box::cube(2, -2.0, 2.0), s.rbf_grid, s.rbf_lengthscale, bernoulli(), s.ridge);
  }
  ac.ensemble_size = cfg.ensemble_size;
  ac.ihvp = cfg.ihvp.to_config();
  ac.random = method == "random";
  return run_loop(problem, goal, cfg.budget, ac, seed);
}

inline AcquisitionHistory run_one(const ExperimentConfig& cfg, const std::string& method, std::uint64_t seed) {
  try {
    if (cfg.experiment == "logistic_bias") return run_logistic(cfg, method, seed);
    if (cfg.experiment == "noisy_opt") return run_noisy(cfg, method, seed);
    return run_toy(cfg, method, seed);
  } catch (const std::exception& e) {
    AcquisitionHistory h;
    h.status = "error";
    h.error = e.what();
    return h;
  }
}

inline MetricSeries summarize(const ExperimentConfig& cfg, const std::string& method,
                              const std::vector<const RunRecord*>& runs, std::size_t method_index) {
  MetricSeries ms;
  ms.method = method;
  std::size_t steps = 0;
  for (const auto* r : runs) {
    ms.values.push_back(r->history.metric_series());
    steps = std::max(steps, ms.values.back().size());
    if (ms.metric_name.empty() && !r->history.records.empty()) ms.metric_name = r->history.records.front().metric_name;
  }
  for (std::size_t k = 0; k < steps; ++k) {
    MetricSummary sm;
    sm.step = static_cast<int>(k);
    std::vector<double> vals;
    for (const auto& v : ms.values)
      if (k < v.size() && std::isfinite(v[k])) vals.push_back(v[k]);
    sm.n = vals.size();
    if (!vals.empty()) {
      double sum = 0.0;
      for (double x : vals) sum += x;
      sm.mean = sum / static_cast<double>(vals.size());
      sm.q25 = quantile(vals, 0.25);
      sm.median = quantile(vals, 0.5);
      sm.q75 = quantile(vals, 0.75);
      if (vals.size() >= 2) {
        Rng rng(derive_seed(0xb007, method_index, k));
        std::tie(sm.ci_lo, sm.ci_hi) = bootstrap_ci(vals, cfg.n_boot, 0.95, rng);
      } else {
        sm.ci_lo = sm.ci_hi = sm.mean;
      }
    }
    ms.steps.push_back(sm);
  }
  return ms;
}

}  // namespace detail

/// Runs every (method, replication) pair on up to cfg.workers threads.
/// Failed runs keep their partial history and are counted in `failures`.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult res;
  for (const auto& m : cfg.methods)
    for (int r = 0; r < cfg.replications; ++r)
      res.runs.push_back({m, r, cfg.seeds[static_cast<std::size_t>(r)], {}});

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < res.runs.size(); i = next++) {
      auto& run = res.runs[i];
      run.history = detail::run_one(cfg, run.method, run.seed);
    }
  };
  const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), res.runs.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (const auto& r : res.runs)
    if (r.history.status == "error") ++res.failures;
  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    std::vector<const RunRecord*> runs;
    for (const auto& r : res.runs)
      if (r.method == cfg.methods[mi]) runs.push_back(&r);
    res.series.push_back(detail::summarize(cfg, cfg.methods[mi], runs, mi));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Artifacts

/// Relative output directories are resolved against GOIMDA_OUTPUT_ROOT when set.
inline std::filesystem::path resolve_output_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  if (p.is_relative()) {
    if (const char* root = std::getenv("GOIMDA_OUTPUT_ROOT"); root != nullptr && *root != '\0')
      return std::filesystem::path(root) / p;
  }
  return p;
}

inline void write_history_csv(std::ostream& os, const ExperimentConfig& cfg, const ExperimentResult& res) {
  os << "experiment,method,replication,step,metric_name,value,seed\n";
  for (const auto& r : res.runs)
    for (const auto& rec : r.history.records)
      os << cfg.experiment << ',' << r.method << ',' << r.replication << ',' << rec.step << ',' << rec.metric_name
         << ',' << fmt_num(rec.metric) << ',' << r.seed << '\n';
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline void write_steps_csv(std::ostream& os, const ExperimentConfig& cfg, const ExperimentResult& res) {
  os << "experiment,method,replication,step,score,goal_value,observed_y,solver,solver_iterations,solver_residual,"
        "damping,chosen_x,recommended_x,note\n";
  for (const auto& r : res.runs)
    for (const auto& rec : r.history.records)
      os << cfg.experiment << ',' << r.method << ',' << r.replication << ',' << rec.step << ',' << fmt_num(rec.score)
         << ',' << fmt_num(rec.goal_value) << ',' << fmt_num(rec.observed_y) << ',' << rec.solver << ','
         << rec.solver_iterations << ',' << fmt_num(rec.solver_residual) << ',' << fmt_num(rec.damping) << ','
         << fmt_vec(rec.chosen_x) << ',' << fmt_vec(rec.recommended_x) << ',' << csv_escape(rec.note) << '\n';
}

inline void write_summary_csv(std::ostream& os, const ExperimentConfig& cfg, const ExperimentResult& res) {
  os << "experiment,method,step,metric_name,n,mean,ci_lo,ci_hi,q25,median,q75\n";
  for (const auto& s : res.series)
    for (const auto& st : s.steps)
      os << cfg.experiment << ',' << s.method << ',' << st.step << ',' << s.metric_name << ',' << st.n << ','
         << fmt_num(st.mean) << ',' << fmt_num(st.ci_lo) << ',' << fmt_num(st.ci_hi) << ',' << fmt_num(st.q25) << ','
         << fmt_num(st.median) << ',' << fmt_num(st.q75) << '\n';
}

inline void write_quantiles_csv(std::ostream& os, const ExperimentConfig& cfg, const ExperimentResult& res) {
  os << "experiment,method,threshold,q25,median,q75,censored,n\n";
  for (const auto& m : cfg.methods)
    for (const auto& row : labels_to_accuracy(res.histories(m), cfg.thresholds))
      os << cfg.experiment << ',' << m << ',' << fmt_num(row.threshold) << ',' << fmt_num(row.q25) << ','
         << fmt_num(row.q50) << ',' << fmt_num(row.q75) << ',' << row.censored << ',' << row.n << '\n';
}

inline json manifest(const ExperimentConfig& cfg, const ExperimentResult& res) {
  json runs = json::array();
  for (const auto& r : res.runs)
    runs.push_back({{"method", r.method},
                    {"replication", r.replication},
                    {"seed", r.seed},
                    {"status", r.history.status},
                    {"error", r.history.error},
                    {"steps", r.history.records.size()}});
  return {{"library_version", kLibraryVersion}, {"config", to_json(cfg)}, {"failures", res.failures}, {"runs", runs}};
}

/// Mean curve per method, one polyline each. For quick inspection only.
inline void write_svg(std::ostream& os, const ExperimentResult& res) {
  const double w = 640, h = 400, pad = 40;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::size_t steps = 1;
  for (const auto& s : res.series) {
    steps = std::max(steps, s.steps.size());
    for (const auto& st : s.steps)
      if (std::isfinite(st.mean)) {
        lo = std::min(lo, st.mean);
        hi = std::max(hi, st.mean);
      }
  }
  if (!(hi > lo)) {
    lo = std::isfinite(lo) ? lo - 1.0 : 0.0;
    hi = lo + 2.0;
  }
  static const char* colours[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"};
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  os << "<rect x=\"" << pad << "\" y=\"" << pad << "\" width=\"" << w - 2 * pad << "\" height=\"" << h - 2 * pad
     << "\" fill=\"none\" stroke=\"#999\"/>\n";
  for (std::size_t i = 0; i < res.series.size(); ++i) {
    const auto& s = res.series[i];
    os << "<polyline fill=\"none\" stroke=\"" << colours[i % 6] << "\" points=\"";
    for (const auto& st : s.steps) {
      if (!std::isfinite(st.mean)) continue;
      const double px = pad + (w - 2 * pad) * st.step / std::max<double>(1.0, static_cast<double>(steps - 1));
      const double py = h - pad - (h - 2 * pad) * (st.mean - lo) / (hi - lo);
      os << fmt_num(px) << ',' << fmt_num(py) << ' ';
    }
    os << "\"/>\n<text x=\"" << pad + 10 << "\" y=\"" << pad + 15 * (i + 1) << "\" fill=\"" << colours[i % 6]
       << "\" font-size=\"12\">" << s.method << "</text>\n";
  }
  os << "</svg>\n";
}

/// Writes history.csv, steps.csv, summary.csv, quantiles.csv (accuracy
/// experiments), manifest.json and optionally curves.svg into `dir`.
inline void write_artifacts(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                            const ExperimentResult& res) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw Error("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("history.csv");
    write_history_csv(f, cfg, res);
  }
  {
    auto f = open("steps.csv");
    write_steps_csv(f, cfg, res);
  }
  {
    auto f = open("summary.csv");
    write_summary_csv(f, cfg, res);
  }
  if (cfg.experiment != "noisy_opt") {
    auto f = open("quantiles.csv");
    write_quantiles_csv(f, cfg, res);
  }
  {
    auto f = open("manifest.json");
    f << manifest(cfg, res).dump(2) << '\n';
  }
  if (cfg.write_svg) {
    auto f = open("curves.svg");
    write_svg(f, res);
  }
}

}  // namespace goimda::harness

#endif  // GOIMDA_HARNESS_RUNNER_HPP
