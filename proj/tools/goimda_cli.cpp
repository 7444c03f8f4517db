// goimda: run experiment configs and post-process their CSV output.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "goimda/goimda.hpp"
#include "goimda/harness/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPartial = 2;
constexpr int kExitConfig = 3;

using goimda::harness::fmt_num;

struct HistoryRow {
  std::string method;
  int replication = 0;
  int step = 0;
  std::string metric_name;
  double value = 0.0;
};

std::vector<HistoryRow> read_history(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw goimda::ConfigError("cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("experiment,method,replication,step,metric_name,value", 0) != 0)
    throw goimda::ConfigError(path + " is not a history.csv");
  std::vector<HistoryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() < 6) throw goimda::ConfigError("malformed row in " + path + ": " + line);
    rows.push_back({f[1], std::stoi(f[2]), std::stoi(f[3]), f[4], std::stod(f[5])});
  }
  return rows;
}

// method -> replication -> history, in order of first appearance.
std::vector<std::pair<std::string, std::map<int, goimda::AcquisitionHistory>>> group(
    const std::vector<HistoryRow>& rows) {
  std::vector<std::pair<std::string, std::map<int, goimda::AcquisitionHistory>>> out;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& p) { return p.first == r.method; });
    if (it == out.end()) {
      out.push_back({r.method, {}});
      it = std::prev(out.end());
    }
    goimda::StepRecord rec;
    rec.step = r.step;
    rec.metric_name = r.metric_name;
    rec.metric = r.value;
    it->second[r.replication].records.push_back(rec);
  }
  return out;
}

int cmd_run(const std::string& path, int workers, const std::string& out_dir) {
  goimda::harness::ExperimentConfig cfg;
  try {
    cfg = goimda::harness::load_config(path);
    if (workers > 0) cfg.workers = workers;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
  } catch (const goimda::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  const auto res = goimda::harness::run_experiment(cfg);
  const auto dir = goimda::harness::resolve_output_dir(cfg.output_dir);
  goimda::harness::write_artifacts(dir, cfg, res);
  for (const auto& r : res.runs)
    if (r.history.status == "error")
      std::cerr << r.method << " replication " << r.replication << " failed: " << r.history.error << '\n';
  std::cout << "wrote " << dir.string() << " (" << res.runs.size() << " runs, " << res.failures << " failed)\n";
  return res.failures > 0 ? kExitPartial : kExitOk;
}

int cmd_regret(const std::string& path) {
  const auto groups = group(read_history(path));
  std::cout << "method,step,n,mean,median\n";
  for (const auto& [method, reps] : groups) {
    std::map<int, std::vector<double>> by_step;
    for (const auto& [rep, h] : reps)
      for (const auto& rec : h.records)
        if (rec.metric_name == "immediate_regret") by_step[rec.step].push_back(rec.metric);
    for (const auto& [step, vals] : by_step) {
      double s = 0.0;
      for (double v : vals) s += v;
      std::cout << method << ',' << step << ',' << vals.size() << ',' << fmt_num(s / static_cast<double>(vals.size()))
                << ',' << fmt_num(goimda::harness::quantile(vals, 0.5)) << '\n';
    }
  }
  return kExitOk;
}

int cmd_quantiles(const std::string& path, const std::vector<double>& thresholds) {
  const auto groups = group(read_history(path));
  std::cout << "method,threshold,q25,median,q75,censored,n\n";
  for (const auto& [method, reps] : groups) {
    std::vector<goimda::AcquisitionHistory> hs;
    for (const auto& [rep, h] : reps) hs.push_back(h);
    for (const auto& row : goimda::harness::labels_to_accuracy(hs, thresholds))
      std::cout << method << ',' << fmt_num(row.threshold) << ',' << fmt_num(row.q25) << ',' << fmt_num(row.q50)
                << ',' << fmt_num(row.q75) << ',' << row.censored << ',' << row.n << '\n';
  }
  return kExitOk;
}

// Small oracle checks: derivatives against finite differences and dense
// algebra, solvers against a direct factorization, benchmark constants.
int cmd_selfcheck() {
  using namespace goimda;
  int failed = 0;
  auto report = [&](const char* name, bool ok, double err) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << " (err " << fmt_num(err) << ")\n";
    failed += ok ? 0 : 1;
  };

  Rng rng(7);
  const std::size_t d = 6;
  Dataset data;
  const Vector theta0 = standard_normal_vector(d, rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 80; ++i) {
    Vector x = standard_normal_vector(d, rng);
    data.push_back({x, u(rng) < bernoulli().mean(x.dot(theta0)) ? 1.0 : 0.0});
  }
  const NllLoss loss(linear_glm(d), bernoulli());
  const Vector theta = 0.5 * standard_normal_vector(d, rng);
  const Vector v = standard_normal_vector(d, rng);
  const DenseMatrix h = dense_hessian(loss, theta, data);
  const Vector hv = hvp(loss, theta, data, v);
  report("hvp vs dense hessian", (hv - h * v).norm() <= 1e-6 * (h * v).norm(), (hv - h * v).norm());

  const Vector g = batch_gradient(loss, theta, data);
  Vector fd(d);
  for (std::size_t k = 0; k < d; ++k) {
    Vector e = Vector::Zero(d);
    e[k] = 1e-6;
    fd[k] = (mean_loss(loss, theta + e, data) - mean_loss(loss, theta - e, data)) / 2e-6;
  }
  report("gradient vs finite differences", (g - fd).norm() <= 1e-4 * std::max(1.0, g.norm()), (g - fd).norm());

  const DenseMatrix hp = h + 0.1 * Matrix::Identity(d, d);
  const DenseHvpOracle oracle(hp);
  IhvpConfig ic;
  const Vector ref = direct_solve(hp, v, ic.damping);
  const Vector cg = solve_cg(oracle, v, ic).u;
  report("cg vs direct solve", (cg - ref).norm() <= 1e-6 * ref.norm(), (cg - ref).norm() / ref.norm());

  const double bmin = branin(branin_minimizers().front());
  report("branin minimum", std::abs(bmin + 1.0474) <= 5e-4, std::abs(bmin + 1.0474));
  report("dropwave origin", dropwave(Vector::Zero(2)) == -1.0, std::abs(dropwave(Vector::Zero(2)) + 1.0));
  report("ackley origin", std::abs(ackley(Vector::Zero(5))) <= 1e-12, std::abs(ackley(Vector::Zero(5))));

  std::cout << (failed == 0 ? "selfcheck passed\n" : "selfcheck failed\n");
  return failed == 0 ? kExitOk : kExitPartial;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"goal-oriented influence-maximizing data acquisition"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  int workers = 0;
  auto* run = app.add_subcommand("run", "run an experiment config and write CSV artifacts");
  run->add_option("config", config_path, "JSON experiment config")->required();
  run->add_option("--workers", workers, "override the config's worker count");
  run->add_option("--output", out_dir, "override the config's output directory");

  std::string history_path;
  auto* regret = app.add_subcommand("regret", "per-step immediate regret from a history.csv");
  regret->add_option("history", history_path, "history.csv")->required();

  std::string q_history, thresholds_arg = "0.8,0.9,0.95";
  auto* quant = app.add_subcommand("quantiles", "labels-to-accuracy quantiles from a history.csv");
  quant->add_option("history", q_history, "history.csv")->required();
  quant->add_option("--thresholds", thresholds_arg, "comma-separated accuracy thresholds");

  auto* self = app.add_subcommand("selfcheck", "run the built-in oracle checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config_path, workers, out_dir);
    if (*regret) return cmd_regret(history_path);
    if (*quant) {
      std::vector<double> th;
      std::stringstream ss(thresholds_arg);
      for (std::string t; std::getline(ss, t, ',');) th.push_back(std::stod(t));
      return cmd_quantiles(q_history, th);
    }
    if (*self) return cmd_selfcheck();
  } catch (const goimda::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitOk;
}
