#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "goimda/harness/runner.hpp"
#include "support.hpp"

namespace goimda::harness {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("goimda_test_" + name);
  fs::remove_all(p);
  return p;
}

TEST(Stats, QuantileType7) {
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4}, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(quantile({3, 1, 2}, 0.5), 2.0);
  EXPECT_DOUBLE_EQ(quantile({5}, 0.9), 5.0);
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4, 10}, 0.9), 7.6);
  EXPECT_DOUBLE_EQ(quantile({1, 2, kCensored}, 0.5), 2.0);
  EXPECT_EQ(quantile({1, 2, kCensored}, 0.75), kCensored);
  EXPECT_THROW(quantile({}, 0.5), ContractError);
  EXPECT_THROW(quantile({1.0}, 1.5), ContractError);
}

TEST(Stats, BootstrapIdenticalValuesGiveZeroWidth) {
  Rng rng(1);
  const auto [lo, hi] = bootstrap_ci({2.5, 2.5, 2.5, 2.5}, 500, 0.95, rng);
  EXPECT_EQ(lo, 2.5);
  EXPECT_EQ(hi, 2.5);
  EXPECT_THROW(bootstrap_ci({1.0}, 500, 0.95, rng), ContractError);
  EXPECT_THROW(bootstrap_ci({1.0, 2.0}, 50, 0.95, rng), ContractError);
}

TEST(Stats, BootstrapCoverage) {
  // Percentile bootstrap of a normal mean with n=30 covers close to nominal.
  Rng rng(2);
  std::normal_distribution<double> nd(1.0, 2.0);
  int covered = 0;
  const int trials = 400;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> v(30);
    for (auto& x : v) x = nd(rng);
    const auto [lo, hi] = bootstrap_ci(v, 1000, 0.95, rng);
    covered += (lo <= 1.0 && 1.0 <= hi) ? 1 : 0;
  }
  const double rate = static_cast<double>(covered) / trials;
  EXPECT_GT(rate, 0.89);
  EXPECT_LT(rate, 0.99);
}

AcquisitionHistory accuracy_history(std::initializer_list<double> acc) {
  AcquisitionHistory h;
  int step = 0;
  for (double a : acc) {
    StepRecord r;
    r.step = step++;
    r.metric = a;
    h.records.push_back(r);
  }
  return h;
}

TEST(Stats, LabelsToAccuracy) {
  const auto a = accuracy_history({0.5, 0.85, 0.8, 0.92});
  EXPECT_EQ(labels_to_threshold(a, 0.8), 1);
  EXPECT_EQ(labels_to_threshold(a, 0.9), 3);
  EXPECT_FALSE(labels_to_threshold(a, 0.95).has_value());
  const auto b = accuracy_history({0.9, 0.95});
  const auto rows = labels_to_accuracy({a, b, accuracy_history({0.1})}, {0.9});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].censored, 1u);
  EXPECT_EQ(rows[0].n, 3u);
  EXPECT_DOUBLE_EQ(rows[0].q25, 1.5);
  EXPECT_DOUBLE_EQ(rows[0].q50, 3.0);
  EXPECT_EQ(rows[0].q75, kCensored);
}

TEST(Stats, ComputeRegret) {
  const auto obj = make_objective("dropwave", 0.1);
  AcquisitionHistory h;
  StepRecord r0;
  r0.recommended_x = Vector::Zero(2);
  StepRecord r1;
  r1.recommended_x = testing::vec({0.5, 0.5});
  h.records = {r0, r1, StepRecord{}};
  const auto reg = compute_regret(h, obj);
  EXPECT_EQ(reg[0], 0.0);
  EXPECT_NEAR(reg[1], dropwave(testing::vec({0.5, 0.5})) + 1.0, 1e-15);
  EXPECT_TRUE(std::isnan(reg[2]));
  // a constant-mean fallback point on Branin
  const auto br = make_objective("branin", 0.1);
  AcquisitionHistory hb;
  StepRecord rb;
  rb.recommended_x = testing::vec({0.5, 0.5});
  hb.records = {rb};
  EXPECT_NEAR(compute_regret(hb, br)[0], -0.590568538717569559 + 1.047393891092786557, 1e-12);
}

json tiny_toy() {
  return {{"schema_version", 1},
          {"experiment", "al_toy"},
          {"budget", 4},
          {"replications", 2},
          {"base_seed", 5},
          {"ensemble_size", 3},
          {"n_boot", 200},
          {"al_toy", {{"pool_size", 80}, {"test_size", 100}, {"n_initial", 10}, {"model", "rbf"}, {"rbf_grid", 3}}}};
}

json tiny_noisy() {
  return {{"schema_version", 1},
          {"experiment", "noisy_opt"},
          {"methods", {"goimda", "ei", "random"}},
          {"budget", 3},
          {"replications", 2},
          {"seeds", {11, 12}},
          {"ensemble_size", 3},
          {"n_boot", 200},
          {"gp", {{"recommend_grid", 64}}},
          {"noisy_opt", {{"pool_size", 128}, {"rbf_grid", 4}}}};
}

TEST(Config, ParseDefaultsAndSeeds) {
  const auto c = parse_config(tiny_toy());
  EXPECT_EQ(c.methods, methods_for("al_toy"));
  ASSERT_EQ(c.seeds.size(), 2u);
  EXPECT_EQ(c.seeds[0], derive_seed(5, 0xbe5e, 0));
  EXPECT_EQ(c.al_toy.rbf_grid, 3u);
  EXPECT_EQ(c.al_toy.max_epochs, ToySection{}.max_epochs);
  EXPECT_EQ(parse_config(tiny_noisy()).seeds, (std::vector<std::uint64_t>{11, 12}));
}

TEST(Config, RoundTrip) {
  for (const auto& j : {tiny_toy(), tiny_noisy()}) {
    const auto c = parse_config(j);
    EXPECT_EQ(parse_config(to_json(c)), c);
  }
}

TEST(Config, Rejections) {
  auto bad = [](auto edit) {
    json j = tiny_toy();
    edit(j);
    return j;
  };
  EXPECT_THROW(parse_config(bad([](json& j) { j.erase("schema_version"); })), ConfigError);
  EXPECT_THROW(parse_config(bad([](json& j) { j.erase("experiment"); })), ConfigError);
  EXPECT_THROW(parse_config(bad([](json& j) { j["experiment"] = "mnist"; })), ConfigError);
  EXPECT_THROW(parse_config(bad([](json& j) { j["budgett"] = 3; })), ConfigError);
  EXPECT_THROW(parse_config(bad([](json& j) { j["al_toy"]["width"] = 3; })), ConfigError);
  EXPECT_THROW(parse_config(bad([](json& j) { j["budget"] = "many"; })), ConfigError);
  EXPECT_THROW(parse_config(bad([](json& j) { j["seeds"] = {1}; })), ConfigError);
  EXPECT_THROW(parse_config(bad([](json& j) {
                 j.erase("base_seed");
                 j["seeds"] = {1};
               })),
               ConfigError);
  EXPECT_THROW(parse_config(bad([](json& j) { j["methods"] = {"ei"}; })), ConfigError);
  EXPECT_THROW(parse_config(bad([](json& j) { j["goal"] = {{"kind", "mse"}}; })), ConfigError);
  EXPECT_THROW(parse_config(bad([](json& j) { j["ihvp"] = {{"method", "newton"}}; })), ConfigError);
  EXPECT_THROW(parse_config(bad([](json& j) { j["workers"] = 0; })), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Runner, ToyArtifactsAreDeterministic) {
  auto cfg = parse_config(tiny_toy());
  const auto a = scratch_dir("toy_a"), b = scratch_dir("toy_b");
  write_artifacts(a, cfg, run_experiment(cfg));
  cfg.workers = 2;
  write_artifacts(b, cfg, run_experiment(cfg));
  for (const char* f : {"history.csv", "steps.csv", "summary.csv", "quantiles.csv"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  const std::string hist = slurp(a / "history.csv");
  EXPECT_EQ(hist.rfind("experiment,method,replication,step,metric_name,value,seed\n", 0), 0u);
  // 2 methods x 2 replications x 5 steps
  EXPECT_EQ(std::count(hist.begin(), hist.end(), '\n'), 1 + 2 * 2 * 5);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Runner, NoisyArtifactsAndManifest) {
  const auto cfg = parse_config(tiny_noisy());
  const auto res = run_experiment(cfg);
  EXPECT_EQ(res.failures, 0u);
  const auto dir = scratch_dir("noisy");
  write_artifacts(dir, cfg, res);
  EXPECT_FALSE(fs::exists(dir / "quantiles.csv"));
  const json m = json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(parse_config(m.at("config")), cfg);
  EXPECT_EQ(m.at("runs").size(), 6u);
  EXPECT_EQ(m.at("library_version"), kLibraryVersion);
  for (const auto& run : res.runs) {
    for (const auto& r : run.history.records) {
      EXPECT_EQ(r.metric_name, "immediate_regret");
      EXPECT_GE(r.metric, 0.0);
    }
  }
  const auto again = run_experiment(cfg);
  std::ostringstream x, y;
  write_history_csv(x, cfg, res);
  write_history_csv(y, cfg, again);
  EXPECT_EQ(x.str(), y.str());
  fs::remove_all(dir);
}

TEST(Runner, SummaryStatistics) {
  const auto cfg = parse_config(tiny_toy());
  const auto res = run_experiment(cfg);
  ASSERT_EQ(res.series.size(), 2u);
  for (const auto& s : res.series) {
    EXPECT_EQ(s.metric_name, "test_accuracy");
    for (const auto& st : s.steps) {
      EXPECT_EQ(st.n, 2u);
      EXPECT_LE(st.ci_lo, st.mean + 1e-12);
      EXPECT_GE(st.ci_hi, st.mean - 1e-12);
      EXPECT_LE(st.q25, st.median);
      EXPECT_LE(st.median, st.q75);
    }
  }
}

TEST(Runner, FormattingHelpers) {
  EXPECT_EQ(fmt_num(0.1), "0.1");
  EXPECT_EQ(fmt_num(kNaN), "nan");
  EXPECT_EQ(fmt_num(-kCensored), "-inf");
  EXPECT_EQ(fmt_vec(testing::vec({1.5, -2})), "1.5 -2");
  EXPECT_EQ(fmt_vec(std::nullopt), "");
  EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
}

}  // namespace
}  // namespace goimda::harness
