#include <gtest/gtest.h>

#include "support.hpp"

namespace goimda {
namespace {

using testing::rel_err;

Matrix random_bowl_matrix(Rng& rng) {
  Matrix a = testing::random_spd(2, rng, 0.5);
  return 3.0 * a;
}

Vector interior_point(Rng& rng) {
  std::uniform_real_distribution<double> u(0.3, 0.7);
  return testing::vec({u(rng), u(rng)});
}

TEST(Goals, RecommendFindsInteriorMinimum) {
  Rng rng(1);
  const Box box = Box::cube(2, 0.0, 1.0);
  for (const auto* fam : {&gaussian(), &bernoulli()}) {
    const Vector c = interior_point(rng);
    const auto m = testing::bowl_model(c, random_bowl_matrix(rng), -0.5, *fam);
    const auto d = recommend_minimizer(m, box);
    EXPECT_TRUE(d.converged);
    EXPECT_FALSE(d.on_boundary());
    EXPECT_LE((d.x_star - c).norm(), 1e-7) << fam->name();
    EXPECT_NEAR(d.inner_value, fam->mean(-0.5), 1e-10);
  }
}

TEST(Goals, RecommendClampsToBoundary) {
  Rng rng(2);
  const Box box = Box::cube(2, 0.0, 1.0);
  const auto m = testing::bowl_model(testing::vec({1.4, 0.5}), Matrix::Identity(2, 2), 0.0, gaussian());
  const auto d = recommend_minimizer(m, box);
  EXPECT_TRUE(d.on_boundary());
  EXPECT_TRUE(d.at_bound[0]);
  EXPECT_FALSE(d.at_bound[1]);
  EXPECT_NEAR(d.x_star[0], 1.0, 1e-12);
  EXPECT_NEAR(d.x_star[1], 0.5, 1e-7);
  EXPECT_THROW(minimizer_jacobian(m, d), BoundaryError);
  const Matrix j = minimizer_jacobian_active_set(m, d);
  EXPECT_EQ(j.row(0).norm(), 0.0);
  // free coordinate: x1* = -theta2 / (2 theta5) when the cross term vanishes
  const Vector th = m.params();
  Vector expect = Vector::Zero(6);
  expect[2] = -1.0 / (2.0 * th[5]);
  expect[5] = th[2] / (2.0 * th[5] * th[5]);
  expect[4] = -1.0 / (2.0 * th[5]);  // d x1*/d theta4 at x0 = 1
  EXPECT_LE((j.row(1).transpose() - expect).norm(), 1e-6);
}

TEST(Goals, MinimizerJacobianMatchesAnalyticAndFiniteDifferences) {
  Rng rng(3);
  const Box box = Box::cube(2, 0.0, 1.0);
  for (int k = 0; k < 6; ++k) {
    const auto m = testing::bowl_model(interior_point(rng), random_bowl_matrix(rng), 0.1, k % 2 ? bernoulli() : gaussian());
    const auto d = recommend_minimizer(m, box);
    const Matrix j = minimizer_jacobian(m, d);
    Matrix fd(2, 6), analytic(2, 6);
    for (Eigen::Index p = 0; p < 6; ++p) {
      const double h = 1e-5;
      Vector tp = m.params(), tm = m.params();
      tp[p] += h;
      tm[p] -= h;
      fd.col(p) = (recommend_minimizer(m.with_params(tp), box).x_star - recommend_minimizer(m.with_params(tm), box).x_star) / (2 * h);
      analytic.col(p) = (testing::bowl_argmin(tp) - testing::bowl_argmin(tm)) / (2 * h);
    }
    EXPECT_LE((j - analytic).norm(), 1e-6 * analytic.norm());
    EXPECT_LE((j - fd).norm(), 1e-3 * fd.norm());
  }
}

TEST(Goals, RecommendContracts) {
  const auto m = testing::bowl_model(testing::vec({0.5, 0.5}), Matrix::Identity(2, 2), 0.0, gaussian());
  EXPECT_THROW(recommend_minimizer(m, Box::cube(3, 0.0, 1.0)), ContractError);
  RecommendConfig cfg;
  cfg.restarts = 0;
  EXPECT_THROW(recommend_minimizer(m, Box::cube(2, 0.0, 1.0), cfg), ContractError);
}

struct GoalCase {
  GoalKind kind;
  double gamma;
};

TEST(Goals, TargetGoalGradientsMatchFiniteDifferences) {
  Rng rng(4);
  const std::size_t d = 4;
  FittedModel model{linear_glm(d, true), &bernoulli(), ParameterVector(standard_normal_vector(d + 1, rng)), 0.0};
  const FittedModel other = model.with_params(standard_normal_vector(d + 1, rng));
  const ModelSurrogate surrogate(other);
  std::vector<Vector> targets;
  for (int i = 0; i < 12; ++i) targets.push_back(standard_normal_vector(d, rng));
  for (const auto gc : {GoalCase{GoalKind::NLL, 0}, GoalCase{GoalKind::Focal, 0}, GoalCase{GoalKind::Focal, 2.0},
                        GoalCase{GoalKind::Entropy, 0}}) {
    GoalObjective goal;
    goal.kind = gc.kind;
    goal.targets = targets;
    goal.focal_gamma = gc.gamma;
    const Vector g = goal_gradient(goal, model, &surrogate);
    const Vector fd = testing::fd_gradient(
        [&](const Vector& t) { return goal_value(goal, model.with_params(t), &surrogate); }, model.params(), 1e-6);
    EXPECT_LE(rel_err(g, fd), 1e-6) << to_string(gc.kind) << " gamma " << gc.gamma;
  }
}

TEST(Goals, FocalWithZeroGammaIsNll) {
  Rng rng(5);
  FittedModel model{linear_glm(3), &bernoulli(), ParameterVector(standard_normal_vector(3, rng)), 0.0};
  const ModelSurrogate surrogate(model.with_params(standard_normal_vector(3, rng)));
  GoalObjective nll, focal;
  focal.kind = GoalKind::Focal;
  for (int i = 0; i < 5; ++i) nll.targets.push_back(standard_normal_vector(3, rng));
  focal.targets = nll.targets;
  EXPECT_NEAR(goal_value(nll, model, &surrogate), goal_value(focal, model, &surrogate), 1e-12);
  EXPECT_LE(rel_err(goal_gradient(nll, model, &surrogate), goal_gradient(focal, model, &surrogate)), 1e-12);
}

TEST(Goals, NllGoalIsExpectedTestLoss) {
  // sum over U of E_{y~surrogate} nll(eta(x), y)
  Rng rng(6);
  FittedModel model{linear_glm(2), &bernoulli(), ParameterVector(standard_normal_vector(2, rng)), 0.0};
  const ModelSurrogate surrogate(model.with_params(standard_normal_vector(2, rng)));
  GoalObjective goal;
  double expect = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Vector x = standard_normal_vector(2, rng);
    goal.targets.push_back(x);
    const double p = surrogate.mean(x);
    expect += p * nll(bernoulli(), model.eta(x), 1.0) + (1 - p) * nll(bernoulli(), model.eta(x), 0.0);
  }
  EXPECT_NEAR(goal_value(goal, model, &surrogate), expect, 1e-12);
}

TEST(Goals, OptValueGradientMatchesFiniteDifferences) {
  Rng rng(7);
  GoalObjective goal;
  goal.kind = GoalKind::OptValue;
  goal.box = Box::cube(2, 0.0, 1.0);
  for (int k = 0; k < 4; ++k) {
    const auto model = testing::bowl_model(interior_point(rng), random_bowl_matrix(rng), 0.0, gaussian());
    const auto truth = testing::bowl_model(interior_point(rng), random_bowl_matrix(rng), -1.0, gaussian());
    const ModelSurrogate surrogate(truth);
    const auto ev = evaluate_goal(goal, model, &surrogate);
    EXPECT_FALSE(ev.boundary_fallback);
    const Vector fd = testing::fd_gradient(
        [&](const Vector& t) { return goal_value(goal, model.with_params(t), &surrogate); }, model.params(), 1e-5);
    EXPECT_LE(rel_err(ev.gradient, fd), 1e-4);
  }
}

TEST(Goals, OptValueOnBoundaryUsesActiveSet) {
  GoalObjective goal;
  goal.kind = GoalKind::OptValue;
  goal.box = Box::cube(2, 0.0, 1.0);
  const auto model = testing::bowl_model(testing::vec({-0.3, 0.4}), Matrix::Identity(2, 2), 0.0, gaussian());
  const auto truth = testing::bowl_model(testing::vec({0.5, 0.5}), Matrix::Identity(2, 2), 0.0, gaussian());
  const ModelSurrogate surrogate(truth);
  const auto ev = evaluate_goal(goal, model, &surrogate);
  EXPECT_TRUE(ev.boundary_fallback);
  const Vector fd = testing::fd_gradient(
      [&](const Vector& t) { return goal_value(goal, model.with_params(t), &surrogate); }, model.params(), 1e-5);
  EXPECT_LE(rel_err(ev.gradient, fd), 1e-4);
}

TEST(Goals, ValidationAndNames) {
  GoalObjective goal;
  EXPECT_THROW(goal.validate(), ContractError);
  goal.kind = GoalKind::OptValue;
  EXPECT_THROW(goal.validate(), ContractError);
  goal.box = Box::cube(1, 0, 1);
  EXPECT_NO_THROW(goal.validate());
  goal.focal_gamma = -1;
  EXPECT_THROW(goal.validate(), ContractError);
  for (auto k : {GoalKind::OptValue, GoalKind::NLL, GoalKind::Focal, GoalKind::Entropy})
    EXPECT_EQ(goal_kind_from_string(to_string(k)), k);
  EXPECT_THROW(goal_kind_from_string("mse"), ConfigError);
  EXPECT_EQ(goal_sense_from_string("maximize"), GoalSense::Maximize);
  EXPECT_THROW(goal_sense_from_string("up"), ConfigError);

  GoalObjective focal;
  focal.kind = GoalKind::Focal;
  focal.targets = {Vector::Zero(1)};
  const FittedModel g{linear_glm(1), &gaussian(), ParameterVector(Vector::Ones(1)), 0.0};
  const ModelSurrogate s(g);
  EXPECT_THROW(goal_value(focal, g, &s), ContractError);
  GoalObjective nll;
  nll.targets = {Vector::Zero(1)};
  EXPECT_THROW(goal_value(nll, g, nullptr), ContractError);
}

}  // namespace
}  // namespace goimda
