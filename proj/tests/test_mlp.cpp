#include <gtest/gtest.h>

#include "support.hpp"

namespace goimda {
namespace {

using testing::fd_gradient;
using testing::rel_err;

class MlpDerivatives : public ::testing::Test {
 protected:
  MlpStructure mlp{3, {5, 4}};
  Rng rng{1};
  Vector theta = mlp.init_params(rng);
  Vector x = standard_normal_vector(3, rng);
};

TEST_F(MlpDerivatives, ParameterGradient) {
  const Vector fd = fd_gradient([&](const Vector& t) { return mlp.eta(t, x); }, theta, 1e-6);
  EXPECT_LE(rel_err(mlp.eta_grad(theta, x), fd), 1e-7);
}

TEST_F(MlpDerivatives, ParameterHvp) {
  const Vector v = standard_normal_vector(mlp.num_params(), rng);
  const double h = 1e-6;
  const Vector fd = (mlp.eta_grad(theta + h * v, x) - mlp.eta_grad(theta - h * v, x)) / (2 * h);
  EXPECT_LE(rel_err(mlp.eta_hvp(theta, x, v), fd), 1e-6);
}

TEST_F(MlpDerivatives, InputDerivatives) {
  const Vector gx = mlp.eta_grad_x(theta, x);
  EXPECT_LE(rel_err(gx, fd_gradient([&](const Vector& z) { return mlp.eta(theta, z); }, x, 1e-6)), 1e-7);
  const Matrix hx = mlp.eta_hess_x(theta, x);
  for (Eigen::Index k = 0; k < 3; ++k) {
    const Vector col = fd_gradient([&](const Vector& z) { return mlp.eta_grad_x(theta, z)[k]; }, x, 1e-6);
    EXPECT_LE(rel_err(hx.row(k).transpose(), col), 1e-6);
  }
  const Matrix c = mlp.eta_cross(theta, x);
  for (Eigen::Index k = 0; k < 3; ++k) {
    const Vector row = fd_gradient([&](const Vector& t) { return mlp.eta_grad_x(t, x)[k]; }, theta, 1e-6);
    EXPECT_LE(rel_err(c.row(k).transpose(), row), 1e-6);
  }
}

TEST(Mlp, InitScalesWithFanIn) {
  const MlpStructure mlp(100, {50});
  Rng rng(2);
  const ParameterVector p(mlp.init_params(rng), mlp.layout());
  const auto w = p.block("layer0.weight");
  const double var = w.squaredNorm() / static_cast<double>(w.size());
  EXPECT_NEAR(var, 0.01, 0.001);
  EXPECT_EQ(p.block("layer0.bias").norm(), 0.0);
  EXPECT_THROW(MlpStructure(0, {3}), ContractError);
  EXPECT_THROW(MlpStructure(2, {0}), ContractError);
}

TEST(Mlp, TrainingFitsNonlinearBoundary) {
  const ToyClassificationProblem problem(400, 400, 400 - 1, 3);
  Rng rng(0);
  const Dataset train = problem.initial_labeled(rng);
  MlpTrainConfig cfg;
  cfg.hidden = {16};
  cfg.max_epochs = 1500;
  const MlpTrainer trainer(2, bernoulli(), cfg);
  const auto fit = trainer.fit(train, 5, nullptr);
  const auto acc = problem.evaluate(fit.model, nullptr);
  EXPECT_GT(acc.value, 0.85);
  EXPECT_EQ(fit.model.theta.layout(), trainer.structure()->layout());

  // same seed, same parameters; warm start begins from the supplied model
  EXPECT_EQ(trainer.fit(train, 5, nullptr).model.params(), fit.model.params());
  MlpTrainConfig one = cfg;
  one.max_epochs = 1;
  const auto warm = MlpTrainer(2, bernoulli(), one).fit(train, 99, &fit.model);
  EXPECT_LE((warm.model.params() - fit.model.params()).cwiseAbs().maxCoeff(), 0.011);
  EXPECT_FALSE(warm.report.converged);
}

}  // namespace
}  // namespace goimda
