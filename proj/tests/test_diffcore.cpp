#include <gtest/gtest.h>

#include "support.hpp"

namespace goimda {
namespace {

using testing::fd_gradient;
using testing::rel_err;

struct LossCase {
  std::string name;
  std::shared_ptr<const LossFunction> loss;
  std::size_t n_params;
  std::size_t input_dim;
  bool binary;
};

std::vector<LossCase> shipped_losses() {
  Rng rng(11);
  Matrix centres(5, 2);
  for (Eigen::Index i = 0; i < centres.size(); ++i) centres.data()[i] = std::uniform_real_distribution<double>(0, 1)(rng);
  auto rbf = std::make_shared<GlmStructure>(std::make_shared<RbfFeatures>(centres, 0.4));
  auto quad = std::make_shared<GlmStructure>(std::make_shared<QuadraticFeatures>(3));
  auto mlp = std::make_shared<MlpStructure>(3, std::vector<std::size_t>{4, 3});
  return {
      {"logistic", std::make_shared<NllLoss>(linear_glm(4, true), bernoulli()), 5, 4, true},
      {"gaussian", std::make_shared<NllLoss>(linear_glm(4), gaussian()), 4, 4, false},
      {"rbf_gaussian", std::make_shared<NllLoss>(rbf, gaussian()), 6, 2, false},
      {"quadratic_logistic", std::make_shared<NllLoss>(quad, bernoulli()), quad->num_params(), 3, true},
      {"mlp_logistic", std::make_shared<NllLoss>(mlp, bernoulli()), mlp->num_params(), 3, true},
      {"mlp_gaussian", std::make_shared<NllLoss>(mlp, gaussian()), mlp->num_params(), 3, false},
  };
}

Dataset batch_for(const LossCase& c, Rng& rng) {
  Dataset out;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 30; ++i) {
    Vector x = standard_normal_vector(c.input_dim, rng);
    out.push_back({x, c.binary ? (u(rng) < 0.5 ? 1.0 : 0.0) : 2.0 * u(rng) - 1.0});
  }
  return out;
}

TEST(Diffcore, GradientMatchesFiniteDifferencesOnShippedLosses) {
  Rng rng(3);
  for (const auto& c : shipped_losses()) {
    const Dataset batch = batch_for(c, rng);
    const Vector theta = 0.5 * standard_normal_vector(c.n_params, rng);
    const Vector g = batch_gradient(*c.loss, theta, batch);
    const Vector fd = fd_gradient([&](const Vector& t) { return mean_loss(*c.loss, t, batch); }, theta, 1e-6);
    EXPECT_LE((g - fd).norm(), 1e-4 * std::max(1.0, g.norm())) << c.name;
  }
}

TEST(Diffcore, HvpMatchesDenseHessianAndGradientDifferences) {
  Rng rng(4);
  for (const auto& c : shipped_losses()) {
    const Dataset batch = batch_for(c, rng);
    const Vector theta = 0.5 * standard_normal_vector(c.n_params, rng);
    const Vector v = standard_normal_vector(c.n_params, rng);
    const Matrix h = dense_hessian(*c.loss, theta, batch);
    const Vector hv = hvp(*c.loss, theta, batch, v);
    EXPECT_LE(rel_err(hv, h * v), 1e-6) << c.name;
    // independent oracle: directional difference of the analytic gradient
    const double s = 1e-5;
    const Vector fd = (batch_gradient(*c.loss, theta + s * v, batch) - batch_gradient(*c.loss, theta - s * v, batch)) / (2 * s);
    EXPECT_LE(rel_err(hv, fd), 1e-5) << c.name;
    EXPECT_TRUE(is_symmetric(h)) << c.name;
  }
}

TEST(Diffcore, GaussNewtonEqualsExactForCanonicalGlm) {
  Rng rng(5);
  const NllLoss loss(linear_glm(4), bernoulli());
  const Dataset batch = testing::logistic_data(40, 4, rng);
  const Vector theta = standard_normal_vector(4, rng), v = standard_normal_vector(4, rng);
  EXPECT_LE(rel_err(hvp(loss, theta, batch, v, Curvature::GaussNewton), hvp(loss, theta, batch, v)), 1e-12);
}

TEST(Diffcore, GaussNewtonIsPsdForMlp) {
  Rng rng(6);
  auto mlp = std::make_shared<MlpStructure>(2, std::vector<std::size_t>{5});
  const NllLoss loss(mlp, bernoulli());
  const Dataset batch = testing::logistic_data(25, 2, rng);
  const Vector theta = mlp->init_params(rng);
  const Matrix g = dense_hessian(loss, theta, batch, Curvature::GaussNewton);
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(g).eigenvalues().minCoeff(), -1e-10);
}

TEST(Diffcore, QuadraticLossHessianIsTheMatrix) {
  Rng rng(7);
  const Matrix a = testing::random_spd(5, rng);
  const QuadraticLoss loss(a);
  const Dataset one{{Vector::Zero(1), 0.0}};
  const Vector theta = standard_normal_vector(5, rng);
  EXPECT_LE((dense_hessian(loss, theta, one) - a).norm(), 1e-12 * a.norm());
  EXPECT_NEAR(mean_loss(loss, theta, one), 0.5 * theta.dot(a * theta), 1e-12);
}

TEST(Diffcore, DenseHessianRespectsCap) {
  const QuadraticLoss loss = QuadraticLoss::identity(10);
  const Dataset one{{Vector::Zero(1), 0.0}};
  EXPECT_THROW(dense_hessian(loss, Vector::Zero(10), one, Curvature::Exact, 5), CapacityError);
}

TEST(Diffcore, EmptyBatchIsRejected) {
  const QuadraticLoss loss = QuadraticLoss::identity(2);
  EXPECT_THROW(batch_gradient(loss, Vector::Zero(2), Dataset{}), ContractError);
  EXPECT_THROW(hvp(loss, Vector::Zero(2), Dataset{}, Vector::Zero(2)), ContractError);
}

TEST(Diffcore, ParameterVectorLayout) {
  const ParameterLayout layout{{"w", 0, 3}, {"b", 3, 1}};
  const ParameterVector p(testing::vec({1, 2, 3, 4}), layout);
  EXPECT_EQ(p.block("b")[0], 4.0);
  EXPECT_EQ(p.block("w").size(), 3);
  EXPECT_THROW(ParameterVector(testing::vec({1, 2, 3}), layout), ContractError);
  EXPECT_THROW(ParameterVector(testing::vec({1, 2, 3, 4}), ParameterLayout{{"w", 1, 3}, {"b", 0, 1}}), ContractError);
  EXPECT_THROW(ParameterVector(testing::vec({1, std::nan(""), 3, 4}), layout), NumericError);
  EXPECT_FALSE(p.same_layout(ParameterVector(testing::vec({1, 2, 3, 4}))));
  EXPECT_THROW(hvp(QuadraticLoss::identity(4), p, Dataset{{Vector::Zero(1), 0.0}}, ParameterVector(Vector::Zero(4))),
               ContractError);
}

TEST(Diffcore, MlpLayoutNamesBlocks) {
  const MlpStructure mlp(3, {4});
  const auto layout = mlp.layout();
  ASSERT_EQ(layout.size(), 4u);
  EXPECT_EQ(layout[0].name, "layer0.weight");
  EXPECT_EQ(layout[0].size, 12u);
  EXPECT_EQ(layout[3].name, "layer1.bias");
  EXPECT_EQ(mlp.num_params(), 12u + 4u + 4u + 1u);
}

TEST(Diffcore, DeriveSeedSeparatesStreams) {
  EXPECT_NE(derive_seed(1, 2), derive_seed(1, 3));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
  EXPECT_EQ(derive_seed(9, 4, 4), derive_seed(9, 4, 4));
}

}  // namespace
}  // namespace goimda
