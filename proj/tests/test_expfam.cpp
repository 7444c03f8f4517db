#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"

namespace goimda {
namespace {

double d1(const std::function<double(double)>& f, double x, double h = 1e-5) { return (f(x + h) - f(x - h)) / (2 * h); }

TEST(Expfam, DerivativeChainMatchesFiniteDifferences) {
  for (const auto* fam : {&bernoulli(), &gaussian()}) {
    for (double eta : {-4.0, -1.3, 0.0, 0.7, 3.2}) {
      EXPECT_NEAR(fam->mean(eta), d1([&](double e) { return fam->log_partition(e); }, eta), 1e-8) << fam->name();
      EXPECT_NEAR(fam->variance(eta), d1([&](double e) { return fam->mean(e); }, eta), 1e-8) << fam->name();
      EXPECT_NEAR(fam->third(eta), d1([&](double e) { return fam->variance(e); }, eta), 1e-8) << fam->name();
      EXPECT_NEAR(fam->entropy_derivative(eta), d1([&](double e) { return fam->entropy(e); }, eta), 1e-8)
          << fam->name();
    }
  }
}

TEST(Expfam, BernoulliEntropyIsBinaryEntropy) {
  for (double eta : {-3.0, -0.2, 0.0, 1.5}) {
    const double p = 1.0 / (1.0 + std::exp(-eta));
    EXPECT_NEAR(bernoulli().entropy(eta), -p * std::log(p) - (1 - p) * std::log(1 - p), 1e-12);
  }
  EXPECT_NEAR(bernoulli().entropy(0.0), std::log(2.0), 1e-15);
}

TEST(Expfam, GaussianEntropyConstant) {
  EXPECT_NEAR(gaussian().entropy(2.0), 0.5 * (1.0 + std::log(2.0 * std::numbers::pi)), 1e-15);
}

TEST(Expfam, BernoulliIsStableAtExtremeEta) {
  for (double eta : {-800.0, 800.0}) {
    EXPECT_TRUE(std::isfinite(bernoulli().log_partition(eta)));
    EXPECT_TRUE(std::isfinite(bernoulli().entropy(eta)));
    EXPECT_GE(bernoulli().variance(eta), 0.0);
  }
  EXPECT_NEAR(bernoulli().log_partition(800.0), 800.0, 1e-12);
  EXPECT_NEAR(bernoulli().log_partition(-800.0), 0.0, 1e-12);
}

TEST(Expfam, NllMatchesLogDensity) {
  // Bernoulli nll equals -log p(y)
  const double eta = 0.8, p = 1.0 / (1.0 + std::exp(-eta));
  EXPECT_NEAR(nll(bernoulli(), eta, 1.0), -std::log(p), 1e-12);
  EXPECT_NEAR(nll(bernoulli(), eta, 0.0), -std::log(1 - p), 1e-12);
  // Gaussian nll plus the base term equals -log N(y; eta, 1)
  const double y = 1.7;
  const double logpdf = -0.5 * (y - eta) * (y - eta) - 0.5 * std::log(2 * std::numbers::pi);
  EXPECT_NEAR(nll(gaussian(), eta, y) + gaussian().neg_log_base(y), -logpdf, 1e-12);
}

TEST(Expfam, RejectsNonFiniteEta) {
  EXPECT_THROW(nll(bernoulli(), std::nan(""), 1.0), DomainError);
  EXPECT_THROW(nll(gaussian(), INFINITY, 1.0), DomainError);
  EXPECT_THROW(predictive_mean(bernoulli(), std::nan("")), DomainError);
}

TEST(Expfam, SampleMomentsMatchMeanAndVariance) {
  Rng rng(21);
  const int n = 200000;
  for (const auto* fam : {&bernoulli(), &gaussian()}) {
    const double eta = 0.6;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
      const double y = fam->sample(eta, rng);
      s += y;
      s2 += y * y;
    }
    const double m = s / n, v = s2 / n - m * m;
    EXPECT_NEAR(m, fam->mean(eta), 5 * std::sqrt(fam->variance(eta) / n)) << fam->name();
    EXPECT_NEAR(v, fam->variance(eta), 0.02) << fam->name();
  }
}

TEST(Expfam, Registry) {
  EXPECT_EQ(family_by_name("bernoulli").name(), "bernoulli");
  EXPECT_EQ(family_by_name("gaussian").name(), "gaussian");
  EXPECT_THROW(family_by_name("poisson"), ConfigError);
  EXPECT_TRUE(bernoulli().is_binary());
  EXPECT_FALSE(gaussian().is_binary());
}

TEST(Expfam, ExpectedLossGradientIsBiasTimesFeature) {
  const auto model = linear_glm(3);
  const Vector theta = testing::vec({0.2, -0.4, 1.0}), x = testing::vec({1.0, 2.0, -1.0});
  const double eta = theta.dot(x);
  const Vector g = expected_loss_grad(bernoulli(), *model, theta, x, 0.3);
  EXPECT_LE((g - (bernoulli().mean(eta) - 0.3) * x).norm(), 1e-14);
  // averaging the per-label gradient under Bernoulli(0.3) gives the same thing
  const NllLoss loss(model, bernoulli());
  const Vector avg = 0.3 * loss.gradient(theta, {x, 1.0}) + 0.7 * loss.gradient(theta, {x, 0.0});
  EXPECT_LE((g - avg).norm(), 1e-14);
}

TEST(Models, FeatureJacobiansMatchFiniteDifferences) {
  Rng rng(8);
  Matrix centres(4, 3);
  for (Eigen::Index i = 0; i < centres.size(); ++i) centres.data()[i] = std::normal_distribution<double>()(rng);
  const std::vector<std::shared_ptr<const FeatureMap>> maps{std::make_shared<IdentityFeatures>(3, true),
                                                             std::make_shared<QuadraticFeatures>(3),
                                                             std::make_shared<RbfFeatures>(centres, 0.9)};
  const Vector x = standard_normal_vector(3, rng);
  for (const auto& m : maps) {
    const Matrix j = m->jacobian(x);
    for (Eigen::Index k = 0; k < 3; ++k) {
      Vector xp = x, xm = x;
      xp[k] += 1e-6;
      xm[k] -= 1e-6;
      const Vector col = (m->features(xp) - m->features(xm)) / 2e-6;
      EXPECT_LE((j.col(k) - col).norm(), 1e-7 * std::max(1.0, col.norm())) << m->kind();
    }
  }
}

TEST(Models, GlmInputDerivativesMatchFiniteDifferences) {
  Rng rng(9);
  Matrix centres(6, 2);
  for (Eigen::Index i = 0; i < centres.size(); ++i) centres.data()[i] = std::uniform_real_distribution<double>()(rng);
  const GlmStructure s(std::make_shared<RbfFeatures>(centres, 0.3));
  const Vector theta = standard_normal_vector(s.num_params(), rng);
  const Vector x = testing::vec({0.4, 0.6});
  const Vector gx = s.eta_grad_x(theta, x);
  EXPECT_LE(testing::rel_err(gx, testing::fd_gradient([&](const Vector& z) { return s.eta(theta, z); }, x)), 1e-7);
  const Matrix hx = s.eta_hess_x(theta, x);
  for (Eigen::Index k = 0; k < 2; ++k) {
    Vector xp = x, xm = x;
    xp[k] += 1e-6;
    xm[k] -= 1e-6;
    EXPECT_LE((hx.col(k) - (s.eta_grad_x(theta, xp) - s.eta_grad_x(theta, xm)) / 2e-6).norm(), 1e-5);
  }
  const Matrix c = s.eta_cross(theta, x);
  ASSERT_EQ(c.rows(), 2);
  ASSERT_EQ(c.cols(), static_cast<Eigen::Index>(s.num_params()));
  for (Eigen::Index j = 0; j < c.cols(); ++j) {
    Vector tp = theta;
    tp[j] += 1.0;
    EXPECT_LE((c.col(j) - (s.eta_grad_x(tp, x) - gx)).norm(), 1e-12);  // linear in theta
  }
}

}  // namespace
}  // namespace goimda
