// Shared fixtures for the unit tests: seeded random instances and
// finite-difference helpers used as oracles.
#ifndef GOIMDA_TESTS_SUPPORT_HPP
#define GOIMDA_TESTS_SUPPORT_HPP

#include <functional>

#include "goimda/goimda.hpp"

namespace goimda::testing {

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

inline Matrix random_spd(std::size_t n, Rng& rng, double min_eig = 0.1) {
  const auto k = static_cast<Eigen::Index>(n);
  Matrix a(k, k);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = std::normal_distribution<double>(0.0, 1.0)(rng);
  Matrix s = a * a.transpose() / static_cast<double>(n);
  s.diagonal().array() += min_eig;
  return s;
}

/// Logistic data from a random linear model.
inline Dataset logistic_data(std::size_t n, std::size_t d, Rng& rng, double scale = 1.0) {
  const Vector theta = scale * standard_normal_vector(d, rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Dataset out;
  for (std::size_t i = 0; i < n; ++i) {
    Vector x = standard_normal_vector(d, rng);
    out.push_back({x, u(rng) < bernoulli().mean(x.dot(theta)) ? 1.0 : 0.0});
  }
  return out;
}

inline Dataset gaussian_data(std::size_t n, std::size_t d, Rng& rng) {
  const Vector theta = standard_normal_vector(d, rng);
  std::normal_distribution<double> nd(0.0, 1.0);
  Dataset out;
  for (std::size_t i = 0; i < n; ++i) {
    Vector x = standard_normal_vector(d, rng);
    out.push_back({x, x.dot(theta) + nd(rng)});
  }
  return out;
}

/// Central-difference gradient of a scalar function.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h = 1e-5) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

inline double rel_err(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}


/// Quadratic-feature model in two inputs whose natural parameter is
/// (x - c)' A (x - c) + offset, so the minimizer over a box containing c is c.
inline FittedModel bowl_model(const Vector& c, const Matrix& a, double offset, const ExponentialFamily& fam) {
  auto s = std::make_shared<GlmStructure>(std::make_shared<QuadraticFeatures>(2));
  const Vector ac = a * c;
  Vector theta(6);
  theta << c.dot(ac) + offset, -2.0 * ac[0], -2.0 * ac[1], a(0, 0), 2.0 * a(0, 1), a(1, 1);
  return FittedModel{s, &fam, ParameterVector(theta), 0.0};
}

/// Analytic minimizer of a bowl model's eta: -A^{-1} b / 2 from its parameters.
inline Vector bowl_argmin(const Vector& theta) {
  Matrix a(2, 2);
  a << theta[3], 0.5 * theta[4], 0.5 * theta[4], theta[5];
  return -0.5 * a.ldlt().solve(theta.segment(1, 2));
}

}  // namespace goimda::testing

#endif  // GOIMDA_TESTS_SUPPORT_HPP
