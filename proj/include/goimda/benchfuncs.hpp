#ifndef GOIMDA_BENCHFUNCS_HPP
#define GOIMDA_BENCHFUNCS_HPP

#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "goimda/core.hpp"

namespace goimda {

/// Rescaled Branin on [0,1]^2 (inputs mapped to [-5,10] x [0,15]).
inline double branin(const Vector& x) {
  require(x.size() == 2, "branin: input must be two-dimensional");
  constexpr double pi = std::numbers::pi;
  const double x1 = 15.0 * x[0] - 5.0, x2 = 15.0 * x[1];
  const double a = 1.0 / 51.95, b = 5.1 / (4.0 * pi * pi), c = 5.0 / pi, r = 6.0, s = 10.0, t = 1.0 / (8.0 * pi),
               q = 44.81;
  const double u = x2 - b * x1 * x1 + c * x1 - r;
  return a * (u * u + s * (1.0 - t) * std::cos(x1) - q);
}

/// Exact minimizers of the rescaled Branin and its minimum value.
inline std::vector<Vector> branin_minimizers() {
  constexpr double pi = std::numbers::pi;
  std::vector<Vector> out;
  for (auto [u1, u2] : {std::pair{-pi, 12.275}, std::pair{pi, 2.275}, std::pair{3.0 * pi, 2.475}}) {
    Vector v(2);
    v << (u1 + 5.0) / 15.0, u2 / 15.0;
    out.push_back(v);
  }
  return out;
}

inline double branin_minimum() { return (-54.81 + 10.0 / (8.0 * std::numbers::pi)) / 51.95; }

inline double dropwave(const Vector& x) {
  require(x.size() == 2, "dropwave: input must be two-dimensional");
  const double r2 = x.squaredNorm();
  return -(1.0 + std::cos(12.0 * std::sqrt(r2))) / (0.5 * r2 + 2.0);
}

inline double ackley(const Vector& x) {
  require(x.size() >= 1, "ackley: input must be non-empty");
  constexpr double a = 20.0, b = 0.2, c = 2.0 * std::numbers::pi;
  const double n = static_cast<double>(x.size());
  const double s1 = x.squaredNorm() / n;
  const double s2 = (c * x.array()).cos().sum() / n;
  return -a * std::exp(-b * std::sqrt(s1)) - std::exp(s2) + a + std::numbers::e;
}

/// Ground truth f plus Gaussian observation noise on a box.
struct NoisyObjective {
  std::string name;
  std::function<double(const Vector&)> f;
  double noise_sd = 0.0;
  Box box;
  std::vector<Vector> optimum_locations;
  double optimum_value = 0.0;

  NoisyObjective(std::string n, std::function<double(const Vector&)> fn, double sd, Box b, std::vector<Vector> locs,
                 double opt)
      : name(std::move(n)), f(std::move(fn)), noise_sd(sd), box(std::move(b)), optimum_locations(std::move(locs)),
        optimum_value(opt) {
    require(noise_sd >= 0.0, "objective: noise sd must be nonnegative");
    for (const auto& x : optimum_locations)
      if (std::abs(f(x) - optimum_value) > 1e-9)
        throw ContractError("objective " + name + ": listed optimum does not match f");
  }

  std::size_t dim() const { return box.dim(); }
};

inline double observe(const NoisyObjective& obj, const Vector& x, Rng& rng) {
  const double fx = obj.f(x);
  if (obj.noise_sd == 0.0) return fx;
  std::normal_distribution<double> nd(0.0, 1.0);
  return fx + obj.noise_sd * nd(rng);
}

/// Registry: "branin", "dropwave", "ackley5" (also "ackley<d>").
inline NoisyObjective make_objective(const std::string& name, double noise_sd) {
  if (name == "branin")
    return {name, branin, noise_sd, Box::cube(2, 0.0, 1.0), branin_minimizers(), branin_minimum()};
  if (name == "dropwave")
    return {name, dropwave, noise_sd, Box::cube(2, -5.12, 5.12), {Vector::Zero(2)}, -1.0};
  if (name.rfind("ackley", 0) == 0) {
    const std::string tail = name.substr(6);
    const int d = tail.empty() ? 5 : std::stoi(tail);
    require(d >= 1 && d <= 25, "ackley: dimension out of range");
    return {name, ackley, noise_sd, Box::cube(static_cast<std::size_t>(d), -5.0, 5.0), {Vector::Zero(d)}, 0.0};
  }
  throw ConfigError("unknown objective: " + name);
}

// ---------------------------------------------------------------------------

/// Bernoulli GLM over PPCA inputs x = W z + eps.
struct PpcaTask {
  Matrix w;  // d x l
  double noise_sd = 0.1;
  Vector theta_true;
  std::size_t d = 0, l = 0;

  /// Covariance of x.
  Matrix input_cov() const {
    return w * w.transpose() + noise_sd * noise_sd * Matrix::Identity(static_cast<Eigen::Index>(d),
                                                                      static_cast<Eigen::Index>(d));
  }
};

/// W and theta_0 i.i.d. standard normal. When `margin_sd` > 0, theta_0 is
/// rescaled so the latent margin x'theta_0 has that standard deviation.
inline PpcaTask make_ppca_task(std::size_t d, std::size_t l, double noise_sd, std::uint64_t seed,
                               double margin_sd = 0.0) {
  require(l < d && l >= 1, "ppca task: need 1 <= l < d");
  Rng rng(seed);
  PpcaTask t;
  t.d = d;
  t.l = l;
  t.noise_sd = noise_sd;
  t.w.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(l));
  std::normal_distribution<double> nd(0.0, 1.0);
  for (Eigen::Index i = 0; i < t.w.size(); ++i) t.w.data()[i] = nd(rng);
  t.theta_true = standard_normal_vector(d, rng);
  if (margin_sd > 0.0) {
    const double sd = std::sqrt(t.theta_true.dot(t.input_cov() * t.theta_true));
    t.theta_true *= margin_sd / sd;
  }
  return t;
}

inline Dataset gen_ppca_logistic(const PpcaTask& task, std::size_t n, Rng& rng) {
  require(n >= 1, "gen_ppca_logistic: n must be positive");
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Dataset out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vector z(static_cast<Eigen::Index>(task.l));
    for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = nd(rng);
    Vector x = task.w * z;
    for (Eigen::Index k = 0; k < x.size(); ++k) x[k] += task.noise_sd * nd(rng);
    const double eta = x.dot(task.theta_true);
    const double p = eta >= 0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
    out.push_back({std::move(x), u(rng) < p ? 1.0 : 0.0});
  }
  return out;
}

}  // namespace goimda

#endif  // GOIMDA_BENCHFUNCS_HPP
