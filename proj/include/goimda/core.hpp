#ifndef GOIMDA_CORE_HPP
#define GOIMDA_CORE_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace goimda {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Row-major semantics are irrelevant for the dense kernels here; the
/// Hessians and covariance matrices we build are small and symmetric.
using DenseMatrix = Matrix;

using Rng = std::mt19937_64;

inline constexpr const char* kLibraryVersion = "0.4.0";

/// A labelled observation. Labels are real-valued: {0,1} for Bernoulli
/// responses, arbitrary reals for Gaussian ones.
struct Example {
  Vector x;
  double y = 0.0;
};

using Dataset = std::vector<Example>;

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite value encountered while evaluating a loss or iterating a solver.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Caller violated an operation's precondition (shapes, layouts, empty input).
class ContractError : public Error {
 public:
  using Error::Error;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class SingularityError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

class ExhaustionError : public Error {
 public:
  using Error::Error;
};

class BoundaryError : public Error {
 public:
  using Error::Error;
};

class NonConvergenceError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Small helpers

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractError(what);
}

/// SplitMix64 finalizer; used to derive independent stream seeds from a run
/// seed plus integer tags (replication, member, step, ...).
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <typename... Tags>
std::uint64_t derive_seed(std::uint64_t base, Tags... tags) {
  std::uint64_t s = mix_seed(base);
  ((s = mix_seed(s ^ static_cast<std::uint64_t>(tags))), ...);
  return s;
}

inline Vector standard_normal_vector(std::size_t n, Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = nd(rng);
  return v;
}

/// Axis-aligned search domain.
struct Box {
  Vector lower;
  Vector upper;

  Box() = default;
  Box(Vector lo, Vector hi) : lower(std::move(lo)), upper(std::move(hi)) {
    require(lower.size() == upper.size() && lower.size() > 0, "box: bound dimensions differ");
    for (Eigen::Index i = 0; i < lower.size(); ++i)
      require(lower[i] < upper[i], "box: lower bound must be below upper bound");
  }

  static Box cube(std::size_t d, double lo, double hi) {
    return Box(Vector::Constant(static_cast<Eigen::Index>(d), lo),
               Vector::Constant(static_cast<Eigen::Index>(d), hi));
  }

  std::size_t dim() const { return static_cast<std::size_t>(lower.size()); }
  double diameter() const { return (upper - lower).norm(); }

  Vector clamp(const Vector& x) const { return x.cwiseMax(lower).cwiseMin(upper); }

  bool contains(const Vector& x, double slack = 0.0) const {
    return ((x.array() >= lower.array() - slack) && (x.array() <= upper.array() + slack)).all();
  }

  /// Maps a point of the unit cube onto the box.
  Vector from_unit(const Vector& u) const {
    return lower + (upper - lower).cwiseProduct(u);
  }
};

}  // namespace goimda

#endif  // GOIMDA_CORE_HPP
