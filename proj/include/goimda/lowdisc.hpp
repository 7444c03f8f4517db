#ifndef GOIMDA_LOWDISC_HPP
#define GOIMDA_LOWDISC_HPP

#include <cmath>
#include <vector>

#include "goimda/core.hpp"

namespace goimda {

inline double radical_inverse(std::uint64_t i, std::uint64_t base) {
  double inv = 1.0 / static_cast<double>(base), f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

inline std::uint64_t nth_prime(std::size_t k) {
  static const std::uint64_t primes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41,
                                         43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97};
  require(k < std::size(primes), "halton: dimension above 25 is not supported");
  return primes[k];
}

/// Rows are Halton points in [0,1)^d, starting at index `skip + 1`, each
/// coordinate rotated by `shift` modulo 1 (Cranley-Patterson).
inline Matrix halton(std::size_t n, std::size_t d, std::size_t skip = 0, const Vector* shift = nullptr) {
  Matrix pts(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double u = radical_inverse(skip + i + 1, nth_prime(j));
      if (shift != nullptr) u = std::fmod(u + (*shift)[static_cast<Eigen::Index>(j)], 1.0);
      pts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = u;
    }
  return pts;
}

/// n Halton points mapped into the box, randomly rotated when `rng` is given.
inline std::vector<Vector> halton_in_box(const Box& box, std::size_t n, Rng* rng = nullptr, std::size_t skip = 0) {
  Vector shift;
  if (rng != nullptr) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    shift.resize(static_cast<Eigen::Index>(box.dim()));
    for (Eigen::Index j = 0; j < shift.size(); ++j) shift[j] = u(*rng);
  }
  const Matrix pts = halton(n, box.dim(), skip, rng != nullptr ? &shift : nullptr);
  std::vector<Vector> out;
  out.reserve(n);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) out.push_back(box.from_unit(pts.row(i).transpose()));
  return out;
}

}  // namespace goimda

#endif  // GOIMDA_LOWDISC_HPP
