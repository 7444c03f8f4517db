#ifndef GOIMDA_DUAL_HPP
#define GOIMDA_DUAL_HPP

#include <cmath>

namespace goimda {

/// First-order forward-mode number: value plus one directional tangent.
/// Pushing a Dual through an analytic gradient yields the exact
/// directional derivative of that gradient, i.e. a Hessian-vector product.
struct Dual {
  double val = 0.0;
  double tan = 0.0;

  constexpr Dual() = default;
  constexpr Dual(double v) : val(v) {}  // NOLINT: implicit lift of constants
  constexpr Dual(double v, double t) : val(v), tan(t) {}

  Dual& operator+=(const Dual& o) {
    val += o.val;
    tan += o.tan;
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    val -= o.val;
    tan -= o.tan;
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    tan = tan * o.val + val * o.tan;
    val *= o.val;
    return *this;
  }
};

inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator*(Dual a, const Dual& b) { return a *= b; }
inline Dual operator-(const Dual& a) { return {-a.val, -a.tan}; }
inline Dual operator/(const Dual& a, const Dual& b) {
  return {a.val / b.val, (a.tan * b.val - a.val * b.tan) / (b.val * b.val)};
}

inline Dual tanh(const Dual& a) {
  const double t = std::tanh(a.val);
  return {t, a.tan * (1.0 - t * t)};
}

inline Dual exp(const Dual& a) {
  const double e = std::exp(a.val);
  return {e, a.tan * e};
}

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.val; }
inline double tangent_of(double) { return 0.0; }
inline double tangent_of(const Dual& x) { return x.tan; }

}  // namespace goimda

#endif  // GOIMDA_DUAL_HPP
