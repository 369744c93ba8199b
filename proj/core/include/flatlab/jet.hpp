#pragma once

// Second-order forward-mode jets: a value together with its gradient and
// Hessian with respect to the chart coordinates. Field evaluation runs on
// Jet2 so that metric and connection jets come out with exact partials.

#include <array>
#include <cmath>

#include "flatlab/tensor.hpp"

namespace flatlab {

struct Jet2 {
  double v = 0.0;
  std::array<double, kMaxDim> d{};
  std::array<double, kMaxDim * kMaxDim> h{};
  int n = 0;  // number of active coordinates; 0 for constants

  Jet2() = default;
  Jet2(double value) : v(value) {}  // NOLINT: constants promote implicitly

  static Jet2 variable(double value, int index, int dim) {
    Jet2 j(value);
    j.n = dim;
    j.d[static_cast<std::size_t>(index)] = 1.0;
    return j;
  }

  double hess(int i, int k) const { return h[static_cast<std::size_t>(i * kMaxDim + k)]; }
  double& hess(int i, int k) { return h[static_cast<std::size_t>(i * kMaxDim + k)]; }
  double grad(int i) const { return d[static_cast<std::size_t>(i)]; }
};

namespace jet_detail {

/// Chain rule for a scalar function with value f0, first derivative f1 and
/// second derivative f2 evaluated at a.v.
inline Jet2 chain(const Jet2& a, double f0, double f1, double f2) {
  Jet2 r(f0);
  r.n = a.n;
  for (int i = 0; i < a.n; ++i) r.d[i] = f1 * a.d[i];
  for (int i = 0; i < a.n; ++i)
    for (int k = 0; k < a.n; ++k)
      r.hess(i, k) = f1 * a.hess(i, k) + f2 * a.d[i] * a.d[k];
  return r;
}

}  // namespace jet_detail

inline Jet2 operator+(const Jet2& a, const Jet2& b) {
  Jet2 r(a.v + b.v);
  r.n = std::max(a.n, b.n);
  for (int i = 0; i < r.n; ++i) r.d[i] = a.d[i] + b.d[i];
  for (int i = 0; i < r.n; ++i)
    for (int k = 0; k < r.n; ++k) r.hess(i, k) = a.hess(i, k) + b.hess(i, k);
  return r;
}

inline Jet2 operator-(const Jet2& a) {
  Jet2 r(-a.v);
  r.n = a.n;
  for (int i = 0; i < r.n; ++i) r.d[i] = -a.d[i];
  for (int i = 0; i < r.n; ++i)
    for (int k = 0; k < r.n; ++k) r.hess(i, k) = -a.hess(i, k);
  return r;
}

inline Jet2 operator-(const Jet2& a, const Jet2& b) {
  Jet2 r(a.v - b.v);
  r.n = std::max(a.n, b.n);
  for (int i = 0; i < r.n; ++i) r.d[i] = a.d[i] - b.d[i];
  for (int i = 0; i < r.n; ++i)
    for (int k = 0; k < r.n; ++k) r.hess(i, k) = a.hess(i, k) - b.hess(i, k);
  return r;
}

inline Jet2 operator*(const Jet2& a, const Jet2& b) {
  Jet2 r(a.v * b.v);
  r.n = std::max(a.n, b.n);
  for (int i = 0; i < r.n; ++i) r.d[i] = a.v * b.d[i] + b.v * a.d[i];
  for (int i = 0; i < r.n; ++i)
    for (int k = 0; k < r.n; ++k)
      r.hess(i, k) = a.v * b.hess(i, k) + b.v * a.hess(i, k) + a.d[i] * b.d[k] +
                     a.d[k] * b.d[i];
  return r;
}

inline Jet2 reciprocal(const Jet2& a) {
  const double inv = 1.0 / a.v;
  return jet_detail::chain(a, inv, -inv * inv, 2.0 * inv * inv * inv);
}

inline Jet2 operator/(const Jet2& a, const Jet2& b) {
  if (b.n == 0) {
    Jet2 r = a;
    const double s = 1.0 / b.v;
    r.v *= s;
    for (auto& x : r.d) x *= s;
    for (auto& x : r.h) x *= s;
    return r;
  }
  return a * reciprocal(b);
}

inline Jet2& operator+=(Jet2& a, const Jet2& b) { return a = a + b; }
inline Jet2& operator-=(Jet2& a, const Jet2& b) { return a = a - b; }
inline Jet2& operator*=(Jet2& a, const Jet2& b) { return a = a * b; }

inline Jet2 sin(const Jet2& a) {
  const double s = std::sin(a.v), c = std::cos(a.v);
  return jet_detail::chain(a, s, c, -s);
}
inline Jet2 cos(const Jet2& a) {
  const double s = std::sin(a.v), c = std::cos(a.v);
  return jet_detail::chain(a, c, -s, -c);
}
inline Jet2 tan(const Jet2& a) {
  const double t = std::tan(a.v);
  const double sec2 = 1.0 + t * t;
  return jet_detail::chain(a, t, sec2, 2.0 * t * sec2);
}
inline Jet2 tanh(const Jet2& a) {
  const double t = std::tanh(a.v);
  const double s = 1.0 - t * t;
  return jet_detail::chain(a, t, s, -2.0 * t * s);
}
inline Jet2 exp(const Jet2& a) {
  const double e = std::exp(a.v);
  return jet_detail::chain(a, e, e, e);
}
inline Jet2 log(const Jet2& a) {
  return jet_detail::chain(a, std::log(a.v), 1.0 / a.v, -1.0 / (a.v * a.v));
}
inline Jet2 sqrt(const Jet2& a) {
  const double s = std::sqrt(a.v);
  return jet_detail::chain(a, s, 0.5 / s, -0.25 / (s * a.v));
}

/// a^p for a real exponent p. Integer exponents are allowed for negative a.
inline Jet2 pow(const Jet2& a, double p) {
  if (p == 0.0) return Jet2(1.0);
  if (p == 1.0) return a;
  if (p == 2.0) return a * a;
  const double f0 = std::pow(a.v, p);
  const double f1 = p * std::pow(a.v, p - 1.0);
  const double f2 = p * (p - 1.0) * std::pow(a.v, p - 2.0);
  return jet_detail::chain(a, f0, f1, f2);
}

inline Jet2 pow(const Jet2& a, const Jet2& b) {
  if (b.n == 0) return pow(a, b.v);
  return exp(b * log(a));
}

using JetMatrix = DenseTensor<Jet2, 2>;
using JetTensor3 = DenseTensor<Jet2, 3>;

/// Inverse of a jet-valued matrix by Gauss-Jordan elimination with partial
/// pivoting on the values. Derivatives propagate through the arithmetic.
JetMatrix jet_inverse(const JetMatrix& a);

}  // namespace flatlab
