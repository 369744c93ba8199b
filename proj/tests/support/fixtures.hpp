#pragma once

// Field constructors shared by the unit and acceptance tests.

#include <cmath>
#include <numbers>
#include <vector>

#include "flatlab/fields.hpp"
#include "flatlab/variational.hpp"

namespace fixtures {

using namespace flatlab;

inline constexpr double kPi = std::numbers::pi;

/// Round n-sphere of radius r; angles in [0.2, pi - 0.2], last angle in [0, 2].
inline FieldSpec sphere(double r, int n = 2) {
  std::vector<double> lo(static_cast<std::size_t>(n), 0.2), hi(static_cast<std::size_t>(n), kPi - 0.2);
  lo.back() = 0.0;
  hi.back() = 2.0;
  return FieldSpec{ChartBox::make(lo, hi, std::vector<int>(static_cast<std::size_t>(n), 6)), 0,
                   field::RoundSphere{r}};
}

inline FieldSpec constant_metric(const Matrix2& c, double lo = -1.0, double hi = 1.0) {
  return FieldSpec{ChartBox::cube(c.dim(), lo, hi, 4), 0, field::EuclideanConstant{c}};
}

/// A skewed constant SPD metric.
inline Matrix2 skew_metric(int n) {
  Matrix2 c(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) c(i, j) = (i == j) ? 2.0 + 0.5 * i : 0.3 / (1 + i + j);
  return c;
}

/// e^{2 phi} delta with phi = a0 + a.x + sum b x^2.
inline FieldSpec conformal_exp(int n, std::vector<double> coeffs, double lo = -0.5,
                               double hi = 0.5) {
  ScalarProfile prof{ScalarProfile::Kind::Exp, std::move(coeffs)};
  return FieldSpec{ChartBox::cube(n, lo, hi, 5), 0,
                   field::Conformal{Matrix2::identity(n), prof}};
}

inline FieldSpec soliton_connection(const Tensor3& c, double shift, double lo, double hi) {
  return FieldSpec{ChartBox::cube(c.dim(), lo, hi, 5), 0, field::SolitonConnection{c, shift}};
}

/// Gamma^l_ij = u^l f: the plus system holds when sum u = -1, the minus
/// system when sum u = +1.
inline Tensor3 soliton_coefficients(const std::vector<double>& u) {
  const int n = static_cast<int>(u.size());
  Tensor3 c(n);
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) c(l, i, j) = u[static_cast<std::size_t>(l)];
  return c;
}

inline Point midpoint(const FieldSpec& s) { return s.box.center(); }

/// g = (1 + 0.4 sin(k.x + 0.3)) delta, a plane-wave conformal factor.
inline FieldSpec conformal_wave(int n, double lo = -0.5, double hi = 0.5) {
  std::vector<double> coeffs{1.0, 0.4, 0.3};
  for (int a = 0; a < n; ++a) coeffs.push_back(1.0 + a);
  return FieldSpec{ChartBox::cube(n, lo, hi, 5), 0,
                   field::Conformal{Matrix2::identity(n),
                                    ScalarProfile{ScalarProfile::Kind::Trig, coeffs}}};
}

/// Three smooth fields per functional for the first-variation oracle:
/// generic 2D fields, 2D conformal (hence harmonic) charts for the gauged
/// Ricci functionals, and 3D metrics for the total scalar curvature, whose
/// variation vanishes identically in 2D.
inline std::vector<FieldSpec> oracle_fields(const FunctionalId& id) {
  const ChartBox b2 = ChartBox::cube(2, -0.5, 0.5, 5);
  const ChartBox b3 = ChartBox::cube(3, -0.5, 0.5, 5);
  if (id.gauge == Gauge::Harmonic)
    return {conformal_exp(2, {0.1, 0.3, -0.2, 0.2, 0.1}),
            conformal_exp(2, {0.0, -0.2, 0.1, -0.15, 0.25}), conformal_wave(2)};
  if (id.density == Density::TotalScalar && id.variable == Variable::InverseMetric)
    return {random_spd_metric(7, 2, b3), conformal_exp(3, {0.1, 0.3, -0.2, 0.1, 0.2, 0.1, -0.1}),
            random_spd_metric(11, 1, b3)};
  FieldSpec third = id.variable == Variable::Gamma
                        ? random_connection(5, 1, b2)
                        : FieldSpec{b2, 0,
                                    field::Soliton{Matrix2::identity(2), scaled(Matrix2::identity(2), 0.5),
                                                   ScalarProfile{ScalarProfile::Kind::Trig,
                                                                 {0.0, 0.3, 0.1, 2.0}},
                                                   {0.5, 0.7}}};
  return {conformal_exp(2, {0.1, 0.3, -0.2, 0.2, 0.1}), random_spd_metric(3, 2, b2), third};
}

/// 48 cells per axis and two margin cells.
inline GridQuadrature oracle_quadrature(const FieldSpec& s) {
  return GridQuadrature::uniform(s.box, 48, 2);
}

inline std::vector<BumpPerturbation> oracle_bumps(const FunctionalId& id, const GridQuadrature& q,
                                                  int count, std::uint64_t seed = 100) {
  std::vector<BumpPerturbation> out;
  for (int k = 0; k < count; ++k)
    out.push_back(BumpPerturbation::random(id.variable, q.region(), seed + static_cast<std::uint64_t>(k)));
  return out;
}

}  // namespace fixtures
