#include "doctest.h"

#include "fixtures.hpp"
#include "flatlab/algebra.hpp"
#include "flatlab/curvature.hpp"
#include "flatlab/rng.hpp"

using namespace flatlab;

namespace {

Matrix2 random_spd(std::uint64_t seed, int n) {
  Rng rng(seed);
  Matrix2 a(n);
  for (double& v : a.flat()) v = rng.uniform(-1.0, 1.0);
  Matrix2 g(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = (i == j) ? 0.5 : 0.0;
      for (int k = 0; k < n; ++k) s += a(k, i) * a(k, j);
      g(i, j) = s;
    }
  return g;
}

Matrix2 matmul(const Matrix2& a, const Matrix2& b) {
  const int n = a.dim();
  Matrix2 c(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) c(i, j) += a(i, k) * b(k, j);
  return c;
}

Array4 random_array4(std::uint64_t seed, int n) {
  Rng rng(seed);
  Array4 x(n);
  for (double& v : x.flat()) v = rng.uniform(-1.0, 1.0);
  return x;
}

Tensor4Lower constant_curvature_2d(double k) {
  Tensor4Lower r(2);
  r(0, 1, 0, 1) = k;
  r(1, 0, 1, 0) = k;
  r(0, 1, 1, 0) = -k;
  r(1, 0, 0, 1) = -k;
  return r;
}

}  // namespace

TEST_CASE("invert_spd") {
  CHECK(max_abs_diff(invert_spd(Matrix2::identity(3)), Matrix2::identity(3)) == 0.0);

  Matrix2 d(2);
  d(0, 0) = 4.0;
  d(1, 1) = 1.0;
  const Matrix2 di = invert_spd(d);
  CHECK(di(0, 0) == doctest::Approx(0.25));
  CHECK(di(1, 1) == doctest::Approx(1.0));

  const Matrix2 a = random_spd(7, 3);
  CHECK(max_abs_diff(matmul(a, invert_spd(a)), Matrix2::identity(3)) < 1e-12);

  Matrix2 bad = Matrix2::identity(2);
  bad(1, 1) = -1.0;
  CHECK_THROWS_AS(invert_spd(bad), Error);
  try {
    invert_spd(bad);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotPositiveDefinite);
  }
}

TEST_CASE("leading minors decide positive definiteness") {
  Matrix2 g(2);
  g(0, 0) = 1.0;
  g(0, 1) = g(1, 0) = 2.0;
  g(1, 1) = 1.0;  // det = -3
  const auto m = leading_minors(g);
  CHECK(m[0] == doctest::Approx(1.0));
  CHECK(m[1] == doctest::Approx(-3.0));
  CHECK_FALSE(is_positive_definite(g));
  CHECK(is_positive_definite(random_spd(3, 4)));
}

TEST_CASE("connection_norm_sq") {
  const Matrix2 id1 = Matrix2::identity(1);
  Tensor3 g1(1);
  CHECK(connection_norm_sq(id1, id1, g1) == 0.0);
  g1(0, 0, 0) = 2.0;
  CHECK(connection_norm_sq(id1, id1, g1) == doctest::Approx(4.0));

  const Matrix2 id2 = Matrix2::identity(2);
  Tensor3 g2(2);
  g2(0, 0, 0) = 1.0;
  g2(1, 1, 1) = 3.0;
  CHECK(connection_norm_sq(id2, id2, g2) == doctest::Approx(10.0));
  CHECK_THROWS_AS(connection_norm_sq(id2, id1, g2), Error);
}

TEST_CASE("riemann norms") {
  const Matrix2 id = Matrix2::identity(2);
  CHECK(riemann_norm_sq_lower(id, Tensor4Lower(2)) == 0.0);
  CHECK(riemann_norm_sq_lower(id, constant_curvature_2d(1.5)) == doctest::Approx(4 * 1.5 * 1.5));

  // Unit sphere at theta = pi/2: curvature 1, so the norm is 4.
  const FieldSpec s = fixtures::sphere(1.0);
  const Point x{fixtures::kPi / 2, 0.5};
  const MetricJet2 jet = eval_metric_jet2(s, x, FDConfig::defaults(s.box));
  const Tensor4Lower r = riemann_lower(jet);
  CHECK(riemann_norm_sq_lower(invert_spd(jet.g), r) == doctest::Approx(4.0).epsilon(1e-6));

  // Mixed and lowered norms agree after lowering, on 100 random metrics.
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const FieldSpec f = random_spd_metric(seed, 2, ChartBox::cube(3, -1.0, 1.0));
    const MetricJet2 j = eval_metric_jet2(f, f.box.center(), FDConfig::defaults(f.box));
    const Matrix2 gi = invert_spd(j.g);
    const Tensor4Mixed rm = riemann_mixed(christoffel(j));
    const double mixed = riemann_norm_sq_mixed(j.g, gi, rm);
    const double lower = riemann_norm_sq_lower(gi, lower_first_index(j.g, rm));
    CHECK(mixed >= 0.0);
    CHECK(std::abs(mixed - lower) <= 1e-10 * std::max(1.0, lower));
  }

  const Matrix2 c = fixtures::skew_metric(3);
  const FieldSpec flat = fixtures::constant_metric(c);
  const MetricJet2 jf = eval_metric_jet2(flat, flat.box.center(), FDConfig::defaults(flat.box));
  CHECK(riemann_norm_sq_mixed(jf.g, invert_spd(jf.g), riemann_mixed(christoffel(jf))) == 0.0);
}

TEST_CASE("ricci_norm_sq") {
  const Matrix2 id = Matrix2::identity(2);
  CHECK(ricci_norm_sq(id, Matrix2(2)) == 0.0);
  Matrix2 ric(2);
  ric(0, 0) = 1.0;
  ric(1, 1) = 2.0;
  CHECK(ricci_norm_sq(id, ric) == doctest::Approx(5.0));

  const FieldSpec s = fixtures::sphere(1.0);
  const MetricJet2 jet = eval_metric_jet2(s, Point{1.0, 0.3}, FDConfig::defaults(s.box));
  const Matrix2 rc = ricci_from_mixed(riemann_mixed(christoffel(jet)));
  CHECK(ricci_norm_sq(invert_spd(jet.g), rc) == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("projection P") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix2 x(4);
    for (double& v : x.flat()) v = rng.uniform(-1.0, 1.0);
    const Matrix2 px = apply_P(x);
    CHECK(max_abs_diff(apply_P(px), px) < 1e-14);

    Matrix2 sym(4), anti(4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        sym(i, j) = x(i, j) + x(j, i);
        anti(i, j) = x(i, j) - x(j, i);
      }
    CHECK(max_abs(apply_P(sym)) < 1e-14);
    CHECK(max_abs_diff(apply_P(anti), anti) < 1e-14);
  }
}

TEST_CASE("operator T on four-index arrays") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Array4 x = random_array4(seed, 3);
    const Array4 tx = apply_T4(x);
    CHECK(max_abs_diff(apply_T4(tx), scaled(tx, 2.0)) < 1e-13);

    Array4 sym(3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k)
          for (int l = 0; l < 3; ++l) sym(i, j, k, l) = x(i, j, k, l) + x(j, i, k, l);
    CHECK(max_abs(apply_T4(sym)) < 1e-14);

    // Doubly antisymmetric inputs are the image of T, scaled by 2.
    CHECK(max_abs_diff(apply_T4(tx), scaled(tx, 2.0)) < 1e-13);
  }
}

TEST_CASE("census") {
  auto check = [](FlatnessSystem s, int n, long eq, long unk, Determinacy d) {
    const Census c = system_census(s, n);
    CHECK(c.equations == eq);
    CHECK(c.unknowns == unk);
    CHECK(c.determinacy == d);
  };
  check(FlatnessSystem::CurvFlatConn, 7, 196, 196, Determinacy::Determined);
  check(FlatnessSystem::CurvFlatMetric, 3, 6, 6, Determinacy::Determined);
  check(FlatnessSystem::ConnFlat1, 1, 1, 1, Determinacy::Determined);
  check(FlatnessSystem::ConnFlat1, 2, 6, 3, Determinacy::Over);
  check(FlatnessSystem::CurvFlatConn, 6, 105, 126, Determinacy::Under);
  check(FlatnessSystem::CurvFlatConn, 8, 336, 288, Determinacy::Over);
  check(FlatnessSystem::RicciFlatConn, 1, 1, 1, Determinacy::Determined);
  check(FlatnessSystem::RicciFlatConn, 2, 3, 6, Determinacy::Under);
  CHECK(to_string(Determinacy::Determined) == "determined");
  CHECK(flatness_system_from_string("CurvFlatConn") == FlatnessSystem::CurvFlatConn);
  CHECK_THROWS_AS(flatness_system_from_string("nope"), Error);
}
