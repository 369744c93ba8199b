#include "doctest.h"

#include <cmath>

#include "fixtures.hpp"
#include "flatlab/algebra.hpp"
#include "flatlab/flatness.hpp"

using namespace flatlab;

namespace {

ConnectionJet1 constant_connection(const Tensor3& c) {
  return ConnectionJet1{Point(static_cast<std::size_t>(c.dim()), 0.0), c, Array4(c.dim())};
}

}  // namespace

TEST_CASE("classify_flatness") {
  const FieldSpec flat = fixtures::constant_metric(fixtures::skew_metric(3));
  const FlatnessReport f = classify_flatness(flat, {}, kFlatTolAnalytic, FDConfig::defaults(flat.box));
  CHECK(f.connection_flat);
  CHECK(f.curvature_flat);
  CHECK(f.ricci_flat);
  CHECK(f.scalar_flat);
  CHECK(f.points_checked == 64);

  const FieldSpec sphere = fixtures::sphere(1.0);
  const FlatnessReport s = classify_flatness(sphere, {}, kFlatTolAnalytic, FDConfig::defaults(sphere.box));
  CHECK_FALSE(s.connection_flat);
  CHECK_FALSE(s.curvature_flat);
  CHECK_FALSE(s.ricci_flat);
  CHECK_FALSE(s.scalar_flat);
  REQUIRE(s.max_scalar.has_value());
  CHECK(*s.max_scalar == doctest::Approx(2.0));

  const FieldSpec sol =
      fixtures::soliton_connection(fixtures::soliton_coefficients({-1.0}), 1.5, 0.0, 1.0);
  const FlatnessReport c = classify_flatness(sol, {}, kFlatTolAnalytic, FDConfig::defaults(sol.box));
  CHECK_FALSE(c.connection_flat);
  CHECK(c.curvature_flat);
  CHECK(c.ricci_flat);
  CHECK(c.scalar_flat);
  CHECK_FALSE(c.max_scalar.has_value());

  const Point outside{5.0, 5.0, 5.0};
  CHECK_THROWS_AS(classify_flatness(flat, std::span<const Point>(&outside, 1), 1e-8,
                                    FDConfig::defaults(flat.box)),
                  Error);
}

TEST_CASE("implication chain over a small catalog") {
  const std::vector<FieldSpec> catalog = {
      fixtures::constant_metric(Matrix2::identity(2)),
      fixtures::sphere(1.0),
      fixtures::conformal_exp(3, {0.0, 0.2, 0.1, -0.1}),
      random_spd_metric(2, 1, ChartBox::cube(3, -1.0, 1.0, 3)),
      fixtures::soliton_connection(fixtures::soliton_coefficients({-0.3, -0.7}), 1.0, 0.0, 1.0),
  };
  for (const FieldSpec& s : catalog) {
    const FlatnessReport r = classify_flatness(s, {}, kFlatTolAnalytic, FDConfig::defaults(s.box));
    if (r.curvature_flat) CHECK(r.ricci_flat);
    if (r.ricci_flat) CHECK(r.scalar_flat);
    const int n = s.dim();
    CHECK(r.max_ricci <= n * r.max_curvature + 1e-15);
  }
}

TEST_CASE("riccati residuals") {
  const int n1 = 1;
  ConnectionJet1 zero{Point{0.0}, Tensor3(n1), Array4(n1)};
  CHECK(max_abs(riccati_residual_plus(zero)) == 0.0);
  CHECK(max_abs(riccati_residual_minus(zero)) == 0.0);

  const double shift = 2.0;
  for (auto [u, sign] : {std::pair{-1.0, RiccatiSign::Plus}, std::pair{1.0, RiccatiSign::Minus}}) {
    const FieldSpec s =
        fixtures::soliton_connection(fixtures::soliton_coefficients({u}), shift, 0.0, 1.0);
    for (const Point& x : s.box.nodes()) {
      const ConnectionJet1 cj = eval_connection_jet1(s, x, FDConfig::defaults(s.box));
      CHECK(max_abs(riccati_residual(cj, sign)) < 1e-14);
      // The other system is not solved by the same field.
      const RiccatiSign other = sign == RiccatiSign::Plus ? RiccatiSign::Minus : RiccatiSign::Plus;
      CHECK(max_abs(riccati_residual(cj, other)) > 1e-2);
    }
  }

  Tensor3 c(2);
  c(0, 0, 0) = 1.0;
  c(1, 0, 1) = c(1, 1, 0) = 0.5;
  const ConnectionJet1 cc = constant_connection(c);
  const Array4 rp = riccati_residual_plus(cc);
  // Derivative term vanishes, so the residual is the product C^l_pn C^n_is.
  CHECK(rp(0, 0, 0, 0) == doctest::Approx(1.0));
  CHECK(rp(0, 1, 0, 1) == doctest::Approx(0.5 * 0.5));
  CHECK(max_abs(riccati_residual_minus(cc)) > 0.0);
}

TEST_CASE("riccati solutions are curvature flat") {
  ConnectionJet1 zero{Point{0.0, 0.0}, Tensor3(2), Array4(2)};
  const RiccatiFlatness z = riccati_implies_flat(zero, RiccatiSign::Plus);
  CHECK(z.riccati_norm == 0.0);
  CHECK(z.curvature_norm == 0.0);

  for (auto [u, sign] : {std::pair{std::vector<double>{-0.3, -0.7}, RiccatiSign::Plus},
                         std::pair{std::vector<double>{0.4, 0.6}, RiccatiSign::Minus},
                         std::pair{std::vector<double>{-0.5, 0.2, -0.7}, RiccatiSign::Plus}}) {
    const FieldSpec s = fixtures::soliton_connection(fixtures::soliton_coefficients(u), 1.0, 0.0, 1.0);
    for (const Point& x : s.box.nodes()) {
      const RiccatiFlatness r =
          riccati_implies_flat(eval_connection_jet1(s, x, FDConfig::defaults(s.box)), sign);
      CHECK(r.riccati_norm < 1e-8);
      CHECK(r.curvature_norm < 1e-8);
    }
  }

  const FieldSpec rnd = random_connection(3, 2, ChartBox::cube(2, -1.0, 1.0));
  const RiccatiFlatness g = riccati_implies_flat(
      eval_connection_jet1(rnd, Point{0.1, 0.2}, FDConfig::defaults(rnd.box)), RiccatiSign::Plus);
  CHECK(g.riccati_norm > 1e-3);
}

TEST_CASE("split form of the plus system") {
  Tensor3 c(2);
  c(0, 1, 1) = 1.0;
  const SplitRiccati s = split_riccati_residual(constant_connection(c));
  CHECK(s.derivative == 0.0);
  CHECK(s.product == 0.0);
  c(0, 0, 0) = 1.0;
  CHECK(split_riccati_residual(constant_connection(c)).product > 0.0);
}

TEST_CASE("perturbation of a riccati solution") {
  const double x = 0.3;
  const FDConfig fd = FDConfig::defaults(ChartBox::cube(1, 0.0, 1.0));
  const FieldSpec a = fixtures::soliton_connection(fixtures::soliton_coefficients({-1.0}), 1.0, 0.0, 1.0);
  const ConnectionJet1 ga = eval_connection_jet1(a, Point{x}, fd);

  ConnectionJet1 zero_t{Point{x}, Tensor3(1), Array4(1)};
  CHECK(max_abs(riccati_perturbation_residual(ga, zero_t)) == 0.0);

  // T = Gamma' - Gamma for a second solution with a different shift.
  const FieldSpec b = fixtures::soliton_connection(fixtures::soliton_coefficients({-1.0}), 2.5, 0.0, 1.0);
  const ConnectionJet1 gb = eval_connection_jet1(b, Point{x}, fd);
  ConnectionJet1 t{Point{x}, Tensor3(1), Array4(1)};
  t.gamma(0, 0, 0) = gb.gamma(0, 0, 0) - ga.gamma(0, 0, 0);
  t.dgamma(0, 0, 0, 0) = gb.dgamma(0, 0, 0, 0) - ga.dgamma(0, 0, 0, 0);
  CHECK(max_abs(riccati_perturbation_residual(ga, t)) < 1e-8);

  Tensor3 tc(2);
  tc(0, 0, 0) = 2.0;
  ConnectionJet1 g0{Point{0.0, 0.0}, Tensor3(2), Array4(2)};
  const Array4 r = riccati_perturbation_residual(g0, constant_connection(tc));
  CHECK(r(0, 0, 0, 0) == doctest::Approx(4.0));
}

TEST_CASE("integrability proxy") {
  Tensor3 zero(2);
  const FieldSpec z{ChartBox::cube(2, -1.0, 1.0, 3), 0, field::TabulatedConnection{zero}};
  CHECK(integrability_check(z, RiccatiSign::Plus, {}, FDConfig::defaults(z.box)) == 0.0);

  const FieldSpec one =
      fixtures::soliton_connection(fixtures::soliton_coefficients({-1.0}), 1.0, 0.0, 1.0);
  CHECK(integrability_check(one, RiccatiSign::Plus, {}, FDConfig::defaults(one.box)) < 1e-6);

  const FieldSpec two =
      fixtures::soliton_connection(fixtures::soliton_coefficients({-0.3, -0.7}), 1.0, 0.0, 1.0);
  CHECK(integrability_check(two, RiccatiSign::Plus, {}, FDConfig::defaults(two.box)) < 1e-6);
  const FieldSpec minus =
      fixtures::soliton_connection(fixtures::soliton_coefficients({0.4, 0.6}), 1.0, 0.0, 1.0);
  CHECK(integrability_check(minus, RiccatiSign::Minus, {}, FDConfig::defaults(minus.box)) < 1e-6);
}

TEST_CASE("cone condition") {
  Tensor3 c(2);
  CHECK(cone_condition(c) == 0.0);
  c(0, 1, 1) = 1.0;
  CHECK(cone_condition(c) == 0.0);
  Tensor3 d(2);
  d(0, 0, 0) = 1.0;
  CHECK(cone_condition(d) == 1.0);
}

TEST_CASE("trace factorization of ricci") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const int n = 2 + static_cast<int>(seed % 3);
    const FieldSpec s = random_connection(seed, 2, ChartBox::cube(n, -1.0, 1.0));
    const ConnectionJet1 cj =
        eval_connection_jet1(s, s.box.center(), FDConfig::defaults(s.box));
    const Matrix2 direct = ricci_from_mixed(riemann_mixed(cj));
    for (RiccatiSign sign : {RiccatiSign::Plus, RiccatiSign::Minus}) {
      const TraceFactorization t = ricci_trace_factorization(cj, sign);
      CHECK(max_abs_diff(t.direct_trace, direct) < 1e-12);
      CHECK(max_abs_diff(t.trace_of_projection, direct) < 1e-12);
    }
  }
}

TEST_CASE("curvature prescription") {
  const CurvaturePrescription p = CurvaturePrescription::random(3, 3, 0.1);
  CHECK(max_abs(p.r0) == doctest::Approx(0.1));
  CHECK(symmetry_residuals(p.r0).max() < 1e-16);
  CHECK(max_abs_diff(CurvaturePrescription::project(p.r0), p.r0) < 1e-16);

  const ChartBox box = ChartBox::cube(3, -0.5, 0.5, 5);
  const FieldSpec spec = normal_metric_from_curvature(p, box);
  const Point origin{0.0, 0.0, 0.0};
  const MetricJet2 j = eval_metric_jet2(spec, origin, FDConfig::defaults(box));
  CHECK(max_abs_diff(j.g, Matrix2::identity(3)) == 0.0);
  CHECK(max_abs(j.dg) == 0.0);
  CHECK(max_abs_diff(riemann_lower(j), p.r0) < 1e-12);
  const MetricJet2 jf = eval_metric_jet2(spec, origin, FDConfig::defaults(box),
                                         JetMethod::FiniteDifference);
  CHECK(max_abs_diff(riemann_lower(jf), p.r0) < 5e-4);

  // R0 = 0 gives the Euclidean metric.
  const FieldSpec e = normal_metric_from_curvature(CurvaturePrescription{3, Tensor4Lower(3)}, box);
  CHECK(max_abs_diff(eval_metric_jet2(e, Point{0.3, 0.2, 0.1}, FDConfig::defaults(box)).g,
                     Matrix2::identity(3)) == 0.0);

  // 2D unit curvature: g_11 = 1 - x0^2 / 3.
  Array4 k(2);
  k(0, 1, 0, 1) = 1.0;
  const CurvaturePrescription k1 = CurvaturePrescription::from(scaled(k, 4.0));
  CHECK(k1.r0(0, 1, 0, 1) == doctest::Approx(1.0));
  const FieldSpec s2 = normal_metric_from_curvature(k1, ChartBox::cube(2, -0.5, 0.5));
  const MetricJet2 j2 = eval_metric_jet2(s2, Point{0.3, 0.0}, FDConfig::defaults(s2.box));
  CHECK(j2.g(1, 1) == doctest::Approx(1.0 - 0.09 / 3.0));

  CHECK_THROWS_AS(normal_metric_from_curvature(k1, ChartBox::cube(2, -3.0, 3.0)), Error);
  CHECK_THROWS_AS(normal_metric_from_curvature(k1, ChartBox::cube(2, 0.5, 1.0)), Error);
}

TEST_CASE("gray volume expansion") {
  const ChartBox box2 = ChartBox::cube(2, -0.5, 0.5);
  const FieldSpec flat = normal_metric_from_curvature(CurvaturePrescription{2, Tensor4Lower(2)}, box2);
  CHECK(gray_volume_check(flat, 0.1) == 0.0);

  Array4 k(2);
  k(0, 1, 0, 1) = 1.0;
  const FieldSpec s2 = normal_metric_from_curvature(CurvaturePrescription::from(scaled(k, 4.0)), box2);
  const double e1 = gray_volume_check(s2, 0.1), e2 = gray_volume_check(s2, 0.05);
  CHECK(e1 < 2e-3);
  CHECK(e1 / e2 >= 8.0);

  const FieldSpec s3 = normal_metric_from_curvature(CurvaturePrescription::random(8, 3, 0.1),
                                                    ChartBox::cube(3, -0.5, 0.5));
  CHECK(gray_volume_check(s3, 0.05) / gray_volume_check(s3, 0.025) >= 8.0);
}
