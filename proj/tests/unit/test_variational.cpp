#include "doctest.h"

#include <cmath>

#include "fixtures.hpp"
#include "flatlab/algebra.hpp"
#include "flatlab/curvature.hpp"
#include "flatlab/rng.hpp"
#include "flatlab/variational.hpp"

using namespace flatlab;

namespace {

FunctionalId fid(const char* s) { return FunctionalId::parse(s); }

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::NumericalFailure;
}

// Midpoint sum of <E, B> over the bump support for an arbitrary pointwise
// metric-variable residual.
template <class F>
double pair_with(const GridQuadrature& q, const BumpPerturbation& b, F&& residual) {
  double sum = 0.0;
  for (const Point& x : q.points()) {
    if (!b.in_support(x)) continue;
    const Matrix2 e = residual(x);
    const std::vector<double> v = b.values(x);
    for (int i = 0; i < e.dim(); ++i)
      for (int j = 0; j < e.dim(); ++j) sum += e(i, j) * v[i * e.dim() + j];
  }
  return sum * q.cell_volume();
}

}  // namespace

TEST_CASE("functional ids") {
  CHECK(residual_catalog().size() == 12);
  for (const FunctionalId& id : residual_catalog()) {
    CHECK(id.has_residual());
    CHECK(FunctionalId::parse(id.name()) == id);
  }
  CHECK(fid("RicciNorm/Metric/harmonic").gauge == Gauge::Harmonic);
  CHECK(kind_of([] { fid("RicciNorm/Metric"); }) == ErrorKind::ConfigInvalid);
  CHECK(kind_of([] { fid("ConnNorm/Gamma/harmonic"); }) == ErrorKind::ConfigInvalid);
  CHECK(kind_of([] { fid("Torsion/Metric"); }) == ErrorKind::ConfigInvalid);
  CHECK(kind_of([] { fid("ConnNorm"); }) == ErrorKind::ConfigInvalid);
  CHECK_FALSE(fid("ScalarSquare/Metric").has_residual());
  CHECK_FALSE(fid("TotalScalar/Metric").has_residual());
}

TEST_CASE("quadrature grid") {
  const ChartBox box = ChartBox::cube(2, 0.0, 1.0, 10);
  const GridQuadrature q = GridQuadrature::uniform(box, 10, 2);
  CHECK(q.points().size() == 36);
  CHECK(q.cell_volume() == doctest::Approx(0.01));
  CHECK(q.region().lower[0] == doctest::Approx(0.2));
  CHECK(q.points()[1][1] == doctest::Approx(0.35));  // first axis slowest
  CHECK(kind_of([&] { q.require_margin(FDConfig{0.01, 0.2}); }) == ErrorKind::ConfigInvalid);
  CHECK_NOTHROW(GridQuadrature::make(box, FDConfig{1e-4, 1e-3}).validate());
}

TEST_CASE("bump perturbations") {
  const ChartBox region = ChartBox::cube(2, -0.4, 0.4);
  const BumpPerturbation b = BumpPerturbation::random(Variable::Metric, region, 3);
  CHECK(b.component_count() == 4);
  for (int a = 0; a < 2; ++a) {
    CHECK(b.lower[a] >= region.lower[a]);
    CHECK(b.upper[a] <= region.upper[a]);
  }
  const Point mid{(b.lower[0] + b.upper[0]) / 2, (b.lower[1] + b.upper[1]) / 2};
  CHECK(b.window(mid) == doctest::Approx(1.0));
  const std::vector<double> v = b.values(mid);
  CHECK(v[1] == v[2]);
  CHECK(b.window(Point{b.lower[0], mid[1]}) == 0.0);

  // Window derivatives against central differences.
  const Point x{b.lower[0] + 0.3 * (b.upper[0] - b.lower[0]), mid[1] + 0.01};
  const std::vector<Jet2> j = b.jets(x);
  const double h = 1e-5;
  const Point xp{x[0] + h, x[1]}, xm{x[0] - h, x[1]};
  CHECK(j[0].d[0] == doctest::Approx((b.values(xp)[0] - b.values(xm)[0]) / (2 * h)).epsilon(1e-6));
  CHECK(j[0].h[0] == doctest::Approx((b.values(xp)[0] - 2 * j[0].v + b.values(xm)[0]) / (h * h))
                         .epsilon(1e-4));

  const BumpPerturbation c = BumpPerturbation::random(Variable::Gamma, region, 3);
  CHECK(c.component_count() == 8);
  const std::vector<double> cv = c.values(mid);
  CHECK(cv[0 * 4 + 0 * 2 + 1] == cv[0 * 4 + 1 * 2 + 0]);
}

TEST_CASE("point densities") {
  const FieldSpec flat = fixtures::constant_metric(fixtures::skew_metric(3));
  const FDConfig fd = FDConfig::defaults(flat.box);
  for (const char* s : {"ConnNorm/Metric", "RiemannNorm/Metric", "RicciNorm/Metric/harmonic",
                        "ScalarSquare/InverseMetric", "TotalScalar/InverseMetric"}) {
    const PointGeometry p = point_geometry(flat, Variable::Metric, Point{0.1, 0.2, 0.3}, fd);
    CHECK(std::abs(density(fid(s), p)) < 1e-14);
  }

  const FieldSpec sphere = fixtures::sphere(1.0);
  const PointGeometry p =
      point_geometry(sphere, Variable::Metric, Point{fixtures::kPi / 2, 1.0}, fd);
  CHECK(lagrangian_density(fid("TotalScalar/InverseMetric"), p) == doctest::Approx(2.0));
  CHECK(lagrangian_density(fid("ScalarSquare/InverseMetric"), p) == doctest::Approx(4.0));
  CHECK(lagrangian_density(fid("RicciNorm/Gamma"), p) == doctest::Approx(2.0));
  CHECK(lagrangian_density(fid("RiemannNorm/Metric"), p) == doctest::Approx(4.0));
}

TEST_CASE("total scalar curvature of a sphere band") {
  // Unit sphere, theta in [pi/2 - 1/2, pi/2 + 1/2], phi in [0, 1]:
  // integral of 2 sin(theta) = 4 sin(1/2).
  const FieldSpec s = fixtures::sphere(1.0);
  const double exact = 4.0 * std::sin(0.5);
  const ChartBox band =
      ChartBox::make({fixtures::kPi / 2 - 0.5, 0.0}, {fixtures::kPi / 2 + 0.5, 1.0}, {3, 3});
  const FunctionalId id = fid("TotalScalar/InverseMetric");
  double prev = 0.0;
  for (int k : {32, 64}) {
    const double err = std::abs(functional(id, s, GridQuadrature::uniform(band, k)) - exact);
    if (k == 64) {
      CHECK(err / exact < 1e-3);
      CHECK(prev / err >= 3.5);
    }
    prev = err;
  }
}

TEST_CASE("deviation functionals are non-negative and vanish on flat fields") {
  const std::vector<const char*> ids = {"ConnNorm/Metric", "RiemannNorm/Metric",
                                        "RicciNorm/Gamma", "ScalarSquare/InverseMetric"};
  const FieldSpec flat = fixtures::constant_metric(fixtures::skew_metric(2), -0.5, 0.5);
  for (const char* s : ids) {
    CHECK(std::abs(functional(fid(s), flat, GridQuadrature::uniform(flat.box, 8))) < 1e-14);
    for (const FieldSpec& f : fixtures::oracle_fields(fid("ConnNorm/Metric"))) {
      INFO(s, " ", f.kind_name());
      CHECK(functional(fid(s), f, GridQuadrature::uniform(f.box, 8)) >= 0.0);
    }
  }
}

TEST_CASE("residuals vanish on flat metrics") {
  for (const FieldSpec& flat : {fixtures::constant_metric(Matrix2::identity(2)),
                                fixtures::constant_metric(fixtures::skew_metric(3))}) {
    const FDConfig fd = FDConfig::defaults(flat.box);
    for (const FunctionalId& id : residual_catalog()) {
      INFO(id.name());
      CHECK(el_residual(id, flat, flat.box.center(), fd).max_abs() < 1e-8);
    }
  }
}

TEST_CASE("closed-form residuals") {
  const FieldSpec sphere = fixtures::sphere(1.0);
  const FDConfig fd = FDConfig::defaults(sphere.box);
  const Point x{1.1, 0.7};
  const MetricJet2 j = eval_metric_jet2(sphere, x, fd);

  // 2 R (Ric - R g / 4) = 2g on the unit sphere.
  const ElResidual e = el_residual(fid("ScalarSquare/InverseMetric"), sphere, x, fd);
  CHECK(max_abs_diff(e.matrix, scaled(j.g, 2.0)) < 1e-8);

  // Ric - R g / 2 vanishes identically in 2D.
  CHECK(el_residual(fid("TotalScalar/InverseMetric"), sphere, x, fd).max_abs() < 1e-8);

  const FieldSpec c = fixtures::constant_metric(fixtures::skew_metric(2));
  CHECK(el_residual(fid("ConnNorm/InverseMetric"), c, Point{0.3, -0.2}, fd).max_abs() == 0.0);

  const FieldSpec off = random_spd_metric(3, 2, ChartBox::cube(2, -0.5, 0.5));
  CHECK(kind_of([&] {
          el_residual(fid("RicciNorm/Metric/harmonic"), off, Point{0.1, 0.1}, fd);
        }) == ErrorKind::GaugeViolation);
  CHECK(kind_of([&] { el_residual(fid("ScalarSquare/Metric"), off, Point{0.1, 0.1}, fd); }) ==
        ErrorKind::Unsupported);
}

TEST_CASE("first variation") {
  const FieldSpec flat = fixtures::constant_metric(Matrix2::identity(2), -0.5, 0.5);
  const GridQuadrature q = GridQuadrature::uniform(flat.box, 24, 2);
  const FDConfig fd = FDConfig::defaults(flat.box);
  for (const FunctionalId& id : residual_catalog()) {
    if (id.density == Density::TotalScalar) continue;  // not a deviation
    const BumpPerturbation b = BumpPerturbation::random(id.variable, q.region(), 7);
    INFO(id.name());
    // The central difference carries an eps^2 cubic term; keep it below 1e-8.
    CHECK(std::abs(gateaux_derivative(id, flat, b, q, 1e-5, fd)) < 1e-8);
  }

  // Ric - R g / 2 against the numerical variation of the total scalar curvature.
  const FunctionalId ts = fid("TotalScalar/InverseMetric");
  const FieldSpec s = fixtures::oracle_fields(ts)[1];
  const GridQuadrature q3 = fixtures::oracle_quadrature(s);
  const FDConfig fd3 = FDConfig::defaults(s.box);
  const BumpPerturbation b = fixtures::oracle_bumps(ts, q3, 1)[0];
  const double gd = gateaux_derivative(ts, s, b, q3, 1e-3, fd3);
  CHECK(relative_mismatch(gd, residual_pairing(ts, s, b, q3, fd3)) < 0.02);
  CHECK(relative_mismatch(gd, gateaux_derivative(ts, s, b, q3, 5e-4, fd3)) < 1e-5);

  CHECK(relative_mismatch(1.0, 1.01) == doctest::Approx(0.01 / 1.01));
  CHECK(relative_mismatch(1e-10, -1e-10) == doctest::Approx(2e-10));
}

TEST_CASE("bump support must stay inside the integration region") {
  const FieldSpec s = fixtures::constant_metric(Matrix2::identity(2), -0.5, 0.5);
  const GridQuadrature q = GridQuadrature::uniform(s.box, 16, 2);
  const BumpPerturbation b =
      BumpPerturbation::random(Variable::Metric, ChartBox::cube(2, -0.5, 0.5), 1);
  CHECK(kind_of([&] {
          gateaux_derivative(fid("ConnNorm/Metric"), s, b, q, 1e-3, FDConfig::defaults(s.box));
        }) == ErrorKind::OutOfDomain);
}

TEST_CASE("residuals that agree with the numerical first variation") {
  for (const char* name : {"ConnNorm/Gamma", "TotalScalar/Gamma"}) {
    const FunctionalId id = fid(name);
    for (const FieldSpec& s : fixtures::oracle_fields(id)) {
      const GridQuadrature q = fixtures::oracle_quadrature(s);
      const OracleMatch m = el_oracle_match(id, s, fixtures::oracle_bumps(id, q, 3), q, 1e-3,
                                            FDConfig::defaults(s.box));
      INFO(name, " ", s.kind_name());
      CHECK(m.worst < 1e-4);
    }
  }
}

TEST_CASE("curvature-norm connection residuals are off by a factor of two") {
  // The displayed Riemann- and Ricci-norm residuals in the connection are
  // half the numerical variation; rescaled they match to FD accuracy.
  for (const char* name : {"RiemannNorm/Gamma", "RicciNorm/Gamma"}) {
    const FunctionalId id = fid(name);
    const FieldSpec s = fixtures::oracle_fields(id)[0];
    const GridQuadrature q = fixtures::oracle_quadrature(s);
    const OracleMatch m = el_oracle_match(id, s, fixtures::oracle_bumps(id, q, 3), q, 1e-3,
                                          FDConfig::defaults(s.box));
    INFO(name);
    CHECK(m.fitted_scale == doctest::Approx(2.0).epsilon(1e-4));
    CHECK(m.scaled_worst < 1e-4);
    CHECK(m.worst == doctest::Approx(0.5).epsilon(1e-3));
  }
}

TEST_CASE("connection-norm metric residual misses the dependence of the connection on g") {
  const FunctionalId id = fid("ConnNorm/Metric");
  const FieldSpec s = fixtures::oracle_fields(id)[0];
  const GridQuadrature q = fixtures::oracle_quadrature(s);
  const FDConfig fd = FDConfig::defaults(s.box);
  const std::vector<BumpPerturbation> bumps = fixtures::oracle_bumps(id, q, 3);
  CHECK(el_oracle_match(id, s, bumps, q, 1e-3, fd).worst > 0.05);

  // Adding -2 g^jq g^kr Gamma^m_jk Gamma^n_qr sqrt(g) restores agreement.
  for (const BumpPerturbation& b : bumps) {
    const double completed = pair_with(q, b, [&](const Point& x) {
      const PointGeometry p = point_geometry(s, Variable::Metric, x, fd);
      Matrix2 e = el_residual(id, s, x, fd).matrix;
      const int n = e.dim();
      const Tensor3& G = p.conn.gamma;
      for (int m = 0; m < n; ++m)
        for (int nn = 0; nn < n; ++nn)
          for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
              for (int a = 0; a < n; ++a)
                for (int r = 0; r < n; ++r)
                  e(m, nn) -= 2.0 * p.g_inv(j, a) * p.g_inv(k, r) * G(m, j, k) * G(nn, a, r) *
                              p.sqrt_det;
      return e;
    });
    CHECK(relative_mismatch(gateaux_derivative(id, s, b, q, 1e-3, fd), completed) < 1e-4);
  }
}

TEST_CASE("einstein constraint and scalar-square alternatives") {
  const FieldSpec sphere = fixtures::sphere(2.0, 3);
  const FDConfig fd = FDConfig::defaults(sphere.box);
  const Point x{1.0, 1.2, 0.5};
  CHECK(max_abs(einstein_constraint_residual(sphere, x, fd)) < 1e-8);

  const FieldSpec r = random_spd_metric(5, 2, ChartBox::cube(3, -0.5, 0.5));
  const Point y{0.1, -0.2, 0.15};
  const Matrix2 e = einstein_constraint_residual(r, y, fd);
  const MetricJet2 j = eval_metric_jet2(r, y, fd);
  const Matrix2 gi = invert_spd(j.g);
  double trace = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) trace += gi(a, b) * e(a, b);
  CHECK(std::abs(trace) < 1e-10);
  CHECK(max_abs(e) > 1e-3);

  // Round sphere radius 2 in 3D: R = 6/4, Ric = g/2, |Ric| = sqrt(3)/2.
  const ScalarSquareAlternatives alt = scalar_square_alternatives(sphere, x, fd);
  CHECK(alt.abs_scalar == doctest::Approx(1.5));
  CHECK(alt.ricci_norm == doctest::Approx(std::sqrt(3.0) / 2));
}

TEST_CASE("connection-norm inverse-metric hessian") {
  const FieldSpec s = random_spd_metric(2, 1, ChartBox::cube(3, -0.5, 0.5));
  const MetricJet2 j = eval_metric_jet2(s, Point{0.1, 0.2, 0.3}, FDConfig::defaults(s.box));
  const Array4 h = connection_norm_inverse_hessian(j.g, invert_spd(j.g), Tensor3(3));
  CHECK(max_abs(h) == 0.0);
  CHECK_THROWS_AS(connection_norm_inverse_hessian(j.g, invert_spd(j.g), Tensor3(2)), Error);

  // With the connection held at zero the density is flat in g^-1, so sampled
  // second differences vanish as well.
  const Matrix2 gi = invert_spd(j.g);
  Rng rng(8);
  for (int k = 0; k < 20; ++k) {
    Matrix2 d(3);
    for (int a = 0; a < 3; ++a)
      for (int b = a; b < 3; ++b) d(a, b) = d(b, a) = rng.uniform(-1.0, 1.0);
    auto L = [&](double t) {
      const Matrix2 gt = axpy(gi, t, d);
      return connection_norm_sq(invert_spd(gt), gt, Tensor3(3));
    };
    const double hh = 1e-3;
    CHECK(std::abs((L(hh) - 2 * L(0) + L(-hh)) / (hh * hh)) < 1e-8);
  }
}

TEST_CASE("flat members are local minima of the connection norm") {
  const FieldSpec base = fixtures::constant_metric(fixtures::skew_metric(2), -0.5, 0.5);
  const FamilySpec fam = FamilySpec::polynomial(base);
  CHECK(fam.parameter_count() == 9);
  const GridQuadrature q = GridQuadrature::uniform(base.box, 8);
  const std::vector<double> theta(9, 0.0);
  Rng rng(31);
  for (int k = 0; k < 20; ++k) {
    std::vector<double> d(9);
    for (double& v : d) v = rng.uniform(-1.0, 1.0);
    CHECK(second_difference(fid("ConnNorm/Metric"), fam, theta, d, 1e-3, q) >= -1e-9);
  }
}

TEST_CASE("families") {
  const FieldSpec base = fixtures::constant_metric(Matrix2::identity(2));
  const FamilySpec c = FamilySpec::conformal(base, {{0, 0, 0, 1, 1}});
  CHECK(c.parameter_count() == 1);
  const std::vector<double> t{0.5};
  const MetricJet2 j = eval_metric_jet2(c.at(t), Point{1.0, 0.0}, FDConfig::defaults(base.box));
  CHECK(j.g(0, 0) == doctest::Approx(std::exp(1.0)));

  const FamilySpec p = FamilySpec::polynomial(base);
  std::vector<double> tp(9, 0.0);
  tp[0] = 0.25;  // g_11 += 0.25 x1^2
  const MetricJet2 jp =
      eval_metric_jet2(p.at(tp), Point{1.0, 0.5}, FDConfig::defaults(base.box));
  CHECK(jp.g(0, 0) == doctest::Approx(1.25));
  CHECK(jp.g(1, 1) == doctest::Approx(1.0));
  CHECK_THROWS_AS(c.at(tp), Error);
  CHECK(FamilySpec::kind_from_string("polynomial") == FamilySpec::Kind::PolynomialCoefficient);
  CHECK_THROWS_AS(FamilySpec::kind_from_string("spline"), Error);
  CHECK_THROWS_AS(FamilySpec::polynomial(fixtures::sphere(1.0)).validate(), Error);
}

TEST_CASE("minimizer") {
  const FieldSpec base = fixtures::constant_metric(Matrix2::identity(2));
  const FamilySpec fam = FamilySpec::conformal(base, {{0, 0, 0, 1, 1}});
  const GridQuadrature q = GridQuadrature::uniform(base.box, 16);
  const FunctionalId id = fid("RiemannNorm/Metric");

  const std::vector<double> t0{0.3};
  const MinimizeResult r = minimize_deviation(id, fam, t0, q);
  CHECK(r.converged);
  CHECK(r.iterations <= 200);
  CHECK(r.trace.back() < 1e-7);
  CHECK(std::abs(r.theta[0]) < 1e-4);
  for (std::size_t k = 1; k < r.trace.size(); ++k) CHECK(r.trace[k] <= r.trace[k - 1]);

  const std::vector<double> zero{0.0};
  const MinimizeResult z = minimize_deviation(id, fam, zero, q);
  CHECK(z.converged);
  CHECK(z.iterations == 0);
  CHECK(z.trace.size() == 1);

  // Polynomial family seeded near the flat member.
  const FieldSpec pb = fixtures::constant_metric(Matrix2::identity(2), -0.5, 0.5);
  const FamilySpec poly = FamilySpec::polynomial(pb);
  const GridQuadrature pq = GridQuadrature::uniform(pb.box, 12);
  std::vector<double> p0(9);
  for (int i = 0; i < 9; ++i) p0[i] = 0.01 * ((i * 7) % 5 - 2);
  const FunctionalId cn = fid("ConnNorm/Metric");
  const MinimizeResult rp = minimize_deviation(cn, poly, p0, pq);
  for (std::size_t k = 1; k < rp.trace.size(); ++k) CHECK(rp.trace[k] <= rp.trace[k - 1]);
  const FieldSpec fin = poly.at(rp.theta);
  double gmax = 0.0;
  for (const Point& x : pq.points())
    gmax = std::max(gmax, max_abs(point_geometry(fin, Variable::Metric, x,
                                                 FDConfig::defaults(pb.box))
                                      .conn.gamma));
  CHECK(gmax < 1e-5);

  MinimizeOptions bad;
  bad.backtrack = 1.5;
  CHECK(kind_of([&] { minimize_deviation(id, fam, t0, q, bad); }) == ErrorKind::ConfigInvalid);
  CHECK(kind_of([&] { minimize_deviation(id, fam, p0, q); }) == ErrorKind::ShapeMismatch);
}
