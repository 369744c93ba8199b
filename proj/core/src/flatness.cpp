#include "flatlab/flatness.hpp"

#include <algorithm>
#include <cmath>

#include "flatlab/algebra.hpp"
#include "flatlab/parallel.hpp"
#include "flatlab/rng.hpp"

namespace flatlab {

namespace {

struct PointResiduals {
  double connection = 0.0;
  double curvature = 0.0;
  double ricci = 0.0;
  double scalar = 0.0;
};

}  // namespace

FlatnessReport classify_flatness(const FieldSpec& spec, std::span<const Point> sample, double tol,
                                 const FDConfig& fd, JetMethod method) {
  std::vector<Point> nodes;
  if (sample.empty()) {
    nodes = spec.box.nodes();
    sample = nodes;
  }
  const bool metric = spec.is_metric();
  const auto per_point = parallel_map<PointResiduals>(sample.size(), [&](std::size_t idx) {
    PointResiduals r;
    const Point& x = sample[idx];
    if (metric) {
      const MetricJet2 jet = eval_metric_jet2(spec, x, fd, method);
      const ConnectionJet1 cj = christoffel(jet);
      const Tensor4Mixed rm = riemann_mixed(cj);
      const Matrix2 ric = ricci_from_mixed(rm);
      r.connection = max_abs(cj.gamma);
      r.curvature = max_abs(rm);
      r.ricci = max_abs(ric);
      r.scalar = std::abs(scalar_curvature(invert_spd(jet.g), ric));
    } else {
      const ConnectionJet1 cj = eval_connection_jet1(spec, x, fd, method);
      const Tensor4Mixed rm = riemann_mixed(cj);
      r.connection = max_abs(cj.gamma);
      r.curvature = max_abs(rm);
      r.ricci = max_abs(ricci_from_mixed(rm));
    }
    return r;
  });

  FlatnessReport rep;
  rep.points_checked = static_cast<int>(sample.size());
  double scalar = 0.0;
  for (const auto& r : per_point) {
    rep.max_connection = std::max(rep.max_connection, r.connection);
    rep.max_curvature = std::max(rep.max_curvature, r.curvature);
    rep.max_ricci = std::max(rep.max_ricci, r.ricci);
    scalar = std::max(scalar, r.scalar);
  }
  rep.connection_flat = rep.max_connection < tol;
  rep.curvature_flat = rep.max_curvature < tol;
  rep.ricci_flat = rep.max_ricci < tol || rep.curvature_flat;
  if (metric) {
    rep.max_scalar = scalar;
    rep.scalar_flat = scalar < tol || rep.ricci_flat;
  } else {
    rep.scalar_flat = rep.ricci_flat;
  }
  return rep;
}

Array4 riccati_residual_plus(const ConnectionJet1& cj) {
  const int n = cj.dim();
  const auto& G = cj.gamma;
  Array4 out(n);
  for (int p = 0; p < n; ++p)
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i)
        for (int s = 0; s < n; ++s) {
          double v = cj.dgamma(p, l, i, s);
          for (int m = 0; m < n; ++m) v += G(l, p, m) * G(m, i, s);
          out(p, l, i, s) = v;
        }
  return out;
}

Array4 riccati_residual_minus(const ConnectionJet1& cj) {
  const int n = cj.dim();
  const auto& G = cj.gamma;
  Array4 out(n);
  for (int p = 0; p < n; ++p)
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i)
        for (int s = 0; s < n; ++s) {
          double v = cj.dgamma(p, l, i, s);
          for (int m = 0; m < n; ++m) v -= G(l, s, m) * G(m, i, p);
          out(p, l, i, s) = v;
        }
  return out;
}

Array4 riccati_residual(const ConnectionJet1& cj, RiccatiSign sign) {
  return sign == RiccatiSign::Plus ? riccati_residual_plus(cj) : riccati_residual_minus(cj);
}

RiccatiFlatness riccati_implies_flat(const ConnectionJet1& cj, RiccatiSign sign) {
  return {max_abs(riccati_residual(cj, sign)), max_abs(riemann_mixed(cj))};
}

SplitRiccati split_riccati_residual(const ConnectionJet1& cj) {
  const int n = cj.dim();
  const auto& G = cj.gamma;
  SplitRiccati out{max_abs(cj.dgamma), 0.0};
  for (int p = 0; p < n; ++p)
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i)
        for (int s = 0; s < n; ++s) {
          double v = 0.0;
          for (int m = 0; m < n; ++m) v += G(l, p, m) * G(m, i, s);
          out.product = std::max(out.product, std::abs(v));
        }
  return out;
}

Array4 riccati_perturbation_residual(const ConnectionJet1& gamma, const ConnectionJet1& t) {
  if (gamma.dim() != t.dim()) throw Error(ErrorKind::ShapeMismatch, "connection dimensions");
  const int n = gamma.dim();
  const auto& G = gamma.gamma;
  const auto& T = t.gamma;
  Array4 out(n);
  for (int p = 0; p < n; ++p)
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i)
        for (int s = 0; s < n; ++s) {
          double v = t.dgamma(p, l, i, s);
          for (int m = 0; m < n; ++m)
            v += G(l, p, m) * T(m, i, s) + T(l, p, m) * G(m, i, s) + T(l, p, m) * T(m, i, s);
          out(p, l, i, s) = v;
        }
  return out;
}

namespace {

/// The value of d_p Gamma^l_is that the Riccati system prescribes, as a
/// function of Gamma alone: F(p, l, i, s).
Array4 prescribed_derivative(const Tensor3& G, RiccatiSign sign) {
  const int n = G.dim();
  Array4 f(n);
  for (int p = 0; p < n; ++p)
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i)
        for (int s = 0; s < n; ++s) {
          double v = 0.0;
          for (int m = 0; m < n; ++m)
            v += sign == RiccatiSign::Plus ? -G(l, p, m) * G(m, i, s) : G(l, s, m) * G(m, i, p);
          f(p, l, i, s) = v;
        }
  return f;
}

}  // namespace

double integrability_check(const FieldSpec& spec, RiccatiSign sign, std::span<const Point> sample,
                           const FDConfig& fd, JetMethod method) {
  std::vector<Point> nodes;
  if (sample.empty()) {
    ChartBox inner = spec.box;
    for (int a = 0; a < inner.n; ++a) {
      inner.lower[a] += fd.margin();
      inner.upper[a] -= fd.margin();
    }
    nodes = inner.nodes();
    sample = nodes;
  }
  const int n = spec.dim();
  const double h = fd.h2;
  const auto worst = parallel_map<double>(sample.size(), [&](std::size_t idx) {
    const Point& x = sample[idx];
    if (!spec.box.contains(x, h)) throw Error(ErrorKind::OutOfDomain, "sample point near boundary");
    // dF(q, p, l, i, s) = d_q F(p, l, i, s)
    Array5 df(n);
    for (int q = 0; q < n; ++q) {
      Point a = x, b = x;
      a[static_cast<std::size_t>(q)] += h;
      b[static_cast<std::size_t>(q)] -= h;
      const Array4 fa = prescribed_derivative(connection_jet(spec, a, fd, method).gamma, sign);
      const Array4 fb = prescribed_derivative(connection_jet(spec, b, fd, method).gamma, sign);
      for (std::size_t e = 0; e < fa.size(); ++e)
        df.flat()[static_cast<std::size_t>(q) * fa.size() + e] =
            (fa.flat()[e] - fb.flat()[e]) / (2.0 * h);
    }
    double m = 0.0;
    for (int q = 0; q < n; ++q)
      for (int p = 0; p < n; ++p)
        for (int l = 0; l < n; ++l)
          for (int i = 0; i < n; ++i)
            for (int s = 0; s < n; ++s)
              m = std::max(m, std::abs(df(q, p, l, i, s) - df(p, q, l, i, s)));
    return m;
  });
  double m = 0.0;
  for (double w : worst) m = std::max(m, w);
  return m;
}

double cone_condition(const Tensor3& c) {
  const int n = c.dim();
  double worst = 0.0;
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          double v = 0.0;
          for (int s = 0; s < n; ++s) v += c(s, j, k) * c(l, i, s);
          worst = std::max(worst, std::abs(v));
        }
  return worst;
}

TraceFactorization ricci_trace_factorization(const ConnectionJet1& cj, RiccatiSign sign) {
  const int n = cj.dim();
  // omega(q, i, p, s) = Omega^q_ips, the Riccati expression before projection.
  const Array4 res = riccati_residual(cj, sign);
  Array4 omega(n);
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q)
      for (int i = 0; i < n; ++i)
        for (int s = 0; s < n; ++s) omega(q, i, p, s) = res(p, q, i, s);

  TraceFactorization out{Matrix2(n), Matrix2(n)};
  // Trace operator (delta^p_q delta^s_k - delta^p_k delta^s_q) applied directly.
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      double v = 0.0;
      for (int q = 0; q < n; ++q) v += omega(q, i, q, k) - omega(q, i, k, q);
      out.direct_trace(i, k) = v;
    }
  // Projection first: R^l_ijk = 2 P^ps_jk Omega^l_ips, then R_ik = R^l_ilk.
  Tensor4Mixed r(n);
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) r(l, i, j, k) = omega(l, i, j, k) - omega(l, i, k, j);
  out.trace_of_projection = ricci_from_mixed(r);
  return out;
}

Tensor4Lower CurvaturePrescription::project(const Array4& x) {
  const int n = x.dim();
  Array4 a(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          a(i, j, k, l) = 0.25 * (x(i, j, k, l) - x(j, i, k, l) - x(i, j, l, k) + x(j, i, l, k));
  Array4 b(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) b(i, j, k, l) = 0.5 * (a(i, j, k, l) + a(k, l, i, j));
  // With the pair symmetries in place the cyclic sum is three times the
  // totally antisymmetric part; removing a third of it kills the sum.
  Tensor4Lower r(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          r(i, j, k, l) =
              b(i, j, k, l) - (b(i, j, k, l) + b(i, k, l, j) + b(i, l, j, k)) / 3.0;
  return r;
}

CurvaturePrescription CurvaturePrescription::from(const Array4& x) {
  return {x.dim(), project(x)};
}

CurvaturePrescription CurvaturePrescription::random(std::uint64_t seed, int n, double scale) {
  if (n < 2) throw Error(ErrorKind::DimensionTooSmall, "curvature prescription needs n >= 2");
  Rng rng(seed);
  Array4 x(n);
  for (double& v : x.flat()) v = rng.uniform(-1.0, 1.0);
  Tensor4Lower r = project(x);
  const double m = max_abs(r);
  for (double& v : r.flat()) v *= scale / m;
  return {n, r};
}

FieldSpec normal_metric_from_curvature(const CurvaturePrescription& p, const ChartBox& box) {
  box.validate();
  if (box.n != p.n) throw Error(ErrorKind::DimensionMismatch, "prescription and box dimensions");
  const int n = p.n;
  const Point origin(static_cast<std::size_t>(n), 0.0);
  if (!box.contains(origin)) throw Error(ErrorKind::OutOfDomain, "box must contain the origin");
  field::QuadraticMetric q{Matrix2::identity(n), Array4(n)};
  const auto& R = p.r0;
  for (int j = 0; j < n; ++j)
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k)
          q.q(j, l, i, k) = -(R(i, j, k, l) + R(i, l, k, j)) / 6.0;
  FieldSpec spec{box, 0, q};
  const MetricFn metric = metric_function(spec);
  for (const Point& x : box.nodes()) {
    std::vector<Jet2> xs(x.begin(), x.end());
    const JetMatrix gj = metric(xs);
    Matrix2 g(n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) g(a, b) = gj(a, b).v;
    if (!is_positive_definite(g))
      throw Error(ErrorKind::NotPositiveDefinite,
                  "normal-coordinate series is not positive definite on the box");
  }
  return spec;
}

double gray_volume_check(const FieldSpec& spec, double rho) {
  const int n = spec.dim();
  const Point origin(static_cast<std::size_t>(n), 0.0);
  const FDConfig fd = FDConfig::defaults(spec.box);
  const MetricJet2 jet0 = eval_metric_jet2(spec, origin, fd);
  const Matrix2 ric = ricci_from_mixed(riemann_mixed(christoffel(jet0)));

  std::vector<Point> dirs;
  for (int a = 0; a < n; ++a)
    for (double sgn : {1.0, -1.0}) {
      Point d(static_cast<std::size_t>(n), 0.0);
      d[static_cast<std::size_t>(a)] = sgn;
      dirs.push_back(d);
    }
  Rng rng(0x5eedull);
  for (int t = 0; t < 16; ++t) {
    Point d(static_cast<std::size_t>(n));
    double norm = 0.0;
    for (double& v : d) {
      v = rng.uniform(-1.0, 1.0);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : d) v /= norm;
    dirs.push_back(d);
  }

  const MetricFn metric = metric_function(spec);
  double worst = 0.0;
  for (double r : {rho, 0.5 * rho})
    for (const Point& d : dirs) {
      Point x = d;
      for (double& v : x) v *= r;
      if (!spec.box.contains(x)) throw Error(ErrorKind::OutOfDomain, "rho exceeds the box");
      const MetricJet2 jet = eval_metric_jet2(metric, n, x);
      double quad = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) quad += ric(i, j) * x[static_cast<std::size_t>(i)] *
                                            x[static_cast<std::size_t>(j)];
      const double err = std::abs(std::sqrt(determinant(jet.g)) - (1.0 - quad / 6.0));
      worst = std::max(worst, err);
    }
  return worst;
}

}  // namespace flatlab
