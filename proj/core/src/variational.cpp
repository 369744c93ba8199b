#include "flatlab/variational.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>

#include "flatlab/algebra.hpp"
#include "flatlab/curvature.hpp"
#include "flatlab/parallel.hpp"
#include "flatlab/rng.hpp"

namespace flatlab {

// ---------------------------------------------------------------- ids

std::string_view to_string(Density d) noexcept {
  switch (d) {
    case Density::ConnNorm: return "ConnNorm";
    case Density::RiemannNorm: return "RiemannNorm";
    case Density::RicciNorm: return "RicciNorm";
    case Density::ScalarSquare: return "ScalarSquare";
    case Density::TotalScalar: return "TotalScalar";
  }
  return "?";
}

std::string_view to_string(Variable v) noexcept {
  switch (v) {
    case Variable::Gamma: return "Gamma";
    case Variable::Metric: return "Metric";
    case Variable::InverseMetric: return "InverseMetric";
  }
  return "?";
}

std::string_view to_string(Gauge g) noexcept {
  return g == Gauge::Harmonic ? "harmonic" : "none";
}

Density density_from_string(std::string_view s) {
  for (Density d : {Density::ConnNorm, Density::RiemannNorm, Density::RicciNorm,
                    Density::ScalarSquare, Density::TotalScalar})
    if (s == to_string(d)) return d;
  throw Error(ErrorKind::ConfigInvalid, "unknown density '" + std::string(s) + "'");
}

Variable variable_from_string(std::string_view s) {
  for (Variable v : {Variable::Gamma, Variable::Metric, Variable::InverseMetric})
    if (s == to_string(v)) return v;
  throw Error(ErrorKind::ConfigInvalid, "unknown variable '" + std::string(s) + "'");
}

Gauge gauge_from_string(std::string_view s) {
  if (s == "none") return Gauge::None;
  if (s == "harmonic") return Gauge::Harmonic;
  throw Error(ErrorKind::ConfigInvalid, "unknown gauge '" + std::string(s) + "'");
}

void FunctionalId::validate() const {
  const bool metric_var = variable != Variable::Gamma;
  if (density == Density::RicciNorm && metric_var && gauge != Gauge::Harmonic)
    throw Error(ErrorKind::ConfigInvalid, name() + " requires the harmonic gauge");
  if (gauge == Gauge::Harmonic && !(density == Density::RicciNorm && metric_var))
    throw Error(ErrorKind::ConfigInvalid,
                "harmonic gauge only applies to RicciNorm with a metric variable");
}

bool FunctionalId::has_residual() const {
  switch (density) {
    case Density::ConnNorm:
    case Density::RiemannNorm:
    case Density::RicciNorm: return true;
    case Density::TotalScalar: return variable != Variable::Metric;
    case Density::ScalarSquare: return variable == Variable::InverseMetric;
  }
  return false;
}

std::string FunctionalId::name() const {
  std::string s = std::string(to_string(density)) + "/" + std::string(to_string(variable));
  if (gauge == Gauge::Harmonic) s += "/harmonic";
  return s;
}

FunctionalId FunctionalId::parse(std::string_view s) {
  std::vector<std::string_view> parts;
  while (true) {
    const auto slash = s.find('/');
    parts.push_back(s.substr(0, slash));
    if (slash == std::string_view::npos) break;
    s.remove_prefix(slash + 1);
  }
  if (parts.size() < 2 || parts.size() > 3)
    throw Error(ErrorKind::ConfigInvalid, "functional id must be Density/Variable[/gauge]");
  FunctionalId id{density_from_string(parts[0]), variable_from_string(parts[1]),
                  parts.size() == 3 ? gauge_from_string(parts[2]) : Gauge::None};
  id.validate();
  return id;
}

std::vector<FunctionalId> residual_catalog() {
  using D = Density;
  using V = Variable;
  return {
      {D::ConnNorm, V::Gamma},
      {D::ConnNorm, V::Metric},
      {D::ConnNorm, V::InverseMetric},
      {D::RiemannNorm, V::Gamma},
      {D::RiemannNorm, V::InverseMetric},
      {D::RiemannNorm, V::Metric},
      {D::RicciNorm, V::Gamma},
      {D::RicciNorm, V::InverseMetric, Gauge::Harmonic},
      {D::RicciNorm, V::Metric, Gauge::Harmonic},
      {D::TotalScalar, V::Gamma},
      {D::TotalScalar, V::InverseMetric},
      {D::ScalarSquare, V::InverseMetric},
  };
}

// ---------------------------------------------------------------- quadrature

GridQuadrature GridQuadrature::make(const ChartBox& box, const FDConfig& fd) {
  GridQuadrature q{box, box.grid, 0};
  for (int a = 0; a < box.n; ++a)
    q.margin = std::max(q.margin, static_cast<int>(std::ceil(2.0 * fd.h2 / q.cell_size(a) - 1e-12)));
  q.validate();
  return q;
}

GridQuadrature GridQuadrature::uniform(const ChartBox& box, int cells_per_axis, int margin) {
  GridQuadrature q{box, std::vector<int>(static_cast<std::size_t>(box.n), cells_per_axis), margin};
  q.validate();
  return q;
}

void GridQuadrature::validate() const {
  box.validate();
  if (static_cast<int>(cells.size()) != box.n)
    throw Error(ErrorKind::ConfigInvalid, "quadrature needs one cell count per axis");
  if (margin < 0) throw Error(ErrorKind::ConfigInvalid, "quadrature margin must be >= 0");
  for (int c : cells)
    if (c < 1 || 2 * margin >= c)
      throw Error(ErrorKind::ConfigInvalid, "quadrature margin leaves no cells");
}

void GridQuadrature::require_margin(const FDConfig& fd) const {
  for (int a = 0; a < box.n; ++a)
    if (margin < static_cast<int>(std::ceil(2.0 * fd.h2 / cell_size(a) - 1e-12)))
      throw Error(ErrorKind::ConfigInvalid,
                  "quadrature margin too small for finite-difference step h2");
}

double GridQuadrature::cell_size(int axis) const { return box.extent(axis) / cells[axis]; }

double GridQuadrature::cell_volume() const {
  double v = 1.0;
  for (int a = 0; a < box.n; ++a) v *= cell_size(a);
  return v;
}

ChartBox GridQuadrature::region() const {
  ChartBox r = box;
  for (int a = 0; a < box.n; ++a) {
    r.lower[a] = box.lower[a] + margin * cell_size(a);
    r.upper[a] = box.upper[a] - margin * cell_size(a);
    r.grid[a] = std::max(2, cells[a] - 2 * margin);
  }
  return r;
}

std::vector<Point> GridQuadrature::points() const {
  const int n = box.n;
  std::vector<int> count(n);
  std::size_t total = 1;
  for (int a = 0; a < n; ++a) {
    count[a] = cells[a] - 2 * margin;
    total *= static_cast<std::size_t>(count[a]);
  }
  std::vector<Point> out;
  out.reserve(total);
  std::vector<int> idx(n, 0);
  for (std::size_t t = 0; t < total; ++t) {
    Point x(n);
    for (int a = 0; a < n; ++a)
      x[a] = box.lower[a] + (margin + idx[a] + 0.5) * cell_size(a);
    out.push_back(std::move(x));
    for (int a = n - 1; a >= 0; --a) {
      if (++idx[a] < count[a]) break;
      idx[a] = 0;
    }
  }
  return out;
}

// ---------------------------------------------------------------- bumps

namespace {

double smoothstep(double t) { return t * t * t * (10.0 + t * (-15.0 + 6.0 * t)); }
double smoothstep_d1(double t) { return 30.0 * t * t * (1.0 - t) * (1.0 - t); }
double smoothstep_d2(double t) { return 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t); }

// u = 4 s(t) s(1 - t) vanishes to third order at the ends; the cube
// vanishes to ninth order, which keeps the midpoint rule accurate on the
// total-derivative terms of the first variation (they integrate to zero only
// up to quadrature error, and that error is set by the window's smoothness).
std::array<double, 3> window_1d(double t) {
  if (t <= 0.0 || t >= 1.0) return {0.0, 0.0, 0.0};
  const double a = smoothstep(t), b = smoothstep(1.0 - t);
  const double a1 = smoothstep_d1(t), b1 = smoothstep_d1(1.0 - t);
  const double a2 = smoothstep_d2(t), b2 = smoothstep_d2(1.0 - t);
  const double u = 4.0 * a * b;
  const double u1 = 4.0 * (a1 * b - a * b1);
  const double u2 = 4.0 * (a2 * b - 2.0 * a1 * b1 + a * b2);
  return {u * u * u, 3.0 * u * u * u1, 6.0 * u * u1 * u1 + 3.0 * u * u * u2};
}

// Canonical representative of a component under the symmetry of the last pair.
int canonical_component(Variable v, int n, int c) {
  if (v == Variable::Gamma) {
    const int u = c / (n * n), a = (c / n) % n, b = c % n;
    return (u * n + std::min(a, b)) * n + std::max(a, b);
  }
  const int a = c / n, b = c % n;
  return std::min(a, b) * n + std::max(a, b);
}

}  // namespace

BumpPerturbation BumpPerturbation::random(Variable variable, const ChartBox& region,
                                          std::uint64_t seed, double amplitude) {
  region.validate();
  Rng rng(seed ^ 0xb0b5eed5ULL);
  BumpPerturbation b;
  b.variable = variable;
  b.n = region.n;
  for (int a = 0; a < b.n; ++a) {
    const double ext = region.extent(a);
    const double width = rng.uniform(0.4, 0.7) * ext;
    const double lo = region.lower[a] + rng.uniform(0.0, ext - width);
    b.lower.push_back(lo);
    b.upper.push_back(lo + width);
  }
  const int comps = b.component_count();
  const std::size_t stride = static_cast<std::size_t>(b.n) + 1;
  b.coeffs.assign(static_cast<std::size_t>(comps) * stride, 0.0);
  for (int c = 0; c < comps; ++c)
    if (canonical_component(variable, b.n, c) == c)
      for (std::size_t k = 0; k < stride; ++k)
        b.coeffs[static_cast<std::size_t>(c) * stride + k] = amplitude * rng.uniform(-1.0, 1.0);
  for (int c = 0; c < comps; ++c) {
    const auto rep = static_cast<std::size_t>(canonical_component(variable, b.n, c));
    if (rep != static_cast<std::size_t>(c))
      std::copy_n(b.coeffs.begin() + static_cast<std::ptrdiff_t>(rep * stride), stride,
                  b.coeffs.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(c) * stride));
  }
  return b;
}

int BumpPerturbation::component_count() const {
  return variable == Variable::Gamma ? n * n * n : n * n;
}

bool BumpPerturbation::in_support(std::span<const double> x) const {
  for (int a = 0; a < n; ++a)
    if (x[a] <= lower[a] || x[a] >= upper[a]) return false;
  return true;
}

double BumpPerturbation::window(std::span<const double> x) const {
  double w = 1.0;
  for (int a = 0; a < n; ++a) w *= window_1d((x[a] - lower[a]) / (upper[a] - lower[a]))[0];
  return w;
}

std::vector<Jet2> BumpPerturbation::jets(std::span<const double> x) const {
  const int comps = component_count();
  std::vector<Jet2> out(static_cast<std::size_t>(comps));
  if (!in_support(x)) return out;
  const std::vector<Jet2> xs = coordinate_jets(x);
  Jet2 w(1.0);
  std::vector<Jet2> t(static_cast<std::size_t>(n));
  for (int a = 0; a < n; ++a) {
    const double width = upper[a] - lower[a];
    t[a] = (xs[a] - Jet2(lower[a])) * Jet2(1.0 / width);
    const auto f = window_1d(t[a].v);
    w = w * jet_detail::chain(t[a], f[0], f[1], f[2]);
  }
  const std::size_t stride = static_cast<std::size_t>(n) + 1;
  for (int c = 0; c < comps; ++c) {
    const double* k = &coeffs[static_cast<std::size_t>(c) * stride];
    Jet2 p(k[0]);
    for (int a = 0; a < n; ++a) p += Jet2(k[a + 1]) * (Jet2(2.0) * t[a] - Jet2(1.0));
    out[c] = w * p;
  }
  return out;
}

std::vector<double> BumpPerturbation::values(std::span<const double> x) const {
  const std::vector<Jet2> j = jets(x);
  std::vector<double> v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].v;
  return v;
}

// ---------------------------------------------------------------- geometry

namespace {

PointGeometry from_metric_jet(MetricJet2 jet) {
  PointGeometry p;
  p.x = jet.x;
  p.g = jet.g;
  p.g_inv = invert_spd(jet.g);
  p.sqrt_det = std::sqrt(determinant(jet.g));
  p.conn = christoffel(jet);
  p.metric = std::move(jet);
  return p;
}

void require_metric(const FieldSpec& spec, Variable v) {
  if (!spec.is_metric())
    throw Error(ErrorKind::Unsupported, std::string("variable ") + std::string(to_string(v)) +
                                            " needs a metric field, got " +
                                            std::string(spec.kind_name()));
}

JetMatrix to_jet_matrix(const MetricJet2& jet) {
  const int n = jet.dim();
  JetMatrix m(n);
  for (int r = 0; r < n; ++r)
    for (int s = 0; s < n; ++s) {
      Jet2 e(jet.g(r, s));
      e.n = n;
      for (int t = 0; t < n; ++t) e.d[t] = jet.dg(t, r, s);
      for (int q = 0; q < n; ++q)
        for (int t = 0; t < n; ++t) e.hess(q, t) = jet.ddg(q, t, r, s);
      m(r, s) = e;
    }
  return m;
}

void require_spd(const Matrix2& g) {
  if (!is_positive_definite(g))
    throw Error(ErrorKind::NotPositiveDefinite, "perturbed metric is not positive definite");
}

}  // namespace

PointGeometry point_geometry(const FieldSpec& spec, Variable variable, std::span<const double> x,
                             const FDConfig& fd, JetMethod method) {
  if (variable == Variable::Gamma && spec.is_connection()) {
    PointGeometry p;
    p.x.assign(x.begin(), x.end());
    p.g = Matrix2::identity(spec.dim());
    p.g_inv = p.g;
    p.sqrt_det = 1.0;
    p.conn = eval_connection_jet1(spec, x, fd, method);
    return p;
  }
  require_metric(spec, variable);
  return from_metric_jet(eval_metric_jet2(spec, x, fd, method));
}

PointGeometry perturbed_geometry(const FieldSpec& spec, Variable variable,
                                 std::span<const double> x, const FDConfig& fd, JetMethod method,
                                 const BumpPerturbation& bump, double eps) {
  if (bump.variable != variable || bump.n != spec.dim())
    throw Error(ErrorKind::ShapeMismatch, "bump does not match the variable or dimension");
  const int n = spec.dim();
  const std::vector<Jet2> b = bump.jets(x);
  switch (variable) {
    case Variable::Gamma: {
      PointGeometry p = point_geometry(spec, variable, x, fd, method);
      for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v)
          for (int w = 0; w < n; ++w) {
            const Jet2& e = b[static_cast<std::size_t>((u * n + v) * n + w)];
            p.conn.gamma(u, v, w) += eps * e.v;
            for (int t = 0; t < n; ++t) p.conn.dgamma(t, u, v, w) += eps * e.grad(t);
          }
      return p;
    }
    case Variable::Metric: {
      require_metric(spec, variable);
      MetricJet2 jet = eval_metric_jet2(spec, x, fd, method);
      for (int r = 0; r < n; ++r)
        for (int s = 0; s < n; ++s) {
          const Jet2& e = b[static_cast<std::size_t>(r * n + s)];
          jet.g(r, s) += eps * e.v;
          for (int t = 0; t < n; ++t) {
            jet.dg(t, r, s) += eps * e.grad(t);
            for (int q = 0; q < n; ++q) jet.ddg(q, t, r, s) += eps * e.hess(q, t);
          }
        }
      require_spd(jet.g);
      return from_metric_jet(std::move(jet));
    }
    case Variable::InverseMetric: {
      require_metric(spec, variable);
      const MetricJet2 base = eval_metric_jet2(spec, x, fd, method);
      JetMatrix inv = jet_inverse(to_jet_matrix(base));
      for (int r = 0; r < n; ++r)
        for (int s = 0; s < n; ++s)
          inv(r, s) = inv(r, s) + Jet2(eps) * b[static_cast<std::size_t>(r * n + s)];
      MetricJet2 jet = metric_jet_from(jet_inverse(inv), x);
      require_spd(jet.g);
      return from_metric_jet(std::move(jet));
    }
  }
  throw Error(ErrorKind::Unsupported, "unknown variable");
}

// ---------------------------------------------------------------- densities

namespace {

Matrix2 ricci_for(const FunctionalId& id, const PointGeometry& p) {
  if (id.gauge == Gauge::Harmonic && p.metric) return ricci_harmonic_unchecked(*p.metric);
  return ricci_from_mixed(riemann_mixed(p.conn));
}

}  // namespace

double lagrangian_density(const FunctionalId& id, const PointGeometry& p) {
  switch (id.density) {
    case Density::ConnNorm: return connection_norm_sq(p.g, p.g_inv, p.conn.gamma);
    case Density::RiemannNorm: return riemann_norm_sq_mixed(p.g, p.g_inv, riemann_mixed(p.conn));
    case Density::RicciNorm: return ricci_norm_sq(p.g_inv, ricci_for(id, p));
    case Density::ScalarSquare: {
      const double s = scalar_curvature(p.g_inv, ricci_for(id, p));
      return s * s;
    }
    case Density::TotalScalar: return scalar_curvature(p.g_inv, ricci_for(id, p));
  }
  return 0.0;
}

double density(const FunctionalId& id, const PointGeometry& p) {
  return lagrangian_density(id, p) * p.sqrt_det;
}

double functional(const FunctionalId& id, const FieldSpec& spec, const GridQuadrature& quad,
                  const FDConfig& fd, JetMethod method) {
  id.validate();
  quad.validate();
  const std::vector<Point> pts = quad.points();
  const auto vals = parallel_map<double>(pts.size(), [&](std::size_t i) {
    return density(id, point_geometry(spec, id.variable, pts[i], fd, method));
  });
  return std::accumulate(vals.begin(), vals.end(), 0.0) * quad.cell_volume();
}

double functional(const FunctionalId& id, const FieldSpec& spec, const GridQuadrature& quad) {
  return functional(id, spec, quad, FDConfig::defaults(spec.box), JetMethod::Analytic);
}

// ---------------------------------------------------------------- residuals

double ElResidual::max_abs() const {
  return variable == Variable::Gamma ? flatlab::max_abs(tensor) : flatlab::max_abs(matrix);
}

double ElResidual::contract(std::span<const double> b) const {
  const auto e = variable == Variable::Gamma ? tensor.flat() : matrix.flat();
  if (e.size() != b.size()) throw Error(ErrorKind::ShapeMismatch, "residual contraction");
  double s = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) s += e[i] * b[i];
  return s;
}

namespace {

using Flat = std::vector<double>;
using BracketFn = std::function<Flat(const PointGeometry&)>;
using GeometryFn = std::function<PointGeometry(const Point&)>;

inline double kd(int a, int b) { return a == b ? 1.0 : 0.0; }

// sum_h d_h F(h, e) for a bracket laid out with the derivative slot first.
Flat divergence(const GeometryFn& geom, const BracketFn& bracket, const Point& x, int n,
                double h) {
  Flat out;
  for (int a = 0; a < n; ++a) {
    Point xp = x, xm = x;
    xp[a] += h;
    xm[a] -= h;
    const Flat fp = bracket(geom(xp)), fm = bracket(geom(xm));
    const std::size_t rest = fp.size() / static_cast<std::size_t>(n);
    if (out.empty()) out.assign(rest, 0.0);
    for (std::size_t e = 0; e < rest; ++e)
      out[e] += (fp[a * rest + e] - fm[a * rest + e]) / (2.0 * h);
  }
  return out;
}

// sum_{h,a} d_h d_a G(h, a, e).
Flat second_divergence(const GeometryFn& geom, const BracketFn& bracket, const Point& x, int n,
                       double h) {
  const Flat f0 = bracket(geom(x));
  const std::size_t rest = f0.size() / static_cast<std::size_t>(n * n);
  Flat out(rest, 0.0);
  auto shifted = [&](int a, double da, int b, double db) {
    Point y = x;
    y[a] += da;
    y[b] += db;
    return bracket(geom(y));
  };
  for (int a = 0; a < n; ++a) {
    const Flat fp = shifted(a, h, a, 0.0), fm = shifted(a, -h, a, 0.0);
    const std::size_t off = static_cast<std::size_t>(a * n + a) * rest;
    for (std::size_t e = 0; e < rest; ++e)
      out[e] += (fp[off + e] - 2.0 * f0[off + e] + fm[off + e]) / (h * h);
  }
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      const Flat pp = shifted(a, h, b, h), pm = shifted(a, h, b, -h);
      const Flat mp = shifted(a, -h, b, h), mm = shifted(a, -h, b, -h);
      const std::size_t o1 = static_cast<std::size_t>(a * n + b) * rest;
      const std::size_t o2 = static_cast<std::size_t>(b * n + a) * rest;
      for (std::size_t e = 0; e < rest; ++e) {
        const double c = 1.0 / (4.0 * h * h);
        out[e] += c * ((pp[o1 + e] - pm[o1 + e] - mp[o1 + e] + mm[o1 + e]) +
                       (pp[o2 + e] - pm[o2 + e] - mp[o2 + e] + mm[o2 + e]));
      }
    }
  return out;
}

// Gamma_a,jk = g_ai Gamma^i_jk
Tensor3 lower_gamma(const Matrix2& g, const Tensor3& G) {
  const int n = g.dim();
  Tensor3 out(n);
  for (int a = 0; a < n; ++a)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += g(a, i) * G(i, j, k);
        out(a, j, k) = s;
      }
  return out;
}

// Raise the slots flagged in `which` of a four-index lowered array.
Array4 raise_slots(const Matrix2& gi, const Array4& t, std::array<bool, 4> which) {
  const int n = gi.dim();
  Array4 cur = t;
  for (int slot = 0; slot < 4; ++slot) {
    if (!which[slot]) continue;
    Array4 next(n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          for (int d = 0; d < n; ++d) {
            std::array<int, 4> idx{a, b, c, d};
            double s = 0.0;
            for (int m = 0; m < n; ++m) {
              std::array<int, 4> src = idx;
              src[slot] = m;
              s += gi(idx[slot], m) * cur(src[0], src[1], src[2], src[3]);
            }
            next(a, b, c, d) = s;
          }
    cur = std::move(next);
  }
  return cur;
}

Matrix2 raise_both(const Matrix2& gi, const Matrix2& r) {
  const int n = gi.dim();
  Matrix2 out(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) s += gi(i, k) * gi(j, l) * r(k, l);
      out(i, j) = s;
    }
  return out;
}

Flat to_flat(const Matrix2& m) { return Flat(m.flat().begin(), m.flat().end()); }

Matrix2 matrix_from(const Flat& f, int n) {
  Matrix2 m(n);
  std::copy(f.begin(), f.end(), m.flat().begin());
  return m;
}

Tensor3 tensor_from(const Flat& f, int n) {
  Tensor3 t(n);
  std::copy(f.begin(), f.end(), t.flat().begin());
  return t;
}

// g_ip Gamma^i_jk Gamma^p_qr as q(j, k, q, r)
Array4 gamma_gram4(const Matrix2& g, const Tensor3& G) {
  const int n = g.dim();
  const Tensor3 low = lower_gamma(g, G);
  Array4 q(n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          double s = 0.0;
          for (int p = 0; p < n; ++p) s += low(p, j, k) * G(p, a, b);
          q(j, k, a, b) = s;
        }
  return q;
}

struct Curv {
  Tensor4Lower low;  // R_ijkl
  Array4 up;         // R^ijkl
  double norm = 0.0; // R_ijkl R^ijkl
};

Curv curvature_of(const PointGeometry& p) {
  Curv c;
  c.low = lower_first_index(p.g, riemann_mixed(p.conn));
  c.up = raise_all(p.g_inv, c.low);
  const auto a = c.low.flat(), b = c.up.flat();
  for (std::size_t i = 0; i < a.size(); ++i) c.norm += a[i] * b[i];
  return c;
}

// ---- connection norm

Tensor3 conn_norm_gamma(const PointGeometry& p) {
  const int n = p.g.dim();
  const auto& G = p.conn.gamma;
  Tensor3 e(n);
  for (int s = 0; s < n; ++s)
    for (int m = 0; m < n; ++m)
      for (int k = 0; k < n; ++k) {
        double acc = 0.0;
        for (int pp = 0; pp < n; ++pp)
          for (int q = 0; q < n; ++q)
            for (int r = 0; r < n; ++r)
              acc += p.g(s, pp) * p.g_inv(m, q) * p.g_inv(k, r) * G(pp, q, r);
        e(s, m, k) = 2.0 * acc * p.sqrt_det;
      }
  return e;
}

Matrix2 conn_norm_metric_algebraic(const PointGeometry& p) {
  const int n = p.g.dim();
  const auto& G = p.conn.gamma;
  const auto& gi = p.g_inv;
  const Array4 Q = gamma_gram4(p.g, G);
  const double L = connection_norm_sq(p.g, gi, G);
  Matrix2 e(n);
  for (int m = 0; m < n; ++m)
    for (int nn = 0; nn < n; ++nn) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int q = 0; q < n; ++q)
            for (int r = 0; r < n; ++r) {
              acc += gi(j, q) * gi(k, r) * G(m, j, k) * G(nn, q, r);
              acc -= Q(j, k, q, r) *
                     (gi(m, j) * gi(nn, q) * gi(k, r) + gi(j, q) * gi(m, k) * gi(nn, r));
            }
      acc += 0.5 * L * gi(m, nn);
      e(m, nn) = acc * p.sqrt_det;
    }
  return e;
}

// F(l, m, n) = g^jq g^kr (d^m_u d^n_j d^l_k + d^m_u d^n_k d^l_j - d^l_u d^m_j d^n_k) Gamma^u_qr sqrt g
Flat conn_norm_metric_bracket(const PointGeometry& p) {
  const int n = p.g.dim();
  const auto& G = p.conn.gamma;
  const auto& gi = p.g_inv;
  Flat f(static_cast<std::size_t>(n * n * n), 0.0);
  for (int l = 0; l < n; ++l)
    for (int m = 0; m < n; ++m)
      for (int nn = 0; nn < n; ++nn) {
        double acc = 0.0;
        for (int q = 0; q < n; ++q)
          for (int r = 0; r < n; ++r)
            acc += gi(nn, q) * gi(l, r) * G(m, q, r) + gi(l, q) * gi(nn, r) * G(m, q, r) -
                   gi(m, q) * gi(nn, r) * G(l, q, r);
        f[static_cast<std::size_t>((l * n + m) * n + nn)] = acc * p.sqrt_det;
      }
  return f;
}

Matrix2 conn_norm_inverse(const PointGeometry& p) {
  const int n = p.g.dim();
  const auto& G = p.conn.gamma;
  const auto& g = p.g;
  const auto& gi = p.g_inv;
  const Tensor3 low = lower_gamma(g, G);
  const Array4 Q = gamma_gram4(g, G);
  const double L = connection_norm_sq(g, gi, G);
  Matrix2 e(n);
  for (int m = 0; m < n; ++m)
    for (int nn = 0; nn < n; ++nn) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int q = 0; q < n; ++q)
            for (int r = 0; r < n; ++r)
              acc += gi(k, r) * gi(j, q) *
                     (-2.0 * low(m, q, r) * low(nn, j, k) + low(m, j, k) * low(nn, q, r));
      for (int k = 0; k < n; ++k)
        for (int r = 0; r < n; ++r) acc -= 2.0 * gi(k, r) * Q(m, k, nn, r);
      acc += 0.5 * g(m, nn) * L;
      e(m, nn) = acc;
    }
  return e;
}

// ---- Riemann norm

// S_i^jkl sqrt g: lowered curvature with the last three slots raised.
Array4 riemann_s(const PointGeometry& p, const Curv& c) {
  return scaled(raise_slots(p.g_inv, c.low, {false, true, true, true}), p.sqrt_det);
}

Tensor3 riemann_gamma_algebraic(const PointGeometry& p) {
  const int n = p.g.dim();
  const auto& G = p.conn.gamma;
  const Array4 S = riemann_s(p, curvature_of(p));
  Tensor3 e(n);
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v)
      for (int w = 0; w < n; ++w) {
        double acc = 0.0;
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b)
            acc += G(w, b, a) * S(u, a, v, b) - G(w, b, a) * S(u, a, b, v) +
                   G(a, b, u) * S(a, w, b, v) - G(a, b, u) * S(a, w, v, b);
        e(u, v, w) = acc;
      }
  return e;
}

// F(t, u, v, w) = S_u^{w t v} - S_u^{w v t}
Flat riemann_gamma_bracket(const PointGeometry& p) {
  const int n = p.g.dim();
  const Array4 S = riemann_s(p, curvature_of(p));
  Flat f(static_cast<std::size_t>(n * n * n * n));
  for (int t = 0; t < n; ++t)
    for (int u = 0; u < n; ++u)
      for (int v = 0; v < n; ++v)
        for (int w = 0; w < n; ++w)
          f[static_cast<std::size_t>(((t * n + u) * n + v) * n + w)] = S(u, w, t, v) - S(u, w, v, t);
  return f;
}

Matrix2 riemann_inverse(const PointGeometry& p) {
  const int n = p.g.dim();
  const Curv c = curvature_of(p);
  const Tensor3 low = lower_gamma(p.g, p.conn.gamma);
  const Array4 r3 = raise_slots(p.g_inv, c.low, {false, true, true, true});
  const Array4 r134 = raise_slots(p.g_inv, c.low, {true, false, true, true});
  Matrix2 e(n);
  for (int m = 0; m < n; ++m)
    for (int nn = 0; nn < n; ++nn) {
      double a = 0.0;
      for (int i = 0; i < n; ++i)
        for (int b = 0; b < n; ++b)
          for (int cc = 0; cc < n; ++cc)
            for (int d = 0; d < n; ++d)
              a += (c.up(i, b, cc, d) - c.up(i, b, d, cc)) * low(nn, b, cc) * low(m, i, d);
      double bsum = 0.0;
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) {
            bsum += c.low(m, j, k, l) * r3(nn, j, k, l);
            bsum += c.low(j, m, k, l) * r134(j, nn, k, l);
          }
      e(m, nn) = 2.0 * a + 2.0 * bsum - 0.5 * c.norm * p.g(m, nn);
    }
  return e;
}

Matrix2 riemann_metric_algebraic(const PointGeometry& p) {
  const int n = p.g.dim();
  const auto& G = p.conn.gamma;
  const auto& gi = p.g_inv;
  const Curv c = curvature_of(p);
  Matrix2 e(n);
  for (int m = 0; m < n; ++m)
    for (int nn = 0; nn < n; ++nn) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l) {
              acc -= 2.0 * c.up(i, j, k, l) *
                     (G(nn, j, k) * G(m, i, l) + G(nn, j, l) * G(m, i, k));
              acc -= 2.0 * c.low(i, j, k, l) * gi(m, i) * c.up(nn, j, k, l);
              acc -= 2.0 * c.low(i, j, k, l) * gi(m, j) * c.up(i, nn, k, l);
            }
      acc += 0.5 * gi(nn, m) * c.norm;
      e(m, nn) = acc * p.sqrt_det;
    }
  return e;
}

// F(h, m, n) = sum_abcd K^hmn(a,b,c,d) (R^abcd - R^abdc) sqrt g
Flat riemann_metric_bracket1(const PointGeometry& p) {
  const int n = p.g.dim();
  const auto& G = p.conn.gamma;
  const Curv c = curvature_of(p);
  Flat f(static_cast<std::size_t>(n * n * n), 0.0);
  for (int h = 0; h < n; ++h)
    for (int m = 0; m < n; ++m)
      for (int nn = 0; nn < n; ++nn) {
        double acc = 0.0;
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b)
            for (int cc = 0; cc < n; ++cc)
              for (int d = 0; d < n; ++d) {
                const double k = G(m, a, d) * (kd(h, cc) * kd(nn, b) + kd(h, b) * kd(nn, cc)) -
                                 G(h, a, d) * kd(m, b) * kd(nn, cc) +
                                 G(m, b, cc) * (kd(h, a) * kd(nn, d) + kd(h, d) * kd(nn, a)) -
                                 G(h, b, cc) * kd(m, a) * kd(nn, d);
                if (k != 0.0) acc += k * (c.up(a, b, cc, d) - c.up(a, b, d, cc));
              }
        f[static_cast<std::size_t>((h * n + m) * n + nn)] = acc * p.sqrt_det;
      }
  return f;
}

// G(h, a, m, n) = (R^mhna - R^hmna - R^mhan + R^hman) sqrt g
Flat riemann_metric_bracket2(const PointGeometry& p) {
  const int n = p.g.dim();
  const Curv c = curvature_of(p);
  Flat f(static_cast<std::size_t>(n * n * n * n));
  for (int h = 0; h < n; ++h)
    for (int a = 0; a < n; ++a)
      for (int m = 0; m < n; ++m)
        for (int nn = 0; nn < n; ++nn)
          f[static_cast<std::size_t>(((h * n + a) * n + m) * n + nn)] =
              (c.up(m, h, nn, a) - c.up(h, m, nn, a) - c.up(m, h, a, nn) + c.up(h, m, a, nn)) *
              p.sqrt_det;
  return f;
}

// ---- Ricci norm

Tensor3 ricci_gamma_algebraic(const PointGeometry& p) {
  const int n = p.g.dim();
  const auto& G = p.conn.gamma;
  const Matrix2 up = raise_both(p.g_inv, ricci_from_mixed(riemann_mixed(p.conn)));
  Tensor3 e(n);
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v)
      for (int w = 0; w < n; ++w) {
        double acc = 0.0;
        if (u == v)
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) acc += G(w, i, j) * up(i, j);
        for (int i = 0; i < n; ++i) {
          acc -= G(w, i, u) * up(i, v);
          acc += G(i, i, u) * up(v, w);
          acc -= G(w, i, u) * up(v, i);
        }
        e(u, v, w) = acc * p.sqrt_det;
      }
  return e;
}

// F(t, u, v, w) = (d^t_u Ric^vw - d^w_u Ric^vt) sqrt g
Flat ricci_gamma_bracket(const PointGeometry& p) {
  const int n = p.g.dim();
  const Matrix2 up = raise_both(p.g_inv, ricci_from_mixed(riemann_mixed(p.conn)));
  Flat f(static_cast<std::size_t>(n * n * n * n));
  for (int t = 0; t < n; ++t)
    for (int u = 0; u < n; ++u)
      for (int v = 0; v < n; ++v)
        for (int w = 0; w < n; ++w)
          f[static_cast<std::size_t>(((t * n + u) * n + v) * n + w)] =
              (kd(t, u) * up(v, w) - kd(w, u) * up(v, t)) * p.sqrt_det;
  return f;
}

Matrix2 ricci_inverse(const PointGeometry& p, const Matrix2& R) {
  const int n = p.g.dim();
  const auto& G = p.conn.gamma;
  const auto& g = p.g;
  const auto& gi = p.g_inv;
  const auto& ddg = p.metric->ddg;
  const Tensor3 low = lower_gamma(g, G);
  const Matrix2 up = raise_both(gi, R);
  const double L = ricci_norm_sq(gi, R);
  Matrix2 e(n);
  for (int m = 0; m < n; ++m)
    for (int nn = 0; nn < n; ++nn) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) acc += 2.0 * gi(i, k) * R(i, m) * R(k, nn);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double y = -0.5 * ddg(m, nn, i, j);
          for (int c = 0; c < n; ++c) y += low(c, nn, j) * G(c, i, m);
          for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) y += gi(a, b) * low(nn, i, a) * low(m, b, j);
          acc += 2.0 * up(i, j) * y;
        }
      acc -= 0.5 * L * g(m, nn);
      e(m, nn) = acc;
    }
  return e;
}

Matrix2 ricci_metric_algebraic(const PointGeometry& p, const Matrix2& R) {
  const int n = p.g.dim();
  const auto& G = p.conn.gamma;
  const auto& g = p.g;
  const auto& gi = p.g_inv;
  const auto& ddg = p.metric->ddg;
  const Matrix2 up = raise_both(gi, R);
  Matrix2 e(n);
  for (int m = 0; m < n; ++m)
    for (int nn = 0; nn < n; ++nn) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l)
              acc += R(i, j) * R(k, l) *
                     (-2.0 * gi(m, i) * gi(nn, k) * gi(j, l) +
                      0.5 * gi(i, k) * gi(j, l) * gi(m, nn));
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          double z = 0.0;
          for (int pp = 0; pp < n; ++pp)
            for (int q = 0; q < n; ++q) {
              double inner = -0.5 * ddg(pp, q, k, l);
              for (int r = 0; r < n; ++r)
                for (int s = 0; s < n; ++s) inner += g(r, s) * G(r, k, pp) * G(s, q, l);
              z -= gi(m, pp) * gi(nn, q) * inner;
              z -= gi(pp, q) * G(nn, k, pp) * G(m, q, l);
            }
          acc += 2.0 * up(k, l) * z;
        }
      e(m, nn) = acc * p.sqrt_det;
    }
  return e;
}

Flat ricci_metric_bracket1(const PointGeometry& p) {
  const int n = p.g.dim();
  const auto& G = p.conn.gamma;
  const auto& gi = p.g_inv;
  const Matrix2 up = raise_both(gi, ricci_harmonic_unchecked(*p.metric));
  Flat f(static_cast<std::size_t>(n * n * n), 0.0);
  for (int h = 0; h < n; ++h)
    for (int m = 0; m < n; ++m)
      for (int nn = 0; nn < n; ++nn) {
        double acc = 0.0;
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b)
            for (int i = 0; i < n; ++i)
              for (int j = 0; j < n; ++j) {
                const double w = gi(a, b) * up(i, j);
                if (w == 0.0) continue;
                const double t1 = (kd(h, a) * kd(m, i) + kd(h, i) * kd(m, a)) * G(nn, b, j) -
                                  kd(m, i) * kd(nn, a) * G(h, b, j);
                const double t2 = (kd(h, j) * kd(m, b) + kd(h, b) * kd(m, j)) * G(nn, i, a) -
                                  kd(m, b) * kd(nn, j) * G(h, i, a);
                acc += w * (t1 + t2);
              }
        f[static_cast<std::size_t>((h * n + m) * n + nn)] = acc * p.sqrt_det;
      }
  return f;
}

// G(h, t, m, n) = sqrt g g^ht Ric^mn
Flat ricci_metric_bracket2(const PointGeometry& p) {
  const int n = p.g.dim();
  const Matrix2 up = raise_both(p.g_inv, ricci_harmonic_unchecked(*p.metric));
  Flat f(static_cast<std::size_t>(n * n * n * n));
  for (int h = 0; h < n; ++h)
    for (int t = 0; t < n; ++t)
      for (int m = 0; m < n; ++m)
        for (int nn = 0; nn < n; ++nn)
          f[static_cast<std::size_t>(((h * n + t) * n + m) * n + nn)] =
              p.sqrt_det * p.g_inv(h, t) * up(m, nn);
  return f;
}

// ---- total scalar curvature of a connection

Tensor3 total_scalar_gamma(const PointGeometry& p, const Array3& dW) {
  const int n = p.g.dim();
  const auto& G = p.conn.gamma;
  const auto& gi = p.g_inv;
  Tensor3 e(n);
  for (int l = 0; l < n; ++l)
    for (int m = 0; m < n; ++m)
      for (int nn = 0; nn < n; ++nn) {
        auto term = [&](int pp, int s, int q, int k) {
          double acc = 0.0;
          for (int i = 0; i < n; ++i)
            acc += gi(i, k) * (kd(q, l) * kd(m, pp) * G(nn, i, s) +
                               kd(m, i) * kd(nn, s) * G(q, pp, l));
          acc *= p.sqrt_det;
          acc -= kd(q, l) * kd(nn, s) * dW(pp, m, k);
          return acc;
        };
        double acc = 0.0;
        for (int pp = 0; pp < n; ++pp)
          for (int s = 0; s < n; ++s) acc += term(pp, s, pp, s) - term(pp, s, s, pp);
        e(l, m, nn) = acc;
      }
  return e;
}

Matrix2 contraction_ricci(const PointGeometry& p) { return ricci_from_mixed(riemann_mixed(p.conn)); }

}  // namespace

ElResidual el_residual(const FunctionalId& id, const FieldSpec& spec, std::span<const double> x,
                       const FDConfig& fd, JetMethod method) {
  id.validate();
  if (!id.has_residual())
    throw Error(ErrorKind::Unsupported, "no Euler-Lagrange residual for " + id.name());
  const int n = spec.dim();
  const Point x0(x.begin(), x.end());
  const GeometryFn geom = [&](const Point& y) {
    return point_geometry(spec, id.variable, y, fd, method);
  };
  const PointGeometry p = geom(x0);
  const double h = fd.h2;

  ElResidual out;
  out.variable = id.variable;
  auto set_matrix = [&](Matrix2 m) { out.matrix = std::move(m); };
  auto set_tensor = [&](Tensor3 t) { out.tensor = std::move(t); };

  switch (id.density) {
    case Density::ConnNorm:
      if (id.variable == Variable::Gamma) {
        set_tensor(conn_norm_gamma(p));
      } else if (id.variable == Variable::Metric) {
        Matrix2 e = conn_norm_metric_algebraic(p);
        const Flat d = divergence(geom, conn_norm_metric_bracket, x0, n, h);
        set_matrix(axpy(e, -1.0, matrix_from(d, n)));
      } else {
        set_matrix(conn_norm_inverse(p));
      }
      break;
    case Density::RiemannNorm:
      if (id.variable == Variable::Gamma) {
        const Tensor3 e = riemann_gamma_algebraic(p);
        const Flat d = divergence(geom, riemann_gamma_bracket, x0, n, h);
        set_tensor(axpy(e, -1.0, tensor_from(d, n)));
      } else if (id.variable == Variable::InverseMetric) {
        set_matrix(riemann_inverse(p));
      } else {
        const Matrix2 e = riemann_metric_algebraic(p);
        const Flat d1 = divergence(geom, riemann_metric_bracket1, x0, n, h);
        const Flat d2 = second_divergence(geom, riemann_metric_bracket2, x0, n, h);
        set_matrix(axpy(axpy(e, -1.0, matrix_from(d1, n)), 1.0, matrix_from(d2, n)));
      }
      break;
    case Density::RicciNorm:
      if (id.variable == Variable::Gamma) {
        const Tensor3 e = ricci_gamma_algebraic(p);
        const Flat d = divergence(geom, ricci_gamma_bracket, x0, n, h);
        set_tensor(axpy(e, -1.0, tensor_from(d, n)));
      } else {
        const Matrix2 R = ricci_harmonic(*p.metric);
        if (id.variable == Variable::InverseMetric) {
          set_matrix(ricci_inverse(p, R));
        } else {
          const Matrix2 e = ricci_metric_algebraic(p, R);
          const Flat d1 = divergence(geom, ricci_metric_bracket1, x0, n, h);
          const Flat d2 = second_divergence(geom, ricci_metric_bracket2, x0, n, h);
          set_matrix(axpy(axpy(e, -1.0, matrix_from(d1, n)), 1.0, matrix_from(d2, n)));
        }
      }
      break;
    case Density::TotalScalar:
      if (id.variable == Variable::Gamma) {
        // d_p (g^mk sqrt g), laid out dW(p, m, k)
        const BracketFn w = [](const PointGeometry& q) {
          return to_flat(scaled(q.g_inv, q.sqrt_det));
        };
        Array3 dW(n);
        for (int a = 0; a < n; ++a) {
          Point xp = x0, xm = x0;
          xp[a] += h;
          xm[a] -= h;
          const Flat fp = w(geom(xp)), fm = w(geom(xm));
          for (int e = 0; e < n * n; ++e) dW.flat()[a * n * n + e] = (fp[e] - fm[e]) / (2.0 * h);
        }
        set_tensor(total_scalar_gamma(p, dW));
      } else {
        const Matrix2 R = contraction_ricci(p);
        const double s = scalar_curvature(p.g_inv, R);
        set_matrix(axpy(R, -0.5 * s, p.g));
      }
      break;
    case Density::ScalarSquare: {
      const Matrix2 R = contraction_ricci(p);
      const double s = scalar_curvature(p.g_inv, R);
      set_matrix(axpy(scaled(R, 2.0 * s), -0.5 * s * s, p.g));
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------- oracle

namespace {

std::vector<std::size_t> support_points(const std::vector<Point>& pts, const BumpPerturbation& b) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (b.in_support(pts[i])) idx.push_back(i);
  return idx;
}

void check_bump(const FunctionalId& id, const FieldSpec& spec, const BumpPerturbation& b,
                const GridQuadrature& quad) {
  if (b.variable != id.variable || b.n != spec.dim())
    throw Error(ErrorKind::ShapeMismatch, "bump does not match the functional variable");
  const ChartBox r = quad.region();
  for (int a = 0; a < b.n; ++a)
    if (b.lower[a] < r.lower[a] || b.upper[a] > r.upper[a])
      throw Error(ErrorKind::OutOfDomain, "bump support leaves the quadrature region");
}

double weight(const FunctionalId& id, const PointGeometry& p) {
  return id.variable == Variable::InverseMetric ? p.sqrt_det : 1.0;
}

}  // namespace

double gateaux_derivative(const FunctionalId& id, const FieldSpec& spec,
                          const BumpPerturbation& bump, const GridQuadrature& quad, double eps,
                          const FDConfig& fd, JetMethod method) {
  id.validate();
  quad.validate();
  check_bump(id, spec, bump, quad);
  if (!(eps > 0.0)) throw Error(ErrorKind::ConfigInvalid, "eps must be positive");
  const std::vector<Point> pts = quad.points();
  const std::vector<std::size_t> idx = support_points(pts, bump);
  const auto vals = parallel_map<double>(idx.size(), [&](std::size_t i) {
    const Point& x = pts[idx[i]];
    const double up = density(id, perturbed_geometry(spec, id.variable, x, fd, method, bump, eps));
    const double dn = density(id, perturbed_geometry(spec, id.variable, x, fd, method, bump, -eps));
    return (up - dn) / (2.0 * eps);
  });
  return std::accumulate(vals.begin(), vals.end(), 0.0) * quad.cell_volume();
}

double residual_pairing(const FunctionalId& id, const FieldSpec& spec,
                        const BumpPerturbation& bump, const GridQuadrature& quad,
                        const FDConfig& fd, JetMethod method) {
  id.validate();
  quad.validate();
  check_bump(id, spec, bump, quad);
  const std::vector<Point> pts = quad.points();
  const std::vector<std::size_t> idx = support_points(pts, bump);
  const auto vals = parallel_map<double>(idx.size(), [&](std::size_t i) {
    const Point& x = pts[idx[i]];
    const ElResidual e = el_residual(id, spec, x, fd, method);
    const double w = weight(id, point_geometry(spec, id.variable, x, fd, method));
    return e.contract(bump.values(x)) * w;
  });
  return std::accumulate(vals.begin(), vals.end(), 0.0) * quad.cell_volume();
}

double relative_mismatch(double a, double b, double abs_floor) {
  const double scale = std::max(std::abs(a), std::abs(b));
  if (scale < abs_floor) return std::abs(a - b);
  return std::abs(a - b) / scale;
}

OracleMatch el_oracle_match(const FunctionalId& id, const FieldSpec& spec,
                            std::span<const BumpPerturbation> bumps, const GridQuadrature& quad,
                            double eps, const FDConfig& fd, JetMethod method) {
  id.validate();
  quad.validate();
  for (const auto& b : bumps) check_bump(id, spec, b, quad);

  // Residuals are evaluated once on the union of the supports.
  const std::vector<Point> pts = quad.points();
  std::vector<std::size_t> needed;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (const auto& b : bumps)
      if (b.in_support(pts[i])) {
        needed.push_back(i);
        break;
      }
  struct Local {
    ElResidual e;
    double w = 1.0;
  };
  const auto local = parallel_map<Local>(needed.size(), [&](std::size_t i) {
    const Point& x = pts[needed[i]];
    return Local{el_residual(id, spec, x, fd, method),
                 weight(id, point_geometry(spec, id.variable, x, fd, method))};
  });

  OracleMatch out;
  double gp = 0.0, pp = 0.0;
  for (const auto& b : bumps) {
    OracleRow row;
    for (std::size_t k = 0; k < needed.size(); ++k) {
      const Point& x = pts[needed[k]];
      if (b.in_support(x)) row.pairing += local[k].e.contract(b.values(x)) * local[k].w;
    }
    row.pairing *= quad.cell_volume();
    double e = eps;
    for (int attempt = 0;; ++attempt) {
      try {
        row.gateaux = gateaux_derivative(id, spec, b, quad, e, fd, method);
        break;
      } catch (const Error& err) {
        if (err.kind() != ErrorKind::NotPositiveDefinite || attempt >= 10) throw;
        e *= 0.5;
      }
    }
    row.mismatch = relative_mismatch(row.gateaux, row.pairing);
    out.worst = std::max(out.worst, row.mismatch);
    gp += row.gateaux * row.pairing;
    pp += row.pairing * row.pairing;
    out.rows.push_back(row);
  }
  out.fitted_scale = pp > 0.0 ? gp / pp : 1.0;
  for (const auto& row : out.rows)
    out.scaled_worst =
        std::max(out.scaled_worst, relative_mismatch(row.gateaux, out.fitted_scale * row.pairing));
  return out;
}

// ---------------------------------------------------------------- pointwise checks

Matrix2 einstein_constraint_residual(const FieldSpec& spec, std::span<const double> x,
                                     const FDConfig& fd, JetMethod method) {
  require_metric(spec, Variable::Metric);
  const PointGeometry p = point_geometry(spec, Variable::Metric, x, fd, method);
  const Matrix2 R = contraction_ricci(p);
  const double s = scalar_curvature(p.g_inv, R);
  return axpy(R, -s / spec.dim(), p.g);
}

ScalarSquareAlternatives scalar_square_alternatives(const FieldSpec& spec,
                                                    std::span<const double> x,
                                                    const FDConfig& fd, JetMethod method) {
  require_metric(spec, Variable::Metric);
  const PointGeometry p = point_geometry(spec, Variable::Metric, x, fd, method);
  const Matrix2 R = contraction_ricci(p);
  return {std::abs(scalar_curvature(p.g_inv, R)), std::sqrt(ricci_norm_sq(p.g_inv, R))};
}

Array4 connection_norm_inverse_hessian(const Matrix2& g, const Matrix2& gi, const Tensor3& G) {
  const int n = g.dim();
  if (gi.dim() != n || G.dim() != n) throw Error(ErrorKind::ShapeMismatch, "hessian inputs");
  Array4 H(n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int m = 0; m < n; ++m)
        for (int nn = 0; nn < n; ++nn) {
          double acc = 0.0;
          for (int i = 0; i < n; ++i)
            for (int p = 0; p < n; ++p) acc += 2.0 * g(i, p) * G(i, m, a) * G(p, nn, b);
          for (int k = 0; k < n; ++k)
            for (int r = 0; r < n; ++r) {
              double inner = 0.0;
              for (int i = 0; i < n; ++i)
                for (int p = 0; p < n; ++p) {
                  inner += 2.0 * g(a, p) * g(b, i) * G(i, m, k) * G(p, nn, r);
                  inner += (4.0 * g(m, p) * g(nn, i) - g(i, p) * g(m, nn) -
                            2.0 * g(m, i) * g(nn, p)) *
                           G(i, a, k) * G(p, b, r);
                  for (int j = 0; j < n; ++j)
                    for (int q = 0; q < n; ++q)
                      inner += 0.5 * gi(j, q) *
                               (g(i, p) * g(m, a) * g(nn, b) - g(a, p) * g(m, nn) * g(i, b)) *
                               G(i, j, k) * G(p, q, r);
                }
              acc += gi(k, r) * inner;
            }
          H(a, b, m, nn) = acc;
        }
  return H;
}

// ---------------------------------------------------------------- families

FamilySpec FamilySpec::conformal(const FieldSpec& base, std::vector<std::vector<double>> basis) {
  FamilySpec f{Kind::ConformalScale, base, std::move(basis)};
  f.validate();
  return f;
}

FamilySpec FamilySpec::polynomial(const FieldSpec& base) {
  FamilySpec f{Kind::PolynomialCoefficient, base, {}};
  f.validate();
  return f;
}

void FamilySpec::validate() const {
  base.box.validate();
  if (!std::holds_alternative<field::EuclideanConstant>(base.params))
    throw Error(ErrorKind::ConfigInvalid, "family base must be an EuclideanConstant metric");
  const auto& c = std::get<field::EuclideanConstant>(base.params).c;
  if (c.dim() != base.dim() || !is_positive_definite(c))
    throw Error(ErrorKind::ConfigInvalid, "family base matrix must be SPD of the chart dimension");
  if (kind == Kind::ConformalScale) {
    if (basis.empty()) throw Error(ErrorKind::ConfigInvalid, "conformal family needs a basis");
    const std::size_t len = 1 + 2 * static_cast<std::size_t>(base.dim());
    for (const auto& phi : basis)
      if (phi.empty() || phi.size() > len)
        throw Error(ErrorKind::ConfigInvalid,
                    "conformal basis entries use the quadratic layout [a0, a.., b..]");
  }
}

int FamilySpec::parameter_count() const {
  if (kind == Kind::ConformalScale) return static_cast<int>(basis.size());
  const int pairs = base.dim() * (base.dim() + 1) / 2;
  return pairs * pairs;
}

FieldSpec FamilySpec::at(std::span<const double> theta) const {
  if (static_cast<int>(theta.size()) != parameter_count())
    throw Error(ErrorKind::ShapeMismatch, "family parameter count");
  const int n = base.dim();
  const Matrix2& c = std::get<field::EuclideanConstant>(base.params).c;
  FieldSpec out{base.box, base.seed, {}};
  if (kind == Kind::ConformalScale) {
    std::vector<double> coeffs(1 + 2 * static_cast<std::size_t>(n), 0.0);
    for (std::size_t a = 0; a < basis.size(); ++a)
      for (std::size_t k = 0; k < basis[a].size(); ++k) coeffs[k] += theta[a] * basis[a][k];
    out.params = field::Conformal{c, ScalarProfile{ScalarProfile::Kind::Exp, coeffs}};
    return out;
  }
  field::QuadraticMetric q{c, Array4(n)};
  std::size_t t = 0;
  for (int j = 0; j < n; ++j)
    for (int l = j; l < n; ++l)
      for (int i = 0; i < n; ++i)
        for (int k = i; k < n; ++k, ++t)
          for (auto [a, b] : {std::pair{j, l}, std::pair{l, j}})
            for (auto [u, v] : {std::pair{i, k}, std::pair{k, i}}) q.q(a, b, u, v) = theta[t];
  out.params = std::move(q);
  return out;
}

FamilySpec::Kind FamilySpec::kind_from_string(std::string_view s) {
  if (s == "conformal") return Kind::ConformalScale;
  if (s == "polynomial") return Kind::PolynomialCoefficient;
  throw Error(ErrorKind::ConfigInvalid, "unknown family '" + std::string(s) + "'");
}

std::string_view FamilySpec::to_string(Kind k) noexcept {
  return k == Kind::ConformalScale ? "conformal" : "polynomial";
}

// ---------------------------------------------------------------- minimizer

void MinimizeOptions::validate() const {
  if (!(step0 > 0.0) || !(backtrack > 0.0 && backtrack < 1.0) || max_iters < 0 ||
      !(grad_tol > 0.0) || !(fd_step > 0.0) || !(armijo > 0.0 && armijo < 1.0) ||
      !(growth >= 1.0))
    throw Error(ErrorKind::ConfigInvalid, "invalid minimizer options");
}

namespace {

double family_value(const FunctionalId& id, const FamilySpec& family,
                    std::span<const double> theta, const GridQuadrature& quad) {
  const FieldSpec s = family.at(theta);
  return functional(id, s, quad, FDConfig::defaults(s.box), JetMethod::Analytic);
}

// Fourth-order central differences. The second-order stencil's truncation
// error alone can exceed grad_tol at an exact minimum, where no step can
// then decrease the functional.
std::vector<double> family_gradient(const FunctionalId& id, const FamilySpec& family,
                                    const std::vector<double>& theta, const GridQuadrature& quad,
                                    double h) {
  std::vector<double> grad(theta.size());
  for (std::size_t a = 0; a < theta.size(); ++a) {
    auto at = [&](double s) {
      std::vector<double> t = theta;
      t[a] += s * h;
      return family_value(id, family, t, quad);
    };
    grad[a] = (8.0 * (at(1.0) - at(-1.0)) - (at(2.0) - at(-2.0))) / (12.0 * h);
  }
  return grad;
}

}  // namespace

double second_difference(const FunctionalId& id, const FamilySpec& family,
                         std::span<const double> theta, std::span<const double> direction,
                         double h, const GridQuadrature& quad) {
  if (theta.size() != direction.size()) throw Error(ErrorKind::ShapeMismatch, "direction size");
  std::vector<double> up(theta.begin(), theta.end()), dn = up;
  for (std::size_t i = 0; i < up.size(); ++i) {
    up[i] += h * direction[i];
    dn[i] -= h * direction[i];
  }
  const double f0 = family_value(id, family, theta, quad);
  return (family_value(id, family, up, quad) - 2.0 * f0 + family_value(id, family, dn, quad)) /
         (h * h);
}

MinimizeResult minimize_deviation(const FunctionalId& id, const FamilySpec& family,
                                  std::span<const double> theta0, const GridQuadrature& quad,
                                  const MinimizeOptions& opt) {
  id.validate();
  family.validate();
  opt.validate();
  const int k = family.parameter_count();
  if (static_cast<int>(theta0.size()) != k)
    throw Error(ErrorKind::ShapeMismatch, "initial parameter count");

  MinimizeResult res;
  res.theta.assign(theta0.begin(), theta0.end());
  double f = family_value(id, family, res.theta, quad);
  res.trace.push_back(f);
  double step = opt.step0;

  for (int it = 0; it < opt.max_iters; ++it) {
    const std::vector<double> grad = family_gradient(id, family, res.theta, quad, opt.fd_step);
    double g2 = 0.0;
    for (double v : grad) g2 += v * v;
    res.grad_norm = std::sqrt(g2);
    if (res.grad_norm < opt.grad_tol) {
      res.converged = true;
      return res;
    }

    int halvings = 0;
    while (true) {
      std::vector<double> trial = res.theta;
      for (int a = 0; a < k; ++a) trial[a] -= step * grad[a];
      double ft = 0.0;
      bool ok = true;
      try {
        ft = family_value(id, family, trial, quad);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NotPositiveDefinite && e.kind() != ErrorKind::NumericalFailure)
          throw;
        ok = false;
      }
      if (ok && std::isfinite(ft) && ft <= f - opt.armijo * step * g2) {
        res.theta = std::move(trial);
        f = ft;
        break;
      }
      if (++halvings > 40)
        throw Error(ErrorKind::LineSearchFailed,
                    "no sufficient decrease after 40 step reductions");
      step *= opt.backtrack;
    }
    res.trace.push_back(f);
    res.iterations = it + 1;
    step *= opt.growth;
  }

  // Final gradient check so that convergence reflects the returned point.
  double g2 = 0.0;
  for (double d : family_gradient(id, family, res.theta, quad, opt.fd_step)) g2 += d * d;
  res.grad_norm = std::sqrt(g2);
  res.converged = res.grad_norm < opt.grad_tol;
  return res;
}

}  // namespace flatlab
