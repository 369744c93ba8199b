#include "flatlab/fields.hpp"

#include <cmath>
#include <numbers>

#include "flatlab/algebra.hpp"
#include "flatlab/rng.hpp"

namespace flatlab {

// ---------------------------------------------------------------- ChartBox

ChartBox ChartBox::cube(int n, double lo, double hi, int grid) {
  return make(std::vector<double>(static_cast<std::size_t>(n), lo),
              std::vector<double>(static_cast<std::size_t>(n), hi),
              std::vector<int>(static_cast<std::size_t>(n), grid));
}

ChartBox ChartBox::make(std::vector<double> lower, std::vector<double> upper,
                        std::vector<int> grid) {
  ChartBox b;
  b.n = static_cast<int>(lower.size());
  b.lower = std::move(lower);
  b.upper = std::move(upper);
  b.grid = std::move(grid);
  b.validate();
  return b;
}

void ChartBox::validate() const {
  if (n < 1 || n > kMaxDim) throw Error(ErrorKind::ConfigInvalid, "box dimension out of range");
  if (lower.size() != static_cast<std::size_t>(n) || upper.size() != lower.size() ||
      grid.size() != lower.size())
    throw Error(ErrorKind::ConfigInvalid, "box lower/upper/grid lengths disagree");
  for (int i = 0; i < n; ++i) {
    if (!(lower[i] < upper[i])) throw Error(ErrorKind::ConfigInvalid, "box needs lower < upper");
    if (grid[i] < 2) throw Error(ErrorKind::ConfigInvalid, "box grid must be >= 2 per axis");
  }
}

double ChartBox::min_extent() const {
  double m = extent(0);
  for (int i = 1; i < n; ++i) m = std::min(m, extent(i));
  return m;
}

Point ChartBox::center() const {
  Point c(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) c[i] = 0.5 * (lower[i] + upper[i]);
  return c;
}

bool ChartBox::contains(std::span<const double> x, double margin) const {
  if (x.size() != static_cast<std::size_t>(n)) return false;
  for (int i = 0; i < n; ++i)
    if (x[i] < lower[i] + margin || x[i] > upper[i] - margin) return false;
  return true;
}

std::vector<Point> ChartBox::nodes() const {
  std::vector<Point> out;
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  for (;;) {
    Point p(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      p[i] = lower[i] + extent(i) * idx[i] / static_cast<double>(grid[i] - 1);
    out.push_back(std::move(p));
    int ax = n - 1;
    while (ax >= 0 && ++idx[ax] == grid[ax]) idx[ax--] = 0;
    if (ax < 0) break;
  }
  return out;
}

// ----------------------------------------------------------- ScalarProfile

ScalarProfile::Kind ScalarProfile::kind_from_string(std::string_view s) {
  for (auto k : {Kind::Constant, Kind::Affine, Kind::Quadratic, Kind::Exp, Kind::Trig,
                 Kind::ReciprocalAffine})
    if (to_string(k) == s) return k;
  throw Error(ErrorKind::ConfigInvalid, "unknown profile '" + std::string(s) + "'");
}

std::string_view ScalarProfile::to_string(Kind k) noexcept {
  switch (k) {
    case Kind::Constant: return "constant";
    case Kind::Affine: return "affine";
    case Kind::Quadratic: return "quadratic";
    case Kind::Exp: return "exp";
    case Kind::Trig: return "trig";
    case Kind::ReciprocalAffine: return "reciprocal_affine";
  }
  return "?";
}

void ScalarProfile::validate(int dim) const {
  const auto m = static_cast<std::size_t>(dim);
  auto need = [&](std::size_t lo, std::size_t hi) {
    if (coeffs.size() < lo || coeffs.size() > hi)
      throw Error(ErrorKind::ConfigInvalid,
                  "profile '" + std::string(to_string(kind)) + "' expects " +
                      std::to_string(lo) + ".." + std::to_string(hi) + " coefficients, got " +
                      std::to_string(coeffs.size()));
  };
  switch (kind) {
    case Kind::Constant: need(1, 1); break;
    case Kind::Affine: need(1 + m, 1 + m); break;
    case Kind::Quadratic:
    case Kind::Exp: need(1 + m, 1 + 2 * m); break;
    case Kind::Trig: need(3 + m, 3 + m); break;
    case Kind::ReciprocalAffine: need(1 + m, 1 + m); break;
  }
}

Jet2 ScalarProfile::evaluate(std::span<const Jet2> x) const {
  const std::size_t m = x.size();
  auto coef = [&](std::size_t i) { return i < coeffs.size() ? coeffs[i] : 0.0; };
  auto poly = [&]() {
    Jet2 s(coef(0));
    for (std::size_t i = 0; i < m; ++i) {
      s += coef(1 + i) * x[i];
      const double b = coef(1 + m + i);
      if (b != 0.0) s += b * x[i] * x[i];
    }
    return s;
  };
  switch (kind) {
    case Kind::Constant: return Jet2(coef(0));
    case Kind::Affine:
    case Kind::Quadratic: return poly();
    case Kind::Exp: return exp(2.0 * poly());
    case Kind::Trig: {
      Jet2 arg(coef(2));
      for (std::size_t i = 0; i < m; ++i) arg += coef(3 + i) * x[i];
      return coef(0) + coef(1) * sin(arg);
    }
    case Kind::ReciprocalAffine: {
      Jet2 s(coef(0));
      for (std::size_t i = 0; i < m; ++i) s += coef(1 + i) * x[i];
      return -reciprocal(s);
    }
  }
  return Jet2(0.0);
}

Jet2 TrigSeries::evaluate(std::span<const Jet2> x) const {
  Jet2 s(constant);
  for (const auto& t : terms) {
    Jet2 arg(t.phase);
    for (std::size_t i = 0; i < x.size(); ++i)
      if (t.wave[i] != 0) arg += static_cast<double>(t.wave[i]) * x[i];
    s += t.amplitude * sin(arg);
  }
  return s;
}

// --------------------------------------------------------------- FieldSpec

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

bool FieldSpec::is_metric() const {
  return std::visit(
      Overloaded{[](const field::TabulatedConnection&) { return false; },
                 [](const field::SolitonConnection&) { return false; },
                 [](const field::RandomConnection&) { return false; },
                 [](const field::Custom& c) { return !c.connection; },
                 [](const auto&) { return true; }},
      params);
}

std::string_view FieldSpec::kind_name() const {
  static constexpr std::string_view kNames[] = {
      "EuclideanConstant", "Conformal",           "RoundSphere",
      "PolynomialSPD",     "Soliton",             "QuadraticMetric",
      "TabulatedConnection", "SolitonConnection", "RandomConnection",
      "Custom"};
  return kNames[params.index()];
}

std::vector<Jet2> coordinate_jets(std::span<const double> x) {
  const int n = static_cast<int>(x.size());
  std::vector<Jet2> out;
  out.reserve(x.size());
  for (int i = 0; i < n; ++i) out.push_back(Jet2::variable(x[i], i, n));
  return out;
}

MetricFn metric_function(const FieldSpec& spec) {
  const int n = spec.dim();
  if (!spec.is_metric())
    throw Error(ErrorKind::Unsupported, "field kind is a connection, not a metric");
  return std::visit(
      Overloaded{
          [n](const field::EuclideanConstant& p) -> MetricFn {
            return [n, c = p.c](std::span<const Jet2>) {
              JetMatrix g(n);
              for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) g(i, j) = Jet2(c(i, j));
              return g;
            };
          },
          [n](const field::Conformal& p) -> MetricFn {
            return [n, p](std::span<const Jet2> x) {
              const Jet2 f = p.profile.evaluate(x);
              JetMatrix g(n);
              for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) g(i, j) = p.c(i, j) * f;
              return g;
            };
          },
          [n](const field::RoundSphere& p) -> MetricFn {
            return [n, r2 = p.radius * p.radius](std::span<const Jet2> x) {
              JetMatrix g(n);
              Jet2 w(r2);
              for (int k = 0; k < n; ++k) {
                g(k, k) = w;
                if (k + 1 < n) {
                  const Jet2 s = sin(x[k]);
                  w = w * s * s;
                }
              }
              return g;
            };
          },
          [n](const field::PolynomialSpd& p) -> MetricFn {
            return [n, p](std::span<const Jet2> x) {
              JetMatrix a(n);
              for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) a(i, j) = p.a[static_cast<std::size_t>(i * n + j)].evaluate(x);
              JetMatrix g(n);
              for (int i = 0; i < n; ++i)
                for (int j = i; j < n; ++j) {
                  Jet2 s(i == j ? 0.5 : 0.0);
                  for (int k = 0; k < n; ++k) s += a(k, i) * a(k, j);
                  g(i, j) = s;
                  g(j, i) = s;
                }
              return g;
            };
          },
          [n](const field::Soliton& p) -> MetricFn {
            return [n, p](std::span<const Jet2> x) {
              Jet2 t(0.0);
              for (int i = 0; i < n; ++i) t += p.direction[static_cast<std::size_t>(i)] * x[i];
              const Jet2 s = p.profile.evaluate(std::span<const Jet2>(&t, 1));
              JetMatrix g(n);
              for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) g(i, j) = p.c(i, j) + p.d(i, j) * s;
              return g;
            };
          },
          [n](const field::QuadraticMetric& p) -> MetricFn {
            return [n, p](std::span<const Jet2> x) {
              JetMatrix g(n);
              for (int j = 0; j < n; ++j)
                for (int l = j; l < n; ++l) {
                  Jet2 s(p.base(j, l));
                  for (int i = 0; i < n; ++i)
                    for (int k = 0; k < n; ++k)
                      if (p.q(j, l, i, k) != 0.0) s += p.q(j, l, i, k) * x[i] * x[k];
                  g(j, l) = s;
                  g(l, j) = s;
                }
              return g;
            };
          },
          [n](const field::Custom& p) -> MetricFn {
            return [n, p](std::span<const Jet2> x) {
              JetMatrix g(n);
              for (int i = 0; i < n; ++i)
                for (int j = i; j < n; ++j) {
                  const Jet2 v = p.components[static_cast<std::size_t>(i * n + j)].evaluate(x);
                  g(i, j) = v;
                  g(j, i) = v;
                }
              return g;
            };
          },
          [](const auto&) -> MetricFn {
            throw Error(ErrorKind::Unsupported, "not a metric kind");
          }},
      spec.params);
}

ConnectionFn connection_function(const FieldSpec& spec) {
  const int n = spec.dim();
  if (spec.is_metric())
    throw Error(ErrorKind::Unsupported,
                "metric kinds have Levi-Civita connections; use curvature::connection_jet");
  return std::visit(
      Overloaded{
          [n](const field::TabulatedConnection& p) -> ConnectionFn {
            return [n, c = p.c](std::span<const Jet2>) {
              JetTensor3 gam(n);
              for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                  for (int k = 0; k < n; ++k) gam(i, j, k) = Jet2(c(i, j, k));
              return gam;
            };
          },
          [n](const field::SolitonConnection& p) -> ConnectionFn {
            return [n, p](std::span<const Jet2> x) {
              Jet2 s(p.shift);
              for (int i = 0; i < n; ++i) s += x[i];
              const Jet2 f = -reciprocal(s);
              JetTensor3 gam(n);
              for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                  for (int k = 0; k < n; ++k) gam(i, j, k) = p.c(i, j, k) * f;
              return gam;
            };
          },
          [n](const field::RandomConnection& p) -> ConnectionFn {
            return [n, p](std::span<const Jet2> x) {
              JetTensor3 gam(n);
              for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                  for (int k = j; k < n; ++k) {
                    const Jet2 v =
                        p.entries[static_cast<std::size_t>((i * n + j) * n + k)].evaluate(x);
                    gam(i, j, k) = v;
                    gam(i, k, j) = v;
                  }
              return gam;
            };
          },
          [n](const field::Custom& p) -> ConnectionFn {
            return [n, p](std::span<const Jet2> x) {
              JetTensor3 gam(n);
              for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                  for (int k = 0; k < n; ++k)
                    gam(i, j, k) =
                        p.components[static_cast<std::size_t>((i * n + j) * n + k)].evaluate(x);
              return gam;
            };
          },
          [](const auto&) -> ConnectionFn {
            throw Error(ErrorKind::Unsupported, "not a connection kind");
          }},
      spec.params);
}

// ------------------------------------------------------------------- jets

FDConfig FDConfig::defaults(const ChartBox& box) {
  const double e = box.min_extent();
  return FDConfig{1e-5 * e, 1e-3 * e};
}

void FDConfig::validate(const ChartBox& box) const {
  const double limit = box.min_extent() / 4.0;
  if (!(h1 > 0.0 && h1 < limit && h2 > 0.0 && h2 < limit))
    throw Error(ErrorKind::ConfigInvalid, "finite-difference steps must lie in (0, extent/4)");
}

MetricJet2 metric_jet_from(const JetMatrix& gj, std::span<const double> x) {
  const int n = gj.dim();
  MetricJet2 jet{Point(x.begin(), x.end()), Matrix2(n), Array3(n), Array4(n)};
  for (int r = 0; r < n; ++r)
    for (int s = 0; s < n; ++s) {
      const Jet2& e = gj(r, s);
      jet.g(r, s) = e.v;
      for (int t = 0; t < n; ++t) {
        jet.dg(t, r, s) = e.grad(t);
        // Symmetrize the derivative slots; jet arithmetic can differ in the last bit.
        for (int q = 0; q < n; ++q) jet.ddg(t, q, r, s) = 0.5 * (e.hess(t, q) + e.hess(q, t));
      }
    }
  return jet;
}

namespace {

void require_spd(const Matrix2& g) {
  if (!is_positive_definite(g))
    throw Error(ErrorKind::NotPositiveDefinite, "metric is not positive definite at point");
}

void require_inside(const ChartBox& box, std::span<const double> x, double margin) {
  if (!box.contains(x, margin)) throw Error(ErrorKind::OutOfDomain, "point outside chart box");
}

Matrix2 metric_value(const MetricFn& metric, int n, std::span<const double> x) {
  std::vector<Jet2> xs(x.begin(), x.end());
  const JetMatrix gj = metric(xs);
  Matrix2 g(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = gj(i, j).v;
  return g;
}

}  // namespace

MetricJet2 eval_metric_jet2(const MetricFn& metric, int n, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(n)) throw Error(ErrorKind::ShapeMismatch, "point size");
  const auto xs = coordinate_jets(x);
  return metric_jet_from(metric(xs), x);
}

MetricJet2 eval_metric_jet2_fd(const MetricFn& metric, int n, std::span<const double> x,
                               const FDConfig& fd) {
  if (x.size() != static_cast<std::size_t>(n)) throw Error(ErrorKind::ShapeMismatch, "point size");
  MetricJet2 jet{Point(x.begin(), x.end()), metric_value(metric, n, x), Array3(n), Array4(n)};
  Point y(x.begin(), x.end());
  auto at = [&](int a, double da, int b, double db) {
    Point z = y;
    z[a] += da;
    if (b >= 0) z[b] += db;
    return metric_value(metric, n, z);
  };
  for (int t = 0; t < n; ++t) {
    const Matrix2 gp = at(t, fd.h1, -1, 0.0), gm = at(t, -fd.h1, -1, 0.0);
    for (int r = 0; r < n; ++r)
      for (int s = 0; s < n; ++s) jet.dg(t, r, s) = (gp(r, s) - gm(r, s)) / (2.0 * fd.h1);
  }
  const double h = fd.h2;
  for (int q = 0; q < n; ++q) {
    const Matrix2 gp = at(q, h, -1, 0.0), gm = at(q, -h, -1, 0.0);
    for (int r = 0; r < n; ++r)
      for (int s = 0; s < n; ++s)
        jet.ddg(q, q, r, s) = (gp(r, s) - 2.0 * jet.g(r, s) + gm(r, s)) / (h * h);
    for (int t = q + 1; t < n; ++t) {
      const Matrix2 pp = at(q, h, t, h), pm = at(q, h, t, -h), mp = at(q, -h, t, h),
                    mm = at(q, -h, t, -h);
      for (int r = 0; r < n; ++r)
        for (int s = 0; s < n; ++s) {
          const double v = (pp(r, s) - pm(r, s) - mp(r, s) + mm(r, s)) / (4.0 * h * h);
          jet.ddg(q, t, r, s) = v;
          jet.ddg(t, q, r, s) = v;
        }
    }
  }
  return jet;
}

MetricJet2 eval_metric_jet2(const FieldSpec& spec, std::span<const double> x, const FDConfig& fd,
                            JetMethod method) {
  const MetricFn metric = metric_function(spec);
  MetricJet2 jet;
  if (method == JetMethod::Analytic) {
    require_inside(spec.box, x, 0.0);
    jet = eval_metric_jet2(metric, spec.dim(), x);
  } else {
    fd.validate(spec.box);
    require_inside(spec.box, x, fd.margin());
    jet = eval_metric_jet2_fd(metric, spec.dim(), x, fd);
  }
  require_spd(jet.g);
  return jet;
}

ConnectionJet1 connection_jet_from(const JetTensor3& gam, std::span<const double> x) {
  const int n = gam.dim();
  ConnectionJet1 jet{Point(x.begin(), x.end()), Tensor3(n), Array4(n)};
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int s = 0; s < n; ++s) {
        const Jet2& e = gam(l, i, s);
        jet.gamma(l, i, s) = e.v;
        for (int p = 0; p < n; ++p) jet.dgamma(p, l, i, s) = e.grad(p);
      }
  return jet;
}

ConnectionJet1 eval_connection_jet1(const FieldSpec& spec, std::span<const double> x,
                                    const FDConfig& fd, JetMethod method) {
  const int n = spec.dim();
  const ConnectionFn conn = connection_function(spec);
  if (method == JetMethod::Analytic) {
    require_inside(spec.box, x, 0.0);
    return connection_jet_from(conn(coordinate_jets(x)), x);
  }
  fd.validate(spec.box);
  require_inside(spec.box, x, fd.margin());
  auto value = [&](const Point& z) {
    std::vector<Jet2> zs(z.begin(), z.end());
    return conn(zs);
  };
  Point y(x.begin(), x.end());
  ConnectionJet1 jet{y, Tensor3(n), Array4(n)};
  const JetTensor3 g0 = value(y);
  for (std::size_t i = 0; i < g0.size(); ++i) jet.gamma.flat()[i] = g0.flat()[i].v;
  for (int p = 0; p < n; ++p) {
    Point a = y, b = y;
    a[p] += fd.h1;
    b[p] -= fd.h1;
    const JetTensor3 ga = value(a), gb = value(b);
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i)
        for (int s = 0; s < n; ++s)
          jet.dgamma(p, l, i, s) = (ga(l, i, s).v - gb(l, i, s).v) / (2.0 * fd.h1);
  }
  return jet;
}

// -------------------------------------------------------- random fields

namespace {

TrigSeries random_series(Rng& rng, int n, int degree, double const_lo, double const_hi,
                         double amp) {
  TrigSeries s;
  s.constant = rng.uniform(const_lo, const_hi);
  for (int m = 1; m <= degree; ++m) {
    TrigTerm t;
    t.amplitude = rng.uniform(-amp, amp) / m;
    bool nonzero = false;
    for (int i = 0; i < n; ++i) {
      t.wave[static_cast<std::size_t>(i)] = rng.integer(-m, m);
      nonzero |= t.wave[static_cast<std::size_t>(i)] != 0;
    }
    if (!nonzero) t.wave[static_cast<std::size_t>(rng.integer(0, n - 1))] = m;
    t.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    s.terms.push_back(t);
  }
  return s;
}

}  // namespace

FieldSpec random_spd_metric(std::uint64_t seed, int degree, const ChartBox& box) {
  box.validate();
  if (degree < 0 || degree > 3) throw Error(ErrorKind::ConfigInvalid, "degree must be in 0..3");
  const int n = box.n;
  Rng rng(seed);
  field::PolynomialSpd p;
  p.degree = degree;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double base = (i == j) ? 1.0 : 0.0;
      p.a.push_back(random_series(rng, n, degree, base - 0.4, base + 0.4, 0.4));
    }
  return FieldSpec{box, seed, p};
}

FieldSpec random_connection(std::uint64_t seed, int degree, const ChartBox& box,
                            double amplitude) {
  box.validate();
  const int n = box.n;
  Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
  field::RandomConnection p;
  p.degree = degree;
  p.entries.resize(static_cast<std::size_t>(n * n * n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = j; k < n; ++k) {
        auto s = random_series(rng, n, degree, -amplitude, amplitude, amplitude);
        p.entries[static_cast<std::size_t>((i * n + j) * n + k)] = s;
        p.entries[static_cast<std::size_t>((i * n + k) * n + j)] = s;
      }
  return FieldSpec{box, seed, p};
}

}  // namespace flatlab
