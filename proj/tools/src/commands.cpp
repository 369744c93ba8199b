#include <algorithm>
#include <chrono>
#include <cmath>

#include "flatlab/algebra.hpp"
#include "flatlab/app/app.hpp"
#include "flatlab/curvature.hpp"
#include "flatlab/flatness.hpp"
#include "flatlab/parallel.hpp"
#include "flatlab/variational.hpp"

#ifndef FLATLAB_VERSION
#define FLATLAB_VERSION "0.0.0"
#endif

namespace flatlab::app {

namespace {

template <class TT>
json flat_json(const TT& t) {
  return json(std::vector<double>(t.flat().begin(), t.flat().end()));
}

json matrix_json(const Matrix2& m) {
  json rows = json::array();
  for (int i = 0; i < m.dim(); ++i) {
    json row = json::array();
    for (int k = 0; k < m.dim(); ++k) row.push_back(m(i, k));
    rows.push_back(row);
  }
  return rows;
}

// Grid nodes far enough inside the box for finite-difference stencils.
std::vector<Point> interior_nodes(const FieldSpec& s, double margin) {
  std::vector<Point> out;
  for (const Point& x : s.box.nodes())
    if (s.box.contains(x, margin)) out.push_back(x);
  if (out.empty())
    throw Error(ErrorKind::OutOfDomain, "no grid node lies inside the finite-difference margin");
  return out;
}

void expect_value(Report& r, const RunConfig& c, const std::string& key, double actual) {
  if (!c.expect.contains(key)) return;
  const double want = c.expect[key].get<double>();
  r.checks.push_back(Check::at_most("expect." + key, std::abs(actual - want), c.tol.expect,
                                    "expected " + c.expect[key].dump()));
}

// ----------------------------------------------------------------- commands

void curvature_command(const RunConfig& c, Report& r) {
  const FieldSpec& s = *c.field;
  const Point& x = *c.point;
  if (!s.box.contains(x)) throw Error(ErrorKind::OutOfDomain, "point lies outside the box");
  const ConnectionJet1 cj = connection_jet(s, x, c.fd, c.jets);
  const Tensor4Mixed mixed = riemann_mixed(cj);
  const Matrix2 ric = ricci_from_mixed(mixed);
  const MixedResiduals mr = mixed_residuals(mixed);
  const double scale = std::max(max_abs(mixed), 1.0);
  r.values["christoffel"] = flat_json(cj.gamma);
  r.values["riemann_mixed"] = flat_json(mixed);
  r.values["ricci"] = matrix_json(ric);
  r.values["max_curvature"] = max_abs(mixed);
  r.checks.push_back(Check::at_most("antisym", mr.antisymmetry, c.tol.identity * scale));
  r.checks.push_back(Check::at_most("bianchi1", mr.bianchi1, c.tol.identity * scale));
  if (s.is_metric()) {
    const MetricJet2 j = eval_metric_jet2(s, x, c.fd, c.jets);
    const CurvatureBundle b = curvature_bundle(j);
    r.values["metric"] = matrix_json(j.g);
    r.values["riemann_lower"] = flat_json(b.lower);
    r.values["scalar"] = b.scalar;
    if (b.weyl) r.values["max_weyl"] = max_abs(*b.weyl);
    expect_value(r, c, "scalar", b.scalar);
  } else if (c.expect.contains("scalar")) {
    throw Error(ErrorKind::ConfigInvalid, "expect.scalar: connection fields have no scalar");
  }
}

struct VerifyRow {
  double norm = 0.0, antisym = 0.0, bianchi1 = 0.0, bianchi2 = 0.0, veblen = 0.0,
         pair = 0.0, weyl_trace = 0.0;
};

VerifyRow verify_point(const RunConfig& c, const Point& x) {
  const FieldSpec& s = *c.field;
  VerifyRow v;
  const ConnectionJet1 cj = connection_jet(s, x, c.fd, c.jets);
  const Tensor4Mixed mixed = riemann_mixed(cj);
  const Array5 nabla = covariant_derivative_R(cj, mixed, riemann_derivative(s, x, c.fd, c.jets));
  v.bianchi2 = second_bianchi_residual(nabla);
  if (!s.is_metric()) {
    const MixedResiduals m = mixed_residuals(mixed);
    v.norm = max_abs(mixed);
    v.antisym = m.antisymmetry;
    v.bianchi1 = m.bianchi1;
    return v;
  }
  v.veblen = veblen_residual(nabla);
  const MetricJet2 j = eval_metric_jet2(s, x, c.fd, c.jets);
  const Tensor4Lower low = riemann_lower(j);
  const SymmetryResiduals sr = symmetry_residuals(low);
  v.norm = max_abs(low);
  v.antisym = std::max(sr.first_pair, sr.last_pair);
  v.bianchi1 = sr.bianchi1;
  v.pair = sr.pair_exchange;
  const int n = s.dim();
  if (n >= 3) {
    const Tensor4Lower w = weyl(j);
    const Matrix2 gi = invert_spd(j.g);
    for (int jj = 0; jj < n; ++jj)
      for (int l = 0; l < n; ++l) {
        double t = 0.0;
        for (int i = 0; i < n; ++i)
          for (int k = 0; k < n; ++k) t += gi(i, k) * w(i, jj, k, l);
        v.weyl_trace = std::max(v.weyl_trace, std::abs(t));
      }
  }
  return v;
}

void verify_command(const RunConfig& c, Report& r) {
  const FieldSpec& s = *c.field;
  const std::vector<Point> pts = interior_nodes(s, 2.0 * c.fd.margin());
  const auto rows =
      parallel_map<VerifyRow>(pts.size(), [&](std::size_t i) { return verify_point(c, pts[i]); });
  VerifyRow worst;
  for (const VerifyRow& v : rows) {
    worst.norm = std::max(worst.norm, v.norm);
    worst.antisym = std::max(worst.antisym, v.antisym);
    worst.bianchi1 = std::max(worst.bianchi1, v.bianchi1);
    worst.bianchi2 = std::max(worst.bianchi2, v.bianchi2);
    worst.veblen = std::max(worst.veblen, v.veblen);
    worst.pair = std::max(worst.pair, v.pair);
    worst.weyl_trace = std::max(worst.weyl_trace, v.weyl_trace);
  }
  const double scale = std::max(worst.norm, 1.0);
  const double alg = c.tol.identity * scale;
  const double der = c.tol.fd_identity * scale;
  r.values["max_curvature"] = worst.norm;
  r.values["points"] = pts.size();
  r.checks.push_back(Check::at_most("antisym", worst.antisym, alg));
  r.checks.push_back(Check::at_most("bianchi1", worst.bianchi1, alg));
  r.checks.push_back(Check::at_most("bianchi2", worst.bianchi2, der));
  if (s.is_metric()) {
    r.checks.push_back(Check::at_most("veblen", worst.veblen, der));
    r.checks.push_back(Check::at_most("pair-sym", worst.pair, alg));
    if (s.dim() >= 3)
      r.checks.push_back(Check::at_most("weyl-trace", worst.weyl_trace, alg));
    else
      r.checks.push_back(Check::skipped("weyl-trace", "the Weyl tensor needs n >= 3"));
  } else {
    r.checks.push_back(Check::skipped("veblen", "stated for metric curvature"));
    r.checks.push_back(Check::skipped("pair-sym", "connection curvature has no pair symmetry"));
    r.checks.push_back(Check::skipped("weyl-trace", "connection fields carry no metric"));
  }
}

void flatness_command(const RunConfig& c, Report& r) {
  const FieldSpec& s = *c.field;
  std::vector<Point> pts;
  if (c.jets == JetMethod::FiniteDifference) pts = interior_nodes(s, c.fd.margin());
  const FlatnessReport f = classify_flatness(s, pts, c.tol.flat, c.fd, c.jets);
  r.values["connection_flat"] = f.connection_flat;
  r.values["curvature_flat"] = f.curvature_flat;
  r.values["ricci_flat"] = f.ricci_flat;
  r.values["scalar_flat"] = f.scalar_flat;
  r.values["max_connection"] = f.max_connection;
  r.values["max_curvature"] = f.max_curvature;
  r.values["max_ricci"] = f.max_ricci;
  r.values["scalar"] = f.max_scalar ? json(*f.max_scalar) : json(nullptr);
  r.values["points"] = f.points_checked;

  const std::pair<const char*, bool> flags[] = {{"connection_flat", f.connection_flat},
                                                {"curvature_flat", f.curvature_flat},
                                                {"ricci_flat", f.ricci_flat},
                                                {"scalar_flat", f.scalar_flat}};
  for (const auto& [name, got] : flags) {
    if (!c.expect.contains(name)) continue;
    const bool want = c.expect[name].get<bool>();
    Check ch = Check::at_most(std::string("expect.") + name, got == want ? 0.0 : 1.0, 0.0,
                              std::string("expected ") + (want ? "true" : "false"));
    r.checks.push_back(ch);
  }
  if (c.expect.contains("scalar")) {
    if (!f.max_scalar)
      throw Error(ErrorKind::ConfigInvalid, "expect.scalar: connection fields have no scalar");
    expect_value(r, c, "scalar", *f.max_scalar);
  }
}

void deviation_command(const RunConfig& c, Report& r) {
  const FieldSpec& s = *c.field;
  const FunctionalId& id = *c.functional;
  const GridQuadrature& q = *c.quad;
  const double value = functional(id, s, q, c.fd, c.jets);
  r.values["functional"] = value;
  r.values["id"] = id.name();
  if (id.density != Density::TotalScalar)
    r.checks.push_back(Check::at_least("non-negative", value, 0.0));
  if (!c.oracle_enabled) return;

  std::vector<BumpPerturbation> bumps;
  for (int k = 0; k < c.oracle_bumps; ++k)
    bumps.push_back(BumpPerturbation::random(id.variable, q.region(),
                                             c.seed + static_cast<std::uint64_t>(k)));
  const OracleMatch m = el_oracle_match(id, s, bumps, q, c.oracle_eps, c.fd, c.jets);
  json rows = json::array();
  for (const OracleRow& row : m.rows)
    rows.push_back({{"gateaux", row.gateaux}, {"pairing", row.pairing}, {"mismatch", row.mismatch}});
  r.values["oracle"] = {{"rows", rows},
                        {"worst", m.worst},
                        {"fitted_scale", m.fitted_scale},
                        {"scaled_worst", m.scaled_worst}};
  r.checks.push_back(Check::at_most("oracle", m.worst, c.tol.oracle,
                                    "worst relative mismatch over " +
                                        std::to_string(c.oracle_bumps) + " bumps"));
}

void minimize_command(const RunConfig& c, Report& r) {
  const MinimizeResult m =
      minimize_deviation(*c.functional, *c.family, c.theta0, *c.quad, c.minimize);
  double rise = 0.0;
  for (std::size_t k = 1; k < m.trace.size(); ++k)
    rise = std::max(rise, m.trace[k] - m.trace[k - 1]);
  double norm = 0.0;
  for (double t : m.theta) norm += t * t;
  norm = std::sqrt(norm);
  r.values["theta"] = m.theta;
  r.values["trace"] = m.trace;
  r.values["iterations"] = m.iterations;
  r.values["converged"] = m.converged;
  r.values["grad_norm"] = m.grad_norm;
  r.values["functional"] = m.trace.back();
  r.values["theta_norm"] = norm;
  r.checks.push_back(Check::at_most("monotone", rise, 0.0, "largest increase along the trace"));
  r.checks.push_back(Check::at_most("converged", m.grad_norm, c.minimize.grad_tol,
                                    "gradient norm at the returned point"));
  if (c.expect.contains("functional_below"))
    r.checks.push_back(Check::at_most("expect.functional_below", m.trace.back(),
                                      c.expect["functional_below"].get<double>()));
  if (c.expect.contains("theta_norm_below"))
    r.checks.push_back(Check::at_most("expect.theta_norm_below", norm,
                                      c.expect["theta_norm_below"].get<double>()));
}

void normal_metric_command(const RunConfig& c, Report& r) {
  const CurvaturePrescription p =
      CurvaturePrescription::random(c.seed, c.prescription_n, c.prescription_scale);
  const FieldSpec s = normal_metric_from_curvature(p, c.prescription_box);
  const Point origin(static_cast<std::size_t>(c.prescription_n), 0.0);
  const Tensor4Lower got = riemann_lower(eval_metric_jet2(s, origin, c.fd, c.jets));
  const double e1 = gray_volume_check(s, c.gray_rho);
  const double e2 = gray_volume_check(s, c.gray_rho / 2);
  r.values["field"] = field_to_json(s);
  r.values["r0"] = flat_json(p.r0);
  r.values["gray_error"] = {e1, e2};
  r.checks.push_back(Check::at_most("curvature-at-origin", max_abs_diff(got, p.r0),
                                    c.tol.prescription));
  if (e2 > 0.0)
    r.checks.push_back(Check::at_least("gray-volume-order", e1 / e2, c.tol.gray_ratio,
                                       "error ratio when rho halves"));
  else
    r.checks.push_back(Check::skipped("gray-volume-order", "volume expansion is exact"));
}

void census_command(const RunConfig& c, Report& r) {
  json rows = json::array();
  for (FlatnessSystem sys : c.census_systems)
    for (int n : c.census_dims) {
      const Census k = system_census(sys, n);
      rows.push_back({{"system", std::string(to_string(sys))},
                      {"n", n},
                      {"equations", k.equations},
                      {"unknowns", k.unknowns},
                      {"class", std::string(to_string(k.determinacy))}});
    }
  r.values["census"] = rows;
}

}  // namespace

int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::ConfigInvalid:
    case ErrorKind::ShapeMismatch:
    case ErrorKind::DimensionTooSmall:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::Unsupported:
    case ErrorKind::IoFailure: return kExitConfigInvalid;
    case ErrorKind::OutOfDomain:
    case ErrorKind::GaugeViolation: return kExitOutOfDomain;
    case ErrorKind::NotPositiveDefinite:
    case ErrorKind::LineSearchFailed:
    case ErrorKind::NumericalFailure: return kExitNumerical;
  }
  return kExitNumerical;
}

Report run(const RunConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  Report r;
  r.command = std::string(to_string(config.command));
  r.version = FLATLAB_VERSION;
  r.config = config.normalized;
  r.config_hash = config_hash(config.normalized);
  switch (config.command) {
    case Command::Curvature: curvature_command(config, r); break;
    case Command::Verify: verify_command(config, r); break;
    case Command::Flatness: flatness_command(config, r); break;
    case Command::Deviation: deviation_command(config, r); break;
    case Command::Minimize: minimize_command(config, r); break;
    case Command::NormalMetric: normal_metric_command(config, r); break;
    case Command::Census: census_command(config, r); break;
  }
  for (const Check& ch : r.checks)
    if (!std::isfinite(ch.value))
      throw Error(ErrorKind::NumericalFailure, "check '" + ch.name + "' is not finite");
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace flatlab::app
