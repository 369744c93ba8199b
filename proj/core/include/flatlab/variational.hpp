#pragma once

// Least-squares flatness-deviation functionals, their Euler-Lagrange
// residuals, and a numerical first variation to test the residuals against.
//
// Residual index layouts:
//   Metric         E(m, n)     paired with a perturbation B_mn of g_mn
//   InverseMetric  E(m, n)     paired with B^mn, a perturbation of g^mn
//   Gamma          E(u, v, w)  paired with B^u_vw, symmetric in (v, w)
//
// Residuals for the inverse-metric variable are the derivative of the bare
// density L; the volume factor sqrt(det g) enters in the pairing. All other
// residuals already carry it.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flatlab/fields.hpp"
#include "flatlab/tensor.hpp"

namespace flatlab {

enum class Density { ConnNorm, RiemannNorm, RicciNorm, ScalarSquare, TotalScalar };
enum class Variable { Gamma, Metric, InverseMetric };
enum class Gauge { None, Harmonic };

std::string_view to_string(Density d) noexcept;
std::string_view to_string(Variable v) noexcept;
std::string_view to_string(Gauge g) noexcept;
Density density_from_string(std::string_view s);
Variable variable_from_string(std::string_view s);
Gauge gauge_from_string(std::string_view s);

struct FunctionalId {
  Density density = Density::ConnNorm;
  Variable variable = Variable::Metric;
  Gauge gauge = Gauge::None;

  /// RicciNorm with a metric variable needs the harmonic gauge, and the
  /// harmonic gauge means nothing elsewhere. Throws ConfigInvalid.
  void validate() const;
  /// Whether el_residual has a formula for this id.
  bool has_residual() const;
  /// "Density/Variable" with "/harmonic" appended when gauged.
  std::string name() const;
  static FunctionalId parse(std::string_view s);

  bool operator==(const FunctionalId&) const = default;
};

/// The twelve ids with an Euler-Lagrange residual, in a fixed order.
std::vector<FunctionalId> residual_catalog();

/// Midpoint rule on a uniform grid of cells over box, skipping `margin`
/// cells at every face.
struct GridQuadrature {
  ChartBox box;
  std::vector<int> cells;
  int margin = 0;

  /// Cells per axis taken from box.grid; the margin is the smallest one that
  /// keeps finite-difference stencils of step h2 inside the box.
  static GridQuadrature make(const ChartBox& box, const FDConfig& fd);
  static GridQuadrature uniform(const ChartBox& box, int cells_per_axis, int margin = 0);

  void validate() const;
  /// Throws ConfigInvalid when margin < ceil(2 h2 / cell).
  void require_margin(const FDConfig& fd) const;
  double cell_size(int axis) const;
  double cell_volume() const;
  /// Integration region: the box minus the margin cells.
  ChartBox region() const;
  /// Cell midpoints of the region, first axis slowest.
  std::vector<Point> points() const;
};

/// Compactly supported symmetric perturbation field. Every component is an
/// affine polynomial times a window that is the product over axes of
/// (4 s(t) s(1 - t))^3, s the quintic smoothstep and t the position scaled
/// to [0, 1] over the support. The window and its first eight derivatives
/// vanish on the support boundary.
struct BumpPerturbation {
  Variable variable = Variable::Metric;
  int n = 0;
  std::vector<double> lower;  // support
  std::vector<double> upper;
  std::vector<double> coeffs;  // (n + 1) per component, components row-major

  static BumpPerturbation random(Variable variable, const ChartBox& region, std::uint64_t seed,
                                 double amplitude = 0.1);

  int component_count() const;
  bool in_support(std::span<const double> x) const;
  double window(std::span<const double> x) const;
  /// Component jets, n*n (matrix) or n^3 (Gamma) row-major.
  std::vector<Jet2> jets(std::span<const double> x) const;
  std::vector<double> values(std::span<const double> x) const;
};

/// Everything a density needs at one point.
struct PointGeometry {
  Point x;
  Matrix2 g;
  Matrix2 g_inv;
  double sqrt_det = 1.0;
  std::optional<MetricJet2> metric;  // absent when the connection is free
  ConnectionJet1 conn;
};

/// Geometry of a field for the given variable. Gamma-variable ids on a metric
/// spec start from its Levi-Civita connection and keep g fixed; on a
/// connection spec the metric is the identity.
PointGeometry point_geometry(const FieldSpec& spec, Variable variable, std::span<const double> x,
                             const FDConfig& fd, JetMethod method = JetMethod::Analytic);

/// Same, with the declared variable moved by eps * bump.
PointGeometry perturbed_geometry(const FieldSpec& spec, Variable variable,
                                 std::span<const double> x, const FDConfig& fd, JetMethod method,
                                 const BumpPerturbation& bump, double eps);

/// The bare density L at a point.
double lagrangian_density(const FunctionalId& id, const PointGeometry& p);
/// L sqrt(det g).
double density(const FunctionalId& id, const PointGeometry& p);

double functional(const FunctionalId& id, const FieldSpec& spec, const GridQuadrature& quad,
                  const FDConfig& fd, JetMethod method = JetMethod::Analytic);
double functional(const FunctionalId& id, const FieldSpec& spec, const GridQuadrature& quad);

struct ElResidual {
  Variable variable = Variable::Metric;
  Matrix2 matrix;  // metric variables
  Tensor3 tensor;  // Gamma

  double max_abs() const;
  /// Contraction with the perturbation components at a point.
  double contract(std::span<const double> bump_values) const;
};

/// Euler-Lagrange residual of the displayed formula for id at x. Total
/// derivatives of bracket fields use central differences of step fd.h2.
/// Throws GaugeViolation for harmonic ids off-gauge and Unsupported for ids
/// without a formula.
ElResidual el_residual(const FunctionalId& id, const FieldSpec& spec, std::span<const double> x,
                       const FDConfig& fd, JetMethod method = JetMethod::Analytic);

/// Central difference (I[+eps] - I[-eps]) / (2 eps) along the bump. Only
/// cells in the bump support change, so only those are summed.
double gateaux_derivative(const FunctionalId& id, const FieldSpec& spec,
                          const BumpPerturbation& bump, const GridQuadrature& quad, double eps,
                          const FDConfig& fd, JetMethod method = JetMethod::Analytic);

/// Midpoint sum of <E, B> over the bump support, weighted by sqrt(det g) for
/// inverse-metric ids.
double residual_pairing(const FunctionalId& id, const FieldSpec& spec,
                        const BumpPerturbation& bump, const GridQuadrature& quad,
                        const FDConfig& fd, JetMethod method = JetMethod::Analytic);

struct OracleRow {
  double gateaux = 0.0;
  double pairing = 0.0;
  double mismatch = 0.0;  // relative
};

struct OracleMatch {
  std::vector<OracleRow> rows;
  double worst = 0.0;
  /// Least-squares s with gateaux ~ s * pairing, and the worst mismatch
  /// after rescaling. A clean fit with s != 1 points at a normalization slip
  /// in the displayed formula rather than a missing term.
  double fitted_scale = 1.0;
  double scaled_worst = 0.0;
};

/// |a - b| / max(|a|, |b|), or |a - b| when both are below abs_floor. The
/// default floor sits above the finite-difference noise of the D-terms, so a
/// variation that vanishes identically compares as zero against zero.
double relative_mismatch(double a, double b, double abs_floor = 1e-8);

/// Compares the numerical first variation with the residual pairing for
/// every bump. eps is halved (up to 10 times) when a perturbed metric stops
/// being positive definite.
OracleMatch el_oracle_match(const FunctionalId& id, const FieldSpec& spec,
                            std::span<const BumpPerturbation> bumps, const GridQuadrature& quad,
                            double eps, const FDConfig& fd,
                            JetMethod method = JetMethod::Analytic);

/// R_ij - (R / n) g_ij
Matrix2 einstein_constraint_residual(const FieldSpec& spec, std::span<const double> x,
                                     const FDConfig& fd, JetMethod method = JetMethod::Analytic);

/// |R| and the Ricci norm, reported separately for the scalar-square
/// extremal condition "R = 0 or Ric = 0".
struct ScalarSquareAlternatives {
  double abs_scalar = 0.0;
  double ricci_norm = 0.0;
};
ScalarSquareAlternatives scalar_square_alternatives(const FieldSpec& spec,
                                                    std::span<const double> x,
                                                    const FDConfig& fd,
                                                    JetMethod method = JetMethod::Analytic);

/// d^2 L / dg^ab dg^mn of the connection-norm density with Gamma held
/// fixed, as the closed form H(a, b, m, n).
Array4 connection_norm_inverse_hessian(const Matrix2& g, const Matrix2& g_inv,
                                       const Tensor3& gamma);

/// Parameterized metric families searched by the minimizer.
struct FamilySpec {
  enum class Kind {
    // g = c exp(2 theta.phi(x)), each phi_a a quadratic-layout profile
    // [a0, a1..an, b1..bn] (see ScalarProfile).
    ConformalScale,
    // g_jl = c_jl + sum theta q_jlik x^i x^k over j <= l, i <= k.
    PolynomialCoefficient,
  };

  Kind kind = Kind::ConformalScale;
  FieldSpec base;  // EuclideanConstant; supplies c and the box
  std::vector<std::vector<double>> basis;  // ConformalScale only

  static FamilySpec conformal(const FieldSpec& base, std::vector<std::vector<double>> basis);
  static FamilySpec polynomial(const FieldSpec& base);

  void validate() const;
  int parameter_count() const;
  FieldSpec at(std::span<const double> theta) const;

  static Kind kind_from_string(std::string_view s);
  static std::string_view to_string(Kind k) noexcept;
};

struct MinimizeOptions {
  double step0 = 1.0;
  double backtrack = 0.5;
  int max_iters = 200;
  double grad_tol = 1e-8;
  double fd_step = 1e-5;   // parameter-space central differences (fourth order)
  double armijo = 1e-4;
  double growth = 2.0;     // step multiplier after an accepted step

  void validate() const;
};

struct MinimizeResult {
  std::vector<double> theta;
  std::vector<double> trace;  // functional after each accepted step; trace[0] at the start
  int iterations = 0;
  bool converged = false;
  double grad_norm = 0.0;
};

/// Gradient descent with fourth-order central-difference gradients and Armijo
/// backtracking. Trial points whose metric fails to be positive definite
/// count as rejected. Throws LineSearchFailed after 40 halvings.
MinimizeResult minimize_deviation(const FunctionalId& id, const FamilySpec& family,
                                  std::span<const double> theta0, const GridQuadrature& quad,
                                  const MinimizeOptions& opt = {});

/// (I(theta + h d) - 2 I(theta) + I(theta - h d)) / h^2
double second_difference(const FunctionalId& id, const FamilySpec& family,
                         std::span<const double> theta, std::span<const double> direction,
                         double h, const GridQuadrature& quad);

}  // namespace flatlab
