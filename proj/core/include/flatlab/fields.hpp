#pragma once

// Declarative metric and connection fields on a coordinate box, and their
// evaluation to jets (value plus partial derivatives) at a point.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "flatlab/expression.hpp"
#include "flatlab/jet.hpp"
#include "flatlab/tensor.hpp"

namespace flatlab {

using Point = std::vector<double>;

struct ChartBox {
  int n = 0;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<int> grid;

  static ChartBox cube(int n, double lo, double hi, int grid = 8);
  static ChartBox make(std::vector<double> lower, std::vector<double> upper,
                       std::vector<int> grid);

  /// Throws ConfigInvalid unless lower < upper and grid >= 2 on every axis.
  void validate() const;
  double extent(int axis) const { return upper[axis] - lower[axis]; }
  double min_extent() const;
  Point center() const;
  /// True when every coordinate lies in [lower + margin, upper - margin].
  bool contains(std::span<const double> x, double margin = 0.0) const;
  /// All grid nodes (inclusive of the faces), first axis slowest.
  std::vector<Point> nodes() const;
};

/// Scalar function catalog shared by conformal and soliton fields. The
/// coefficient layout for an m-dimensional argument is:
///   constant           [a0]
///   affine             [a0, a1..am]                      a0 + a.x
///   quadratic          [a0, a1..am, b1..bm]              a0 + a.x + sum b_i x_i^2
///   exp                [a0, a1..am, b1..bm]              exp(2 (a0 + a.x + sum b_i x_i^2))
///   trig               [a0, a1, phase, k1..km]           a0 + a1 sin(k.x + phase)
///   reciprocal_affine  [c, a1..am]                       -1 / (c + a.x)
/// Missing trailing b coefficients default to zero.
struct ScalarProfile {
  enum class Kind { Constant, Affine, Quadratic, Exp, Trig, ReciprocalAffine };
  Kind kind = Kind::Constant;
  std::vector<double> coeffs{1.0};

  void validate(int dim) const;
  Jet2 evaluate(std::span<const Jet2> x) const;

  static Kind kind_from_string(std::string_view s);
  static std::string_view to_string(Kind k) noexcept;
};

struct TrigTerm {
  double amplitude = 0.0;
  std::array<int, kMaxDim> wave{};
  double phase = 0.0;
};

/// Sum of a constant and trigonometric terms sin(k.x + phase).
struct TrigSeries {
  double constant = 0.0;
  std::vector<TrigTerm> terms;
  Jet2 evaluate(std::span<const Jet2> x) const;
};

namespace field {

/// g_ij = c_ij
struct EuclideanConstant {
  Matrix2 c;
};
/// g_ij = c_ij f(x)
struct Conformal {
  Matrix2 c;
  ScalarProfile profile;
};
/// Round n-sphere in hyperspherical angles: g_00 = r^2,
/// g_kk = r^2 prod_{j<k} sin^2 x_j. Angles x_0..x_{n-2} avoid the poles.
struct RoundSphere {
  double radius = 1.0;
};
/// g = A^T A + I/2 with trigonometric-polynomial entries of A.
struct PolynomialSpd {
  int degree = 0;
  std::vector<TrigSeries> a;  // n*n, row-major
};
/// g_ij = c_ij + d_ij s(a.x), s a one-variable profile.
struct Soliton {
  Matrix2 c;
  Matrix2 d;
  ScalarProfile profile;
  std::vector<double> direction;
};
/// g_jl = base_jl + q_jlik x^i x^k (quadratic series about the origin).
struct QuadraticMetric {
  Matrix2 base;
  Array4 q;  // q(j, l, i, k), symmetric in (j,l)
};
/// Gamma^i_jk = C^i_jk
struct TabulatedConnection {
  Tensor3 c;
};
/// Gamma^i_jk = c^i_jk f(x), f(x) = -1 / (x^1 + ... + x^n + shift).
struct SolitonConnection {
  Tensor3 c;
  double shift = 1.0;
};
/// Gamma^i_jk symmetric in (j,k) with trigonometric-series entries.
struct RandomConnection {
  int degree = 1;
  std::vector<TrigSeries> entries;  // n^3, row-major, symmetric in the last pair
};
/// Component expressions: n*n for a metric (row-major; only the upper
/// triangle is read, so the field is symmetric by construction), n^3 for a
/// connection.
struct Custom {
  bool connection = false;
  std::vector<Expression> components;
};

}  // namespace field

using FieldParams =
    std::variant<field::EuclideanConstant, field::Conformal, field::RoundSphere,
                 field::PolynomialSpd, field::Soliton, field::QuadraticMetric,
                 field::TabulatedConnection,
                 field::SolitonConnection, field::RandomConnection, field::Custom>;

struct FieldSpec {
  ChartBox box;
  std::uint64_t seed = 0;
  FieldParams params;

  bool is_metric() const;
  bool is_connection() const { return !is_metric(); }
  int dim() const { return box.n; }
  std::string_view kind_name() const;
};

/// Metric component jets as a function of coordinate jets.
using MetricFn = std::function<JetMatrix(std::span<const Jet2>)>;
/// Connection component jets as a function of coordinate jets.
using ConnectionFn = std::function<JetTensor3(std::span<const Jet2>)>;

MetricFn metric_function(const FieldSpec& spec);
ConnectionFn connection_function(const FieldSpec& spec);

struct MetricJet2 {
  Point x;
  Matrix2 g;
  Array3 dg;   // dg(t, r, s) = d_t g_rs
  Array4 ddg;  // ddg(q, s, p, r) = d_q d_s g_pr

  int dim() const { return g.dim(); }
};

struct ConnectionJet1 {
  Point x;
  Tensor3 gamma;  // gamma(i, j, k) = Gamma^i_jk
  Array4 dgamma;  // dgamma(p, l, i, s) = d_p Gamma^l_is

  int dim() const { return gamma.dim(); }
};

struct FDConfig {
  double h1 = 1e-5;  // first-derivative step
  double h2 = 1e-3;  // second-derivative step

  /// h1 = 1e-5 * extent, h2 = 1e-3 * extent, extent = smallest box side.
  static FDConfig defaults(const ChartBox& box);
  void validate(const ChartBox& box) const;
  double margin() const { return 2.0 * std::max(h1, h2); }
};

enum class JetMethod { Analytic, FiniteDifference };

/// Exact jet from jet-valued metric components.
MetricJet2 metric_jet_from(const JetMatrix& g, std::span<const double> x);

/// Metric jet at x. Analytic jets come from Jet2 arithmetic; finite
/// differences use second-order central stencils on values only, and need x
/// at least fd.margin() inside the box. Throws OutOfDomain and
/// NotPositiveDefinite.
MetricJet2 eval_metric_jet2(const FieldSpec& spec, std::span<const double> x,
                            const FDConfig& fd, JetMethod method = JetMethod::Analytic);
MetricJet2 eval_metric_jet2(const MetricFn& metric, int n, std::span<const double> x);
MetricJet2 eval_metric_jet2_fd(const MetricFn& metric, int n, std::span<const double> x,
                               const FDConfig& fd);

/// Connection jet for connection-kind specs. Levi-Civita connections of
/// metric specs are produced by the curvature module (connection_jet).
ConnectionJet1 eval_connection_jet1(const FieldSpec& spec, std::span<const double> x,
                                    const FDConfig& fd,
                                    JetMethod method = JetMethod::Analytic);
ConnectionJet1 connection_jet_from(const JetTensor3& gamma, std::span<const double> x);

/// g(x) = A(x)^T A(x) + I/2 with A a seeded trigonometric polynomial of the
/// given degree (0 gives a constant metric). SPD everywhere by construction.
FieldSpec random_spd_metric(std::uint64_t seed, int degree, const ChartBox& box);

/// Smooth generic connection field (symmetric in the lower pair).
FieldSpec random_connection(std::uint64_t seed, int degree, const ChartBox& box,
                            double amplitude = 0.5);

/// Jet coordinates for evaluating field functions at x.
std::vector<Jet2> coordinate_jets(std::span<const double> x);

}  // namespace flatlab
