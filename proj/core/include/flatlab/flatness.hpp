#pragma once

// Flatness classification, the two Riccati systems for connections, the
// constant-connection cone condition, and curvature prescription by a
// normal-coordinate metric series.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "flatlab/curvature.hpp"
#include "flatlab/fields.hpp"

namespace flatlab {

/// Default flatness tolerances for the two jet accuracy regimes.
inline constexpr double kFlatTolAnalytic = 1e-8;
inline constexpr double kFlatTolFD = 1e-5;

struct FlatnessReport {
  bool connection_flat = false;
  bool curvature_flat = false;
  bool ricci_flat = false;
  bool scalar_flat = false;
  double max_connection = 0.0;  // max |Gamma^i_jk|
  double max_curvature = 0.0;   // max |R^l_ijk|
  double max_ricci = 0.0;       // max |R_ij|
  /// max |g^ij R_ij|; absent for connection fields, which carry no metric.
  std::optional<double> max_scalar;
  int points_checked = 0;
};

/// Max-abs residuals over the sample points compared against tol. The flags
/// are closed under curvature_flat => ricci_flat => scalar_flat; for
/// connection fields scalar_flat mirrors ricci_flat. An empty sample means
/// every grid node of the field's box.
FlatnessReport classify_flatness(const FieldSpec& spec, std::span<const Point> sample, double tol,
                                 const FDConfig& fd, JetMethod method = JetMethod::Analytic);

enum class RiccatiSign { Plus, Minus };

/// out(p, l, i, s) = d_p Gamma^l_is + Gamma^l_pn Gamma^n_is
Array4 riccati_residual_plus(const ConnectionJet1& cj);
/// out(p, l, i, s) = d_p Gamma^l_is - Gamma^l_sn Gamma^n_ip
Array4 riccati_residual_minus(const ConnectionJet1& cj);
Array4 riccati_residual(const ConnectionJet1& cj, RiccatiSign sign);

struct RiccatiFlatness {
  double riccati_norm = 0.0;    // max-abs Riccati residual
  double curvature_norm = 0.0;  // max-abs mixed curvature
};
RiccatiFlatness riccati_implies_flat(const ConnectionJet1& cj, RiccatiSign sign);

/// The split form of the plus system: max |d_p Gamma^l_is| and
/// max |Gamma^l_pn Gamma^n_is| separately.
struct SplitRiccati {
  double derivative = 0.0;
  double product = 0.0;
};
SplitRiccati split_riccati_residual(const ConnectionJet1& cj);

/// For Gamma + T with Gamma solving the plus system: out(p, l, i, s) =
/// d_p T^l_is + Gamma^l_pn T^n_is + T^l_pn Gamma^n_is + T^l_pn T^n_is.
Array4 riccati_perturbation_residual(const ConnectionJet1& gamma, const ConnectionJet1& t);

/// Compatibility of the chosen Riccati system along a field: with F_p the
/// system's prescribed value of d_p Gamma (a function of Gamma), returns the
/// max over samples of |d_q F_p - d_p F_q|, the derivatives taken by central
/// differences of F along the field with step fd.h2. Small values are the
/// numerical counterpart of complete integrability.
double integrability_check(const FieldSpec& spec, RiccatiSign sign, std::span<const Point> sample,
                           const FDConfig& fd, JetMethod method = JetMethod::Analytic);

/// max |C^s_jk C^l_is| over all free indices; 0 on the cone of constant
/// connections whose curvature vanishes through this product.
double cone_condition(const Tensor3& c);

/// Ricci tensor of a connection by the two factorizations of the trace
/// through the Riccati expressions Omega^q_ips (plus or minus form):
/// the trace operator applied directly, and Tr o P (curvature from the
/// projection, then contraction).
struct TraceFactorization {
  Matrix2 direct_trace;
  Matrix2 trace_of_projection;
};
TraceFactorization ricci_trace_factorization(const ConnectionJet1& cj, RiccatiSign sign);

/// A curvature tensor at the origin with every algebraic symmetry of a
/// lowered Riemann tensor.
struct CurvaturePrescription {
  int n = 0;
  Tensor4Lower r0;

  /// Projects x onto the tensors antisymmetric in each pair, symmetric under
  /// pair exchange and with vanishing cyclic sum. Idempotent.
  static Tensor4Lower project(const Array4& x);
  static CurvaturePrescription from(const Array4& x);
  /// Random projected tensor scaled to max-abs entry `scale`.
  static CurvaturePrescription random(std::uint64_t seed, int n, double scale = 0.1);
};

/// Quadratic metric g_jl = delta_jl - 1/6 (R_ijkl + R_ilkj) x^i x^k about the
/// origin, whose curvature at 0 is the prescribed R0. Throws OutOfDomain when
/// the box misses the origin and NotPositiveDefinite when the series fails
/// to be positive definite at a grid node.
FieldSpec normal_metric_from_curvature(const CurvaturePrescription& p, const ChartBox& box);

/// max over sample points with |x| <= rho of
/// |sqrt(det g(x)) - (1 - 1/6 R_ij(0) x^i x^j)|. The samples are the 2n axis
/// points at radius rho and rho/2 plus 16 seeded directions at each radius.
double gray_volume_check(const FieldSpec& spec, double rho);

}  // namespace flatlab
