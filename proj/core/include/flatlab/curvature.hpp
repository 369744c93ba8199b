#pragma once

// Curvature of metrics and symmetric connections at a point.
//
// Sign conventions (fixed library-wide):
//   R^l_ijk = d_j Gamma^l_ik - d_k Gamma^l_ij + Gamma^l_js Gamma^s_ik - Gamma^l_ks Gamma^s_ij
//   R_ijkl  = g_im R^m_jkl            (unit sphere: R_0101 = sin^2 x0)
//   R_ik    = R^l_ilk                 (unit sphere: Ric = g)
//   scalar  = g^ik R_ik

#include <optional>
#include <span>

#include "flatlab/fields.hpp"
#include "flatlab/tensor.hpp"

namespace flatlab {

struct CurvatureBundle {
  Tensor4Mixed mixed;
  Tensor4Lower lower;
  Matrix2 ricci;
  double scalar = 0.0;
  std::optional<Tensor4Lower> weyl;  // present for n >= 3
};

/// Levi-Civita connection jet. dGamma uses d(g^-1) = -g^-1 (dg) g^-1 and the
/// metric's second derivatives, so it is as accurate as the metric jet.
ConnectionJet1 christoffel(const MetricJet2& jet);

/// Connection jet of any field: Levi-Civita for metric kinds, direct for
/// connection kinds.
ConnectionJet1 connection_jet(const FieldSpec& spec, std::span<const double> x,
                              const FDConfig& fd, JetMethod method = JetMethod::Analytic);

Tensor4Mixed riemann_mixed(const ConnectionJet1& cj);

/// Lowered curvature straight from second derivatives of g:
/// R_ijkl = 1/2 (d_j d_k g_il + d_i d_l g_jk - d_i d_k g_jl - d_j d_l g_ik)
///          + g_mn (Gamma^m_jk Gamma^n_il - Gamma^m_jl Gamma^n_ik).
Tensor4Lower riemann_lower(const MetricJet2& jet);

/// The half-antisymmetrized building block of the lowered formula,
/// S_ijks = 1/2 (d_i d_s g_jk - d_j d_s g_ik) + g_mn Gamma^m_jk Gamma^n_is,
/// so that R_ijkl = S_ijkl - S_ijlk. Metric curvature-flatness is the PDE
/// system S_ijkl - S_ijlk = 0 in the unknowns g_ij.
Array4 strong_form_terms(const MetricJet2& jet);

/// R_ik = R^l_ilk
Matrix2 ricci_from_mixed(const Tensor4Mixed& r);

/// R_ik = d_l Gamma^l_ik - Gamma^m_il Gamma^l_km - nabla_k d_i ln sqrt(det g)
Matrix2 ricci_logdet(const MetricJet2& jet);

/// Default gauge tolerance for the harmonic-coordinate Ricci formula.
inline constexpr double kHarmonicTol = 1e-8;

/// max_k |g^ij Gamma^k_ij|, zero in harmonic coordinates.
double harmonic_defect(const MetricJet2& jet);
bool is_harmonic(const MetricJet2& jet, double tau = kHarmonicTol);

/// R_ij = g^kl (-1/2 d_k d_l g_ij + g_mn Gamma^m_ik Gamma^n_lj), valid only in
/// harmonic charts. Throws GaugeViolation when harmonic_defect > tau.
Matrix2 ricci_harmonic(const MetricJet2& jet, double tau = kHarmonicTol);
/// Same formula without the gauge check.
Matrix2 ricci_harmonic_unchecked(const MetricJet2& jet);

double scalar_curvature(const Matrix2& g_inv, const Matrix2& ric);

/// C_iklm = R_iklm + (R_im g_kl - R_il g_km + R_kl g_im - R_km g_il) / (n-2)
///          + R (g_il g_km - g_im g_kl) / ((n-1)(n-2)).
/// Throws DimensionTooSmall for n < 3.
Tensor4Lower weyl(const MetricJet2& jet);
Tensor4Lower weyl_from(const Matrix2& g, const Tensor4Lower& r, const Matrix2& ric,
                       double scalar);

CurvatureBundle curvature_bundle(const MetricJet2& jet);

/// Partial derivatives dR(m, l, i, j, k) = d_m R^l_ijk of the field's mixed
/// curvature, by fourth-order central differences of riemann_mixed with step
/// fd.h2 / 2 (so the stencil stays within fd.margin() of x).
Array5 riemann_derivative(const FieldSpec& spec, std::span<const double> x, const FDConfig& fd,
                          JetMethod method = JetMethod::Analytic);

/// nabla_m R^l_ijk = d_m R^l_ijk + Gamma^l_ms R^s_ijk - Gamma^s_mi R^l_sjk
///                   - Gamma^s_mj R^l_isk - Gamma^s_mk R^l_ijs,
/// stored as out(m, l, i, j, k).
Array5 covariant_derivative_R(const ConnectionJet1& cj, const Tensor4Mixed& r, const Array5& dr);

/// max |R^l_ijk,m + R^l_ikm,j + R^l_imj,k|
double second_bianchi_residual(const Array5& nabla_r);
/// max |R^l_ijk,m + R^l_kim,j + R^l_mkj,i + R^l_jmi,k|
double veblen_residual(const Array5& nabla_r);

/// Algebraic identity residuals of a lowered curvature tensor (max-abs).
struct SymmetryResiduals {
  double pair_exchange = 0.0;  // R_ijkl - R_klij
  double first_pair = 0.0;     // R_ijkl + R_jikl
  double last_pair = 0.0;      // R_ijkl + R_ijlk
  double bianchi1 = 0.0;       // R_ijkl + R_iljk + R_iklj
  double max() const;
};
SymmetryResiduals symmetry_residuals(const Tensor4Lower& r);

/// Residuals of a mixed curvature tensor: antisymmetry in (j,k) and the
/// cyclic sum over (i,j,k).
struct MixedResiduals {
  double antisymmetry = 0.0;
  double bianchi1 = 0.0;
};
MixedResiduals mixed_residuals(const Tensor4Mixed& r);

/// Three-dimensional curvature from Ricci data:
/// R_ijkl = R_ik g_jl - R_il g_jk + g_ik R_jl - g_il R_jk - R/2 (g_ik g_jl - g_il g_jk).
/// Throws DimensionMismatch unless n = 3.
Tensor4Lower reconstruct_riemann_3d(const Matrix2& g, const Matrix2& ric, double scalar);

}  // namespace flatlab
