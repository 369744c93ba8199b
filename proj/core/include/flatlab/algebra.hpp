#pragma once

// Pointwise tensor algebra: SPD inversion, metric contractions, squared
// norms, the index projectors P and T, and the equation/unknown census of
// the flatness systems.

#include <string_view>

#include "flatlab/tensor.hpp"

namespace flatlab {

/// Relative symmetry tolerance: |a_ij - a_ji| <= kSymTol * max|a|.
inline constexpr double kSymTol = 1e-10;

bool is_symmetric(const Matrix2& a, double rel_tol = kSymTol);

/// Leading principal minors of a, computed by Gaussian elimination without
/// pivoting (the k-th minor is the product of the first k pivots).
std::vector<double> leading_minors(const Matrix2& a);

/// Symmetric and every leading principal minor strictly positive.
bool is_positive_definite(const Matrix2& a);

/// Inverse of a symmetric positive definite matrix. Throws
/// NotPositiveDefinite when a leading minor is <= 0 or symmetry fails.
Matrix2 invert_spd(const Matrix2& g);

double determinant(const Matrix2& a);

/// g_ip g^jq g^kr Gamma^i_jk Gamma^p_qr
double connection_norm_sq(const Matrix2& g, const Matrix2& g_inv, const Tensor3& gamma);

/// g^ip g^jq g^kr g^ls R_ijkl R_pqrs
double riemann_norm_sq_lower(const Matrix2& g_inv, const Tensor4Lower& r);

/// g_ip g^jq g^kr g^ls R^i_jkl R^p_qrs
double riemann_norm_sq_mixed(const Matrix2& g, const Matrix2& g_inv, const Tensor4Mixed& r);

/// g^ik g^jl R_ij R_kl
double ricci_norm_sq(const Matrix2& g_inv, const Matrix2& ric);

/// R_ijkl = g_im R^m_jkl
Tensor4Lower lower_first_index(const Matrix2& g, const Tensor4Mixed& r);

/// Raise all four slots of a lowered tensor: T^{ijkl} = g^ip g^jq g^kr g^ls T_pqrs.
Array4 raise_all(const Matrix2& g_inv, const Array4& t);

/// (PX)^jk = 1/2 (X^jk - X^kj). Idempotent; kills symmetric X.
Matrix2 apply_P(const Matrix2& x);

/// (TX)_ijkl = 1/2 (X_ijkl - X_jikl - X_ijlk + X_jilk), i.e. T = 2 (P (x) P).
/// Eigenvalue 0 on inputs symmetric in either pair, 2 on inputs
/// antisymmetric in both pairs, so T o T = 2 T.
Array4 apply_T4(const Array4& x);

enum class FlatnessSystem {
  ConnFlat1,        // Gamma^i_jk(g) = 0 as PDEs in g_ij
  CurvFlatConn,     // R^l_ijk(Gamma) = 0 as PDEs in Gamma
  CurvFlatMetric,   // R_ijkl(g) = 0 as PDEs in g_ij
  RicciFlatConn,    // R_ij(Gamma) = 0 as PDEs in Gamma
  RicciFlatMetric,  // R_ij(g) = 0 as PDEs in g_ij
  ScalarFlat,       // R(g) = 0 as one PDE in g_ij
};

enum class Determinacy { Over, Under, Determined };

struct Census {
  long equations = 0;
  long unknowns = 0;
  Determinacy determinacy = Determinacy::Determined;
};

Census system_census(FlatnessSystem system, int n);

std::string_view to_string(FlatnessSystem s) noexcept;
std::string_view to_string(Determinacy d) noexcept;
FlatnessSystem flatness_system_from_string(std::string_view s);

}  // namespace flatlab
