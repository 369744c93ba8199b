#include "flatlab/algebra.hpp"

#include <string>

namespace flatlab {

namespace {

void require_same(int a, int b, const char* what) {
  if (a != b) throw Error(ErrorKind::ShapeMismatch, what);
}

}  // namespace

bool is_symmetric(const Matrix2& a, double rel_tol) {
  const int n = a.dim();
  const double scale = std::max(max_abs(a), 1e-300);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (std::abs(a(i, j) - a(j, i)) > rel_tol * scale) return false;
  return true;
}

std::vector<double> leading_minors(const Matrix2& a) {
  const int n = a.dim();
  Matrix2 w = a;
  std::vector<double> minors(static_cast<std::size_t>(n));
  double prod = 1.0;
  for (int k = 0; k < n; ++k) {
    const double pivot = w(k, k);
    prod *= pivot;
    minors[static_cast<std::size_t>(k)] = prod;
    if (pivot == 0.0) {
      // Remaining minors are undefined by elimination; report them as zero.
      for (int r = k + 1; r < n; ++r) minors[static_cast<std::size_t>(r)] = 0.0;
      break;
    }
    for (int i = k + 1; i < n; ++i) {
      const double f = w(i, k) / pivot;
      for (int j = k; j < n; ++j) w(i, j) -= f * w(k, j);
    }
  }
  return minors;
}

bool is_positive_definite(const Matrix2& a) {
  if (!is_symmetric(a)) return false;
  for (double m : leading_minors(a))
    if (!(m > 0.0)) return false;
  return true;
}

double determinant(const Matrix2& a) {
  const int n = a.dim();
  Matrix2 w = a;
  double det = 1.0;
  for (int k = 0; k < n; ++k) {
    int piv = k;
    for (int i = k + 1; i < n; ++i)
      if (std::abs(w(i, k)) > std::abs(w(piv, k))) piv = i;
    if (w(piv, k) == 0.0) return 0.0;
    if (piv != k) {
      for (int j = 0; j < n; ++j) std::swap(w(k, j), w(piv, j));
      det = -det;
    }
    det *= w(k, k);
    for (int i = k + 1; i < n; ++i) {
      const double f = w(i, k) / w(k, k);
      for (int j = k; j < n; ++j) w(i, j) -= f * w(k, j);
    }
  }
  return det;
}

Matrix2 invert_spd(const Matrix2& g) {
  const int n = g.dim();
  if (!is_symmetric(g)) throw Error(ErrorKind::NotPositiveDefinite, "matrix is not symmetric");
  for (double m : leading_minors(g))
    if (!(m > 0.0))
      throw Error(ErrorKind::NotPositiveDefinite, "leading principal minor <= 0");

  // Cholesky g = L L^T, then solve column by column.
  Matrix2 l(n);
  for (int j = 0; j < n; ++j) {
    double s = g(j, j);
    for (int k = 0; k < j; ++k) s -= l(j, k) * l(j, k);
    if (!(s > 0.0)) throw Error(ErrorKind::NotPositiveDefinite, "Cholesky breakdown");
    l(j, j) = std::sqrt(s);
    for (int i = j + 1; i < n; ++i) {
      double t = g(i, j);
      for (int k = 0; k < j; ++k) t -= l(i, k) * l(j, k);
      l(i, j) = t / l(j, j);
    }
  }
  Matrix2 inv(n);
  std::vector<double> y(static_cast<std::size_t>(n));
  for (int c = 0; c < n; ++c) {
    for (int i = 0; i < n; ++i) {
      double t = (i == c) ? 1.0 : 0.0;
      for (int k = 0; k < i; ++k) t -= l(i, k) * y[static_cast<std::size_t>(k)];
      y[static_cast<std::size_t>(i)] = t / l(i, i);
    }
    for (int i = n - 1; i >= 0; --i) {
      double t = y[static_cast<std::size_t>(i)];
      for (int k = i + 1; k < n; ++k) t -= l(k, i) * inv(k, c);
      inv(i, c) = t / l(i, i);
    }
  }
  // Symmetrize away round-off so downstream symmetry checks stay exact.
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double a = 0.5 * (inv(i, j) + inv(j, i));
      inv(i, j) = a;
      inv(j, i) = a;
    }
  return inv;
}

double connection_norm_sq(const Matrix2& g, const Matrix2& g_inv, const Tensor3& gamma) {
  const int n = g.dim();
  require_same(n, g_inv.dim(), "connection_norm_sq: g_inv");
  require_same(n, gamma.dim(), "connection_norm_sq: gamma");
  Tensor3 low(n);  // Gamma_i jk = g_ip Gamma^p_jk
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double s = 0.0;
        for (int p = 0; p < n; ++p) s += g(i, p) * gamma(p, j, k);
        low(i, j, k) = s;
      }
  Tensor3 up(n);  // Gamma^i^{qr} = g^jq g^kr Gamma^i_jk
  for (int i = 0; i < n; ++i)
    for (int q = 0; q < n; ++q)
      for (int r = 0; r < n; ++r) {
        double s = 0.0;
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k) s += g_inv(j, q) * g_inv(k, r) * gamma(i, j, k);
        up(i, q, r) = s;
      }
  double total = 0.0;
  for (int i = 0; i < n; ++i)
    for (int q = 0; q < n; ++q)
      for (int r = 0; r < n; ++r) total += low(i, q, r) * up(i, q, r);
  return total;
}

Array4 raise_all(const Matrix2& g_inv, const Array4& t) {
  const int n = g_inv.dim();
  require_same(n, t.dim(), "raise_all");
  Array4 a = t;
  Array4 b(n);
  // Raise one slot at a time; each pass is O(n^5).
  for (int slot = 0; slot < 4; ++slot) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) {
            int idx[4] = {i, j, k, l};
            double s = 0.0;
            for (int m = 0; m < n; ++m) {
              int src[4] = {i, j, k, l};
              src[slot] = m;
              s += g_inv(idx[slot], m) * a(src[0], src[1], src[2], src[3]);
            }
            b(i, j, k, l) = s;
          }
    std::swap(a, b);
  }
  return a;
}

double riemann_norm_sq_lower(const Matrix2& g_inv, const Tensor4Lower& r) {
  require_same(g_inv.dim(), r.dim(), "riemann_norm_sq_lower");
  const Array4 up = raise_all(g_inv, r);
  double total = 0.0;
  auto fu = up.flat();
  auto fr = r.flat();
  for (std::size_t i = 0; i < fu.size(); ++i) total += fu[i] * fr[i];
  return total;
}

Tensor4Lower lower_first_index(const Matrix2& g, const Tensor4Mixed& r) {
  const int n = g.dim();
  require_same(n, r.dim(), "lower_first_index");
  Tensor4Lower out(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          double s = 0.0;
          for (int m = 0; m < n; ++m) s += g(i, m) * r(m, j, k, l);
          out(i, j, k, l) = s;
        }
  return out;
}

double riemann_norm_sq_mixed(const Matrix2& g, const Matrix2& g_inv, const Tensor4Mixed& r) {
  require_same(g.dim(), g_inv.dim(), "riemann_norm_sq_mixed: g_inv");
  require_same(g.dim(), r.dim(), "riemann_norm_sq_mixed: R");
  const int n = g.dim();
  // Raise the three lower slots of R^i_jkl, lower the upper one, contract.
  Array4 up(n);
  for (int i = 0; i < n; ++i)
    for (int q = 0; q < n; ++q)
      for (int rr = 0; rr < n; ++rr)
        for (int s = 0; s < n; ++s) {
          double t = 0.0;
          for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
              for (int l = 0; l < n; ++l)
                t += g_inv(j, q) * g_inv(k, rr) * g_inv(l, s) * r(i, j, k, l);
          up(i, q, rr, s) = t;
        }
  double total = 0.0;
  for (int i = 0; i < n; ++i)
    for (int p = 0; p < n; ++p) {
      if (g(i, p) == 0.0) continue;
      double t = 0.0;
      for (int q = 0; q < n; ++q)
        for (int rr = 0; rr < n; ++rr)
          for (int s = 0; s < n; ++s) t += up(i, q, rr, s) * r(p, q, rr, s);
      total += g(i, p) * t;
    }
  return total;
}

double ricci_norm_sq(const Matrix2& g_inv, const Matrix2& ric) {
  require_same(g_inv.dim(), ric.dim(), "ricci_norm_sq");
  const int n = g_inv.dim();
  double total = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) total += g_inv(i, k) * g_inv(j, l) * ric(i, j) * ric(k, l);
  return total;
}

Matrix2 apply_P(const Matrix2& x) {
  const int n = x.dim();
  Matrix2 out(n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) out(j, k) = 0.5 * (x(j, k) - x(k, j));
  return out;
}

Array4 apply_T4(const Array4& x) {
  const int n = x.dim();
  Array4 out(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          out(i, j, k, l) =
              0.5 * (x(i, j, k, l) - x(j, i, k, l) - x(i, j, l, k) + x(j, i, l, k));
  return out;
}

Census system_census(FlatnessSystem system, int n) {
  if (n < 1) throw Error(ErrorKind::ShapeMismatch, "census needs n >= 1");
  const long nn = n;
  const long metric_unknowns = nn * (nn + 1) / 2;
  const long connection_unknowns = nn * nn * (nn + 1) / 2;
  const long riemann_equations = nn * nn * (nn * nn - 1) / 12;
  Census c;
  switch (system) {
    case FlatnessSystem::ConnFlat1:
      c.equations = connection_unknowns;
      c.unknowns = metric_unknowns;
      break;
    case FlatnessSystem::CurvFlatConn:
      c.equations = riemann_equations;
      c.unknowns = connection_unknowns;
      break;
    case FlatnessSystem::CurvFlatMetric:
      c.equations = riemann_equations;
      c.unknowns = metric_unknowns;
      break;
    case FlatnessSystem::RicciFlatConn:
      c.equations = metric_unknowns;
      c.unknowns = connection_unknowns;
      break;
    case FlatnessSystem::RicciFlatMetric:
      c.equations = metric_unknowns;
      c.unknowns = metric_unknowns;
      break;
    case FlatnessSystem::ScalarFlat:
      c.equations = 1;
      c.unknowns = metric_unknowns;
      break;
  }
  c.determinacy = c.equations > c.unknowns   ? Determinacy::Over
                  : c.equations < c.unknowns ? Determinacy::Under
                                             : Determinacy::Determined;
  return c;
}

std::string_view to_string(FlatnessSystem s) noexcept {
  switch (s) {
    case FlatnessSystem::ConnFlat1: return "ConnFlat1";
    case FlatnessSystem::CurvFlatConn: return "CurvFlatConn";
    case FlatnessSystem::CurvFlatMetric: return "CurvFlatMetric";
    case FlatnessSystem::RicciFlatConn: return "RicciFlatConn";
    case FlatnessSystem::RicciFlatMetric: return "RicciFlatMetric";
    case FlatnessSystem::ScalarFlat: return "ScalarFlat";
  }
  return "?";
}

std::string_view to_string(Determinacy d) noexcept {
  switch (d) {
    case Determinacy::Over: return "over";
    case Determinacy::Under: return "under";
    case Determinacy::Determined: return "determined";
  }
  return "?";
}

FlatnessSystem flatness_system_from_string(std::string_view s) {
  for (auto sys : {FlatnessSystem::ConnFlat1, FlatnessSystem::CurvFlatConn,
                   FlatnessSystem::CurvFlatMetric, FlatnessSystem::RicciFlatConn,
                   FlatnessSystem::RicciFlatMetric, FlatnessSystem::ScalarFlat})
    if (to_string(sys) == s) return sys;
  throw Error(ErrorKind::ConfigInvalid, "unknown system '" + std::string(s) + "'");
}

}  // namespace flatlab
