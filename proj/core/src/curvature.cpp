#include "flatlab/curvature.hpp"

#include <algorithm>
#include <cmath>

#include "flatlab/algebra.hpp"

namespace flatlab {

ConnectionJet1 christoffel(const MetricJet2& jet) {
  const int n = jet.dim();
  const Matrix2 gi = invert_spd(jet.g);
  ConnectionJet1 out{jet.x, Tensor3(n), Array4(n)};

  // First-kind symbols G_ljk = 1/2 (d_k g_lj + d_j g_lk - d_l g_jk).
  Array3 first(n);
  for (int l = 0; l < n; ++l)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        first(l, j, k) = 0.5 * (jet.dg(k, l, j) + jet.dg(j, l, k) - jet.dg(l, j, k));

  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = j; k < n; ++k) {
        double s = 0.0;
        for (int l = 0; l < n; ++l) s += gi(i, l) * first(l, j, k);
        out.gamma(i, j, k) = s;
        out.gamma(i, k, j) = s;
      }

  // d_p g^il = -g^ia (d_p g_ab) g^bl
  Array3 dgi(n);
  for (int p = 0; p < n; ++p)
    for (int i = 0; i < n; ++i)
      for (int l = 0; l < n; ++l) {
        double s = 0.0;
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) s += gi(i, a) * jet.dg(p, a, b) * gi(b, l);
        dgi(p, i, l) = -s;
      }

  for (int p = 0; p < n; ++p)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = j; k < n; ++k) {
          double s = 0.0;
          for (int l = 0; l < n; ++l) {
            const double dfirst =
                0.5 * (jet.ddg(p, k, l, j) + jet.ddg(p, j, l, k) - jet.ddg(p, l, j, k));
            s += dgi(p, i, l) * first(l, j, k) + gi(i, l) * dfirst;
          }
          out.dgamma(p, i, j, k) = s;
          out.dgamma(p, i, k, j) = s;
        }
  return out;
}

ConnectionJet1 connection_jet(const FieldSpec& spec, std::span<const double> x,
                              const FDConfig& fd, JetMethod method) {
  if (spec.is_metric()) return christoffel(eval_metric_jet2(spec, x, fd, method));
  return eval_connection_jet1(spec, x, fd, method);
}

Tensor4Mixed riemann_mixed(const ConnectionJet1& cj) {
  const int n = cj.dim();
  const auto& G = cj.gamma;
  const auto& dG = cj.dgamma;
  Tensor4Mixed r(n);
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          double s = dG(j, l, i, k) - dG(k, l, i, j);
          for (int m = 0; m < n; ++m) s += G(l, j, m) * G(m, i, k) - G(l, k, m) * G(m, i, j);
          r(l, i, j, k) = s;
        }
  return r;
}

namespace {

/// g_mn Gamma^m_ab Gamma^n_cd as a 4-index table q(a, b, c, d).
Array4 gamma_gram(const Matrix2& g, const Tensor3& G) {
  const int n = g.dim();
  Array3 low(n);  // Gamma_n|cd = g_nm Gamma^m_cd
  for (int q = 0; q < n; ++q)
    for (int c = 0; c < n; ++c)
      for (int d = 0; d < n; ++d) {
        double s = 0.0;
        for (int m = 0; m < n; ++m) s += g(q, m) * G(m, c, d);
        low(q, c, d) = s;
      }
  Array4 out(n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d) {
          double s = 0.0;
          for (int m = 0; m < n; ++m) s += G(m, a, b) * low(m, c, d);
          out(a, b, c, d) = s;
        }
  return out;
}

}  // namespace

Tensor4Lower riemann_lower(const MetricJet2& jet) {
  const int n = jet.dim();
  const ConnectionJet1 cj = christoffel(jet);
  const Array4 q = gamma_gram(jet.g, cj.gamma);
  const auto& H = jet.ddg;
  Tensor4Lower r(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          r(i, j, k, l) =
              0.5 * (H(j, k, i, l) + H(i, l, j, k) - H(i, k, j, l) - H(j, l, i, k)) +
              q(j, k, i, l) - q(j, l, i, k);
  return r;
}

Array4 strong_form_terms(const MetricJet2& jet) {
  const int n = jet.dim();
  const ConnectionJet1 cj = christoffel(jet);
  const Array4 q = gamma_gram(jet.g, cj.gamma);
  const auto& H = jet.ddg;
  Array4 s(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int t = 0; t < n; ++t)
          s(i, j, k, t) = 0.5 * (H(i, t, j, k) - H(j, t, i, k)) + q(j, k, i, t);
  return s;
}

Matrix2 ricci_from_mixed(const Tensor4Mixed& r) {
  const int n = r.dim();
  Matrix2 ric(n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      double s = 0.0;
      for (int l = 0; l < n; ++l) s += r(l, i, l, k);
      ric(i, k) = s;
    }
  return ric;
}

Matrix2 ricci_logdet(const MetricJet2& jet) {
  const int n = jet.dim();
  const Matrix2 gi = invert_spd(jet.g);
  const ConnectionJet1 cj = christoffel(jet);
  const auto& G = cj.gamma;

  // psi = ln sqrt(det g): d_i psi = 1/2 g^ab d_i g_ab,
  // d_k d_i psi = 1/2 (g^ab d_k d_i g_ab - g^ac d_k g_cd g^db d_i g_ab).
  std::vector<double> dpsi(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) s += gi(a, b) * jet.dg(i, a, b);
    dpsi[static_cast<std::size_t>(i)] = 0.5 * s;
  }
  Matrix2 ddpsi(n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          s += gi(a, b) * jet.ddg(k, i, a, b);
          double t = 0.0;
          for (int c = 0; c < n; ++c)
            for (int d = 0; d < n; ++d) t += gi(a, c) * jet.dg(k, c, d) * gi(d, b);
          s -= t * jet.dg(i, a, b);
        }
      ddpsi(k, i) = 0.5 * s;
    }

  Matrix2 ric(n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      double s = 0.0;
      for (int l = 0; l < n; ++l) {
        s += cj.dgamma(l, l, i, k);
        for (int m = 0; m < n; ++m) s -= G(m, i, l) * G(l, k, m);
      }
      double hess = ddpsi(k, i);
      for (int t = 0; t < n; ++t) hess -= G(t, i, k) * dpsi[static_cast<std::size_t>(t)];
      ric(i, k) = s - hess;
    }
  return ric;
}

double harmonic_defect(const MetricJet2& jet) {
  const int n = jet.dim();
  const Matrix2 gi = invert_spd(jet.g);
  const ConnectionJet1 cj = christoffel(jet);
  double worst = 0.0;
  for (int k = 0; k < n; ++k) {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s += gi(i, j) * cj.gamma(k, i, j);
    worst = std::max(worst, std::abs(s));
  }
  return worst;
}

bool is_harmonic(const MetricJet2& jet, double tau) { return harmonic_defect(jet) <= tau; }

Matrix2 ricci_harmonic_unchecked(const MetricJet2& jet) {
  const int n = jet.dim();
  const Matrix2 gi = invert_spd(jet.g);
  const ConnectionJet1 cj = christoffel(jet);
  const Array4 q = gamma_gram(jet.g, cj.gamma);
  Matrix2 ric(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          s += gi(k, l) * (-0.5 * jet.ddg(k, l, i, j) + q(i, k, l, j));
      ric(i, j) = s;
    }
  return ric;
}

Matrix2 ricci_harmonic(const MetricJet2& jet, double tau) {
  const double defect = harmonic_defect(jet);
  if (defect > tau)
    throw Error(ErrorKind::GaugeViolation,
                "chart is not harmonic: |g^ij Gamma^k_ij| = " + std::to_string(defect));
  return ricci_harmonic_unchecked(jet);
}

double scalar_curvature(const Matrix2& g_inv, const Matrix2& ric) {
  if (!g_inv.same_shape(ric)) throw Error(ErrorKind::ShapeMismatch, "scalar_curvature");
  const int n = ric.dim();
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s += g_inv(i, j) * ric(i, j);
  return s;
}

Tensor4Lower weyl_from(const Matrix2& g, const Tensor4Lower& r, const Matrix2& ric,
                       double scalar) {
  const int n = g.dim();
  if (n < 3) throw Error(ErrorKind::DimensionTooSmall, "Weyl tensor needs n >= 3");
  const double a = 1.0 / (n - 2);
  const double b = scalar / ((n - 1.0) * (n - 2.0));
  Tensor4Lower c(n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l)
        for (int m = 0; m < n; ++m)
          c(i, k, l, m) = r(i, k, l, m) +
                          a * (ric(i, m) * g(k, l) - ric(i, l) * g(k, m) + ric(k, l) * g(i, m) -
                               ric(k, m) * g(i, l)) +
                          b * (g(i, l) * g(k, m) - g(i, m) * g(k, l));
  return c;
}

Tensor4Lower weyl(const MetricJet2& jet) {
  if (jet.dim() < 3) throw Error(ErrorKind::DimensionTooSmall, "Weyl tensor needs n >= 3");
  const CurvatureBundle b = curvature_bundle(jet);
  return *b.weyl;
}

CurvatureBundle curvature_bundle(const MetricJet2& jet) {
  CurvatureBundle b;
  const Matrix2 gi = invert_spd(jet.g);
  b.mixed = riemann_mixed(christoffel(jet));
  b.lower = lower_first_index(jet.g, b.mixed);
  b.ricci = ricci_from_mixed(b.mixed);
  b.scalar = scalar_curvature(gi, b.ricci);
  if (jet.dim() >= 3) b.weyl = weyl_from(jet.g, b.lower, b.ricci, b.scalar);
  return b;
}

Array5 riemann_derivative(const FieldSpec& spec, std::span<const double> x, const FDConfig& fd,
                          JetMethod method) {
  const int n = spec.dim();
  const double h = 0.5 * fd.h2;
  Array5 dr(n);
  Point y(x.begin(), x.end());
  auto at = [&](int m, double off) {
    Point z = y;
    z[static_cast<std::size_t>(m)] += off;
    return riemann_mixed(connection_jet(spec, z, fd, method));
  };
  for (int m = 0; m < n; ++m) {
    const Tensor4Mixed p1 = at(m, h), m1 = at(m, -h), p2 = at(m, 2 * h), m2 = at(m, -2 * h);
    auto f1 = p1.flat(), g1 = m1.flat(), f2 = p2.flat(), g2 = m2.flat();
    const std::size_t block = f1.size();
    for (std::size_t e = 0; e < block; ++e)
      dr.flat()[static_cast<std::size_t>(m) * block + e] =
          (8.0 * (f1[e] - g1[e]) - (f2[e] - g2[e])) / (12.0 * h);
  }
  return dr;
}

Array5 covariant_derivative_R(const ConnectionJet1& cj, const Tensor4Mixed& r, const Array5& dr) {
  const int n = cj.dim();
  const auto& G = cj.gamma;
  Array5 out(n);
  for (int m = 0; m < n; ++m)
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k) {
            double s = dr(m, l, i, j, k);
            for (int t = 0; t < n; ++t)
              s += G(l, m, t) * r(t, i, j, k) - G(t, m, i) * r(l, t, j, k) -
                   G(t, m, j) * r(l, i, t, k) - G(t, m, k) * r(l, i, j, t);
            out(m, l, i, j, k) = s;
          }
  return out;
}

double second_bianchi_residual(const Array5& d) {
  const int n = d.dim();
  double worst = 0.0;
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int m = 0; m < n; ++m)
            worst = std::max(worst, std::abs(d(m, l, i, j, k) + d(j, l, i, k, m) +
                                             d(k, l, i, m, j)));
  return worst;
}

double veblen_residual(const Array5& d) {
  const int n = d.dim();
  double worst = 0.0;
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int m = 0; m < n; ++m)
            worst = std::max(worst, std::abs(d(m, l, i, j, k) + d(j, l, k, i, m) +
                                             d(i, l, m, k, j) + d(k, l, j, m, i)));
  return worst;
}

double SymmetryResiduals::max() const {
  return std::max({pair_exchange, first_pair, last_pair, bianchi1});
}

SymmetryResiduals symmetry_residuals(const Tensor4Lower& r) {
  const int n = r.dim();
  SymmetryResiduals s;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          const double v = r(i, j, k, l);
          s.pair_exchange = std::max(s.pair_exchange, std::abs(v - r(k, l, i, j)));
          s.first_pair = std::max(s.first_pair, std::abs(v + r(j, i, k, l)));
          s.last_pair = std::max(s.last_pair, std::abs(v + r(i, j, l, k)));
          s.bianchi1 = std::max(s.bianchi1, std::abs(v + r(i, l, j, k) + r(i, k, l, j)));
        }
  return s;
}

MixedResiduals mixed_residuals(const Tensor4Mixed& r) {
  const int n = r.dim();
  MixedResiduals s;
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          s.antisymmetry = std::max(s.antisymmetry, std::abs(r(l, i, j, k) + r(l, i, k, j)));
          s.bianchi1 = std::max(s.bianchi1,
                                std::abs(r(l, i, j, k) + r(l, j, k, i) + r(l, k, i, j)));
        }
  return s;
}

Tensor4Lower reconstruct_riemann_3d(const Matrix2& g, const Matrix2& ric, double scalar) {
  if (g.dim() != 3 || ric.dim() != 3)
    throw Error(ErrorKind::DimensionMismatch, "3D curvature reconstruction needs n = 3");
  Tensor4Lower r(3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l)
          r(i, j, k, l) = ric(i, k) * g(j, l) - ric(i, l) * g(j, k) + g(i, k) * ric(j, l) -
                          g(i, l) * ric(j, k) -
                          0.5 * scalar * (g(i, k) * g(j, l) - g(i, l) * g(j, k));
  return r;
}

}  // namespace flatlab
