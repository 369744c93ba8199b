#pragma once

// Dense multi-index arrays over a chart of dimension n. Storage is row-major
// with the first index slowest. Index conventions used across the library:
//
//   Matrix2        g[i][j]                 g_ij or g^ij
//   Tensor3        G[i][j][k]              Gamma^i_jk (upper index first)
//   Tensor4Mixed   R[l][i][j][k]           R^l_ijk
//   Tensor4Lower   R[i][j][k][l]           R_ijkl = g_im R^m_jkl
//
// Derivative arrays put the derivative slots first: dg[t][r][s] = d_t g_rs,
// ddg[q][s][p][r] = d_q d_s g_pr, dGamma[p][l][i][s] = d_p Gamma^l_is.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "flatlab/error.hpp"

namespace flatlab {

/// Largest chart dimension the library supports.
inline constexpr int kMaxDim = 6;

constexpr std::size_t ipow(std::size_t base, std::size_t exp) {
  std::size_t r = 1;
  for (std::size_t i = 0; i < exp; ++i) r *= base;
  return r;
}

template <class T, std::size_t Rank>
class DenseTensor {
 public:
  static constexpr std::size_t rank = Rank;

  DenseTensor() = default;
  explicit DenseTensor(int n, T fill = T{})
      : n_(n), data_(ipow(static_cast<std::size_t>(n), Rank), fill) {
    if (n < 1 || n > kMaxDim) {
      throw Error(ErrorKind::ShapeMismatch, "tensor dimension out of range");
    }
  }

  int dim() const noexcept { return n_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  template <class... I>
    requires(sizeof...(I) == Rank)
  T& operator()(I... idx) noexcept {
    return data_[offset(static_cast<std::size_t>(idx)...)];
  }
  template <class... I>
    requires(sizeof...(I) == Rank)
  const T& operator()(I... idx) const noexcept {
    return data_[offset(static_cast<std::size_t>(idx)...)];
  }

  std::span<T> flat() noexcept { return data_; }
  std::span<const T> flat() const noexcept { return data_; }

  void fill(const T& v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const DenseTensor& o) const noexcept { return n_ == o.n_; }

 private:
  template <class... I>
  std::size_t offset(I... idx) const noexcept {
    std::size_t off = 0;
    const auto n = static_cast<std::size_t>(n_);
    ((off = off * n + idx), ...);
    return off;
  }

  int n_ = 0;
  std::vector<T> data_;
};

template <std::size_t Rank>
using Array = DenseTensor<double, Rank>;
using Array3 = Array<3>;
using Array4 = Array<4>;
using Array5 = Array<5>;

struct Matrix2 : Array<2> {
  using Array<2>::Array;
  static Matrix2 identity(int n) {
    Matrix2 m(n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

struct Tensor3 : Array<3> {
  using Array<3>::Array;
};

struct Tensor4Mixed : Array<4> {
  using Array<4>::Array;
};

struct Tensor4Lower : Array<4> {
  using Array<4>::Array;
};

template <class T, std::size_t R>
double max_abs(const DenseTensor<T, R>& a) {
  double m = 0.0;
  for (double v : a.flat()) m = std::max(m, std::abs(v));
  return m;
}

template <class T, std::size_t R>
double max_abs_diff(const DenseTensor<T, R>& a, const DenseTensor<T, R>& b) {
  if (!a.same_shape(b)) throw Error(ErrorKind::ShapeMismatch, "max_abs_diff");
  double m = 0.0;
  auto fa = a.flat();
  auto fb = b.flat();
  for (std::size_t i = 0; i < fa.size(); ++i) m = std::max(m, std::abs(fa[i] - fb[i]));
  return m;
}

/// out = a + s * b, shapes must agree.
template <class TT>
TT axpy(const TT& a, double s, const TT& b) {
  if (!a.same_shape(b)) throw Error(ErrorKind::ShapeMismatch, "axpy");
  TT out = a;
  auto fo = out.flat();
  auto fb = b.flat();
  for (std::size_t i = 0; i < fo.size(); ++i) fo[i] += s * fb[i];
  return out;
}

template <class TT>
TT scaled(const TT& a, double s) {
  TT out = a;
  for (double& v : out.flat()) v *= s;
  return out;
}

}  // namespace flatlab
