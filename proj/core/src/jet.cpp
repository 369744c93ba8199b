#include "flatlab/jet.hpp"

#include <utility>

namespace flatlab {

JetMatrix jet_inverse(const JetMatrix& a) {
  const int n = a.dim();
  JetMatrix w = a;
  JetMatrix inv(n);
  for (int i = 0; i < n; ++i) inv(i, i) = Jet2(1.0);
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r)
      if (std::abs(w(r, c).v) > std::abs(w(piv, c).v)) piv = r;
    if (w(piv, c).v == 0.0) throw Error(ErrorKind::NotPositiveDefinite, "singular jet matrix");
    if (piv != c) {
      for (int j = 0; j < n; ++j) {
        std::swap(w(c, j), w(piv, j));
        std::swap(inv(c, j), inv(piv, j));
      }
    }
    const Jet2 p = reciprocal(w(c, c));
    for (int j = 0; j < n; ++j) {
      w(c, j) = w(c, j) * p;
      inv(c, j) = inv(c, j) * p;
    }
    for (int r = 0; r < n; ++r) {
      if (r == c) continue;
      const Jet2 f = w(r, c);
      if (f.v == 0.0 && f.n == 0) continue;
      for (int j = 0; j < n; ++j) {
        w(r, j) = w(r, j) - f * w(c, j);
        inv(r, j) = inv(r, j) - f * inv(c, j);
      }
    }
  }
  return inv;
}

}  // namespace flatlab
