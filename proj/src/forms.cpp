#include "pym/forms.hpp"

#include <stdexcept>

namespace pym {

VField conj(const Coords& xs, const VField& v) {
  VField r(xs.size());
  for (size_t a = 0; a < xs.size(); ++a) r.c[a] = v.c[a].conj();
  return r;
}

OneForm conj(const Coords& xs, const OneForm& w) {
  OneForm r(xs.size());
  for (size_t a = 0; a < xs.size(); ++a) r.c[a] = w.c[a].conj();
  return r;
}

VField add(const VField& a, const VField& b) {
  VField r(a.c.size());
  for (size_t j = 0; j < a.c.size(); ++j) r.c[j] = a.c[j] + b.c[j];
  return r;
}

VField sub(const VField& a, const VField& b) {
  VField r(a.c.size());
  for (size_t j = 0; j < a.c.size(); ++j) r.c[j] = a.c[j] - b.c[j];
  return r;
}

VField scale(const Expr& s, const VField& v) {
  VField r(v.c.size());
  for (size_t j = 0; j < v.c.size(); ++j) r.c[j] = s * v.c[j];
  return r;
}

OneForm add(const OneForm& a, const OneForm& b) {
  OneForm r(a.c.size());
  for (size_t j = 0; j < a.c.size(); ++j) r.c[j] = a.c[j] + b.c[j];
  return r;
}

OneForm sub(const OneForm& a, const OneForm& b) {
  OneForm r(a.c.size());
  for (size_t j = 0; j < a.c.size(); ++j) r.c[j] = a.c[j] - b.c[j];
  return r;
}

OneForm scale(const Expr& s, const OneForm& w) {
  OneForm r(w.c.size());
  for (size_t j = 0; j < w.c.size(); ++j) r.c[j] = s * w.c[j];
  return r;
}

TwoForm add(const TwoForm& a, const TwoForm& b) {
  size_t n = a.m.size();
  TwoForm r(n);
  for (size_t p = 0; p < n; ++p)
    for (size_t q = 0; q < n; ++q) r.m[p][q] = a.m[p][q] + b.m[p][q];
  return r;
}

TwoForm scale(const Expr& s, const TwoForm& w) {
  size_t n = w.m.size();
  TwoForm r(n);
  for (size_t p = 0; p < n; ++p)
    for (size_t q = 0; q < n; ++q) r.m[p][q] = s * w.m[p][q];
  return r;
}

Expr apply(const OneForm& w, const VField& v) {
  Expr acc;
  for (size_t a = 0; a < w.c.size(); ++a) acc = acc + w.c[a] * v.c[a];
  return acc;
}

Expr apply(const TwoForm& w, const VField& x, const VField& y) {
  Expr acc;
  size_t n = w.m.size();
  for (size_t a = 0; a < n; ++a)
    for (size_t b = 0; b < n; ++b) {
      if (w.m[a][b].is_zero()) continue;
      acc = acc + w.m[a][b] * x.c[a] * y.c[b];
    }
  return acc;
}

Expr dirderiv(const Coords& xs, const VField& x, const Expr& f) {
  Expr acc;
  for (size_t a = 0; a < xs.size(); ++a)
    if (!x.c[a].is_zero()) acc = acc + x.c[a] * f.diff(xs[a]);
  return acc;
}

VField bracket(const Coords& xs, const VField& x, const VField& y) {
  VField r(xs.size());
  for (size_t a = 0; a < xs.size(); ++a)
    r.c[a] = dirderiv(xs, x, y.c[a]) - dirderiv(xs, y, x.c[a]);
  return r;
}

OneForm d(const Coords& xs, const Expr& f) {
  OneForm r(xs.size());
  for (size_t a = 0; a < xs.size(); ++a) r.c[a] = f.diff(xs[a]);
  return r;
}

TwoForm d(const Coords& xs, const OneForm& w) {
  size_t n = xs.size();
  TwoForm r(n);
  Expr half = Expr::rational(1, 2);
  for (size_t a = 0; a < n; ++a)
    for (size_t b = a + 1; b < n; ++b) {
      Expr v = half * (w.c[b].diff(xs[a]) - w.c[a].diff(xs[b]));
      r.m[a][b] = v;
      r.m[b][a] = -v;
    }
  return r;
}

TwoForm wedge(const OneForm& a, const OneForm& b) {
  size_t n = a.c.size();
  TwoForm r(n);
  Expr half = Expr::rational(1, 2);
  for (size_t p = 0; p < n; ++p)
    for (size_t q = p + 1; q < n; ++q) {
      Expr v = half * (a.c[p] * b.c[q] - a.c[q] * b.c[p]);
      r.m[p][q] = v;
      r.m[q][p] = -v;
    }
  return r;
}

OneForm lie(const Coords& xs, const VField& x, const OneForm& w) {
  size_t n = xs.size();
  OneForm r(n);
  for (size_t a = 0; a < n; ++a) {
    Expr acc = dirderiv(xs, x, w.c[a]);
    for (size_t b = 0; b < n; ++b)
      if (!w.c[b].is_zero()) acc = acc + w.c[b] * x.c[b].diff(xs[a]);
    r.c[a] = acc;
  }
  return r;
}

Expr det(const ExprMat& m) {
  size_t n = m.size();
  if (n == 1) return m[0][0];
  Expr acc;
  for (size_t j = 0; j < n; ++j) {
    if (m[0][j].is_zero()) continue;
    ExprMat minor(n - 1, std::vector<Expr>(n - 1));
    for (size_t r = 1; r < n; ++r) {
      size_t cc = 0;
      for (size_t c = 0; c < n; ++c) {
        if (c == j) continue;
        minor[r - 1][cc++] = m[r][c];
      }
    }
    Expr term = m[0][j] * det(minor);
    acc = (j % 2 == 0) ? acc + term : acc - term;
  }
  return acc;
}

ExprMat inverse(const ExprMat& m) {
  size_t n = m.size();
  Expr D = det(m);
  if (D.is_zero()) throw std::runtime_error("symbolic inverse: zero determinant");
  ExprMat inv(n, std::vector<Expr>(n));
  for (size_t r = 0; r < n; ++r)
    for (size_t c = 0; c < n; ++c) {
      ExprMat minor(n - 1, std::vector<Expr>(n - 1));
      size_t rr = 0;
      for (size_t p = 0; p < n; ++p) {
        if (p == r) continue;
        size_t cc = 0;
        for (size_t q = 0; q < n; ++q) {
          if (q == c) continue;
          minor[rr][cc++] = m[p][q];
        }
        ++rr;
      }
      Expr cof = det(minor);
      if ((r + c) % 2 == 1) cof = -cof;
      inv[c][r] = cof / D;  // adjugate transpose
    }
  return inv;
}

}  // namespace pym
