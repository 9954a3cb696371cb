#pragma once

#include <vector>

#include "pym/expr.hpp"

namespace pym {

// Coordinate-indexed calculus over a fixed coordinate list. All forms are
// stored by their values on the coordinate frame; the exterior derivative and
// wedge follow the 1/2-alternation convention
//   dw(X,Y)      = (X w(Y) - Y w(X) - w([X,Y])) / 2
//   (a^b)(X,Y)   = (a(X) b(Y) - a(Y) b(X)) / 2
// under which the contact structure equation reads dθ = 2i g_{ab̄} θ^a∧θ^b̄.

using Coords = std::vector<std::string>;

struct VField {
  std::vector<Expr> c;  // coefficients on ∂/∂x^A
  VField() = default;
  explicit VField(size_t n) : c(n) {}
};

struct OneForm {
  std::vector<Expr> c;  // coefficients on dx^A (i.e. values on ∂/∂x^A)
  OneForm() = default;
  explicit OneForm(size_t n) : c(n) {}
};

struct TwoForm {
  // m[A][B] = value on (∂/∂x^A, ∂/∂x^B); antisymmetric.
  std::vector<std::vector<Expr>> m;
  TwoForm() = default;
  explicit TwoForm(size_t n) : m(n, std::vector<Expr>(n)) {}
};

VField conj(const Coords& xs, const VField& v);
OneForm conj(const Coords& xs, const OneForm& w);

VField add(const VField& a, const VField& b);
VField sub(const VField& a, const VField& b);
VField scale(const Expr& s, const VField& v);
OneForm add(const OneForm& a, const OneForm& b);
OneForm sub(const OneForm& a, const OneForm& b);
OneForm scale(const Expr& s, const OneForm& w);
TwoForm add(const TwoForm& a, const TwoForm& b);
TwoForm scale(const Expr& s, const TwoForm& w);

Expr apply(const OneForm& w, const VField& v);
Expr apply(const TwoForm& w, const VField& x, const VField& y);

// Directional derivative X(f).
Expr dirderiv(const Coords& xs, const VField& x, const Expr& f);

VField bracket(const Coords& xs, const VField& x, const VField& y);

OneForm d(const Coords& xs, const Expr& f);
TwoForm d(const Coords& xs, const OneForm& w);

TwoForm wedge(const OneForm& a, const OneForm& b);

// Lie derivative of a 1-form along a vector field (coordinate formula).
OneForm lie(const Coords& xs, const VField& x, const OneForm& w);

// Small dense matrices of Expr with exact Laplace-expansion determinant and
// adjugate; used for symbolic frame inversions (sizes <= 5 here).
using ExprMat = std::vector<std::vector<Expr>>;

Expr det(const ExprMat& m);
// Returns inverse as adjugate/det; throws std::runtime_error on structural
// zero determinant only (genericity is the caller's concern).
ExprMat inverse(const ExprMat& m);

}  // namespace pym
