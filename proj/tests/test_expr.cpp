#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "pym/expr.hpp"

using namespace pym;
using cplx = std::complex<double>;

namespace {

const std::set<std::string> kVars = {"x", "y", "z"};

EvalEnv at(double x, double y, double z = 0.0) {
  EvalEnv e;
  e.set("x", x);
  e.set("y", y);
  e.set("z", z);
  return e;
}

// Central finite difference with one Richardson step; the independent oracle
// for d/dx.
cplx fd_diff(const Expr& e, const std::string& v, const EvalEnv& p, double h = 1e-3) {
  auto stencil = [&](double hh) {
    EvalEnv pp = p, pm = p;
    pp.set(v, *p.find(v) + hh);
    pm.set(v, *p.find(v) - hh);
    return (e.eval(pp) - e.eval(pm)) / (2.0 * hh);
  };
  cplx d1 = stencil(h), d2 = stencil(h / 2);
  return (4.0 * d2 - d1) / 3.0;
}

// Random expression generator over real coordinates, kept in safe evaluation
// ranges (positive arguments for log/sqrt).
Expr random_expr(std::mt19937_64& rng, int depth) {
  auto pick = [&](int n) { return static_cast<int>(rng() % n); };
  if (depth == 0) {
    switch (pick(5)) {
      case 0: return Expr::var("x");
      case 1: return Expr::var("y");
      case 2: return Expr::rational(pick(7) - 3);
      case 3: return Expr::rational(pick(5) + 1, pick(4) + 1);
      default: return Expr::i();
    }
  }
  Expr a = random_expr(rng, depth - 1);
  Expr b = random_expr(rng, depth - 1);
  switch (pick(10)) {
    case 0: return a + b;
    case 1: return a - b;
    case 2: return a * b;
    case 3: return a / (b * b + Expr::rational(1));
    case 4: return a.pow(static_cast<long>(rng() % 3) + 1);
    case 5: return Expr::sin(a);
    case 6: return Expr::cos(a);
    case 7: return Expr::exp(a * Expr::rational(1, 4));
    case 8: return Expr::log(b * b + Expr::rational(2));
    default: return Expr::sqrt(b * b + Expr::rational(1));
  }
}

}  // namespace

TEST_CASE("parse basics and round trips") {
  Expr e = parse_expr("1/y", kVars);
  CHECK(e.eval(at(0, 2)).real() == doctest::Approx(0.5));
  // round-trip: print(parse(text)) parses to a structurally equal tree
  Expr r = parse_expr(e.str(), kVars);
  CHECK(r.same_structure(e));

  Expr q = parse_expr("y/(1+y^2)", kVars);
  CHECK(q.eval(at(0, 2)).real() == doctest::Approx(0.4));  // 2/5

  CHECK_THROWS_AS(parse_expr("i*(zb*dzcoeff)", kVars), ParseError);
  try {
    parse_expr("1 + qq", kVars);
    CHECK(false);
  } catch (const ParseError& pe) {
    CHECK(pe.offset() == 4);
  }
  CHECK_THROWS_AS(parse_expr("1 +", kVars), ParseError);
  CHECK_THROWS_AS(parse_expr("(1+y", kVars), ParseError);
}

TEST_CASE("evaluation semantics") {
  CHECK(parse_expr("i*y", kVars).eval(at(0, 3)) == cplx(0, 3));
  CHECK_THROWS_AS(parse_expr("1/y", kVars).eval(at(0, 0)), EvalError);
  try {
    parse_expr("1/y", kVars).eval(at(0, 0));
  } catch (const EvalError& ee) {
    CHECK(ee.subtree().find("y") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_expr("log(y)", kVars).eval(at(0, 0)), EvalError);
  // (1 - y^2)/(1+y^2)^2 at y = 2 equals -3/25
  Expr e = parse_expr("(1-y^2)/(1+y^2)^2", kVars);
  CHECK(e.eval(at(0, 2)).real() == doctest::Approx(-0.12).epsilon(1e-14));
  // ring homomorphism on + and *
  std::mt19937_64 rng(11);
  for (int k = 0; k < 50; ++k) {
    Expr a = random_expr(rng, 2), b = random_expr(rng, 2);
    EvalEnv p = at(0.3, 0.7, -0.2);
    cplx va, vb, vs, vp;
    try {
      va = a.eval(p);
      vb = b.eval(p);
      vs = (a + b).eval(p);
      vp = (a * b).eval(p);
    } catch (const EvalError&) {
      continue;
    }
    CHECK(std::abs(vs - (va + vb)) <= 1e-12 * (1 + std::abs(va) + std::abs(vb)));
    CHECK(std::abs(vp - va * vb) <= 1e-12 * (1 + std::abs(va * vb)));
  }
}

TEST_CASE("differentiation against the finite-difference oracle") {
  // d/dy [y/(1+y^2)] at y=2 is -0.12 exactly
  Expr e = parse_expr("y/(1+y^2)", kVars);
  Expr de = e.diff("y");
  CHECK(de.eval(at(0, 2)).real() == doctest::Approx(-0.12).epsilon(1e-12));
  CHECK(std::abs(de.eval(at(0, 2)) - fd_diff(e, "y", at(0, 2))) < 1e-9);

  CHECK(Expr::rational(7, 3).diff("y").is_zero());

  Expr f = parse_expr("sin(x)*exp(x)", kVars);
  CHECK(f.diff("x").eval(at(0, 0)).real() == doctest::Approx(1.0).epsilon(1e-12));

  // 200 seeded random (e, p): |eval(diff) - FD| <= 1e-6 (1 + |FD|)
  std::mt19937_64 rng(42);
  int done = 0;
  while (done < 200) {
    Expr g = random_expr(rng, 3);
    double x = 0.2 + 0.6 * static_cast<double>(rng() % 1000) / 1000.0;
    double y = 0.2 + 0.6 * static_cast<double>(rng() % 1000) / 1000.0;
    EvalEnv p = at(x, y, 0.1);
    cplx sym, fd;
    try {
      sym = g.diff("x").eval(p);
      fd = fd_diff(g, "x", p);
      // skip wildly scaled samples the FD stencil cannot resolve
      if (std::abs(g.eval(p)) > 1e3 || std::abs(fd) > 1e3) continue;
    } catch (const EvalError&) {
      continue;
    }
    CHECK(std::abs(sym - fd) <= 1e-6 * (1.0 + std::abs(fd)));
    ++done;
  }
}

TEST_CASE("conjugation is pointwise complex conjugation") {
  Expr e = parse_expr("i*y", kVars);
  CHECK(e.conj().eval(at(0, 3)) == cplx(0, -3));
  Expr poly = parse_expr("1+3*y+y^2", kVars);
  CHECK(poly.conj().same_structure(poly));

  // conjugates of the (4)-frame coefficients at y=2
  for (const char* txt : {"y/(1+y^2)", "-i*y/2", "1/(y*(1+y^2))"}) {
    Expr c = parse_expr(txt, kVars);
    EvalEnv p = at(0.3, 2.0, -0.5);
    CHECK(std::abs(c.conj().eval(p) - std::conj(c.eval(p))) == 0.0);
  }

  std::mt19937_64 rng(7);
  for (int k = 0; k < 100; ++k) {
    Expr g = random_expr(rng, 3);
    EvalEnv p = at(0.4, 0.9, 0.2);
    cplx a, b;
    try {
      a = g.conj().eval(p);
      b = std::conj(g.eval(p));
    } catch (const EvalError&) {
      continue;
    }
    CHECK(a == b);  // exact in floating arithmetic
  }
}

TEST_CASE("parse/print identity on a generated corpus") {
  std::mt19937_64 rng(1234);
  for (int k = 0; k < 1000; ++k) {
    Expr g = random_expr(rng, 3);
    Expr back = parse_expr(g.str(), kVars);
    CHECK(back.same_structure(g));
  }
}

TEST_CASE("pi is a reserved constant") {
  Expr e = parse_expr("sin(pi/2)", kVars);
  CHECK(e.eval(at(0, 0)).real() == doctest::Approx(1.0));
}
