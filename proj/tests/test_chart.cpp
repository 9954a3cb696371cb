#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>

#include "pym/chart.hpp"
#include "pym/pseudoherm.hpp"

using namespace pym;

static std::string fx(const char* name) { return std::string(PYM_FIXTURES) + "/" + name; }

TEST_CASE("eq4 chart: Levi form 1/(1+y^2), frame in kernel, real T") {
  CRChart ch = CRChart::load(fx("eq4.cr"));
  auto pts = sample_points(ch, 100, 7);
  for (const auto& p : pts) {
    double y = *p.find("y");
    CHECK(std::abs(apply(ch.theta(), ch.frame(0)).eval(p)) < 1e-13);
    auto L = ch.levi(0, 0).eval(p);
    CHECK(std::abs(L - 1.0 / (1.0 + y * y)) < 1e-13);
    // characteristic direction: computed symbolically, checked numerically
    CHECK(std::abs(apply(ch.theta(), ch.T()).eval(p) - 1.0) < 1e-12);
    for (size_t b = 0; b < 3; ++b) {
      VField eb(3);
      eb.c[b] = Expr::rational(1);
      CHECK(std::abs(apply(ch.dtheta(), ch.T(), eb).eval(p)) < 1e-12);
      CHECK(std::abs(ch.T().c[b].eval(p).imag()) < 1e-14);
    }
    // the closed-form solution T = (y/2)∂x - 1/(2y) ∂z
    CHECK(std::abs(ch.T().c[0].eval(p).real() - y / 2) < 1e-12);
    CHECK(std::abs(ch.T().c[1].eval(p)) < 1e-13);
    CHECK(std::abs(ch.T().c[2].eval(p).real() + 1.0 / (2 * y)) < 1e-12);
    // theta-component of [T_1, T_1bar] equals -2i/(1+y^2)
    VField br = bracket(ch.coords(), ch.frame(0), ch.frame_bar(0));
    auto tc = apply(ch.theta(), br).eval(p);
    CHECK(std::abs(tc - std::complex<double>(0, -2.0 / (1.0 + y * y))) < 1e-12);
  }
}

TEST_CASE("characteristic direction oracle: dense numeric solve agrees") {
  CRChart ch = CRChart::load(fx("eq4.cr"));
  auto pts = sample_points(ch, 25, 3);
  for (const auto& p : pts) {
    // rows: theta(T)=1 and i_T dtheta = 0 on the coordinate frame
    Eigen::MatrixXd A(4, 3);
    Eigen::VectorXd b(4);
    for (int c = 0; c < 3; ++c) A(0, c) = ch.theta().c[c].eval(p).real();
    b(0) = 1.0;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) A(1 + r, c) = ch.dtheta().m[c][r].eval(p).real();
      b(1 + r) = 0.0;
    }
    Eigen::VectorXd T = A.colPivHouseholderQr().solve(b);
    CHECK((A * T - b).norm() < 1e-12);  // back-substitution
    for (int c = 0; c < 3; ++c)
      CHECK(std::abs(T(c) - ch.T().c[c].eval(p).real()) < 1e-10);
  }
}

TEST_CASE("heisenberg chart: Levi = 1 and T = d/dt") {
  CRChart ch = CRChart::load(fx("heisenberg.cr"));
  auto pts = sample_points(ch, 40, 5);
  for (const auto& p : pts) {
    CHECK(std::abs(ch.levi(0, 0).eval(p) - 1.0) < 1e-14);
    CHECK(std::abs(apply(ch.theta(), ch.frame(0)).eval(p)) < 1e-14);
    CHECK(std::abs(ch.T().c[0].eval(p)) < 1e-14);
    CHECK(std::abs(ch.T().c[1].eval(p)) < 1e-14);
    CHECK(std::abs(ch.T().c[2].eval(p) - 1.0) < 1e-14);
    // [T_1, T_1bar] = -2i d/dt
    VField br = bracket(ch.coords(), ch.frame(0), ch.frame_bar(0));
    CHECK(std::abs(br.c[2].eval(p) - std::complex<double>(0, -2)) < 1e-14);
  }
}

TEST_CASE("scaling theta by a constant scales Levi by c and T by 1/c") {
  CRChart ch = CRChart::load(fx("eq4.cr"));
  CRChart ch2 = CRChart::from_data("eq4x2", 1, ch.coords(),
                                   scale(Expr::rational(2), ch.theta()),
                                   {ch.frame(0)}, ch.exclude(), ch.box());
  auto pts = sample_points(ch, 20, 9);
  for (const auto& p : pts) {
    CHECK(std::abs(ch2.levi(0, 0).eval(p) - 2.0 * ch.levi(0, 0).eval(p)) < 1e-13);
    for (int c = 0; c < 3; ++c)
      CHECK(std::abs(ch2.T().c[c].eval(p) - 0.5 * ch.T().c[c].eval(p)) < 1e-12);
  }
}

TEST_CASE("admissible coframe duality") {
  for (const char* f : {"eq4.cr", "heisenberg.cr", "heisenberg2.cr"}) {
    CRChart ch = CRChart::load(fx(f));
    auto pts = sample_points(ch, 10, 21);
    for (const auto& p : pts) {
      for (int a = 0; a < ch.n(); ++a) {
        for (int b = 0; b < ch.n(); ++b) {
          auto v = apply(ch.coframe(a), ch.frame(b)).eval(p);
          CHECK(std::abs(v - (a == b ? 1.0 : 0.0)) < 1e-11);
          CHECK(std::abs(apply(ch.coframe(a), ch.frame_bar(b)).eval(p)) < 1e-11);
        }
        CHECK(std::abs(apply(ch.coframe(a), ch.T()).eval(p)) < 1e-11);
      }
    }
  }
}

TEST_CASE("webster metric matches its frame definition") {
  CRChart ch = CRChart::load(fx("eq4.cr"));
  auto pts = sample_points(ch, 15, 33);
  for (const auto& p : pts) {
    // g(T,T) = 1, g(T, T_a) = 0, g(T_a, T_bbar) = Levi
    PHData ph(ch);
    CHECK(std::abs(ph.metric(ch.T(), ch.T()).eval(p) - 1.0) < 1e-11);
    CHECK(std::abs(ph.metric(ch.T(), ch.frame(0)).eval(p)) < 1e-11);
    CHECK(std::abs(ph.metric(ch.frame(0), ch.frame(0)).eval(p)) < 1e-11);
    CHECK(std::abs(ph.metric(ch.frame(0), ch.frame_bar(0)).eval(p) -
                   ch.levi(0, 0).eval(p)) < 1e-11);
  }
}

TEST_CASE("sampler respects the excluded locus and is deterministic") {
  CRChart ch = CRChart::load(fx("eq4.cr"));
  auto p1 = sample_points(ch, 5, 42);
  auto p2 = sample_points(ch, 5, 42);
  for (int k = 0; k < 5; ++k) {
    CHECK(*p1[k].find("y") == *p2[k].find("y"));
    CHECK(std::abs(*p1[k].find("y")) > 1e-6);
  }
}
