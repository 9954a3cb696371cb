#include "pym/pseudoherm.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace pym {

PHData::PHData(const CRChart& ch) : ch_(&ch) { build(); }

VField PHData::ext_frame(int A) const {
  int n = ch_->n();
  if (A == 0) return ch_->T();
  if (A <= n) return ch_->frame(A - 1);
  return ch_->frame_bar(A - n - 1);
}

OneForm PHData::ext_coframe(int A) const {
  int n = ch_->n();
  if (A == 0) return ch_->theta();
  if (A <= n) return ch_->coframe(A - 1);
  return ch_->coframe_bar(A - n - 1);
}

Expr PHData::metric(const VField& x, const VField& y) const {
  Expr acc;
  const auto& g = ch_->webster();
  size_t dim = ch_->coords().size();
  for (size_t p = 0; p < dim; ++p) {
    if (x.c[p].is_zero()) continue;
    for (size_t q = 0; q < dim; ++q) {
      if (y.c[q].is_zero() || g[p][q].is_zero()) continue;
      acc = acc + x.c[p] * y.c[q] * g[p][q];
    }
  }
  return acc;
}

void PHData::build() {
  const auto& xs = ch_->coords();
  int n = ch_->n();
  int N = 2 * n + 1;

  // g^{αβ̄}: plain matrix inverse of the Levi matrix.
  ExprMat G(n, std::vector<Expr>(n));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) G[a][b] = ch_->levi(a, b);
  ginv_ = inverse(G);

  gamma_.assign(N, std::vector<std::vector<Expr>>(n, std::vector<Expr>(n)));

  // Brackets of frame fields, reused below.
  auto frame_field = [&](int A) { return ext_frame(A); };
  std::vector<std::vector<VField>> br(N, std::vector<VField>(N));
  for (int A = 0; A < N; ++A)
    for (int B = 0; B < N; ++B)
      br[A][B] = bracket(xs, frame_field(A), frame_field(B));

  auto cof = [&](int A) { return ext_coframe(A); };

  // Γ^γ_{αβ} = g^{γσ̄} { T_α(g_{βσ̄}) - g_θ(T_β, [T_α, T_σ̄]) }   (frame (14))
  // Γ^γ_{ᾱβ} = θ^γ([T_ᾱ, T_β])                                   (frame (15))
  // Γ^γ_{0β} = θ^γ([T, T_β])                                     (frame (16))
  // A_β^γ̄   = -θ^γ̄([T, T_β])
  for (int beta = 1; beta <= n; ++beta) {
    for (int gam = 1; gam <= n; ++gam) {
      for (int alpha = 1; alpha <= n; ++alpha) {
        Expr acc;
        for (int sig = 1; sig <= n; ++sig) {
          Expr term = dirderiv(xs, ch_->frame(alpha - 1), ch_->levi(beta - 1, sig - 1)) -
                      metric(ch_->frame(beta - 1), br[alpha][sig + n]);
          // g^{γσ̄} = (G^{-1})[σ][γ]
          acc = acc + ginv_[sig - 1][gam - 1] * term;
        }
        gamma_[alpha][beta - 1][gam - 1] = acc;
        gamma_[alpha + n][beta - 1][gam - 1] = apply(cof(gam), br[alpha + n][beta]);
      }
      gamma_[0][beta - 1][gam - 1] = apply(cof(gam), br[0][beta]);
    }
  }

  A_.assign(n, std::vector<Expr>(n));
  for (int beta = 1; beta <= n; ++beta)
    for (int gam = 1; gam <= n; ++gam)
      A_[beta - 1][gam - 1] = -apply(conj(xs, ch_->coframe(gam - 1)), br[0][beta]);

  // Connection forms ω_β^α = Γ^α_{0β}θ + Γ^α_{λβ}θ^λ + Γ^α_{λ̄β}θ^λ̄.
  omega_.assign(n, std::vector<OneForm>(n));
  for (int alpha = 1; alpha <= n; ++alpha)
    for (int beta = 1; beta <= n; ++beta) {
      OneForm w(xs.size());
      w = scale(gamma_[0][beta - 1][alpha - 1], ch_->theta());
      for (int lam = 1; lam <= n; ++lam) {
        w = add(w, scale(gamma_[lam][beta - 1][alpha - 1], ch_->coframe(lam - 1)));
        w = add(w, scale(gamma_[lam + n][beta - 1][alpha - 1],
                         conj(xs, ch_->coframe(lam - 1))));
      }
      omega_[alpha - 1][beta - 1] = w;
    }

  // Symbolic orthonormal real H-frame via Gram-Schmidt on the T_α.
  std::vector<VField> Z;
  std::vector<VField> Zbar;
  for (int a = 0; a < n; ++a) {
    VField z = ch_->frame(a);
    for (int b = 0; b < static_cast<int>(Z.size()); ++b) {
      // proj = L(z, Z̄_b) Z_b with the already-normalized Z_b.
      Expr coeff = -Expr::i() * apply(ch_->dtheta(), z, Zbar[b]);
      z = sub(z, scale(coeff, Z[b]));
    }
    VField zb = conj(xs, z);
    Expr norm2 = -Expr::i() * apply(ch_->dtheta(), z, zb);
    Expr inv_norm = Expr::rational(1) / Expr::sqrt(norm2);
    z = scale(inv_norm, z);
    Z.push_back(z);
    Zbar.push_back(conj(xs, z));
  }
  hframe_.clear();
  Expr inv_sqrt2 = Expr::rational(1) / Expr::sqrt(Expr::rational(2));
  for (int a = 0; a < n; ++a) {
    hframe_.push_back(scale(inv_sqrt2, add(Z[a], Zbar[a])));
    hframe_.push_back(scale(inv_sqrt2 * Expr::i(), sub(Z[a], Zbar[a])));
  }

  // Tanaka-Webster connection in coordinates.
  int dim = N;
  coord_gamma_.assign(dim, std::vector<std::vector<Expr>>(dim, std::vector<Expr>(dim)));
  for (int b = 0; b < dim; ++b) {
    // ∂_b decomposed in the frame.
    std::vector<Expr> comp(2 * n + 1);
    comp[0] = ch_->theta().c[b];
    for (int a = 1; a <= n; ++a) {
      comp[a] = ch_->coframe(a - 1).c[b];
      comp[a + n] = ch_->coframe(a - 1).c[b].conj();
    }
    for (int a = 0; a < dim; ++a) {
      // ∇_{∂_a}∂_b = ∂_a(comp^A) e_A + comp^A ∇_{∂_a} e_A, with
      // ∇_{∂_a} T_β = ω_β^γ(∂_a) T_γ.
      std::vector<Expr> out(2 * n + 1);
      out[0] = comp[0].diff(xs[a]);
      for (int gam = 1; gam <= n; ++gam) {
        Expr acc = comp[gam].diff(xs[a]);
        Expr accb = comp[gam + n].diff(xs[a]);
        for (int beta = 1; beta <= n; ++beta) {
          acc = acc + comp[beta] * omega_[gam - 1][beta - 1].c[a];
          accb = accb + comp[beta + n] * omega_[gam - 1][beta - 1].c[a].conj();
        }
        out[gam] = acc;
        out[gam + n] = accb;
      }
      VField v = recompose(out);
      for (int c = 0; c < dim; ++c) coord_gamma_[a][b][c] = v.c[c];
    }
  }
}

std::vector<Expr> PHData::cov_deriv(int A, const std::vector<Expr>& u) const {
  const auto& xs = ch_->coords();
  int n = ch_->n();
  VField ea = ext_frame(A);
  std::vector<Expr> out(2 * n + 1);
  out[0] = dirderiv(xs, ea, u[0]);
  int Abar = conj_index(A, n);
  for (int gam = 1; gam <= n; ++gam) {
    Expr acc = dirderiv(xs, ea, u[gam]);
    Expr accb = dirderiv(xs, ea, u[gam + n]);
    for (int beta = 1; beta <= n; ++beta) {
      acc = acc + u[beta] * gamma_[A][beta - 1][gam - 1];
      accb = accb + u[beta + n] * gamma_[Abar][beta - 1][gam - 1].conj();
    }
    out[gam] = acc;
    out[gam + n] = accb;
  }
  return out;
}

std::vector<Expr> PHData::frame_components(const VField& v) const {
  int n = ch_->n();
  std::vector<Expr> u(2 * n + 1);
  u[0] = apply(ch_->theta(), v);
  for (int a = 1; a <= n; ++a) {
    u[a] = apply(ch_->coframe(a - 1), v);
    u[a + n] = apply(conj(ch_->coords(), ch_->coframe(a - 1)), v);
  }
  return u;
}

VField PHData::recompose(const std::vector<Expr>& u) const {
  int n = ch_->n();
  VField v = scale(u[0], ch_->T());
  for (int a = 1; a <= n; ++a) {
    v = add(v, scale(u[a], ch_->frame(a - 1)));
    v = add(v, scale(u[a + n], ch_->frame_bar(a - 1)));
  }
  return v;
}

VField PHData::cov_deriv_field(const VField& x, const VField& v) const {
  int n = ch_->n();
  std::vector<Expr> u = frame_components(v);
  std::vector<Expr> xc = frame_components(x);
  std::vector<Expr> out(2 * n + 1);
  for (int A = 0; A < 2 * n + 1; ++A) {
    if (xc[A].is_zero()) continue;
    auto dA = cov_deriv(A, u);
    for (int B = 0; B < 2 * n + 1; ++B) out[B] = out[B] + xc[A] * dA[B];
  }
  return recompose(out);
}

void PHData::ensure_curvature() const {
  if (curv_) return;
  const auto& xs = ch_->coords();
  int n = ch_->n();
  int N = 2 * n + 1;
  std::vector<std::vector<std::vector<std::vector<Expr>>>> R(
      n, std::vector<std::vector<std::vector<Expr>>>(
             n, std::vector<std::vector<Expr>>(N, std::vector<Expr>(N))));
  for (int lam = 1; lam <= n; ++lam) {
    std::vector<Expr> u(N);
    u[lam] = Expr::rational(1);
    std::vector<std::vector<Expr>> first(N);
    for (int B = 0; B < N; ++B) first[B] = cov_deriv(B, u);
    for (int A = 0; A < N; ++A)
      for (int B = A + 1; B < N; ++B) {
        auto ab = cov_deriv(A, first[B]);
        auto ba = cov_deriv(B, first[A]);
        VField brAB = bracket(xs, ext_frame(A), ext_frame(B));
        std::vector<Expr> brc = frame_components(brAB);
        for (int gam = 1; gam <= n; ++gam) {
          Expr acc = ab[gam] - ba[gam];
          for (int C = 0; C < N; ++C)
            if (!brc[C].is_zero()) acc = acc - brc[C] * gamma_[C][lam - 1][gam - 1];
          R[lam - 1][gam - 1][A][B] = acc;
          R[lam - 1][gam - 1][B][A] = -acc;
        }
      }
  }
  curv_ = std::move(R);
}

Expr PHData::curvature_coeff(int lambda, int gamma, int A, int B) const {
  ensure_curvature();
  return (*curv_)[lambda - 1][gamma - 1][A][B];
}

Expr PHData::ricci(int lambda, int mu) const {
  if (!ricci_) {
    int n = ch_->n();
    ExprMat R(n, std::vector<Expr>(n));
    for (int l = 1; l <= n; ++l)
      for (int m = 1; m <= n; ++m) {
        Expr acc;
        for (int a = 1; a <= n; ++a) acc = acc + curvature_coeff(l, a, a, m + n);
        R[l - 1][m - 1] = acc;
      }
    ricci_ = std::move(R);
  }
  return (*ricci_)[lambda - 1][mu - 1];
}

Expr PHData::rho() const {
  if (!rho_) {
    int n = ch_->n();
    Expr acc;
    for (int a = 1; a <= n; ++a)
      for (int b = 1; b <= n; ++b) acc = acc + ginv_[b - 1][a - 1] * ricci(a, b);
    rho_ = acc;
  }
  return *rho_;
}

VField PHData::J(const VField& x) const {
  int n = ch_->n();
  auto u = frame_components(x);
  std::vector<Expr> out(2 * n + 1);
  for (int a = 1; a <= n; ++a) {
    out[a] = Expr::i() * u[a];
    out[a + n] = -Expr::i() * u[a + n];
  }
  return recompose(out);
}

VField PHData::tau(const VField& x) const {
  int n = ch_->n();
  auto u = frame_components(x);
  std::vector<Expr> out(2 * n + 1);
  for (int b = 1; b <= n; ++b)
    for (int g = 1; g <= n; ++g) {
      out[g + n] = out[g + n] + u[b] * A_[b - 1][g - 1];
      out[g] = out[g] + u[b + n] * A_[b - 1][g - 1].conj();
    }
  return recompose(out);
}

std::vector<EvalEnv> sample_points(const CRChart& ch, int count, std::uint64_t seed) {
  auto s = ch.sampler(seed);
  std::vector<EvalEnv> pts;
  pts.reserve(count);
  for (int k = 0; k < count; ++k) pts.push_back(s.next());
  return pts;
}

TWAxiomReport tw_axioms(const PHData& ph, const std::vector<EvalEnv>& pts) {
  const CRChart& ch = ph.chart();
  const auto& xs = ch.coords();
  int n = ch.n();
  TWAxiomReport rep;
  rep.levi_min_eigen = 1e300;

  // Symbolic residual fields, evaluated per point.
  std::vector<VField> ext(2 * n + 1);
  for (int A = 0; A < 2 * n + 1; ++A) ext[A] = ph.ext_frame(A);

  for (const auto& p : pts) {
    for (int a = 0; a < n; ++a)
      rep.frame_in_kernel.feed(std::abs(apply(ch.theta(), ch.frame(a)).eval(p)), 1.0);

    Eigen::MatrixXcd L(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) L(a, b) = ch.levi(a, b).eval(p);
    rep.levi_hermitian.feed((L - L.adjoint()).cwiseAbs().maxCoeff(), L.cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(L);
    rep.levi_min_eigen = std::min(rep.levi_min_eigen, es.eigenvalues().minCoeff());

    rep.characteristic.feed(std::abs(apply(ch.theta(), ch.T()).eval(p) - 1.0), 1.0);
    for (size_t b = 0; b < xs.size(); ++b) {
      VField eb(xs.size());
      eb.c[b] = Expr::rational(1);
      rep.characteristic.feed(std::abs(apply(ch.dtheta(), ch.T(), eb).eval(p)), 1.0);
    }
    for (size_t b = 0; b < xs.size(); ++b)
      rep.characteristic.feed(std::abs(ch.T().c[b].eval(p).imag()), 1.0);

    // ∇g = 0 over frame directions and frame pairs.
    for (int A = 0; A < 2 * n + 1; ++A)
      for (int U = 0; U < 2 * n + 1; ++U)
        for (int V = U; V < 2 * n + 1; ++V) {
          Expr lhs = dirderiv(xs, ext[A], ph.metric(ext[U], ext[V]));
          Expr rhs = ph.metric(ph.cov_deriv_field(ext[A], ext[U]), ext[V]) +
                     ph.metric(ext[U], ph.cov_deriv_field(ext[A], ext[V]));
          auto l = lhs.eval(p), r = rhs.eval(p);
          rep.metric_parallel.feed(std::abs(l - r), std::abs(l));
        }

    // Purity: T(Z,W) = 0 and T(Z,W̄) = 2i L(Z,W̄) T.
    for (int a = 1; a <= n; ++a)
      for (int b = 1; b <= n; ++b) {
        VField t1 = sub(sub(ph.cov_deriv_field(ext[a], ext[b]),
                            ph.cov_deriv_field(ext[b], ext[a])),
                        bracket(xs, ext[a], ext[b]));
        for (size_t c = 0; c < xs.size(); ++c)
          rep.purity.feed(std::abs(t1.c[c].eval(p)), 1.0);

        VField t2 = sub(sub(ph.cov_deriv_field(ext[a], ext[b + n]),
                            ph.cov_deriv_field(ext[b + n], ext[a])),
                        bracket(xs, ext[a], ext[b + n]));
        Expr coeff = Expr::rational(2) * Expr::i() * ch.levi(a - 1, b - 1);
        VField rhs = scale(coeff, ch.T());
        for (size_t c = 0; c < xs.size(); ++c)
          rep.purity.feed(std::abs((t2.c[c] - rhs.c[c]).eval(p)),
                          std::abs(rhs.c[c].eval(p)));
      }

    // τ∘J + J∘τ = 0 on H (checked on the T_α; equivalent by conjugation).
    for (int a = 1; a <= n; ++a) {
      VField v = add(ph.tau(ph.J(ext[a])), ph.J(ph.tau(ext[a])));
      for (size_t c = 0; c < xs.size(); ++c)
        rep.tau_anticommute.feed(std::abs(v.c[c].eval(p)), 1.0);
    }

    // A_{αβ} = A_{βα} with A_{αβ} = g_θ(τ T_α, T_β).
    for (int a = 1; a <= n; ++a)
      for (int b = a; b <= n; ++b) {
        auto lhs = ph.metric(ph.tau(ext[a]), ext[b]).eval(p);
        auto rhs = ph.metric(ph.tau(ext[b]), ext[a]).eval(p);
        rep.torsion_symmetric.feed(std::abs(lhs - rhs), std::abs(lhs));
      }
  }
  return rep;
}

Expr sublaplacian(const PHData& ph, const Expr& u) {
  const CRChart& ch = ph.chart();
  const auto& xs = ch.coords();
  // ∇^H u = Σ_a E_a(u) E_a over the symbolic orthonormal H-frame.
  VField X(xs.size());
  for (const auto& E : ph.h_frame()) X = add(X, scale(dirderiv(xs, E, u), E));
  // div w.r.t. dvol(g_θ): (1/√det g) ∂_A(√det g X^A).
  ExprMat g = ch.webster();
  Expr sg = Expr::sqrt(det(g));
  Expr acc;
  for (size_t a = 0; a < xs.size(); ++a) acc = acc + (sg * X.c[a]).diff(xs[a]);
  return -(acc / sg);
}

Expr sublaplacian_frame_oracle(const PHData& ph, const Expr& u) {
  const CRChart& ch = ph.chart();
  const auto& xs = ch.coords();
  Expr acc;
  for (const auto& E : ph.h_frame()) {
    Expr second = dirderiv(xs, E, dirderiv(xs, E, u));
    VField covEE = ph.cov_deriv_field(E, E);
    acc = acc + second - dirderiv(xs, covEE, u);
  }
  return -acc;
}

SymmetryFit verify_symmetry(const PHData& ph, const VField& X,
                            const std::vector<EvalEnv>& pts, double threshold) {
  const CRChart& ch = ph.chart();
  const auto& xs = ch.coords();
  int n = ch.n();
  SymmetryFit fit;
  OneForm lth = lie(xs, X, ch.theta());
  fit.t = apply(lth, ch.T());
  fit.w.assign(n, std::vector<Expr>(n));
  fit.ell.assign(n, Expr());
  std::vector<OneForm> lta(n);
  for (int a = 0; a < n; ++a) {
    lta[a] = lie(xs, X, ch.coframe(a));
    fit.ell[a] = apply(lta[a], ch.T());
    for (int b = 0; b < n; ++b) fit.w[a][b] = apply(lta[a], ch.frame(b));
  }
  double res = 0.0;
  for (const auto& p : pts) {
    // L_Xθ must have no θ^α or θ^ᾱ components, and t must be real.
    for (int a = 0; a < n; ++a) {
      res = std::max(res, std::abs(apply(lth, ch.frame(a)).eval(p)));
      res = std::max(res, std::abs(apply(lth, ch.frame_bar(a)).eval(p)));
    }
    res = std::max(res, std::abs(fit.t.eval(p).imag()));
    // L_Xθ^α must have no θ^β̄ components.
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        res = std::max(res, std::abs(apply(lta[a], ch.frame_bar(b)).eval(p)));
  }
  fit.residual = res;
  fit.accepted = res <= threshold;
  return fit;
}

// ---------------------------------------------------------------------------
// Invariant coframe
// ---------------------------------------------------------------------------

struct InvariantCoframe::PathState {
  double u;
  Eigen::MatrixXcd U;
  Eigen::VectorXcd f;
};

InvariantCoframe::InvariantCoframe(const PHData& ph, std::vector<VField> symmetries,
                                   EvalEnv base_point, int ode_steps)
    : ph_(&ph), sym_(std::move(symmetries)), steps_(ode_steps) {
  const CRChart& ch = ph.chart();
  const auto& xs = ch.coords();
  int n = ch.n();
  int N = 2 * n + 1;
  if (static_cast<int>(sym_.size()) != N)
    throw std::runtime_error("invariant coframe wants 2n+1 symmetries");
  base_.resize(N);
  for (int a = 0; a < N; ++a) base_[a] = *base_point.find(xs[a]);

  // Dual coframe of the symmetry fields: rows of the inverse field matrix.
  ExprMat M(N, std::vector<Expr>(N));
  for (int r = 0; r < N; ++r)
    for (int c = 0; c < N; ++c) M[r][c] = sym_[c].c[r];
  ExprMat Minv = inverse(M);

  // η with η(X_i) = t_i; η^α_β with values w^α_{iβ}; η^α with values ℓ^α_i.
  std::vector<Expr> t(N);
  std::vector<std::vector<std::vector<Expr>>> w(
      n, std::vector<std::vector<Expr>>(n, std::vector<Expr>(N)));
  std::vector<std::vector<Expr>> l(n, std::vector<Expr>(N));
  for (int i = 0; i < N; ++i) {
    OneForm lth = lie(xs, sym_[i], ch.theta());
    t[i] = apply(lth, ch.T());
    for (int a = 0; a < n; ++a) {
      OneForm lta = lie(xs, sym_[i], ch.coframe(a));
      l[a][i] = apply(lta, ch.T());
      for (int b = 0; b < n; ++b) w[a][b][i] = apply(lta, ch.frame(b));
    }
  }
  auto assemble = [&](const std::vector<Expr>& vals) {
    OneForm f(N);
    for (int c = 0; c < N; ++c) {
      Expr acc;
      for (int i = 0; i < N; ++i) acc = acc + vals[i] * Minv[i][c];
      f.c[c] = acc;
    }
    return f;
  };
  eta_ = assemble(t);
  eta_w_.assign(n, std::vector<OneForm>(n));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) eta_w_[a][b] = assemble(w[a][b]);
  eta_ell_.resize(n);
  for (int a = 0; a < n; ++a) eta_ell_[a] = assemble(l[a]);
}

InvariantCoframe::PathState InvariantCoframe::integrate(const EvalEnv& p) const {
  const CRChart& ch = ph_->chart();
  const auto& xs = ch.coords();
  int n = ch.n();
  int N = 2 * n + 1;
  std::vector<double> target(N);
  for (int a = 0; a < N; ++a) target[a] = *p.find(xs[a]);

  // State y = (u, U, f); straight path a_t = base + t (target - base).
  struct Y {
    double u;
    Eigen::MatrixXcd U;
    Eigen::VectorXcd f;
  };
  Y y{0.0, Eigen::MatrixXcd::Identity(n, n), Eigen::VectorXcd::Zero(n)};
  std::vector<double> dir(N);
  for (int a = 0; a < N; ++a) dir[a] = target[a] - base_[a];

  auto rhs = [&](double t, const Y& s) {
    EvalEnv q;
    for (int a = 0; a < N; ++a) q.set(xs[a], base_[a] + t * dir[a]);
    // η(ȧ), η^α_β(ȧ), η^α(ȧ)
    double etad = 0.0;
    Eigen::MatrixXcd etaw(n, n);
    Eigen::VectorXcd etal(n);
    for (int a = 0; a < n; ++a) {
      std::complex<double> acc = 0.0;
      for (int c = 0; c < N; ++c) acc += eta_ell_[a].c[c].eval(q) * dir[c];
      etal(a) = acc;
      for (int b = 0; b < n; ++b) {
        std::complex<double> accw = 0.0;
        for (int c = 0; c < N; ++c) accw += eta_w_[a][b].c[c].eval(q) * dir[c];
        etaw(a, b) = accw;
      }
    }
    for (int c = 0; c < N; ++c) etad += eta_.c[c].eval(q).real() * dir[c];
    Y d;
    d.u = -etad;
    d.U = -s.U * etaw;                       // dU^α_β = -U^α_γ η^γ_β
    d.f = std::exp(-s.u) * (s.U * etal);     // df^α = e^{-u} U^α_β η^β
    return d;
  };

  double h = 1.0 / steps_;
  for (int k = 0; k < steps_; ++k) {
    double t = k * h;
    Y k1 = rhs(t, y);
    Y s2{y.u + 0.5 * h * k1.u, y.U + 0.5 * h * k1.U, y.f + 0.5 * h * k1.f};
    Y k2 = rhs(t + 0.5 * h, s2);
    Y s3{y.u + 0.5 * h * k2.u, y.U + 0.5 * h * k2.U, y.f + 0.5 * h * k2.f};
    Y k3 = rhs(t + 0.5 * h, s3);
    Y s4{y.u + h * k3.u, y.U + h * k3.U, y.f + h * k3.f};
    Y k4 = rhs(t + h, s4);
    y.u += h / 6.0 * (k1.u + 2 * k2.u + 2 * k3.u + k4.u);
    y.U += h / 6.0 * (k1.U + 2 * k2.U + 2 * k3.U + k4.U);
    y.f += h / 6.0 * (k1.f + 2 * k2.f + 2 * k3.f + k4.f);
  }
  return PathState{y.u, y.U, y.f};
}

double InvariantCoframe::u(const EvalEnv& p) const { return integrate(p).u; }

std::vector<std::vector<std::complex<double>>> InvariantCoframe::U(const EvalEnv& p) const {
  auto s = integrate(p);
  int n = ph_->chart().n();
  std::vector<std::vector<std::complex<double>>> out(n, std::vector<std::complex<double>>(n));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) out[a][b] = s.U(a, b);
  return out;
}

std::vector<std::complex<double>> InvariantCoframe::Omega(const EvalEnv& p) const {
  const CRChart& ch = ph_->chart();
  auto s = integrate(p);
  std::vector<std::complex<double>> out(ch.coords().size());
  for (size_t c = 0; c < out.size(); ++c)
    out[c] = std::exp(s.u) * ch.theta().c[c].eval(p);
  return out;
}

std::vector<std::vector<std::complex<double>>> InvariantCoframe::OmegaAlpha(
    const EvalEnv& p) const {
  const CRChart& ch = ph_->chart();
  int n = ch.n();
  auto s = integrate(p);
  Eigen::VectorXcd v = -std::exp(s.u) * s.f;
  std::vector<std::vector<std::complex<double>>> out(
      n, std::vector<std::complex<double>>(ch.coords().size()));
  for (int a = 0; a < n; ++a)
    for (size_t c = 0; c < ch.coords().size(); ++c) {
      std::complex<double> acc = v(a) * ch.theta().c[c].eval(p);
      for (int b = 0; b < n; ++b) acc += s.U(a, b) * ch.coframe(b).c[c].eval(p);
      out[a][c] = acc;
    }
  return out;
}

std::vector<std::vector<std::complex<double>>> InvariantCoframe::OmegaAlphaHat(
    const EvalEnv& p) const {
  const CRChart& ch = ph_->chart();
  const auto& xs = ch.coords();
  int n = ch.n();
  size_t dim = xs.size();

  // Constants of the refinement, computed once at the base point:
  // a_{αβ̄} = e^u (U^{-1})^γ_α conj((U^{-1})^ρ_β) g_{γρ̄}, c_α = e^{-u} W_α(u).
  EvalEnv b0;
  for (size_t c = 0; c < dim; ++c) b0.set(xs[c], base_[c]);
  auto s0 = integrate(b0);
  Eigen::MatrixXcd Uinv = s0.U.inverse();
  Eigen::MatrixXcd g(n, n);
  for (int a = 0; a < n; ++a)
    for (int bb = 0; bb < n; ++bb) g(a, bb) = ch.levi(a, bb).eval(b0);
  Eigen::MatrixXcd amat = std::exp(s0.u) * (Uinv.transpose() * g * Uinv.conjugate());
  Eigen::VectorXcd cvec(n);
  {
    double h = 1e-5;
    for (int a = 0; a < n; ++a) {
      // W_α = (U^{-1})^β_α T_β; W_α(u) by central differences on u.
      std::complex<double> acc = 0.0;
      for (int beta = 0; beta < n; ++beta) {
        std::complex<double> coeff = Uinv(beta, a);
        for (size_t c = 0; c < dim; ++c) {
          std::complex<double> tb = ch.frame(beta).c[c].eval(b0);
          EvalEnv qp = b0, qm = b0;
          qp.set(xs[c], base_[c] + h);
          qm.set(xs[c], base_[c] - h);
          double du = (integrate(qp).u - integrate(qm).u) / (2 * h);
          acc += coeff * tb * du;
        }
      }
      cvec(a) = std::exp(-s0.u) * acc;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(amat);
  Eigen::MatrixXcd bmat = es.operatorSqrt();
  Eigen::MatrixXcd binv = bmat.inverse();

  auto Oa = OmegaAlpha(p);
  auto O = Omega(p);
  std::vector<std::vector<std::complex<double>>> out(
      n, std::vector<std::complex<double>>(dim));
  // Ω̂^α = b^α_β Ω^β + (i/2) c_β̄ (b^{-1})^β̄_ᾱ Ω
  for (int a = 0; a < n; ++a) {
    std::complex<double> shift = 0.0;
    for (int bb = 0; bb < n; ++bb)
      shift += std::conj(cvec(bb)) * std::conj(binv(bb, a));
    shift *= std::complex<double>(0, 0.5);
    for (size_t c = 0; c < dim; ++c) {
      std::complex<double> acc = shift * O[c];
      for (int bb = 0; bb < n; ++bb) acc += bmat(a, bb) * Oa[bb][c];
      out[a][c] = acc;
    }
  }
  return out;
}

double InvariantCoframe::lie_residual(const EvalEnv& p) const {
  const CRChart& ch = ph_->chart();
  const auto& xs = ch.coords();
  int n = ch.n();
  size_t dim = xs.size();
  double h = 1e-4;
  double res = 0.0;

  auto omega_at = [&](const EvalEnv& q) {
    std::vector<std::vector<std::complex<double>>> all;
    all.push_back(Omega(q));
    auto oa = OmegaAlpha(q);
    for (auto& r : oa) all.push_back(std::move(r));
    return all;
  };

  for (const auto& X : sym_) {
    // (L_X ω)(∂_B) = X(ω(∂_B)) - ω([X, ∂_B]), [X,∂_B] = -∂_B(X^A)∂_A.
    std::vector<double> xv(dim);
    for (size_t c = 0; c < dim; ++c) xv[c] = X.c[c].eval(p).real();
    EvalEnv pp = p, pm = p;
    for (size_t c = 0; c < dim; ++c) {
      pp.set(xs[c], *p.find(xs[c]) + h * xv[c]);
      pm.set(xs[c], *p.find(xs[c]) - h * xv[c]);
    }
    auto wp = omega_at(pp), wm = omega_at(pm), w0 = omega_at(p);
    for (size_t row = 0; row < w0.size(); ++row)
      for (size_t B = 0; B < dim; ++B) {
        std::complex<double> dirder = (wp[row][B] - wm[row][B]) / (2 * h);
        std::complex<double> corr = 0.0;
        for (size_t A = 0; A < dim; ++A)
          corr -= X.c[A].diff(xs[B]).eval(p) * w0[row][A];
        res = std::max(res, std::abs(dirder - corr));
      }
  }
  (void)n;
  return res;
}

double InvariantCoframe::structure_residual(const EvalEnv& p) const {
  const CRChart& ch = ph_->chart();
  const auto& xs = ch.coords();
  int n = ch.n();
  size_t dim = xs.size();
  double h = 1e-4;

  // dΩ(∂_A,∂_B) by central differences on the numeric components.
  auto omega_comp = [&](const EvalEnv& q) { return Omega(q); };
  std::vector<std::vector<std::complex<double>>> dO(
      dim, std::vector<std::complex<double>>(dim, 0.0));
  for (size_t A = 0; A < dim; ++A) {
    EvalEnv qp = p, qm = p;
    qp.set(xs[A], *p.find(xs[A]) + h);
    qm.set(xs[A], *p.find(xs[A]) - h);
    auto op = omega_comp(qp), om = omega_comp(qm);
    for (size_t B = 0; B < dim; ++B) {
      std::complex<double> dAB = (op[B] - om[B]) / (2 * h);
      dO[A][B] += 0.5 * dAB;   // contributes ∂_A Ω_B to dΩ(∂_A,∂_B)
      dO[B][A] -= 0.5 * dAB;
    }
  }
  auto hat = OmegaAlphaHat(p);
  double res = 0.0;
  for (size_t A = 0; A < dim; ++A)
    for (size_t B = 0; B < dim; ++B) {
      std::complex<double> rhs = 0.0;
      for (int a = 0; a < n; ++a) {
        std::complex<double> wa = hat[a][A], wb = std::conj(hat[a][B]);
        std::complex<double> wa2 = hat[a][B], wb2 = std::conj(hat[a][A]);
        rhs += std::complex<double>(0, 2.0) * 0.5 * (wa * wb - wa2 * wb2);
      }
      res = std::max(res, std::abs(dO[A][B] - rhs));
    }
  return res;
}

double volume_ratio(const CRChart& ch, const EvalEnv& p) {
  return volume_form_value(ch, p) / metric_volume_value(ch, p);
}

}  // namespace pym
