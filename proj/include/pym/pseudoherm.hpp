#pragma once

#include <complex>
#include <functional>
#include <optional>

#include "pym/chart.hpp"

namespace pym {

// Tanaka-Webster apparatus of a CR chart, in the frame {T, T_α, T_ᾱ}.
// Extended frame index A: 0 = T, 1..n = T_α, n+1..2n = T_ᾱ.
class PHData {
 public:
  explicit PHData(const CRChart& ch);

  const CRChart& chart() const { return *ch_; }
  int n() const { return ch_->n(); }

  VField ext_frame(int A) const;
  OneForm ext_coframe(int A) const;  // θ, θ^α, θ^ᾱ
  static int conj_index(int A, int n) { return A == 0 ? 0 : (A <= n ? A + n : A - n); }

  // Coefficient of T_γ in ∇_{e_A} T_β  (β, γ in 1..n; A extended).
  const Expr& gamma(int A, int beta, int gamma) const {
    return gamma_[A][beta - 1][gamma - 1];
  }
  // Pseudohermitian torsion: τ T_β = A_β^γ̄ T_γ̄.
  const Expr& torsion(int beta, int gamma) const { return A_[beta - 1][gamma - 1]; }
  // Inverse Levi matrix as a plain matrix inverse of g_{αβ̄}.
  const Expr& levi_inv(int a, int b) const { return ginv_[a][b]; }

  // Tanaka-Webster connection 1-forms ω_β^α (coordinate components),
  // ∇ T_β = ω_β^α ⊗ T_α.
  const OneForm& connection_form(int alpha, int beta) const {
    return omega_[alpha - 1][beta - 1];
  }

  // ∇_{e_A} applied to a (0,1)+(1,0)+T frame-component section.
  // Components: u[0] = T part, u[1..n] = T_α parts, u[n+1..2n] = T_ᾱ parts.
  std::vector<Expr> cov_deriv(int A, const std::vector<Expr>& u) const;
  // Frame components of a coordinate vector field.
  std::vector<Expr> frame_components(const VField& v) const;
  VField recompose(const std::vector<Expr>& u) const;
  // ∇_X V for coordinate fields (symbolic).
  VField cov_deriv_field(const VField& x, const VField& v) const;

  // Curvature R(e_A, e_B) T_λ = R_λ{}^γ{}_{AB} T_γ (lazy, cached).
  Expr curvature_coeff(int lambda, int gamma, int A, int B) const;
  // Ricci R_{λμ̄} = R_λ{}^α{}_{αμ̄} and scalar ρ = g^{αβ̄} R_{αβ̄}.
  Expr ricci(int lambda, int mu) const;
  Expr rho() const;

  // Webster metric pairing with complex-bilinear extension, symbolic.
  Expr metric(const VField& x, const VField& y) const;

  // τ applied to a coordinate field (uses frame decomposition).
  VField tau(const VField& x) const;
  // J extended by J T = 0.
  VField J(const VField& x) const;

  // G_θ-orthonormal real H-frame, symbolic (Gram-Schmidt over T_α).
  const std::vector<VField>& h_frame() const { return hframe_; }

  // Tanaka-Webster connection in coordinates: ∇_{∂_a}∂_b = Γ'^c_{ab} ∂_c.
  const Expr& coord_gamma(int a, int b, int c) const { return coord_gamma_[a][b][c]; }

 private:
  void build();
  const CRChart* ch_;
  std::vector<std::vector<std::vector<Expr>>> gamma_;  // [A][β-1][γ-1]
  std::vector<std::vector<Expr>> A_;                   // torsion components
  ExprMat ginv_;
  std::vector<std::vector<OneForm>> omega_;
  std::vector<VField> hframe_;
  std::vector<std::vector<std::vector<Expr>>> coord_gamma_;
  mutable std::optional<std::vector<std::vector<std::vector<std::vector<Expr>>>>> curv_;
  mutable std::optional<ExprMat> ricci_;
  mutable std::optional<Expr> rho_;
  void ensure_curvature() const;
};

struct ResidualStat {
  double max_abs = 0.0;
  double max_rel = 0.0;
  void feed(double abs_err, double scale) {
    max_abs = std::max(max_abs, abs_err);
    max_rel = std::max(max_rel, abs_err / (1.0 + scale));
  }
};

std::vector<EvalEnv> sample_points(const CRChart& ch, int count, std::uint64_t seed);

// Axiom residuals of the Tanaka-Webster connection at the sample points.
struct TWAxiomReport {
  ResidualStat frame_in_kernel;     // θ(T_α) = 0
  ResidualStat levi_hermitian;      // g_{αβ̄} = conj(g_{βᾱ})
  double levi_min_eigen = 0.0;      // strict pseudoconvexity margin
  ResidualStat characteristic;      // θ(T)=1, i_T dθ=0, Im T = 0
  ResidualStat metric_parallel;     // ∇ g_θ = 0
  ResidualStat purity;              // pure torsion
  ResidualStat tau_anticommute;     // τ∘J + J∘τ = 0
  ResidualStat torsion_symmetric;   // A_{αβ} = A_{βα}
};
TWAxiomReport tw_axioms(const PHData& ph, const std::vector<EvalEnv>& pts);

// Sublaplacian Δ_b u = -div(∇^H u), divergence w.r.t. dvol(g_θ) (equal to
// θ∧(dθ)^n up to the Lemma-1 constant).
Expr sublaplacian(const PHData& ph, const Expr& u);
// Independent frame-sum oracle -Σ_a (E_a E_a - ∇_{E_a} E_a) u.
Expr sublaplacian_frame_oracle(const PHData& ph, const Expr& u);

// Symmetry verification: L_X θ = tθ, L_X θ^α = w^α_β θ^β + ℓ^α θ.
struct SymmetryFit {
  bool accepted = false;
  double residual = 0.0;  // max over points of the off-profile components
  Expr t;                 // symbolic coefficients (frame-dual components)
  ExprMat w;              // w[α-1][β-1]
  std::vector<Expr> ell;
};
SymmetryFit verify_symmetry(const PHData& ph, const VField& X,
                            const std::vector<EvalEnv>& pts, double threshold = 1e-6);

// Nurowski/Prop-1 invariant coframe from 2n+1 verified symmetries.
// u, U, v are produced by one RK4 pass along straight paths from the base
// point; Ω = e^u θ, Ω^α = U^α_β θ^β + v^α θ, then the dΩ = 2iΣΩ^α∧Ω^ᾱ
// normalization refinement.
class InvariantCoframe {
 public:
  InvariantCoframe(const PHData& ph, std::vector<VField> symmetries,
                   EvalEnv base_point, int ode_steps = 200);

  // Pointwise covector values (coordinate components).
  std::vector<std::complex<double>> Omega(const EvalEnv& p) const;
  std::vector<std::vector<std::complex<double>>> OmegaAlpha(const EvalEnv& p) const;
  // Normalized coframe Ω̂^α with dΩ = 2i Σ Ω̂^α ∧ Ω̂^ᾱ.
  std::vector<std::vector<std::complex<double>>> OmegaAlphaHat(const EvalEnv& p) const;

  // Scalars along the construction (for tests).
  double u(const EvalEnv& p) const;
  std::vector<std::vector<std::complex<double>>> U(const EvalEnv& p) const;

  // Residual of L_{X_i}Ω and L_{X_i}Ω^α at p (finite differences on the
  // numerically-defined fields).
  double lie_residual(const EvalEnv& p) const;
  // Residual of dΩ - 2i Σ Ω̂^α∧Ω̂^ᾱ at p.
  double structure_residual(const EvalEnv& p) const;

 private:
  struct PathState;
  PathState integrate(const EvalEnv& p) const;

  const PHData* ph_;
  std::vector<VField> sym_;
  std::vector<double> base_;
  int steps_;
  // η(X_i) = t_i, η^α_β(X_i) = w_{iβ}^α, η^α(X_i) = ℓ_i^α as coordinate forms.
  OneForm eta_;
  std::vector<std::vector<OneForm>> eta_w_;
  std::vector<OneForm> eta_ell_;
};

// |θ∧(dθ)^n / dvol(g_θ)| at a point (Lemma-1 constant 2^n n!).
double volume_ratio(const CRChart& ch, const EvalEnv& p);

}  // namespace pym
