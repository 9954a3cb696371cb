#pragma once

#include <complex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pym/forms.hpp"

namespace pym {

// Strict inequality the sample points must satisfy (expr != 0, expr > 0, ...).
struct Constraint {
  enum Kind { NotZero, Positive, Negative } kind;
  Expr expr;
};

struct Interval {
  double lo = -1.0, hi = 1.0;
};

// Deterministic, platform-independent uniform sampler.
class BoxSampler {
 public:
  BoxSampler(std::vector<Interval> box, std::vector<Constraint> exclude,
             Coords coords, std::uint64_t seed);
  EvalEnv next();

 private:
  std::vector<Interval> box_;
  std::vector<Constraint> exclude_;
  Coords coords_;
  std::mt19937_64 rng_;
};

// A CR chart: contact form θ, CR frame T_α, excluded locus, sampling box.
// Construction derives dθ, the Levi matrix, the characteristic direction
// (symbolically, from the kernel of dθ), the admissible coframe, and the
// Webster metric as coordinate tensors.
class CRChart {
 public:
  static CRChart load(const std::string& path);
  static CRChart from_data(std::string name, int n, Coords coords, OneForm theta,
                           std::vector<VField> frame,
                           std::vector<Constraint> exclude,
                           std::vector<Interval> box);

  const std::string& name() const { return name_; }
  int n() const { return n_; }
  int dim() const { return 2 * n_ + 1; }
  const Coords& coords() const { return coords_; }
  const OneForm& theta() const { return theta_; }
  const TwoForm& dtheta() const { return dtheta_; }
  const VField& frame(int alpha) const { return frame_[alpha]; }          // T_α
  const VField& frame_bar(int alpha) const { return frame_bar_[alpha]; }  // T_ᾱ
  const VField& T() const { return T_; }
  // Levi matrix g_{αβ̄} = -i dθ(T_α, T_β̄).
  const Expr& levi(int a, int b) const { return levi_[a][b]; }
  // Admissible coframe θ^α (θ^α(T_β)=δ, θ^α(T_β̄)=0, θ^α(T)=0).
  const OneForm& coframe(int alpha) const { return coframe_[alpha]; }
  OneForm coframe_bar(int alpha) const { return conj(coords_, coframe_[alpha]); }
  // Webster metric g_θ(∂_A, ∂_B) as a symmetric Expr matrix.
  const ExprMat& webster() const { return webster_; }
  const std::vector<Interval>& box() const { return box_; }
  const std::vector<Constraint>& exclude() const { return exclude_; }

  BoxSampler sampler(std::uint64_t seed) const;

  // Frame matrix columns [T, T_1..T_n, T_1̄..T_n̄] evaluated at a point.
  // Row index = coordinate, column = frame element.
  std::vector<std::vector<std::complex<double>>> frame_matrix(const EvalEnv& p) const;

 private:
  void derive();

  std::string name_;
  int n_ = 1;
  Coords coords_;
  OneForm theta_;
  TwoForm dtheta_;
  std::vector<VField> frame_, frame_bar_;
  VField T_;
  ExprMat levi_;
  std::vector<OneForm> coframe_;
  ExprMat webster_;
  std::vector<Constraint> exclude_;
  std::vector<Interval> box_;
};

// Value of θ∧(dθ)^n on the coordinate frame (∂_1,...,∂_{2n+1}) at a point,
// computed by the alternating sum (1/(2n+1)!) Σ sgn(σ) θ Ω ... Ω.
double volume_form_value(const CRChart& ch, const EvalEnv& p);
// Value of dvol(g_θ) on the coordinate frame: sqrt|det g| / (2n+1)!.
double metric_volume_value(const CRChart& ch, const EvalEnv& p);

}  // namespace pym
