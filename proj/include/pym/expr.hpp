#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace pym {

// Node kinds of the expression tree. Coordinates are real by declaration;
// complex values enter only through the imaginary-unit node.
enum class ExprKind {
  RationalConst,
  FloatConst,
  ImaginaryUnit,
  Var,
  Neg,
  Add,
  Sub,
  Mul,
  Div,
  Pow,  // integer exponent
  Sqrt,
  Exp,
  Log,
  Sin,
  Cos,
  Conj,
};

struct ExprNode;
using ExprNodePtr = std::shared_ptr<const ExprNode>;

class EvalError : public std::runtime_error {
 public:
  EvalError(const std::string& what, std::string subtree)
      : std::runtime_error(what + " in subexpression: " + subtree),
        subtree_(std::move(subtree)) {}
  const std::string& subtree() const { return subtree_; }

 private:
  std::string subtree_;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, size_t offset)
      : std::runtime_error(what + " at byte " + std::to_string(offset)),
        offset_(offset) {}
  size_t offset() const { return offset_; }

 private:
  size_t offset_;
};

// Evaluation environment: coordinate name -> real value. Carries a per-call
// node cache so shared subtrees are evaluated once.
class EvalEnv {
 public:
  EvalEnv() = default;
  explicit EvalEnv(std::unordered_map<std::string, double> values)
      : values_(std::move(values)) {}
  void set(const std::string& name, double v) {
    values_[name] = v;
    cache_.clear();
  }
  const double* find(const std::string& name) const {
    auto it = values_.find(name);
    return it == values_.end() ? nullptr : &it->second;
  }
  const std::unordered_map<std::string, double>& values() const { return values_; }

  // Cache entries own their node so pointer keys cannot be recycled by later
  // allocations.
  struct CacheEntry {
    ExprNodePtr owner;
    std::complex<double> value;
  };
  std::unordered_map<const ExprNode*, CacheEntry>& cache() const { return cache_; }

 private:
  std::unordered_map<std::string, double> values_;
  mutable std::unordered_map<const ExprNode*, CacheEntry> cache_;
};

// Immutable symbolic expression handle. All operations are pure; nodes are
// shared and never mutated after construction.
class Expr {
 public:
  Expr();  // zero

  static Expr rational(std::int64_t num, std::int64_t den = 1);
  static Expr real(double v);
  static Expr i();
  static Expr var(const std::string& name);
  static Expr pi();

  Expr operator-() const;
  Expr operator+(const Expr& o) const;
  Expr operator-(const Expr& o) const;
  Expr operator*(const Expr& o) const;
  Expr operator/(const Expr& o) const;
  Expr pow(long k) const;

  static Expr sqrt(const Expr& e);
  static Expr exp(const Expr& e);
  static Expr log(const Expr& e);
  static Expr sin(const Expr& e);
  static Expr cos(const Expr& e);

  // Structural complex conjugate: coordinates are real, so conjugation is
  // pushed through the tree (i -> -i) and no Conj node survives construction
  // except around Log/Sqrt guards, where it is safe to push as well.
  Expr conj() const;

  Expr diff(const std::string& var) const;

  std::complex<double> eval(const EvalEnv& env) const;

  std::string str() const;

  bool is_zero() const;   // structurally the constant 0
  bool is_const() const;  // rational or float constant (not i)

  bool same_structure(const Expr& o) const;

  const ExprNodePtr& node() const { return node_; }
  explicit Expr(ExprNodePtr n) : node_(std::move(n)) {}

 private:
  ExprNodePtr node_;
};

inline Expr operator+(double a, const Expr& b) { return Expr::real(a) + b; }
inline Expr operator*(double a, const Expr& b) { return Expr::real(a) * b; }

// Parses `text` against the declared coordinate set (plus the reserved
// constants i and pi). Throws ParseError with a byte offset on bad syntax or
// unknown identifiers.
Expr parse_expr(const std::string& text, const std::set<std::string>& vars);

}  // namespace pym
