#include "pym/expr.hpp"

#include <cctype>
#include <cmath>
#include <numeric>
#include <sstream>

namespace pym {

struct ExprNode {
  ExprKind kind;
  std::vector<Expr> kids;
  std::string name;       // Var
  std::int64_t num = 0;   // RationalConst
  std::int64_t den = 1;   // RationalConst
  double fval = 0.0;      // FloatConst
  long ipow = 0;          // Pow exponent
};

namespace {

Expr make(ExprKind k, std::vector<Expr> kids = {}) {
  auto n = std::make_shared<ExprNode>();
  n->kind = k;
  n->kids = std::move(kids);
  return Expr(ExprNodePtr(n));
}

bool is_rat(const Expr& e) { return e.node()->kind == ExprKind::RationalConst; }
bool is_float(const Expr& e) { return e.node()->kind == ExprKind::FloatConst; }
bool is_num(const Expr& e) { return is_rat(e) || is_float(e); }

double num_value(const Expr& e) {
  const auto& n = *e.node();
  if (n.kind == ExprKind::RationalConst)
    return static_cast<double>(n.num) / static_cast<double>(n.den);
  return n.fval;
}

bool rat_is(const Expr& e, std::int64_t num, std::int64_t den = 1) {
  const auto& n = *e.node();
  return n.kind == ExprKind::RationalConst && n.num == num && n.den == den;
}

bool mul_overflows(std::int64_t a, std::int64_t b) {
  if (a == 0 || b == 0) return false;
  __int128 p = static_cast<__int128>(a) * b;
  return p > INT64_MAX || p < INT64_MIN;
}

}  // namespace

Expr::Expr() : node_(nullptr) { *this = rational(0); }

Expr Expr::rational(std::int64_t num, std::int64_t den) {
  if (den == 0) throw std::invalid_argument("rational with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  std::int64_t g = std::gcd(num < 0 ? -num : num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprKind::RationalConst;
  n->num = num;
  n->den = den;
  return Expr(ExprNodePtr(n));
}

Expr Expr::real(double v) {
  // Exact small integers fold to rationals so constant arithmetic stays exact.
  if (v == std::floor(v) && std::abs(v) < 1e15)
    return rational(static_cast<std::int64_t>(v));
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprKind::FloatConst;
  n->fval = v;
  return Expr(ExprNodePtr(n));
}

Expr Expr::i() { return make(ExprKind::ImaginaryUnit); }

Expr Expr::pi() { return var("pi"); }

Expr Expr::var(const std::string& name) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprKind::Var;
  n->name = name;
  return Expr(ExprNodePtr(n));
}

bool Expr::is_zero() const { return rat_is(*this, 0); }
bool Expr::is_const() const { return is_num(*this); }

Expr Expr::operator-() const {
  const auto& n = *node_;
  if (n.kind == ExprKind::RationalConst) return rational(-n.num, n.den);
  if (n.kind == ExprKind::FloatConst) return real(-n.fval);
  if (n.kind == ExprKind::Neg) return n.kids[0];
  return make(ExprKind::Neg, {*this});
}

Expr Expr::operator+(const Expr& o) const {
  if (is_zero()) return o;
  if (o.is_zero()) return *this;
  if (is_rat(*this) && is_rat(o)) {
    const auto &a = *node_, &b = *o.node();
    if (!mul_overflows(a.num, b.den) && !mul_overflows(b.num, a.den) &&
        !mul_overflows(a.den, b.den))
      return rational(a.num * b.den + b.num * a.den, a.den * b.den);
  }
  if (is_num(*this) && is_num(o)) return real(num_value(*this) + num_value(o));
  return make(ExprKind::Add, {*this, o});
}

Expr Expr::operator-(const Expr& o) const {
  if (o.is_zero()) return *this;
  if (is_zero()) return -o;
  if (is_rat(*this) && is_rat(o)) {
    const auto &a = *node_, &b = *o.node();
    if (!mul_overflows(a.num, b.den) && !mul_overflows(b.num, a.den) &&
        !mul_overflows(a.den, b.den))
      return rational(a.num * b.den - b.num * a.den, a.den * b.den);
  }
  if (is_num(*this) && is_num(o)) return real(num_value(*this) - num_value(o));
  return make(ExprKind::Sub, {*this, o});
}

Expr Expr::operator*(const Expr& o) const {
  if (is_zero() || o.is_zero()) return rational(0);
  if (rat_is(*this, 1)) return o;
  if (rat_is(o, 1)) return *this;
  if (rat_is(*this, -1)) return -o;
  if (rat_is(o, -1)) return -*this;
  if (is_rat(*this) && is_rat(o)) {
    const auto &a = *node_, &b = *o.node();
    if (!mul_overflows(a.num, b.num) && !mul_overflows(a.den, b.den))
      return rational(a.num * b.num, a.den * b.den);
  }
  if (is_num(*this) && is_num(o)) return real(num_value(*this) * num_value(o));
  if (node_->kind == ExprKind::ImaginaryUnit && o.node()->kind == ExprKind::ImaginaryUnit)
    return rational(-1);
  return make(ExprKind::Mul, {*this, o});
}

Expr Expr::operator/(const Expr& o) const {
  if (rat_is(o, 1)) return *this;
  if (is_zero() && !o.is_zero()) return rational(0);
  if (is_rat(*this) && is_rat(o) && !rat_is(o, 0)) {
    const auto &a = *node_, &b = *o.node();
    if (!mul_overflows(a.num, b.den) && !mul_overflows(a.den, b.num))
      return rational(a.num * b.den, a.den * b.num);
  }
  if (is_num(*this) && is_num(o) && num_value(o) != 0.0)
    return real(num_value(*this) / num_value(o));
  return make(ExprKind::Div, {*this, o});
}

Expr Expr::pow(long k) const {
  if (k == 0) return rational(1);
  if (k == 1) return *this;
  if (is_rat(*this)) {
    const auto& a = *node_;
    std::int64_t num = 1, den = 1;
    bool ok = true;
    std::int64_t bn = k > 0 ? a.num : a.den, bd = k > 0 ? a.den : a.num;
    if (bd == 0) ok = false;
    long kk = k > 0 ? k : -k;
    for (long j = 0; ok && j < kk; ++j) {
      if (mul_overflows(num, bn) || mul_overflows(den, bd)) ok = false;
      else {
        num *= bn;
        den *= bd;
      }
    }
    if (ok) return rational(num, den);
  }
  if (is_float(*this)) return real(std::pow(node_->fval, static_cast<double>(k)));
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprKind::Pow;
  n->kids = {*this};
  n->ipow = k;
  return Expr(ExprNodePtr(n));
}

Expr Expr::sqrt(const Expr& e) { return make(ExprKind::Sqrt, {e}); }
Expr Expr::exp(const Expr& e) {
  if (e.is_zero()) return rational(1);
  return make(ExprKind::Exp, {e});
}
Expr Expr::log(const Expr& e) {
  if (rat_is(e, 1)) return rational(0);
  return make(ExprKind::Log, {e});
}
Expr Expr::sin(const Expr& e) {
  if (e.is_zero()) return rational(0);
  return make(ExprKind::Sin, {e});
}
Expr Expr::cos(const Expr& e) {
  if (e.is_zero()) return rational(1);
  return make(ExprKind::Cos, {e});
}

Expr Expr::conj() const {
  const auto& n = *node_;
  switch (n.kind) {
    case ExprKind::RationalConst:
    case ExprKind::FloatConst:
    case ExprKind::Var:
      return *this;
    case ExprKind::ImaginaryUnit:
      return -i();
    case ExprKind::Neg:
      return -n.kids[0].conj();
    case ExprKind::Add:
      return n.kids[0].conj() + n.kids[1].conj();
    case ExprKind::Sub:
      return n.kids[0].conj() - n.kids[1].conj();
    case ExprKind::Mul:
      return n.kids[0].conj() * n.kids[1].conj();
    case ExprKind::Div:
      return n.kids[0].conj() / n.kids[1].conj();
    case ExprKind::Pow:
      return n.kids[0].conj().pow(n.ipow);
    case ExprKind::Sqrt:
    case ExprKind::Log:
      // not pushed through: the principal branch breaks conj on the cut
      return make(ExprKind::Conj, {*this});
    case ExprKind::Exp:
      return exp(n.kids[0].conj());
    case ExprKind::Sin:
      return sin(n.kids[0].conj());
    case ExprKind::Cos:
      return cos(n.kids[0].conj());
    case ExprKind::Conj:
      return n.kids[0];
  }
  throw std::logic_error("conj: bad kind");
}

Expr Expr::diff(const std::string& v) const {
  const auto& n = *node_;
  switch (n.kind) {
    case ExprKind::RationalConst:
    case ExprKind::FloatConst:
    case ExprKind::ImaginaryUnit:
      return rational(0);
    case ExprKind::Var:
      return rational(n.name == v ? 1 : 0);
    case ExprKind::Neg:
      return -n.kids[0].diff(v);
    case ExprKind::Add:
      return n.kids[0].diff(v) + n.kids[1].diff(v);
    case ExprKind::Sub:
      return n.kids[0].diff(v) - n.kids[1].diff(v);
    case ExprKind::Mul:
      return n.kids[0].diff(v) * n.kids[1] + n.kids[0] * n.kids[1].diff(v);
    case ExprKind::Div: {
      const Expr &a = n.kids[0], &b = n.kids[1];
      return (a.diff(v) * b - a * b.diff(v)) / b.pow(2);
    }
    case ExprKind::Pow: {
      const Expr& a = n.kids[0];
      return rational(n.ipow) * a.pow(n.ipow - 1) * a.diff(v);
    }
    case ExprKind::Sqrt: {
      const Expr& a = n.kids[0];
      return a.diff(v) / (rational(2) * sqrt(a));
    }
    case ExprKind::Exp:
      return *this * n.kids[0].diff(v);
    case ExprKind::Log:
      return n.kids[0].diff(v) / n.kids[0];
    case ExprKind::Sin:
      return cos(n.kids[0]) * n.kids[0].diff(v);
    case ExprKind::Cos:
      return -sin(n.kids[0]) * n.kids[0].diff(v);
    case ExprKind::Conj:
      return n.kids[0].diff(v).conj();
  }
  throw std::logic_error("diff: bad kind");
}

std::complex<double> Expr::eval(const EvalEnv& env) const {
  const ExprNode* raw = node_.get();
  auto& cache = env.cache();
  if (auto it = cache.find(raw); it != cache.end()) return it->second.value;

  const auto& n = *raw;
  std::complex<double> r;
  switch (n.kind) {
    case ExprKind::RationalConst:
      r = {static_cast<double>(n.num) / static_cast<double>(n.den), 0.0};
      break;
    case ExprKind::FloatConst:
      r = {n.fval, 0.0};
      break;
    case ExprKind::ImaginaryUnit:
      r = {0.0, 1.0};
      break;
    case ExprKind::Var: {
      if (n.name == "pi") {
        r = {M_PI, 0.0};
        break;
      }
      const double* v = env.find(n.name);
      if (!v) throw EvalError("unbound coordinate '" + n.name + "'", str());
      r = {*v, 0.0};
      break;
    }
    case ExprKind::Neg:
      r = -n.kids[0].eval(env);
      break;
    case ExprKind::Add:
      r = n.kids[0].eval(env) + n.kids[1].eval(env);
      break;
    case ExprKind::Sub:
      r = n.kids[0].eval(env) - n.kids[1].eval(env);
      break;
    case ExprKind::Mul:
      r = n.kids[0].eval(env) * n.kids[1].eval(env);
      break;
    case ExprKind::Div: {
      auto denom = n.kids[1].eval(env);
      if (denom == std::complex<double>(0.0, 0.0))
        throw EvalError("division by zero", str());
      r = n.kids[0].eval(env) / denom;
      break;
    }
    case ExprKind::Pow: {
      auto b = n.kids[0].eval(env);
      long k = n.ipow;
      if (k < 0 && b == std::complex<double>(0.0, 0.0))
        throw EvalError("zero to negative power", str());
      std::complex<double> acc(1.0, 0.0);
      std::complex<double> base = k < 0 ? 1.0 / b : b;
      for (long j = 0, kk = k < 0 ? -k : k; j < kk; ++j) acc *= base;
      r = acc;
      break;
    }
    case ExprKind::Sqrt:
      r = std::sqrt(n.kids[0].eval(env));
      break;
    case ExprKind::Exp:
      r = std::exp(n.kids[0].eval(env));
      break;
    case ExprKind::Log: {
      auto a = n.kids[0].eval(env);
      if (a == std::complex<double>(0.0, 0.0))
        throw EvalError("log of zero", str());
      r = std::log(a);
      break;
    }
    case ExprKind::Sin:
      r = std::sin(n.kids[0].eval(env));
      break;
    case ExprKind::Cos:
      r = std::cos(n.kids[0].eval(env));
      break;
    case ExprKind::Conj:
      r = std::conj(n.kids[0].eval(env));
      break;
    default:
      throw std::logic_error("eval: bad kind");
  }
  if (!std::isfinite(r.real()) || !std::isfinite(r.imag()))
    throw EvalError("non-finite value", str());
  cache.emplace(raw, EvalEnv::CacheEntry{node_, r});
  return r;
}

namespace {

void print_node(const Expr& e, std::ostream& os) {
  const auto& n = *e.node();
  switch (n.kind) {
    case ExprKind::RationalConst:
      if (n.den == 1) {
        if (n.num < 0) os << "(" << n.num << ")";
        else os << n.num;
      } else {
        os << "(" << n.num << "/" << n.den << ")";
      }
      break;
    case ExprKind::FloatConst: {
      std::ostringstream tmp;
      tmp.precision(17);
      tmp << n.fval;
      std::string s = tmp.str();
      if (s.find('-') != std::string::npos) os << "(" << s << ")";
      else os << s;
      break;
    }
    case ExprKind::ImaginaryUnit:
      os << "i";
      break;
    case ExprKind::Var:
      os << n.name;
      break;
    case ExprKind::Neg:
      os << "(0-";
      print_node(n.kids[0], os);
      os << ")";
      break;
    case ExprKind::Add:
      os << "(";
      print_node(n.kids[0], os);
      os << "+";
      print_node(n.kids[1], os);
      os << ")";
      break;
    case ExprKind::Sub:
      os << "(";
      print_node(n.kids[0], os);
      os << "-";
      print_node(n.kids[1], os);
      os << ")";
      break;
    case ExprKind::Mul:
      os << "(";
      print_node(n.kids[0], os);
      os << "*";
      print_node(n.kids[1], os);
      os << ")";
      break;
    case ExprKind::Div:
      os << "(";
      print_node(n.kids[0], os);
      os << "/";
      print_node(n.kids[1], os);
      os << ")";
      break;
    case ExprKind::Pow:
      os << "(";
      print_node(n.kids[0], os);
      os << "^" << n.ipow << ")";
      break;
    case ExprKind::Sqrt:
      os << "sqrt(";
      print_node(n.kids[0], os);
      os << ")";
      break;
    case ExprKind::Exp:
      os << "exp(";
      print_node(n.kids[0], os);
      os << ")";
      break;
    case ExprKind::Log:
      os << "log(";
      print_node(n.kids[0], os);
      os << ")";
      break;
    case ExprKind::Sin:
      os << "sin(";
      print_node(n.kids[0], os);
      os << ")";
      break;
    case ExprKind::Cos:
      os << "cos(";
      print_node(n.kids[0], os);
      os << ")";
      break;
    case ExprKind::Conj:
      os << "conj(";
      print_node(n.kids[0], os);
      os << ")";
      break;
  }
}

}  // namespace

std::string Expr::str() const {
  std::ostringstream os;
  print_node(*this, os);
  return os.str();
}

bool Expr::same_structure(const Expr& o) const {
  const auto &a = *node_, &b = *o.node();
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case ExprKind::RationalConst:
      return a.num == b.num && a.den == b.den;
    case ExprKind::FloatConst:
      return a.fval == b.fval;
    case ExprKind::Var:
      return a.name == b.name;
    case ExprKind::Pow:
      if (a.ipow != b.ipow) return false;
      break;
    default:
      break;
  }
  if (a.kids.size() != b.kids.size()) return false;
  for (size_t j = 0; j < a.kids.size(); ++j)
    if (!a.kids[j].same_structure(b.kids[j])) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Recursive-descent parser for:
//   expr   := ['-'] term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := base ('^' integer)?
//   base   := number | 'i' | ident | '(' expr ')' | func '(' expr ')'
//   func   in {sqrt, exp, log, sin, cos, conj}
// ---------------------------------------------------------------------------

namespace {

class Parser {
 public:
  Parser(const std::string& text, const std::set<std::string>& vars)
      : s_(text), vars_(vars) {}

  Expr parse() {
    Expr e = expr();
    skip_ws();
    if (pos_ != s_.size()) throw ParseError("unexpected trailing input", pos_);
    return e;
  }

 private:
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  char peek() {
    skip_ws();
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }
  bool eat(char c) {
    if (peek() == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr expr() {
    bool neg = false;
    if (peek() == '-') {
      ++pos_;
      neg = true;
    }
    Expr acc = term();
    if (neg) acc = -acc;
    while (true) {
      char c = peek();
      if (c == '+') {
        ++pos_;
        acc = acc + term();
      } else if (c == '-') {
        ++pos_;
        acc = acc - term();
      } else {
        return acc;
      }
    }
  }

  Expr term() {
    Expr acc = factor();
    while (true) {
      char c = peek();
      if (c == '*') {
        ++pos_;
        acc = acc * factor();
      } else if (c == '/') {
        ++pos_;
        acc = acc / factor();
      } else {
        return acc;
      }
    }
  }

  Expr factor() {
    Expr b = base();
    if (peek() == '^') {
      ++pos_;
      skip_ws();
      bool neg = eat('-');
      size_t start = pos_;
      long k = 0;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
        k = k * 10 + (s_[pos_] - '0');
        ++pos_;
      }
      if (pos_ == start) throw ParseError("expected integer exponent", pos_);
      b = b.pow(neg ? -k : k);
    }
    return b;
  }

  Expr base() {
    skip_ws();
    if (pos_ >= s_.size()) throw ParseError("unexpected end of input", pos_);
    char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = expr();
      if (!eat(')')) throw ParseError("expected ')'", pos_);
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return ident();
    throw ParseError(std::string("unexpected character '") + c + "'", pos_);
  }

  Expr number() {
    size_t start = pos_;
    bool has_dot = false, has_exp = false;
    while (pos_ < s_.size()) {
      char c = s_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '.' && !has_dot && !has_exp) {
        has_dot = true;
        ++pos_;
      } else if ((c == 'e' || c == 'E') && !has_exp && pos_ + 1 < s_.size() &&
                 (std::isdigit(static_cast<unsigned char>(s_[pos_ + 1])) ||
                  ((s_[pos_ + 1] == '+' || s_[pos_ + 1] == '-') && pos_ + 2 < s_.size() &&
                   std::isdigit(static_cast<unsigned char>(s_[pos_ + 2]))))) {
        has_exp = true;
        ++pos_;
        if (s_[pos_] == '+' || s_[pos_] == '-') ++pos_;
      } else {
        break;
      }
    }
    std::string t = s_.substr(start, pos_ - start);
    if (!has_dot && !has_exp) {
      try {
        return Expr::rational(std::stoll(t));
      } catch (...) {
      }
    }
    return Expr::real(std::stod(t));
  }

  Expr ident() {
    size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
      ++pos_;
    std::string name = s_.substr(start, pos_ - start);
    if (name == "i") return Expr::i();
    static const std::set<std::string> funcs = {"sqrt", "exp", "log", "sin", "cos", "conj"};
    if (funcs.count(name)) {
      if (!eat('(')) throw ParseError("expected '(' after " + name, pos_);
      Expr a = expr();
      if (!eat(')')) throw ParseError("expected ')'", pos_);
      if (name == "sqrt") return Expr::sqrt(a);
      if (name == "exp") return Expr::exp(a);
      if (name == "log") return Expr::log(a);
      if (name == "sin") return Expr::sin(a);
      if (name == "cos") return Expr::cos(a);
      return a.conj();
    }
    if (name == "pi") return Expr::pi();
    if (!vars_.count(name))
      throw ParseError("unknown identifier '" + name + "'", start);
    return Expr::var(name);
  }

  const std::string& s_;
  const std::set<std::string>& vars_;
  size_t pos_ = 0;
};

}  // namespace

Expr parse_expr(const std::string& text, const std::set<std::string>& vars) {
  return Parser(text, vars).parse();
}

}  // namespace pym
