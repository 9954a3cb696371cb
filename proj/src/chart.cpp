#include "pym/chart.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <Eigen/Dense>

namespace pym {

namespace {

double uniform01(std::mt19937_64& rng) {
  // Portable 53-bit mantissa mapping; keeps reports byte-identical across
  // platforms, unlike std::uniform_real_distribution.
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string t;
  while (is >> t) out.push_back(t);
  return out;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

BoxSampler::BoxSampler(std::vector<Interval> box, std::vector<Constraint> exclude,
                       Coords coords, std::uint64_t seed)
    : box_(std::move(box)), exclude_(std::move(exclude)), coords_(std::move(coords)),
      rng_(seed) {}

EvalEnv BoxSampler::next() {
  for (int attempt = 0; attempt < 10000; ++attempt) {
    EvalEnv env;
    for (size_t a = 0; a < coords_.size(); ++a) {
      double u = uniform01(rng_);
      env.set(coords_[a], box_[a].lo + u * (box_[a].hi - box_[a].lo));
    }
    bool ok = true;
    for (const auto& c : exclude_) {
      std::complex<double> v;
      try {
        v = c.expr.eval(env);
      } catch (const EvalError&) {
        ok = false;
        break;
      }
      switch (c.kind) {
        case Constraint::NotZero:
          ok = std::abs(v) > 1e-6;
          break;
        case Constraint::Positive:
          ok = v.real() > 1e-9;
          break;
        case Constraint::Negative:
          ok = v.real() < -1e-9;
          break;
      }
      if (!ok) break;
    }
    if (ok) return env;
  }
  throw std::runtime_error("sampling box exhausted by excluded locus");
}

CRChart CRChart::from_data(std::string name, int n, Coords coords, OneForm theta,
                           std::vector<VField> frame, std::vector<Constraint> exclude,
                           std::vector<Interval> box) {
  CRChart ch;
  ch.name_ = std::move(name);
  ch.n_ = n;
  ch.coords_ = std::move(coords);
  ch.theta_ = std::move(theta);
  ch.frame_ = std::move(frame);
  ch.exclude_ = std::move(exclude);
  ch.box_ = std::move(box);
  ch.derive();
  return ch;
}

void CRChart::derive() {
  const size_t dim = coords_.size();
  if (dim != static_cast<size_t>(2 * n_ + 1))
    throw std::runtime_error("chart '" + name_ + "': expected " +
                             std::to_string(2 * n_ + 1) + " coordinates");
  dtheta_ = d(coords_, theta_);
  frame_bar_.clear();
  for (const auto& f : frame_) frame_bar_.push_back(conj(coords_, f));

  // Levi matrix g_{αβ̄} = -i dθ(T_α, T_β̄).
  levi_.assign(n_, std::vector<Expr>(n_));
  for (int a = 0; a < n_; ++a)
    for (int b = 0; b < n_; ++b)
      levi_[a][b] = -Expr::i() * apply(dtheta_, frame_[a], frame_bar_[b]);

  // Characteristic direction: kernel of the antisymmetric matrix dθ_{AB},
  // normalized by θ(T)=1. In odd dimension the kernel is spanned by the
  // sub-Pfaffian vector v_A = (-1)^A Pf(dθ with row/col A removed).
  auto sub_pfaffian = [&](size_t skip) -> Expr {
    std::vector<size_t> idx;
    for (size_t a = 0; a < dim; ++a)
      if (a != skip) idx.push_back(a);
    if (idx.size() == 2) return dtheta_.m[idx[0]][idx[1]];
    if (idx.size() == 4) {
      auto& M = dtheta_.m;
      return M[idx[0]][idx[1]] * M[idx[2]][idx[3]] -
             M[idx[0]][idx[2]] * M[idx[1]][idx[3]] +
             M[idx[0]][idx[3]] * M[idx[1]][idx[2]];
    }
    throw std::runtime_error("characteristic direction implemented for n<=2");
  };
  VField v(dim);
  for (size_t a = 0; a < dim; ++a) {
    Expr pf = sub_pfaffian(a);
    v.c[a] = (a % 2 == 0) ? pf : -pf;
  }
  Expr norm = apply(theta_, v);
  T_ = VField(dim);
  for (size_t a = 0; a < dim; ++a) T_.c[a] = v.c[a] / norm;

  // Admissible coframe from the symbolic inverse of the frame matrix with
  // columns [T, T_1..T_n, T_1̄..T_n̄].
  ExprMat B(dim, std::vector<Expr>(dim));
  for (size_t r = 0; r < dim; ++r) {
    B[r][0] = T_.c[r];
    for (int a = 0; a < n_; ++a) {
      B[r][1 + a] = frame_[a].c[r];
      B[r][1 + n_ + a] = frame_bar_[a].c[r];
    }
  }
  ExprMat Binv = inverse(B);
  coframe_.assign(n_, OneForm(dim));
  for (int a = 0; a < n_; ++a)
    for (size_t cidx = 0; cidx < dim; ++cidx) coframe_[a].c[cidx] = Binv[1 + a][cidx];

  // Webster metric g_θ = θ⊗θ + Σ g_{αβ̄}(θ^α⊗θ^β̄ + θ^β̄⊗θ^α).
  webster_.assign(dim, std::vector<Expr>(dim));
  for (size_t p = 0; p < dim; ++p)
    for (size_t q = p; q < dim; ++q) {
      Expr acc = theta_.c[p] * theta_.c[q];
      for (int a = 0; a < n_; ++a)
        for (int b = 0; b < n_; ++b) {
          Expr tb = coframe_[b].c[q].conj();
          Expr tb2 = coframe_[b].c[p].conj();
          acc = acc + levi_[a][b] * (coframe_[a].c[p] * tb + tb2 * coframe_[a].c[q]);
        }
      webster_[p][q] = acc;
      if (q != p) webster_[q][p] = acc;
    }
}

BoxSampler CRChart::sampler(std::uint64_t seed) const {
  return BoxSampler(box_, exclude_, coords_, seed);
}

std::vector<std::vector<std::complex<double>>> CRChart::frame_matrix(
    const EvalEnv& p) const {
  size_t dim = coords_.size();
  std::vector<std::vector<std::complex<double>>> M(
      dim, std::vector<std::complex<double>>(dim));
  for (size_t r = 0; r < dim; ++r) {
    M[r][0] = T_.c[r].eval(p);
    for (int a = 0; a < n_; ++a) {
      M[r][1 + a] = frame_[a].c[r].eval(p);
      M[r][1 + n_ + a] = frame_bar_[a].c[r].eval(p);
    }
  }
  return M;
}

CRChart CRChart::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifold file: " + path);
  int n = -1;
  Coords coords;
  std::map<int, std::vector<std::string>> frame_txt;
  std::vector<std::string> theta_txt, exclude_txt;
  std::map<std::string, Interval> box_map;

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key == "n") {
      n = std::stoi(val);
    } else if (key == "coords") {
      coords = split_ws(val);
    } else if (key == "theta") {
      theta_txt = split_ws(val);
    } else if (key.rfind("frame.alpha", 0) == 0) {
      int idx = std::stoi(key.substr(11));
      frame_txt[idx] = split_ws(val);
    } else if (key == "exclude") {
      exclude_txt.push_back(val);
    } else if (key == "box") {
      std::istringstream is(val);
      std::string part;
      while (std::getline(is, part, ';')) {
        auto toks = split_ws(part);
        if (toks.size() != 3)
          throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                   ": box wants 'coord lo hi'");
        box_map[toks[0]] = Interval{std::stod(toks[1]), std::stod(toks[2])};
      }
    } else {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  if (n < 1 || coords.empty()) throw std::runtime_error(path + ": missing n or coords");
  std::set<std::string> vars(coords.begin(), coords.end());

  auto parse_list = [&](const std::vector<std::string>& txt, const char* what) {
    if (txt.size() != coords.size())
      throw std::runtime_error(path + ": " + what + " wants " +
                               std::to_string(coords.size()) + " expressions");
    std::vector<Expr> out;
    for (const auto& t : txt) out.push_back(parse_expr(t, vars));
    return out;
  };

  OneForm theta(coords.size());
  theta.c = parse_list(theta_txt, "theta");
  std::vector<VField> frame;
  for (int a = 1; a <= n; ++a) {
    auto it = frame_txt.find(a);
    if (it == frame_txt.end())
      throw std::runtime_error(path + ": missing frame.alpha" + std::to_string(a));
    VField f(coords.size());
    f.c = parse_list(it->second, "frame");
    frame.push_back(std::move(f));
  }

  std::vector<Constraint> exclude;
  for (const auto& etxt : exclude_txt) {
    Constraint c;
    size_t pos;
    if ((pos = etxt.find("!=")) != std::string::npos) {
      c.kind = Constraint::NotZero;
      std::string rhs = trim(etxt.substr(pos + 2));
      if (rhs != "0") throw std::runtime_error(path + ": exclude supports 'expr != 0'");
    } else if ((pos = etxt.find('>')) != std::string::npos) {
      c.kind = Constraint::Positive;
    } else if ((pos = etxt.find('<')) != std::string::npos) {
      c.kind = Constraint::Negative;
    } else {
      throw std::runtime_error(path + ": bad exclude: " + etxt);
    }
    c.expr = parse_expr(trim(etxt.substr(0, pos)), vars);
    exclude.push_back(std::move(c));
  }

  std::vector<Interval> box(coords.size());
  for (size_t a = 0; a < coords.size(); ++a) {
    auto it = box_map.find(coords[a]);
    if (it != box_map.end()) box[a] = it->second;
  }

  std::string nm = path;
  auto slash = nm.find_last_of('/');
  if (slash != std::string::npos) nm = nm.substr(slash + 1);
  auto dot = nm.find_last_of('.');
  if (dot != std::string::npos) nm = nm.substr(0, dot);
  return from_data(nm, n, coords, theta, frame, exclude, box);
}

double volume_form_value(const CRChart& ch, const EvalEnv& p) {
  size_t dim = ch.coords().size();
  std::vector<double> th(dim);
  std::vector<std::vector<double>> om(dim, std::vector<double>(dim));
  for (size_t a = 0; a < dim; ++a) {
    th[a] = ch.theta().c[a].eval(p).real();
    for (size_t b = 0; b < dim; ++b) om[a][b] = ch.dtheta().m[a][b].eval(p).real();
  }
  std::vector<size_t> perm(dim);
  for (size_t a = 0; a < dim; ++a) perm[a] = a;
  double acc = 0.0;
  double fact = 1.0;
  for (size_t a = 2; a <= dim; ++a) fact *= static_cast<double>(a);
  // Walk all permutations with sign tracking.
  std::vector<size_t> c(dim, 0);
  int sign = 1;
  auto contrib = [&]() {
    double t = th[perm[0]];
    for (size_t j = 1; j + 1 < dim; j += 2) t *= om[perm[j]][perm[j + 1]];
    acc += sign * t;
  };
  contrib();
  size_t i = 0;
  while (i < dim) {
    if (c[i] < i) {
      std::swap(perm[i % 2 == 0 ? 0 : c[i]], perm[i]);
      sign = -sign;
      contrib();
      ++c[i];
      i = 0;
    } else {
      c[i++] = 0;
    }
  }
  return acc / fact;
}

double metric_volume_value(const CRChart& ch, const EvalEnv& p) {
  size_t dim = ch.coords().size();
  Eigen::MatrixXd G(dim, dim);
  for (size_t a = 0; a < dim; ++a)
    for (size_t b = 0; b < dim; ++b) G(a, b) = ch.webster()[a][b].eval(p).real();
  double fact = 1.0;
  for (size_t a = 2; a <= dim; ++a) fact *= static_cast<double>(a);
  return std::sqrt(std::abs(G.determinant())) / fact;
}

}  // namespace pym
