#include "pdnf/solver.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>

namespace pdnf {

using i128 = __int128;

Lin Lin::constant(int64_t v) {
  Lin l;
  l.k = v;
  return l;
}
Lin Lin::var(int id, int64_t coef) {
  Lin l;
  if (coef) l.c[id] = coef;
  return l;
}
Lin Lin::operator+(const Lin& o) const {
  Lin r = *this;
  r.k += o.k;
  for (auto& [v, a] : o.c) {
    int64_t n = (r.c[v] += a);
    if (n == 0) r.c.erase(v);
  }
  return r;
}
Lin Lin::operator-(const Lin& o) const { return *this + o.scale(-1); }
Lin Lin::scale(int64_t s) const {
  Lin r;
  if (s == 0) return r;
  r.k = k * s;
  for (auto& [v, a] : c) r.c[v] = a * s;
  return r;
}

Atom negate(const Atom& a) {
  switch (a.r) {
    case Rel::Eq: return {a.t, Rel::Ne};
    case Rel::Ne: return {a.t, Rel::Eq};
    case Rel::Le: return {a.t.scale(-1), Rel::Lt};  // not (t <= 0)  <=>  -t < 0
    case Rel::Lt: return {a.t.scale(-1), Rel::Le};
  }
  return a;
}

std::string atom_str(const Atom& a) {
  std::string s;
  for (auto& [v, c] : a.t.c) {
    if (!s.empty()) s += " + ";
    s += std::to_string(c) + "*k" + std::to_string(v);
  }
  if (s.empty() || a.t.k) s += (s.empty() ? "" : " + ") + std::to_string(a.t.k);
  static const char* rs[] = {"=", "!=", "<=", "<"};
  return s + " " + rs[static_cast<int>(a.r)] + " 0";
}

bool eval_atom(const Atom& a, const std::map<int, int64_t>& m) {
  i128 v = a.t.k;
  for (auto& [x, c] : a.t.c) {
    auto it = m.find(x);
    v += static_cast<i128>(c) * (it == m.end() ? 0 : it->second);
  }
  switch (a.r) {
    case Rel::Eq: return v == 0;
    case Rel::Ne: return v != 0;
    case Rel::Le: return v <= 0;
    case Rel::Lt: return v < 0;
  }
  return false;
}

int SymEnv::fresh(bool is_bool) {
  int id = next++;
  vars[id] = is_bool;
  return id;
}

std::set<int> SymEnv::consts() const {
  std::set<int> r;
  for (auto& [v, b] : vars) r.insert(v);
  for (auto& a : atoms)
    for (auto& [v, c] : a.t.c) r.insert(v);
  return r;
}

SymEnv assert_constraint(SymEnv s, const Atom& a) {
  for (auto& [v, c] : a.t.c) {
    if (!s.vars.count(v)) s.vars[v] = false;
    s.next = std::max(s.next, v + 1);
  }
  s.atoms.push_back(a);
  return s;
}

std::string sym_env_str(const SymEnv& s) {
  std::vector<std::string> parts;
  for (auto& a : s.atoms) parts.push_back(atom_str(a));
  std::sort(parts.begin(), parts.end());
  std::string out;
  for (auto& [v, b] : s.vars) out += "k" + std::to_string(v) + (b ? ":B " : ":I ");
  out += "|";
  for (auto& p : parts) out += " " + p + ";";
  return out;
}

// ---------------- internal solver ----------------

namespace {

constexpr i128 kInf = static_cast<i128>(1) << 100;

struct Cons {
  std::map<int, int64_t> c;
  int64_t k = 0;
  Rel r = Rel::Le;  // Eq, Ne, Le
};

struct Overflow {};

int64_t narrow(i128 v) {
  if (v > INT64_MAX / 4 || v < -(INT64_MAX / 4)) throw Overflow{};
  return static_cast<int64_t>(v);
}

i128 floor_div(i128 a, i128 b) {
  i128 q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}
i128 ceil_div(i128 a, i128 b) { return -floor_div(-a, b); }

int64_t gcd64(int64_t a, int64_t b) { return std::gcd(a < 0 ? -a : a, b < 0 ? -b : b); }

// normalizes in place; returns false if trivially false; sets `drop` when trivially true
bool normalize(Cons& c, bool& drop) {
  drop = false;
  for (auto it = c.c.begin(); it != c.c.end();) it = it->second == 0 ? c.c.erase(it) : std::next(it);
  if (c.c.empty()) {
    bool ok = c.r == Rel::Eq ? c.k == 0 : c.r == Rel::Ne ? c.k != 0 : c.k <= 0;
    drop = ok;
    return ok;
  }
  int64_t g = 0;
  for (auto& [v, a] : c.c) g = gcd64(g, a);
  if (g > 1) {
    if (c.r == Rel::Eq) {
      if (c.k % g != 0) return false;
      c.k /= g;
    } else if (c.r == Rel::Ne) {
      if (c.k % g != 0) {
        drop = true;
        return true;
      }
      c.k /= g;
    } else {
      c.k = narrow(ceil_div(c.k, g));
    }
    for (auto& [v, a] : c.c) a /= g;
  }
  return true;
}

Cons substitute(const Cons& c, int x, const std::map<int, int64_t>& ec, int64_t ek) {
  auto it = c.c.find(x);
  if (it == c.c.end()) return c;
  i128 a = it->second;
  Cons r = c;
  r.c.erase(x);
  for (auto& [v, b] : ec) r.c[v] = narrow(static_cast<i128>(r.c[v]) + a * b);
  r.k = narrow(static_cast<i128>(r.k) + a * ek);
  return r;
}

struct Problem {
  std::vector<Cons> cs;
  std::set<int> vars;
  std::vector<std::tuple<int, std::map<int, int64_t>, int64_t>> elim;  // x = sum + k
};

enum class Pre { Ok, Unsat };

Pre preprocess(const SymEnv& s, Problem& p) {
  for (auto& [v, b] : s.vars) {
    p.vars.insert(v);
    if (b) {
      p.cs.push_back({{{v, -1}}, 0, Rel::Le});
      p.cs.push_back({{{v, 1}}, -1, Rel::Le});
    }
  }
  for (auto& a : s.atoms) {
    Cons c;
    c.c = a.t.c;
    c.k = a.t.k;
    c.r = a.r;
    if (a.r == Rel::Lt) {
      c.r = Rel::Le;
      c.k = narrow(static_cast<i128>(c.k) + 1);
    }
    for (auto& [v, x] : c.c) p.vars.insert(v);
    p.cs.push_back(c);
  }
  std::vector<Cons> norm;
  for (auto& c : p.cs) {
    bool drop;
    if (!normalize(c, drop)) return Pre::Unsat;
    if (!drop) norm.push_back(c);
  }
  p.cs = std::move(norm);
  // eliminate unit-coefficient equalities
  for (;;) {
    int pick = -1, var = -1;
    for (size_t i = 0; i < p.cs.size() && pick < 0; ++i) {
      if (p.cs[i].r != Rel::Eq) continue;
      for (auto& [v, a] : p.cs[i].c)
        if (a == 1 || a == -1) {
          pick = static_cast<int>(i);
          var = v;
          break;
        }
    }
    if (pick < 0) break;
    Cons eq = p.cs[pick];
    int64_t a = eq.c[var];
    // a*x + rest + k = 0  =>  x = -a*(rest + k)
    std::map<int, int64_t> ec;
    for (auto& [v, b] : eq.c)
      if (v != var) ec[v] = narrow(-static_cast<i128>(a) * b);
    int64_t ek = narrow(-static_cast<i128>(a) * eq.k);
    p.elim.emplace_back(var, ec, ek);
    std::vector<Cons> next;
    for (size_t i = 0; i < p.cs.size(); ++i) {
      if (static_cast<int>(i) == pick) continue;
      Cons c = substitute(p.cs[i], var, ec, ek);
      bool drop;
      if (!normalize(c, drop)) return Pre::Unsat;
      if (!drop) next.push_back(c);
    }
    p.cs = std::move(next);
  }
  return Pre::Ok;
}

// Fourier-Motzkin over the rationals (with integer tightening); true = infeasible
bool fm_infeasible(const std::vector<Cons>& in, size_t limit) {
  std::vector<Cons> cs;
  for (auto& c : in) {
    if (c.r == Rel::Ne) continue;
    cs.push_back({c.c, c.k, Rel::Le});
    if (c.r == Rel::Eq) {
      Cons n{{}, -c.k, Rel::Le};
      for (auto& [v, a] : c.c) n.c[v] = -a;
      cs.push_back(n);
    }
  }
  for (;;) {
    std::map<int, std::pair<int, int>> occ;
    for (auto& c : cs) {
      if (c.c.empty() && c.k > 0) return true;
      for (auto& [v, a] : c.c) (a > 0 ? occ[v].first : occ[v].second)++;
    }
    if (occ.empty()) return false;
    int best = -1;
    long cost = -1;
    for (auto& [v, pn] : occ) {
      long cst = static_cast<long>(pn.first) * pn.second - pn.first - pn.second;
      if (best < 0 || cst < cost) {
        best = v;
        cost = cst;
      }
    }
    std::vector<Cons> pos, neg, rest;
    for (auto& c : cs) {
      auto it = c.c.find(best);
      if (it == c.c.end())
        rest.push_back(c);
      else
        (it->second > 0 ? pos : neg).push_back(c);
    }
    for (auto& pc : pos)
      for (auto& nc : neg) {
        i128 ap = pc.c.at(best), an = -static_cast<i128>(nc.c.at(best));
        Cons r;
        r.r = Rel::Le;
        std::set<int> keys;
        for (auto& [v, a] : pc.c) keys.insert(v);
        for (auto& [v, a] : nc.c) keys.insert(v);
        for (int v : keys) {
          if (v == best) continue;
          i128 x = an * (pc.c.count(v) ? pc.c.at(v) : 0) + ap * (nc.c.count(v) ? nc.c.at(v) : 0);
          if (x) r.c[v] = narrow(x);
        }
        r.k = narrow(an * pc.k + ap * nc.k);
        bool drop;
        if (!normalize(r, drop)) return true;
        if (!drop) rest.push_back(r);
        if (rest.size() > limit) return false;
      }
    cs = std::move(rest);
  }
}

struct Dom {
  std::vector<i128> lo, hi;
};

class Search {
 public:
  Search(const std::vector<Cons>& cs, const std::vector<int>& vars, const InternalOptions& o)
      : cs_(cs), vars_(vars), o_(o) {
    for (size_t i = 0; i < vars.size(); ++i) pos_[vars[i]] = static_cast<int>(i);
  }

  // 1 sat, 0 exhausted, -1 limit
  int run(std::map<int, int64_t>& model) {
    Dom d;
    d.lo.assign(vars_.size(), -kInf);
    d.hi.assign(vars_.size(), kInf);
    int r = node(d, model);
    return r;
  }
  bool clamped = false;

 private:
  const std::vector<Cons>& cs_;
  const std::vector<int>& vars_;
  const InternalOptions& o_;
  std::map<int, int> pos_;
  int64_t nodes_ = 0;

  bool propagate(Dom& d) const {
    for (int round = 0; round < o_.propagate_rounds; ++round) {
      bool changed = false;
      for (auto& c : cs_) {
        int mult = c.r == Rel::Eq ? 2 : 1;
        if (c.r == Rel::Ne) {
          int unfixed = -1, nun = 0;
          i128 val = c.k;
          for (auto& [v, a] : c.c) {
            int p = pos_.at(v);
            if (d.lo[p] == d.hi[p]) {
              val += static_cast<i128>(a) * d.lo[p];
            } else {
              ++nun;
              unfixed = v;
            }
          }
          if (nun == 0 && val == 0) return false;
          if (nun == 1) {
            i128 a = c.c.at(unfixed);
            if ((-val) % a == 0) {
              i128 bad = -val / a;
              int p = pos_.at(unfixed);
              if (d.lo[p] == bad) {
                d.lo[p]++;
                changed = true;
              }
              if (d.hi[p] == bad) {
                d.hi[p]--;
                changed = true;
              }
              if (d.lo[p] > d.hi[p]) return false;
            }
          }
          continue;
        }
        for (int dir = 0; dir < mult; ++dir) {
          int sgn = dir == 0 ? 1 : -1;
          // sgn*(sum a x + k) <= 0
          i128 minsum = sgn * static_cast<i128>(c.k);
          int ninf = 0, infv = -1;
          for (auto& [v, a0] : c.c) {
            i128 a = sgn * static_cast<i128>(a0);
            int p = pos_.at(v);
            i128 b = a > 0 ? d.lo[p] : d.hi[p];
            if (b == -kInf || b == kInf) {
              ++ninf;
              infv = v;
            } else {
              minsum += a * b;
            }
          }
          if (ninf == 0 && minsum > 0) return false;
          if (ninf >= 2) continue;
          for (auto& [v, a0] : c.c) {
            if (ninf == 1 && v != infv) continue;
            i128 a = sgn * static_cast<i128>(a0);
            int p = pos_.at(v);
            i128 rest = minsum;
            if (ninf == 0) rest -= a * (a > 0 ? d.lo[p] : d.hi[p]);
            // a*x <= -rest
            if (a > 0) {
              i128 nh = floor_div(-rest, a);
              if (nh < d.hi[p]) {
                d.hi[p] = nh;
                changed = true;
              }
            } else {
              i128 nl = ceil_div(-rest, a);
              if (nl > d.lo[p]) {
                d.lo[p] = nl;
                changed = true;
              }
            }
            if (d.lo[p] > d.hi[p]) return false;
            if (d.hi[p] > kInf / 2 || d.lo[p] < -kInf / 2) {
              d.hi[p] = std::min(d.hi[p], kInf);
              d.lo[p] = std::max(d.lo[p], -kInf);
            }
          }
        }
      }
      if (!changed) break;
    }
    return true;
  }

  bool check_all(const Dom& d) const {
    std::map<int, int64_t> m;
    for (size_t i = 0; i < vars_.size(); ++i) m[vars_[i]] = static_cast<int64_t>(d.lo[i]);
    for (auto& c : cs_) {
      i128 v = c.k;
      for (auto& [x, a] : c.c) v += static_cast<i128>(a) * m[x];
      bool ok = c.r == Rel::Eq ? v == 0 : c.r == Rel::Ne ? v != 0 : v <= 0;
      if (!ok) return false;
    }
    return true;
  }

  int node(Dom d, std::map<int, int64_t>& model) {
    if (++nodes_ > o_.node_limit) return -1;
    if (!propagate(d)) return 0;
    int pick = -1;
    i128 best = 0;
    for (size_t i = 0; i < vars_.size(); ++i) {
      if (d.lo[i] == d.hi[i]) continue;
      i128 lo = d.lo[i], hi = d.hi[i];
      if (lo < -o_.bound) {
        lo = -o_.bound;
      }
      if (hi > o_.bound) {
        hi = o_.bound;
      }
      i128 w = hi - lo;
      if (pick < 0 || w < best) {
        pick = static_cast<int>(i);
        best = w;
      }
    }
    if (pick < 0) {
      if (!check_all(d)) return 0;
      for (size_t i = 0; i < vars_.size(); ++i) model[vars_[i]] = static_cast<int64_t>(d.lo[i]);
      return 1;
    }
    i128 lo = d.lo[pick], hi = d.hi[pick];
    if (lo < -o_.bound) {
      lo = -o_.bound;
      clamped = true;
    }
    if (hi > o_.bound) {
      hi = o_.bound;
      clamped = true;
    }
    if (lo > hi) return 0;
    bool limit = false;
    if (hi - lo < 8) {
      std::vector<i128> vals;
      for (i128 v = lo; v <= hi; ++v) vals.push_back(v);
      std::stable_sort(vals.begin(), vals.end(), [](i128 a, i128 b) { return (a < 0 ? -a : a) < (b < 0 ? -b : b); });
      for (i128 v : vals) {
        Dom n = d;
        n.lo[pick] = n.hi[pick] = v;
        int r = node(n, model);
        if (r == 1) return 1;
        if (r < 0) limit = true;
        if (limit && nodes_ > o_.node_limit) return -1;
      }
      return limit ? -1 : 0;
    }
    i128 mid = (lo <= 0 && 0 < hi) ? 0 : lo + (hi - lo) / 2;
    Dom a = d, b = d;
    a.lo[pick] = lo;
    a.hi[pick] = mid;
    b.lo[pick] = mid + 1;
    b.hi[pick] = hi;
    // explore the half closer to zero first
    bool a_first = hi > 0;
    Dom& f = a_first ? a : b;
    Dom& s = a_first ? b : a;
    int r = node(f, model);
    if (r == 1) return 1;
    if (r < 0) limit = true;
    if (nodes_ > o_.node_limit) return -1;
    r = node(s, model);
    if (r == 1) return 1;
    if (r < 0) limit = true;
    return limit ? -1 : 0;
  }
};

}  // namespace

SatResult InternalSolver::check(const SymEnv& s) {
  SatResult res;
  try {
    Problem p;
    if (preprocess(s, p) == Pre::Unsat) {
      res.kind = SatKind::Unsat;
      return res;
    }
    if (fm_infeasible(p.cs, o_.fm_limit)) {
      res.kind = SatKind::Unsat;
      return res;
    }
    std::set<int> used;
    for (auto& c : p.cs)
      for (auto& [v, a] : c.c) used.insert(v);
    std::vector<int> vars(used.begin(), used.end());
    Search search(p.cs, vars, o_);
    std::map<int, int64_t> model;
    int r = search.run(model);
    if (r == 0) {
      res.kind = search.clamped ? SatKind::Unknown : SatKind::Unsat;
      if (search.clamped) res.diag = "search domain bound reached";
      return res;
    }
    if (r < 0) {
      res.kind = SatKind::Unknown;
      res.diag = "node limit reached";
      return res;
    }
    for (int v : p.vars)
      if (!model.count(v)) model[v] = 0;
    for (auto it = p.elim.rbegin(); it != p.elim.rend(); ++it) {
      auto& [x, ec, ek] = *it;
      i128 val = ek;
      for (auto& [v, b] : ec) val += static_cast<i128>(b) * model[v];
      model[x] = narrow(val);
    }
    for (auto& [v, b] : s.vars)
      if (b && (model[v] < 0 || model[v] > 1)) throw Overflow{};
    for (auto& a : s.atoms)
      if (!eval_atom(a, model)) {
        res.kind = SatKind::Unknown;
        res.diag = "internal model check failed";
        return res;
      }
    res.kind = SatKind::Sat;
    res.model = std::move(model);
    return res;
  } catch (const Overflow&) {
    res.kind = SatKind::Unknown;
    res.diag = "coefficient overflow";
    return res;
  }
}

SatResult CachedSolver::check(const SymEnv& s) {
  std::string key = sym_env_str(s);
  {
    std::lock_guard<std::mutex> g(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  SatResult r = inner_->check(s);
  std::lock_guard<std::mutex> g(mu_);
  if (cache_.size() > 100000) cache_.clear();
  cache_[key] = r;
  return r;
}

std::shared_ptr<Solver> make_solver(const std::string& name) {
  if (name.empty() || name == "internal") return std::make_shared<CachedSolver>(std::make_shared<InternalSolver>());
  if (name.rfind("smtlib:", 0) == 0) {
    std::string cmd = name.substr(7);
    // bare solver paths read SMT-LIB from a file by default; switch them to stdin
    if (cmd.find(' ') == std::string::npos) {
      std::string base = cmd.substr(cmd.find_last_of('/') + 1);
      if (base == "z3") cmd += " -in";
      else if (base == "cvc5" || base == "cvc4") cmd += " --lang smt2 --incremental";
      else if (base == "yices-smt2") cmd += " --incremental";
    }
    return std::make_shared<CachedSolver>(std::make_shared<SmtLibSolver>(cmd));
  }
  throw std::invalid_argument("unknown solver '" + name + "'");
}

// ---------------- simplify ----------------

SymEnv simplify(const SymEnv& s, const std::set<int>& live, Solver& solver) {
  // union-find over constants linked by atoms
  std::map<int, int> parent;
  std::function<int(int)> find = [&](int x) {
    auto it = parent.find(x);
    if (it == parent.end()) {
      parent[x] = x;
      return x;
    }
    if (it->second == x) return x;
    int r = find(it->second);
    parent[x] = r;
    return r;
  };
  for (auto& a : s.atoms) {
    int first = -1;
    for (auto& [v, c] : a.t.c) {
      if (first < 0)
        first = find(v);
      else
        parent[find(v)] = first;
    }
  }
  std::set<int> live_roots;
  for (int v : live) live_roots.insert(find(v));

  SymEnv out;
  out.next = s.next;
  std::map<int, SymEnv> dead;
  std::vector<Atom> ground;
  for (auto& a : s.atoms) {
    if (a.t.c.empty()) {
      ground.push_back(a);
      continue;
    }
    int r = find(a.t.c.begin()->first);
    if (live_roots.count(r)) {
      out.atoms.push_back(a);
    } else {
      SymEnv& d = dead[r];
      d.atoms.push_back(a);
      for (auto& [v, c] : a.t.c) d.vars[v] = s.vars.count(v) ? s.vars.at(v) : false;
    }
  }
  for (auto& g : ground)
    if (!eval_atom(g, {})) out.atoms.push_back({Lin::constant(1), Rel::Le});
  for (auto& [r, d] : dead) {
    SatResult sr = solver.check(d);
    if (sr.kind == SatKind::Sat) continue;
    if (sr.kind == SatKind::Unsat) {
      out.atoms.push_back({Lin::constant(1), Rel::Le});
      continue;
    }
    for (auto& a : d.atoms) out.atoms.push_back(a);
    for (auto& [v, b] : d.vars) out.vars[v] = b;
  }
  // exact elimination of dead constants in live components
  auto is_bool = [&](int v) { return s.vars.count(v) && s.vars.at(v); };
  for (bool progress = true; progress;) {
    progress = false;
    std::map<int, std::vector<size_t>> occ;
    for (size_t i = 0; i < out.atoms.size(); ++i)
      for (auto& [v, c] : out.atoms[i].t.c) occ[v].push_back(i);
    for (auto& [v, where] : occ) {
      if (live.count(v) || is_bool(v)) continue;
      if (where.size() == 1) {
        const Atom& a = out.atoms[where[0]];
        int64_t c = a.t.c.at(v);
        if (a.r != Rel::Eq || c == 1 || c == -1) {
          out.atoms.erase(out.atoms.begin() + static_cast<long>(where[0]));
          progress = true;
          break;
        }
        continue;
      }
      // substitute through a unit-coefficient equality
      for (size_t i : where) {
        const Atom& a = out.atoms[i];
        if (a.r != Rel::Eq) continue;
        int64_t c = a.t.c.at(v);
        if (c != 1 && c != -1) continue;
        Lin def = a.t;  // c*v + rest = 0  =>  v = -c*rest
        def.c.erase(v);
        def = def.scale(-c);
        std::vector<Atom> next;
        for (size_t j = 0; j < out.atoms.size(); ++j) {
          if (j == i) continue;
          Atom b = out.atoms[j];
          auto it = b.t.c.find(v);
          if (it != b.t.c.end()) {
            int64_t bc = it->second;
            b.t.c.erase(it);
            b.t = b.t + def.scale(bc);
          }
          next.push_back(b);
        }
        out.atoms = std::move(next);
        progress = true;
        break;
      }
      if (progress) break;
    }
  }
  // dedupe
  std::vector<Atom> uniq;
  for (auto& a : out.atoms)
    if (std::find(uniq.begin(), uniq.end(), a) == uniq.end()) uniq.push_back(a);
  out.atoms = std::move(uniq);
  for (auto& a : out.atoms)
    for (auto& [v, c] : a.t.c) out.vars[v] = is_bool(v);
  for (int v : live)
    if (s.vars.count(v)) out.vars[v] = s.vars.at(v);
  return out;
}

}  // namespace pdnf
