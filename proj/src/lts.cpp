#include "pdnf/lts.hpp"

#include <cctype>
#include <functional>
#include <sstream>

namespace pdnf {

std::string move_str(const Move& m) {
  switch (m.kind) {
    case MoveKind::Tau: return "tau";
    case MoveKind::PropCall: return "call α" + std::to_string(m.abs) + " (" + pretty(m.val) + ")";
    case MoveKind::PropRet: return "ret(" + pretty(m.val) + ")";
    case MoveKind::OpCall: return "opcall " + std::to_string(m.index) + " (" + pretty(m.val) + ")";
    case MoveKind::OpRet: return "opret(" + pretty(m.val) + ")";
  }
  return "?";
}

bool move_eq(const Move& a, const Move& b) {
  if (a.kind != b.kind || a.abs != b.abs || a.index != b.index) return false;
  if (!a.val || !b.val) return !a.val && !b.val;
  return expr_equal(a.val, b.val);
}

bool is_visible(const Move& m) { return m.kind != MoveKind::Tau; }
bool is_prop_move(const Move& m) { return m.kind == MoveKind::PropCall || m.kind == MoveKind::PropRet; }

std::pair<E, Gamma> ulpatt_value(const E& v, int next_index) {
  Gamma g;
  std::function<E(const E&)> go = [&](const E& x) -> E {
    if (x->kind == Kind::Lam || x->kind == Kind::Abs) {
      int i = ++next_index;
      g[i] = x;
      return mk_hole(x->type, i);
    }
    if (x->kind == Kind::Tuple) {
      std::vector<E> ks;
      for (auto& k : x->kids) ks.push_back(go(k));
      return mk_tuple(std::move(ks));
    }
    return x;
  };
  E d = go(v);
  return {d, g};
}

namespace {
int take_abs(int& next_abs, const std::set<int>& avoid) {
  while (avoid.count(next_abs)) ++next_abs;
  return next_abs++;
}
}  // namespace

TypePattern ulpatt_type(const TypeP& t, int& next_abs, const std::set<int>& avoid, SymEnv& sigma) {
  TypePattern out;
  std::function<E(const TypeP&)> go = [&](const TypeP& ty) -> E {
    switch (ty->kind) {
      case Type::Unit: return mk_unit();
      case Type::Int:
      case Type::Bool: {
        int k = sigma.fresh(ty->kind == Type::Bool);
        out.syms.push_back(k);
        return mk_sym(k, ty);
      }
      case Type::Arrow: {
        int a = take_abs(next_abs, avoid);
        out.names[a] = ty;
        return mk_abs(a, ty);
      }
      case Type::Product: {
        std::vector<E> ks;
        for (auto& a : ty->args) ks.push_back(go(a));
        return mk_tuple(std::move(ks));
      }
    }
    return mk_unit();
  };
  out.val = go(t);
  return out;
}

std::vector<E> ulpatt_type_concrete(const TypeP& t, int& next_abs, const std::set<int>& avoid,
                                    const std::vector<int64_t>& ints) {
  switch (t->kind) {
    case Type::Unit: return {mk_unit()};
    case Type::Bool: return {mk_bool(true), mk_bool(false)};
    case Type::Int: {
      std::vector<E> r;
      for (auto n : ints) r.push_back(mk_int(n));
      return r;
    }
    case Type::Arrow: return {mk_abs(take_abs(next_abs, avoid), t)};
    case Type::Product: {
      std::vector<std::vector<E>> acc{{}};
      for (auto& a : t->args) {
        auto opts = ulpatt_type_concrete(a, next_abs, avoid, ints);
        std::vector<std::vector<E>> next;
        for (auto& pre : acc)
          for (auto& o : opts) {
            auto v = pre;
            v.push_back(o);
            next.push_back(std::move(v));
          }
        acc = std::move(next);
      }
      std::vector<E> r;
      for (auto& ks : acc) r.push_back(mk_tuple(ks));
      return r;
    }
  }
  return {};
}

Config plug_chi(const Config& c, const Cont& k) {
  if (c.pol != Pol::Opp || c.cont.k != Cont::Chi) throw std::logic_error("plug_chi: no χ continuation");
  Config r = c;
  r.cont = k;
  return r;
}

TypeP hole_type_of(const E& e) {
  if (e->kind == Kind::Hole && e->id < 0) return e->type;
  for (auto& k : e->kids)
    if (auto t = hole_type_of(k)) return t;
  return nullptr;
}

namespace {

void add_names(Config& c, const Names& n) {
  for (auto& [a, t] : n) c.A[a] = t;
}

// fresh-name avoidance for opponent moves: the configuration's own names plus caller's
std::set<int> abs_avoid(const Config& c, const TransOpts& o) {
  std::set<int> av = o.avoid;
  for (auto& [a, t] : c.A) av.insert(a);
  std::set<int> occ;
  for (auto& [i, v] : c.gamma) collect_abs(v, occ);
  for (auto& [l, v] : c.store) collect_abs(v, occ);
  if (c.pol == Pol::Prop) collect_abs(c.exp, occ);
  if (c.pol == Pol::Opp && c.cont.k == Cont::Ctx) collect_abs(c.cont.ctx, occ);
  av.insert(occ.begin(), occ.end());
  return av;
}

void prop_moves(const Config& c, const SymEnv& sigma, const TransOpts& o, bool* unknown, std::vector<Succ>& out) {
  if (is_value(c.exp)) {
    auto [d, g] = ulpatt_value(c.exp, c.next_index);
    Config n = c;
    n.pol = Pol::Opp;
    n.exp = nullptr;
    n.cont = Cont::chi();
    for (auto& [i, v] : g) n.gamma[i] = v;
    n.next_index = c.next_index + static_cast<int>(g.size());
    out.push_back({Move{MoveKind::PropRet, -1, -1, d}, sigma, n});
    return;
  }
  auto dec = decompose(c.exp);
  if (dec && is_call_head(dec->redex)) {
    const E& r = dec->redex;
    auto [d, g] = ulpatt_value(r->kids[1], c.next_index);
    Config n = c;
    n.pol = Pol::Opp;
    n.exp = nullptr;
    n.cont = Cont::of(dec->ctx);
    for (auto& [i, v] : g) n.gamma[i] = v;
    n.next_index = c.next_index + static_cast<int>(g.size());
    out.push_back({Move{MoveKind::PropCall, r->kids[0]->id, -1, d}, sigma, n});
    return;
  }
  SymStep s = sym_step(sigma, RedState{c.store, c.exp});
  if (s.kind == StepKind::Nonlinear && unknown) *unknown = true;
  if (s.kind != StepKind::Stepped) return;
  for (auto& [ns, st] : s.next) {
    if (s.branched && o.solver) {
      SatResult r = o.solver->check(ns);
      if (r.kind == SatKind::Unsat) continue;
      if (r.kind == SatKind::Unknown) {
        if (unknown) *unknown = true;
        continue;
      }
    }
    Config n = c;
    n.store = st.store;
    n.exp = st.expr;
    out.push_back({Move{}, ns, n});
  }
}

void opp_moves(const Config& c, const SymEnv& sigma, const TransOpts& o, std::vector<Succ>& out) {
  if (c.cont.k == Cont::Chi) throw ChiError("transition requested on a χ configuration");
  std::set<int> avoid = abs_avoid(c, o);
  if (c.cont.k == Cont::Ctx) {
    SymEnv s = sigma;
    int na = o.next_abs;
    TypeP ht = hole_type_of(c.cont.ctx);
    if (!ht) throw std::logic_error("continuation hole without type");
    TypePattern p = ulpatt_type(ht, na, avoid, s);
    Config n = c;
    n.pol = Pol::Prop;
    n.exp = plug(c.cont.ctx, p.val);
    n.cont = Cont::top();
    add_names(n, p.names);
    out.push_back({Move{MoveKind::OpRet, -1, -1, p.val}, s, n});
  }
  for (auto& [i, f] : c.gamma) {
    SymEnv s = sigma;
    int na = o.next_abs;
    TypeP ft = value_type(f, {});
    TypePattern p = ulpatt_type(ft->args[0], na, avoid, s);
    Config n = c;
    n.pol = Pol::Prop;
    n.exp = mk_app(f, p.val);
    n.cont = Cont::top();
    add_names(n, p.names);
    out.push_back({Move{MoveKind::OpCall, -1, i, p.val}, s, n});
  }
}

}  // namespace

std::vector<Succ> transitions(const Config& c, const SymEnv& sigma, const TransOpts& o, bool* unknown) {
  std::vector<Succ> out;
  if (c.pol == Pol::Prop)
    prop_moves(c, sigma, o, unknown, out);
  else if (c.pol == Pol::Opp)
    opp_moves(c, sigma, o, out);
  return out;
}

// ---------------- stacked ----------------

bool stacked_terminated(const SConfig& c) {
  return c.conf.pol == Pol::Opp && c.conf.cont.k == Cont::Top && c.stack.empty();
}

std::optional<SConfig> attach_stack(const Config& c, const std::optional<std::vector<E>>& k) {
  if (c.is_bot()) return SConfig{c, {}};
  if (!k) return std::nullopt;
  if (c.pol == Pol::Opp && c.cont.k == Cont::Chi) return std::nullopt;
  // an opponent at top level has nothing pending
  if (c.pol == Pol::Opp && c.cont.k == Cont::Top && !k->empty()) return std::nullopt;
  return SConfig{c, *k};
}

std::vector<E> push_cont(const Cont& c, std::vector<E> k) {
  if (c.k == Cont::Ctx) k.push_back(c.ctx);
  return k;
}

std::vector<SSucc> stacked_transitions(const SConfig& c, const SymEnv& sigma, const TransOpts& o, bool* unknown) {
  std::vector<SSucc> out;
  if (c.conf.is_bot()) return out;
  if (c.conf.pol == Pol::Opp) {
    for (auto& s : transitions(c.conf, sigma, o, unknown)) {
      SConfig n{s.conf, c.stack};
      if (s.move.kind == MoveKind::OpCall) n.stack = push_cont(c.conf.cont, c.stack);
      out.push_back({s.move, s.sigma, n});
    }
    return out;
  }
  for (auto& s : transitions(c.conf, sigma, o, unknown)) {
    SConfig n{s.conf, c.stack};
    if (s.move.kind == MoveKind::PropRet) {
      if (c.stack.empty()) {
        n.conf = plug_chi(s.conf, Cont::top());
      } else {
        n.conf = plug_chi(s.conf, Cont::of(c.stack.back()));
        n.stack.pop_back();
      }
    }
    out.push_back({s.move, s.sigma, n});
  }
  return out;
}

// ---------------- traces ----------------

std::string trace_str(const std::vector<Move>& t) {
  std::string s;
  for (auto& m : t) s += move_str(m) + "\n";
  return s;
}

namespace {

// untyped pattern syntax tree, typed against an expected type afterwards
struct PNode {
  enum K { Int, Bool, Unit, Abs, Hole, Tuple } k = Unit;
  int64_t n = 0;
  std::vector<PNode> kids;
};

struct PParser {
  const std::string& s;
  size_t i = 0;
  void ws() {
    while (i < s.size() && isspace(static_cast<unsigned char>(s[i]))) ++i;
  }
  bool lit(const std::string& t) {
    ws();
    if (s.compare(i, t.size(), t) == 0) {
      i += t.size();
      return true;
    }
    return false;
  }
  int64_t num() {
    ws();
    size_t j = i;
    if (j < s.size() && s[j] == '-') ++j;
    while (j < s.size() && isdigit(static_cast<unsigned char>(s[j]))) ++j;
    if (j == i || (j == i + 1 && s[i] == '-')) throw std::runtime_error("trace: number expected at '" + s.substr(i) + "'");
    int64_t v = std::stoll(s.substr(i, j - i));
    i = j;
    return v;
  }
  PNode value() {
    PNode p;
    if (lit("()")) return p;
    if (lit("(")) {
      std::vector<PNode> ks{value()};
      while (lit(",")) ks.push_back(value());
      if (!lit(")")) throw std::runtime_error("trace: ')' expected");
      if (ks.size() == 1) return ks[0];
      p.k = PNode::Tuple;
      p.kids = std::move(ks);
      return p;
    }
    if (lit("true")) return p.k = PNode::Bool, p.n = 1, p;
    if (lit("false")) return p.k = PNode::Bool, p.n = 0, p;
    if (lit("α")) return p.k = PNode::Abs, p.n = num(), p;
    if (lit("[·]")) return p.k = PNode::Hole, p.n = num(), p;
    if (lit("-(")) {
      p.k = PNode::Int;
      p.n = -num();
      if (!lit(")")) throw std::runtime_error("trace: ')' expected");
      return p;
    }
    p.k = PNode::Int;
    p.n = num();
    return p;
  }
};

E type_node(const PNode& p, const TypeP& t) {
  auto bad = [&]() { return std::runtime_error("trace: value does not match type " + (t ? type_str(t) : "?")); };
  switch (p.k) {
    case PNode::Unit:
      if (t && t->kind != Type::Unit) throw bad();
      return mk_unit();
    case PNode::Int:
      if (t && t->kind != Type::Int) throw bad();
      return mk_int(p.n);
    case PNode::Bool:
      if (t && t->kind != Type::Bool) throw bad();
      return mk_bool(p.n != 0);
    case PNode::Abs:
      if (t && t->kind != Type::Arrow) throw bad();
      return mk_abs(static_cast<int>(p.n), t);
    case PNode::Hole:
      if (t && t->kind != Type::Arrow) throw bad();
      return mk_hole(t, static_cast<int>(p.n));
    case PNode::Tuple: {
      if (t && (t->kind != Type::Product || t->args.size() != p.kids.size())) throw bad();
      std::vector<E> ks;
      for (size_t i = 0; i < p.kids.size(); ++i) ks.push_back(type_node(p.kids[i], t ? t->args[i] : nullptr));
      return mk_tuple(std::move(ks));
    }
  }
  return mk_unit();
}

// parenthesized payload after a keyword
std::string payload(const std::string& line, size_t from) {
  size_t a = line.find('(', from), b = line.rfind(')');
  if (a == std::string::npos || b == std::string::npos || b < a) throw std::runtime_error("trace: malformed line '" + line + "'");
  return line.substr(a + 1, b - a - 1);
}

// raw payload kept until the expected type is known
E untyped(const std::string& text) {
  auto e = std::make_shared<Expr>();
  e->kind = Kind::Var;
  e->name = text;
  return e;
}

}  // namespace

E parse_pattern_value(const std::string& text, const TypeP& expected) {
  PParser p{text};
  PNode n = p.value();
  p.ws();
  if (p.i != text.size()) throw std::runtime_error("trace: trailing input in '" + text + "'");
  return type_node(n, expected);
}

std::vector<Move> parse_trace(const std::string& text) {
  std::vector<Move> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    size_t a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos || line[a] == '#') continue;
    line = line.substr(a);
    while (!line.empty() && isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    Move m;
    if (line == "tau") {
      m.kind = MoveKind::Tau;
    } else if (line.rfind("call α", 0) == 0) {
      m.kind = MoveKind::PropCall;
      size_t p = std::string("call α").size();
      m.abs = std::stoi(line.substr(p));
      m.val = untyped(payload(line, p));
    } else if (line.rfind("ret(", 0) == 0) {
      m.kind = MoveKind::PropRet;
      m.val = untyped(payload(line, 0));
    } else if (line.rfind("opcall ", 0) == 0) {
      m.kind = MoveKind::OpCall;
      m.index = std::stoi(line.substr(7));
      m.val = untyped(payload(line, 7));
    } else if (line.rfind("opret(", 0) == 0) {
      m.kind = MoveKind::OpRet;
      m.val = untyped(payload(line, 0));
    } else {
      throw std::runtime_error("trace: unknown move '" + line + "'");
    }
    out.push_back(m);
  }
  return out;
}

namespace {

// concrete τ* from a proponent configuration
bool run_tau(Config& c, long k_int) {
  for (long n = 0; n < k_int; ++n) {
    if (is_value(c.exp)) return true;
    auto d = decompose(c.exp);
    if (d && is_call_head(d->redex)) return true;
    auto nx = step(RedState{c.store, c.exp});
    if (!nx) return false;
    c.store = std::move(nx->store);
    c.exp = std::move(nx->expr);
  }
  return false;
}

std::string payload_text(const Move& m) {
  if (!m.val) return "";
  if (m.val->kind == Kind::Var) return m.val->name;
  return pretty(m.val);
}

}  // namespace

ReplayResult replay(const std::vector<Move>& trace, const E& e, Engine engine, long k_int) {
  ReplayResult res;
  // the stackless engine keeps its own record of pushed continuations to instantiate χ
  SConfig cur{Config::prop(e), {}};
  SymEnv sigma;
  auto reject = [&](size_t i, std::string why) {
    res.accepted = false;
    res.reject_step = static_cast<int>(i);
    res.reason = std::move(why);
    return res;
  };
  for (size_t i = 0; i < trace.size(); ++i) {
    const Move& m = trace[i];
    Config& c = cur.conf;
    if (m.kind == MoveKind::Tau) {
      if (c.pol != Pol::Prop) return reject(i, "tau from an opponent configuration");
      auto nx = step(RedState{c.store, c.exp});
      if (!nx) return reject(i, "no internal step");
      c.store = nx->store;
      c.exp = nx->expr;
      continue;
    }
    if (is_prop_move(m)) {
      if (c.pol != Pol::Prop) return reject(i, "proponent move at an opponent configuration");
      if (!run_tau(c, k_int)) return reject(i, "no visible move (divergence or stuck)");
      Move got;
      SConfig next;
      if (engine == Engine::Stacked) {
        auto ss = stacked_transitions(cur, sigma);
        if (ss.size() != 1) return reject(i, "no unique proponent move");
        got = ss[0].move;
        next = ss[0].conf;
      } else {
        auto ss = transitions(c, sigma);
        if (ss.size() != 1) return reject(i, "no unique proponent move");
        got = ss[0].move;
        next = SConfig{ss[0].conf, cur.stack};
        if (got.kind == MoveKind::PropRet) {
          if (next.stack.empty()) {
            next.conf = plug_chi(next.conf, Cont::top());
          } else {
            next.conf = plug_chi(next.conf, Cont::of(next.stack.back()));
            next.stack.pop_back();
          }
        }
      }
      if (got.kind != m.kind) return reject(i, "different move: " + move_str(got));
      if (m.kind == MoveKind::PropCall && got.abs != m.abs) return reject(i, "different move: " + move_str(got));
      if (pretty(got.val) != payload_text(m)) return reject(i, "different move: " + move_str(got));
      cur = std::move(next);
      continue;
    }
    if (c.pol != Pol::Opp) return reject(i, "opponent move at a proponent configuration");
    if (c.cont.k == Cont::Chi) return reject(i, "unresolved continuation");
    TypeP t;
    if (m.kind == MoveKind::OpCall) {
      auto it = c.gamma.find(m.index);
      if (it == c.gamma.end()) return reject(i, "unknown index " + std::to_string(m.index));
      t = value_type(it->second, {})->args[0];
    } else {
      if (c.cont.k != Cont::Ctx) return reject(i, "no pending call to return to");
      t = hole_type_of(c.cont.ctx);
    }
    E v;
    try {
      v = parse_pattern_value(payload_text(m), t);
    } catch (const std::exception& ex) {
      return reject(i, ex.what());
    }
    std::set<int> used;
    collect_abs(v, used);
    for (int a : used)
      if (c.A.count(a)) return reject(i, "freshness violation: α" + std::to_string(a) + " already known");
    SConfig next;
    if (engine == Engine::Stacked) {
      // take the rule instance from the stacked LTS, then instantiate its pattern concretely
      auto ss = stacked_transitions(cur, sigma);
      bool found = false;
      for (auto& s : ss)
        if (s.move.kind == m.kind && s.move.index == m.index) {
          next = s.conf;
          found = true;
          break;
        }
      if (!found) return reject(i, "no such opponent move");
      next.conf.A = c.A;
    } else {
      next = SConfig{c, cur.stack};
      next.conf.pol = Pol::Prop;
      next.conf.cont = Cont::top();
      if (m.kind == MoveKind::OpCall) next.stack = push_cont(c.cont, cur.stack);
    }
    next.conf.exp = m.kind == MoveKind::OpCall ? mk_app(c.gamma.at(m.index), v) : plug(c.cont.ctx, v);
    std::function<void(const E&)> names = [&](const E& x) {
      if (x->kind == Kind::Abs) next.conf.A[x->id] = x->type;
      for (auto& k : x->kids) names(k);
    };
    names(v);
    cur = std::move(next);
  }
  res.terminated = stacked_terminated(cur);
  return res;
}

}  // namespace pdnf
