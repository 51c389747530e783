#include "pdnf/semantics.hpp"

#include <functional>
#include <unordered_set>

#include "pdnf/nominal.hpp"

namespace pdnf {

namespace {

E replace_kid(const E& e, size_t i, E k) {
  auto n = std::make_shared<Expr>(*e);
  n->kids[i] = std::move(k);
  return n;
}

// number of leading kids evaluated left to right
size_t eval_arity(const E& e) {
  switch (e->kind) {
    case Kind::Tuple:
    case Kind::Op:
    case Kind::App: return e->kids.size();
    case Kind::If:
    case Kind::Assign:
    case Kind::Let:
    case Kind::New: return 1;
    default: return 0;
  }
}

}  // namespace

bool is_call_head(const E& r) { return r->kind == Kind::App && r->kids[0]->kind == Kind::Abs && is_value(r->kids[1]); }

std::optional<Decomp> decompose(const E& e) {
  if (is_value(e)) return std::nullopt;
  size_t n = eval_arity(e);
  for (size_t i = 0; i < n; ++i) {
    if (!is_value(e->kids[i])) {
      auto inner = decompose(e->kids[i]);
      if (!inner) return std::nullopt;
      return Decomp{replace_kid(e, i, inner->ctx), inner->redex};
    }
  }
  TypeP ht;
  if (is_call_head(e)) ht = e->kids[0]->type->args[1];
  return Decomp{mk_hole(ht), e};
}

namespace {

struct Num {
  bool sym = false;
  int64_t c = 0;
  int id = -1;
  Lin lin() const { return sym ? Lin::var(id) : Lin::constant(c); }
};

std::optional<Num> as_num(const E& v) {
  if (v->kind == Kind::Const) {
    if (v->ck == ConstKind::Unit) return Num{false, 0, -1};
    return Num{false, v->ival, -1};
  }
  if (v->kind == Kind::Sym) return Num{true, 0, v->id};
  return std::nullopt;
}

int64_t ediv(int64_t a, int64_t b) {
  int64_t q = a / b, r = a % b;
  if (r < 0) q += b > 0 ? -1 : 1;
  return q;
}
int64_t emod(int64_t a, int64_t b) {
  int64_t r = a % b;
  if (r < 0) r += b > 0 ? b : -b;
  return r;
}

bool is_comparison(Prim p) {
  return p == Prim::Eq || p == Prim::Ne || p == Prim::Lt || p == Prim::Le || p == Prim::Gt || p == Prim::Ge;
}

// comparison a op b as an atom
Atom cmp_atom(Prim p, const Lin& a, const Lin& b) {
  switch (p) {
    case Prim::Eq: return {a - b, Rel::Eq};
    case Prim::Ne: return {a - b, Rel::Ne};
    case Prim::Lt: return {a - b, Rel::Lt};
    case Prim::Le: return {a - b, Rel::Le};
    case Prim::Gt: return {b - a, Rel::Lt};
    default: return {b - a, Rel::Le};
  }
}

struct Ctx {
  SymStep& out;
  const SymEnv& sigma;
  const RedState& st;
  const E& ctx;
  void emit(SymEnv s, Store store, E redex_result) {
    out.next.emplace_back(std::move(s), RedState{std::move(store), plug(ctx, redex_result)});
  }
  void emit(E r) { emit(sigma, st.store, std::move(r)); }
};

void step_op(Ctx& c, const E& r) {
  Prim p = r->op;
  std::vector<Num> a;
  for (auto& k : r->kids) {
    auto n = as_num(k);
    if (!n) {
      c.out.kind = StepKind::Stuck;
      return;
    }
    a.push_back(*n);
  }
  bool any_sym = false;
  for (auto& n : a) any_sym |= n.sym;
  bool bool_operands = r->kids[0]->kind == Kind::Const ? r->kids[0]->ck == ConstKind::Bool
                                                       : r->kids[0]->type && r->kids[0]->type->kind == Type::Bool;
  c.out.kind = StepKind::Stepped;
  if (!any_sym) {
    int64_t x = a[0].c, y = a.size() > 1 ? a[1].c : 0, v = 0;
    switch (p) {
      case Prim::Add:
        if (__builtin_add_overflow(x, y, &v)) return void(c.out.kind = StepKind::Stuck);
        return c.emit(mk_int(v));
      case Prim::Sub:
        if (__builtin_sub_overflow(x, y, &v)) return void(c.out.kind = StepKind::Stuck);
        return c.emit(mk_int(v));
      case Prim::Mul:
        if (__builtin_mul_overflow(x, y, &v)) return void(c.out.kind = StepKind::Stuck);
        return c.emit(mk_int(v));
      case Prim::Div:
      case Prim::Mod:
        if (y == 0 || (x == INT64_MIN && y == -1)) return void(c.out.kind = StepKind::Stuck);
        return c.emit(mk_int(p == Prim::Div ? ediv(x, y) : emod(x, y)));
      case Prim::Neg:
        if (x == INT64_MIN) return void(c.out.kind = StepKind::Stuck);
        return c.emit(mk_int(-x));
      case Prim::Not: return c.emit(mk_bool(!x));
      case Prim::Eq: return c.emit(mk_bool(x == y));
      case Prim::Ne: return c.emit(mk_bool(x != y));
      case Prim::Lt: return c.emit(mk_bool(x < y));
      case Prim::Le: return c.emit(mk_bool(x <= y));
      case Prim::Gt: return c.emit(mk_bool(x > y));
      case Prim::Ge: return c.emit(mk_bool(x >= y));
    }
    return;
  }
  if (is_comparison(p)) {
    Atom at = cmp_atom(p, a[0].lin(), a[1].lin());
    c.out.branched = true;
    c.emit(assert_constraint(c.sigma, at), c.st.store, mk_bool(true));
    c.emit(assert_constraint(c.sigma, negate(at)), c.st.store, mk_bool(false));
    (void)bool_operands;
    return;
  }
  SymEnv s = c.sigma;
  auto define = [&](const Lin& rhs, bool is_bool) {
    int k = s.fresh(is_bool);
    s = assert_constraint(s, {Lin::var(k) - rhs, Rel::Eq});
    c.emit(s, c.st.store, mk_sym(k, is_bool ? t_bool() : t_int()));
  };
  switch (p) {
    case Prim::Add: return define(a[0].lin() + a[1].lin(), false);
    case Prim::Sub: return define(a[0].lin() - a[1].lin(), false);
    case Prim::Neg: return define(a[0].lin().scale(-1), false);
    case Prim::Not: return define(Lin::constant(1) - a[0].lin(), true);
    case Prim::Mul:
      if (a[0].sym && a[1].sym) return void(c.out.kind = StepKind::Nonlinear);
      return a[0].sym ? define(a[0].lin().scale(a[1].c), false) : define(a[1].lin().scale(a[0].c), false);
    case Prim::Div:
    case Prim::Mod: {
      if (a[1].sym) return void(c.out.kind = StepKind::Nonlinear);
      int64_t d = a[1].c;
      if (d == 0) return void(c.out.kind = StepKind::Stuck);
      int q = s.fresh(false), rr = s.fresh(false);
      // dividend = d*q + r, 0 <= r <= |d|-1
      s = assert_constraint(s, {a[0].lin() - Lin::var(q, d) - Lin::var(rr), Rel::Eq});
      s = assert_constraint(s, {Lin::var(rr, -1), Rel::Le});
      s = assert_constraint(s, {Lin::var(rr) - Lin::constant(d < 0 ? -d : d), Rel::Lt});
      c.emit(s, c.st.store, mk_sym(p == Prim::Div ? q : rr, t_int()));
      return;
    }
    default: c.out.kind = StepKind::Stuck; return;
  }
}

E bind_pattern(const E& body, const std::vector<std::string>& xs, const E& v, bool& ok) {
  ok = true;
  if (xs.size() == 1) return xs[0] == "_" ? body : subst(body, xs[0], v);
  if (v->kind != Kind::Tuple || v->kids.size() != xs.size()) {
    ok = false;
    return body;
  }
  E r = body;
  for (size_t i = 0; i < xs.size(); ++i)
    if (xs[i] != "_") r = subst(r, xs[i], v->kids[i]);
  return r;
}

}  // namespace

SymStep sym_step(const SymEnv& sigma, const RedState& st) {
  SymStep out;
  auto d = decompose(st.expr);
  if (!d) {
    out.kind = is_value(st.expr) ? StepKind::Value : StepKind::Stuck;
    return out;
  }
  const E& r = d->redex;
  Ctx c{out, sigma, st, d->ctx};
  out.kind = StepKind::Stepped;
  switch (r->kind) {
    case Kind::App: {
      const E& f = r->kids[0];
      if (f->kind == Kind::Abs) {
        out.kind = StepKind::CallHead;
        return out;
      }
      if (f->kind != Kind::Lam) break;
      E body = subst(f->kids[0], f->name, r->kids[1]);
      if (!f->self.empty()) body = subst(body, f->self, f);
      out.beta = true;
      c.emit(body);
      return out;
    }
    case Kind::Op: step_op(c, r); return out;
    case Kind::If: {
      const E& g = r->kids[0];
      if (g->kind == Kind::Const && g->ck == ConstKind::Bool) {
        c.emit(g->ival ? r->kids[1] : r->kids[2]);
        return out;
      }
      if (g->kind == Kind::Sym) {
        out.branched = true;
        c.emit(assert_constraint(sigma, {Lin::var(g->id) - Lin::constant(1), Rel::Eq}), st.store, r->kids[1]);
        c.emit(assert_constraint(sigma, {Lin::var(g->id), Rel::Eq}), st.store, r->kids[2]);
        return out;
      }
      break;
    }
    case Kind::Let: {
      bool ok;
      E body = bind_pattern(r->kids[1], r->vars, r->kids[0], ok);
      if (!ok) break;
      c.emit(body);
      return out;
    }
    case Kind::New: {
      std::set<int> dom;
      for (auto& [l, v] : st.store) dom.insert(l);
      int l = fresh_loc(dom);
      Store s = st.store;
      s[l] = r->kids[0];
      c.emit(sigma, std::move(s), subst_loc(r->kids[1], r->name, l));
      return out;
    }
    case Kind::Deref: {
      if (!r->loc.is_atom()) break;
      auto it = st.store.find(r->loc.atom);
      if (it == st.store.end()) break;
      c.emit(it->second);
      return out;
    }
    case Kind::Assign: {
      if (!r->loc.is_atom() || !st.store.count(r->loc.atom)) break;
      Store s = st.store;
      s[r->loc.atom] = r->kids[0];
      c.emit(sigma, std::move(s), mk_unit());
      return out;
    }
    default: break;
  }
  out.kind = StepKind::Stuck;
  out.next.clear();
  return out;
}

std::optional<RedState> step(const RedState& st) {
  SymStep s = sym_step(SymEnv{}, st);
  if (s.kind != StepKind::Stepped || s.branched || s.next.size() != 1) return std::nullopt;
  return s.next[0].second;
}

const char* out_kind_str(OutKind k) {
  switch (k) {
    case OutKind::Value: return "Value";
    case OutKind::CallHead: return "CallHead";
    case OutKind::Stuck: return "Stuck";
    case OutKind::Diverges: return "Diverges";
    case OutKind::IntBound: return "IntBound";
    case OutKind::SolverUnknown: return "SolverUnknown";
  }
  return "?";
}

std::string red_state_key(const RedState& st) {
  Canon c;
  c.raw_sym = true;
  c.expr(st.expr, 0);
  c.add_slot(&st.store, 0);
  c.flush();
  return c.out;
}

std::vector<RedOutcome> reduce_bounded(const SymEnv& sigma, const RedState& st, long k_int, Solver& solver) {
  std::vector<RedOutcome> outs;
  std::vector<std::string> path;  // keys taken at beta steps along the current path
  std::function<void(const SymEnv&, const RedState&, long)> go = [&](const SymEnv& s, const RedState& cur,
                                                                      long steps) {
    RedState x = cur;
    SymEnv sg = s;
    size_t mark = path.size();
    std::unordered_set<std::string> local;
    for (;;) {
      SymStep r = sym_step(sg, x);
      switch (r.kind) {
        case StepKind::Value: outs.push_back({OutKind::Value, sg, x, steps}); path.resize(mark); return;
        case StepKind::CallHead: outs.push_back({OutKind::CallHead, sg, x, steps}); path.resize(mark); return;
        case StepKind::Stuck: outs.push_back({OutKind::Stuck, sg, x, steps}); path.resize(mark); return;
        case StepKind::Nonlinear:
          outs.push_back({OutKind::SolverUnknown, sg, x, steps});
          path.resize(mark);
          return;
        case StepKind::Stepped: break;
      }
      if (steps >= k_int) {
        outs.push_back({OutKind::IntBound, sg, x, steps});
        path.resize(mark);
        return;
      }
      if (r.beta) {
        std::string key = red_state_key(x);
        bool seen = local.count(key) > 0;
        for (size_t i = 0; i < mark && !seen; ++i) seen = path[i] == key;
        if (seen) {
          outs.push_back({OutKind::Diverges, sg, x, steps});
          path.resize(mark);
          return;
        }
        local.insert(key);
        path.push_back(key);
      }
      ++steps;
      if (!r.branched) {
        sg = std::move(r.next[0].first);
        x = std::move(r.next[0].second);
        continue;
      }
      std::vector<std::pair<SymEnv, RedState>> live;
      for (auto& [ns, nst] : r.next) {
        SatResult sat = solver.check(ns);
        if (sat.kind == SatKind::Unsat) continue;
        if (sat.kind == SatKind::Unknown) {
          outs.push_back({OutKind::SolverUnknown, ns, nst, steps});
          continue;
        }
        live.emplace_back(std::move(ns), std::move(nst));
      }
      if (live.size() == 1) {
        sg = std::move(live[0].first);
        x = std::move(live[0].second);
        continue;
      }
      for (auto& [ns, nst] : live) go(ns, nst, steps);
      path.resize(mark);
      return;
    }
  };
  go(sigma, st, 0);
  return outs;
}

}  // namespace pdnf
