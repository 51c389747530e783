#include "pdnf/syntax.hpp"

#include <cstdlib>
#include <functional>

namespace pdnf {

namespace {
TypeP make_type(Type::Kind k, std::vector<TypeP> args = {}) {
  auto t = std::make_shared<Type>();
  t->kind = k;
  t->args = std::move(args);
  return t;
}
}  // namespace

TypeP t_bool() {
  static TypeP t = make_type(Type::Bool);
  return t;
}
TypeP t_int() {
  static TypeP t = make_type(Type::Int);
  return t;
}
TypeP t_unit() {
  static TypeP t = make_type(Type::Unit);
  return t;
}
TypeP t_arrow(TypeP d, TypeP c) { return make_type(Type::Arrow, {std::move(d), std::move(c)}); }
TypeP t_product(std::vector<TypeP> ts) {
  if (ts.empty()) throw TypeError("empty product type");
  return make_type(Type::Product, std::move(ts));
}

bool type_eq(const TypeP& a, const TypeP& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind || a->args.size() != b->args.size()) return false;
  for (size_t i = 0; i < a->args.size(); ++i)
    if (!type_eq(a->args[i], b->args[i])) return false;
  return true;
}

bool is_base(const TypeP& t) { return t->kind == Type::Bool || t->kind == Type::Int || t->kind == Type::Unit; }

bool has_arrow(const TypeP& t) {
  if (t->kind == Type::Arrow) return true;
  for (auto& a : t->args)
    if (has_arrow(a)) return true;
  return false;
}

std::string type_str(const TypeP& t) {
  if (!t) return "?";
  switch (t->kind) {
    case Type::Bool: return "bool";
    case Type::Int: return "int";
    case Type::Unit: return "unit";
    case Type::Arrow: {
      std::string d = type_str(t->args[0]);
      if (t->args[0]->kind == Type::Arrow) d = "(" + d + ")";
      return d + " -> " + type_str(t->args[1]);
    }
    case Type::Product: {
      std::string s;
      for (size_t i = 0; i < t->args.size(); ++i) {
        if (i) s += " * ";
        std::string c = type_str(t->args[i]);
        if (t->args[i]->kind == Type::Arrow || t->args[i]->kind == Type::Product) c = "(" + c + ")";
        s += c;
      }
      return s;
    }
  }
  return "?";
}

const char* prim_str(Prim p) {
  switch (p) {
    case Prim::Add: return "+";
    case Prim::Sub: return "-";
    case Prim::Mul: return "*";
    case Prim::Div: return "div";
    case Prim::Mod: return "mod";
    case Prim::Eq: return "=";
    case Prim::Ne: return "<>";
    case Prim::Lt: return "<";
    case Prim::Le: return "<=";
    case Prim::Gt: return ">";
    case Prim::Ge: return ">=";
    case Prim::Not: return "not";
    case Prim::Neg: return "-";
  }
  return "?";
}

int prim_arity(Prim p) { return (p == Prim::Not || p == Prim::Neg) ? 1 : 2; }

static std::shared_ptr<Expr> node(Kind k) {
  auto e = std::make_shared<Expr>();
  e->kind = k;
  return e;
}

E mk_int(int64_t n) {
  auto e = node(Kind::Const);
  e->ck = ConstKind::Int;
  e->ival = n;
  return e;
}
E mk_bool(bool b) {
  auto e = node(Kind::Const);
  e->ck = ConstKind::Bool;
  e->ival = b ? 1 : 0;
  return e;
}
E mk_unit() {
  static E u = [] {
    auto e = node(Kind::Const);
    e->ck = ConstKind::Unit;
    return E(e);
  }();
  return u;
}
E mk_var(std::string x) {
  auto e = node(Kind::Var);
  e->name = std::move(x);
  return e;
}
E mk_abs(int id, TypeP t) {
  auto e = node(Kind::Abs);
  e->id = id;
  e->type = std::move(t);
  return e;
}
E mk_sym(int id, TypeP t) {
  auto e = node(Kind::Sym);
  e->id = id;
  e->type = std::move(t);
  return e;
}
E mk_lam(std::string self, std::string x, E body, TypeP t) {
  auto e = node(Kind::Lam);
  e->self = std::move(self);
  e->name = std::move(x);
  e->type = std::move(t);
  e->kids = {std::move(body)};
  return e;
}
E mk_tuple(std::vector<E> es) {
  auto e = node(Kind::Tuple);
  e->kids = std::move(es);
  return e;
}
E mk_op(Prim p, std::vector<E> es) {
  auto e = node(Kind::Op);
  e->op = p;
  e->kids = std::move(es);
  return e;
}
E mk_app(E f, E a) {
  auto e = node(Kind::App);
  e->kids = {std::move(f), std::move(a)};
  return e;
}
E mk_if(E c, E t, E f) {
  auto e = node(Kind::If);
  e->kids = {std::move(c), std::move(t), std::move(f)};
  return e;
}
E mk_new(std::string x, E v, E body) {
  auto e = node(Kind::New);
  e->name = std::move(x);
  e->kids = {std::move(v), std::move(body)};
  return e;
}
E mk_deref(LocRef l) {
  auto e = node(Kind::Deref);
  e->loc = std::move(l);
  return e;
}
E mk_assign(LocRef l, E v) {
  auto e = node(Kind::Assign);
  e->loc = std::move(l);
  e->kids = {std::move(v)};
  return e;
}
E mk_let(std::vector<std::string> xs, E e1, E e2) {
  auto e = node(Kind::Let);
  e->vars = std::move(xs);
  e->kids = {std::move(e1), std::move(e2)};
  return e;
}
E mk_seq(E e1, E e2) { return mk_let({"_"}, std::move(e1), std::move(e2)); }
E mk_hole(TypeP t, int idx) {
  auto e = node(Kind::Hole);
  e->type = std::move(t);
  e->id = idx;
  return e;
}
LocRef loc_var(std::string x) {
  LocRef l;
  l.var = std::move(x);
  return l;
}
LocRef loc_atom(int a) {
  LocRef l;
  l.atom = a;
  return l;
}

bool is_value(const E& e) {
  switch (e->kind) {
    case Kind::Const:
    case Kind::Var:
    case Kind::Abs:
    case Kind::Sym:
    case Kind::Lam: return true;
    case Kind::Tuple:
      for (auto& k : e->kids)
        if (!is_value(k)) return false;
      return true;
    default: return false;
  }
}

bool is_fun_value(const E& e) { return e->kind == Kind::Lam || e->kind == Kind::Abs; }

static bool loc_eq(const LocRef& a, const LocRef& b) { return a.atom == b.atom && a.var == b.var; }

bool expr_equal(const E& a, const E& b) {
  if (a == b) return true;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case Kind::Const:
      if (a->ck != b->ck || a->ival != b->ival) return false;
      break;
    case Kind::Var:
      if (a->name != b->name) return false;
      break;
    case Kind::Abs:
    case Kind::Sym:
      if (a->id != b->id || !type_eq(a->type, b->type)) return false;
      break;
    case Kind::Hole:
      if (a->id != b->id || !type_eq(a->type, b->type)) return false;
      break;
    case Kind::Lam:
      if (a->self != b->self || a->name != b->name) return false;
      if ((a->type || b->type) && !type_eq(a->type, b->type)) return false;
      break;
    case Kind::Op:
      if (a->op != b->op) return false;
      break;
    case Kind::New:
      if (a->name != b->name) return false;
      break;
    case Kind::Deref:
    case Kind::Assign:
      if (!loc_eq(a->loc, b->loc)) return false;
      break;
    case Kind::Let:
      if (a->vars != b->vars) return false;
      break;
    default: break;
  }
  if (a->kids.size() != b->kids.size()) return false;
  for (size_t i = 0; i < a->kids.size(); ++i)
    if (!expr_equal(a->kids[i], b->kids[i])) return false;
  return true;
}

namespace {
using Env = std::vector<std::pair<std::string, std::string>>;

std::string lookup(const Env& env, const std::string& x) {
  for (auto it = env.rbegin(); it != env.rend(); ++it)
    if (it->first == x) return it->second;
  return "free:" + x;
}

bool alpha_rec(const E& a, const E& b, Env& ea, Env& eb, int& ctr) {
  if (a->kind != b->kind) return false;
  auto bind = [&](const std::string& x, const std::string& y) {
    std::string n = "#" + std::to_string(ctr++);
    ea.emplace_back(x, n);
    eb.emplace_back(y, n);
  };
  auto locs = [&](const LocRef& x, const LocRef& y) {
    if (x.is_atom() || y.is_atom()) return x.atom == y.atom && x.is_atom() == y.is_atom();
    return lookup(ea, x.var) == lookup(eb, y.var);
  };
  switch (a->kind) {
    case Kind::Var: return lookup(ea, a->name) == lookup(eb, b->name);
    case Kind::Lam: {
      if ((a->type || b->type) && !type_eq(a->type, b->type)) return false;
      if (a->self.empty() != b->self.empty()) return false;
      size_t mark = ea.size();
      if (!a->self.empty()) bind(a->self, b->self);
      bind(a->name, b->name);
      bool r = alpha_rec(a->kids[0], b->kids[0], ea, eb, ctr);
      ea.resize(mark);
      eb.resize(mark);
      return r;
    }
    case Kind::Let: {
      if (a->vars.size() != b->vars.size()) return false;
      if (!alpha_rec(a->kids[0], b->kids[0], ea, eb, ctr)) return false;
      size_t mark = ea.size();
      for (size_t i = 0; i < a->vars.size(); ++i) {
        if ((a->vars[i] == "_") != (b->vars[i] == "_")) return false;
        bind(a->vars[i], b->vars[i]);
      }
      bool r = alpha_rec(a->kids[1], b->kids[1], ea, eb, ctr);
      ea.resize(mark);
      eb.resize(mark);
      return r;
    }
    case Kind::New: {
      if (!alpha_rec(a->kids[0], b->kids[0], ea, eb, ctr)) return false;
      size_t mark = ea.size();
      bind(a->name, b->name);
      bool r = alpha_rec(a->kids[1], b->kids[1], ea, eb, ctr);
      ea.resize(mark);
      eb.resize(mark);
      return r;
    }
    case Kind::Deref: return locs(a->loc, b->loc);
    case Kind::Assign: return locs(a->loc, b->loc) && alpha_rec(a->kids[0], b->kids[0], ea, eb, ctr);
    case Kind::Const: return a->ck == b->ck && a->ival == b->ival;
    case Kind::Abs:
    case Kind::Sym:
    case Kind::Hole: return a->id == b->id && type_eq(a->type, b->type);
    case Kind::Op:
      if (a->op != b->op) return false;
      break;
    default: break;
  }
  if (a->kids.size() != b->kids.size()) return false;
  for (size_t i = 0; i < a->kids.size(); ++i)
    if (!alpha_rec(a->kids[i], b->kids[i], ea, eb, ctr)) return false;
  return true;
}

void fv_rec(const E& e, std::vector<std::string>& bound, std::set<std::string>& out) {
  auto isb = [&](const std::string& x) {
    for (auto& b : bound)
      if (b == x) return true;
    return false;
  };
  switch (e->kind) {
    case Kind::Var:
      if (!isb(e->name)) out.insert(e->name);
      return;
    case Kind::Deref:
    case Kind::Assign:
      if (!e->loc.is_atom() && !isb(e->loc.var)) out.insert(e->loc.var);
      for (auto& k : e->kids) fv_rec(k, bound, out);
      return;
    case Kind::Lam: {
      size_t m = bound.size();
      if (!e->self.empty()) bound.push_back(e->self);
      bound.push_back(e->name);
      fv_rec(e->kids[0], bound, out);
      bound.resize(m);
      return;
    }
    case Kind::Let: {
      fv_rec(e->kids[0], bound, out);
      size_t m = bound.size();
      for (auto& x : e->vars) bound.push_back(x);
      fv_rec(e->kids[1], bound, out);
      bound.resize(m);
      return;
    }
    case Kind::New: {
      fv_rec(e->kids[0], bound, out);
      size_t m = bound.size();
      bound.push_back(e->name);
      fv_rec(e->kids[1], bound, out);
      bound.resize(m);
      return;
    }
    default:
      for (auto& k : e->kids) fv_rec(k, bound, out);
  }
}

// generic rebuild helper: returns e itself when no child changed
template <class F>
E map_kids(const E& e, F&& f) {
  bool changed = false;
  std::vector<E> ks;
  ks.reserve(e->kids.size());
  for (auto& k : e->kids) {
    E nk = f(k);
    if (nk != k) changed = true;
    ks.push_back(std::move(nk));
  }
  if (!changed) return e;
  auto n = std::make_shared<Expr>(*e);
  n->kids = std::move(ks);
  return n;
}

bool binds(const E& e, const std::string& x) {
  switch (e->kind) {
    case Kind::Lam: return e->self == x || e->name == x;
    case Kind::Let:
      for (auto& v : e->vars)
        if (v == x) return true;
      return false;
    case Kind::New: return e->name == x;
    default: return false;
  }
}
}  // namespace

bool alpha_equal(const E& a, const E& b) {
  Env ea, eb;
  int ctr = 0;
  return alpha_rec(a, b, ea, eb, ctr);
}

std::set<std::string> free_vars(const E& e) {
  std::set<std::string> out;
  std::vector<std::string> bound;
  fv_rec(e, bound, out);
  return out;
}

E subst(const E& e, const std::string& x, const E& v) {
  if (e->kind == Kind::Var) return e->name == x ? v : e;
  if (e->kind == Kind::Const || e->kind == Kind::Abs || e->kind == Kind::Sym || e->kind == Kind::Hole ||
      e->kind == Kind::Deref)
    return e;
  if (binds(e, x)) {
    // binder scopes only over the body; the initializer of let/new is outside
    if (e->kind == Kind::Let || e->kind == Kind::New) {
      E k0 = subst(e->kids[0], x, v);
      if (k0 == e->kids[0]) return e;
      auto n = std::make_shared<Expr>(*e);
      n->kids[0] = k0;
      return n;
    }
    return e;
  }
  return map_kids(e, [&](const E& k) { return subst(k, x, v); });
}

E subst_loc(const E& e, const std::string& x, int atom) {
  switch (e->kind) {
    case Kind::Const:
    case Kind::Var:
    case Kind::Abs:
    case Kind::Sym:
    case Kind::Hole: return e;
    case Kind::Deref:
      if (!e->loc.is_atom() && e->loc.var == x) return mk_deref(loc_atom(atom));
      return e;
    case Kind::Assign: {
      E k = subst_loc(e->kids[0], x, atom);
      if (!e->loc.is_atom() && e->loc.var == x) return mk_assign(loc_atom(atom), k);
      if (k == e->kids[0]) return e;
      return mk_assign(e->loc, k);
    }
    default: break;
  }
  if (binds(e, x)) {
    if (e->kind == Kind::Let || e->kind == Kind::New) {
      E k0 = subst_loc(e->kids[0], x, atom);
      if (k0 == e->kids[0]) return e;
      auto n = std::make_shared<Expr>(*e);
      n->kids[0] = k0;
      return n;
    }
    return e;
  }
  return map_kids(e, [&](const E& k) { return subst_loc(k, x, atom); });
}

E plug(const E& ctx, const E& e) {
  if (ctx->kind == Kind::Hole && ctx->id < 0) return e;
  if (ctx->kids.empty()) return ctx;
  return map_kids(ctx, [&](const E& k) { return has_context_hole(k) ? plug(k, e) : k; });
}

E plug_pattern(const E& d, const std::map<int, E>& fill) {
  if (d->kind == Kind::Hole && d->id >= 0) {
    auto it = fill.find(d->id);
    return it == fill.end() ? d : it->second;
  }
  if (d->kids.empty()) return d;
  return map_kids(d, [&](const E& k) { return plug_pattern(k, fill); });
}

bool has_context_hole(const E& e) {
  if (e->kind == Kind::Hole) return e->id < 0;
  for (auto& k : e->kids)
    if (has_context_hole(k)) return true;
  return false;
}

void collect_locs(const E& e, std::set<int>& out) {
  if ((e->kind == Kind::Deref || e->kind == Kind::Assign) && e->loc.is_atom()) out.insert(e->loc.atom);
  for (auto& k : e->kids) collect_locs(k, out);
}
void collect_abs(const E& e, std::set<int>& out) {
  if (e->kind == Kind::Abs) out.insert(e->id);
  for (auto& k : e->kids) collect_abs(k, out);
}
void collect_syms(const E& e, std::set<int>& out) {
  if (e->kind == Kind::Sym) out.insert(e->id);
  for (auto& k : e->kids) collect_syms(k, out);
}

int64_t size(const E& e) {
  switch (e->kind) {
    case Kind::Const: return e->ck == ConstKind::Int ? std::llabs(e->ival) + 1 : 1;
    case Kind::Var:
    case Kind::Abs:
    case Kind::Sym:
    case Kind::Hole:
    case Kind::Deref: return 1;
    case Kind::Lam: return 1 + size(e->kids[0]);
    case Kind::Assign: return 1 + size(e->kids[0]);
    case Kind::New: return 1 + size(e->kids[0]) + size(e->kids[1]);
    default: {
      int64_t s = 1;
      for (auto& k : e->kids) s += size(k);
      return s;
    }
  }
}

}  // namespace pdnf
