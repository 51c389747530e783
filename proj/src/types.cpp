#include <functional>
#include <unordered_map>

#include "pdnf/syntax.hpp"

namespace pdnf {

namespace {

std::string short_term(const E& e) {
  std::string s = pretty(e);
  if (s.size() > 60) s = s.substr(0, 57) + "...";
  return s;
}

[[noreturn]] void mismatch(const E& at, const std::string& expected, const TypeP& got) {
  throw TypeError("type error in `" + short_term(at) + "`: expected " + expected + ", got " + type_str(got));
}

// ---- unification-based inference ----

struct Node {
  int kind;  // -1 variable, else Type::Kind
  std::vector<int> args;
  int parent;
};

class Infer {
 public:
  std::vector<Node> nodes;
  std::unordered_map<const Expr*, std::pair<int, int>> lam_types;

  int var() {
    nodes.push_back({-1, {}, static_cast<int>(nodes.size())});
    return static_cast<int>(nodes.size()) - 1;
  }
  int con(int k, std::vector<int> args = {}) {
    nodes.push_back({k, std::move(args), static_cast<int>(nodes.size())});
    return static_cast<int>(nodes.size()) - 1;
  }
  int find(int x) {
    while (nodes[x].parent != x) {
      nodes[x].parent = nodes[nodes[x].parent].parent;
      x = nodes[x].parent;
    }
    return x;
  }
  int of(const TypeP& t) {
    if (!t) return var();
    std::vector<int> as;
    for (auto& a : t->args) as.push_back(of(a));
    return con(t->kind, as);
  }
  bool occurs(int v, int t) {
    t = find(t);
    if (t == v) return true;
    for (int a : nodes[t].args)
      if (occurs(v, a)) return true;
    return false;
  }
  TypeP resolve(int t, bool dflt = true) {
    t = find(t);
    const Node& n = nodes[t];
    if (n.kind < 0) return dflt ? t_unit() : nullptr;
    switch (n.kind) {
      case Type::Bool: return t_bool();
      case Type::Int: return t_int();
      case Type::Unit: return t_unit();
      case Type::Arrow: return t_arrow(resolve(n.args[0], dflt), resolve(n.args[1], dflt));
      default: {
        std::vector<TypeP> ts;
        for (int a : n.args) ts.push_back(resolve(a, dflt));
        return t_product(ts);
      }
    }
  }
  std::string show(int t) {
    t = find(t);
    if (nodes[t].kind < 0) return "'a" + std::to_string(t);
    TypeP r = resolve(t, true);
    return type_str(r);
  }
  void unify(int a, int b, const E& at) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (nodes[a].kind < 0) {
      if (occurs(a, b)) throw TypeError("type error in `" + short_term(at) + "`: recursive type");
      nodes[a].parent = b;
      return;
    }
    if (nodes[b].kind < 0) {
      unify(b, a, at);
      return;
    }
    if (nodes[a].kind != nodes[b].kind || nodes[a].args.size() != nodes[b].args.size())
      throw TypeError("type error in `" + short_term(at) + "`: expected " + show(b) + ", got " + show(a));
    std::vector<int> aa = nodes[a].args, bb = nodes[b].args;
    for (size_t i = 0; i < aa.size(); ++i) unify(aa[i], bb[i], at);
  }

  using Env = std::vector<std::pair<std::string, int>>;

  static int look(const Env& env, const std::string& x) {
    for (auto it = env.rbegin(); it != env.rend(); ++it)
      if (it->first == x) return it->second;
    return -1;
  }

  int go(const E& e, Env& vars, Env& locs) {
    switch (e->kind) {
      case Kind::Const:
        return con(e->ck == ConstKind::Int ? Type::Int : e->ck == ConstKind::Bool ? Type::Bool : Type::Unit);
      case Kind::Var: {
        int t = look(vars, e->name);
        if (t < 0) throw TypeError("unbound variable `" + e->name + "`");
        return t;
      }
      case Kind::Abs:
      case Kind::Sym:
      case Kind::Hole: return of(e->type);
      case Kind::Lam: {
        int d = var(), c = var();
        int ft = con(Type::Arrow, {d, c});
        if (e->type) {
          if (e->type->kind != Type::Arrow) throw TypeError("lambda annotated with non-arrow type");
          if (e->type->args[0]) unify(d, of(e->type->args[0]), e);
          if (e->type->args[1]) unify(c, of(e->type->args[1]), e);
        }
        lam_types.emplace(e.get(), std::make_pair(d, c));
        size_t m = vars.size();
        if (!e->self.empty()) vars.emplace_back(e->self, ft);
        vars.emplace_back(e->name, d);
        int bt = go(e->kids[0], vars, locs);
        vars.resize(m);
        unify(bt, c, e->kids[0]);
        return ft;
      }
      case Kind::Tuple: {
        std::vector<int> ts;
        for (auto& k : e->kids) ts.push_back(go(k, vars, locs));
        return con(Type::Product, ts);
      }
      case Kind::Op: {
        std::vector<int> ts;
        for (auto& k : e->kids) ts.push_back(go(k, vars, locs));
        if (static_cast<int>(ts.size()) != prim_arity(e->op)) throw TypeError("wrong arity for operator");
        switch (e->op) {
          case Prim::Add:
          case Prim::Sub:
          case Prim::Mul:
          case Prim::Div:
          case Prim::Mod:
            unify(ts[0], con(Type::Int), e->kids[0]);
            unify(ts[1], con(Type::Int), e->kids[1]);
            return con(Type::Int);
          case Prim::Eq:
          case Prim::Ne:
            unify(ts[1], ts[0], e->kids[1]);
            eq_operands.emplace_back(ts[0], e);
            return con(Type::Bool);
          case Prim::Lt:
          case Prim::Le:
          case Prim::Gt:
          case Prim::Ge:
            unify(ts[0], con(Type::Int), e->kids[0]);
            unify(ts[1], con(Type::Int), e->kids[1]);
            return con(Type::Bool);
          case Prim::Not: unify(ts[0], con(Type::Bool), e->kids[0]); return con(Type::Bool);
          case Prim::Neg: unify(ts[0], con(Type::Int), e->kids[0]); return con(Type::Int);
        }
        return con(Type::Unit);
      }
      case Kind::App: {
        int f = go(e->kids[0], vars, locs);
        int a = go(e->kids[1], vars, locs);
        int r = var();
        unify(f, con(Type::Arrow, {a, r}), e);
        return r;
      }
      case Kind::If: {
        int c = go(e->kids[0], vars, locs);
        unify(c, con(Type::Bool), e->kids[0]);
        int t = go(e->kids[1], vars, locs);
        int f = go(e->kids[2], vars, locs);
        unify(f, t, e->kids[2]);
        return t;
      }
      case Kind::New: {
        int v = go(e->kids[0], vars, locs);
        size_t m = locs.size();
        locs.emplace_back(e->name, v);
        int r = go(e->kids[1], vars, locs);
        locs.resize(m);
        return r;
      }
      case Kind::Deref:
      case Kind::Assign: {
        int ct;
        if (e->loc.is_atom()) {
          auto it = store_typing.find(e->loc.atom);
          if (it == store_typing.end()) throw TypeError("unknown location l" + std::to_string(e->loc.atom));
          ct = of(it->second);
        } else {
          ct = look(locs, e->loc.var);
          if (ct < 0) throw TypeError("unbound reference `" + e->loc.var + "`");
        }
        if (e->kind == Kind::Deref) return ct;
        int v = go(e->kids[0], vars, locs);
        unify(v, ct, e->kids[0]);
        return con(Type::Unit);
      }
      case Kind::Let: {
        int t1 = go(e->kids[0], vars, locs);
        size_t m = vars.size();
        if (e->vars.size() == 1) {
          vars.emplace_back(e->vars[0], t1);
        } else {
          std::vector<int> cs;
          for (auto& x : e->vars) {
            cs.push_back(var());
            vars.emplace_back(x, cs.back());
          }
          unify(t1, con(Type::Product, cs), e->kids[0]);
        }
        int r = go(e->kids[1], vars, locs);
        vars.resize(m);
        return r;
      }
    }
    return con(Type::Unit);
  }

  E rebuild(const E& e) {
    if (e->kids.empty() && e->kind != Kind::Lam) return e;
    auto n = std::make_shared<Expr>(*e);
    for (auto& k : n->kids) k = rebuild(k);
    if (e->kind == Kind::Lam) {
      auto it = lam_types.find(e.get());
      if (it != lam_types.end()) n->type = t_arrow(resolve(it->second.first), resolve(it->second.second));
    }
    return n;
  }

  std::vector<std::pair<int, E>> eq_operands;
  StoreTyping store_typing;
};

// ---- checking against annotations ----

struct Checker {
  const StoreTyping& lambda;
  using Env = std::vector<std::pair<std::string, TypeP>>;

  static TypeP look(const Env& env, const std::string& x) {
    for (auto it = env.rbegin(); it != env.rend(); ++it)
      if (it->first == x) return it->second;
    return nullptr;
  }
  static void expect(const E& at, const TypeP& want, const TypeP& got) {
    if (!type_eq(want, got)) mismatch(at, type_str(want), got);
  }

  TypeP go(const E& e, Env& vars, Env& locs) const {
    switch (e->kind) {
      case Kind::Const:
        return e->ck == ConstKind::Int ? t_int() : e->ck == ConstKind::Bool ? t_bool() : t_unit();
      case Kind::Var: {
        TypeP t = look(vars, e->name);
        if (!t) throw TypeError("unbound variable `" + e->name + "`");
        return t;
      }
      case Kind::Abs:
        if (!e->type || e->type->kind != Type::Arrow) throw TypeError("abstract name without arrow type");
        return e->type;
      case Kind::Sym:
        if (!e->type || !(e->type->kind == Type::Int || e->type->kind == Type::Bool))
          throw TypeError("symbolic constant without base type");
        return e->type;
      case Kind::Hole:
        if (!e->type) throw TypeError("untyped hole");
        return e->type;
      case Kind::Lam: {
        if (!e->type || e->type->kind != Type::Arrow || !e->type->args[0] || !e->type->args[1])
          throw TypeError("unannotated lambda `" + short_term(e) + "`");
        size_t m = vars.size();
        if (!e->self.empty()) vars.emplace_back(e->self, e->type);
        vars.emplace_back(e->name, e->type->args[0]);
        TypeP b = go(e->kids[0], vars, locs);
        vars.resize(m);
        expect(e->kids[0], e->type->args[1], b);
        return e->type;
      }
      case Kind::Tuple: {
        std::vector<TypeP> ts;
        for (auto& k : e->kids) ts.push_back(go(k, vars, locs));
        return t_product(ts);
      }
      case Kind::Op: {
        if (static_cast<int>(e->kids.size()) != prim_arity(e->op)) throw TypeError("wrong arity for operator");
        std::vector<TypeP> ts;
        for (auto& k : e->kids) ts.push_back(go(k, vars, locs));
        switch (e->op) {
          case Prim::Add:
          case Prim::Sub:
          case Prim::Mul:
          case Prim::Div:
          case Prim::Mod:
            expect(e->kids[0], t_int(), ts[0]);
            expect(e->kids[1], t_int(), ts[1]);
            return t_int();
          case Prim::Eq:
          case Prim::Ne:
            if (!is_base(ts[0])) mismatch(e->kids[0], "a base type", ts[0]);
            expect(e->kids[1], ts[0], ts[1]);
            return t_bool();
          case Prim::Lt:
          case Prim::Le:
          case Prim::Gt:
          case Prim::Ge:
            expect(e->kids[0], t_int(), ts[0]);
            expect(e->kids[1], t_int(), ts[1]);
            return t_bool();
          case Prim::Not: expect(e->kids[0], t_bool(), ts[0]); return t_bool();
          case Prim::Neg: expect(e->kids[0], t_int(), ts[0]); return t_int();
        }
        return t_unit();
      }
      case Kind::App: {
        TypeP f = go(e->kids[0], vars, locs);
        TypeP a = go(e->kids[1], vars, locs);
        if (f->kind != Type::Arrow) mismatch(e->kids[0], "a function type", f);
        expect(e->kids[1], f->args[0], a);
        return f->args[1];
      }
      case Kind::If: {
        expect(e->kids[0], t_bool(), go(e->kids[0], vars, locs));
        TypeP t = go(e->kids[1], vars, locs);
        expect(e->kids[2], t, go(e->kids[2], vars, locs));
        return t;
      }
      case Kind::New: {
        if (!is_value(e->kids[0])) throw TypeError("reference initializer is not a value");
        TypeP v = go(e->kids[0], vars, locs);
        size_t m = locs.size();
        locs.emplace_back(e->name, v);
        TypeP r = go(e->kids[1], vars, locs);
        locs.resize(m);
        return r;
      }
      case Kind::Deref:
      case Kind::Assign: {
        TypeP ct;
        if (e->loc.is_atom()) {
          auto it = lambda.find(e->loc.atom);
          if (it == lambda.end()) throw TypeError("unknown location l" + std::to_string(e->loc.atom));
          ct = it->second;
        } else {
          ct = look(locs, e->loc.var);
          if (!ct) throw TypeError("unbound reference `" + e->loc.var + "`");
        }
        if (e->kind == Kind::Deref) return ct;
        expect(e->kids[0], ct, go(e->kids[0], vars, locs));
        return t_unit();
      }
      case Kind::Let: {
        TypeP t1 = go(e->kids[0], vars, locs);
        size_t m = vars.size();
        if (e->vars.size() == 1) {
          vars.emplace_back(e->vars[0], t1);
        } else {
          if (t1->kind != Type::Product || t1->args.size() != e->vars.size())
            mismatch(e->kids[0], "a " + std::to_string(e->vars.size()) + "-tuple", t1);
          for (size_t i = 0; i < e->vars.size(); ++i) vars.emplace_back(e->vars[i], t1->args[i]);
        }
        TypeP r = go(e->kids[1], vars, locs);
        vars.resize(m);
        return r;
      }
    }
    return t_unit();
  }
};

}  // namespace

E infer(const E& e) {
  Infer inf;
  Infer::Env vars, locs;
  inf.go(e, vars, locs);
  for (auto& [t, at] : inf.eq_operands) {
    TypeP r = inf.resolve(t);
    if (!is_base(r)) mismatch(at->kids[0], "a base type", r);
  }
  return inf.rebuild(e);
}

TypeP typecheck(const E& e, const VarTyping& delta, const StoreTyping& lambda) {
  Checker c{lambda};
  Checker::Env vars(delta.begin(), delta.end()), locs;
  return c.go(e, vars, locs);
}

E parse_program(const std::string& text) {
  E e = infer(parse(text));
  typecheck(e);
  return e;
}

}  // namespace pdnf
