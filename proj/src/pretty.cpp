#include "pdnf/syntax.hpp"

namespace pdnf {

namespace {

// precedence levels, lowest binds loosest
enum Lvl { kSeq = 0, kOpen = 1, kOpenClosed = 2, kCmp = 3, kAdd = 4, kMul = 5, kUnary = 6, kApp = 7, kAtom = 8 };

struct Printer {
  PrettyOpts o;

  std::string loc(const LocRef& l) const { return l.is_atom() ? "l" + std::to_string(l.atom) : l.var; }

  std::string param(const E& lam) const {
    bool unit_param = lam->name == "_" && lam->type && lam->type->args[0] && lam->type->args[0]->kind == Type::Unit;
    if (unit_param) return "()";
    if (o.annotate && lam->type && lam->type->args[0]) return "(" + lam->name + " : " + type_str(lam->type->args[0]) + ")";
    return lam->name;
  }

  // level of the construct itself
  static int level(const E& e) {
    switch (e->kind) {
      case Kind::Let: return e->vars.size() == 1 && e->vars[0] == "_" ? kSeq : kOpen;
      case Kind::Lam:
      case Kind::If:
      case Kind::New:
      case Kind::Assign: return kOpen;
      case Kind::Op:
        switch (e->op) {
          case Prim::Eq:
          case Prim::Ne:
          case Prim::Lt:
          case Prim::Le:
          case Prim::Gt:
          case Prim::Ge: return kCmp;
          case Prim::Add:
          case Prim::Sub: return kAdd;
          case Prim::Mul:
          case Prim::Div:
          case Prim::Mod: return kMul;
          default: return kUnary;
        }
      case Kind::App: return kApp;
      case Kind::Const: return (e->ck == ConstKind::Int && e->ival < 0) ? kUnary : kAtom;
      default: return kAtom;
    }
  }

  std::string at(const E& e, int ctx) const {
    std::string s = go(e);
    if (level(e) < ctx) return "(" + s + ")";
    return s;
  }

  std::string go(const E& e) const {
    switch (e->kind) {
      case Kind::Const:
        if (e->ck == ConstKind::Unit) return "()";
        if (e->ck == ConstKind::Bool) return e->ival ? "true" : "false";
        return std::to_string(e->ival);
      case Kind::Var: return e->name;
      case Kind::Abs: return "α" + std::to_string(e->id);
      case Kind::Sym: return "κ" + std::to_string(e->id);
      case Kind::Hole: return e->id < 0 ? "[·]" : "[·]" + std::to_string(e->id);
      case Kind::Lam:
        if (e->self.empty()) return "fun " + param(e) + " -> " + at(e->kids[0], kSeq);
        return "fix " + e->self + " " + param(e) + " -> " + at(e->kids[0], kSeq);
      case Kind::Tuple: {
        std::string s = "(";
        for (size_t i = 0; i < e->kids.size(); ++i) s += (i ? ", " : "") + at(e->kids[i], kSeq);
        return s + ")";
      }
      case Kind::Op: {
        if (e->op == Prim::Not) return "not " + at(e->kids[0], kUnary);
        if (e->op == Prim::Neg) {
          const E& k = e->kids[0];
          if (k->kind == Kind::Const) return "-(" + go(k) + ")";
          return "-" + at(k, kUnary);
        }
        int l = level(e);
        int lhs = l == kCmp ? kAdd : l;
        return at(e->kids[0], lhs) + " " + prim_str(e->op) + " " + at(e->kids[1], l + 1);
      }
      case Kind::App: return at(e->kids[0], kApp) + " " + at(e->kids[1], kAtom);
      case Kind::If:
        return "if " + at(e->kids[0], kSeq) + " then " + at(e->kids[1], kOpen) + " else " + at(e->kids[2], kOpen);
      case Kind::New: return "ref " + e->name + " = " + at(e->kids[0], kOpen) + " in " + at(e->kids[1], kSeq);
      case Kind::Deref: return "!" + loc(e->loc);
      case Kind::Assign: return loc(e->loc) + " := " + at(e->kids[0], kOpenClosed);
      case Kind::Let: {
        if (e->vars.size() == 1 && e->vars[0] == "_") {
          const E& l = e->kids[0];
          std::string left = (l->kind == Kind::Assign) ? go(l) : at(l, kOpenClosed);
          return left + "; " + at(e->kids[1], kSeq);
        }
        std::string pat;
        if (e->vars.size() == 1) {
          pat = e->vars[0];
        } else {
          pat = "(";
          for (size_t i = 0; i < e->vars.size(); ++i) pat += (i ? ", " : "") + e->vars[i];
          pat += ")";
        }
        return "let " + pat + " = " + at(e->kids[0], kSeq) + " in " + at(e->kids[1], kSeq);
      }
    }
    return "?";
  }
};

}  // namespace

std::string pretty(const E& e, PrettyOpts o) {
  Printer p{o};
  return p.go(e);
}

}  // namespace pdnf
