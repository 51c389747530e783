#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdnf {

struct Type;
using TypeP = std::shared_ptr<const Type>;

struct Type {
  enum Kind { Bool, Int, Unit, Arrow, Product };
  Kind kind = Unit;
  std::vector<TypeP> args;  // Arrow: {dom, cod}; Product: components
};

TypeP t_bool();
TypeP t_int();
TypeP t_unit();
TypeP t_arrow(TypeP dom, TypeP cod);
TypeP t_product(std::vector<TypeP> ts);
bool type_eq(const TypeP& a, const TypeP& b);
bool is_base(const TypeP& t);
bool has_arrow(const TypeP& t);
std::string type_str(const TypeP& t);

enum class Prim { Add, Sub, Mul, Div, Mod, Eq, Ne, Lt, Le, Gt, Ge, Not, Neg };
const char* prim_str(Prim p);
int prim_arity(Prim p);

enum class Kind { Const, Var, Abs, Sym, Lam, Tuple, Op, App, If, New, Deref, Assign, Let, Hole };
enum class ConstKind { Int, Bool, Unit };

// A location reference is either a ref-bound variable or a location atom.
struct LocRef {
  std::string var;
  int atom = -1;
  bool is_atom() const { return atom >= 0; }
};

struct Expr;
using E = std::shared_ptr<const Expr>;

struct Expr {
  Kind kind = Kind::Const;
  ConstKind ck = ConstKind::Unit;
  int64_t ival = 0;
  std::string name;  // Var; Lam parameter; New binder
  std::string self;  // Lam recursion name ("" when anonymous)
  int id = -1;       // Abs/Sym atom, Hole index (-1: context hole)
  TypeP type;        // Abs, Sym, Lam (arrow), Hole; may be null on Lam before inference
  Prim op = Prim::Add;
  LocRef loc;                     // Deref, Assign
  std::vector<std::string> vars;  // Let: one var, or a tuple pattern; "_" discards
  std::vector<E> kids;
};

// builders
E mk_int(int64_t n);
E mk_bool(bool b);
E mk_unit();
E mk_var(std::string x);
E mk_abs(int id, TypeP t);
E mk_sym(int id, TypeP t);
E mk_lam(std::string self, std::string x, E body, TypeP t = nullptr);
E mk_tuple(std::vector<E> es);
E mk_op(Prim p, std::vector<E> es);
E mk_app(E f, E a);
E mk_if(E c, E t, E f);
E mk_new(std::string x, E v, E body);
E mk_deref(LocRef l);
E mk_assign(LocRef l, E v);
E mk_let(std::vector<std::string> xs, E e1, E e2);
E mk_seq(E e1, E e2);
E mk_hole(TypeP t, int idx = -1);
LocRef loc_var(std::string x);
LocRef loc_atom(int l);

bool is_value(const E& e);
bool is_fun_value(const E& e);  // Lam or Abs
bool expr_equal(const E& a, const E& b);
// alpha-equivalence of bound variables and ref binders
bool alpha_equal(const E& a, const E& b);

std::set<std::string> free_vars(const E& e);
E subst(const E& e, const std::string& x, const E& v);
E subst_loc(const E& e, const std::string& x, int atom);
// fill the context hole (id -1) with e
E plug(const E& ctx, const E& e);
// fill pattern holes by index
E plug_pattern(const E& d, const std::map<int, E>& fill);
bool has_context_hole(const E& e);

// names occurring in e
void collect_locs(const E& e, std::set<int>& out);
void collect_abs(const E& e, std::set<int>& out);
void collect_syms(const E& e, std::set<int>& out);

int64_t size(const E& e);

struct ParseError : std::runtime_error {
  int line, col;
  ParseError(const std::string& m, int l, int c);
};
struct TypeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

E parse(const std::string& text);
// splits on a line consisting of "|||"
std::pair<std::string, std::string> split_pair(const std::string& text);

struct PrettyOpts {
  bool annotate = false;  // print lambda parameter types
};
std::string pretty(const E& e, PrettyOpts o = {});

using VarTyping = std::map<std::string, TypeP>;
using StoreTyping = std::map<int, TypeP>;

// infers lambda annotations (monomorphic; unconstrained variables default to Unit)
E infer(const E& e);
TypeP typecheck(const E& e, const VarTyping& delta = {}, const StoreTyping& lambda = {});
// parse then infer
E parse_program(const std::string& text);

}  // namespace pdnf
