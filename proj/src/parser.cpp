#include <cctype>
#include <sstream>

#include "pdnf/syntax.hpp"

namespace pdnf {

ParseError::ParseError(const std::string& m, int l, int c)
    : std::runtime_error("line " + std::to_string(l) + ", column " + std::to_string(c) + ": " + m), line(l), col(c) {}

namespace {

enum class Tok { Int, Ident, Kw, Sym, End };

struct Token {
  Tok kind;
  std::string text;
  int64_t ival = 0;
  int line = 1, col = 1;
};

const std::set<std::string> kKeywords = {"fun", "fix", "let", "rec", "in", "if", "then", "else", "ref",
                                         "true", "false", "not", "div", "mod", "begin", "end",
                                         "int", "bool", "unit"};

std::vector<Token> lex(const std::string& s) {
  std::vector<Token> out;
  int line = 1, col = 1;
  size_t i = 0;
  auto adv = [&](size_t n) {
    for (size_t k = 0; k < n && i < s.size(); ++k, ++i) {
      if (s[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      adv(1);
      continue;
    }
    if (c == '(' && i + 1 < s.size() && s[i + 1] == '*') {
      int depth = 0;
      int l0 = line, c0 = col;
      while (i < s.size()) {
        if (s.compare(i, 2, "(*") == 0) {
          ++depth;
          adv(2);
        } else if (s.compare(i, 2, "*)") == 0) {
          --depth;
          adv(2);
          if (depth == 0) break;
        } else {
          adv(1);
        }
      }
      if (depth != 0) throw ParseError("unterminated comment", l0, c0);
      continue;
    }
    Token t;
    t.line = line;
    t.col = col;
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t j = i;
      while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
      t.kind = Tok::Int;
      t.text = s.substr(i, j - i);
      try {
        t.ival = std::stoll(t.text);
      } catch (...) {
        throw ParseError("integer literal out of range", line, col);
      }
      adv(j - i);
      out.push_back(t);
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_' || s[j] == '\'')) ++j;
      t.text = s.substr(i, j - i);
      t.kind = kKeywords.count(t.text) ? Tok::Kw : Tok::Ident;
      adv(j - i);
      out.push_back(t);
      continue;
    }
    static const char* syms[] = {"|||", ":=", "->", "<=", ">=", "<>", "==", "!=", "&&", "||", "(", ")", ",", ";",
                                 "=",   "!",  "+",  "-",  "*",  "/",  "%",  "<",  ">",  ":"};
    bool found = false;
    for (const char* sy : syms) {
      size_t n = std::char_traits<char>::length(sy);
      if (s.compare(i, n, sy) == 0) {
        t.kind = Tok::Sym;
        t.text = sy;
        adv(n);
        out.push_back(t);
        found = true;
        break;
      }
    }
    if (!found) throw ParseError(std::string("unexpected character '") + c + "'", line, col);
  }
  Token end;
  end.kind = Tok::End;
  end.line = line;
  end.col = col;
  out.push_back(end);
  return out;
}

// A parameter: a named variable, unit, or tuple of names; with optional type.
struct Param {
  std::vector<std::string> names;  // size 1: plain; size>1: tuple
  bool unit = false;
  TypeP type;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> t) : toks_(std::move(t)) {}

  E program() {
    E e = expr();
    if (peek().kind != Tok::End) fail("unexpected '" + peek().text + "'");
    return e;
  }

 private:
  std::vector<Token> toks_;
  size_t pos_ = 0;
  int gen_ = 0;

  const Token& peek(size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  [[noreturn]] void fail(const std::string& m) const { throw ParseError(m, peek().line, peek().col); }
  bool is(const char* s, size_t k = 0) const {
    const Token& t = peek(k);
    return (t.kind == Tok::Sym || t.kind == Tok::Kw) && t.text == s;
  }
  bool accept(const char* s) {
    if (is(s)) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(const char* s) {
    if (!accept(s)) fail(std::string("expected '") + s + "'");
  }
  std::string ident() {
    if (peek().kind != Tok::Ident) fail("expected identifier");
    return toks_[pos_++].text;
  }
  std::string fresh(const char* base) { return std::string(base) + "__" + std::to_string(++gen_); }

  TypeP type() {
    TypeP d = type_prod();
    if (accept("->")) return t_arrow(d, type());
    return d;
  }
  TypeP type_prod() {
    std::vector<TypeP> ts{type_atom()};
    while (accept("*")) ts.push_back(type_atom());
    return ts.size() == 1 ? ts[0] : t_product(ts);
  }
  TypeP type_atom() {
    if (accept("int")) return t_int();
    if (accept("bool")) return t_bool();
    if (accept("unit")) return t_unit();
    if (accept("(")) {
      TypeP t = type();
      expect(")");
      return t;
    }
    fail("expected type");
  }

  Param param() {
    Param p;
    if (peek().kind == Tok::Ident) {
      p.names = {ident()};
      return p;
    }
    expect("(");
    if (accept(")")) {
      p.unit = true;
      p.names = {"_"};
      p.type = t_unit();
      return p;
    }
    p.names = {ident()};
    if (accept(":")) {
      p.type = type();
      expect(")");
      return p;
    }
    while (accept(",")) p.names.push_back(ident());
    expect(")");
    return p;
  }

  bool param_start() const { return peek().kind == Tok::Ident || is("("); }

  // builds fun p1 ... pn -> body; the first parameter may carry a recursion name
  E lambda(const std::string& self, const std::vector<Param>& ps, size_t i, E body) {
    const Param& p = ps[i];
    E inner = (i + 1 < ps.size()) ? lambda("", ps, i + 1, body) : body;
    std::string x = p.names[0];
    if (p.names.size() > 1) {
      x = fresh("p");
      inner = mk_let(p.names, mk_var(x), inner);
    }
    TypeP ann = p.type ? t_arrow(p.type, nullptr) : nullptr;
    auto lam = std::const_pointer_cast<Expr>(mk_lam(self, x, inner, nullptr));
    lam->type = ann;  // partial annotation (domain only); completed by inference
    return lam;
  }

  E expr() {
    E e = op_expr();
    if (accept(";")) {
      if (peek().kind == Tok::End || is(")") || is("in") || is("end")) return e;
      return mk_seq(e, expr());
    }
    return e;
  }

  E op_expr() {
    if (accept("fun")) {
      std::vector<Param> ps{param()};
      while (param_start()) ps.push_back(param());
      expect("->");
      return lambda("", ps, 0, expr());
    }
    if (accept("fix")) {
      std::string f = ident();
      std::vector<Param> ps{param()};
      while (param_start()) ps.push_back(param());
      expect("->");
      return lambda(f, ps, 0, expr());
    }
    if (accept("let")) return let_expr();
    if (is("ref") && peek(1).kind == Tok::Ident && is("=", 2)) {
      ++pos_;
      std::string x = ident();
      expect("=");
      E init = op_expr();
      expect("in");
      return make_ref(x, init, expr());
    }
    if (accept("if")) {
      E c = expr();
      expect("then");
      E t = op_expr();
      expect("else");
      E f = op_expr();
      return mk_if(c, t, f);
    }
    return assign_expr();
  }

  E make_ref(const std::string& x, E init, E body) {
    if (is_value(init)) return mk_new(x, init, body);
    std::string t = fresh("r");
    return mk_let({t}, init, mk_new(x, mk_var(t), body));
  }

  E let_expr() {
    bool rec = accept("rec");
    if (!rec && is("(")) {
      Param p = param();
      expect("=");
      E e1 = expr();
      expect("in");
      E e2 = expr();
      if (p.names.size() == 1) return mk_let({p.names[0]}, e1, e2);
      return mk_let(p.names, e1, e2);
    }
    std::string f = ident();
    std::vector<Param> ps;
    while (param_start()) ps.push_back(param());
    TypeP ret;
    if (accept(":")) ret = type();
    expect("=");
    if (ps.empty() && !rec && accept("ref")) {
      E init = op_expr();
      expect("in");
      return make_ref(f, init, expr());
    }
    E e1 = expr();
    expect("in");
    E e2 = expr();
    (void)ret;
    if (ps.empty()) {
      if (rec) fail("let rec requires a parameter");
      return mk_let({f}, e1, e2);
    }
    return mk_let({f}, lambda(rec ? f : "", ps, 0, e1), e2);
  }

  E assign_expr() {
    if (peek().kind == Tok::Ident && is(":=", 1)) {
      std::string x = ident();
      expect(":=");
      return mk_assign(loc_var(x), op_expr());
    }
    return or_expr();
  }

  E or_expr() {
    E l = and_expr();
    while (accept("||")) l = mk_if(l, mk_bool(true), and_expr());
    return l;
  }
  E and_expr() {
    E l = cmp_expr();
    while (accept("&&")) l = mk_if(l, cmp_expr(), mk_bool(false));
    return l;
  }
  E cmp_expr() {
    E l = add_expr();
    static const std::pair<const char*, Prim> ops[] = {{"=", Prim::Eq},  {"==", Prim::Eq}, {"<>", Prim::Ne},
                                                       {"!=", Prim::Ne}, {"<=", Prim::Le}, {">=", Prim::Ge},
                                                       {"<", Prim::Lt},  {">", Prim::Gt}};
    for (auto& [s, p] : ops)
      if (accept(s)) return mk_op(p, {l, add_expr()});
    return l;
  }
  E add_expr() {
    E l = mul_expr();
    for (;;) {
      if (accept("+"))
        l = mk_op(Prim::Add, {l, mul_expr()});
      else if (accept("-"))
        l = mk_op(Prim::Sub, {l, mul_expr()});
      else
        return l;
    }
  }
  E mul_expr() {
    E l = unary();
    for (;;) {
      if (accept("*"))
        l = mk_op(Prim::Mul, {l, unary()});
      else if (accept("/") || accept("div"))
        l = mk_op(Prim::Div, {l, unary()});
      else if (accept("%") || accept("mod"))
        l = mk_op(Prim::Mod, {l, unary()});
      else
        return l;
    }
  }
  E unary() {
    if (accept("-")) {
      if (peek().kind == Tok::Int) {
        int64_t v = toks_[pos_++].ival;
        return mk_int(-v);
      }
      return mk_op(Prim::Neg, {unary()});
    }
    if (accept("not")) return mk_op(Prim::Not, {unary()});
    return app_expr();
  }
  bool atom_start() const {
    const Token& t = peek();
    if (t.kind == Tok::Int || t.kind == Tok::Ident) return !is(":=", 1);
    return is("(") || is("true") || is("false") || is("begin") || is("!");
  }
  E app_expr() {
    E f = atom();
    while (atom_start()) f = mk_app(f, atom());
    return f;
  }
  E atom() {
    const Token& t = peek();
    if (t.kind == Tok::Int) {
      ++pos_;
      return mk_int(t.ival);
    }
    if (t.kind == Tok::Ident) return mk_var(ident());
    if (accept("true")) return mk_bool(true);
    if (accept("false")) return mk_bool(false);
    if (accept("!")) {
      if (accept("(")) {
        std::string x = ident();
        expect(")");
        return mk_deref(loc_var(x));
      }
      return mk_deref(loc_var(ident()));
    }
    if (accept("begin")) {
      E e = expr();
      expect("end");
      return e;
    }
    if (accept("(")) {
      if (accept(")")) return mk_unit();
      E e = expr();
      if (accept(":")) {
        TypeP ty = type();
        expect(")");
        return annotate(e, ty);
      }
      if (is(",")) {
        std::vector<E> es{e};
        while (accept(",")) es.push_back(expr());
        expect(")");
        return mk_tuple(es);
      }
      expect(")");
      return e;
    }
    fail("unexpected '" + t.text + "'");
  }
  // (e : T) on a lambda fixes its full annotation; elsewhere it is dropped
  E annotate(const E& e, const TypeP& t) {
    if (e->kind == Kind::Lam && t->kind == Type::Arrow) {
      auto n = std::make_shared<Expr>(*e);
      n->type = t;
      return n;
    }
    return e;
  }
};

}  // namespace

E parse(const std::string& text) { return Parser(lex(text)).program(); }

std::pair<std::string, std::string> split_pair(const std::string& text) {
  std::istringstream in(text);
  std::string line, a, b;
  bool second = false;
  while (std::getline(in, line)) {
    std::string trimmed = line;
    while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.back()))) trimmed.pop_back();
    size_t k = 0;
    while (k < trimmed.size() && std::isspace(static_cast<unsigned char>(trimmed[k]))) ++k;
    if (trimmed.substr(k) == "|||") {
      if (second) throw ParseError("more than one '|||' separator", 0, 0);
      second = true;
      continue;
    }
    (second ? b : a) += line + "\n";
  }
  if (!second) throw ParseError("missing '|||' separator line", 0, 0);
  return {a, b};
}

}  // namespace pdnf
