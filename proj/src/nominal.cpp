#include "pdnf/nominal.hpp"

#include <algorithm>

namespace pdnf {

namespace {
int look(const std::map<int, int>& m, int x) {
  auto it = m.find(x);
  return it == m.end() ? x : it->second;
}

std::map<int, int> invert(const std::map<int, int>& m) {
  std::map<int, int> r;
  for (auto& [k, v] : m) r[v] = k;
  return r;
}

template <class FL, class FA, class FI, class FK>
E rename(const E& e, const FL& fl, const FA& fa, const FI& fi, const FK& fk) {
  switch (e->kind) {
    case Kind::Const:
    case Kind::Var: return e;
    case Kind::Abs: {
      int n = fa(e->id);
      return n == e->id ? e : mk_abs(n, e->type);
    }
    case Kind::Sym: {
      int n = fk(e->id);
      return n == e->id ? e : mk_sym(n, e->type);
    }
    case Kind::Hole: {
      if (e->id < 0) return e;
      int n = fi(e->id);
      return n == e->id ? e : mk_hole(e->type, n);
    }
    case Kind::Deref:
      if (e->loc.is_atom()) {
        int n = fl(e->loc.atom);
        return n == e->loc.atom ? e : mk_deref(loc_atom(n));
      }
      return e;
    default: break;
  }
  bool changed = false;
  std::vector<E> ks;
  for (auto& k : e->kids) {
    ks.push_back(rename(k, fl, fa, fi, fk));
    if (ks.back() != k) changed = true;
  }
  LocRef nl = e->loc;
  if (e->kind == Kind::Assign && nl.is_atom()) {
    nl.atom = fl(nl.atom);
    if (nl.atom != e->loc.atom) changed = true;
  }
  if (!changed) return e;
  auto n = std::make_shared<Expr>(*e);
  n->kids = std::move(ks);
  n->loc = nl;
  return n;
}

E rename_p(const Perm& p, const E& e, const SymMap* ks) {
  return rename(
      e, [&](int x) { return p.l(x); }, [&](int x) { return p.a(x); }, [&](int x) { return p.i(x); },
      [&](int x) { return ks ? look(*ks, x) : x; });
}

// extend a finite injection to a bijection on dom ∪ range
std::map<int, int> complete(const std::map<int, int>& f) {
  std::map<int, int> r = f;
  std::set<int> dom, rng;
  for (auto& [k, v] : f) {
    dom.insert(k);
    rng.insert(v);
  }
  std::vector<int> free_src, free_dst;
  for (int y : rng)
    if (!dom.count(y)) free_src.push_back(y);
  for (int x : dom)
    if (!rng.count(x)) free_dst.push_back(x);
  for (size_t i = 0; i < free_src.size() && i < free_dst.size(); ++i) r[free_src[i]] = free_dst[i];
  for (auto it = r.begin(); it != r.end();) it = it->first == it->second ? r.erase(it) : std::next(it);
  return r;
}
}  // namespace

int Perm::l(int x) const { return look(loc, x); }
int Perm::a(int x) const { return look(abs, x); }
int Perm::i(int x) const { return look(idx, x); }

Perm Perm::inverse() const { return {invert(loc), invert(abs), invert(idx)}; }

Perm Perm::compose(const Perm& o) const {
  Perm r;
  auto comp = [](const std::map<int, int>& f, const std::map<int, int>& g) {
    std::map<int, int> out;
    std::set<int> keys;
    for (auto& [k, v] : g) keys.insert(k);
    for (auto& [k, v] : f) keys.insert(k);
    for (int k : keys) {
      int v = look(f, look(g, k));
      if (v != k) out[k] = v;
    }
    return out;
  };
  r.loc = comp(loc, o.loc);
  r.abs = comp(abs, o.abs);
  r.idx = comp(idx, o.idx);
  return r;
}

bool Perm::is_identity() const {
  for (auto* m : {&loc, &abs, &idx})
    for (auto& [k, v] : *m)
      if (k != v) return false;
  return true;
}

Perm Perm::swap(Sort s, int x, int y) {
  Perm p;
  auto& m = s == Sort::Loc ? p.loc : s == Sort::Abs ? p.abs : p.idx;
  if (x != y) {
    m[x] = y;
    m[y] = x;
  }
  return p;
}

E apply_perm(const Perm& p, const E& e, const SymMap* ks) { return rename_p(p, e, ks); }

Store apply_perm(const Perm& p, const Store& s, const SymMap* ks) {
  Store r;
  for (auto& [l, v] : s) r[p.l(l)] = rename_p(p, v, ks);
  return r;
}

Gamma apply_perm_gamma(const Perm& p, const Gamma& g, const SymMap* ks) {
  Gamma r;
  for (auto& [i, v] : g) r[p.i(i)] = rename_p(p, v, ks);
  return r;
}

Names apply_perm(const Perm& p, const Names& n) {
  Names r;
  for (auto& [a, t] : n) r[p.a(a)] = t;
  return r;
}

Cont apply_perm(const Perm& p, const Cont& c, const SymMap* ks) {
  if (c.k != Cont::Ctx) return c;
  return Cont::of(rename_p(p, c.ctx, ks));
}

Config apply_perm(const Perm& p, const Config& c, const SymMap* ks) {
  Config r = c;
  r.A = apply_perm(p, c.A);
  r.gamma = apply_perm_gamma(p, c.gamma, ks);
  r.store = apply_perm(p, c.store, ks);
  if (c.exp) r.exp = rename_p(p, c.exp, ks);
  r.cont = apply_perm(p, c.cont, ks);
  int hi = 0;
  for (auto& [i, v] : r.gamma) hi = std::max(hi, i);
  r.next_index = std::max(c.next_index, hi);
  return r;
}

void Support::add(const Support& o) {
  locs.insert(o.locs.begin(), o.locs.end());
  abs.insert(o.abs.begin(), o.abs.end());
  idx.insert(o.idx.begin(), o.idx.end());
}

Support support(const E& e) {
  Support s;
  collect_locs(e, s.locs);
  collect_abs(e, s.abs);
  std::function<void(const E&)> holes = [&](const E& x) {
    if (x->kind == Kind::Hole && x->id >= 0) s.idx.insert(x->id);
    for (auto& k : x->kids) holes(k);
  };
  holes(e);
  return s;
}

Support support(const Store& st) {
  Support s;
  for (auto& [l, v] : st) {
    s.locs.insert(l);
    s.add(support(v));
  }
  return s;
}

Support support(const Config& c) {
  Support s;
  if (c.is_bot()) return s;
  for (auto& [a, t] : c.A) s.abs.insert(a);
  for (auto& [i, v] : c.gamma) {
    s.idx.insert(i);
    s.add(support(v));
  }
  s.add(support(c.store));
  if (c.pol == Pol::Prop && c.exp) s.add(support(c.exp));
  if (c.pol == Pol::Opp && c.cont.k == Cont::Ctx) s.add(support(c.cont.ctx));
  return s;
}

Support apply_perm(const Perm& p, const Support& s) {
  Support r;
  for (int x : s.locs) r.locs.insert(p.l(x));
  for (int x : s.abs) r.abs.insert(p.a(x));
  for (int x : s.idx) r.idx.insert(p.i(x));
  return r;
}

int fresh(Sort s, const std::set<int>& avoid) {
  int x = s == Sort::Index ? 1 : 0;
  while (avoid.count(x)) ++x;
  return x;
}
int fresh_loc(const std::set<int>& avoid) { return fresh(Sort::Loc, avoid); }
int fresh_abs(const std::set<int>& avoid) { return fresh(Sort::Abs, avoid); }
int fresh_index(const std::set<int>& avoid) { return fresh(Sort::Index, avoid); }

// ---------------- Canon ----------------

void Canon::type(const TypeP& t) {
  switch (t->kind) {
    case Type::Bool: out += 'B'; return;
    case Type::Int: out += 'I'; return;
    case Type::Unit: out += 'U'; return;
    case Type::Arrow:
      out += '>';
      type(t->args[0]);
      type(t->args[1]);
      return;
    case Type::Product:
      out += '*';
      out += std::to_string(t->args.size());
      for (auto& a : t->args) type(a);
      return;
  }
}

int Canon::name_loc(int side, int l) {
  auto& m = loc[side];
  auto it = m.find(l);
  if (it != m.end()) return it->second;
  int n = static_cast<int>(m.size());
  m[l] = n;
  return n;
}
int Canon::name_abs(int a) {
  auto it = abs.find(a);
  if (it != abs.end()) return it->second;
  int n = static_cast<int>(abs.size());
  abs[a] = n;
  return n;
}
int Canon::name_idx(int i) {
  auto it = idx.find(i);
  if (it != idx.end()) return it->second;
  int n = static_cast<int>(idx.size()) + 1;
  idx[i] = n;
  return n;
}
int Canon::name_sym(int k) {
  auto it = sym.find(k);
  if (it != sym.end()) return it->second;
  int n = static_cast<int>(sym.size());
  sym[k] = n;
  return n;
}

void Canon::expr(const E& e, int side) {
  switch (e->kind) {
    case Kind::Const:
      if (e->ck == ConstKind::Unit)
        out += 'u';
      else if (e->ck == ConstKind::Bool)
        out += e->ival ? 't' : 'f';
      else
        out += 'i' + std::to_string(e->ival) + ';';
      return;
    case Kind::Var: out += 'v' + e->name + ';'; return;
    case Kind::Abs:
      out += 'a';
      if (!anon_) out += std::to_string(name_abs(e->id));
      out += ':';
      type(e->type);
      return;
    case Kind::Sym:
      out += 'k';
      if (!anon_) out += std::to_string(raw_sym ? e->id : name_sym(e->id));
      out += ':';
      type(e->type);
      return;
    case Kind::Hole:
      out += 'h';
      if (e->id >= 0) out += anon_ ? "#" : std::to_string(name_idx(e->id));
      out += ':';
      type(e->type);
      return;
    case Kind::Lam:
      out += 'L' + e->self + ',' + e->name + ':';
      type(e->type);
      out += '{';
      expr(e->kids[0], side);
      out += '}';
      return;
    case Kind::Deref:
    case Kind::Assign:
      out += e->kind == Kind::Deref ? '!' : '=';
      if (e->loc.is_atom()) {
        out += 'l';
        if (!anon_) out += std::to_string(name_loc(side, e->loc.atom));
        out += ';';
      } else {
        out += 'x' + e->loc.var + ';';
      }
      if (e->kind == Kind::Assign) {
        out += '(';
        expr(e->kids[0], side);
        out += ')';
      }
      return;
    case Kind::Tuple: out += 'T'; break;
    case Kind::Op: out += 'o' + std::to_string(static_cast<int>(e->op)); break;
    case Kind::App: out += '@'; break;
    case Kind::If: out += '?'; break;
    case Kind::New: out += 'n' + e->name; break;
    case Kind::Let:
      out += 'e';
      for (auto& v : e->vars) out += v + ',';
      break;
  }
  out += '(';
  for (size_t i = 0; i < e->kids.size(); ++i) {
    if (i) out += ',';
    expr(e->kids[i], side);
  }
  out += ')';
}

void Canon::cont(const Cont& c, int side) {
  switch (c.k) {
    case Cont::Top: out += 'D'; return;
    case Cont::Chi: out += 'X'; return;
    case Cont::Ctx:
      out += 'C';
      expr(c.ctx, side);
      return;
  }
}

void Canon::gamma(const Gamma& g, int side, const std::vector<int>& order) {
  out += 'G';
  for (int i : order) {
    auto it = g.find(i);
    if (it == g.end()) continue;
    out += std::to_string(name_idx(i)) + '=';
    expr(it->second, side);
    out += ';';
  }
  out += '.';
}

void Canon::names(const Names& A) {
  // named ones in canonical order, then the rest by type
  std::vector<std::pair<int, int>> known;
  std::vector<std::pair<std::string, int>> rest;
  for (auto& [a, t] : A) {
    auto it = abs.find(a);
    if (it != abs.end()) {
      known.emplace_back(it->second, a);
    } else {
      Canon tc(true);
      tc.type(t);
      rest.emplace_back(tc.out, a);
    }
  }
  std::sort(known.begin(), known.end());
  std::sort(rest.begin(), rest.end());
  out += 'A';
  for (auto& [n, a] : known) {
    out += std::to_string(n) + ':';
    type(A.at(a));
  }
  out += '|';
  for (auto& [t, a] : rest) {
    out += std::to_string(name_abs(a)) + ':' + t;
  }
  out += '.';
}

int Canon::add_slot(const Store* s, int side) {
  slots_.push_back({s, side, {}});
  return static_cast<int>(slots_.size()) - 1;
}

void Canon::flush() {
  bool progress = true;
  while (progress) {
    progress = false;
    for (size_t si = 0; si < slots_.size(); ++si) {
      Slot& sl = slots_[si];
      // canonical order of named locations on this side
      std::vector<std::pair<int, int>> named;
      for (auto& [l, n] : loc[sl.side])
        if (sl.s->count(l) && !sl.done.count(l)) named.emplace_back(n, l);
      if (named.empty()) continue;
      std::sort(named.begin(), named.end());
      int l = named.front().second;
      sl.done.insert(l);
      out += 'S' + std::to_string(si) + '.' + std::to_string(named.front().first) + '=';
      expr(sl.s->at(l), sl.side);
      out += ';';
      progress = true;
      break;  // restart so that lower canonical numbers go first
    }
  }
}

std::vector<int> Canon::unreached(int slot) const {
  std::vector<int> r;
  for (auto& [l, v] : *slots_[slot].s)
    if (!slots_[slot].done.count(l)) r.push_back(l);
  return r;
}

void Canon::root(int slot, int l) {
  if (slots_[slot].done.count(l)) return;
  out += 'R' + std::to_string(slot);
  name_loc(slots_[slot].side, l);
  flush();
}

Perm Canon::perm_side(int side) const {
  Perm p;
  p.loc = complete(loc[side]);
  p.abs = complete(abs);
  p.idx = complete(idx);
  return p;
}

Perm Canon::perm() const { return perm_side(0); }

std::string shape(const E& e) {
  Canon c(true);
  c.expr(e, 0);
  return c.out;
}

namespace {

// enumerate the cartesian product of permutations of tie groups
template <class F>
bool for_each_arrangement(std::vector<std::vector<int>> groups, size_t cap, F&& f) {
  size_t total = 1;
  for (auto& g : groups) {
    std::sort(g.begin(), g.end());
    for (size_t k = 2; k <= g.size(); ++k) {
      total *= k;
      if (total > cap) break;
    }
    if (total > cap) break;
  }
  if (total > cap) {
    std::vector<int> flat;
    for (auto& g : groups) flat.insert(flat.end(), g.begin(), g.end());
    f(flat);
    return false;
  }
  std::function<void(size_t, std::vector<int>&)> rec = [&](size_t gi, std::vector<int>& acc) {
    if (gi == groups.size()) {
      f(acc);
      return;
    }
    std::vector<int> g = groups[gi];
    do {
      size_t m = acc.size();
      acc.insert(acc.end(), g.begin(), g.end());
      rec(gi + 1, acc);
      acc.resize(m);
    } while (std::next_permutation(g.begin(), g.end()));
  };
  std::vector<int> acc;
  rec(0, acc);
  return true;
}

std::vector<std::vector<int>> group_by_shape(std::vector<std::pair<std::string, int>> items) {
  std::sort(items.begin(), items.end());
  std::vector<std::vector<int>> groups;
  for (size_t i = 0; i < items.size(); ++i) {
    if (i == 0 || items[i].first != items[i - 1].first) groups.emplace_back();
    groups.back().push_back(items[i].second);
  }
  return groups;
}

}  // namespace

CanonResult canon_search(const std::vector<std::pair<int, std::string>>& indices,
                         const std::function<void(Canon&, const std::vector<int>&)>& main,
                         const std::function<void(Canon&)>& post, size_t cap) {
  CanonResult res;
  std::vector<std::pair<std::string, int>> items;
  for (auto& [i, s] : indices) items.emplace_back(s, i);
  auto idx_groups = group_by_shape(items);

  auto consider = [&](Canon&& c) {
    if (res.minimal.empty() || c.out < res.key) {
      res.key = c.out;
      res.minimal.clear();
      res.minimal.push_back(std::move(c));
    } else if (c.out == res.key) {
      res.minimal.push_back(std::move(c));
    }
  };

  bool exact = for_each_arrangement(idx_groups, cap, [&](const std::vector<int>& order) {
    Canon base;
    main(base, order);
    // unreachable store cells, grouped by (slot, shape); encoded as slot*2^20+loc
    std::vector<std::pair<std::string, int>> roots;
    for (int s = 0; s < base.slot_count(); ++s)
      for (int l : base.unreached(s))
        roots.emplace_back(std::to_string(s) + "#" + shape(base.slot_store(s).at(l)), s * (1 << 20) + l);
    if (roots.empty()) {
      post(base);
      consider(std::move(base));
      return;
    }
    auto root_groups = group_by_shape(roots);
    bool ok = for_each_arrangement(root_groups, cap, [&](const std::vector<int>& rorder) {
      Canon c = base;
      for (int code : rorder) c.root(code >> 20, code & ((1 << 20) - 1));
      post(c);
      consider(std::move(c));
    });
    if (!ok) res.exact = false;
  });
  if (!exact) res.exact = false;
  return res;
}

namespace {
void config_main(Canon& c, const Config& cf, const std::vector<int>& order, int side) {
  if (cf.is_bot()) {
    c.lit("B");
    return;
  }
  c.lit(cf.pol == Pol::Prop ? "P" : "O");
  c.gamma(cf.gamma, side, order);
  if (cf.pol == Pol::Prop)
    c.expr(cf.exp, side);
  else
    c.cont(cf.cont, side);
  c.add_slot(&cf.store, side);
  c.flush();
}
}  // namespace

std::pair<Config, Perm> canonicalize(const Config& cf) {
  std::vector<std::pair<int, std::string>> idx;
  for (auto& [i, v] : cf.gamma) idx.emplace_back(i, shape(v));
  auto r = canon_search(
      idx, [&](Canon& c, const std::vector<int>& order) { config_main(c, cf, order, 0); },
      [&](Canon& c) { c.names(cf.A); });
  const Canon& best = r.minimal.front();
  Perm p = best.perm_side(0);
  return {apply_perm(p, cf), p};
}

std::string canonical_key(const Config& cf) {
  std::vector<std::pair<int, std::string>> idx;
  for (auto& [i, v] : cf.gamma) idx.emplace_back(i, shape(v));
  return canon_search(
             idx, [&](Canon& c, const std::vector<int>& order) { config_main(c, cf, order, 0); },
             [&](Canon& c) { c.names(cf.A); })
      .key;
}

}  // namespace pdnf
