#include "pdnf/upto.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "pdnf/nominal.hpp"
#include "pdnf/semantics.hpp"

namespace pdnf {

namespace {

void syms_config(const Config& c, std::set<int>& out) {
  if (c.is_bot()) return;
  for (auto& [i, v] : c.gamma) collect_syms(v, out);
  for (auto& [l, v] : c.store) collect_syms(v, out);
  if (c.pol == Pol::Prop && c.exp) collect_syms(c.exp, out);
  if (c.pol == Pol::Opp && c.cont.k == Cont::Ctx) collect_syms(c.cont.ctx, out);
}

void control_serialize(Canon& k, const Config& c, const std::vector<int>& order, int side) {
  if (c.is_bot()) {
    k.lit("B");
    return;
  }
  k.lit(c.pol == Pol::Prop ? "P" : "O");
  k.gamma(c.gamma, side, order);
  if (c.pol == Pol::Prop)
    k.expr(c.exp, side);
  else
    k.cont(c.cont, side);
  k.add_slot(&c.store, side);
  k.flush();
}

std::string raw_config(const Config& c) {
  if (c.is_bot()) return "B";
  std::string s = c.pol == Pol::Prop ? "P" : "O";
  for (auto& [i, v] : c.gamma) s += std::to_string(i) + "=" + pretty(v) + ";";
  s += "|";
  if (c.pol == Pol::Prop)
    s += pretty(c.exp);
  else
    s += c.cont.k == Cont::Ctx ? pretty(c.cont.ctx) : c.cont.k == Cont::Top ? "⋄" : "χ";
  s += "|";
  for (auto& [l, v] : c.store) s += std::to_string(l) + "=" + pretty(v) + ";";
  return s;
}

std::set<int> reachable_locs(const std::vector<E>& roots, const Store& s, std::set<int> seed) {
  std::set<int> seen = seed;
  std::vector<int> work(seed.begin(), seed.end());
  auto add = [&](const E& e) {
    std::set<int> ls;
    collect_locs(e, ls);
    for (int l : ls)
      if (seen.insert(l).second) work.push_back(l);
  };
  for (auto& r : roots)
    if (r) add(r);
  while (!work.empty()) {
    int l = work.back();
    work.pop_back();
    auto it = s.find(l);
    if (it != s.end()) add(it->second);
  }
  return seen;
}

std::vector<E> config_roots(const Config& c) {
  std::vector<E> r;
  for (auto& [i, v] : c.gamma) r.push_back(v);
  if (c.pol == Pol::Prop) r.push_back(c.exp);
  if (c.pol == Pol::Opp && c.cont.k == Cont::Ctx) r.push_back(c.cont.ctx);
  return r;
}

std::set<int> beta_locs(const EPP& b, int j) {
  std::set<int> r;
  if (!b || b->c[j].is_bot()) return r;
  for (auto& [l, v] : b->c[j].store) r.insert(l);
  return r;
}

}  // namespace

std::set<int> live_syms(const PairState& ps) {
  std::set<int> out;
  for (auto& c : ps.c) syms_config(c, out);
  if (ps.beta)
    for (auto& c : ps.beta->c) syms_config(c, out);
  for (auto& f : ps.frames)
    for (auto& l : f.lab)
      if (l.k == Lab::Ctx) collect_syms(l.ctx, out);
  return out;
}

std::string pair_key(const PairState& ps, Solver& solver, const KeyOpts& o) {
  SymEnv sig = simplify(ps.sigma, live_syms(ps), solver);
  std::string edges;
  for (auto& k : ps.sigma_g.keys()) edges += "E" + k + "\n";
  std::string tail = std::string(ps.real ? "r" : "u");
  if (!o.normalize) {
    std::string s = raw_config(ps.c[0]) + "||" + raw_config(ps.c[1]) + "||" + ep_str(ps.beta) + "||";
    if (o.with_names)
      for (auto& c : ps.c)
        for (auto& [a, t] : c.A) s += std::to_string(a) + ",";
    std::vector<std::string> at;
    for (auto& a : sig.atoms) at.push_back(atom_str(a));
    std::sort(at.begin(), at.end());
    for (auto& a : at) s += a + ";";
    return s + "||" + edges + tail;
  }
  std::map<int, std::string> shapes;
  for (int j = 0; j < 2; ++j)
    for (auto& [i, v] : ps.c[j].gamma) shapes[i] += std::to_string(j) + shape(v);
  merge_shapes(shapes, ep_index_shapes(ps.beta));
  auto r = canon_search(
      {shapes.begin(), shapes.end()},
      [&](Canon& k, const std::vector<int>& order) {
        for (int j = 0; j < 2; ++j) control_serialize(k, ps.c[j], order, j);
        ep_serialize(k, ps.beta, order);
      },
      [&](Canon& k) {
        if (o.with_names) {
          Names all = ps.c[0].A;
          for (auto& [a, t] : ps.c[1].A) all[a] = t;
          k.names(all);
        }
        serialize_atoms(k, sig.atoms);
      });
  return r.key + "\n" + edges + tail;
}

Config gc(const Config& c, const std::set<int>& protect) {
  if (c.is_bot()) return c;
  Config r = c;
  auto keep = reachable_locs(config_roots(c), c.store, protect);
  r.store.clear();
  for (auto& [l, v] : c.store)
    if (keep.count(l)) r.store[l] = v;
  std::set<int> used;
  for (auto& e : config_roots(r)) collect_abs(e, used);
  for (auto& [l, v] : r.store) collect_abs(v, used);
  r.A.clear();
  for (auto& [a, t] : c.A)
    if (used.count(a)) r.A[a] = t;
  return r;
}

PairState gc(const PairState& ps) {
  PairState r = ps;
  for (int j = 0; j < 2; ++j) {
    std::set<int> prot = beta_locs(ps.beta, j);
    for (auto& f : ps.frames)
      if (f.lab[j].k == Lab::Ctx) collect_locs(f.lab[j].ctx, prot);
    r.c[j] = gc(ps.c[j], prot);
  }
  return r;
}

PairState normalize(const PairState& ps) {
  std::map<int, std::string> shapes;
  for (int j = 0; j < 2; ++j)
    for (auto& [i, v] : ps.c[j].gamma) shapes[i] += std::to_string(j) + shape(v);
  merge_shapes(shapes, ep_index_shapes(ps.beta));
  Names all = ps.c[0].A;
  for (auto& [a, t] : ps.c[1].A) all[a] = t;
  auto r = canon_search(
      {shapes.begin(), shapes.end()},
      [&](Canon& k, const std::vector<int>& order) {
        for (int j = 0; j < 2; ++j) control_serialize(k, ps.c[j], order, j);
        ep_serialize(k, ps.beta, order);
      },
      [&](Canon& k) {
        k.names(all);
        serialize_atoms(k, ps.sigma.atoms);
      });
  const Canon& best = r.minimal.front();
  // symbolic constants: canonical ones first, then the rest above them
  SymMap km = best.sym;
  int top = static_cast<int>(km.size());
  for (int v : ps.sigma.consts())
    if (!km.count(v)) km[v] = top++;
  PairState out = ps;
  Perm p[2] = {best.perm_side(0), best.perm_side(1)};
  for (int j = 0; j < 2; ++j) out.c[j] = ps.c[j].is_bot() ? ps.c[j] : apply_perm(p[j], ps.c[j], &km);
  if (ps.beta) {
    Config b[2];
    for (int j = 0; j < 2; ++j) b[j] = ps.beta->c[j].is_bot() ? Config::bot() : apply_perm(p[j], ps.beta->c[j], &km);
    out.beta = make_ep(b[0], b[1]);
  }
  for (auto& f : out.frames)
    for (int j = 0; j < 2; ++j)
      if (f.lab[j].k == Lab::Ctx) f.lab[j].ctx = apply_perm(p[j], f.lab[j].ctx, &km);
  SymEnv s;
  s.next = top;
  for (auto& [v, b] : ps.sigma.vars) s.vars[km.at(v)] = b;
  for (auto& a : ps.sigma.atoms) {
    Atom b = a;
    b.t.c.clear();
    for (auto& [v, k] : a.t.c) b.t.c[km.at(v)] = k;
    s.atoms.push_back(b);
  }
  out.sigma = s;
  return out;
}

std::pair<SymEnv, Config> beta_collapse(const SymEnv& sigma, const Config& c, long k_int) {
  SymEnv s = sigma;
  Config cur = c;
  if (cur.pol != Pol::Prop) return {s, cur};
  for (long n = 0; n < k_int; ++n) {
    SymStep st = sym_step(s, {cur.store, cur.exp});
    if (st.kind != StepKind::Stepped || st.branched || st.next.size() != 1) break;
    s = st.next[0].first;
    cur.store = st.next[0].second.store;
    cur.exp = st.next[0].second.expr;
  }
  return {s, cur};
}

PairState weaken(const PairState& ps, int i) {
  PairState r = ps;
  for (auto& c : r.c) c.gamma.erase(i);
  return r;
}

namespace {

bool has_ho_ref(const E& e, const Store& s) {
  for (int l : reachable_locs({e}, s, {})) {
    auto it = s.find(l);
    if (it != s.end() && has_arrow(value_type(it->second, {}))) return true;
  }
  return false;
}

// nullopt: undefined on this component
std::optional<E> reuse_in(const E& e, int a, int a2, const Store& s) {
  std::set<int> an;
  collect_abs(e, an);
  if (!an.count(a)) return e;
  if (an.count(a2) || has_ho_ref(e, s)) return std::nullopt;
  Perm p;
  p.abs[a] = a2;
  return apply_perm(p, e);
}

}  // namespace

namespace {

// ⟨a/a2⟩ on every component of a configuration; the store is left alone
bool reuse_config(Config& c, int a, int a2) {
  if (c.is_bot()) return true;
  for (auto& [i, v] : c.gamma) {
    auto n = reuse_in(v, a, a2, c.store);
    if (!n) return false;
    v = *n;
  }
  if (c.pol == Pol::Prop && c.exp) {
    auto n = reuse_in(c.exp, a, a2, c.store);
    if (!n) return false;
    c.exp = *n;
  } else if (c.pol == Pol::Opp && c.cont.k == Cont::Ctx) {
    auto n = reuse_in(c.cont.ctx, a, a2, c.store);
    if (!n) return false;
    c.cont.ctx = *n;
  }
  c.A.erase(a);
  return true;
}

std::optional<EPP> reuse_ep(const EPP& b, int a, int a2) {
  if (!b) return b;
  Config c[2] = {b->c[0], b->c[1]};
  for (auto& x : c)
    if (!reuse_config(x, a, a2)) return std::nullopt;
  return make_ep(c[0], c[1]);
}

bool reuse_lab(Lab& l, int a, int a2, const Store& s) {
  if (l.k != Lab::Ctx) return true;
  auto n = reuse_in(l.ctx, a, a2, s);
  if (!n) return false;
  l.ctx = *n;
  return true;
}

}  // namespace

std::optional<PairState> name_reuse(const PairState& ps, int a, int a2) {
  if (a == a2) return std::nullopt;
  TypeP ta, tb;
  for (auto& c : ps.c) {
    if (c.A.count(a)) ta = c.A.at(a);
    if (c.A.count(a2)) tb = c.A.at(a2);
  }
  if (!ta || !tb || !type_eq(ta, tb)) return std::nullopt;
  PairState r = ps;
  for (auto& c : r.c)
    if (!reuse_config(c, a, a2)) return std::nullopt;
  auto nb = reuse_ep(ps.beta, a, a2);
  if (!nb) return std::nullopt;
  r.beta = *nb;
  for (auto& f : r.frames) {
    for (int j = 0; j < 2; ++j)
      if (!reuse_lab(f.lab[j], a, a2, ps.c[j].store)) return std::nullopt;
    auto t = reuse_ep(f.tgt, a, a2);
    if (!t) return std::nullopt;
    f.tgt = *t;
  }
  CGraph g = sigma_diamond();
  if (ps.sigma_g.edges)
    for (auto& [k, e] : *ps.sigma_g.edges) {
      if (!e->src) continue;
      auto src = reuse_ep(e->src, a, a2);
      auto tgt = reuse_ep(e->tgt, a, a2);
      if (!src || !tgt) return std::nullopt;
      Lab l[2] = {e->lab[0], e->lab[1]};
      for (int j = 0; j < 2; ++j)
        if (!reuse_lab(l[j], a, a2, e->src->c[j].store)) return std::nullopt;
      g = extend(g, *src, l[0], l[1], *tgt, e->phi);
    }
  r.sigma_g = restrict(g, r.beta);
  return r;
}

std::optional<std::vector<PairState>> separate(const PairState& ps) {
  if (ps.beta) return std::nullopt;
  for (auto& c : ps.c)
    if (c.pol != Pol::Opp || c.cont.k != Cont::Top) return std::nullopt;
  std::vector<int> idx;
  for (auto& [i, v] : ps.c[0].gamma) idx.push_back(i);
  if (idx.size() < 2) return std::nullopt;
  std::map<int, int> parent;
  std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  for (int i : idx) parent[i] = i;
  for (int j = 0; j < 2; ++j) {
    std::map<int, int> owner;  // location -> some index reaching it
    for (int i : idx) {
      for (int l : reachable_locs({ps.c[j].gamma.at(i)}, ps.c[j].store, {})) {
        auto it = owner.find(l);
        if (it == owner.end())
          owner[l] = i;
        else
          parent[find(i)] = find(it->second);
      }
    }
  }
  std::map<int, std::vector<int>> classes;
  for (int i : idx) classes[find(i)].push_back(i);
  if (classes.size() < 2) return std::nullopt;
  std::vector<PairState> out;
  for (auto& [root, members] : classes) {
    PairState r = ps;
    for (int j = 0; j < 2; ++j) {
      Gamma g;
      for (int i : members) g[i] = ps.c[j].gamma.at(i);
      r.c[j].gamma = g;
      r.c[j] = gc(r.c[j]);
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace pdnf
