#include "pdnf/cgraph.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

namespace pdnf {

EPP make_ep(const Config& c1, const Config& c2) {
  auto b = std::make_shared<EntryPoint>();
  b->c[0] = c1;
  b->c[1] = c2;
  for (auto& c : b->c) c.A.clear();  // entry points ignore A
  return b;
}

bool ep_side_bot(const EPP& b, int j) { return b && b->c[j].is_bot(); }

Lab Lab::from_cont(const Cont& c) {
  if (c.k == Cont::Ctx) return of(c.ctx);
  if (c.k == Cont::Top) return diamond();
  throw std::logic_error("χ continuation on a stack label");
}

Cont lab_cont(const Lab& l) {
  if (l.k == Lab::Ctx) return Cont::of(l.ctx);
  if (l.k == Lab::Diamond) return Cont::top();
  throw std::logic_error("⊥ label has no continuation");
}

std::string lab_str(const Lab& l) {
  if (l.k == Lab::Diamond) return "⋄";
  if (l.k == Lab::Bot) return "⊥";
  return pretty(l.ctx);
}

void merge_shapes(std::map<int, std::string>& into, const std::vector<std::pair<int, std::string>>& more) {
  for (auto& [i, s] : more) into[i] += "/" + s;
}

std::vector<std::pair<int, std::string>> ep_index_shapes(const EPP& b) {
  std::map<int, std::string> m;
  if (b)
    for (int j = 0; j < 2; ++j)
      for (auto& [i, v] : b->c[j].gamma) m[i] += std::to_string(j) + shape(v);
  return {m.begin(), m.end()};
}

void ep_serialize(Canon& c, const EPP& b, const std::vector<int>& order) {
  if (!b) {
    c.lit("<D>");
    return;
  }
  c.lit("<");
  for (int j = 0; j < 2; ++j) {
    const Config& cf = b->c[j];
    if (cf.is_bot()) {
      c.lit("B|");
      continue;
    }
    c.lit("P");
    c.gamma(cf.gamma, j, order);
    c.expr(cf.exp, j);
    c.add_slot(&cf.store, j);
    c.flush();
    c.lit("|");
  }
  c.lit(">");
}

namespace {

std::string atom_text(Canon& c, const Atom& a, bool assign) {
  std::string s;
  for (auto& [v, k] : a.t.c) {
    auto it = c.sym.find(v);
    std::string n = it != c.sym.end() ? std::to_string(it->second) : assign ? std::to_string(c.name_sym(v)) : "?";
    s += std::to_string(k) + "*k" + n + "+";
  }
  s += std::to_string(a.t.k);
  s += a.r == Rel::Eq ? "=0" : a.r == Rel::Ne ? "!0" : a.r == Rel::Le ? "<=0" : "<0";
  return s;
}

CanonResult ep_canon(const EPP& b) {
  return canon_search(
      ep_index_shapes(b), [&](Canon& c, const std::vector<int>& order) { ep_serialize(c, b, order); },
      [](Canon&) {});
}

void lab_serialize(Canon& c, const Lab& l, int side) {
  if (l.k == Lab::Diamond)
    c.lit("{D}");
  else if (l.k == Lab::Bot)
    c.lit("{B}");
  else {
    c.lit("{");
    c.expr(l.ctx, side);
    c.lit("}");
  }
}

}  // namespace

void serialize_atoms(Canon& c, const std::vector<Atom>& atoms) {
  std::vector<std::pair<std::string, size_t>> pre;
  for (size_t i = 0; i < atoms.size(); ++i) pre.emplace_back(atom_text(c, atoms[i], false), i);
  std::sort(pre.begin(), pre.end());
  for (auto& [s, i] : pre) atom_text(c, atoms[i], true);
  std::vector<std::string> fin;
  for (auto& a : atoms) fin.push_back(atom_text(c, a, true));
  std::sort(fin.begin(), fin.end());
  fin.erase(std::unique(fin.begin(), fin.end()), fin.end());
  c.lit("[");
  for (auto& s : fin) c.lit(s + ";");
  c.lit("]");
}

std::string ep_key(const EPP& b) {
  if (!b) return "<D>";
  return ep_canon(b).key;
}

std::string ep_str(const EPP& b) {
  if (!b) return "⋄";
  std::string s = "⌜";
  for (int j = 0; j < 2; ++j) {
    if (j) s += ", ";
    const Config& c = b->c[j];
    if (c.is_bot()) {
      s += "⊥";
      continue;
    }
    s += "(";
    bool first = true;
    for (auto& [i, v] : c.gamma) {
      s += (first ? "" : ", ") + std::to_string(i) + "↦" + pretty(v);
      first = false;
    }
    s += " ; " + pretty(c.exp) + " ; ";
    first = true;
    for (auto& [l, v] : c.store) {
      s += (first ? "" : ", ") + std::string("ℓ") + std::to_string(l) + "↦" + pretty(v);
      first = false;
    }
    s += ")";
  }
  return s + "⌝";
}

namespace {

std::set<int> syms_of_ep(const EPP& b) {
  std::set<int> out;
  if (!b) return out;
  for (auto& c : b->c) {
    if (c.is_bot()) continue;
    for (auto& [i, v] : c.gamma) collect_syms(v, out);
    for (auto& [l, v] : c.store) collect_syms(v, out);
    collect_syms(c.exp, out);
  }
  return out;
}

std::set<int> syms_of_edge(const Edge& e) {
  auto s = syms_of_ep(e.src);
  auto t = syms_of_ep(e.tgt);
  s.insert(t.begin(), t.end());
  for (auto& l : e.lab)
    if (l.k == Lab::Ctx) collect_syms(l.ctx, s);
  return s;
}

}  // namespace

EdgeP make_edge(const EPP& src, const Lab& l1, const Lab& l2, const EPP& tgt, const SymEnv& phi) {
  auto e = std::make_shared<Edge>();
  e->src = src;
  e->lab[0] = l1;
  e->lab[1] = l2;
  e->tgt = tgt;
  // keep only the constraints that touch the edge
  std::set<int> mine = syms_of_edge(*e);
  for (auto& a : phi.atoms) {
    bool touch = false;
    for (auto& [v, k] : a.t.c) touch = touch || mine.count(v);
    if (touch || a.t.c.empty()) e->phi.atoms.push_back(a);
  }
  for (auto& [v, b] : phi.vars)
    if (mine.count(v)) e->phi.vars[v] = b;
  for (auto& a : e->phi.atoms)
    for (auto& [v, k] : a.t.c)
      if (phi.vars.count(v)) e->phi.vars[v] = phi.vars.at(v);
  e->phi.next = phi.next;

  e->src_key = ep_key(src);
  e->tgt_key = ep_key(tgt);
  if (!src) {
    e->key = "<D>{D}{D}<D>";
    return e;
  }
  auto sh = ep_index_shapes(src);
  std::map<int, std::string> m(sh.begin(), sh.end());
  for (auto& [i, s] : m) s = "s" + s;
  merge_shapes(m, ep_index_shapes(tgt));
  auto r = canon_search(
      {m.begin(), m.end()},
      [&](Canon& c, const std::vector<int>& order) {
        ep_serialize(c, src, order);
        lab_serialize(c, l1, 0);
        lab_serialize(c, l2, 1);
        ep_serialize(c, tgt, order);
      },
      [&](Canon& c) { serialize_atoms(c, e->phi.atoms); });
  e->key = r.key;
  return e;
}

std::vector<std::string> CGraph::keys() const {
  std::vector<std::string> r;
  if (edges)
    for (auto& [k, v] : *edges) r.push_back(k);
  return r;
}

CGraph sigma_diamond() {
  auto m = std::make_shared<std::map<std::string, EdgeP>>();
  auto e = make_edge(nullptr, Lab::diamond(), Lab::diamond(), nullptr, {});
  (*m)[e->key] = e;
  return {m};
}

std::string edge_side_condition(const EPP& src, const Lab& l1, const Lab& l2, const EPP& tgt) {
  const Lab* l[2] = {&l1, &l2};
  if (!src) {
    if (tgt || l1.k != Lab::Diamond || l2.k != Lab::Diamond) return "edge from ⋄ other than the ⋄ loop";
    return "";
  }
  if (src->c[0].is_bot() && src->c[1].is_bot()) return "source ⌜⊥,⊥⌝";
  if (l1.k == Lab::Bot && l2.k == Lab::Bot) return "both labels ⊥";
  for (int j = 0; j < 2; ++j) {
    bool sb = src->c[j].is_bot();
    if (sb != (l[j]->k == Lab::Bot)) return "side " + std::to_string(j + 1) + ": ⊥ source without ⊥ label or vice versa";
    if (!sb && src->c[j].pol != Pol::Prop) return "side " + std::to_string(j + 1) + ": source is not a proponent configuration";
    if (tgt && tgt->c[j].is_bot() && l[j]->k != Lab::Bot) return "side " + std::to_string(j + 1) + ": ⊥ target under a live label";
    if (l[j]->k != Lab::Bot && ((tgt == nullptr) != (l[j]->k == Lab::Diamond)))
      return "side " + std::to_string(j + 1) + ": ⋄ label must go to ⋄ and only there";
  }
  return "";
}

CGraph extend_edge(const CGraph& g, const EdgeP& e) {
  std::string why = edge_side_condition(e->src, e->lab[0], e->lab[1], e->tgt);
  if (!why.empty()) throw WfError(why);
  if (g.contains(e->key)) return g;
  auto m = g.edges ? std::make_shared<std::map<std::string, EdgeP>>(*g.edges)
                   : std::make_shared<std::map<std::string, EdgeP>>();
  (*m)[e->key] = e;
  return {m};
}

CGraph extend(const CGraph& g, const EPP& src, const Lab& l1, const Lab& l2, const EPP& tgt, const SymEnv& phi) {
  return extend_edge(g, make_edge(src, l1, l2, tgt, phi));
}

namespace {

struct Renamer {
  std::map<int, int> loc[2], abs, idx;
  SymMap sym;

  Perm perm(int side) const {
    Perm p;
    p.loc = loc[side];
    p.abs = abs;
    p.idx = idx;
    return p;
  }
  E expr(const E& e, int side) const {
    Perm p = perm(side);
    return apply_perm(p, e, &sym);
  }
  Config conf(const Config& c, int side) const {
    Perm p = perm(side);
    return apply_perm(p, c, &sym);
  }
};

std::map<int, int> inverse(const std::map<int, int>& m) {
  std::map<int, int> r;
  for (auto& [k, v] : m) r[v] = k;
  return r;
}

void collect_side(const EPP& b, int j, Support& s, std::set<int>& syms) {
  if (!b || b->c[j].is_bot()) return;
  s.add(support(b->c[j]));
  for (auto& [l, v] : b->c[j].store) collect_syms(v, syms);
  for (auto& [i, v] : b->c[j].gamma) collect_syms(v, syms);
  collect_syms(b->c[j].exp, syms);
}

std::string pop_text(const Pop& p) {
  return lab_str(p.lab[0]) + "|" + lab_str(p.lab[1]) + "|" + ep_str(p.tgt);
}

}  // namespace

std::vector<Pop> pops(const CGraph& g, const EPP& beta, FreshSupply& fresh) {
  std::vector<Pop> out;
  if (!beta) {
    out.push_back({{Lab::diamond(), Lab::diamond()}, nullptr, {}, "<D>{D}{D}<D>"});
    return out;
  }
  if (!g.edges) return out;
  auto rb = ep_canon(beta);
  std::set<std::string> seen;
  for (auto& [key, e] : *g.edges) {
    if (e->src_key != rb.key) continue;
    auto rs = ep_canon(e->src);
    const Canon& cs = rs.minimal.front();
    // names of the edge outside its source
    Support outside[2];
    std::set<int> osyms;
    for (int j = 0; j < 2; ++j) {
      collect_side(e->tgt, j, outside[j], osyms);
      if (e->lab[j].k == Lab::Ctx) {
        outside[j].add(support(e->lab[j].ctx));
        collect_syms(e->lab[j].ctx, osyms);
      }
    }
    for (auto& a : e->phi.atoms)
      for (auto& [v, k] : a.t.c) osyms.insert(v);

    for (const Canon& cb : rb.minimal) {
      Renamer rn;
      for (int j = 0; j < 2; ++j) {
        auto inv = inverse(cb.loc[j]);
        for (auto& [x, n] : cs.loc[j]) rn.loc[j][x] = inv.at(n);
      }
      {
        auto inv = inverse(cb.abs);
        for (auto& [x, n] : cs.abs) rn.abs[x] = inv.at(n);
        auto invi = inverse(cb.idx);
        for (auto& [x, n] : cs.idx) rn.idx[x] = invi.at(n);
        auto invk = inverse(cb.sym);
        for (auto& [x, n] : cs.sym) rn.sym[x] = invk.at(n);
      }
      // freshen the rest
      for (int j = 0; j < 2; ++j) {
        std::set<int> used = fresh.avoid_loc[j];
        for (auto& [x, y] : rn.loc[j]) used.insert(y);
        int next = 1 << 20;
        for (int l : outside[j].locs) {
          if (rn.loc[j].count(l)) continue;
          while (used.count(next)) ++next;
          rn.loc[j][l] = next;
          used.insert(next);
        }
      }
      for (int j = 0; j < 2; ++j) {
        for (int a : outside[j].abs)
          if (!rn.abs.count(a)) rn.abs[a] = fresh.next_abs++;
        for (int i : outside[j].idx)
          if (!rn.idx.count(i)) rn.idx[i] = ++fresh.next_index;
      }
      for (int k : osyms) {
        if (rn.sym.count(k)) continue;
        bool is_bool = e->phi.vars.count(k) ? e->phi.vars.at(k) : false;
        if (fresh.sigma) {
          rn.sym[k] = fresh.sigma->fresh(is_bool);
        } else {
          rn.sym[k] = k;
        }
      }
      Pop p;
      for (int j = 0; j < 2; ++j) {
        p.lab[j] = e->lab[j];
        if (p.lab[j].k == Lab::Ctx) p.lab[j].ctx = rn.expr(p.lab[j].ctx, j);
      }
      if (e->tgt) {
        Config c[2];
        for (int j = 0; j < 2; ++j) c[j] = e->tgt->c[j].is_bot() ? Config::bot() : rn.conf(e->tgt->c[j], j);
        p.tgt = make_ep(c[0], c[1]);
      }
      for (auto& a : e->phi.atoms) {
        Atom b = a;
        b.t.c.clear();
        for (auto& [v, k] : a.t.c) b.t.c[rn.sym.count(v) ? rn.sym.at(v) : v] += k;
        p.phi.push_back(b);
      }
      p.edge_key = key;
      std::string t = pop_text(p);
      if (seen.insert(t).second) out.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<Pop> pops(const CGraph& g, const EPP& beta) {
  FreshSupply f;
  return pops(g, beta, f);
}

CGraph restrict(const CGraph& g, const EPP& beta) {
  if (!g.edges) return g;
  std::map<std::string, std::vector<EdgeP>> by_src;
  for (auto& [k, e] : *g.edges) by_src[e->src_key].push_back(e);
  auto m = std::make_shared<std::map<std::string, EdgeP>>();
  std::set<std::string> seen;
  std::deque<std::string> q{ep_key(beta)};
  seen.insert(q.front());
  while (!q.empty()) {
    std::string s = q.front();
    q.pop_front();
    for (auto& e : by_src[s]) {
      (*m)[e->key] = e;
      if (seen.insert(e->tgt_key).second) q.push_back(e->tgt_key);
    }
  }
  return {m};
}

EPP invert_ep(const EPP& b) {
  if (!b) return b;
  return make_ep(b->c[1], b->c[0]);
}

CGraph invert(const CGraph& g) {
  auto m = std::make_shared<std::map<std::string, EdgeP>>();
  if (g.edges)
    for (auto& [k, e] : *g.edges) {
      auto n = make_edge(invert_ep(e->src), e->lab[1], e->lab[0], invert_ep(e->tgt), e->phi);
      (*m)[n->key] = n;
    }
  return {m};
}

bool stacks_ok(const StackPair& p) {
  if (!p.k[0] && !p.k[1]) return false;
  if (p.k[0] && p.k[1]) return p.k[0]->size() == p.k[1]->size();
  return true;
}

std::vector<StackPair> enumerate_stacks(const CGraph& g, const EPP& beta, int depth) {
  std::vector<StackPair> out;
  if (!beta) {
    StackPair p;
    p.k[0] = std::vector<E>{};
    p.k[1] = std::vector<E>{};
    out.push_back(p);
    return out;
  }
  if (depth <= 0) return out;
  for (auto& pp : pops(g, beta)) {
    for (auto& rest : enumerate_stacks(g, pp.tgt, depth - 1)) {
      StackPair r;
      bool ok = true;
      for (int j = 0; j < 2; ++j) {
        if (pp.lab[j].k == Lab::Bot || !rest.k[j]) continue;  // ⊥ absorbs
        if (pp.lab[j].k == Lab::Diamond) {
          if (!rest.k[j]->empty()) ok = false;
          r.k[j] = std::vector<E>{};
          continue;
        }
        // the label is the top, the rest lies below it
        std::vector<E> full = *rest.k[j];
        full.push_back(pp.lab[j].ctx);
        r.k[j] = full;
      }
      if (ok) out.push_back(r);
    }
  }
  return out;
}

WfReport check_wf(const CGraph& g) {
  WfReport r;
  auto bad = [&](const std::string& s) {
    r.ok = false;
    r.violations.push_back(s);
  };
  if (!g.contains("<D>{D}{D}<D>")) bad("missing ⋄ loop");
  if (!g.edges) return r;
  std::map<std::string, std::vector<std::string>> succ;
  for (auto& [k, e] : *g.edges) {
    std::string why = edge_side_condition(e->src, e->lab[0], e->lab[1], e->tgt);
    if (!why.empty()) bad(k + ": " + why);
    succ[e->src_key].push_back(e->tgt_key);
  }
  // every entry point reaches ⋄
  std::map<std::string, bool> reach;
  reach["<D>"] = true;
  bool changed = true;
  while (changed) {
    changed = false;
    for (auto& [s, ts] : succ) {
      if (reach[s]) continue;
      for (auto& t : ts)
        if (reach[t]) {
          reach[s] = true;
          changed = true;
          break;
        }
    }
  }
  for (auto& [s, ts] : succ)
    if (!reach[s]) bad("entry point does not reach ⋄: " + s);
  return r;
}

namespace {
std::string dot_escape(const std::string& s) {
  std::string r;
  for (char ch : s) {
    if (ch == '"' || ch == '\\') r += '\\';
    r += ch;
  }
  return r;
}
}  // namespace

std::string export_dot(const CGraph& g) {
  std::ostringstream o;
  o << "digraph sigma {\n";
  std::map<std::string, int> ids;
  std::map<std::string, EPP> rep;
  auto node = [&](const std::string& k, const EPP& b) {
    if (!ids.count(k)) {
      int n = static_cast<int>(ids.size());
      ids[k] = n;
      rep[k] = b;
    }
    return ids[k];
  };
  // nodes are the concrete representatives, so one edge orbit reads as src -> tgt
  if (g.edges)
    for (auto& [k, e] : *g.edges) {
      node(ep_str(e->src), e->src);
      node(ep_str(e->tgt), e->tgt);
    }
  for (auto& [k, n] : ids) o << "  n" << n << " [label=\"" << dot_escape(ep_str(rep[k])) << "\"];\n";
  if (g.edges)
    for (auto& [k, e] : *g.edges)
      o << "  n" << ids[ep_str(e->src)] << " -> n" << ids[ep_str(e->tgt)] << " [label=\""
        << dot_escape("(" + lab_str(e->lab[0]) + ", " + lab_str(e->lab[1]) + ")") << "\"];\n";
  o << "}\n";
  return o.str();
}

}  // namespace pdnf
