#include "pdnf/checker.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <deque>
#include <functional>
#include <mutex>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "pdnf/nominal.hpp"
#include "pdnf/semantics.hpp"

namespace pdnf {

const char* verdict_str(Verdict v) {
  switch (v) {
    case Verdict::Equivalent: return "Equivalent";
    case Verdict::Inequivalent: return "Inequivalent";
    case Verdict::Unknown: return "Unknown";
  }
  return "?";
}

size_t non_diamond_edges(const CGraph& g) {
  size_t n = 0;
  if (g.edges)
    for (auto& [k, e] : *g.edges)
      if (e->src) ++n;
  return n;
}

namespace {

Lin lin_of(const E& e) {
  if (e->kind == Kind::Sym) return Lin::var(e->id);
  return Lin::constant(e->ival);
}

bool base_pos(const E& e) {
  return e->kind == Kind::Sym || (e->kind == Kind::Const && e->ck != ConstKind::Unit);
}

bool label_walk(const E& a, const E& b, std::vector<Atom>& out) {
  if (base_pos(a) && base_pos(b)) {
    if (a->kind == Kind::Const && b->kind == Kind::Const) return a->ck == b->ck && a->ival == b->ival;
    out.push_back({lin_of(a) - lin_of(b), Rel::Eq});
    return true;
  }
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case Kind::Const: return a->ck == b->ck && a->ival == b->ival;
    case Kind::Abs:
    case Kind::Hole: return a->id == b->id && type_eq(a->type, b->type);
    case Kind::Tuple:
      if (a->kids.size() != b->kids.size()) return false;
      for (size_t i = 0; i < a->kids.size(); ++i)
        if (!label_walk(a->kids[i], b->kids[i], out)) return false;
      return true;
    default: return expr_equal(a, b);
  }
}

E concretize(const E& e, const std::map<int, int64_t>& model) {
  if (e->kind == Kind::Sym) {
    auto it = model.find(e->id);
    int64_t v = it == model.end() ? 0 : it->second;
    return e->type && e->type->kind == Type::Bool ? mk_bool(v != 0) : mk_int(v);
  }
  if (e->kids.empty()) return e;
  std::vector<E> ks;
  for (auto& k : e->kids) ks.push_back(concretize(k, model));
  auto n = std::make_shared<Expr>(*e);
  n->kids = std::move(ks);
  return n;
}

std::string pop_text(const Lab* lab, const EPP& tgt) {
  return lab_str(lab[0]) + "|" + lab_str(lab[1]) + "|" + ep_str(tgt);
}

using Clock = std::chrono::steady_clock;

// shared outcome bookkeeping for both games
struct Outcome {
  Verdict verdict = Verdict::Unknown;
  bool done = false;
  std::string unknown;  // first unknown reason seen
  bool unconfirmed = false;
  std::optional<Counterexample> cex;
  CheckStats stats;
  void mark_unknown(const std::string& r) {
    ++stats.unknown_leaves;
    if (unknown.empty()) unknown = r;
  }
};

std::vector<Move> concrete_trace(std::vector<Move> t, const std::map<int, int64_t>& model) {
  for (auto& m : t)
    if (m.val) m.val = concretize(m.val, model);
  return t;
}

// τ* on the proponent sides, every symbolic path; false when a branch is inconclusive
template <class S, class GetConf>
std::vector<S> collapse_sides(const S& st, long k_int, Solver& solver, Outcome& out, GetConf conf) {
  std::vector<S> cur{st};
  for (int j = 0; j < 2; ++j) {
    if (conf(st, j).pol != Pol::Prop) continue;
    std::vector<S> next;
    for (auto& s : cur) {
      const Config& c = conf(s, j);
      for (auto& r : reduce_bounded(s.sigma, RedState{c.store, c.exp}, k_int, solver)) {
        S n = s;
        n.sigma = r.sigma;
        Config& nc = conf(n, j);
        switch (r.kind) {
          case OutKind::Value:
          case OutKind::CallHead:
            nc.store = r.st.store;
            nc.exp = r.st.expr;
            next.push_back(std::move(n));
            break;
          case OutKind::Stuck:
          case OutKind::Diverges:
            nc = Config::bot();
            next.push_back(std::move(n));
            break;
          case OutKind::IntBound: out.mark_unknown("IntBound"); break;
          case OutKind::SolverUnknown: out.mark_unknown("SolverUnknown"); break;
        }
      }
    }
    cur = std::move(next);
  }
  return cur;
}

// the unique visible proponent move of a collapsed configuration
std::optional<Succ> prop_move(const Config& c, const SymEnv& sigma) {
  auto ts = transitions(c, sigma);
  if (ts.size() != 1 || !is_visible(ts[0].move)) return std::nullopt;
  return ts[0];
}

void sync_indices(Config* c) {
  int hi = std::max(c[0].next_index, c[1].next_index);
  for (int j = 0; j < 2; ++j)
    if (!c[j].is_bot()) c[j].next_index = hi;
}

// one-step τ challenge (collapse disabled): the first proponent side with a redex moves
template <class S, class GetConf>
bool tau_challenge(const S& st, Solver& solver, Outcome& out, GetConf conf, std::vector<S>& kids) {
  for (int j = 0; j < 2; ++j) {
    const Config& c = conf(st, j);
    if (c.pol != Pol::Prop) continue;
    SymStep r = sym_step(st.sigma, RedState{c.store, c.exp});
    if (r.kind == StepKind::Value || r.kind == StepKind::CallHead) continue;
    if (r.kind == StepKind::Nonlinear) {
      out.mark_unknown("SolverUnknown");
      return true;
    }
    if (r.kind == StepKind::Stuck) {
      S n = st;
      conf(n, j) = Config::bot();
      kids.push_back(std::move(n));
      return true;
    }
    for (auto& [ns, nst] : r.next) {
      if (r.branched) {
        auto sat = solver.check(ns);
        if (sat.kind == SatKind::Unsat) continue;
        if (sat.kind == SatKind::Unknown) {
          out.mark_unknown("SolverUnknown");
          continue;
        }
      }
      S n = st;
      n.sigma = ns;
      conf(n, j).store = nst.store;
      conf(n, j).exp = nst.expr;
      kids.push_back(std::move(n));
    }
    return true;
  }
  return false;
}

// outcome of comparing the proponent moves of both sides: joint or one-sided successors
struct PropSplit {
  std::vector<SymEnv> joint;
  std::vector<SymEnv> single;  // each yields (C1',⊥) and (⊥,C2')
};

PropSplit split_prop(const Move& m0, const Move& m1, const SymEnv& sigma, Solver& solver, Outcome& out) {
  PropSplit r;
  bool same = m0.kind == m1.kind && (m0.kind != MoveKind::PropCall || m0.abs == m1.abs);
  auto eqs = same ? label_equalities(m0.val, m1.val) : std::nullopt;
  if (!eqs) {
    r.single.push_back(sigma);
    return r;
  }
  auto feasible = [&](const SymEnv& s) {
    auto k = solver.check(s);
    if (k.kind == SatKind::Unknown) out.mark_unknown("SolverUnknown");
    return k.kind == SatKind::Sat;
  };
  SymEnv all = sigma;
  for (auto& a : *eqs) all = assert_constraint(all, a);
  if (eqs->empty() || feasible(all)) r.joint.push_back(all);
  SymEnv prefix = sigma;
  for (auto& a : *eqs) {
    SymEnv d = assert_constraint(prefix, negate(a));
    if (feasible(d)) r.single.push_back(d);
    prefix = assert_constraint(prefix, a);
  }
  return r;
}

// ---------------- the stackless game ----------------

// Visited states keyed without Σ; a state is covered by a visited one with the same
// key and a larger edge set (more pending stacks only add obligations). Unreal
// states may be covered by real ones but not conversely, so that real paths keep
// being explored for counterexample traces.
class MemoTable {
 public:
  using Edges = std::set<std::string>;
  bool covered(const std::string& base, const Edges& e, bool real) const {
    std::lock_guard<std::mutex> g(mu_);
    return covered_locked(base, e, real);
  }
  // false when already covered
  bool insert_if_absent(const std::string& base, const Edges& e, bool real) {
    std::lock_guard<std::mutex> g(mu_);
    if (covered_locked(base, e, real)) return false;
    m_[base].push_back({e, real});
    return true;
  }
  size_t size() const { return m_.size(); }

 private:
  struct Entry {
    Edges edges;
    bool real;
  };
  bool covered_locked(const std::string& base, const Edges& e, bool real) const {
    auto it = m_.find(base);
    if (it == m_.end()) return false;
    for (auto& x : it->second)
      if ((x.real || !real) && std::includes(x.edges.begin(), x.edges.end(), e.begin(), e.end())) return true;
    return false;
  }
  std::unordered_map<std::string, std::vector<Entry>> m_;
  mutable std::mutex mu_;
};

struct Node {
  int parent = -1;
  std::optional<Move> mv;
  PairState ps;
  int calls = 0, rets = 0;
  long taus = 0;
  std::vector<int> new_abs;
};

struct Game {
  const CheckOptions& o;
  E prog[2];
  std::shared_ptr<Solver> solver;
  std::vector<Node> nodes;
  std::deque<int> queue;
  MemoTable memo;
  std::map<std::string, EdgeP> all_edges;
  CGraph global = sigma_diamond();  // every edge orbit met so far
  std::vector<std::string> wf_messages;
  Outcome out;
  Clock::time_point start = Clock::now();

  Game(const CheckOptions& opts, const E& m, const E& n) : o(opts) {
    prog[0] = m;
    prog[1] = n;
    solver = std::make_shared<CachedSolver>(make_solver(opts.solver));
  }

  void add(int parent, std::optional<Move> mv, PairState ps, int calls, int rets, std::vector<int> new_abs = {},
           long taus = 0) {
    Node n;
    n.parent = parent;
    n.mv = std::move(mv);
    n.ps = std::move(ps);
    n.calls = calls;
    n.rets = rets;
    n.taus = taus;
    n.new_abs = std::move(new_abs);
    nodes.push_back(std::move(n));
    queue.push_back(static_cast<int>(nodes.size()) - 1);
  }

  void wf(const CGraph& g) {
    if (!o.check_wf) return;
    ++out.stats.wf_checks;
    auto r = check_wf(g);
    if (!r.ok) {
      ++out.stats.wf_violations;
      for (auto& v : r.violations)
        if (wf_messages.size() < 20) wf_messages.push_back(v);
    }
  }

  void compat(const PairState& ps) {
    if (!o.check_wf) return;
    std::string bad;
    const Config* c = ps.c;
    if (!c[0].is_bot() && !c[1].is_bot()) {
      if (c[0].pol != c[1].pol) bad = "polarity mismatch";
      std::set<int> d0, d1;
      for (auto& [i, v] : c[0].gamma) d0.insert(i);
      for (auto& [i, v] : c[1].gamma) d1.insert(i);
      if (d0 != d1) bad = "index domains differ";
    }
    for (int j = 0; j < 2; ++j)
      if (ps.beta && ps.beta->c[j].is_bot() && !c[j].is_bot()) bad = "live side under a ⊥ entry point";
    if (!ps.beta)
      for (int j = 0; j < 2; ++j)
        if (c[j].pol == Pol::Opp && c[j].cont.k == Cont::Ctx) bad = "pending continuation at ⋄";
    if (!bad.empty()) {
      ++out.stats.compat_violations;
      if (wf_messages.size() < 20) wf_messages.push_back(bad);
    }
  }

  std::vector<Move> trace_to(int id) const {
    std::vector<Move> t;
    for (int x = id; x >= 0; x = nodes[x].parent)
      if (nodes[x].mv) t.push_back(*nodes[x].mv);
    std::reverse(t.begin(), t.end());
    return t;
  }

  void failure(int id, const PairState& ps, int w) {
    auto sat = solver->check(ps.sigma);
    if (sat.kind != SatKind::Sat) {
      out.unconfirmed = true;
      ++out.stats.unconfirmed;
      return;
    }
    Counterexample cx;
    cx.trace = concrete_trace(trace_to(id), sat.model);
    cx.witness = w;
    if (confirm_counterexample(prog[0], prog[1], cx, std::max<long>(o.k_int * 100, 100000))) {
      out.cex = cx;
      out.verdict = Verdict::Inequivalent;
      out.done = true;
    } else {
      out.unconfirmed = true;
      ++out.stats.unconfirmed;
    }
  }

  std::string key(const PairState& ps) {
    PairState b = ps;
    b.sigma_g = {};
    b.real = true;
    return pair_key(b, *solver, KeyOpts{o.normalize, !o.gc});
  }
  static MemoTable::Edges edge_set(const PairState& ps) {
    auto k = ps.sigma_g.keys();
    return {k.begin(), k.end()};
  }

  void settle(int id, PairState ps) {
    const Node& nd = nodes[id];
    if (ps.c[0].is_bot() && ps.c[1].is_bot()) return;
    for (int j = 0; j < 2; ++j)
      if (ps.c[j].is_bot() && terminated(ps.c[1 - j])) {
        failure(id, ps, 1 - j);
        return;
      }
    if (o.gc) ps = gc(ps);
    if (o.widen && ps.beta) {
      ps.sigma_g = restrict(global, ps.beta);
      wf(ps.sigma_g);
    }
    if (o.memo) {
      if (!memo.insert_if_absent(key(ps), edge_set(ps), ps.real)) {
        ++out.stats.memo_hits;
        return;
      }
      if (o.name_reuse && !nd.new_abs.empty()) {
        std::set<int> old;
        for (auto& c : ps.c)
          for (auto& [a, t] : c.A) old.insert(a);
        for (int a : nd.new_abs) old.erase(a);
        for (int a : nd.new_abs)
          for (int a2 : old) {
            auto r = name_reuse(ps, a, a2);
            if (!r) continue;
            PairState g = o.gc ? gc(*r) : *r;
            if (memo.covered(key(g), edge_set(g), g.real)) {
              ++out.stats.nr_hits;
              return;
            }
          }
      }
    }
    if (o.separation) {
      if (auto comps = separate(ps)) {
        ++out.stats.separations;
        for (auto& c : *comps) add(id, std::nullopt, c, nd.calls, nd.rets);
        return;
      }
    }
    if (nd.calls > o.k_call) {
      out.mark_unknown("CallBound");
      return;
    }
    if (nd.rets > o.k_ret) {
      out.mark_unknown("RetBound");
      return;
    }
    compat(ps);
    out.stats.max_sigma = std::max(out.stats.max_sigma, ps.sigma_g.size());
    int live = ps.c[0].is_bot() ? 1 : 0;
    if (ps.c[live].pol == Pol::Opp)
      opp_challenges(id, ps);
    else
      prop_challenges(id, ps, live);
  }

  void opp_challenges(int id, const PairState& ps) {
    const Node& nd = nodes[id];
    int calls = nd.calls, rets = nd.rets;
    int live = ps.c[0].is_bot() ? 1 : 0;
    const Config& lc = ps.c[live];
    if (lc.cont.k == Cont::Chi) throw ChiError("opponent challenge at a χ configuration");
    if (lc.cont.k == Cont::Ctx) {
      SymEnv s = ps.sigma;
      int na = ps.next_abs;
      TypePattern p = ulpatt_type(hole_type_of(lc.cont.ctx), na, {}, s);
      PairState n = ps;
      n.sigma = s;
      n.next_abs = na;
      for (auto& c : n.c) {
        if (c.is_bot()) continue;
        c.pol = Pol::Prop;
        c.exp = plug(c.cont.ctx, p.val);
        c.cont = Cont::top();
        for (auto& [a, t] : p.names) c.A[a] = t;
      }
      add(id, Move{MoveKind::OpRet, -1, -1, p.val}, n, calls, rets + 1);
    }
    for (auto& [i, f] : lc.gamma) {
      SymEnv s = ps.sigma;
      int na = ps.next_abs;
      TypePattern p = ulpatt_type(value_type(f, {})->args[0], na, {}, s);
      PairState n = ps;
      n.sigma = s;
      n.next_abs = na;
      Lab lab[2];
      for (int j = 0; j < 2; ++j) {
        Config& c = n.c[j];
        if (c.is_bot()) {
          lab[j] = Lab::bot();
          continue;
        }
        lab[j] = Lab::from_cont(c.cont);
        c.pol = Pol::Prop;
        c.exp = mk_app(c.gamma.at(i), p.val);
        c.cont = Cont::top();
        for (auto& [a, t] : p.names) c.A[a] = t;
      }
      EPP nb = make_ep(n.c[0], n.c[1]);
      EdgeP e = make_edge(nb, lab[0], lab[1], ps.beta, s);
      if (all_edges.emplace(e->key, e).second) global = extend_edge(global, e);
      n.sigma_g = extend_edge(ps.sigma_g, e);
      wf(n.sigma_g);
      n.frames.push_back({{lab[0], lab[1]}, ps.beta});
      n.beta = nb;
      std::vector<int> fresh;
      for (auto& [a, t] : p.names) fresh.push_back(a);
      add(id, Move{MoveKind::OpCall, -1, i, p.val}, n, calls, rets + 1, fresh);
    }
  }

  void prop_challenges(int id, const PairState& ps, int live) {
    std::optional<Succ> s[2];
    for (int j = 0; j < 2; ++j) {
      if (ps.c[j].is_bot()) continue;
      s[j] = prop_move(ps.c[j], ps.sigma);
      if (!s[j]) {
        out.mark_unknown("SolverUnknown");
        return;
      }
    }
    if (s[0] && s[1]) {
      PropSplit sp = split_prop(s[0]->move, s[1]->move, ps.sigma, *solver, out);
      for (auto& sg : sp.joint) proceed(id, ps, s, {true, true}, sg);
      for (auto& sg : sp.single) {
        proceed(id, ps, s, {true, false}, sg);
        proceed(id, ps, s, {false, true}, sg);
      }
    } else {
      std::array<bool, 2> on{live == 0, live == 1};
      proceed(id, ps, s, on, ps.sigma);
    }
  }

  void proceed(int id, const PairState& ps, const std::optional<Succ>* s, std::array<bool, 2> on, const SymEnv& sg) {
    const Node& nd = nodes[id];
    int calls = nd.calls, rets = nd.rets;
    PairState n = ps;
    n.sigma = sg;
    int w = on[0] ? 0 : 1;
    for (int j = 0; j < 2; ++j) n.c[j] = on[j] ? s[j]->conf : Config::bot();
    sync_indices(n.c);
    Move mv = s[w]->move;
    if (mv.kind == MoveKind::PropCall) {
      add(id, mv, n, calls + 1, rets);
      return;
    }
    // PropRet: instantiate χ with every stack the entry point admits
    struct Cand {
      Lab lab[2];
      EPP tgt;
      std::vector<Atom> phi;
      bool real;
    };
    std::vector<Cand> cands;
    if (!n.beta) {
      cands.push_back({{Lab::diamond(), Lab::diamond()}, nullptr, {}, n.real});
    } else {
      std::string real_text;
      if (n.real && !n.frames.empty()) {
        const Frame& f = n.frames.back();
        cands.push_back({{f.lab[0], f.lab[1]}, f.tgt, {}, true});
        real_text = pop_text(f.lab, f.tgt);
      }
      FreshSupply fs;
      for (int j = 0; j < 2; ++j)
        for (auto& [l, v] : n.c[j].store) fs.avoid_loc[j].insert(l);
      fs.next_abs = n.next_abs;
      fs.next_index = std::max(n.c[0].next_index, n.c[1].next_index);
      fs.sigma = &n.sigma;
      auto ps_ = pops(n.sigma_g, n.beta, fs);
      n.next_abs = fs.next_abs;
      for (auto& c : n.c)
        if (!c.is_bot()) c.next_index = fs.next_index;
      for (auto& p : ps_) {
        if (pop_text(p.lab, p.tgt) == real_text) continue;
        cands.push_back({{p.lab[0], p.lab[1]}, p.tgt, p.phi, false});
      }
    }
    for (auto& cd : cands) {
      PairState m = n;
      bool ok = true;
      for (int j = 0; j < 2; ++j) {
        if (m.c[j].is_bot()) continue;
        if (cd.lab[j].k == Lab::Bot) {
          ok = false;
          break;
        }
        m.c[j] = plug_chi(m.c[j], lab_cont(cd.lab[j]));
      }
      if (!ok) continue;
      for (auto& a : cd.phi) m.sigma = assert_constraint(m.sigma, a);
      if (!cd.phi.empty()) {
        auto k = solver->check(m.sigma);
        if (k.kind == SatKind::Unsat) continue;
        if (k.kind == SatKind::Unknown) {
          out.mark_unknown("SolverUnknown");
          continue;
        }
      }
      m.beta = cd.tgt;
      m.sigma_g = restrict(n.sigma_g, cd.tgt);
      wf(m.sigma_g);
      if (cd.real && n.beta)
        m.frames.pop_back();
      else if (!cd.real)
        m.frames.clear();
      m.real = cd.real;
      add(id, mv, m, calls, rets);
    }
  }

  void expand(int id) {
    ++out.stats.nodes;
    PairState ps = nodes[id].ps;
    if (!o.beta) {
      std::vector<PairState> kids;
      if (tau_challenge(ps, *solver, out, [](auto& s, int j) -> auto& { return s.c[j]; }, kids)) {
        if (nodes[id].taus >= o.k_int) {
          out.mark_unknown("IntBound");
          return;
        }
        for (auto& k : kids) add(id, std::nullopt, k, nodes[id].calls, nodes[id].rets, {}, nodes[id].taus + 1);
        return;
      }
      settle(id, ps);
      return;
    }
    for (auto& s : collapse_sides(ps, o.k_int, *solver, out, [](auto& s, int j) -> auto& { return s.c[j]; })) {
      settle(id, std::move(s));
      if (out.done) return;
    }
  }

  void run() {
    PairState init;
    init.c[0] = Config::prop(prog[0]);
    init.c[1] = Config::prop(prog[1]);
    init.sigma_g = sigma_diamond();
    init.next_abs = o.name_offset;
    init.sigma.next = o.name_offset;
    all_edges = *init.sigma_g.edges;
    add(-1, std::nullopt, init, 0, 0);
    while (!queue.empty() && !out.done) {
      if (o.timeout_s > 0 && std::chrono::duration<double>(Clock::now() - start).count() > o.timeout_s) {
        out.unknown = "Timeout";
        return;
      }
      if (static_cast<size_t>(out.stats.nodes) >= o.max_nodes) {
        out.unknown = "NodeLimit";
        return;
      }
      int id = queue.front();
      queue.pop_front();
      expand(id);
    }
  }
};

CheckResult finish(Outcome& out, const std::string& engine, Clock::time_point start) {
  CheckResult r;
  r.engine = engine;
  r.stats = out.stats;
  if (out.done && out.verdict == Verdict::Inequivalent) {
    r.verdict = Verdict::Inequivalent;
    r.cex = out.cex;
  } else if (!out.unknown.empty() || out.unconfirmed) {
    r.verdict = Verdict::Unknown;
    r.reason = out.unconfirmed ? "Unconfirmed" : out.unknown;
    if (out.unknown == "Timeout" || out.unknown == "NodeLimit") r.reason = out.unknown;
  } else {
    r.verdict = Verdict::Equivalent;
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return r;
}

}  // namespace

std::optional<std::vector<Atom>> label_equalities(const E& a, const E& b) {
  std::vector<Atom> out;
  if (!label_walk(a, b, out)) return std::nullopt;
  return out;
}

bool confirm_counterexample(const E& m, const E& n, Counterexample& cx, long k_int) {
  const E prog[2] = {m, n};
  for (Engine en : {Engine::Stackless, Engine::Stacked}) {
    auto w = replay(cx.trace, prog[cx.witness], en, k_int);
    if (!w.accepted || !w.terminated) return false;
    auto o = replay(cx.trace, prog[1 - cx.witness], en, k_int);
    if (o.accepted && o.terminated) return false;
    if (en == Engine::Stackless) {
      cx.reject_step = o.accepted ? static_cast<int>(cx.trace.size()) : o.reject_step;
      cx.reason = o.accepted ? "trace accepted without reaching top level" : o.reason;
    }
  }
  return true;
}

namespace {
void same_type(const E& m, const E& n) {
  TypeP a = typecheck(m), b = typecheck(n);
  if (!type_eq(a, b)) throw TypeError("programs have different types: " + type_str(a) + " vs " + type_str(b));
}
}  // namespace

std::vector<std::pair<SymEnv, Config>> match_weak(const Config& c, const Move& eta, const SymEnv& sigma, long k_int,
                                                  Solver& solver) {
  std::vector<std::pair<SymEnv, Config>> out;
  if (c.is_bot() || eta.kind == MoveKind::Tau) return out;
  if (c.pol == Pol::Opp) {
    if (is_prop_move(eta) || c.cont.k == Cont::Chi) return out;
    Config n = c;
    n.pol = Pol::Prop;
    if (eta.kind == MoveKind::OpRet) {
      if (c.cont.k != Cont::Ctx) return out;
      n.exp = plug(c.cont.ctx, eta.val);
    } else {
      auto it = c.gamma.find(eta.index);
      if (it == c.gamma.end()) return out;
      n.exp = mk_app(it->second, eta.val);
    }
    n.cont = Cont::top();
    std::function<void(const E&)> names = [&](const E& x) {
      if (x->kind == Kind::Abs) n.A[x->id] = x->type;
      for (auto& k : x->kids) names(k);
    };
    names(eta.val);
    out.emplace_back(sigma, n);
    return out;
  }
  if (!is_prop_move(eta)) return out;
  for (auto& r : reduce_bounded(sigma, RedState{c.store, c.exp}, k_int, solver)) {
    if (r.kind != OutKind::Value && r.kind != OutKind::CallHead) continue;
    Config x = c;
    x.store = r.st.store;
    x.exp = r.st.expr;
    auto mv = prop_move(x, r.sigma);
    if (!mv || mv->move.kind != eta.kind) continue;
    if (eta.kind == MoveKind::PropCall && mv->move.abs != eta.abs) continue;
    auto eqs = label_equalities(mv->move.val, eta.val);
    if (!eqs) continue;
    SymEnv s = r.sigma;
    for (auto& a : *eqs) s = assert_constraint(s, a);
    if (!eqs->empty() && solver.check(s).kind != SatKind::Sat) continue;
    out.emplace_back(s, mv->conf);
  }
  return out;
}

CheckResult check_equivalence(const E& m, const E& n, const CheckOptions& o) {
  same_type(m, n);
  auto start = Clock::now();
  Game g(o, m, n);
  g.run();
  CheckResult r = finish(g.out, "pdnf", start);
  auto mp = std::make_shared<std::map<std::string, EdgeP>>(g.all_edges);
  r.sigma = CGraph{mp};
  r.wf_messages = g.wf_messages;
  if (r.verdict == Verdict::Unknown && r.reason == "Unconfirmed" && o.fallback) {
    if (o.name_reuse || o.widen) {
      CheckOptions o2 = o;
      o2.name_reuse = false;
      o2.widen = false;
      o2.fallback = false;
      CheckResult r2 = check_equivalence(m, n, o2);
      if (r2.verdict == Verdict::Inequivalent) {
        r.verdict = r2.verdict;
        r.cex = r2.cex;
        r.reason.clear();
        r.engine = "pdnf(no-name-reuse)";
      }
    }
    if (r.verdict == Verdict::Unknown) {
      CheckResult r3 = check_stacked(m, n, o);
      if (r3.verdict == Verdict::Inequivalent) {
        r.verdict = r3.verdict;
        r.cex = r3.cex;
        r.reason.clear();
        r.engine = "stacked";
      }
    }
    r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  }
  return r;
}

// ---------------- the stacked game ----------------

namespace {

struct SState {
  Config c[2];
  std::vector<E> stack[2];
  SymEnv sigma;
  int next_abs = 0;
};

struct SNode {
  int parent = -1;
  std::optional<Move> mv;
  SState st;
  int calls = 0, rets = 0;
  long taus = 0;
};

struct StackedGame {
  const CheckOptions& o;
  E prog[2];
  std::shared_ptr<Solver> solver;
  std::vector<SNode> nodes;
  std::deque<int> queue;
  std::unordered_set<std::string> memo;
  Outcome out;
  Clock::time_point start = Clock::now();

  StackedGame(const CheckOptions& opts, const E& m, const E& n) : o(opts) {
    prog[0] = m;
    prog[1] = n;
    solver = std::make_shared<CachedSolver>(make_solver(opts.solver));
  }

  void add(int parent, std::optional<Move> mv, SState st, int calls, int rets, long taus = 0) {
    nodes.push_back({parent, std::move(mv), std::move(st), calls, rets, taus});
    queue.push_back(static_cast<int>(nodes.size()) - 1);
  }

  std::string key(const SState& st) {
    std::set<int> live;
    for (int j = 0; j < 2; ++j) {
      const Config& c = st.c[j];
      if (c.is_bot()) continue;
      for (auto& [i, v] : c.gamma) collect_syms(v, live);
      for (auto& [l, v] : c.store) collect_syms(v, live);
      if (c.pol == Pol::Prop) collect_syms(c.exp, live);
      if (c.pol == Pol::Opp && c.cont.k == Cont::Ctx) collect_syms(c.cont.ctx, live);
      for (auto& e : st.stack[j]) collect_syms(e, live);
    }
    SymEnv sig = simplify(st.sigma, live, *solver);
    std::map<int, std::string> shapes;
    for (int j = 0; j < 2; ++j)
      for (auto& [i, v] : st.c[j].gamma) shapes[i] += std::to_string(j) + shape(v);
    auto r = canon_search(
        {shapes.begin(), shapes.end()},
        [&](Canon& k, const std::vector<int>& order) {
          for (int j = 0; j < 2; ++j) {
            const Config& c = st.c[j];
            if (c.is_bot()) {
              k.lit("B");
              continue;
            }
            k.lit(c.pol == Pol::Prop ? "P" : "O");
            k.gamma(c.gamma, j, order);
            if (c.pol == Pol::Prop)
              k.expr(c.exp, j);
            else
              k.cont(c.cont, j);
            k.lit("K");
            for (auto& e : st.stack[j]) {
              k.expr(e, j);
              k.lit(";");
            }
            k.add_slot(&c.store, j);
            k.flush();
          }
        },
        [&](Canon& k) { serialize_atoms(k, sig.atoms); });
    return r.key;
  }

  std::vector<Move> trace_to(int id) const {
    std::vector<Move> t;
    for (int x = id; x >= 0; x = nodes[x].parent)
      if (nodes[x].mv) t.push_back(*nodes[x].mv);
    std::reverse(t.begin(), t.end());
    return t;
  }

  static bool done_top(const SState& s, int j) {
    return s.c[j].pol == Pol::Opp && s.c[j].cont.k == Cont::Top && s.stack[j].empty();
  }

  void settle(int id, SState st) {
    const SNode& nd = nodes[id];
    if (st.c[0].is_bot() && st.c[1].is_bot()) return;
    for (int j = 0; j < 2; ++j)
      if (st.c[j].is_bot() && done_top(st, 1 - j)) {
        auto sat = solver->check(st.sigma);
        Counterexample cx;
        if (sat.kind == SatKind::Sat) {
          cx.trace = concrete_trace(trace_to(id), sat.model);
          cx.witness = 1 - j;
          if (confirm_counterexample(prog[0], prog[1], cx, std::max<long>(o.k_int * 100, 100000))) {
            out.cex = cx;
            out.verdict = Verdict::Inequivalent;
            out.done = true;
            return;
          }
        }
        out.unconfirmed = true;
        ++out.stats.unconfirmed;
        return;
      }
    for (int j = 0; j < 2; ++j)
      if (o.gc) st.c[j] = gc(st.c[j]);
    if (o.memo && !memo.insert(key(st)).second) {
      ++out.stats.memo_hits;
      return;
    }
    if (nd.calls > o.k_call) {
      out.mark_unknown("CallBound");
      return;
    }
    if (nd.rets > o.k_ret) {
      out.mark_unknown("RetBound");
      return;
    }
    int live = st.c[0].is_bot() ? 1 : 0;
    if (st.c[live].pol == Pol::Opp)
      opp(id, st);
    else
      prop(id, st, live);
  }

  void opp(int id, const SState& st) {
    int calls = nodes[id].calls, rets = nodes[id].rets;
    int live = st.c[0].is_bot() ? 1 : 0;
    const Config& lc = st.c[live];
    if (lc.cont.k == Cont::Ctx) {
      SState n = st;
      int na = st.next_abs;
      TypePattern p = ulpatt_type(hole_type_of(lc.cont.ctx), na, {}, n.sigma);
      n.next_abs = na;
      for (auto& c : n.c) {
        if (c.is_bot()) continue;
        c.pol = Pol::Prop;
        c.exp = plug(c.cont.ctx, p.val);
        c.cont = Cont::top();
        for (auto& [a, t] : p.names) c.A[a] = t;
      }
      add(id, Move{MoveKind::OpRet, -1, -1, p.val}, n, calls, rets + 1);
    }
    for (auto& [i, f] : lc.gamma) {
      SState n = st;
      int na = st.next_abs;
      TypePattern p = ulpatt_type(value_type(f, {})->args[0], na, {}, n.sigma);
      n.next_abs = na;
      for (int j = 0; j < 2; ++j) {
        Config& c = n.c[j];
        if (c.is_bot()) continue;
        n.stack[j] = push_cont(c.cont, n.stack[j]);
        c.pol = Pol::Prop;
        c.exp = mk_app(c.gamma.at(i), p.val);
        c.cont = Cont::top();
        for (auto& [a, t] : p.names) c.A[a] = t;
      }
      add(id, Move{MoveKind::OpCall, -1, i, p.val}, n, calls, rets + 1);
    }
  }

  void prop(int id, const SState& st, int live) {
    std::optional<Succ> s[2];
    for (int j = 0; j < 2; ++j) {
      if (st.c[j].is_bot()) continue;
      s[j] = prop_move(st.c[j], st.sigma);
      if (!s[j]) {
        out.mark_unknown("SolverUnknown");
        return;
      }
    }
    if (s[0] && s[1]) {
      PropSplit sp = split_prop(s[0]->move, s[1]->move, st.sigma, *solver, out);
      for (auto& sg : sp.joint) proceed(id, st, s, {true, true}, sg);
      for (auto& sg : sp.single) {
        proceed(id, st, s, {true, false}, sg);
        proceed(id, st, s, {false, true}, sg);
      }
    } else {
      proceed(id, st, s, {live == 0, live == 1}, st.sigma);
    }
  }

  void proceed(int id, const SState& st, const std::optional<Succ>* s, std::array<bool, 2> on, const SymEnv& sg) {
    int calls = nodes[id].calls, rets = nodes[id].rets;
    SState n = st;
    n.sigma = sg;
    int w = on[0] ? 0 : 1;
    for (int j = 0; j < 2; ++j) {
      if (!on[j]) {
        n.c[j] = Config::bot();
        n.stack[j].clear();
        continue;
      }
      n.c[j] = s[j]->conf;
      if (s[j]->move.kind == MoveKind::PropRet) {
        if (n.stack[j].empty()) {
          n.c[j] = plug_chi(n.c[j], Cont::top());
        } else {
          n.c[j] = plug_chi(n.c[j], Cont::of(n.stack[j].back()));
          n.stack[j].pop_back();
        }
      }
    }
    sync_indices(n.c);
    Move mv = s[w]->move;
    add(id, mv, n, calls + (mv.kind == MoveKind::PropCall ? 1 : 0), rets);
  }

  void expand(int id) {
    ++out.stats.nodes;
    SState st = nodes[id].st;
    if (!o.beta) {
      std::vector<SState> kids;
      if (tau_challenge(st, *solver, out, [](auto& s, int j) -> auto& { return s.c[j]; }, kids)) {
        if (nodes[id].taus >= o.k_int) {
          out.mark_unknown("IntBound");
          return;
        }
        for (auto& k : kids) add(id, std::nullopt, k, nodes[id].calls, nodes[id].rets, nodes[id].taus + 1);
        return;
      }
      settle(id, st);
      return;
    }
    for (auto& s : collapse_sides(st, o.k_int, *solver, out, [](auto& s, int j) -> auto& { return s.c[j]; })) {
      settle(id, std::move(s));
      if (out.done) return;
    }
  }

  void run() {
    SState init;
    init.c[0] = Config::prop(prog[0]);
    init.c[1] = Config::prop(prog[1]);
    init.next_abs = o.name_offset;
    init.sigma.next = o.name_offset;
    add(-1, std::nullopt, init, 0, 0);
    while (!queue.empty() && !out.done) {
      if (o.timeout_s > 0 && std::chrono::duration<double>(Clock::now() - start).count() > o.timeout_s) {
        out.unknown = "Timeout";
        return;
      }
      if (static_cast<size_t>(out.stats.nodes) >= o.max_nodes) {
        out.unknown = "NodeLimit";
        return;
      }
      int id = queue.front();
      queue.pop_front();
      expand(id);
    }
  }
};

}  // namespace

CheckResult check_stacked(const E& m, const E& n, const CheckOptions& o) {
  same_type(m, n);
  auto start = Clock::now();
  StackedGame g(o, m, n);
  g.run();
  CheckResult r = finish(g.out, "stacked", start);
  r.sigma = sigma_diamond();
  return r;
}

std::optional<std::string> contradiction(const E& m, const E& n, const CheckResult& pdnf, const CheckResult& stacked,
                                         long k_int) {
  if (pdnf.verdict == Verdict::Inequivalent && pdnf.cex) {
    const E prog[2] = {m, n};
    bool both = true;
    for (int j = 0; j < 2; ++j) {
      auto r = replay(pdnf.cex->trace, prog[j], Engine::Stacked, k_int);
      both = both && r.accepted && r.terminated;
    }
    if (both) return std::string("both programs accept the reported trace on the stacked LTS");
  }
  if (pdnf.verdict == Verdict::Unknown || stacked.verdict == Verdict::Unknown) return std::nullopt;
  if (pdnf.verdict != stacked.verdict)
    return std::string("pdnf ") + verdict_str(pdnf.verdict) + ", stacked " + verdict_str(stacked.verdict);
  return std::nullopt;
}

Differential differential(const E& m, const E& n, const CheckOptions& o) {
  CheckOptions q = o;
  q.fallback = false;  // keep the two engines apart
  Differential d;
  d.pdnf = check_equivalence(m, n, q);
  d.stacked = check_stacked(m, n, q);
  if (auto c = contradiction(m, n, d.pdnf, d.stacked, std::max<long>(o.k_int * 100, 100000))) {
    d.contradiction = true;
    d.detail = *c;
  }
  return d;
}

std::string result_json(const CheckResult& r) {
  using nlohmann::json;
  json j;
  j["verdict"] = verdict_str(r.verdict);
  if (!r.reason.empty()) j["reason"] = r.reason;
  j["engine"] = r.engine;
  j["seconds"] = r.seconds;
  j["stats"] = {{"nodes", r.stats.nodes},
                {"memo_hits", r.stats.memo_hits},
                {"name_reuse_hits", r.stats.nr_hits},
                {"separations", r.stats.separations},
                {"unknown_leaves", r.stats.unknown_leaves},
                {"unconfirmed", r.stats.unconfirmed},
                {"max_sigma", r.stats.max_sigma}};
  json edges = json::array();
  if (r.sigma.edges)
    for (auto& [k, e] : *r.sigma.edges) {
      if (!e->src) continue;
      edges.push_back({{"src", ep_str(e->src)},
                       {"labels", {lab_str(e->lab[0]), lab_str(e->lab[1])}},
                       {"tgt", ep_str(e->tgt)}});
    }
  j["sigma"] = {{"edges", edges}, {"non_diamond_edges", non_diamond_edges(r.sigma)}};
  if (r.cex) {
    json t = json::array();
    for (auto& m : r.cex->trace) t.push_back(move_str(m));
    j["counterexample"] = {{"trace", t},
                           {"witness", r.cex->witness == 0 ? "left" : "right"},
                           {"reject_step", r.cex->reject_step},
                           {"reason", r.cex->reason}};
  }
  return j.dump(2);
}

}  // namespace pdnf
