#include "testkit.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include "pdnf/nominal.hpp"

namespace pdnf::testkit {

namespace {

TypeP uu() { return t_arrow(t_unit(), t_unit()); }

bool cod_is(const TypeP& f, const TypeP& t) { return f->kind == Type::Arrow && type_eq(f->args[1], t); }

}  // namespace

TypeP Gen::base_type() {
  switch (pick(3)) {
    case 0: return t_int();
    case 1: return t_bool();
    default: return t_unit();
  }
}

TypeP Gen::program_type() {
  switch (pick(9)) {
    case 0: return t_int();
    case 1: return t_bool();
    case 2: return t_arrow(t_unit(), t_int());
    case 3: return t_arrow(t_int(), t_int());
    case 4: return t_arrow(uu(), t_int());
    case 5: return t_arrow(uu(), t_unit());
    case 6: return t_arrow(t_arrow(t_int(), t_unit()), t_unit());
    case 7: return t_arrow(t_unit(), t_arrow(t_unit(), t_int()));
    default: return t_arrow(t_arrow(t_unit(), t_int()), t_bool());
  }
}

E Gen::int_lit() {
  int64_t v = pick(5) - 1;
  if (ints_++ == mutate_at) v += 1;
  return mk_int(v);
}

E Gen::leaf(const TypeP& t) {
  std::vector<const Var*> cands;
  for (auto& v : vars_)
    if (type_eq(v.t, t)) cands.push_back(&v);
  for (auto& r : refs_)
    if (type_eq(r.t, t)) cands.push_back(&r);
  if (!cands.empty() && coin(0.7)) {
    const Var* v = cands[pick(static_cast<int>(cands.size()))];
    bool is_ref = v >= refs_.data() && v < refs_.data() + refs_.size();
    return is_ref ? mk_deref(loc_var(v->x)) : mk_var(v->x);
  }
  switch (t->kind) {
    case Type::Int: return int_lit();
    case Type::Bool: return mk_bool(coin());
    case Type::Unit: return mk_unit();
    case Type::Arrow: {
      std::string x = fresh("x");
      vars_.push_back({x, t->args[0]});
      E body = leaf(t->args[1]);
      vars_.pop_back();
      return mk_lam("", x, body, t);
    }
    case Type::Product: {
      std::vector<E> es;
      for (auto& a : t->args) es.push_back(leaf(a));
      return mk_tuple(es);
    }
  }
  return mk_unit();
}

E Gen::expr(const TypeP& t, int size) {
  if (size <= 1) return leaf(t);
  int s = size - 1;
  // state shared across calls of the function being built
  if (t->kind == Type::Arrow && coin(0.35)) {
    std::string r = fresh("r");
    TypeP u = coin(0.7) ? t_int() : t_bool();
    E init = u->kind == Type::Int ? int_lit() : mk_bool(coin());
    refs_.push_back({r, u});
    std::string x = fresh("x");
    vars_.push_back({x, t->args[0]});
    E body = expr(t->args[1], s);
    vars_.pop_back();
    refs_.pop_back();
    return mk_new(r, init, mk_lam("", x, body, t));
  }
  std::vector<const Var*> callables;
  for (auto& v : vars_)
    if (cod_is(v.t, t)) callables.push_back(&v);
  if (!callables.empty() && coin(0.3)) {
    Var f = *callables[pick(static_cast<int>(callables.size()))];
    E arg = expr(f.t->args[0], s / 2);
    E call = mk_app(mk_var(f.x), arg);
    if (coin(0.5) || !t->args.empty()) return call;
    return mk_seq(expr(t_unit(), s - s / 2), call);
  }
  switch (pick(8)) {
    case 0: {
      TypeP u = coin(0.7) ? base_type() : (coin() ? uu() : t_arrow(t_unit(), t_int()));
      std::string x = fresh("x");
      E e1 = expr(u, s / 2);
      vars_.push_back({x, u});
      E e2 = expr(t, s - s / 2);
      vars_.pop_back();
      return mk_let({x}, e1, e2);
    }
    case 1: {
      std::string r = fresh("r");
      TypeP u = coin() ? t_int() : t_bool();
      E init = u->kind == Type::Int ? int_lit() : mk_bool(coin());
      refs_.push_back({r, u});
      E body = expr(t, s);
      refs_.pop_back();
      return mk_new(r, init, body);
    }
    case 2: return mk_seq(expr(t_unit(), s / 2), expr(t, s - s / 2));
    case 3: return mk_if(expr(t_bool(), s / 3), expr(t, s / 3), expr(t, s - 2 * (s / 3)));
    case 4: {
      std::vector<const Var*> fs;
      for (auto& v : vars_)
        if (cod_is(v.t, t)) fs.push_back(&v);
      if (!fs.empty()) {
        Var f = *fs[pick(static_cast<int>(fs.size()))];
        E arg = expr(f.t->args[0], s);
        return mk_app(mk_var(f.x), arg);
      }
      break;
    }
    default: break;
  }
  switch (t->kind) {
    case Type::Int:
      if (coin(0.3) && !refs_.empty()) {
        for (auto& r : refs_)
          if (r.t->kind == Type::Int && coin()) return mk_deref(loc_var(r.x));
      }
      return mk_op(coin() ? Prim::Add : Prim::Sub, {expr(t_int(), s / 2), expr(t_int(), s - s / 2)});
    case Type::Bool:
      if (coin(0.2)) return mk_op(Prim::Not, {expr(t_bool(), s)});
      return mk_op(coin() ? Prim::Lt : Prim::Eq, {expr(t_int(), s / 2), expr(t_int(), s - s / 2)});
    case Type::Unit: {
      if (!refs_.empty() && coin(0.6)) {
        Var r = refs_[pick(static_cast<int>(refs_.size()))];
        E v = expr(r.t, s);
        return mk_assign(loc_var(r.x), v);
      }
      return leaf(t);
    }
    case Type::Arrow: {
      std::string x = fresh("x");
      vars_.push_back({x, t->args[0]});
      E body = expr(t->args[1], s);
      vars_.pop_back();
      return mk_lam("", x, body, t);
    }
    case Type::Product: return leaf(t);
  }
  return leaf(t);
}

Program gen_program(uint64_t seed, int size, const TypeP& t, int mutate_at) {
  for (uint64_t attempt = 0;; ++attempt) {
    Gen g(seed * 7919 + attempt);
    g.mutate_at = mutate_at;
    TypeP drawn = g.program_type();  // drawn either way, so a given type keeps the stream aligned
    TypeP ty = t ? t : drawn;
    E e = g.expr(ty, size);
    try {
      E inferred = infer(e);
      TypeP got = typecheck(inferred);
      if (type_eq(got, ty)) return {inferred, ty};
    } catch (const TypeError&) {
    }
  }
}

std::pair<Program, Program> gen_pair(uint64_t seed, int size) {
  std::mt19937_64 r(seed ^ 0x9e3779b97f4a7c15ULL);
  Program a = gen_program(seed, size);
  if (r() % 3 == 0) {
    Program b = gen_program(seed + 1000003, size, a.t);
    return {a, b};
  }
  int ints = 0;
  // the literal count is re-derived by regenerating with an out-of-range mutation index
  for (int k = 0; k < 32; ++k) {
    Program m = gen_program(seed, size, a.t, k);
    if (!alpha_equal(m.e, a.e)) ints = k + 1;
  }
  int at = ints ? static_cast<int>(r() % static_cast<uint64_t>(ints)) : -1;
  return {a, gen_program(seed, size, a.t, at)};
}

std::string state_text(const Store& s, const E& e) {
  std::string out;
  for (auto& [l, v] : s) out += "l" + std::to_string(l) + "=" + pretty(v) + ";";
  return out + "|" + (e ? pretty(e) : "-");
}

std::string config_text(const Config& c) {
  std::ostringstream o;
  o << (c.pol == Pol::Prop ? "P" : c.pol == Pol::Opp ? "O" : "B") << " A{";
  for (auto& [a, t] : c.A) o << a << ":" << type_str(t) << ",";
  o << "} G{";
  for (auto& [i, v] : c.gamma) o << i << "=" << pretty(v) << ",";
  o << "} S{";
  for (auto& [l, v] : c.store) o << l << "=" << pretty(v) << ",";
  o << "} ";
  if (c.pol == Pol::Prop) o << pretty(c.exp);
  if (c.pol == Pol::Opp)
    o << (c.cont.k == Cont::Ctx ? pretty(c.cont.ctx) : c.cont.k == Cont::Top ? std::string("<top>") : "<chi>");
  o << " n" << c.next_index;
  return o.str();
}

std::string rename_syms(const std::string& s) {
  static const std::regex re("κ([0-9]+)");
  std::map<std::string, int> seen;
  std::string out;
  auto it = std::sregex_iterator(s.begin(), s.end(), re);
  size_t last = 0;
  for (; it != std::sregex_iterator(); ++it) {
    auto& m = *it;
    out += s.substr(last, static_cast<size_t>(m.position()) - last);
    auto [pos, fresh] = seen.emplace(m[1].str(), static_cast<int>(seen.size()));
    out += "κ" + std::to_string(pos->second);
    last = static_cast<size_t>(m.position() + m.length());
  }
  return out + s.substr(last);
}

namespace {

int next_abs_of(const Config& c) {
  int n = 0;
  for (auto& [a, t] : c.A) n = std::max(n, a + 1);
  for (int a : support(c).abs) n = std::max(n, a + 1);
  return n;
}

TransOpts opts_for(const Config& c, Solver& solver) {
  TransOpts o;
  o.next_abs = next_abs_of(c);
  o.avoid = support(c).abs;
  for (auto& [a, t] : c.A) o.avoid.insert(a);
  o.solver = &solver;
  return o;
}

}  // namespace

std::vector<std::pair<SymEnv, Config>> random_walk(const E& e, uint64_t seed, int length, Solver& solver) {
  std::mt19937_64 rng(seed);
  std::vector<std::pair<SymEnv, Config>> out;
  Config c = Config::prop(e);
  SymEnv sigma;
  std::vector<Cont> stack;
  for (int i = 0; i < length; ++i) {
    out.emplace_back(sigma, c);
    std::vector<Succ> ss;
    try {
      ss = transitions(c, sigma, opts_for(c, solver));
    } catch (const std::exception&) {
      break;
    }
    if (ss.empty()) break;
    Succ& s = ss[rng() % ss.size()];
    if (s.move.kind == MoveKind::OpCall) stack.push_back(c.cont);
    c = s.conf;
    sigma = s.sigma;
    if (s.move.kind == MoveKind::PropRet) {
      Cont k = Cont::top();
      if (!stack.empty()) {
        k = stack.back();
        stack.pop_back();
      }
      c = plug_chi(c, k);
    }
  }
  return out;
}

namespace {

std::vector<int> shuffled(std::vector<int> v, std::mt19937_64& rng) {
  std::shuffle(v.begin(), v.end(), rng);
  return v;
}

}  // namespace

Perm stable_perm(const Config& c, std::mt19937_64& rng) {
  Perm p;
  std::vector<int> locs;
  for (auto& [l, v] : c.store) locs.push_back(l);
  auto ls = shuffled(locs, rng);
  for (size_t i = 0; i < locs.size(); ++i) p.loc[locs[i]] = ls[i];
  std::map<std::string, std::vector<int>> by_type;
  for (auto& [a, t] : c.A) by_type[type_str(t)].push_back(a);
  for (auto& [t, as] : by_type) {
    auto s = shuffled(as, rng);
    for (size_t i = 0; i < as.size(); ++i) p.abs[as[i]] = s[i];
  }
  std::vector<int> idx;
  for (auto& [i, v] : c.gamma) idx.push_back(i);
  auto is = shuffled(idx, rng);
  for (size_t i = 0; i < idx.size(); ++i) p.idx[idx[i]] = is[i];
  return p;
}

Perm wild_perm(const Config& c, std::mt19937_64& rng) {
  Perm p;
  Support s = support(c);
  for (auto& [l, v] : c.store) s.locs.insert(l);
  auto draw = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  for (int l : s.locs) p = Perm::swap(Sort::Loc, l, draw(0, 63)).compose(p);
  std::map<std::string, std::vector<int>> by_type;
  for (auto& [a, t] : c.A) by_type[type_str(t)].push_back(a);
  int top = next_abs_of(c) + 16;
  std::set<int> taken = s.abs;
  for (auto& [a, t] : c.A) taken.insert(a);
  for (auto& [t, as] : by_type)
    for (int a : as) {
      // another name of the same type, or one unused by c
      int b;
      if (rng() % 2 && as.size() > 1) {
        b = as[rng() % as.size()];
      } else {
        do b = draw(0, top);
        while (taken.count(b));
        taken.insert(b);
      }
      p = Perm::swap(Sort::Abs, a, b).compose(p);
    }
  std::vector<int> idx;
  for (auto& [i, v] : c.gamma) idx.push_back(i);
  auto is = shuffled(idx, rng);
  Perm q;
  for (size_t i = 0; i < idx.size(); ++i) q.idx[idx[i]] = is[i];
  p.idx = q.idx;
  return p;
}

Move apply_perm_move(const Perm& p, const Move& m) {
  Move r = m;
  if (m.abs >= 0) r.abs = p.a(m.abs);
  if (m.index >= 0) r.index = p.i(m.index);
  if (m.val) r.val = apply_perm(p, m.val);
  return r;
}

namespace {

std::vector<std::string> succ_texts(const std::vector<Succ>& ss, const Perm* p) {
  std::vector<std::string> out;
  for (auto& s : ss) {
    Move m = p ? apply_perm_move(*p, s.move) : s.move;
    Config c = p ? apply_perm(*p, s.conf) : s.conf;
    out.push_back(move_str(m) + " | " + config_text(c) + " | " + sym_env_str(s.sigma));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Program> walk_programs(uint64_t seed, int n) {
  std::vector<Program> ps;
  for (int i = 0; i < n; ++i) ps.push_back(gen_program(seed + static_cast<uint64_t>(i), 6 + i % 10));
  return ps;
}

// makes a closed program of base type by applying it to generated arguments
Program saturate(Program p, uint64_t seed) {
  std::mt19937_64 r(seed);
  while (p.t->kind == Type::Arrow) {
    Program a = gen_program(r(), 4, p.t->args[0]);
    p.e = mk_app(p.e, a.e);
    p.t = p.t->args[1];
  }
  return p;
}

CheckOptions small_bounds() {
  CheckOptions o;
  o.k_call = 3;
  o.k_ret = 6;
  o.k_int = 200;
  o.timeout_s = 5;
  o.max_nodes = 20000;
  o.fallback = false;
  return o;
}

}  // namespace

SuiteResult suite_equivariance(uint64_t seed, long min_cases) {
  SuiteResult res;
  auto solver = make_solver("internal");
  std::mt19937_64 rng(seed);
  for (uint64_t k = 0; res.cases < min_cases && k < 100000; ++k) {
    Program p = gen_program(seed + k, 6 + static_cast<int>(k % 12));
    for (auto& [sigma, c] : random_walk(p.e, seed + k, 24, *solver)) {
      if (c.pol == Pol::Opp && c.cont.k == Cont::Chi) continue;
      Perm pi = stable_perm(c, rng);
      Config pc = apply_perm(pi, c);
      TransOpts o = opts_for(c, *solver);
      auto lhs = succ_texts(transitions(c, sigma, o), &pi);
      auto rhs = succ_texts(transitions(pc, sigma, o), nullptr);
      ++res.cases;
      if (lhs != rhs) res.fail("transitions not equivariant at " + config_text(c));
    }
  }
  return res;
}

namespace {

// explorations on generated pairs and the corpus, reported per run
template <class F>
void explorations(uint64_t seed, long budget, const F& each) {
  for (auto& ce : load_corpus(corpus_dir())) {
    CheckOptions o = small_bounds();
    o.check_wf = true;
    if (!each(check_equivalence(ce.left, ce.right, o))) return;
  }
  for (long k = 0; k < budget; ++k) {
    auto [a, b] = gen_pair(seed + static_cast<uint64_t>(k), 6 + static_cast<int>(k % 12));
    CheckOptions o = small_bounds();
    o.check_wf = true;
    if (!each(check_equivalence(a.e, b.e, o))) return;
  }
}

}  // namespace

SuiteResult suite_wellformed(uint64_t seed, long min_cases) {
  SuiteResult res;
  explorations(seed, 4000, [&](const CheckResult& r) {
    res.cases += r.stats.wf_checks;
    if (r.stats.wf_violations)
      res.fail(r.wf_messages.empty() ? std::string("violation") : r.wf_messages.front());
    // the saturated graph itself, checked directly
    auto rep = check_wf(r.sigma);
    ++res.cases;
    if (!rep.ok) res.fail(rep.violations.empty() ? std::string("violation") : rep.violations.front());
    return res.cases < min_cases;
  });
  return res;
}

SuiteResult suite_stack_lengths(uint64_t seed, long min_cases) {
  SuiteResult res;
  explorations(seed, 4000, [&](const CheckResult& r) {
    std::map<std::string, EPP> eps{{ep_key(nullptr), nullptr}};
    if (r.sigma.edges)
      for (auto& [k, e] : *r.sigma.edges) eps.emplace(ep_key(e->src), e->src);
    for (auto& [k, beta] : eps)
      for (auto& sp : enumerate_stacks(r.sigma, beta, 5)) {
        ++res.cases;
        bool b0 = !sp.k[0], b1 = !sp.k[1];
        bool direct = (b0 != b1) || (!b0 && !b1 && sp.k[0]->size() == sp.k[1]->size());
        if (!direct) res.fail("stack lengths differ at " + k);
        if (direct != stacks_ok(sp)) res.fail("stacks_ok disagrees at " + k);
        if ((sp.k[0] && sp.k[0]->size() > 5) || (sp.k[1] && sp.k[1]->size() > 5)) res.fail("depth exceeded");
      }
    return res.cases < min_cases;
  });
  return res;
}

SuiteResult suite_canonical(uint64_t seed, long min_cases) {
  SuiteResult res;
  auto solver = make_solver("internal");
  std::mt19937_64 rng(seed);
  std::map<std::string, std::string> rep;  // key -> canonical form
  for (uint64_t k = 0; res.cases < min_cases && k < 100000; ++k) {
    Program p = gen_program(seed + k, 6 + static_cast<int>(k % 12));
    for (auto& [sigma, c] : random_walk(p.e, seed + k, 24, *solver)) {
      ++res.cases;
      Perm pi = wild_perm(c, rng);
      Config pc = apply_perm(pi, c);
      std::string key = canonical_key(c);
      if (canonical_key(pc) != key) {
        res.fail("key not invariant: " + config_text(c) + " vs " + config_text(pc));
        continue;
      }
      auto [cf, q] = canonicalize(c);
      if (config_text(apply_perm(q, c)) != config_text(cf)) res.fail("canonical form is not q.c");
      if (canonical_key(cf) != key) res.fail("canonical form changes the key");
      auto [cf2, q2] = canonicalize(pc);
      std::string t1 = rename_syms(config_text(cf)), t2 = rename_syms(config_text(cf2));
      if (t1 != t2) res.fail("one orbit, two canonical forms: " + t1 + " vs " + t2);
      auto [it, fresh] = rep.emplace(key, t1);
      if (!fresh && it->second != t1) res.fail("one key, two orbits: " + it->second + " vs " + t1);
    }
  }
  return res;
}

SuiteResult suite_determinacy(uint64_t seed, long min_cases) {
  SuiteResult res;
  std::mt19937_64 rng(seed);
  for (uint64_t k = 0; res.cases < min_cases; ++k) {
    Program p = saturate(gen_program(seed + k, 6 + static_cast<int>(k % 14)), seed + k);
    RedState st{{}, p.e};
    ++res.cases;
    for (int n = 0; n < 400; ++n) {
      auto a = step(st);
      auto again = step(st);
      if (!a) {
        if (again) res.fail("step is not a function");
        break;
      }
      if (!again || state_text(a->store, a->expr) != state_text(again->store, again->expr)) {
        res.fail("two results from one state");
        break;
      }
      // rename the current locations and step again
      Perm pi;
      for (auto& [l, v] : st.store) pi = Perm::swap(Sort::Loc, l, std::uniform_int_distribution<int>(0, 40)(rng)).compose(pi);
      RedState ps{apply_perm(pi, st.store), apply_perm(pi, st.expr)};
      auto b = step(ps);
      if (!b) {
        res.fail("renamed state is stuck");
        break;
      }
      std::vector<int> na, nb;
      for (auto& [l, v] : a->store)
        if (!st.store.count(l)) na.push_back(l);
      for (auto& [l, v] : b->store)
        if (!ps.store.count(l)) nb.push_back(l);
      if (na.size() != nb.size()) {
        res.fail("different allocations");
        break;
      }
      Perm ext = pi;
      for (size_t i = 0; i < na.size(); ++i) {
        int img = pi.l(na[i]);
        if (img != nb[i]) ext = Perm::swap(Sort::Loc, img, nb[i]).compose(ext);
      }
      std::string ta = state_text(apply_perm(ext, a->store), apply_perm(ext, a->expr));
      if (ta != state_text(b->store, b->expr)) {
        res.fail("results differ beyond a location renaming: " + ta + " vs " + state_text(b->store, b->expr));
        break;
      }
      st = *a;
    }
  }
  return res;
}

SuiteResult suite_type_preservation(uint64_t seed, long min_cases) {
  SuiteResult res;
  for (uint64_t k = 0; res.cases < min_cases; ++k) {
    Program p = saturate(gen_program(seed + k, 6 + static_cast<int>(k % 14)), seed + k);
    RedState st{{}, p.e};
    ++res.cases;
    for (int n = 0; n < 400; ++n) {
      auto nx = step(st);
      if (!nx) {
        if (!is_value(st.expr)) res.fail("stuck well-typed term: " + pretty(st.expr));
        break;
      }
      st = *nx;
      try {
        TypeP t = typecheck(st.expr, {}, store_typing(st.store));
        if (!type_eq(t, p.t)) {
          res.fail("type changed to " + type_str(t) + ": " + pretty(st.expr));
          break;
        }
      } catch (const TypeError& e) {
        res.fail(std::string("ill-typed after a step: ") + e.what());
        break;
      }
    }
  }
  return res;
}

std::string corpus_dir() {
  if (const char* d = std::getenv("PDNF_CORPUS")) return d;
#ifdef PDNF_CORPUS_DIR
  return PDNF_CORPUS_DIR;
#else
  return "corpus";
#endif
}

std::vector<CorpusEntry> load_corpus(const std::string& dir) {
  static const std::regex re(R"(\(\*\s*EXPECT:\s*(eq|ineq)\s*\*\))");
  std::vector<std::string> files;
  for (auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".prog") files.push_back(e.path().string());
  std::sort(files.begin(), files.end());
  std::vector<CorpusEntry> out;
  for (auto& f : files) {
    std::ifstream in(f);
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    std::smatch m;
    if (!std::regex_search(text, m, re)) continue;
    auto [a, b] = split_pair(text);
    out.push_back({std::filesystem::path(f).filename().string(), m[1].str(), parse_program(a), parse_program(b)});
  }
  return out;
}

SymEnv random_conjunction(std::mt19937_64& rng) {
  auto draw = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  SymEnv s;
  int n = draw(1, 4);
  std::vector<int> ks;
  for (int i = 0; i < n; ++i) ks.push_back(s.fresh(draw(0, 3) == 0));
  int atoms = draw(1, 6);
  for (int i = 0; i < atoms; ++i) {
    Lin t = Lin::constant(draw(-8, 8));
    int vars = draw(1, std::min(3, n));
    for (int j = 0; j < vars; ++j) {
      int c = draw(-3, 3);
      if (c) t = t + Lin::var(ks[static_cast<size_t>(draw(0, n - 1))], c);
    }
    s = assert_constraint(s, Atom{t, static_cast<Rel>(draw(0, 3))});
  }
  return s;
}

}  // namespace pdnf::testkit
