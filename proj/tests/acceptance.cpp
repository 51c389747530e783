// One line per acceptance criterion; exit status is the number of failures.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "pdnf/checker.hpp"
#include "testkit.hpp"

using namespace pdnf;
using namespace pdnf::testkit;

namespace {

// pinned tolerances
constexpr double kDummySeconds = 1.0;
constexpr double kExample1Seconds = 30.0;
constexpr size_t kMinInequivalences = 10;
constexpr int kDifferentialPairs = 60;
constexpr double kDifferentialSeconds = 300.0;
constexpr long kSuiteCases = 1000;
constexpr int kReflexivityTerms = 100;
constexpr int kSolverConjunctions = 500;
constexpr uint64_t kSeed = 20240611;

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

const CorpusEntry* find(const std::vector<CorpusEntry>& c, const std::string& file) {
  for (auto& e : c)
    if (e.file == file) return &e;
  return nullptr;
}

Outcome worked_dummy(const std::vector<CorpusEntry>& corpus) {
  const CorpusEntry* d = find(corpus, "dummy.prog");
  if (!d) return {false, "dummy.prog missing"};
  auto r = check_equivalence(d->left, d->right);
  if (r.verdict != Verdict::Equivalent) return {false, std::string("verdict ") + verdict_str(r.verdict) + " " + r.reason};
  if (r.seconds >= kDummySeconds) return {false, "took " + std::to_string(r.seconds) + " s"};
  std::multiset<std::string> got;
  std::set<std::string> nodes{ep_str(nullptr)};
  const std::string loop = make_edge(nullptr, Lab::diamond(), Lab::diamond(), nullptr, {})->key;
  for (auto& [k, e] : *r.sigma.edges) {
    if (k == loop) continue;
    got.insert(lab_str(e->lab[0]) + " , " + lab_str(e->lab[1]) + (e->tgt ? " -> entry" : " -> ⋄"));
    nodes.insert(ep_str(e->src));
    nodes.insert(ep_str(e->tgt));
  }
  std::multiset<std::string> want{"⋄ , ⋄ -> ⋄", "[·]; !l0 , [·]; 0 -> entry"};
  if (got != want) {
    std::string s;
    for (auto& g : got) s += "{" + g + "} ";
    return {false, "edges " + s};
  }
  if (nodes.size() != 3) return {false, std::to_string(nodes.size()) + " canonical nodes"};
  std::ostringstream o;
  o << "Equivalent in " << r.seconds << " s; edges {(⋄,⋄) into ⋄}, {([·]; !l0, [·]; 0)}; 3 nodes";
  return {true, o.str()};
}

Outcome example1(const std::vector<CorpusEntry>& corpus) {
  const CorpusEntry* d = find(corpus, "example1.prog");
  if (!d) return {false, "example1.prog missing"};
  auto r = check_equivalence(d->left, d->right);
  if (r.verdict != Verdict::Equivalent) return {false, std::string("verdict ") + verdict_str(r.verdict) + " " + r.reason};
  if (r.seconds >= kExample1Seconds) return {false, "took " + std::to_string(r.seconds) + " s"};
  CheckOptions off;
  off.name_reuse = false;
  off.memo = false;
  off.timeout_s = 120;
  auto u = check_equivalence(d->left, d->right, off);
  if (u.verdict != Verdict::Unknown) return {false, std::string("without name reuse and memo: ") + verdict_str(u.verdict)};
  std::ostringstream o;
  o << "Equivalent in " << r.seconds << " s (" << r.stats.nodes << " states); without name reuse and memo: Unknown("
    << u.reason << ") after " << u.stats.nodes << " states";
  return {true, o.str()};
}

Outcome inequivalences(const std::vector<CorpusEntry>& corpus) {
  size_t n = 0;
  std::set<std::string> named{"ret0-vs-ret1.prog", "example1-flag-visible.prog", "store-leak.prog"};
  for (auto& e : corpus) {
    if (e.expect != "ineq") continue;
    ++n;
    named.erase(e.file);
    auto r = check_equivalence(e.left, e.right);
    if (r.verdict != Verdict::Inequivalent || !r.cex) return {false, e.file + ": " + verdict_str(r.verdict) + " " + r.reason};
    const Counterexample& cx = *r.cex;
    const E prog[2] = {e.left, e.right};
    const int len = static_cast<int>(cx.trace.size());
    for (Engine en : {Engine::Stackless, Engine::Stacked}) {
      auto w = replay(cx.trace, prog[cx.witness], en);
      if (!w.accepted || !w.terminated) return {false, e.file + ": failing program does not replay"};
      auto o = replay(cx.trace, prog[1 - cx.witness], en);
      bool at_step = !o.accepted && o.reject_step == cx.reject_step;
      bool unfinished = o.accepted && !o.terminated && cx.reject_step == len;
      if (!at_step && !unfinished)
        return {false, e.file + ": other program rejects at " + std::to_string(o.reject_step) + ", reported " +
                           std::to_string(cx.reject_step)};
    }
  }
  if (!named.empty()) return {false, "missing " + *named.begin()};
  if (n < kMinInequivalences) return {false, "only " + std::to_string(n) + " pairs"};
  return {true, std::to_string(n) + " pairs Inequivalent; every trace replays on both LTSs and is rejected at the reported step"};
}

Outcome differential_suite() {
  auto t0 = Clock::now();
  int decided = 0, pairs = 0;
  for (int k = 0; k < kDifferentialPairs; ++k) {
    auto [a, b] = gen_pair(kSeed + static_cast<uint64_t>(k), 6 + k % 15);
    CheckOptions o;
    o.k_call = 3;
    o.k_ret = 6;
    o.k_int = 300;
    o.timeout_s = 4;
    auto d = differential(a.e, b.e, o);
    ++pairs;
    if (d.contradiction) return {false, "pair " + std::to_string(k) + ": " + d.detail + "\n  " + pretty(a.e) + "\n  " + pretty(b.e)};
    decided += d.pdnf.verdict != Verdict::Unknown && d.stacked.verdict != Verdict::Unknown;
  }
  double s = since(t0);
  if (s >= kDifferentialSeconds) return {false, "took " + std::to_string(s) + " s"};
  std::ostringstream o;
  o << pairs << " pairs, " << decided << " decided by both, 0 contradictions, " << s << " s";
  return {true, o.str()};
}

Outcome invariants() {
  struct S {
    const char* name;
    SuiteResult (*run)(uint64_t, long);
  };
  const S suites[] = {{"equivariance", suite_equivariance},   {"wf", suite_wellformed},
                      {"stack-lengths", suite_stack_lengths}, {"canonical", suite_canonical},
                      {"determinacy", suite_determinacy},     {"type-preservation", suite_type_preservation}};
  std::ostringstream o;
  bool ok = true;
  for (auto& s : suites) {
    auto r = s.run(kSeed, kSuiteCases);
    o << s.name << " " << r.cases << "/" << r.failures << " ";
    if (!r.ok(kSuiteCases)) {
      ok = false;
      if (!r.first_failure.empty()) o << "(" << r.first_failure << ") ";
    }
  }
  return {ok, "cases/failures: " + o.str()};
}

struct SepInstance {
  const char* m1;
  const char* n1;
  const char* m2;
  const char* n2;
};

Verdict conj(Verdict a, Verdict b) {
  if (a == Verdict::Inequivalent || b == Verdict::Inequivalent) return Verdict::Inequivalent;
  if (a == Verdict::Equivalent && b == Verdict::Equivalent) return Verdict::Equivalent;
  return Verdict::Unknown;
}

Outcome ab_toggles(const std::vector<CorpusEntry>& corpus) {
  struct T {
    const char* name;
    std::function<void(CheckOptions&)> off;
  };
  const T toggles[] = {{"gc", [](CheckOptions& o) { o.gc = false; }},
                       {"normalize", [](CheckOptions& o) { o.normalize = false; }},
                       {"beta", [](CheckOptions& o) { o.beta = false; }},
                       {"name_reuse", [](CheckOptions& o) { o.name_reuse = false; }}};
  int runs = 0, unknowns = 0;
  for (auto& e : corpus) {
    CheckOptions base;
    base.timeout_s = 20;
    Verdict v = check_equivalence(e.left, e.right, base).verdict;
    for (auto& t : toggles) {
      CheckOptions o = base;
      t.off(o);
      Verdict w = check_equivalence(e.left, e.right, o).verdict;
      ++runs;
      unknowns += w == Verdict::Unknown;
      if (v != Verdict::Unknown && w != Verdict::Unknown && v != w)
        return {false, e.file + ": " + verdict_str(v) + " flips to " + verdict_str(w) + " without " + t.name};
    }
  }
  const SepInstance inst[] = {
      {"let x = ref 0 in fun f -> f (); !x", "fun f -> f (); 0", "let y = ref 1 in fun () -> !y", "fun () -> 1"},
      {"let x = ref 0 in fun f -> x := 1; f (); x := 0; 1", "fun f -> f (); 1",
       "let c = ref 0 in fun () -> c := !c + 1; !c", "fun () -> 1"},
      {"let c = ref 0 in fun () -> c := 1; !c", "fun () -> 1", "let b = ref true in fun () -> !b",
       "fun () -> true"},
      {"fun (s, e) -> ref flag = false in fun () -> flag := true; s (); flag := false; e (); !flag",
       "fun (s, e) -> fun () -> s (); e (); false", "let z = ref 0 in fun (x : int) -> z := x; x",
       "fun (x : int) -> 0"},
      {"let a = ref 0 in fun (x : int) -> a := x; x", "fun (x : int) -> x",
       "let a = ref 0 in let b = ref 0 in fun () -> a := 1; !b", "fun () -> 0"},
  };
  int fired = 0;
  for (auto& s : inst) {
    auto p = [](const char* t) { return parse_program(t); };
    auto pr = [](const char* a, const char* b) { return parse_program(std::string("(") + a + ", " + b + ")"); };
    CheckOptions so;
    so.timeout_s = 30;
    Verdict c1 = check_equivalence(p(s.m1), p(s.n1), so).verdict;
    Verdict c2 = check_equivalence(p(s.m2), p(s.n2), so).verdict;
    auto whole = check_equivalence(pr(s.m1, s.m2), pr(s.n1, s.n2), so);
    CheckOptions nosep = so;
    nosep.separation = false;
    Verdict plain = check_equivalence(pr(s.m1, s.m2), pr(s.n1, s.n2), nosep).verdict;
    Verdict want = conj(c1, c2);
    fired += whole.stats.separations > 0;
    if (want == Verdict::Unknown || whole.verdict != want || (plain != Verdict::Unknown && plain != want))
      return {false, std::string("instance ") + s.m1 + ": components " + verdict_str(want) + ", composite " +
                         verdict_str(whole.verdict) + ", without separation " + verdict_str(plain)};
  }
  if (fired != 5) return {false, "separation applied on " + std::to_string(fired) + "/5 composites"};
  std::ostringstream o;
  o << corpus.size() << " files x 4 toggles, 0 flips (" << unknowns << "/" << runs
    << " became Unknown); separation agrees with components on 5/5";
  return {true, o.str()};
}

Outcome reflexivity() {
  int eq = 0, unk = 0;
  for (int k = 0; k < kReflexivityTerms; ++k) {
    Program p = gen_program(kSeed * 3 + static_cast<uint64_t>(k), 4 + k % 17);
    CheckOptions o;
    o.timeout_s = 5;
    auto r = check_equivalence(p.e, p.e, o);
    if (r.verdict == Verdict::Inequivalent) return {false, "Inequivalent on " + pretty(p.e)};
    (r.verdict == Verdict::Equivalent ? eq : unk)++;
  }
  return {true, std::to_string(eq) + " Equivalent, " + std::to_string(unk) + " Unknown, 0 Inequivalent"};
}

std::string z3_path() {
  if (const char* z = std::getenv("PDNF_Z3")) return z;
  for (const char* c : {"/usr/local/bin/z3", "/usr/bin/z3"})
    if (std::filesystem::exists(c)) return c;
  return "";
}

Outcome solver_agreement() {
  std::string z3 = z3_path();
  if (z3.empty()) return {false, "no SMT-LIB2 solver found (set PDNF_Z3)"};
  InternalSolver in;
  SmtLibSolver ext(z3 + " -in");
  std::mt19937_64 rng(kSeed);
  int compared = 0, sat = 0;
  for (int k = 0; k < kSolverConjunctions; ++k) {
    SymEnv s = random_conjunction(rng);
    auto a = in.check(s), b = ext.check(s);
    for (auto* r : {&a, &b})
      if (r->kind == SatKind::Sat)
        for (auto& at : s.atoms)
          if (!eval_atom(at, r->model)) return {false, "model violates " + atom_str(at) + " in " + sym_env_str(s)};
    if (a.kind == SatKind::Unknown || b.kind == SatKind::Unknown) continue;
    ++compared;
    sat += a.kind == SatKind::Sat;
    if (a.kind != b.kind) return {false, "disagreement on " + sym_env_str(s)};
  }
  std::ostringstream o;
  o << compared << "/" << kSolverConjunctions << " compared (" << sat << " sat), 0 disagreements, models checked";
  return {compared > 0, o.str()};
}

}  // namespace

int main() {
  auto corpus = load_corpus(corpus_dir());
  struct C {
    int n;
    const char* name;
    std::function<Outcome()> run;
  };
  const C cs[] = {
      {1, "worked-example equivalence and saturated graph", [&] { return worked_dummy(corpus); }},
      {2, "event-listener example and finitisation", [&] { return example1(corpus); }},
      {3, "derived inequivalences with replayed traces", [&] { return inequivalences(corpus); }},
      {4, "differential consistency with the stacked game", [] { return differential_suite(); }},
      {5, "invariant suites", [] { return invariants(); }},
      {6, "up-to toggles and separation", [&] { return ab_toggles(corpus); }},
      {7, "reflexivity", [] { return reflexivity(); }},
      {8, "solver agreement", [] { return solver_agreement(); }},
  };
  int failed = 0;
  for (auto& c : cs) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", c.n, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed;
}
