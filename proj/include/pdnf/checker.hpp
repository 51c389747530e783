#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pdnf/cgraph.hpp"
#include "pdnf/lts.hpp"
#include "pdnf/upto.hpp"

namespace pdnf {

struct CheckOptions {
  int k_call = 6;
  int k_ret = 12;
  long k_int = 1000;
  bool name_reuse = true;
  bool memo = true;
  bool normalize = true;
  bool gc = true;
  bool separation = true;
  bool beta = true;
  bool widen = true;  // give each state every known edge from its entry point
  std::string solver = "internal";
  double timeout_s = 0;  // 0: none
  size_t max_nodes = 2000000;
  bool check_wf = false;  // check Σ well-formedness after every extend/restrict
  int name_offset = 0;    // first fresh abstract name and symbolic constant
  bool fallback = true;   // retry unconfirmed failures without name reuse and widening, then with the stacked game
};

enum class Verdict { Equivalent, Inequivalent, Unknown };
const char* verdict_str(Verdict v);

struct Counterexample {
  std::vector<Move> trace;
  int witness = 0;      // program (0: left, 1: right) that accepts the trace and terminates
  int reject_step = -1;  // first move the other program cannot perform (trace length: not terminated)
  std::string reason;
};

struct CheckStats {
  long nodes = 0;
  long memo_hits = 0;
  long nr_hits = 0;
  long separations = 0;
  long unknown_leaves = 0;
  long unconfirmed = 0;
  long wf_checks = 0;
  long wf_violations = 0;
  long compat_violations = 0;
  size_t max_sigma = 0;
};

struct CheckResult {
  Verdict verdict = Verdict::Unknown;
  std::string reason;  // CallBound, RetBound, IntBound, SolverUnknown, Timeout, NodeLimit, Unconfirmed
  std::optional<Counterexample> cex;
  CGraph sigma;  // every edge orbit created during the exploration
  CheckStats stats;
  double seconds = 0;
  std::string engine = "pdnf";
  std::vector<std::string> wf_messages;
};

CheckResult check_equivalence(const E& m, const E& n, const CheckOptions& o = {});

// τ* η (τ* only when matching a τ) from c; empty when there is no weak answer
std::vector<std::pair<SymEnv, Config>> match_weak(const Config& c, const Move& eta, const SymEnv& sigma, long k_int,
                                                  Solver& solver);

// bounded game on the stacked LTS, used as an oracle
CheckResult check_stacked(const E& m, const E& n, const CheckOptions& o = {});

// replay-based confirmation of a candidate counterexample
bool confirm_counterexample(const E& m, const E& n, Counterexample& cx, long k_int);

struct Differential {
  CheckResult pdnf, stacked;
  bool contradiction = false;
  std::string detail;
};

// verdicts of both engines, compared; Unknowns never contradict
Differential differential(const E& m, const E& n, const CheckOptions& o = {});
// the comparison alone (also used on doctored results)
std::optional<std::string> contradiction(const E& m, const E& n, const CheckResult& pdnf, const CheckResult& stacked,
                                         long k_int);

std::string result_json(const CheckResult& r);

// edges of Σ other than the ⋄ loop
size_t non_diamond_edges(const CGraph& g);

// structural label comparison; nullopt on a mismatch, otherwise the equalities of
// symbolic positions that make the labels equal
std::optional<std::vector<Atom>> label_equalities(const E& a, const E& b);

}  // namespace pdnf
