#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pdnf/config.hpp"
#include "pdnf/solver.hpp"

namespace pdnf {

struct RedState {
  Store store;
  E expr;
};

// e = ctx[redex]; ctx holds the context hole. For a call head α v the hole is
// typed with α's codomain.
struct Decomp {
  E ctx;
  E redex;
};

std::optional<Decomp> decompose(const E& e);

// α v at the redex position
bool is_call_head(const E& redex);

// one concrete step; nullopt when e is a value, a call head, or stuck
std::optional<RedState> step(const RedState& st);

enum class StepKind { Value, CallHead, Stepped, Stuck, Nonlinear };

struct SymStep {
  StepKind kind = StepKind::Stuck;
  std::vector<std::pair<SymEnv, RedState>> next;
  bool branched = false;  // successors carry fresh guard atoms and need a satisfiability check
  bool beta = false;      // the step was a function application
};

SymStep sym_step(const SymEnv& sigma, const RedState& st);

enum class OutKind { Value, CallHead, Stuck, Diverges, IntBound, SolverUnknown };
const char* out_kind_str(OutKind k);

struct RedOutcome {
  OutKind kind;
  SymEnv sigma;
  RedState st;
  long steps = 0;
};

// Explores every symbolic path for at most k_int steps each. Unsatisfiable
// branches are pruned with `solver`; revisiting a state on a path (locations
// canonical, symbolic constants raw) reports Diverges.
std::vector<RedOutcome> reduce_bounded(const SymEnv& sigma, const RedState& st, long k_int, Solver& solver);

// a state key invariant under location renaming and insensitive to garbage
std::string red_state_key(const RedState& st);

}  // namespace pdnf
