#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pdnf/cgraph.hpp"
#include "pdnf/config.hpp"
#include "pdnf/solver.hpp"

namespace pdnf {

// a pending opponent call on the real path: its continuations and caller entry point
struct Frame {
  Lab lab[2];
  EPP tgt;
};

struct PairState {
  Config c[2];
  EPP beta;        // current entry point, ⋄ when null
  CGraph sigma_g;  // Σ restricted to beta
  SymEnv sigma;
  std::vector<Frame> frames;  // back() is the innermost call
  bool real = true;           // every pop so far used a real frame
  int next_abs = 0;           // abstract names below this were used once
};

struct KeyOpts {
  bool normalize = true;     // orbit-canonical rather than raw names
  bool with_names = false;   // include A (when garbage collection is off)
};

// symbolic constants occurring in the configurations and the entry point
std::set<int> live_syms(const PairState& ps);

std::string pair_key(const PairState& ps, Solver& solver, const KeyOpts& o = {});

// drop store cells unreachable from Γ, the control, and `protect`; trim A
Config gc(const Config& c, const std::set<int>& protect = {});
PairState gc(const PairState& ps);

// rename every name to its canonical representative
PairState normalize(const PairState& ps);

// deterministic τ steps only; stops at values, call heads, branches, stuck
// terms, and after k_int steps
std::pair<SymEnv, Config> beta_collapse(const SymEnv& sigma, const Config& c, long k_int);

// forget index i on both sides
PairState weaken(const PairState& ps, int i);

// ⟨a/a2⟩ applied to each Γ entry and control separately; nullopt when undefined
std::optional<PairState> name_reuse(const PairState& ps, int a, int a2);

// split an opponent state at ⋄ into components with disjoint locations;
// nullopt when there is a single component
std::optional<std::vector<PairState>> separate(const PairState& ps);

}  // namespace pdnf
