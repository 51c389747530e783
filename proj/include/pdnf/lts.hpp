#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pdnf/config.hpp"
#include "pdnf/semantics.hpp"
#include "pdnf/solver.hpp"

namespace pdnf {

enum class MoveKind { Tau, PropCall, PropRet, OpCall, OpRet };

// PropCall(abs, val=D), PropRet(val=D), OpCall(index, val=D[ᾱ]), OpRet(val=D[ᾱ])
struct Move {
  MoveKind kind = MoveKind::Tau;
  int abs = -1;
  int index = -1;
  E val;
};

std::string move_str(const Move& m);
bool move_eq(const Move& a, const Move& b);
bool is_visible(const Move& m);
bool is_prop_move(const Move& m);

// (D, Γ'): functions replaced by holes at indices next_index+1, next_index+2, ...
std::pair<E, Gamma> ulpatt_value(const E& v, int next_index);
// D[ᾱ] of type t: fresh abstract names (taken from next_abs upwards, skipping
// `avoid`), fresh symbolic constants in sigma
struct TypePattern {
  E val;
  Names names;
  std::vector<int> syms;
};
TypePattern ulpatt_type(const TypeP& t, int& next_abs, const std::set<int>& avoid, SymEnv& sigma);
// concrete instances (test-only): base positions range over `ints` / both booleans
std::vector<E> ulpatt_type_concrete(const TypeP& t, int& next_abs, const std::set<int>& avoid,
                                    const std::vector<int64_t>& ints);

struct Succ {
  Move move;
  SymEnv sigma;
  Config conf;
};

struct TransOpts {
  int next_abs = 0;        // lower bound for fresh abstract names
  std::set<int> avoid;     // abstract names that must not be chosen
  Solver* solver = nullptr;  // prunes unsatisfiable τ branches when set
};

struct ChiError : std::logic_error {
  using std::logic_error::logic_error;
};

// real one-step successors per the stackless rules; `unknown` is set when a τ
// step could not be decided
std::vector<Succ> transitions(const Config& c, const SymEnv& sigma, const TransOpts& o = {}, bool* unknown = nullptr);

Config plug_chi(const Config& c, const Cont& k);
// type of the context hole of an evaluation context
TypeP hole_type_of(const E& ctx);

// ---------------- stacked LTS ----------------

struct SConfig {
  Config conf;          // Bot: stacked ⊥
  std::vector<E> stack;  // evaluation contexts, back() is the top
};

bool stacked_terminated(const SConfig& c);
std::optional<SConfig> attach_stack(const Config& c, const std::optional<std::vector<E>>& k);

struct SSucc {
  Move move;
  SymEnv sigma;
  SConfig conf;
};
std::vector<SSucc> stacked_transitions(const SConfig& c, const SymEnv& sigma, const TransOpts& o = {},
                                       bool* unknown = nullptr);

// stacked OpCall/PropRet bookkeeping
std::vector<E> push_cont(const Cont& c, std::vector<E> k);

// ---------------- traces ----------------

std::string trace_str(const std::vector<Move>& t);
// values in opponent moves are typed later, at replay time
std::vector<Move> parse_trace(const std::string& text);
E parse_pattern_value(const std::string& text, const TypeP& expected);

enum class Engine { Stackless, Stacked };

struct ReplayResult {
  bool accepted = true;   // every move was performed
  int reject_step = -1;   // index of the first move that could not be performed
  bool terminated = false;  // accepted and ending at top level
  std::string reason;
};

ReplayResult replay(const std::vector<Move>& trace, const E& e, Engine engine, long k_int = 100000);

}  // namespace pdnf
