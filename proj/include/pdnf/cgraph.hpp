#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pdnf/config.hpp"
#include "pdnf/nominal.hpp"
#include "pdnf/solver.hpp"

namespace pdnf {

// ⌜C1,C2⌝ with each side a proponent configuration or ⊥; ⋄ is the null pointer.
struct EntryPoint {
  Config c[2];
};
using EPP = std::shared_ptr<const EntryPoint>;

EPP make_ep(const Config& c1, const Config& c2);
bool ep_side_bot(const EPP& b, int j);  // false for ⋄
std::string ep_key(const EPP& b);
std::string ep_str(const EPP& b);

// stack label: evaluation context, ⋄, or ⊥
struct Lab {
  enum K { Ctx, Diamond, Bot } k = Diamond;
  E ctx;
  static Lab diamond() { return {}; }
  static Lab bot() { return {Bot, nullptr}; }
  static Lab of(E e) { return {Ctx, std::move(e)}; }
  static Lab from_cont(const Cont& c);
};
Cont lab_cont(const Lab& l);  // Ctx or Top; ⊥ has no continuation
std::string lab_str(const Lab& l);

struct Edge {
  EPP src;
  Lab lab[2];
  EPP tgt;
  SymEnv phi;  // constraints on the symbolic constants of the edge
  std::string key, src_key, tgt_key;
};
using EdgeP = std::shared_ptr<const Edge>;

EdgeP make_edge(const EPP& src, const Lab& l1, const Lab& l2, const EPP& tgt, const SymEnv& phi);

// Persistent orbit-closed edge set: one representative per orbit, keyed canonically.
struct CGraph {
  std::shared_ptr<const std::map<std::string, EdgeP>> edges;
  size_t size() const { return edges ? edges->size() : 0; }
  std::vector<std::string> keys() const;
  bool contains(const std::string& k) const { return edges && edges->count(k); }
};

struct WfError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

CGraph sigma_diamond();
CGraph extend(const CGraph& g, const EPP& src, const Lab& l1, const Lab& l2, const EPP& tgt, const SymEnv& phi = {});
CGraph extend_edge(const CGraph& g, const EdgeP& e);
std::string edge_side_condition(const EPP& src, const Lab& l1, const Lab& l2, const EPP& tgt);

// Fresh-name supply for names of a popped edge that lie outside its source.
struct FreshSupply {
  std::set<int> avoid_loc[2];
  int next_abs = 0;
  int next_index = 0;  // last used
  SymEnv* sigma = nullptr;  // fresh symbolic constants
};

struct Pop {
  Lab lab[2];
  EPP tgt;
  std::vector<Atom> phi;  // already renamed
  std::string edge_key;
};

std::vector<Pop> pops(const CGraph& g, const EPP& beta, FreshSupply& fresh);
std::vector<Pop> pops(const CGraph& g, const EPP& beta);  // freshening against nothing

CGraph restrict(const CGraph& g, const EPP& beta);
EPP invert_ep(const EPP& b);
CGraph invert(const CGraph& g);

struct StackPair {
  std::optional<std::vector<E>> k[2];  // nullopt: ⊥; back() is the top
};
std::vector<StackPair> enumerate_stacks(const CGraph& g, const EPP& beta, int depth);
// Ks property: equal lengths, or exactly one side ⊥
bool stacks_ok(const StackPair& p);

struct WfReport {
  bool ok = true;
  std::vector<std::string> violations;
};
WfReport check_wf(const CGraph& g);

std::string export_dot(const CGraph& g);

// canonical serialization pieces shared with pair-state keys
std::vector<std::pair<int, std::string>> ep_index_shapes(const EPP& b);
void ep_serialize(Canon& c, const EPP& b, const std::vector<int>& order);
// constraint atoms with symbolic constants named by c (unnamed ones get named here)
void serialize_atoms(Canon& c, const std::vector<Atom>& atoms);
void merge_shapes(std::map<int, std::string>& into, const std::vector<std::pair<int, std::string>>& more);

}  // namespace pdnf
