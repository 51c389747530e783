#pragma once

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pdnf/config.hpp"

namespace pdnf {

enum class Sort { Loc, Abs, Index };

// Finitary permutation, stored sparsely by its support.
struct Perm {
  std::map<int, int> loc, abs, idx;

  int l(int x) const;
  int a(int x) const;
  int i(int x) const;
  Perm inverse() const;
  // (this . o)(x) = this(o(x))
  Perm compose(const Perm& o) const;
  bool is_identity() const;
  static Perm swap(Sort s, int x, int y);
};

// Renaming used for symbolic constants alongside a permutation (not nominal, but
// canonical keys rename them by first occurrence).
using SymMap = std::map<int, int>;

E apply_perm(const Perm& p, const E& e, const SymMap* ks = nullptr);
Store apply_perm(const Perm& p, const Store& s, const SymMap* ks = nullptr);
Gamma apply_perm_gamma(const Perm& p, const Gamma& g, const SymMap* ks = nullptr);
Names apply_perm(const Perm& p, const Names& n);
Cont apply_perm(const Perm& p, const Cont& c, const SymMap* ks = nullptr);
Config apply_perm(const Perm& p, const Config& c, const SymMap* ks = nullptr);

struct Support {
  std::set<int> locs, abs, idx;
  void add(const Support& o);
  bool operator==(const Support& o) const = default;
};

Support support(const E& e);
Support support(const Store& s);
Support support(const Config& c);
Support apply_perm(const Perm& p, const Support& s);

int fresh(Sort s, const std::set<int>& avoid);
int fresh_loc(const std::set<int>& avoid);
int fresh_abs(const std::set<int>& avoid);
int fresh_index(const std::set<int>& avoid);

// Deterministic serialization with first-occurrence renaming; the basis of
// canonical forms and memo keys.
class Canon {
 public:
  explicit Canon(bool anon = false) : anon_(anon) {}

  std::string out;
  std::map<int, int> loc[2];
  std::map<int, int> abs, idx, sym;
  bool raw_sym = false;  // print symbolic constants by their own ids

  void lit(const std::string& s) { out += s; }
  void type(const TypeP& t);
  void expr(const E& e, int side);
  void cont(const Cont& c, int side);
  // Γ entries in the given index order (indices absent from g are skipped)
  void gamma(const Gamma& g, int side, const std::vector<int>& order);
  void names(const Names& A);

  int name_loc(int side, int l);
  int name_abs(int a);
  int name_idx(int i);
  int name_sym(int k);

  // Store slots: a store attached to a side; contents of named locations are
  // serialized lazily by flush().
  int add_slot(const Store* s, int side);
  void flush();
  std::vector<int> unreached(int slot) const;
  int slot_count() const { return static_cast<int>(slots_.size()); }
  int slot_side(int slot) const { return slots_[slot].side; }
  const Store& slot_store(int slot) const { return *slots_[slot].s; }
  void root(int slot, int l);

  Perm perm() const;  // side-0 location map (or side-1 when side1 is set)
  Perm perm_side(int side) const;

 private:
  bool anon_;
  struct Slot {
    const Store* s;
    int side;
    std::set<int> done;
  };
  std::vector<Slot> slots_;
};

// anonymous shape of a term (all names collapsed to their sort)
std::string shape(const E& e);

struct CanonResult {
  std::string key;
  std::vector<Canon> minimal;  // every traversal achieving the minimal key
  bool exact = true;           // false when tie enumeration was capped
};

// Orbit-canonical search. `indices` with their shapes define tie groups.
// main(c, order) serializes the object given an index order; post(c) runs after
// unreachable store cells have been rooted.
CanonResult canon_search(const std::vector<std::pair<int, std::string>>& indices,
                         const std::function<void(Canon&, const std::vector<int>&)>& main,
                         const std::function<void(Canon&)>& post, size_t cap = 5040);

// Canonical form of a single configuration.
std::pair<Config, Perm> canonicalize(const Config& c);
std::string canonical_key(const Config& c);

}  // namespace pdnf
