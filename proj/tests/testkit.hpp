#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pdnf/checker.hpp"

namespace pdnf::testkit {

// Seeded generator of closed, well-typed terms over int/bool/unit and first- or
// second-order function types. Refs hold base values only.
class Gen {
 public:
  explicit Gen(uint64_t seed) : rng_(seed) {}

  // perturb the n-th integer literal produced (counted from 0); -1: none
  int mutate_at = -1;

  TypeP program_type();
  TypeP base_type();
  E expr(const TypeP& t, int size);
  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }
  bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(rng_); }
  std::mt19937_64& rng() { return rng_; }

 private:
  struct Var {
    std::string x;
    TypeP t;
  };
  E leaf(const TypeP& t);
  E int_lit();
  std::string fresh(const char* p) { return p + std::to_string(names_++); }

  std::mt19937_64 rng_;
  std::vector<Var> vars_, refs_;
  int names_ = 0;
  int ints_ = 0;
};

// a generated closed program with its type (after inference and a type check)
struct Program {
  E e;
  TypeP t;
};
Program gen_program(uint64_t seed, int size, const TypeP& t = nullptr, int mutate_at = -1);
// two programs of one type: a literal mutation of each other, or independent draws
std::pair<Program, Program> gen_pair(uint64_t seed, int size);

// structural printing used for comparisons in the property suites
std::string config_text(const Config& c);
std::string state_text(const Store& s, const E& e);
// renames κN by first occurrence
std::string rename_syms(const std::string& s);

// configurations visited by a seeded random walk on the stackless LTS
std::vector<std::pair<SymEnv, Config>> random_walk(const E& e, uint64_t seed, int length, Solver& solver);

// random permutation of the names of c that keeps dom(store), dom(Γ), and
// abstract names within their type classes fixed as sets
Perm stable_perm(const Config& c, std::mt19937_64& rng);
// random permutation moving locations, abstract names (per type), and indices
// to arbitrary new names
Perm wild_perm(const Config& c, std::mt19937_64& rng);

Move apply_perm_move(const Perm& p, const Move& m);

struct SuiteResult {
  long cases = 0;
  long failures = 0;
  std::string first_failure;
  void fail(const std::string& why) {
    if (!failures++) first_failure = why;
  }
  bool ok(long min_cases) const { return failures == 0 && cases >= min_cases; }
};

// invariant suites; each returns the number of cases examined
SuiteResult suite_equivariance(uint64_t seed, long min_cases);
SuiteResult suite_wellformed(uint64_t seed, long min_cases);
SuiteResult suite_stack_lengths(uint64_t seed, long min_cases);
SuiteResult suite_canonical(uint64_t seed, long min_cases);
SuiteResult suite_determinacy(uint64_t seed, long min_cases);
SuiteResult suite_type_preservation(uint64_t seed, long min_cases);

// bundled corpus
struct CorpusEntry {
  std::string file;
  std::string expect;  // eq, ineq
  E left, right;
};
std::vector<CorpusEntry> load_corpus(const std::string& dir);
std::string corpus_dir();

// random QF_LIA conjunction over a few constants (some Boolean)
SymEnv random_conjunction(std::mt19937_64& rng);

}  // namespace pdnf::testkit
