#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "testkit.hpp"

using namespace pdnf;
using namespace pdnf::testkit;

namespace {

constexpr long kCases = 1000;
const uint64_t kSeeds[] = {1, 77};

void expect(const SuiteResult& r) {
  INFO("cases " << r.cases << ", failures " << r.failures << ": " << r.first_failure);
  CHECK(r.cases >= kCases);
  CHECK(r.failures == 0);
}

}  // namespace

TEST_CASE("transitions are equivariant") {
  for (uint64_t s : kSeeds) expect(suite_equivariance(s, kCases));
}
TEST_CASE("continuation graphs stay well formed") {
  for (uint64_t s : kSeeds) expect(suite_wellformed(s, kCases));
}
TEST_CASE("enumerated stacks have matching lengths") {
  for (uint64_t s : kSeeds) expect(suite_stack_lengths(s, kCases));
}
TEST_CASE("canonical forms pick one representative per orbit") {
  for (uint64_t s : kSeeds) expect(suite_canonical(s, kCases));
}
TEST_CASE("reduction is deterministic up to location renaming") {
  for (uint64_t s : kSeeds) expect(suite_determinacy(s, kCases));
}
TEST_CASE("reduction preserves types") {
  for (uint64_t s : kSeeds) expect(suite_type_preservation(s, kCases));
}
TEST_CASE("generated programs are closed and well typed") {
  for (uint64_t k = 0; k < 300; ++k) {
    Program p = gen_program(k, 4 + static_cast<int>(k % 17));
    CHECK(free_vars(p.e).empty());
    CHECK(type_eq(typecheck(p.e), p.t));
  }
}
TEST_CASE("internal solver models satisfy their constraints") {
  InternalSolver s;
  std::mt19937_64 rng(5);
  for (int k = 0; k < 2000; ++k) {
    SymEnv e = random_conjunction(rng);
    auto r = s.check(e);
    if (r.kind != SatKind::Sat) continue;
    for (auto& a : e.atoms) CHECK(eval_atom(a, r.model));
  }
}
TEST_CASE("internal solver agrees with brute force on small domains") {
  // constants in [-4, 4]; bounded atoms keep solutions inside the box
  InternalSolver s;
  std::mt19937_64 rng(9);
  for (int k = 0; k < 500; ++k) {
    SymEnv e = random_conjunction(rng);
    std::vector<int> vs;
    for (auto& [v, b] : e.vars) vs.push_back(v);
    for (int v : vs) {
      e = assert_constraint(e, Atom{Lin::var(v) - Lin::constant(4), Rel::Le});
      e = assert_constraint(e, Atom{Lin::constant(-4) - Lin::var(v), Rel::Le});
    }
    bool found = false;
    std::map<int, int64_t> m;
    std::function<void(size_t)> go = [&](size_t i) {
      if (found) return;
      if (i == vs.size()) {
        bool ok = true;
        for (auto& a : e.atoms) ok = ok && eval_atom(a, m);
        found = ok;
        return;
      }
      bool b = e.vars.at(vs[i]);
      for (int64_t x = b ? 0 : -4; x <= (b ? 1 : 4) && !found; ++x) {
        m[vs[i]] = x;
        go(i + 1);
      }
    };
    go(0);
    auto r = s.check(e);
    REQUIRE(r.kind != SatKind::Unknown);
    CHECK((r.kind == SatKind::Sat) == found);
  }
}
