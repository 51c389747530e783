#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include "pdnf/checker.hpp"
#include "testkit.hpp"

using namespace pdnf;

namespace {

E P(const char* s) { return parse_program(s); }

RedState run(E e, int max_steps = 1000) {
  RedState st{{}, std::move(e)};
  for (int i = 0; i < max_steps; ++i) {
    auto nx = step(st);
    if (!nx) break;
    st = *nx;
  }
  return st;
}

}  // namespace

TEST_SUITE("syntax") {
  TEST_CASE("parses refs, lets, tuples and comments") {
    E e = P("(* c *) let x = ref 0 in let f (a, b) = a + b in x := f (1, 2); !x");
    CHECK(type_str(typecheck(e)) == "int");
    CHECK(run(e).expr->ival == 3);
  }
  TEST_CASE("ref binder form") {
    E e = P("ref flag = false in flag := true; !flag");
    CHECK(run(e).expr->kind == Kind::Const);
    CHECK(run(e).expr->ival == 1);
  }
  TEST_CASE("split pair") {
    auto [a, b] = split_pair("1\n|||\n2\n");
    CHECK(a.find('1') != std::string::npos);
    CHECK(b.find('2') != std::string::npos);
    CHECK_THROWS(split_pair("1 2"));
  }
  TEST_CASE("parse errors carry a position") {
    try {
      P("fun x -> ");
      FAIL("no error");
    } catch (const ParseError& e) {
      CHECK(e.line == 1);
    }
  }
  TEST_CASE("type errors") {
    CHECK_THROWS_AS(P("1 + true"), TypeError);
    CHECK_THROWS_AS(P("let x = ref 0 in x := false"), TypeError);
  }
  TEST_CASE("event listener type") {
    E m = P("fun (onstart, onend) -> ref flag = false in fun () -> flag := true; onstart (); flag := false; onend (); !flag");
    CHECK(type_str(typecheck(m)) == "(unit -> unit) * (unit -> unit) -> unit -> bool");
  }
  TEST_CASE("pretty printing round trips") {
    for (const char* s : {"fun f -> f (); 0", "let x = ref 0 in fun f -> f (); !x", "fun (x : int) -> if x > 0 then 1 else 0"}) {
      E e = P(s);
      CHECK(alpha_equal(P(pretty(e).c_str()), e));
    }
  }
}

TEST_SUITE("semantics") {
  TEST_CASE("recursion and arithmetic") {
    E e = P("let rec f (n : int) : int = if n <= 0 then 0 else n + f (n - 1) in f 10");
    CHECK(run(e).expr->ival == 55);
  }
  TEST_CASE("allocation picks fresh locations") {
    RedState st = run(P("let a = ref 1 in let b = ref 2 in !a + !b"));
    CHECK(st.store.size() == 2);
    CHECK(st.expr->ival == 3);
  }
  TEST_CASE("symbolic branching splits the constraint set") {
    SymEnv s;
    int k = s.fresh(false);
    E e = mk_if(mk_op(Prim::Lt, {mk_int(0), mk_sym(k, t_int())}), mk_int(1), mk_int(2));
    auto solver = make_solver("internal");
    auto outs = reduce_bounded(s, RedState{{}, e}, 100, *solver);
    REQUIRE(outs.size() == 2);
    for (auto& o : outs) CHECK(o.kind == OutKind::Value);
  }
  TEST_CASE("divergence is detected by state repetition") {
    auto solver = make_solver("internal");
    auto outs = reduce_bounded({}, RedState{{}, P("let rec loop (u : unit) : unit = loop u in loop ()")}, 1000, *solver);
    REQUIRE(outs.size() == 1);
    CHECK(outs[0].kind == OutKind::Diverges);
  }
  TEST_CASE("call heads stop reduction") {
    auto d = decompose(mk_seq(mk_app(mk_abs(0, t_arrow(t_unit(), t_unit())), mk_unit()), mk_int(0)));
    REQUIRE(d);
    CHECK(is_call_head(d->redex));
  }
}

TEST_SUITE("solver") {
  TEST_CASE("sat and unsat") {
    InternalSolver s;
    SymEnv e;
    int x = e.fresh(false);
    e = assert_constraint(e, Atom{Lin::var(x) - Lin::constant(3), Rel::Le});
    e = assert_constraint(e, Atom{Lin::constant(1) - Lin::var(x), Rel::Le});
    auto r = s.check(e);
    REQUIRE(r.kind == SatKind::Sat);
    CHECK(r.model[x] >= 1);
    CHECK(r.model[x] <= 3);
    e = assert_constraint(e, Atom{Lin::var(x) - Lin::constant(7), Rel::Eq});
    CHECK(s.check(e).kind == SatKind::Unsat);
  }
  TEST_CASE("integers, not rationals") {
    InternalSolver s;
    SymEnv e;
    int x = e.fresh(false);
    e = assert_constraint(e, Atom{Lin::var(x, 2) - Lin::constant(1), Rel::Eq});
    CHECK(s.check(e).kind == SatKind::Unsat);
  }
  TEST_CASE("booleans range over 0 and 1") {
    InternalSolver s;
    SymEnv e;
    int b = e.fresh(true);
    e = assert_constraint(e, Atom{Lin::var(b) - Lin::constant(2), Rel::Eq});
    CHECK(s.check(e).kind == SatKind::Unsat);
  }
  TEST_CASE("smtlib printing") {
    SymEnv e;
    int x = e.fresh(false);
    e = assert_constraint(e, Atom{Lin::var(x) + Lin::constant(-3), Rel::Lt});
    std::string t = to_smtlib(e);
    CHECK(t.find("(declare-const k0 Int)") != std::string::npos);
    CHECK(t.find("(assert (< (+ k0 (- 3)) 0))") != std::string::npos);
  }
  TEST_CASE("unknown backends are rejected") { CHECK_THROWS(make_solver("cvc9000")); }
}

TEST_SUITE("nominal") {
  TEST_CASE("permutations") {
    Perm p = Perm::swap(Sort::Loc, 1, 2);
    CHECK(p.l(1) == 2);
    CHECK(p.compose(p).is_identity());
    CHECK(p.inverse().l(2) == 1);
  }
  TEST_CASE("canonical keys ignore location names") {
    Config a = Config::prop(mk_deref(loc_atom(3)));
    a.store[3] = mk_int(1);
    Config b = apply_perm(Perm::swap(Sort::Loc, 3, 9), a);
    CHECK(b.store.count(9));
    CHECK(canonical_key(a) == canonical_key(b));
    Config c = a;
    c.store[3] = mk_int(2);
    CHECK(canonical_key(a) != canonical_key(c));
  }
}

TEST_SUITE("lts") {
  TEST_CASE("a function value is returned as a pattern") {
    SymEnv s;
    auto ss = transitions(Config::prop(P("fun (x : int) -> x")), s);
    REQUIRE(ss.size() == 1);
    CHECK(ss[0].move.kind == MoveKind::PropRet);
    CHECK(move_str(ss[0].move) == "ret([·]1)");
    CHECK(ss[0].conf.gamma.size() == 1);
  }
  TEST_CASE("traces print and parse") {
    auto t = parse_trace("ret([·]1)\nopcall 1 (α0)\ncall α0 (())\nopret(())\nret(0)\n");
    REQUIRE(t.size() == 5);
    CHECK(trace_str(t) == "ret([·]1)\nopcall 1 (α0)\ncall α0 (())\nopret(())\nret(0)\n");
  }
  TEST_CASE("replay on both engines") {
    auto t = parse_trace("ret([·]1)\nopcall 1 (α0)\ncall α0 (())\nopret(())\nret(0)\n");
    for (Engine en : {Engine::Stackless, Engine::Stacked}) {
      auto a = replay(t, P("fun f -> f (); 0"), en);
      CHECK(a.accepted);
      CHECK(a.terminated);
      auto b = replay(t, P("fun f -> f (); 1"), en);
      CHECK_FALSE(b.accepted);
      CHECK(b.reject_step == 4);
    }
  }
  TEST_CASE("attach_stack") {
    Config c = Config::prop(mk_int(1));
    auto top = attach_stack(c, std::vector<E>{});
    REQUIRE(top);
    CHECK(top->stack.empty());
    Config bot = Config::bot();
    auto b = attach_stack(bot, std::nullopt);
    REQUIRE(b);
    CHECK(b->conf.is_bot());
  }
}

TEST_SUITE("cgraph") {
  TEST_CASE("the top-level graph") {
    CGraph g = sigma_diamond();
    CHECK(g.size() == 1);
    CHECK(check_wf(g).ok);
    std::string dot = export_dot(g);
    CHECK(dot.find("n0 -> n0 [label=\"(⋄, ⋄)\"]") != std::string::npos);
    auto ps = pops(g, nullptr);
    REQUIRE(ps.size() == 1);
    CHECK(ps[0].lab[0].k == Lab::Diamond);
    CHECK(ps[0].tgt == nullptr);
  }
  TEST_CASE("stacks from the top level are empty") {
    auto st = enumerate_stacks(sigma_diamond(), nullptr, 5);
    REQUIRE(!st.empty());
    for (auto& s : st) {
      CHECK(stacks_ok(s));
      REQUIRE(s.k[0]);
      CHECK(s.k[0]->empty());
    }
  }
  TEST_CASE("worked example graph in DOT") {
    auto r = check_equivalence(P("let x = ref 0 in fun f -> f (); !x"), P("fun f -> f (); 0"));
    std::string dot = export_dot(r.sigma);
    CHECK(dot.find("n2") != std::string::npos);
    CHECK(dot.find("n3") == std::string::npos);
    CHECK(dot.find("([·]; !l0, [·]; 0)") != std::string::npos);
  }
}

TEST_SUITE("checker") {
  TEST_CASE("worked example") {
    auto r = check_equivalence(P("let x = ref 0 in fun f -> f (); !x"), P("fun f -> f (); 0"));
    CHECK(r.verdict == Verdict::Equivalent);
    CHECK(non_diamond_edges(r.sigma) == 2);
  }
  TEST_CASE("return value after a callback") {
    auto r = check_equivalence(P("fun f -> f (); 0"), P("fun f -> f (); 1"));
    REQUIRE(r.verdict == Verdict::Inequivalent);
    REQUIRE(r.cex);
    CHECK(trace_str(r.cex->trace) == "ret([·]1)\nopcall 1 (α0)\ncall α0 (())\nopret(())\nret(0)\n");
    CHECK(r.cex->witness == 0);
    CHECK(r.cex->reject_step == 4);
  }
  TEST_CASE("symmetry") {
    E m = P("fun f -> f (); 0"), n = P("fun f -> f (); 1");
    auto a = check_equivalence(m, n), b = check_equivalence(n, m);
    CHECK(a.verdict == b.verdict);
    REQUIRE(a.cex);
    REQUIRE(b.cex);
    // b's counterexample, read against (m, n), is accepted by the program it names
    Counterexample cx = *b.cex;
    cx.witness = 1 - cx.witness;
    CHECK(confirm_counterexample(m, n, cx, 100000));
  }
  TEST_CASE("verdicts do not depend on the first fresh name") {
    for (auto& ce : testkit::load_corpus(testkit::corpus_dir())) {
      CheckOptions o;
      o.name_offset = 7;
      auto a = check_equivalence(ce.left, ce.right), b = check_equivalence(ce.left, ce.right, o);
      CHECK_MESSAGE(a.verdict == b.verdict, ce.file);
      CHECK_MESSAGE(a.stats.nodes == b.stats.nodes, ce.file);
    }
  }
  TEST_CASE("zero call bound") {
    CheckOptions o;
    o.k_call = 0;
    auto r = check_equivalence(P("let x = ref 0 in fun f -> f (); !x"), P("fun f -> f (); 0"), o);
    CHECK(r.verdict == Verdict::Unknown);
    CHECK(r.reason == "CallBound");
  }
  TEST_CASE("mismatched types") {
    CHECK_THROWS_AS(check_equivalence(P("1"), P("true")), TypeError);
    CHECK_THROWS_AS(check_stacked(P("1"), P("true")), TypeError);
  }
  TEST_CASE("json report") {
    auto j = nlohmann::json::parse(result_json(check_equivalence(P("fun f -> f (); 0"), P("fun f -> f (); 1"))));
    CHECK(j["verdict"] == "Inequivalent");
    CHECK(j["counterexample"]["reject_step"] == 4);
    CHECK(j["sigma"]["non_diamond_edges"].is_number());
  }
  TEST_CASE("timeouts") {
    CheckOptions o;
    o.timeout_s = 1e-9;
    o.fallback = false;
    auto r = check_equivalence(P("let x = ref 0 in fun f -> f (); !x"), P("fun f -> f (); 0"), o);
    CHECK(r.verdict == Verdict::Unknown);
    CHECK(r.reason == "Timeout");
  }
}

TEST_SUITE("stacked oracle") {
  TEST_CASE("finds the same inequivalence") {
    auto r = check_stacked(P("fun f -> f (); 0"), P("fun f -> f (); 1"));
    REQUIRE(r.verdict == Verdict::Inequivalent);
    CHECK(r.cex->trace.size() == 5);
  }
  TEST_CASE("nested calls exhaust the bound where the pushdown game succeeds") {
    CheckOptions o;
    o.k_call = 4;
    auto r = check_stacked(P("let x = ref 0 in fun f -> f (); !x"), P("fun f -> f (); 0"), o);
    CHECK(r.verdict == Verdict::Unknown);
    CHECK(r.reason == "CallBound");
  }
  TEST_CASE("reflexive pairs") {
    for (auto& ce : testkit::load_corpus(testkit::corpus_dir())) {
      CheckOptions o;
      o.k_call = 3;
      o.timeout_s = 5;
      CHECK_MESSAGE(check_stacked(ce.left, ce.left, o).verdict != Verdict::Inequivalent, ce.file);
    }
  }
}

TEST_SUITE("differential") {
  TEST_CASE("identical inputs are consistent") {
    E m = P("fun f -> f (); 0");
    CHECK_FALSE(differential(m, m).contradiction);
  }
  TEST_CASE("a doctored verdict is flagged") {
    E m = P("fun f -> f (); 0"), n = P("fun f -> f (); 1");
    auto d = differential(m, n);
    REQUIRE_FALSE(d.contradiction);
    CheckResult bad = d.pdnf;
    bad.verdict = Verdict::Equivalent;
    bad.cex.reset();
    CHECK(contradiction(m, n, bad, d.stacked, 100000));
  }
  TEST_CASE("a trace accepted by both sides is flagged") {
    E m = P("fun f -> f (); 0");
    auto d = differential(m, P("fun f -> f (); 1"));
    REQUIRE(d.pdnf.cex);
    CheckResult unk;
    CHECK(contradiction(m, m, d.pdnf, unk, 100000));
  }
}
