import os
from pathlib import Path

import pytest

import pdnf

CORPUS = Path(os.environ.get("PDNF_CORPUS", Path(__file__).resolve().parents[2] / "corpus"))


def test_dummy_equivalent():
    r = pdnf.check("let x = ref 0 in fun f -> f (); !x", "fun f -> f (); 0")
    assert r["verdict"] == "Equivalent"
    assert r["sigma"]["non_diamond_edges"] == 2
    assert "digraph" in r["dot"]


def test_inequivalent_with_trace():
    r = pdnf.check("fun f -> f (); 0", "fun f -> f (); 1")
    assert r["verdict"] == "Inequivalent"
    assert r["counterexample"]["reject_step"] == 4
    ok = pdnf.replay(r["trace"], "fun f -> f (); 0", engine="stacked")
    bad = pdnf.replay(r["trace"], "fun f -> f (); 1")
    assert ok["accepted"] and ok["terminated"]
    assert not bad["accepted"] and bad["reject_step"] == 4


def test_bounds_and_stacked():
    r = pdnf.check("let x = ref 0 in fun f -> f (); !x", "fun f -> f (); 0", k_call=0)
    assert (r["verdict"], r["reason"]) == ("Unknown", "CallBound")
    s = pdnf.check_stacked("let x = ref 0 in fun f -> f (); !x", "fun f -> f (); 0", k_call=4)
    assert s["verdict"] == "Unknown"


def test_corpus_file():
    assert pdnf.check_file(CORPUS / "example1.prog")["verdict"] == "Equivalent"


def test_errors():
    with pytest.raises(pdnf.ParseError):
        pdnf.typecheck("fun ->")
    with pytest.raises(pdnf.TypeError):
        pdnf.check("1", "true")
    with pytest.raises(KeyError):
        pdnf.check("1", "1", bogus=1)
    with pytest.raises(ValueError):
        pdnf.check("1", "1", k_call=-1)


def test_typecheck_and_pretty():
    assert pdnf.typecheck("fun (x : int) -> x + 1") == "int -> int"
    assert pdnf.pretty("fun f -> f (); 0") == "fun f -> f (); 0"
