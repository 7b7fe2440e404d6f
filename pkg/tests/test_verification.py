import random

import pytest

from conftest import graph
from oracles import random_graph

from fid.errors import InputError
from fid.structures import GRAPH_VOCAB, Vocabulary, enumerate_structures
from fid.logic import parse_formula
from fid.synthesis import (exceptional_graph, exceptional_graph_formula,
                           synth_auto, synth_naive_define,
                           synth_naive_identify, synth_sigma)
from fid.games import identification_rank
from fid.verification import (audit_corpus, verify_defines_up_to,
                              verify_identifies)


def test_sigma_formula_identifies_triangle(k3):
    verdict = verify_identifies(k3, synth_sigma(k3).formula, graph_mode=True)
    assert verdict.passed and verdict.rivals_checked == 3
    assert verdict.counterexample is None


def test_exceptional_formula_identifies(h5):
    verdict = verify_identifies(h5, exceptional_graph_formula(), graph_mode=True)
    assert verdict.passed and verdict.rivals_checked == 33


def test_unsatisfied_formula_fails_immediately(k3):
    phi = parse_formula("EX x . !E(x,x) & E(x,x)", GRAPH_VOCAB)
    verdict = verify_identifies(k3, phi, graph_mode=True)
    assert not verdict.passed and verdict.counterexample == k3
    assert verdict.rivals_checked == 0


def test_weak_formula_fails_with_counterexample(edge2):
    phi = parse_formula("EX x . EX y . E(x,y)", GRAPH_VOCAB)
    assert verify_identifies(edge2, phi, graph_mode=True).passed
    one_edge3 = graph(3, [(0, 1)])
    verdict = verify_identifies(one_edge3, phi, graph_mode=True)
    assert not verdict.passed
    assert verdict.counterexample is not None
    # first satisfying rival in enumeration order, reproducibly
    again = verify_identifies(one_edge3, phi, graph_mode=True)
    assert again.counterexample == verdict.counterexample


def test_naive_identify_passes_small_corpus():
    for n in range(1, 5):
        for struct in enumerate_structures(GRAPH_VOCAB, n, graph_mode=True):
            assert verify_identifies(struct, synth_naive_identify(struct).formula,
                                     graph_mode=True).passed
    for struct in enumerate_structures(GRAPH_VOCAB, 3):
        assert verify_identifies(struct, synth_naive_identify(struct).formula).passed


def test_defines_up_to(k3):
    assert verify_defines_up_to(k3, synth_naive_define(k3).formula, 5,
                                graph_mode=True).passed
    verdict = verify_defines_up_to(k3, synth_naive_identify(k3).formula, 4,
                                   graph_mode=True)
    assert not verdict.passed and verdict.counterexample.order == 4
    with pytest.raises(InputError):
        verify_defines_up_to(k3, synth_naive_identify(k3).formula, 2)


def test_identification_rank_bounded_by_quantifier_count():
    # a verified prenex identifier with t quantifiers forces game rank <= t
    rng = random.Random(97)
    for _ in range(10):
        struct = random_graph(rng.randrange(2, 5), rng)
        result = synth_auto(struct)
        verdict = verify_identifies(struct, result.formula, graph_mode=True)
        assert verdict.passed
        assert identification_rank(struct, graph_mode=True) <= result.metrics.quantifiers


def test_audit_corpus_graphs4():
    report = audit_corpus(GRAPH_VOCAB, 4, graph_mode=True)
    assert report.ok
    assert report.summary["structures"] == 11
    assert report.summary["min_max_sigma_delta"] == 2
    assert {r["method"] for r in report.records} == {"graph"}
    line_count = len(report.to_jsonl().splitlines())
    assert line_count == 11


def test_audit_corpus_workers_deterministic():
    serial = audit_corpus(GRAPH_VOCAB, 4, graph_mode=True, workers=1)
    parallel = audit_corpus(GRAPH_VOCAB, 4, graph_mode=True, workers=2)
    assert serial.records == parallel.records
    assert serial.summary == parallel.summary


def test_audit_corpus_digraphs3():
    report = audit_corpus(GRAPH_VOCAB, 3)
    assert report.ok and report.summary["structures"] == 104


def test_audit_corpus_unary():
    unary = Vocabulary((("P", 1),))
    report = audit_corpus(unary, 6)
    assert report.ok and report.summary["structures"] == 7
    assert report.summary["max_quantifiers"] <= 4
