import csv
import io
import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nqtforge.evalkit import (
    ERROR_TAGS, bleu1, bleu1_detail, classify_error, evaluate_nqts, exact_match, macro_metrics,
    nqt_bleu_tokens, question_pr,
)
from nqtforge.nqt import Nqt, make_nqt

from oracles import bleu1_reference
from strategies import nqts

tokens = st.lists(st.sampled_from("abcde"), min_size=1, max_size=8)


def test_bleu_two_of_three():
    assert bleu1("a b c".split(), "a b d".split()) == pytest.approx(2 / 3, abs=1e-15)


def test_bleu_brevity_penalty():
    detail = bleu1_detail(["a"], ["a", "b"])
    assert detail.p1 == 1.0
    assert abs(detail.score - math.exp(-1)) < 1e-12


def test_bleu_clips_repeats():
    assert bleu1(["a", "a", "a"], ["a", "b", "c"]) == pytest.approx(1 / 3)


def test_bleu_rejects_empty():
    with pytest.raises(ValueError):
        bleu1([], ["a"])


@given(tokens, tokens)
def test_bleu_matches_reference_and_is_bounded(cand, ref):
    score = bleu1(cand, ref)
    assert score == pytest.approx(bleu1_reference(cand, ref), abs=1e-15)
    assert 0.0 <= score <= 1.0


@given(tokens)
def test_bleu_self_is_one(seq):
    assert bleu1(seq, seq) == 1.0


def test_bleu_tokens_skip_separators():
    nqt = make_nqt(("?ans", "director", "Stanley Kubrick"))
    assert nqt_bleu_tokens(nqt) == ["ans", "director", "Stanley", "Kubrick"]
    assert nqt_bleu_tokens(None) == []


def test_exact_match_examples():
    gold = make_nqt(("NER1", "spouse", "?ans"), ("?ans", "rdf:type", "person"))
    assert exact_match(Nqt(reversed(gold.triples)), gold) == 1
    assert exact_match(make_nqt(("?ans", "spouse", "NER1"), ("?ans", "rdf:type", "person")), gold) == 0
    assert exact_match(None, gold) == 0


@given(nqts, nqts)
def test_exact_match_is_symmetric(a, b):
    assert exact_match(a, b) == exact_match(b, a)
    assert exact_match(a, a) == 1


def test_question_pr_edge_cases():
    assert question_pr([], []) == (1.0, 1.0)
    assert question_pr([], ["x"]) == (0.0, 0.0)
    assert question_pr(["x"], []) == (0.0, 0.0)
    assert question_pr(["x", "y"], ["x"]) == (0.5, 1.0)


def test_macro_half():
    assert macro_metrics([(["a"], ["a"]), (["b"], ["c"])]) == (0.5, 0.5, 0.5)
    assert macro_metrics([]) == (0.0, 0.0, 0.0)


answer_sets = st.lists(st.sampled_from("abcd"), max_size=4)


@given(st.lists(st.tuples(answer_sets, answer_sets), min_size=1, max_size=6))
def test_macro_f1_bounded_by_p_and_r(pairs):
    p, r, f1 = macro_metrics(pairs)
    assert min(p, r) - 1e-12 <= f1 <= max(p, r) + 1e-12
    assert 0.0 <= f1 <= 1.0


def test_error_triple_flip():
    gold = make_nqt(("NER1", "spouse", "?ans"))
    assert classify_error(make_nqt(("?ans", "spouse", "NER1")), gold) == {"TripleFlip"}


def test_error_wrong_var():
    gold = make_nqt(("NER1", "spouse", "?ans"))
    assert classify_error(make_nqt(("NER1", "spouse", "?x")), gold) == {"WrongVar"}


def test_error_wrong_quantity():
    gold = make_nqt(("NER1", "spouse", "?ans"))
    pred = make_nqt(("NER1", "spouse", "?ans"), ("?ans", "rdf:type", "person"))
    assert classify_error(pred, gold) == {"WrongQuantity"}
    assert "WrongQuantity" in classify_error(None, gold)


def test_error_other_fallback():
    gold = make_nqt(("NER1", "spouse", "?ans"))
    assert classify_error(make_nqt(("NER1", "child", "?ans")), gold) == {"Other"}


def test_report_outputs():
    golds = [make_nqt(("NER1", "spouse", "?ans")), make_nqt(("?ans", "director", "NER1"))]
    preds = [golds[0], make_nqt(("NER1", "director", "?ans"))]
    report = evaluate_nqts(preds, golds, answers=[(["a"], ["a"]), (["b"], ["c"])], label="dev")
    assert report.exact_match == 0.5
    assert report.error_counts["TripleFlip"] == 1
    assert (report.macro_p, report.macro_r, report.macro_f1) == (0.5, 0.5, 0.5)
    data = json.loads(report.to_json())
    assert data["n"] == 2 and data["records"][1]["errors"] == ["TripleFlip"]
    rows = list(csv.DictReader(io.StringIO(report.to_csv())))
    assert [r["exact_match"] for r in rows] == ["1", "0"]
    assert "Macro F1" in report.table() and set(report.error_counts) == set(ERROR_TAGS)


def test_unparseable_prediction_scores_zero():
    report = evaluate_nqts([None], [make_nqt(("NER1", "spouse", "?ans"))])
    assert report.bleu1 == 0.0 and report.exact_match == 0.0
    with pytest.raises(ValueError):
        evaluate_nqts([None], [])
