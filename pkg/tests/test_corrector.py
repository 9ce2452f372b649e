import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nqtforge.corrector import (
    AddedPart, ExpectedSubgraph, NqtCorrector, RemovedPart, ReplacedPart, align_subgraphs, correct,
    infer_expected, needs_correction, refill, reslot,
)
from nqtforge.nqt import BasicType, Nqt, NqtTriple, Term, TermKind, load_catalog, make_nqt, nqt_parts
from nqtforge.preprocessing import (
    DictionaryNerProvider, MettLexicon, PreprocessedQuestion, TaggedQuestion, mett_tag, preprocess,
)

from oracles import ORACLE_LEXICON, min_part_edits, refill_sound, tagged_for, triple_domain

CATALOG = load_catalog()
TV_QUESTION = ("Name the TV show with the distributor as Broadcast syndication "
               "and has theme music composed by Primus")


def expected(cid):
    return ExpectedSubgraph(CATALOG.get(cid))


def tagged_from_counts(r, ner, cls=False):
    tokens = ["what"] + ["alpha", "beta"][:r] + ["NER"] * ner + (["gamma"] if cls else [])
    pq = PreprocessedQuestion(tokens, [f"E{i}" for i in range(ner)])
    return mett_tag(pq, ORACLE_LEXICON)


def tv_tagged():
    lexicon = MettLexicon.build(["distributor", "composed"], ["TV show"])
    pq = preprocess(TV_QUESTION, DictionaryNerProvider(["Broadcast syndication", "Primus"]))
    return mett_tag(pq, lexicon)


@pytest.mark.parametrize("r, ner, cls, cid", [(1, 1, False, "A"), (1, 2, False, "B"), (2, 1, False, "E"),
                                               (2, 2, False, "D"), (2, 1, True, "F")])
def test_infer_expected(r, ner, cls, cid):
    assert infer_expected(tagged_from_counts(r, ner, cls), CATALOG).id == cid


def test_infer_expected_miss():
    assert infer_expected(tagged_from_counts(0, 1), CATALOG) is None


def test_needs_correction():
    q = preprocess("what has alpha NER1 and beta NER2")
    conforming = make_nqt(("?ans", "alpha", "NER1"), ("?ans", "beta", "NER2"))
    assert not needs_correction(conforming, expected("D"), q)
    assert needs_correction(make_nqt(("NER1", "alpha", "?x")), expected("D"), q)
    foreign = make_nqt(("?ans", "alpha", "NER1"), ("?ans", "zeta", "NER2"))
    assert needs_correction(foreign, expected("D"), q)
    assert needs_correction(None, expected("D"), q)


def test_align_rewrites_then_adds():
    out, report = align_subgraphs(make_nqt(("NER1", "located", "?x")), expected("D"))
    assert out == Nqt([make_nqt(("NER1", "located", "?ans"))[0], make_nqt(("NER", "R", "?ans"))[0]])
    kinds = [type(e) for e in report.part_edits]
    assert kinds == [ReplacedPart, AddedPart]
    assert report.edits[0].from_type is BasicType.S3 and report.edits[0].to_type is BasicType.S2


def test_align_removes_surplus():
    nqt = make_nqt(("NER1", "a", "?ans"), ("?ans", "b", "NER2"), ("NER1", "c", "?x"))
    out, report = align_subgraphs(nqt, expected("D"))
    assert out == Nqt(nqt.triples[:2])
    assert [type(e) for e in report.part_edits] == [RemovedPart]


def test_align_conforming_is_untouched():
    nqt = make_nqt(("NER1", "a", "?x"), ("?x", "b", "?ans"))
    out, report = align_subgraphs(nqt, expected("E"))
    assert out == nqt and report.edits == []


def test_report_replays_edits():
    nqt = make_nqt(("NER1", "c", "?x"), ("?ans", "rdf:type", "gamma"), ("?x", "d", "NER2"))
    out, report = correct(nqt, tagged_from_counts(2, 2), CATALOG, seed=4)
    assert report.replay(nqt) == out


def test_tv_show_refill():
    nqt = make_nqt(("NER1", "distributor", "?ans"), ("NER", "R", "?ans"), ("?ans", "rdf:type", "movies"))
    filled, _, unfilled = refill(nqt, tv_tagged())
    assert str(filled) == "[(Broadcast syndication, distributor, ?ans), (Primus, composed, ?ans), " \
                          "(?ans, rdf:type, TV show)]"
    assert unfilled == []


def test_tv_show_correct_end_to_end():
    nqt = make_nqt(("NER1", "distributor", "?ans"), ("NER", "R", "?ans"), ("?ans", "rdf:type", "movies"))
    out, report = correct(nqt, tv_tagged(), CATALOG)
    assert report.expected.id == "G"
    assert out == make_nqt(("Broadcast syndication", "distributor", "?ans"), ("Primus", "composed", "?ans"),
                           ("?ans", "rdf:type", "TV show"))
    assert report.part_edits == []


def test_refill_with_empty_arrays_flags_every_slot():
    nqt = make_nqt(("NER1", "R", "?ans"), ("?ans", "rdf:type", "C"), ("NER", "R", "?x"))
    empty = TaggedQuestion((), question=PreprocessedQuestion(("what",)))
    filled, edits, unfilled = refill(nqt, empty)
    assert filled == nqt and edits == []
    assert {(u.index, u.position) for u in unfilled} == {(0, 0), (0, 1), (1, 2), (2, 0), (2, 1)}


def test_refill_never_reuses_an_entity_already_present():
    pool = ["Ann Lee", "Bob", "Cy Young"]
    for size in range(0, 4):
        for e_x in itertools.permutations(pool, size):
            tokens = ["what"] + ["NER"] * size
            pq = PreprocessedQuestion(tokens, e_x)
            tagged = TaggedQuestion((), e_x=e_x, question=pq)
            for first in [Term.entity(1), Term.entity(2)] + [Term.word(e) for e in e_x]:
                nqt = Nqt([NqtTriple(first, Term.word("p"), Term.ans()),
                           NqtTriple(Term.entity(0), Term.word("p"), Term.var())])
                for seed in range(3):
                    filled, edits, unfilled = refill(nqt, tagged, rng=random.Random(seed))
                    if first.kind is TermKind.WORD:
                        present = {first.text}
                    elif first.index <= size:
                        present = {e_x[first.index - 1]}
                    else:
                        present = set()
                    bare = filled[1].subject
                    if bare.kind is TermKind.WORD:
                        assert bare.text not in present
                    else:
                        assert any((u.index, u.position) == (1, 0) for u in unfilled)


def test_catalog_miss_passes_through():
    nqt = make_nqt(("?ans", "alpha", "NER1"))
    out, report = correct(nqt, tagged_from_counts(0, 0), CATALOG)
    assert out is nqt and report.skipped and report.edits == []


def test_unparseable_translation_is_built_from_skeletons():
    tagged = tagged_from_counts(2, 1)
    out, report = correct(None, tagged, CATALOG)
    assert nqt_parts(out) == report.expected.parts
    assert refill_sound(out, report, tagged.question)


def test_reslot():
    pq = PreprocessedQuestion(("is", "NER", "the", "spouse", "of", "NER"), ("Ann Lee", "Bob"))
    nqt = make_nqt(("Bob", "spouse", "Ann Lee"))
    assert reslot(nqt, pq) == make_nqt(("NER2", "spouse", "NER1"))
    assert reslot(None, pq) is None


DOMAIN = triple_domain()


@settings(max_examples=300, deadline=None)
@given(st.lists(st.sampled_from(DOMAIN), max_size=3), st.sampled_from("ABCDEFG"), st.integers(0, 5))
def test_correct_is_idempotent(triples, cid, seed):
    tagged = tagged_for(CATALOG.get(cid))
    once, _ = correct(Nqt(triples), tagged, CATALOG, seed=seed)
    twice, _ = correct(once, tagged, CATALOG, seed=seed)
    assert twice == once


@settings(max_examples=300, deadline=None)
@given(st.lists(st.sampled_from(DOMAIN), max_size=3), st.sampled_from("ABCDEFG"), st.integers(0, 5))
def test_three_triple_conformance_and_soundness(triples, cid, seed):
    tagged = tagged_for(CATALOG.get(cid))
    out, report = correct(Nqt(triples), tagged, CATALOG, seed=seed)
    assert nqt_parts(out) == report.expected.parts
    assert refill_sound(out, report, tagged.question)
    best = min_part_edits(list(nqt_parts(Nqt(triples)).elements()), list(report.expected.parts.elements()))
    assert len(report.part_edits) == best


def test_estimator_transform():
    corrector = NqtCorrector(seed=1, reslot_entities=True).fit()
    tagged = tv_tagged()
    nqt = make_nqt(("NER1", "distributor", "?ans"), ("NER", "R", "?ans"), ("?ans", "rdf:type", "movies"))
    (out,) = corrector.transform([(nqt, tagged)])
    assert out == make_nqt(("NER1", "distributor", "?ans"), ("NER2", "composed", "?ans"),
                           ("?ans", "rdf:type", "TV show"))
    assert len(corrector.reports_) == 1
    with pytest.raises(TypeError):
        corrector.transform([(nqt, "not tagged")])
