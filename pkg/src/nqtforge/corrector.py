"""Subgraph-type correction of translated NQTs.

The expected composite type of a question is looked up from its METT counts.
A translated NQT that does not conform is aligned to it with as few part
edits as possible (retain, rewrite, add, remove) and its slots are then
refilled from the question's entity, property and class words.
"""
from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .nqt import (
    SKELETON_NODES,
    BasicType,
    CompositeType,
    Nqt,
    NqtTriple,
    Term,
    TermKind,
    load_catalog,
    nqt_parts,
    part_of,
    Catalog,
)
from .preprocessing import TaggedQuestion, mentions, stem_phrase


@dataclass(frozen=True)
class ExpectedSubgraph:
    composite: CompositeType

    @property
    def parts(self):
        return self.composite.expected_parts()

    @property
    def id(self):
        return self.composite.id


# -- edits ----------------------------------------------------------------

@dataclass(frozen=True)
class ReplacedPart:
    index: int
    before: NqtTriple
    after: NqtTriple
    from_type: BasicType | None
    to_type: BasicType

    def apply(self, triples):
        triples[self.index] = self.after

    def __str__(self):
        return f"replace {self.index} {self.before} -> {self.after} [{self.from_type}->{self.to_type}]"


@dataclass(frozen=True)
class RemovedPart:
    index: int
    triple: NqtTriple
    type: BasicType | None

    def apply(self, triples):
        del triples[self.index]

    def __str__(self):
        return f"remove {self.index} {self.triple} [{self.type}]"


@dataclass(frozen=True)
class AddedPart:
    index: int
    triple: NqtTriple
    type: BasicType

    def apply(self, triples):
        triples.insert(self.index, self.triple)

    def __str__(self):
        return f"add {self.index} {self.triple} [{self.type}]"


@dataclass(frozen=True)
class Filled:
    kind: str  # entity | relation | class
    index: int
    position: int
    before: Term
    after: Term

    def apply(self, triples):
        triples[self.index] = triples[self.index].replace(self.position, self.after)

    def __str__(self):
        return f"fill-{self.kind} {self.index}.{self.position} {self.before} -> {self.after}"


PART_EDITS = (ReplacedPart, RemovedPart, AddedPart)


@dataclass(frozen=True)
class Unfilled:
    index: int
    position: int
    term: Term
    reason: str

    def __str__(self):
        return f"unfilled {self.index}.{self.position} {self.term}: {self.reason}"


@dataclass
class CorrectionReport:
    edits: list = field(default_factory=list)
    corrected: Nqt | None = None
    expected: ExpectedSubgraph | None = None
    unfilled: list = field(default_factory=list)
    skipped: str | None = None

    @property
    def part_edits(self):
        return [e for e in self.edits if isinstance(e, PART_EDITS)]

    def replay(self, nqt):
        triples = list(nqt) if nqt is not None else []
        for edit in self.edits:
            edit.apply(triples)
        return Nqt(triples)

    def audit_lines(self):
        lines = []
        if self.skipped:
            lines.append(f"pass-through: {self.skipped}")
        if self.expected is not None:
            lines.append(f"expected {self.expected.id}")
        lines.extend(str(e) for e in self.edits)
        lines.extend(str(u) for u in self.unfilled)
        return lines


# -- expected type --------------------------------------------------------

def infer_expected(tagged, catalog):
    """Catalog entry keyed by (|r_x|, |e_x|, c_x non-empty), or ``None``."""
    entry = catalog.lookup(len(tagged.r_x), len(tagged.e_x), bool(tagged.c_x))
    return ExpectedSubgraph(entry) if entry is not None else None


def _word_ok(term, question):
    return term.kind is not TermKind.WORD or question is None or mentions(question, term.text)


def needs_correction(nqt, expected, question=None):
    """True when the NQT's parts differ from ``expected`` or it holds foreign words."""
    if nqt is None or not len(nqt):
        return True
    if nqt_parts(nqt) != expected.parts:
        return True
    for triple in nqt:
        for term in triple:
            if term.kind in (TermKind.RELATION, TermKind.CLASS):
                return True
            if not _word_ok(term, question):
                return True
    return False


# -- alignment ------------------------------------------------------------

def _label(term):
    if term.kind is TermKind.ANS:
        return "ans"
    if term.kind is TermKind.VAR:
        return "x"
    return "NER"


def rewrite_triple(triple, target):
    """Rewrite the node positions of ``triple`` so it has basic type ``target``.

    Only the nodes whose abstract label differs are touched; of the two
    orientations the one needing fewer changes wins, ties keep the written
    direction.
    """
    a, b = SKELETON_NODES[target]
    best = None
    for first, second in ((a, b), (b, a)):
        cost = (_label(triple.subject) != _label(first)) + (_label(triple.object) != _label(second))
        if best is None or cost < best[0]:
            best = (cost, first, second)
    _, first, second = best
    subject = triple.subject if _label(triple.subject) == _label(first) else first
    obj = triple.object if _label(triple.object) == _label(second) else second
    return NqtTriple(subject, triple.predicate, obj)


def skeleton(part):
    if part is BasicType.TC:
        return NqtTriple(Term.ans(), Term.rdf_type(), Term.class_slot())
    s, o = SKELETON_NODES[part]
    return NqtTriple(s, Term.relation(), o)


def _order(part):
    return "~" if part is None else part.value


def _convert(triple, part):
    """Rewrite ``triple`` into basic type ``part``, crossing the TC boundary if needed."""
    if part is BasicType.TC:
        if triple.is_type_constraint:
            return triple
        var = next((t for t in (triple.subject, triple.object) if t.is_variable), Term.ans())
        return NqtTriple(var, Term.rdf_type(), Term.class_slot())
    if triple.is_type_constraint:
        triple = NqtTriple(triple.subject, Term.relation(), Term.entity())
    return rewrite_triple(triple, part)


def align_subgraphs(nqt, expected, rng=None):
    """Make the NQT's parts equal ``expected.parts`` with minimal part edits.

    Returns ``(aligned, report)``.  Retained triples consume expected parts
    in NQT order; each remaining triple is rewritten to a randomly chosen
    unconsumed part, preferring one of its own kind (type constraint or
    property edge); leftover triples are removed and leftover parts added
    as skeletons.
    """
    rng = rng if rng is not None else random.Random(0)
    triples = list(nqt) if nqt is not None else []
    types = [part_of(t) for t in triples]
    remaining = Counter(expected.parts)
    unmatched = []
    for i, part in enumerate(types):
        if part is not None and remaining[part] > 0:
            remaining[part] -= 1
        else:
            unmatched.append(i)
    pool = sorted(remaining.elements(), key=_order)
    rng.shuffle(pool)

    report = CorrectionReport(expected=expected)
    removals = []
    for i in unmatched:
        is_tc = types[i] is BasicType.TC
        pick = next((p for p in pool if (p is BasicType.TC) == is_tc), None)
        if pick is None:
            pick = next(iter(pool), None)
        if pick is None:
            removals.append(i)
            continue
        pool.remove(pick)
        after = _convert(triples[i], pick)
        report.edits.append(ReplacedPart(i, triples[i], after, types[i], pick))
        triples[i] = after
    for i in reversed(removals):
        report.edits.append(RemovedPart(i, triples[i], types[i]))
        del triples[i]

    pos = max((k + 1 for k, t in enumerate(triples) if not t.is_type_constraint), default=0)
    for part in pool:
        triple = skeleton(part)
        if part is BasicType.TC:
            index = len(triples)
        else:
            index = pos
            pos += 1
        triples.insert(index, triple)
        report.edits.append(AddedPart(index, triple, part))
    aligned = Nqt(triples)
    report.corrected = aligned
    return aligned, report


# -- refill ---------------------------------------------------------------

def _key(text):
    return stem_phrase(text.lower())


def refill(nqt, tagged, rng=None):
    """Fill entity slots, relation markers and class objects from METT arrays.

    Returns ``(filled, edits, unfilled)``.
    """
    rng = rng if rng is not None else random.Random(0)
    question = tagged.question
    triples = list(nqt)
    edits, unfilled = [], []
    e_x, r_x, c_x = list(tagged.e_x), list(tagged.r_x), list(tagged.c_x)

    def put(kind, i, pos, value):
        before = triples[i][pos]
        after = Term.word(value)
        triples[i] = triples[i].replace(pos, after)
        edits.append(Filled(kind, i, pos, before, after))

    def node_positions():
        for i, tr in enumerate(triples):
            yield i, 0
            if not tr.is_type_constraint:
                yield i, 2

    used = set()
    for i, pos in node_positions():
        term = triples[i][pos]
        if term.kind is TermKind.ENTITY and term.index:
            if term.index <= len(e_x):
                used.add(_key(e_x[term.index - 1]))
        elif term.kind is TermKind.WORD:
            used.add(_key(term.text))

    for i, pos in node_positions():
        term = triples[i][pos]
        if term.kind is TermKind.ENTITY and term.index:
            if term.index <= len(e_x):
                put("entity", i, pos, e_x[term.index - 1])
            else:
                unfilled.append(Unfilled(i, pos, term, f"no entity #{term.index} in question"))
    for i, pos in node_positions():
        term = triples[i][pos]
        bare = term.kind is TermKind.ENTITY and not term.index
        foreign = term.kind is TermKind.WORD and question is not None and not mentions(question, term.text)
        if not (bare or foreign):
            continue
        free = [e for e in e_x if _key(e) not in used]
        if not free:
            unfilled.append(Unfilled(i, pos, term, "no unused entity"))
            continue
        pick = rng.choice(free)
        used.add(_key(pick))
        put("entity", i, pos, pick)

    present = {_key(t.predicate.text) for t in triples if t.predicate.kind is TermKind.WORD}
    for i, tr in enumerate(triples):
        if tr.is_type_constraint:
            continue
        p = tr.predicate
        if p.kind is TermKind.WORD and (question is None or mentions(question, p.text)):
            continue
        pick = next((r for r in r_x if _key(r) not in present), None)
        if pick is None:
            unfilled.append(Unfilled(i, 1, p, "no unused property word"))
            continue
        present.add(_key(pick))
        put("relation", i, 1, pick)

    used_classes = {_key(t.object.text) for t in triples if t.is_type_constraint and t.object.kind is TermKind.WORD}
    for i, tr in enumerate(triples):
        if not tr.is_type_constraint:
            continue
        o = tr.object
        if o.kind is TermKind.WORD and (question is None or mentions(question, o.text)):
            continue
        if not c_x:
            unfilled.append(Unfilled(i, 2, o, "no class word"))
            continue
        pick = next((c for c in c_x if _key(c) not in used_classes), c_x[0])
        used_classes.add(_key(pick))
        put("class", i, 2, pick)
    return Nqt(triples), edits, unfilled


# -- pipeline -------------------------------------------------------------

def correct(nqt, tagged, catalog, seed=0):
    """Full correction: expected type, conformance check, alignment, refill.

    ``nqt`` may be ``None`` when the translation could not be parsed; with a
    catalog match the result is then built from skeletons.
    """
    expected = infer_expected(tagged, catalog)
    if expected is None:
        key = (len(tagged.r_x), len(tagged.e_x), bool(tagged.c_x))
        return nqt, CorrectionReport(corrected=nqt, skipped=f"no catalog entry for (r, ner, class)={key}")
    if not needs_correction(nqt, expected, tagged.question):
        return nqt, CorrectionReport(corrected=nqt, expected=expected)
    rng = random.Random(seed)
    aligned, report = align_subgraphs(nqt, expected, rng)
    filled, fills, unfilled = refill(aligned, tagged, rng)
    report.edits.extend(fills)
    report.unfilled = unfilled
    report.corrected = filled
    return filled, report


def reslot(nqt, question):
    """Turn entity surfaces back into numbered slots (``NER1``, ``NER2``)."""
    if nqt is None:
        return None
    index = {}
    for k, surface in enumerate(question.ner_surface, 1):
        if k <= 2:
            index.setdefault(_key(surface), k)
    out = []
    for tr in nqt:
        terms = list(tr)
        for pos in (0, 2):
            t = terms[pos]
            if t.kind is TermKind.WORD and _key(t.text) in index and not (pos == 2 and tr.is_type_constraint):
                terms[pos] = Term.entity(index[_key(t.text)])
        out.append(NqtTriple(*terms))
    return Nqt(out)


class NqtCorrector(BaseEstimator, TransformerMixin):
    """Corrects translated NQTs against the expected subgraph type.

    ``transform`` takes ``(nqt, tagged_question)`` pairs, where ``nqt`` may
    be ``None`` for an unparseable translation, and returns corrected NQTs.
    Per-item reports are kept in ``reports_``.
    """

    def __init__(self, catalog=None, seed=0, reslot_entities=False):
        self.catalog = catalog
        self.seed = seed
        self.reslot_entities = reslot_entities

    def fit(self, X=None, y=None):
        self.catalog_ = self.catalog if isinstance(self.catalog, Catalog) else load_catalog(self.catalog)
        return self

    def transform(self, X):
        check_is_fitted(self, "catalog_")
        out, self.reports_ = [], []
        for nqt, tagged in X:
            if not isinstance(tagged, TaggedQuestion):
                raise TypeError(f"expected TaggedQuestion, got {type(tagged).__name__}")
            fixed, report = correct(nqt, tagged, self.catalog_, seed=self.seed)
            if self.reslot_entities and tagged.question is not None:
                fixed = reslot(fixed, tagged.question)
            out.append(fixed)
            self.reports_.append(report)
        return out
