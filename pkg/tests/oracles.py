"""Independent reference implementations used by the tests."""
from __future__ import annotations

import itertools
import math
from collections import Counter, deque

from nqtforge.nqt import BasicType, Nqt, NqtTriple, Term, TermKind, nqt_parts
from nqtforge.preprocessing import MettLexicon, PreprocessedQuestion, mett_tag

VOCAB = ("alpha", "beta", "gamma", "delta")
NODES = (Term.ans(), Term.var(), Term.entity(1), Term.entity(2))
PROPERTY_PARTS = (BasicType.S1, BasicType.S2, BasicType.S3, BasicType.S4)


def triple_domain():
    """Property edges over every node pair and word, plus type constraints."""
    out = [NqtTriple(s, Term.word(w), o) for s in NODES for w in VOCAB for o in NODES]
    out += [NqtTriple(v, Term.rdf_type(), Term.word(w)) for v in NODES[:2] for w in VOCAB]
    return out


def nqt_domain(max_triples=2):
    """Every ordered NQT of at most ``max_triples`` triples over the domain."""
    dom = triple_domain()
    yield Nqt(())
    for k in range(1, max_triples + 1):
        for combo in itertools.product(dom, repeat=k):
            yield Nqt(combo)


# properties alpha/beta and class gamma occur in the question; delta never does
ORACLE_LEXICON = MettLexicon.build(["alpha", "beta"], ["gamma"])
ENTITIES = ("Ent One", "Ent Two")


def question_for(entry):
    """A slotted question whose METT counts select catalog ``entry``."""
    tokens = ["what"] + list(VOCAB[: entry.r_count]) + ["NER"] * entry.ner_count
    if entry.type_constraint:
        tokens.append("gamma")
    return PreprocessedQuestion(tokens, ENTITIES[: entry.ner_count], " ".join(tokens))


def tagged_for(entry):
    return mett_tag(question_for(entry), ORACLE_LEXICON)


def _freeze(counter):
    return tuple(sorted(((("~" if k is None else k.value), v) for k, v in counter.items() if v), key=str))


def min_part_edits(parts, expected):
    """Breadth-first search for the fewest replace/add/remove steps between part multisets.

    A replace turns any one part into any expected part; an add inserts an
    expected part; a remove deletes any part.
    """
    start, goal = Counter(parts), Counter(expected)
    targets = sorted(set(goal), key=lambda p: p.value)
    seen = {_freeze(start)}
    queue = deque([(start, 0)])
    while queue:
        state, dist = queue.popleft()
        if _freeze(state) == _freeze(goal):
            return dist
        nexts = []
        for part in [p for p, n in state.items() if n]:
            removed = state.copy()
            removed[part] -= 1
            nexts.append(removed)
            for t in targets:
                if t != part:
                    swapped = removed.copy()
                    swapped[t] += 1
                    nexts.append(swapped)
        for t in targets:
            added = state.copy()
            added[t] += 1
            nexts.append(added)
        for nxt in nexts:
            key = _freeze(nxt)
            if key not in seen and sum(nxt.values()) <= sum(goal.values()) + sum(start.values()):
                seen.add(key)
                queue.append((nxt, dist + 1))
    raise AssertionError("goal unreachable")


def refill_sound(nqt, report, question):
    """Every word in ``nqt`` is mentioned in the question or its slot is flagged."""
    from nqtforge.preprocessing import mentions

    flagged = {(u.index, u.position) for u in report.unfilled}
    for i, triple in enumerate(nqt):
        for pos, term in enumerate(triple):
            if term.kind is TermKind.WORD and not mentions(question, term.text) and (i, pos) not in flagged:
                return False
            if term.kind in (TermKind.RELATION, TermKind.CLASS) or (term.kind is TermKind.ENTITY and not term.index):
                if (i, pos) not in flagged:
                    return False
    return True


def parts_equal(nqt, expected):
    return nqt_parts(nqt) == expected.parts


# -- numerics ---------------------------------------------------------------------


def bleu1_reference(candidate, reference):
    """Direct transcription of BP * exp(log p1) with clipped counts."""
    c, r = len(candidate), len(reference)
    ref = Counter(reference)
    p1 = sum(min(n, ref[w]) for w, n in Counter(candidate).items()) / c
    bp = 1.0 if c >= r else math.exp(1 - r / c)
    return 0.0 if p1 == 0 else bp * math.exp(math.log(p1))
