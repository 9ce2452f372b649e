"""BLEU-1, Exact Match, macro answer metrics and the NQT error taxonomy."""
from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field

from .nqt import nqt_tokens

ERROR_TAGS = ("TripleFlip", "WrongVar", "WrongQuantity", "Other")


@dataclass(frozen=True)
class BleuDetail:
    score: float
    p1: float
    bp: float
    c: int
    r: int


def bleu1_detail(candidate, reference):
    candidate, reference = list(candidate), list(reference)
    if not candidate or not reference:
        raise ValueError("BLEU-1 needs non-empty candidate and reference sequences")
    c, r = len(candidate), len(reference)
    ref_counts = Counter(reference)
    matches = sum(min(n, ref_counts[tok]) for tok, n in Counter(candidate).items())
    p1 = matches / c
    bp = 1.0 if c >= r else math.exp(1.0 - r / c)
    score = bp * math.exp(math.log(p1)) if p1 > 0 else 0.0
    return BleuDetail(score, p1, bp, c, r)


def bleu1(candidate, reference):
    """Clipped unigram precision times the brevity penalty.

    >>> round(bleu1("a b c".split(), "a b d".split()), 4)
    0.6667
    """
    return bleu1_detail(candidate, reference).score


def nqt_bleu_tokens(nqt):
    """Tokens BLEU-1 is computed over: NQT fields without separators."""
    return nqt_tokens(nqt, separators_included=False) if nqt is not None and len(nqt) else []


def exact_match(pred, gold):
    if pred is None or gold is None:
        return 0
    return int(Counter(pred.triples) == Counter(gold.triples))


# -- answers ------------------------------------------------------------------


def question_pr(system, gold):
    """Per-question precision and recall over answer sets."""
    system, gold = set(system), set(gold)
    if not system:
        return (1.0, 1.0) if not gold else (0.0, 0.0)
    if not gold:
        return 0.0, 0.0
    correct = len(system & gold)
    return correct / len(system), correct / len(gold)


def macro_metrics(pairs):
    """Macro precision, recall and F1 over ``(system answers, gold answers)`` pairs.

    F1 is the harmonic mean of the averaged precision and recall.
    """
    pairs = list(pairs)
    if not pairs:
        return 0.0, 0.0, 0.0
    prs = [question_pr(s, g) for s, g in pairs]
    p = sum(x for x, _ in prs) / len(prs)
    r = sum(y for _, y in prs) / len(prs)
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f1


# -- error taxonomy ---------------------------------------------------------------


def _wrong_var(a, b):
    diff = [i for i, (x, y) in enumerate(zip(a, b)) if x != y]
    return len(diff) == 1 and a[diff[0]].is_variable and b[diff[0]].is_variable


def classify_error(pred, gold):
    """Multi-label error tags for a mismatching prediction."""
    tags = set()
    pred_triples = list(pred) if pred is not None else []
    gold_triples = list(gold)
    for t in pred_triples:
        if t in gold_triples:
            continue
        if any(t == g.swapped() for g in gold_triples):
            tags.add("TripleFlip")
        if any(_wrong_var(t, g) for g in gold_triples):
            tags.add("WrongVar")
    if len(pred_triples) != len(gold_triples):
        tags.add("WrongQuantity")
    return tags or {"Other"}


# -- report ---------------------------------------------------------------------


@dataclass
class QuestionRecord:
    id: str
    question: str
    gold: str
    predicted: str
    exact_match: int
    bleu1: float
    c: int
    r: int
    errors: list = field(default_factory=list)
    precision: float | None = None
    recall: float | None = None


@dataclass
class EvalReport:
    bleu1: float = 0.0
    exact_match: float = 0.0
    macro_p: float | None = None
    macro_r: float | None = None
    macro_f1: float | None = None
    error_counts: dict = field(default_factory=lambda: {t: 0 for t in ERROR_TAGS})
    records: list = field(default_factory=list)
    label: str = ""

    @property
    def n(self):
        return len(self.records)

    def summary(self):
        out = {"label": self.label, "n": self.n, "bleu1": self.bleu1, "exact_match": self.exact_match,
               "error_counts": dict(self.error_counts)}
        if self.macro_f1 is not None:
            out.update(macro_p=self.macro_p, macro_r=self.macro_r, macro_f1=self.macro_f1)
        return out

    def to_dict(self):
        out = self.summary()
        out["records"] = [asdict(r) for r in self.records]
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def table(self):
        rows = [("questions", str(self.n)), ("BLEU-1", f"{self.bleu1:.4f}"),
                ("Exact Match", f"{self.exact_match:.4f}")]
        if self.macro_f1 is not None:
            rows += [("Macro P", f"{self.macro_p:.4f}"), ("Macro R", f"{self.macro_r:.4f}"),
                     ("Macro F1", f"{self.macro_f1:.4f}")]
        rows += [(f"errors: {k}", str(v)) for k, v in self.error_counts.items()]
        width = max(len(k) for k, _ in rows)
        title = [self.label] if self.label else []
        return "\n".join(title + [f"{k:<{width}}  {v}" for k, v in rows])

    def to_csv(self):
        buf = io.StringIO()
        names = list(QuestionRecord.__dataclass_fields__)
        writer = csv.DictWriter(buf, fieldnames=names, lineterminator="\n")
        writer.writeheader()
        for rec in self.records:
            row = asdict(rec)
            row["errors"] = "|".join(row["errors"])
            writer.writerow(row)
        return buf.getvalue()


def evaluate_nqts(predictions, golds, ids=None, questions=None, answers=None, label=""):
    """Score predicted NQTs (``None`` for unparseable output) against gold NQTs.

    ``answers`` optionally holds ``(system, gold)`` answer collections per
    question for the macro metrics.
    """
    predictions, golds = list(predictions), list(golds)
    if len(predictions) != len(golds):
        raise ValueError(f"{len(predictions)} predictions for {len(golds)} gold NQTs")
    ids = list(ids) if ids is not None else [str(i) for i in range(len(golds))]
    questions = list(questions) if questions is not None else [""] * len(golds)
    report = EvalReport(label=label)
    for i, (pred, gold) in enumerate(zip(predictions, golds)):
        ref = nqt_bleu_tokens(gold)
        cand = nqt_bleu_tokens(pred)
        detail = bleu1_detail(cand, ref) if cand else BleuDetail(0.0, 0.0, 0.0, 0, len(ref))
        em = exact_match(pred, gold)
        errors = [] if em else sorted(classify_error(pred, gold))
        for tag in errors:
            report.error_counts[tag] += 1
        report.records.append(QuestionRecord(ids[i], questions[i], str(gold), str(pred) if pred else "",
                                             em, detail.score, detail.c, detail.r, errors))
    n = max(len(golds), 1)
    report.bleu1 = sum(r.bleu1 for r in report.records) / n
    report.exact_match = sum(r.exact_match for r in report.records) / n
    if answers is not None:
        answers = list(answers)
        for rec, (system, gold) in zip(report.records, answers):
            rec.precision, rec.recall = question_pr(system, gold)
        report.macro_p, report.macro_r, report.macro_f1 = macro_metrics(answers)
    return report
