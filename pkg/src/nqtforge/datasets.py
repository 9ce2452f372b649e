"""Dataset records, LC-QuAD / QALD loaders and the synthetic template grammar."""
from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path

from .nqt import Nqt, NqtParseError, parse_nqt, serialize_nqt
from .preprocessing import DictionaryNerProvider, PreprocessedQuestion, preprocess
from .sparql import (
    PREFIXES, RDF_TYPE, AnswerType, SparqlError, TripleStore, classify_question, entity_label,
    is_iri, is_variable, parse_sparql, sparql_to_nqt, strip_parenthetical,
)

log = logging.getLogger(__name__)

SPLITS = ("train", "test")


class DatasetError(ValueError):
    pass


@dataclass
class DatasetRecord:
    id: str
    question: str
    gold_sparql: str
    gold_nqt: Nqt
    answer_type: AnswerType
    split: str = "train"
    tokens: tuple = ()
    ner_surface: tuple = ()

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {self.split!r}")
        self.answer_type = AnswerType(self.answer_type)
        self.tokens, self.ner_surface = tuple(self.tokens), tuple(self.ner_surface)

    @property
    def preprocessed(self):
        return PreprocessedQuestion(self.tokens, self.ner_surface, self.question)

    def to_dict(self):
        return {"id": self.id, "question": self.question, "gold_sparql": self.gold_sparql,
                "gold_nqt": serialize_nqt(self.gold_nqt), "answer_type": self.answer_type.value,
                "split": self.split, "tokens": list(self.tokens), "ner_surface": list(self.ner_surface)}

    @classmethod
    def from_dict(cls, d):
        try:
            nqt, _ = parse_nqt(d["gold_nqt"])
            return cls(str(d["id"]), d["question"], d["gold_sparql"], nqt, d["answer_type"], d["split"],
                       d.get("tokens", ()), d.get("ner_surface", ()))
        except (KeyError, NqtParseError) as exc:
            raise DatasetError(f"bad normalized record {d.get('id', '?')}: {exc}") from None


class Corpus(list):
    """Records plus the exclusions met while loading and an optional fixture store."""

    def __init__(self, records=(), exclusions=(), store=None):
        super().__init__(records)
        self.exclusions = list(exclusions)
        self.store = store

    def split(self, name):
        return [r for r in self if r.split == name]

    def dumps(self):
        payload = {"records": [r.to_dict() for r in self],
                   "exclusions": [{"id": i, "reason": why} for i, why in self.exclusions]}
        return json.dumps(payload, indent=1, sort_keys=True, ensure_ascii=False) + "\n"

    @classmethod
    def loads(cls, text):
        data = json.loads(text)
        records = [DatasetRecord.from_dict(d) for d in data["records"]]
        return cls(records, [(e["id"], e["reason"]) for e in data.get("exclusions", [])])


def _entity_surfaces(query):
    out = []
    for s, p, o in query.triple_patterns:
        for term in (s, o) if p != RDF_TYPE else (s,):
            if not is_variable(term):
                label = entity_label(term)
                out.extend({label, strip_parenthetical(label)})
    return out


def build_record(rid, question, gold_sparql, split="train"):
    """Derive tokens, entity slots, gold NQT and answer type; raises on unsupported input."""
    if not question or not question.strip():
        raise DatasetError("empty question")
    query = parse_sparql(gold_sparql)
    pq = preprocess(question, DictionaryNerProvider(_entity_surfaces(query)))
    if len(pq.ner_surface) > 2:
        raise DatasetError(f"{len(pq.ner_surface)} entity mentions (at most 2 slots)")
    nqt = sparql_to_nqt(query, pq)
    return DatasetRecord(str(rid), question, gold_sparql, nqt, classify_question(question), split,
                         pq.tokens, pq.ner_surface)


def _collect(rows, split, source):
    records, exclusions = [], []
    for rid, question, sparql in rows:
        try:
            records.append(build_record(rid, question, sparql, split))
        except (SparqlError, DatasetError, ValueError) as exc:
            exclusions.append((str(rid), str(exc)))
            log.info("%s: excluded %s: %s", source, rid, exc)
    return Corpus(records, exclusions)


def _read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: malformed JSON: {exc}") from None


def load_lcquad(path, split="train"):
    data = _read_json(path)
    if not isinstance(data, list):
        raise DatasetError(f"{path}: expected a JSON array of records")
    rows = []
    for i, item in enumerate(data):
        for key in ("corrected_question", "intermediary_question", "sparql_query"):
            if key not in item:
                raise DatasetError(f"{path}: record {i} lacks field {key!r}")
        question = item["corrected_question"]
        if not isinstance(question, str) or question.strip().lower() in ("", "n/a"):
            question = item["intermediary_question"]
        rows.append((item.get("_id", i), question, item["sparql_query"]))
    return _collect(rows, split, path)


def load_qald(path, split="train", lang="en"):
    data = _read_json(path)
    try:
        items = data["questions"]
    except (KeyError, TypeError):
        raise DatasetError(f"{path}: expected an object with a 'questions' array") from None
    rows, missing = [], []
    for i, item in enumerate(items):
        try:
            sparql = item["query"]["sparql"]
            entries = item["question"]
        except (KeyError, TypeError):
            raise DatasetError(f"{path}: question {i} lacks question[] or query.sparql") from None
        text = next((q.get("string") for q in entries if q.get("language") == lang), None)
        rid = item.get("id", i)
        if text is None:
            missing.append((str(rid), f"no {lang} question"))
            continue
        rows.append((rid, text, sparql))
    corpus = _collect(rows, split, path)
    corpus.exclusions = missing + corpus.exclusions
    return corpus


# -- synthetic grammar -------------------------------------------------------------

PREDICATES = ("director", "author", "capital", "spouse", "founder", "birth place", "producer",
              "publisher", "developer", "owner", "successor", "mayor", "composer", "language")
CLASSES = {"film": "films", "city": "cities", "album": "albums", "book": "books",
           "company": "companies", "band": "bands", "country": "countries", "team": "teams"}
_SYLLABLES = ("ka", "ro", "mi", "tel", "van", "dor", "lu", "sa", "bre", "qui", "zan", "pho",
              "gar", "nel", "vi", "tos", "mar", "len", "dus", "ke")

# template id, composite type, question pattern, gold patterns, answer-var form
# gold pattern terms: E1/E2 entities, P1/P2 predicates, C class, ?uri / ?x variables
TEMPLATES = (
    ("a1", "A", "What is the {p1} of {e1}?", "SELECT", (("E1", "P1", "?uri"),)),
    ("a2", "A", "Who is the {p1} of {e1}?", "SELECT", (("E1", "P1", "?uri"),)),
    ("a3", "A", "What has the {p1} {e1}?", "SELECT", (("?uri", "P1", "E1"),)),
    ("a4", "A", "How many {p1} does {e1} have?", "COUNT", (("E1", "P1", "?uri"),)),
    ("b1", "B", "Is {e2} the {p1} of {e1}?", "ASK", (("E1", "P1", "E2"),)),
    ("b2", "B", "Does {e1} have the {p1} {e2}?", "ASK", (("E1", "P1", "E2"),)),
    ("c1", "C", "Which {c} is the {p1} of {e1}?", "SELECT", (("E1", "P1", "?uri"), ("?uri", "a", "C"))),
    ("c2", "C", "How many {cs} have the {p1} {e1}?", "COUNT", (("?uri", "P1", "E1"), ("?uri", "a", "C"))),
    ("d1", "D", "What has the {p1} {e1} and the {p2} {e2}?", "SELECT",
     (("?uri", "P1", "E1"), ("?uri", "P2", "E2"))),
    ("e1", "E", "What is the {p2} of the {p1} of {e1}?", "SELECT", (("E1", "P1", "?x"), ("?x", "P2", "?uri"))),
    ("f1", "F", "Which {c} is the {p2} of the {p1} of {e1}?", "SELECT",
     (("E1", "P1", "?x"), ("?x", "P2", "?uri"), ("?uri", "a", "C"))),
    ("g1", "G", "Which {c} has the {p1} {e1} and the {p2} {e2}?", "SELECT",
     (("?uri", "P1", "E1"), ("?uri", "P2", "E2"), ("?uri", "a", "C"))),
)


def _camel(label, upper_first):
    words = label.split()
    out = "".join(w.capitalize() for w in words)
    return out if upper_first else out[0].lower() + out[1:]


def predicate_iri(label):
    return f"<{PREFIXES['dbo']}{_camel(label, False)}>"


def class_iri(label):
    return f"<{PREFIXES['dbo']}{_camel(label, True)}>"


def entity_iri(name):
    return f"<{PREFIXES['dbr']}{name.replace(' ', '_')}>"


def _names(rng, count):
    names, seen = [], set()
    while len(names) < count:
        words = ["".join(rng.choice(_SYLLABLES) for _ in range(rng.randint(2, 3))).capitalize()
                 for _ in range(2)]
        name = " ".join(words)
        if name.lower() not in seen:
            seen.add(name.lower())
            names.append(name)
    return names


def _render_sparql(form, patterns):
    body = " . ".join(" ".join(patterns_term) for patterns_term in patterns)
    if form == "ASK":
        return f"ASK WHERE {{ {body} . }}"
    if form == "COUNT":
        return f"SELECT DISTINCT COUNT(?uri) WHERE {{ {body} . }}"
    return f"SELECT DISTINCT ?uri WHERE {{ {body} . }}"


def gen_synthetic(seed=7, n=600, n_test=0, entity_pool=400):
    """Deterministic template corpus covering the composite types A-G.

    The returned :class:`Corpus` carries a fixture ``store`` on which every
    gold query has at least one answer.  The last ``n_test`` records form
    the test split.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 <= n_test <= n:
        raise ValueError(f"n_test must lie in [0, {n}]")
    rng = random.Random(seed)
    names = _names(rng, entity_pool)
    store = TripleStore()
    classes = list(CLASSES)
    order = [TEMPLATES[i % len(TEMPLATES)] for i in range(n)]
    rng.shuffle(order)
    records = []
    for i, (tid, _ctype, pattern, form, gold) in enumerate(order):
        p1, p2 = rng.sample(PREDICATES, 2)
        cls = rng.choice(classes)
        e1, e2, ans, mid = rng.sample(names, 4)
        question = pattern.format(p1=p1, p2=p2, e1=e1, e2=e2, c=cls, cs=CLASSES[cls])
        bind = {"E1": entity_iri(e1), "E2": entity_iri(e2), "P1": predicate_iri(p1), "P2": predicate_iri(p2),
                "C": class_iri(cls), "a": RDF_TYPE, "?uri": entity_iri(ans), "?x": entity_iri(mid)}
        for s, p, o in gold:
            store.add(bind[s], bind[p], bind[o])
        # a distractor that shares the first predicate but not the entity
        store.add(entity_iri(rng.choice(names)), bind["P1"], entity_iri(rng.choice(names)))
        terms = [tuple(t if is_variable(t) else _compact(bind[t]) for t in pat) for pat in gold]
        sparql = _render_sparql(form, terms)
        split = "test" if i >= n - n_test else "train"
        records.append(build_record(f"syn-{i:05d}-{tid}", question, sparql, split))
    return Corpus(records, [], store)


def _compact(iri):
    if iri == RDF_TYPE:
        return "a"
    for prefix, ns in PREFIXES.items():
        if is_iri(iri) and iri[1:-1].startswith(ns):
            return f"{prefix}:{iri[1:-1][len(ns):]}"
    return iri


def composite_of(record_id):
    """Template family letter encoded in a synthetic record id."""
    return record_id.rsplit("-", 1)[-1][0].upper()
