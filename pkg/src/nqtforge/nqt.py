"""Neural Query Template (NQT) data model.

An NQT is an ordered list of template triples.  Nodes are the answer
variable, an intermediate variable, a numbered entity slot or a literal
word; predicates are words or ``rdf:type``.  The module also holds the
subgraph-type algebra used by the corrector: every property-edge triple
abstracts to one of four basic shapes and a whole NQT to a composite type.
"""
from __future__ import annotations

import enum
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence


class NqtParseError(ValueError):
    """Raised when NQT text cannot be turned into triples."""

    def __init__(self, message, defects=()):
        super().__init__(message)
        self.defects = list(defects)


class CatalogError(ValueError):
    pass


class TermKind(enum.Enum):
    ANS = "ans"
    VAR = "x"
    ENTITY = "entity"
    WORD = "word"
    RDF_TYPE = "rdf:type"
    RELATION = "R"
    CLASS = "C"


@dataclass(frozen=True)
class Term:
    kind: TermKind
    text: str = ""
    index: int = 0

    def __post_init__(self):
        if self.kind is TermKind.ENTITY and self.index not in (0, 1, 2):
            raise ValueError(f"entity slot index must be 0, 1 or 2, got {self.index}")
        if self.kind is TermKind.WORD and not self.text.strip():
            raise ValueError("word terms need text")

    @classmethod
    def ans(cls):
        return cls(TermKind.ANS)

    @classmethod
    def var(cls):
        return cls(TermKind.VAR)

    @classmethod
    def entity(cls, index=0):
        return cls(TermKind.ENTITY, index=index)

    @classmethod
    def word(cls, text):
        return cls(TermKind.WORD, text=" ".join(text.split()))

    @classmethod
    def rdf_type(cls):
        return cls(TermKind.RDF_TYPE)

    @classmethod
    def relation(cls):
        return cls(TermKind.RELATION)

    @classmethod
    def class_slot(cls):
        return cls(TermKind.CLASS)

    @property
    def is_variable(self):
        return self.kind in (TermKind.ANS, TermKind.VAR)

    @property
    def is_slot(self):
        return self.kind in (TermKind.ENTITY, TermKind.RELATION, TermKind.CLASS)

    def token(self):
        """Serialized form: variables without ``?``."""
        if self.kind is TermKind.ANS:
            return "ans"
        if self.kind is TermKind.VAR:
            return "x"
        if self.kind is TermKind.ENTITY:
            return "NER" if self.index == 0 else f"NER{self.index}"
        if self.kind is TermKind.WORD:
            return self.text
        return self.kind.value

    def __str__(self):
        if self.is_variable:
            return "?" + self.token()
        return self.token()


@dataclass(frozen=True)
class NqtTriple:
    subject: Term
    predicate: Term
    object: Term

    def __post_init__(self):
        if self.predicate.kind not in (TermKind.WORD, TermKind.RDF_TYPE, TermKind.RELATION):
            raise ValueError(f"predicate must be a word or rdf:type, got {self.predicate}")

    def __iter__(self):
        return iter((self.subject, self.predicate, self.object))

    def __getitem__(self, position):
        return (self.subject, self.predicate, self.object)[position]

    @property
    def is_type_constraint(self):
        return self.predicate.kind is TermKind.RDF_TYPE

    def swapped(self):
        return NqtTriple(self.object, self.predicate, self.subject)

    def replace(self, position, term):
        parts = list(self)
        parts[position] = term
        return NqtTriple(*parts)

    def __str__(self):
        return f"({self.subject}, {self.predicate}, {self.object})"


@dataclass(frozen=True)
class Nqt:
    triples: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "triples", tuple(self.triples))

    def __len__(self):
        return len(self.triples)

    def __iter__(self):
        return iter(self.triples)

    def __getitem__(self, i):
        return self.triples[i]

    def __str__(self):
        return "[" + ", ".join(map(str, self.triples)) + "]"

    def words(self):
        """All literal words, in order of appearance."""
        return [t.text for tr in self.triples for t in tr if t.kind is TermKind.WORD]


# -- text format ----------------------------------------------------------

@dataclass(frozen=True)
class Separators:
    field: str = "[sep]"
    end: str = "[sep_end]"


SEP = Separators()
COMMA = Separators(",", ".")
SEPARATOR_STYLES = {"sep": SEP, "comma": COMMA}


def separators(style):
    if isinstance(style, Separators):
        return style
    try:
        return SEPARATOR_STYLES[style]
    except KeyError:
        raise ValueError(f"unknown separator style {style!r}") from None


def serialize_nqt(nqt, style="sep"):
    """Render ``nqt`` as separator-delimited text.

    >>> serialize_nqt(Nqt([NqtTriple(Term.ans(), Term.word("direct"), Term.entity(1))]))
    'ans [sep] direct [sep] NER1 [sep_end]'
    """
    seps = separators(style)
    if not len(nqt):
        raise ValueError("cannot serialize an empty NQT")
    chunks = []
    for triple in nqt:
        chunks.append(f" {seps.field} ".join(t.token() for t in triple) + f" {seps.end}")
    return " ".join(chunks)


def nqt_tokens(nqt, style="sep", separators_included=True):
    """Whitespace tokens of the serialized form."""
    if not separators_included:
        return [tok for tr in nqt for term in tr for tok in term.token().split()]
    return serialize_nqt(nqt, style).split()


_SLOT_RE = re.compile(r"^NER(\d*)$")


def parse_term(text):
    """Map one field of serialized NQT to a term; ``None`` if unknown."""
    text = " ".join(text.split())
    if not text:
        return None
    bare = text[1:] if text.startswith("?") else text
    if bare == "ans":
        return Term.ans()
    if bare == "x":
        return Term.var()
    if text.startswith("?"):
        return None
    m = _SLOT_RE.match(text)
    if m:
        idx = int(m.group(1) or 0)
        return Term.entity(idx) if idx <= 2 else None
    if text == "rdf:type":
        return Term.rdf_type()
    if text == "R":
        return Term.relation()
    if text == "C":
        return Term.class_slot()
    return Term.word(text)


@dataclass
class Defect:
    segment: int
    kind: str
    detail: str

    def __str__(self):
        return f"segment {self.segment}: {self.kind} ({self.detail})"


def _segments(tokens, seps):
    segment, out = [], []
    for tok in tokens:
        if tok == seps.end:
            out.append((segment, True))
            segment = []
        else:
            segment.append(tok)
    if segment:
        out.append((segment, False))
    return out


def parse_nqt(text, lenient=False, style="sep"):
    """Parse serialized NQT.

    Returns ``(nqt, defects)``.  In strict mode any defect raises
    :class:`NqtParseError`; lenient mode keeps the well-formed triples.
    Both modes raise when nothing can be salvaged.
    """
    seps = separators(style)
    tokens = text.split() if isinstance(text, str) else list(text)
    if not tokens:
        raise NqtParseError("empty NQT text")
    triples, defects = [], []
    for i, (seg, terminated) in enumerate(_segments(tokens, seps)):
        if not terminated:
            defects.append(Defect(i, "unterminated", f"missing {seps.end}"))
        fields, cur = [], []
        for tok in seg:
            if tok == seps.field:
                fields.append(cur)
                cur = []
            else:
                cur.append(tok)
        fields.append(cur)
        if len(fields) != 3:
            defects.append(Defect(i, "arity", f"{len(fields)} fields"))
            continue
        terms = [parse_term(" ".join(f)) for f in fields]
        bad = [j for j, t in enumerate(terms) if t is None]
        if bad:
            defects.append(Defect(i, "unknown-term", " ".join(fields[bad[0]]) or "<empty>"))
            continue
        s, p, o = terms
        if p.kind not in (TermKind.WORD, TermKind.RDF_TYPE, TermKind.RELATION):
            defects.append(Defect(i, "bad-predicate", p.token()))
            continue
        if s.kind in (TermKind.RDF_TYPE, TermKind.RELATION) or o.kind in (TermKind.RDF_TYPE, TermKind.RELATION):
            defects.append(Defect(i, "bad-node", f"{s.token()} / {o.token()}"))
            continue
        triples.append(NqtTriple(s, p, o))
    if defects and not lenient:
        raise NqtParseError("; ".join(map(str, defects)), defects)
    if not triples:
        raise NqtParseError("no well-formed triple in NQT text", defects)
    return Nqt(triples), defects


# -- subgraph algebra -----------------------------------------------------

class BasicType(str, enum.Enum):
    S1 = "s1"
    S2 = "s2"
    S3 = "s3"
    S4 = "s4"
    # pseudo-part standing for one (?, rdf:type, C) constraint
    TC = "tc"

    def __str__(self):
        return self.value


_NODE_PAIRS = {
    frozenset(Counter(["NER", "NER"]).items()): BasicType.S1,
    frozenset(Counter(["NER", "ans"]).items()): BasicType.S2,
    frozenset(Counter(["NER", "x"]).items()): BasicType.S3,
    frozenset(Counter(["x", "ans"]).items()): BasicType.S4,
}

# canonical node pair per basic type, subject first
SKELETON_NODES = {
    BasicType.S1: (Term.entity(), Term.entity()),
    BasicType.S2: (Term.entity(), Term.ans()),
    BasicType.S3: (Term.entity(), Term.var()),
    BasicType.S4: (Term.var(), Term.ans()),
}


def _abstract_node(term):
    if term.kind in (TermKind.ENTITY, TermKind.WORD, TermKind.CLASS):
        return Term.entity()
    return term


def abstract_triple(triple):
    """Project a triple onto its shape (one element of NQT*).

    Entity slots and literal nodes become bare ``NER``, the predicate becomes
    ``R``; ``rdf:type`` triples keep the keyword and get ``C`` as object.
    """
    if triple.is_type_constraint:
        subject = triple.subject if triple.subject.is_variable else Term.entity()
        return NqtTriple(subject, Term.rdf_type(), Term.class_slot())
    return NqtTriple(_abstract_node(triple.subject), Term.relation(), _abstract_node(triple.object))


def abstract_nqt(nqt):
    return Nqt(abstract_triple(t) for t in nqt)


def _node_label(term):
    term = _abstract_node(term)
    return "NER" if term.kind is TermKind.ENTITY else term.token()


def classify_basic(triple):
    """Direction-agnostic basic subgraph type of a property-edge triple."""
    if triple.is_type_constraint:
        raise ValueError(f"{triple} is a type constraint, not a property edge")
    key = frozenset(Counter([_node_label(triple.subject), _node_label(triple.object)]).items())
    try:
        return _NODE_PAIRS[key]
    except KeyError:
        raise ValueError(f"no basic subgraph type for node pair of {triple}") from None


def part_of(triple):
    """Basic type, ``TC`` for type constraints, ``None`` if unclassifiable."""
    if triple.is_type_constraint:
        return BasicType.TC
    try:
        return classify_basic(triple)
    except ValueError:
        return None


def nqt_parts(nqt):
    return Counter(part_of(t) for t in nqt)


@dataclass(frozen=True)
class CompositeType:
    id: str
    parts: tuple
    ner_count: int
    r_count: int
    type_constraint: bool = False

    def __post_init__(self):
        parts = tuple(sorted((BasicType(p) for p in self.parts), key=lambda p: p.value))
        object.__setattr__(self, "parts", parts)
        if not parts:
            raise CatalogError(f"composite type {self.id} has no parts")
        if BasicType.TC in parts:
            raise CatalogError("type constraints are declared by the flag, not as a part")
        if self.r_count != len(parts):
            raise CatalogError(f"composite type {self.id}: r_count {self.r_count} != {len(parts)} parts")

    @property
    def key(self):
        return (self.r_count, self.ner_count, self.type_constraint)

    def expected_parts(self):
        """Multiset of parts a conforming NQT* has, type constraint included."""
        c = Counter(self.parts)
        if self.type_constraint:
            c[BasicType.TC] += 1
        return c


@dataclass(frozen=True)
class Catalog:
    entries: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        seen = {}
        for e in self.entries:
            if e.key in seen:
                raise CatalogError(f"catalog entries {seen[e.key]} and {e.id} share key {e.key}")
            seen[e.key] = e.id

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def get(self, id):
        for e in self.entries:
            if e.id == id:
                return e
        raise KeyError(id)

    def lookup(self, r_count, ner_count, has_class):
        for e in self.entries:
            if e.key == (r_count, ner_count, bool(has_class)):
                return e
        return None


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "1"):
        return True
    if t in ("false", "no", "0", ""):
        return False
    raise CatalogError(f"not a boolean: {text!r}")


def parse_catalog(text):
    """Parse ``id | parts | ner_count | r_count | type_constraint`` lines."""
    entries = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        cols = [c.strip() for c in line.split("|")]
        if len(cols) != 5:
            raise CatalogError(f"line {lineno}: expected 5 columns, got {len(cols)}")
        try:
            parts = [BasicType(p.strip()) for p in cols[1].split(",") if p.strip()]
            entries.append(CompositeType(cols[0], tuple(parts), int(cols[2]), int(cols[3]), _parse_bool(cols[4])))
        except ValueError as exc:
            raise CatalogError(f"line {lineno}: {exc}") from exc
    return Catalog(entries)


def load_catalog(path=None):
    if path is None:
        text = resources.files("nqtforge").joinpath("data/catalog.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return parse_catalog(text)


def compose_type(parts, ner_count, catalog):
    """Catalog entry whose parts multiset equals ``parts``, or ``None``.

    A ``tc`` element in ``parts`` selects entries carrying a type
    constraint.  ``ner_count`` only breaks ties between entries with the
    same parts; a tie it cannot break is a configuration error.
    """
    if isinstance(parts, Counter):
        parts = parts.elements()
    given = Counter(BasicType(p) for p in parts)
    has_tc = given.pop(BasicType.TC, 0) > 0
    hits = [e for e in catalog if Counter(e.parts) == given and e.type_constraint == has_tc]
    if len(hits) > 1:
        hits = [e for e in hits if e.ner_count == ner_count]
        if len(hits) > 1:
            raise CatalogError(f"ambiguous catalog: {[e.id for e in hits]} all match {dict(given)}")
    return hits[0] if hits else None


def make_nqt(*triples: Sequence[str]) -> Nqt:
    """Build an NQT from ``(s, p, o)`` string triples, e.g. ``("?ans", "direct", "NER1")``."""
    out = []
    for s, p, o in triples:
        terms = [parse_term(x) for x in (s, p, o)]
        if any(t is None for t in terms):
            raise ValueError(f"bad triple {(s, p, o)}")
        out.append(NqtTriple(*terms))
    return Nqt(out)
