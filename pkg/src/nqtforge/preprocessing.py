"""Tokenization, named-entity slotting and multi-entity-type tagging (METT).

METT labels every token span of a slotted question with one of five tags:
``V`` question word, ``E`` named entity, ``R`` property word, ``C`` class
word, ``N`` anything else.  The entity, property and class surfaces are
collected into the ``e_x``, ``r_x`` and ``c_x`` arrays consumed by the
corrector.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

NER = "NER"
TAGS = ("V", "E", "R", "C", "N")

_TRAILING = "?,!;"


def tokenize(question, preserve=None):
    """Split ``question`` on whitespace and detach terminal punctuation.

    Tokens are lowercased except entity surfaces.  ``preserve`` lists the
    entity surfaces whose case is kept; without it, capitalised tokens that
    do not start the question are assumed to belong to entity names.
    """
    if not question or not question.strip():
        raise ValueError("cannot tokenize an empty question")
    raw = question.split()
    tokens = []
    for i, tok in enumerate(raw):
        tail = []
        last = i == len(raw) - 1
        while tok and (tok[-1] in _TRAILING or (last and tok[-1] == ".")):
            tail.append(tok[-1])
            tok = tok[:-1]
        if tok:
            tokens.append(tok)
        tokens.extend(reversed(tail))
    keep = _case_mask(tokens, preserve)
    return [t if k else t.lower() for t, k in zip(tokens, keep)]


def _case_mask(tokens, preserve):
    if preserve is None:
        return [i > 0 and any(c.isupper() for c in t) for i, t in enumerate(tokens)]
    keep = [False] * len(tokens)
    lowered = [t.lower() for t in tokens]
    for surface in preserve:
        words = surface.lower().split()
        n = len(words)
        for i in range(len(tokens) - n + 1):
            if lowered[i:i + n] == words:
                keep[i:i + n] = [True] * n
    return keep


@dataclass(frozen=True)
class PreprocessedQuestion:
    tokens: tuple
    ner_surface: tuple = ()
    raw: str = ""
    # original-case text of each token; for NER tokens the entity surface
    surface: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "ner_surface", tuple(self.ner_surface))
        if not self.surface:
            it = iter(self.ner_surface)
            surface = [next(it, NER) if t == NER else t for t in self.tokens]
            object.__setattr__(self, "surface", tuple(surface))
        else:
            object.__setattr__(self, "surface", tuple(self.surface))
        if sum(t == NER for t in self.tokens) != len(self.ner_surface):
            raise ValueError("number of NER tokens must equal the number of entity surfaces")
        if len(self.surface) != len(self.tokens):
            raise ValueError("surface must align with tokens")

    def expand(self):
        """Token sequence with every NER slot re-expanded to its surface."""
        out, it = [], iter(self.ner_surface)
        for tok in self.tokens:
            out.extend(next(it).split() if tok == NER else [tok])
        return out


def ner_substitute(tokens, entity_spans, raw=None):
    """Collapse each ``(start, end)`` token span into one ``NER`` token."""
    tokens = list(tokens)
    spans = sorted((int(a), int(b)) for a, b in entity_spans)
    prev_end = 0
    for a, b in spans:
        if not 0 <= a < b <= len(tokens):
            raise ValueError(f"span {(a, b)} out of range for {len(tokens)} tokens")
        if a < prev_end:
            raise ValueError(f"overlapping entity spans at {(a, b)}")
        prev_end = b
    out, surface, ner_surface = [], [], []
    pos = 0
    for a, b in spans:
        out.extend(tokens[pos:a])
        surface.extend(tokens[pos:a])
        text = " ".join(tokens[a:b])
        out.append(NER)
        surface.append(text)
        ner_surface.append(text)
        pos = b
    out.extend(tokens[pos:])
    surface.extend(tokens[pos:])
    return PreprocessedQuestion(tuple(out), tuple(ner_surface), raw if raw is not None else " ".join(tokens),
                                tuple(surface))


class DictionaryNerProvider:
    """Finds entity spans by longest case-insensitive match against known labels."""

    def __init__(self, labels=()):
        self._labels = {}
        for label in labels:
            words = tuple(w.lower() for w in tokenize(label, preserve=[label]))
            if words:
                self._labels.setdefault(words, label)
        self._max = max((len(k) for k in self._labels), default=0)

    def __len__(self):
        return len(self._labels)

    def spans(self, tokens):
        lowered = [t.lower() for t in tokens]
        out, i = [], 0
        while i < len(tokens):
            for n in range(min(self._max, len(tokens) - i), 0, -1):
                if tuple(lowered[i:i + n]) in self._labels:
                    out.append((i, i + n))
                    i += n
                    break
            else:
                i += 1
        return out


def preprocess(question, provider=None, preserve=None):
    """Tokenize ``question`` and slot the entities ``provider`` finds."""
    provider = provider or DictionaryNerProvider()
    tokens = tokenize(question, preserve=preserve)
    return ner_substitute(tokens, provider.spans(tokens), raw=question)


# -- METT -----------------------------------------------------------------

_SUFFIXES = ("ings", "ing", "ers", "ors", "ed", "er", "or", "es", "s")


def stem(word):
    """Crude suffix stripper; only needs to be consistent, not linguistic."""
    w = word.lower()
    if w.endswith("ies") and len(w) > 4:
        return w[:-3] + "i"
    for suffix in _SUFFIXES:
        if w.endswith(suffix) and len(w) - len(suffix) >= 3:
            w = w[: -len(suffix)]
            break
    if w.endswith("e") and len(w) > 4:
        w = w[:-1]
    # city / cities / movie / movies all meet at a final "i"
    if w.endswith("y") and len(w) > 2:
        w = w[:-1] + "i"
    return w


def stem_phrase(text):
    return " ".join(stem(w) for w in text.split())


def _norm(text):
    return " ".join(text.lower().split())


DEFAULT_QUESTION_WORDS = (
    "what", "which", "who", "whom", "whose", "where", "when", "how many", "how", "is", "are",
    "was", "were", "did", "does", "do", "name", "list", "give", "count", "tell",
)
DEFAULT_STOPWORDS = (
    "the", "a", "an", "of", "and", "or", "in", "on", "at", "to", "by", "for", "with", "as", "from",
    "has", "have", "had", "that", "this", "there", "be", "been", "me", "all", "its", "their", "it",
    "also", "some", "something", "thing", "things", "?", ".", ",", "!",
)


@dataclass(frozen=True)
class MettLexicon:
    question_words: frozenset = frozenset(DEFAULT_QUESTION_WORDS)
    properties: frozenset = frozenset()
    classes: frozenset = frozenset()
    stopwords: frozenset = frozenset(DEFAULT_STOPWORDS)

    def __post_init__(self):
        for name in ("question_words", "properties", "classes", "stopwords"):
            object.__setattr__(self, name, frozenset(_norm(w) for w in getattr(self, name) if w.strip()))
        keys = self._keys()
        names = list(keys)
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                clash = keys[a] & keys[b]
                if clash:
                    raise ValueError(f"lexicon sections {a} and {b} overlap: {sorted(clash)}")

    def _keys(self):
        return {
            "question_words": self.question_words,
            "properties": self.property_keys,
            "classes": self.class_keys,
            "stopwords": self.stopwords,
        }

    @property
    def property_keys(self):
        return frozenset(stem_phrase(w) for w in self.properties)

    @property
    def class_keys(self):
        return frozenset(stem_phrase(w) for w in self.classes)

    @classmethod
    def build(cls, properties, classes, question_words=DEFAULT_QUESTION_WORDS, stopwords=DEFAULT_STOPWORDS):
        """Lexicon from dataset vocabulary; clashes resolve toward properties, then classes."""
        qw = {_norm(w) for w in question_words}
        props = {_norm(w) for w in properties if w.strip() and stem_phrase(w) not in qw}
        prop_stems = {stem_phrase(w) for w in props}
        cls_words = {_norm(w) for w in classes
                     if w.strip() and stem_phrase(w) not in prop_stems and stem_phrase(w) not in qw}
        taken = prop_stems | {stem_phrase(w) for w in cls_words}
        stops = {_norm(w) for w in stopwords} - qw - taken
        return cls(frozenset(qw), frozenset(props), frozenset(cls_words), frozenset(stops))

    def save(self, path):
        lines = []
        for section in ("question_words", "properties", "classes", "stopwords"):
            lines.append(f"[{section}]")
            lines.extend(sorted(getattr(self, section)))
            lines.append("")
        Path(path).write_text("\n".join(lines), encoding="utf-8")

    @classmethod
    def load(cls, path):
        sections = {"question_words": [], "properties": [], "classes": [], "stopwords": []}
        current = None
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("[") and line.endswith("]") and line[1:-1] in sections:
                current = line[1:-1]
            elif current is None:
                raise ValueError(f"{path}:{lineno}: term outside of a section")
            else:
                sections[current].append(line)
        return cls(*(frozenset(sections[k]) for k in ("question_words", "properties", "classes", "stopwords")))

    def max_len(self):
        pools = (self.question_words, self.properties, self.classes)
        return max((len(w.split()) for pool in pools for w in pool), default=1)


@dataclass(frozen=True)
class TaggedQuestion:
    tags: tuple
    e_x: tuple = ()
    r_x: tuple = ()
    c_x: tuple = ()
    question: PreprocessedQuestion | None = field(default=None, compare=False)

    def tag_sequence(self):
        """One tag per token."""
        out = []
        for start, end, tag in self.tags:
            out.extend([tag] * (end - start))
        return out


def mett_tag(question, lexicon):
    """Tag a slotted question and collect ``e_x``, ``r_x`` and ``c_x``."""
    tokens = list(question.tokens)
    surface = list(question.surface)
    n = len(tokens)
    tags = [None] * n
    spans = {}
    ents = iter(question.ner_surface)
    e_x = []
    for i, tok in enumerate(tokens):
        if tok == NER:
            tags[i] = "E"
            spans[i] = (i + 1, "E")
            e_x.append(next(ents))
    pools = (("V", _norm, lexicon.question_words),
             ("R", stem_phrase, lexicon.property_keys),
             ("C", stem_phrase, lexicon.class_keys))
    longest = lexicon.max_len()
    found = {"R": [], "C": []}
    for tag, key, pool in pools:
        i = 0
        while i < n:
            hit = 0
            for length in range(min(longest, n - i), 0, -1):
                window = range(i, i + length)
                if any(tags[j] is not None for j in window):
                    continue
                if key(" ".join(tokens[i:i + length])) in pool:
                    hit = length
                    break
            if hit:
                for j in range(i, i + hit):
                    tags[j] = tag
                spans[i] = (i + hit, tag)
                if tag in found:
                    found[tag].append(" ".join(surface[i:i + hit]))
                i += hit
            else:
                i += 1
    for i in range(n):
        if tags[i] is None:
            tags[i] = "N"
            spans[i] = (i + 1, "N")
    tag_spans = tuple((start, end, tag) for start, (end, tag) in sorted(spans.items()))
    return TaggedQuestion(tag_spans, tuple(e_x), _dedupe(found["R"]), _dedupe(found["C"]), question)


def _dedupe(items):
    seen, out = set(), []
    for item in items:
        k = stem_phrase(item)
        if k not in seen:
            seen.add(k)
            out.append(item)
    return tuple(out)


def mentions(question, text):
    """True if ``text`` occurs in the question, comparing stemmed tokens."""
    words = [stem(w) for w in tokenize(text, preserve=[text])]
    if not words:
        return False
    hay = [stem(t) for t in question.expand()]
    n = len(words)
    return any(hay[i:i + n] == words for i in range(len(hay) - n + 1))


# -- estimators -----------------------------------------------------------

class QuestionPreprocessor(BaseEstimator, TransformerMixin):
    """Tokenize raw questions and replace known entity names by ``NER``.

    Parameters
    ----------
    entity_labels : iterable of str, optional
        Surfaces the dictionary NER provider recognises.  Labels passed to
        ``fit`` as ``y`` are added to these.
    """

    def __init__(self, entity_labels=None):
        self.entity_labels = entity_labels

    def fit(self, X=None, y=None):
        labels = list(self.entity_labels or ())
        if y is not None:
            for item in y:
                labels.extend([item] if isinstance(item, str) else item)
        self.provider_ = DictionaryNerProvider(labels)
        return self

    def transform(self, X):
        check_is_fitted(self, "provider_")
        return [preprocess(q, self.provider_) for q in _check_strings(X)]


class MettTagger(BaseEstimator, TransformerMixin):
    """METT as an estimator.

    ``fit`` builds a lexicon from gold NQTs (predicate words and ``rdf:type``
    objects) unless one is supplied.
    """

    def __init__(self, lexicon=None):
        self.lexicon = lexicon

    def fit(self, X=None, y=None):
        if isinstance(self.lexicon, MettLexicon):
            self.lexicon_ = self.lexicon
        elif self.lexicon is not None:
            self.lexicon_ = MettLexicon.load(self.lexicon)
        else:
            self.lexicon_ = lexicon_from_nqts(y or ())
        return self

    def transform(self, X):
        check_is_fitted(self, "lexicon_")
        out = []
        for q in X:
            if not isinstance(q, PreprocessedQuestion):
                raise TypeError(f"expected PreprocessedQuestion, got {type(q).__name__}")
            out.append(mett_tag(q, self.lexicon_))
        return out


def lexicon_from_nqts(nqts):
    from .nqt import TermKind

    props, classes = set(), set()
    for nqt in nqts:
        for tr in nqt:
            if tr.is_type_constraint:
                if tr.object.kind is TermKind.WORD:
                    classes.add(tr.object.text)
            elif tr.predicate.kind is TermKind.WORD:
                props.add(tr.predicate.text)
    return MettLexicon.build(props, classes)


def _check_strings(X):
    if isinstance(X, str):
        raise TypeError("expected an iterable of questions, got a single string")
    X = list(X)
    for q in X:
        if not isinstance(q, str):
            raise TypeError(f"questions must be strings, got {type(q).__name__}")
    return X
