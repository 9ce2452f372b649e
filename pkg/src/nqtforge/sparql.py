"""Answer typing, NQT <-> SPARQL conversion, a fixture triple store and an HTTP client.

Terms inside a :class:`SparqlQuery` use one internal spelling: variables
as ``?name``, IRIs as ``<full-iri>``, literals as ``"lexical"`` with an
optional ``^^<datatype>`` or ``@lang`` suffix.
"""
from __future__ import annotations

import difflib
import enum
import json
import re
import socket
import threading
import time
import urllib.error
import urllib.parse
import urllib.request
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .nqt import Nqt, NqtTriple, Term, TermKind
from .preprocessing import stem_phrase

# -- answer and query forms -----------------------------------------------


class AnswerType(str, enum.Enum):
    BOOLEAN = "boolean"
    NUMBER = "number"
    PERSON = "person"
    PLACE = "place"
    DATE = "date"
    THING = "thing"


class QueryForm(str, enum.Enum):
    ASK = "ASK"
    SELECT_COUNT = "SELECT_COUNT"
    SELECT_DISTINCT = "SELECT_DISTINCT"


_AUXILIARIES = frozenset({"is", "are", "did", "does", "was", "were"})
_WORD_RE = re.compile(r"[a-z0-9]+")


def classify_question(question):
    words = _WORD_RE.findall(question.lower())
    if words and words[0] in _AUXILIARIES:
        return AnswerType.BOOLEAN
    pairs = set(zip(words, words[1:]))
    if ("how", "many") in pairs or "count" in words:
        return AnswerType.NUMBER
    if "who" in words or "whom" in words:
        return AnswerType.PERSON
    if "where" in words:
        return AnswerType.PLACE
    if "when" in words or ("what", "year") in pairs:
        return AnswerType.DATE
    return AnswerType.THING


def select_query_form(answer_type):
    answer_type = AnswerType(answer_type)
    if answer_type is AnswerType.BOOLEAN:
        return QueryForm.ASK
    if answer_type is AnswerType.NUMBER:
        return QueryForm.SELECT_COUNT
    return QueryForm.SELECT_DISTINCT


# -- errors ---------------------------------------------------------------


class SparqlError(ValueError):
    pass


class SparqlSyntaxError(SparqlError):
    pass


class UnsupportedQuery(SparqlError):
    def __init__(self, constructs):
        self.constructs = tuple(constructs)
        super().__init__("unsupported SPARQL constructs: " + ", ".join(self.constructs))


class LinkingError(SparqlError):
    def __init__(self, term, kind, candidates=()):
        self.term, self.kind, self.candidates = term, kind, tuple(candidates)
        hint = f"; nearest labels: {', '.join(self.candidates)}" if self.candidates else ""
        super().__init__(f"cannot link {kind} {term!r}{hint}")


class EndpointError(RuntimeError):
    kind = "endpoint"


class EndpointTimeout(EndpointError):
    kind = "timeout"


class EndpointNetworkError(EndpointError):
    kind = "network"


class EndpointHTTPError(EndpointError):
    kind = "http"

    def __init__(self, status, message):
        self.status = status
        super().__init__(f"HTTP {status}: {message}")


class MalformedResults(EndpointError):
    kind = "malformed"


# -- IRIs and labels --------------------------------------------------------

PREFIXES = {
    "dbo": "http://dbpedia.org/ontology/",
    "dbr": "http://dbpedia.org/resource/",
    "dbp": "http://dbpedia.org/property/",
    "rdf": "http://www.w3.org/1999/02/22-rdf-syntax-ns#",
    "rdfs": "http://www.w3.org/2000/01/rdf-schema#",
    "xsd": "http://www.w3.org/2001/XMLSchema#",
}
RDF_TYPE = "<http://www.w3.org/1999/02/22-rdf-syntax-ns#type>"
_LOCAL_OK = re.compile(r"^[A-Za-z0-9_][A-Za-z0-9_\-]*$")


def is_variable(term):
    return term.startswith("?")


def is_iri(term):
    return term.startswith("<") and term.endswith(">")


def is_literal(term):
    return term.startswith('"')


def local_name(iri):
    body = iri[1:-1] if is_iri(iri) else iri
    return re.split(r"[/#]", body)[-1]


def compact(term, prefixes=PREFIXES):
    if not is_iri(term):
        return term
    if term == RDF_TYPE:
        return "rdf:type"
    body = term[1:-1]
    for prefix, ns in prefixes.items():
        if body.startswith(ns) and _LOCAL_OK.match(body[len(ns):]):
            return f"{prefix}:{body[len(ns):]}"
    return term


def split_camel(name):
    return " ".join(re.sub(r"(?<=[a-z0-9])(?=[A-Z])|_", " ", name).lower().split())


def predicate_label(iri):
    return split_camel(local_name(iri))


def entity_label(term):
    if is_literal(term):
        return literal_value(term)
    return " ".join(local_name(term).replace("_", " ").split())


def strip_parenthetical(label):
    return re.sub(r"\s*\([^)]*\)\s*$", "", label)


def normalize_label(label):
    return " ".join(label.replace("_", " ").lower().split())


def literal_value(term):
    m = re.match(r'^"((?:[^"\\]|\\.)*)"', term)
    return m.group(1).replace('\\"', '"') if m else term


def answer_value(term):
    if is_iri(term):
        return term[1:-1]
    if is_literal(term):
        return literal_value(term)
    return term


# -- query model and mini-grammar --------------------------------------------


@dataclass(frozen=True)
class SparqlQuery:
    form: QueryForm
    answer_var: str
    triple_patterns: tuple

    def __post_init__(self):
        object.__setattr__(self, "form", QueryForm(self.form))
        object.__setattr__(self, "triple_patterns", tuple(tuple(p) for p in self.triple_patterns))
        if not self.triple_patterns:
            raise SparqlError("a query needs at least one triple pattern")
        if self.form is not QueryForm.ASK and not is_variable(self.answer_var):
            raise SparqlError(f"{self.form.value} needs an answer variable")

    @property
    def raw(self):
        return self.render()

    def variables(self):
        return sorted({t for p in self.triple_patterns for t in p if is_variable(t)})

    def render(self):
        body = " . ".join(" ".join(compact(t) for t in p) for p in self.triple_patterns)
        if self.form is QueryForm.ASK:
            head = "ASK"
        elif self.form is QueryForm.SELECT_COUNT:
            head = f"SELECT COUNT({self.answer_var})"
        else:
            head = f"SELECT DISTINCT {self.answer_var}"
        return f"{head} WHERE {{ {body} }}"

    def __str__(self):
        return self.render()


_UNSUPPORTED = ("FILTER", "OPTIONAL", "UNION", "ORDER", "LIMIT", "OFFSET", "GROUP", "HAVING",
                "MINUS", "BIND", "VALUES", "SERVICE", "GRAPH", "REGEX")
_TOKEN_RE = re.compile(r"""
    (?P<iri><[^<>\s]*>)
  | (?P<lit>"(?:[^"\\]|\\.)*"(?:\^\^(?:<[^<>\s]*>|[A-Za-z][\w-]*:[\w-]*)|@[A-Za-z-]+)?)
  | (?P<var>[?$][A-Za-z_]\w*)
  | (?P<num>[+-]?\d+(?:\.\d+)?)
  | (?P<pname>[A-Za-z][\w-]*:(?:[\w\-]|\\.)*|:(?:[\w\-]|\\.)+)
  | (?P<word>[A-Za-z]+)
  | (?P<punct>[{}().;,*])
  | (?P<op>[!=<>&|/+-]+)
  | (?P<space>\s+)
  | (?P<bad>.)
""", re.VERBOSE)


def _lex(text):
    out = []
    for m in _TOKEN_RE.finditer(text):
        kind = m.lastgroup
        if kind == "space":
            continue
        if kind == "bad":
            raise SparqlSyntaxError(f"unexpected character {m.group()!r} at offset {m.start()}")
        out.append((kind, m.group()))
    return out


class _Parser:
    def __init__(self, text):
        self.toks = _lex(text)
        self.i = 0
        self.prefixes = dict(PREFIXES)

    def peek(self, offset=0):
        j = self.i + offset
        return self.toks[j] if j < len(self.toks) else (None, None)

    def next(self):
        tok = self.peek()
        if tok[0] is None:
            raise SparqlSyntaxError("unexpected end of query")
        self.i += 1
        return tok

    def keyword(self, *words):
        kind, value = self.peek()
        if kind == "word" and value.upper() in words:
            self.i += 1
            return value.upper()
        return None

    def expect(self, value):
        kind, got = self.next()
        if got != value and not (kind == "word" and got.upper() == value):
            raise SparqlSyntaxError(f"expected {value!r}, got {got!r}")

    def term(self, kind, value):
        if kind == "iri":
            return value
        if kind == "var":
            return "?" + value[1:]
        if kind == "pname":
            prefix, local = value.split(":", 1)
            if prefix not in self.prefixes:
                raise SparqlSyntaxError(f"unknown prefix {prefix!r}")
            return f"<{self.prefixes[prefix]}{local.replace(chr(92), '')}>"
        if kind == "lit":
            if "^^" in value:
                lex, dt = value.rsplit("^^", 1)
                return f"{lex}^^{self.term(*_lex(dt)[0])}"
            return value
        if kind == "num":
            dt = "decimal" if "." in value else "integer"
            return f'"{value}"^^<{PREFIXES["xsd"]}{dt}>'
        if kind == "word" and value == "a":
            return RDF_TYPE
        raise SparqlSyntaxError(f"expected a term, got {value!r}")

    def parse(self):
        upper = {v.upper() for k, v in self.toks if k == "word"}
        bad = [w for w in _UNSUPPORTED if w in upper]
        if bad:
            raise UnsupportedQuery(bad)
        while self.keyword("PREFIX"):
            kind, value = self.next()
            if kind != "pname" or not value.endswith(":"):
                raise SparqlSyntaxError(f"bad PREFIX name {value!r}")
            kind, iri = self.next()
            if kind != "iri":
                raise SparqlSyntaxError(f"bad PREFIX IRI {iri!r}")
            self.prefixes[value[:-1]] = iri[1:-1]
        if self.keyword("ASK"):
            form, var = QueryForm.ASK, ""
        elif self.keyword("SELECT"):
            self.keyword("DISTINCT", "REDUCED")
            form, var = self.projection()
        else:
            raise SparqlSyntaxError(f"expected SELECT or ASK, got {self.peek()[1]!r}")
        self.keyword("WHERE")
        self.expect("{")
        patterns = self.patterns()
        self.expect("}")
        if self.peek()[0] is not None:
            raise UnsupportedQuery([f"trailing {self.peek()[1]!r}"])
        if not patterns:
            raise SparqlError("query has no triple patterns")
        return SparqlQuery(form, var, patterns)

    def projection(self):
        wrapped = self.peek() == ("punct", "(")
        if wrapped:
            self.next()
        if self.keyword("COUNT"):
            self.expect("(")
            self.keyword("DISTINCT")
            kind, value = self.next()
            if kind != "var":
                raise UnsupportedQuery([f"COUNT({value})"])
            self.expect(")")
            if self.keyword("AS"):
                self.next()
            if wrapped:
                self.expect(")")
            return QueryForm.SELECT_COUNT, "?" + value[1:]
        if wrapped:
            raise UnsupportedQuery(["expression projection"])
        names = []
        while self.peek()[0] == "var":
            names.append("?" + self.next()[1][1:])
        if self.peek() == ("punct", "*"):
            raise UnsupportedQuery(["SELECT *"])
        if len(names) != 1:
            raise UnsupportedQuery([f"{len(names)} projected variables"])
        return QueryForm.SELECT_DISTINCT, names[0]

    def patterns(self):
        out = []
        while self.peek() != ("punct", "}"):
            if self.peek()[0] is None:
                raise SparqlSyntaxError("unterminated WHERE block")
            if self.peek() == ("punct", "{"):
                raise UnsupportedQuery(["nested group"])
            s = self.term(*self.next())
            while True:
                p = self.term(*self.next())
                while True:
                    o = self.term(*self.next())
                    out.append((s, p, o))
                    if self.peek() != ("punct", ","):
                        break
                    self.next()
                if self.peek() != ("punct", ";"):
                    break
                self.next()
                if self.peek() in (("punct", "."), ("punct", "}")):
                    break
            if self.peek() == ("punct", "."):
                self.next()
        return out


def parse_sparql(text):
    """Parse the supported subset: PREFIX, SELECT [DISTINCT] ?v | COUNT, ASK, BGP."""
    return _Parser(text).parse()


# -- linking ----------------------------------------------------------------------

LINK_KINDS = ("entity", "predicate", "class")


class LinkerIndex:
    """Closed-world label -> term maps built from gold queries.

    Labels are lowercased with underscores read as spaces.  When a label
    maps to several terms the most frequent one wins.
    """

    def __init__(self):
        self._counts = {k: defaultdict(Counter) for k in LINK_KINDS}
        self._stems = {k: defaultdict(Counter) for k in LINK_KINDS}
        self._labels = {}

    def add(self, kind, label, term, count=1):
        if kind not in LINK_KINDS:
            raise ValueError(f"unknown link kind {kind!r}")
        norm = normalize_label(label)
        if not norm:
            return
        self._counts[kind][norm][term] += count
        self._stems[kind][stem_phrase(norm)][term] += count
        self._labels.setdefault(term, norm)

    def add_query(self, query):
        for s, p, o in query.triple_patterns:
            if p == RDF_TYPE:
                if not is_variable(o):
                    self.add("class", predicate_label(o), o)
            else:
                self.add("predicate", predicate_label(p), p)
                if not is_variable(o):
                    self._add_entity(o)
            if not is_variable(s):
                self._add_entity(s)

    def _add_entity(self, term):
        label = entity_label(term)
        self.add("entity", label, term)
        short = strip_parenthetical(label)
        if short != label:
            self.add("entity", short, term)

    @classmethod
    def from_queries(cls, queries):
        index = cls()
        for q in queries:
            index.add_query(parse_sparql(q) if isinstance(q, str) else q)
        return index

    @staticmethod
    def _best(counter):
        return sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]

    def link(self, kind, label):
        norm = normalize_label(label)
        hit = self._counts[kind].get(norm)
        if hit:
            return self._best(hit)
        hit = self._stems[kind].get(stem_phrase(norm))
        if hit:
            return self._best(hit)
        candidates = difflib.get_close_matches(norm, list(self._counts[kind]), n=3, cutoff=0.5)
        raise LinkingError(label, kind, candidates)

    def entity(self, label):
        return self.link("entity", label)

    def predicate(self, label):
        return self.link("predicate", label)

    def klass(self, label):
        return self.link("class", label)

    def label(self, term):
        return self._labels.get(term)

    def to_dict(self):
        return {k: {label: dict(c) for label, c in sorted(m.items())} for k, m in self._counts.items()}

    @classmethod
    def from_dict(cls, data):
        index = cls()
        for kind, labels in data.items():
            for label, terms in labels.items():
                for term, n in terms.items():
                    index.add(kind, label, term, n)
        return index

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# -- conversion -----------------------------------------------------------------

ANSWER_VAR = "?uri"
INNER_VAR = "?x"


def nqt_to_sparql(nqt, form, linker, ner_surface=()):
    """Ground an NQT into a query; every slot must be resolvable through ``linker``."""
    form = QueryForm(form)

    def node(term):
        if term.kind is TermKind.ANS:
            return ANSWER_VAR
        if term.kind is TermKind.VAR:
            return INNER_VAR
        if term.kind is TermKind.ENTITY:
            if term.index == 0 or term.index > len(ner_surface):
                raise LinkingError(term.token(), "entity", ())
            return linker.entity(ner_surface[term.index - 1])
        if term.kind is TermKind.WORD:
            return linker.entity(term.text)
        raise LinkingError(term.token(), "entity", ())

    patterns = []
    for tr in nqt:
        if tr.is_type_constraint:
            if tr.object.kind is not TermKind.WORD:
                raise LinkingError(tr.object.token(), "class", ())
            patterns.append((node(tr.subject), RDF_TYPE, linker.klass(tr.object.text)))
            continue
        if tr.predicate.kind is not TermKind.WORD:
            raise LinkingError(tr.predicate.token(), "predicate", ())
        patterns.append((node(tr.subject), linker.predicate(tr.predicate.text), node(tr.object)))
    if not patterns:
        raise SparqlError("cannot build a query from an empty NQT")
    has_answer = any(ANSWER_VAR in p for p in patterns)
    if form is not QueryForm.ASK and not has_answer:
        raise SparqlError(f"{form.value} query but the NQT has no ?ans")
    return SparqlQuery(form, "" if form is QueryForm.ASK else ANSWER_VAR, patterns)


def sparql_to_nqt(gold, question=None, linker=None):
    """Gold NQT for a gold query.

    Entities whose label equals the k-th entity surface of ``question``
    become ``NERk``; other entities keep their label as a word.
    """
    query = parse_sparql(gold) if isinstance(gold, str) else gold
    if not query.triple_patterns:
        raise SparqlError("query has no triple patterns")
    surfaces = [normalize_label(s) for s in (question.ner_surface if question is not None else ())]
    variables = [v for v in query.variables() if v != query.answer_var]
    if len(variables) > 1:
        raise UnsupportedQuery([f"{len(variables) + 1} variables"])

    def label_of(term, fallback):
        known = linker.label(term) if linker is not None else None
        return known or fallback(term)

    def node(term):
        if is_variable(term):
            return Term.ans() if term == query.answer_var else Term.var()
        label = normalize_label(label_of(term, entity_label))
        for candidate in (label, strip_parenthetical(label)):
            if candidate in surfaces:
                k = surfaces.index(candidate) + 1
                if k > 2:
                    raise UnsupportedQuery([f"entity slot NER{k}"])
                return Term.entity(k)
        return Term.word(label)

    triples = []
    for s, p, o in query.triple_patterns:
        if p == RDF_TYPE:
            if is_variable(o):
                raise UnsupportedQuery(["variable class"])
            triples.append(NqtTriple(node(s), Term.rdf_type(), Term.word(predicate_label(o))))
        elif is_variable(p):
            raise UnsupportedQuery(["variable predicate"])
        else:
            triples.append(NqtTriple(node(s), Term.word(predicate_label(p)), node(o)))
    return Nqt(triples)


# -- triple store ------------------------------------------------------------------


def _parse_store_line(line, prefixes):
    toks = [t for t in _lex(line)]
    if not toks or toks[-1] != ("punct", "."):
        raise SparqlSyntaxError(f"store line must end with ' .': {line!r}")
    p = _Parser("")
    p.prefixes = prefixes
    terms = [p.term(*t) for t in toks[:-1]]
    if len(terms) != 3:
        raise SparqlSyntaxError(f"store line needs 3 terms: {line!r}")
    return tuple(terms)


class TripleStore:
    """In-memory set of ground triples with a basic-graph-pattern evaluator."""

    def __init__(self, triples=()):
        self.triples = set()
        self._by_p = defaultdict(set)
        for t in triples:
            self.add(*t)

    def add(self, s, p, o):
        t = (s, p, o)
        for term in t:
            if is_variable(term):
                raise ValueError(f"store triples must be ground, got {term}")
        if t not in self.triples:
            self.triples.add(t)
            self._by_p[p].add(t)

    def __len__(self):
        return len(self.triples)

    @classmethod
    def load(cls, path):
        store = cls()
        prefixes = dict(PREFIXES)
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                store.add(*_parse_store_line(line, prefixes))
            except SparqlError as exc:
                raise SparqlSyntaxError(f"{path}:{lineno}: {exc}") from None
        return store

    def dumps(self):
        return "".join(f"{s} {p} {o} .\n" for s, p, o in sorted(self.triples))

    def save(self, path):
        Path(path).write_text(self.dumps(), encoding="utf-8")

    def _candidates(self, pattern, binding):
        s, p, o = (binding.get(t, t) for t in pattern)
        pool = self._by_p.get(p, ()) if not is_variable(p) else self.triples
        for t in pool:
            if (is_variable(s) or t[0] == s) and (is_variable(o) or t[2] == o):
                yield t

    def solutions(self, patterns):
        """All variable bindings satisfying every pattern."""
        patterns = sorted(patterns, key=lambda p: sum(is_variable(t) for t in p))
        out = []

        def walk(i, binding):
            if i == len(patterns):
                out.append(dict(binding))
                return
            pat = patterns[i]
            for t in self._candidates(pat, binding):
                new, ok = dict(binding), True
                for var, value in zip(pat, t):
                    if is_variable(var):
                        if new.setdefault(var, value) != value:
                            ok = False
                            break
                if ok:
                    walk(i + 1, new)
        walk(0, {})
        return out

    def query(self, query):
        """Answers as plain values: IRIs without brackets, literal lexical forms."""
        q = parse_sparql(query) if isinstance(query, str) else query
        sols = self.solutions(q.triple_patterns)
        if q.form is QueryForm.ASK:
            return [bool(sols)]
        values = list(dict.fromkeys(answer_value(s[q.answer_var]) for s in sols if q.answer_var in s))
        if q.form is QueryForm.SELECT_COUNT:
            return [str(len(values))]
        return values


# -- endpoint client -------------------------------------------------------------


def parse_results(payload, answer_var=None):
    """Values from a SPARQL JSON results document."""
    try:
        doc = json.loads(payload) if isinstance(payload, (str, bytes)) else payload
        if "boolean" in doc:
            if not isinstance(doc["boolean"], bool):
                raise MalformedResults(f"non-boolean ASK result {doc['boolean']!r}")
            return [doc["boolean"]]
        head_vars = doc["head"]["vars"]
        rows = doc["results"]["bindings"]
    except (ValueError, KeyError, TypeError) as exc:
        raise MalformedResults(f"malformed SPARQL JSON results: {exc}") from None
    name = answer_var.lstrip("?") if answer_var else None
    if name not in head_vars:
        if len(head_vars) != 1:
            raise MalformedResults(f"cannot pick an answer column from {head_vars}")
        name = head_vars[0]
    out = []
    for row in rows:
        cell = row.get(name) if isinstance(row, dict) else None
        if cell is None:
            continue
        if not isinstance(cell, dict) or "value" not in cell:
            raise MalformedResults(f"binding without a value: {cell!r}")
        out.append(cell["value"])
    return out


def execute(query, endpoint, timeout=10.0):
    """Run ``query`` on a :class:`TripleStore` or an HTTP SPARQL endpoint URL."""
    q = parse_sparql(query) if isinstance(query, str) else query
    if isinstance(endpoint, TripleStore):
        return endpoint.query(q)
    url = endpoint + ("&" if "?" in endpoint else "?") + urllib.parse.urlencode(
        {"query": q.render(), "format": "application/sparql-results+json"})
    req = urllib.request.Request(url, headers={"Accept": "application/sparql-results+json"})
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            payload = resp.read()
    except urllib.error.HTTPError as exc:
        raise EndpointHTTPError(exc.code, exc.reason) from None
    except (socket.timeout, TimeoutError) as exc:
        raise EndpointTimeout(f"no response from {endpoint} within {timeout}s") from exc
    except urllib.error.URLError as exc:
        if isinstance(exc.reason, (socket.timeout, TimeoutError)):
            raise EndpointTimeout(f"no response from {endpoint} within {timeout}s") from exc
        raise EndpointNetworkError(f"cannot reach {endpoint}: {exc.reason}") from exc
    except OSError as exc:
        raise EndpointNetworkError(f"cannot reach {endpoint}: {exc}") from exc
    answers = parse_results(payload, q.answer_var)
    if q.form is QueryForm.ASK and not (len(answers) == 1 and isinstance(answers[0], bool)):
        raise MalformedResults("ASK query did not return a boolean")
    return answers


def execute_many(queries, endpoint, timeout=10.0, max_workers=4):
    """Execute independently; each slot holds answers or the raised error."""
    def one(q):
        try:
            return execute(q, endpoint, timeout)
        except (EndpointError, SparqlError) as exc:
            return exc
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(one, queries))


def results_json(query, answers):
    if query.form is QueryForm.ASK:
        return {"head": {}, "boolean": bool(answers[0])}
    name = "callret-0" if query.form is QueryForm.SELECT_COUNT else query.answer_var.lstrip("?")
    kind = "literal" if query.form is QueryForm.SELECT_COUNT else None
    rows = []
    for v in answers:
        k = kind or ("uri" if re.match(r"^[a-z][a-z0-9+.-]*://", v) else "literal")
        rows.append({name: {"type": k, "value": v}})
    return {"head": {"vars": [name]}, "results": {"bindings": rows}}


class FixtureEndpoint:
    """Local HTTP SPARQL endpoint over a :class:`TripleStore`.

    ``mode`` simulates failures: ``"ok"``, ``"error"`` (HTTP 500),
    ``"malformed"`` (invalid JSON) or ``"slow"`` (sleeps ``delay`` seconds).
    """

    def __init__(self, store, mode="ok", delay=1.0):
        self.store, self.mode, self.delay = store, mode, delay
        self.requests = []
        self._server = None

    def _handler(self):
        endpoint = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_GET(self):
                params = urllib.parse.parse_qs(urllib.parse.urlparse(self.path).query)
                text = params.get("query", [""])[0]
                endpoint.requests.append(text)
                if endpoint.mode == "slow":
                    time.sleep(endpoint.delay)
                if endpoint.mode == "error":
                    self.send_error(500, "fixture failure")
                    return
                if endpoint.mode == "malformed":
                    body = b"{not json"
                else:
                    try:
                        q = parse_sparql(text)
                        body = json.dumps(results_json(q, endpoint.store.query(q))).encode()
                    except SparqlError as exc:
                        self.send_error(400, str(exc))
                        return
                try:
                    self.send_response(200)
                    self.send_header("Content-Type", "application/sparql-results+json")
                    self.send_header("Content-Length", str(len(body)))
                    self.end_headers()
                    self.wfile.write(body)
                except (BrokenPipeError, ConnectionResetError):
                    pass

        return Handler

    @property
    def url(self):
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}/sparql"

    def __enter__(self):
        self._server = ThreadingHTTPServer(("127.0.0.1", 0), self._handler())
        self._server.daemon_threads = True
        threading.Thread(target=self._server.serve_forever, daemon=True).start()
        return self

    def __exit__(self, *exc):
        self._server.shutdown()
        self._server.server_close()


# -- answer filtering ---------------------------------------------------------------

_DATE_RE = re.compile(r"^[+-]?\d{4}(-\d{2}(-\d{2}(T\d{2}:\d{2}(:\d{2}(\.\d+)?)?(Z|[+-]\d{2}:\d{2})?)?)?)?$")


def _is_number(value):
    if isinstance(value, bool):
        return False
    try:
        float(value)
    except (TypeError, ValueError):
        return False
    return True


def is_date(value):
    return isinstance(value, str) and bool(_DATE_RE.match(value))


def filter_answers(answers, answer_type):
    answer_type = AnswerType(answer_type)
    if answer_type is AnswerType.NUMBER:
        return [a for a in answers if _is_number(a)]
    if answer_type is AnswerType.DATE:
        return [a for a in answers if is_date(a)]
    return list(answers)


@dataclass
class QueryOutcome:
    """What happened to one question on its way to answers."""

    query: SparqlQuery | None = None
    answers: list = field(default_factory=list)
    error: str | None = None
