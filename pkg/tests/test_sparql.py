import random
import re

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nqtforge.nqt import make_nqt
from nqtforge.preprocessing import DictionaryNerProvider, preprocess
from nqtforge.sparql import (
    RDF_TYPE, AnswerType, EndpointHTTPError, EndpointNetworkError, EndpointTimeout, FixtureEndpoint,
    LinkerIndex, LinkingError, MalformedResults, QueryForm, SparqlError, SparqlQuery, SparqlSyntaxError,
    TripleStore, UnsupportedQuery, classify_question, execute, execute_many, filter_answers, is_date,
    nqt_to_sparql, parse_results, parse_sparql, select_query_form, sparql_to_nqt,
)

KUBRICK_QUERY = ("SELECT DISTINCT COUNT(?uri) WHERE { ?uri <http://dbpedia.org/ontology/director> "
                 "<http://dbpedia.org/resource/Stanley_Kubrick> . }")
KUBRICK_QUESTION = "How many movies did Stanley Kubrick direct?"
DBO, DBR = "http://dbpedia.org/ontology/", "http://dbpedia.org/resource/"


def iri(ns, name):
    return f"<{ns}{name}>"


@pytest.fixture
def store():
    s = TripleStore()
    for film in ("Lolita", "Spartacus"):
        s.add(iri(DBR, film), iri(DBO, "director"), iri(DBR, "Stanley_Kubrick"))
        s.add(iri(DBR, film), RDF_TYPE, iri(DBO, "Film"))
    s.add(iri(DBR, "Ann"), iri(DBO, "spouse"), iri(DBR, "Bob"))
    s.add(iri(DBR, "Ann"), iri(DBO, "birthDate"), '"1950-02-01"')
    return s


def test_classify_examples():
    assert classify_question(KUBRICK_QUESTION) is AnswerType.NUMBER
    assert classify_question("Who was in the military unit that played the role of Ann?") is AnswerType.PERSON
    assert classify_question("Is Bob the spouse of Ann?") is AnswerType.BOOLEAN
    assert classify_question("When was Ann born?") is AnswerType.DATE
    assert classify_question("Where is Lolita set?") is AnswerType.PLACE
    assert classify_question("Name the TV show.") is AnswerType.THING


def test_classification_is_total():
    rng = random.Random(0)
    vocab = ["how", "many", "who", "is", "when", "where", "what", "year", "the", "x", "?", "Count", ""]
    for _ in range(1000):
        q = " ".join(rng.choice(vocab) for _ in range(rng.randint(0, 6)))
        first = select_query_form(classify_question(q))
        assert first is select_query_form(classify_question(q))
        assert isinstance(first, QueryForm)


def test_query_form_table():
    assert select_query_form(AnswerType.BOOLEAN) is QueryForm.ASK
    assert select_query_form(AnswerType.NUMBER) is QueryForm.SELECT_COUNT
    assert select_query_form(AnswerType.PERSON) is QueryForm.SELECT_DISTINCT


def test_nqt_to_sparql_count():
    linker = LinkerIndex.from_queries([KUBRICK_QUERY])
    q = nqt_to_sparql(make_nqt(("?ans", "director", "Stanley Kubrick")), QueryForm.SELECT_COUNT, linker)
    assert q.render() == "SELECT COUNT(?uri) WHERE { ?uri dbo:director dbr:Stanley_Kubrick }"
    slotted = nqt_to_sparql(make_nqt(("?ans", "director", "NER1")), "SELECT_COUNT", linker, ("Stanley Kubrick",))
    assert slotted.render() == q.render()


def test_unlinkable_predicate_lists_candidates():
    linker = LinkerIndex.from_queries([KUBRICK_QUERY])
    with pytest.raises(LinkingError) as err:
        nqt_to_sparql(make_nqt(("?ans", "dirctor", "Stanley Kubrick")), QueryForm.SELECT_DISTINCT, linker)
    assert list(err.value.candidates) == ["director"]


def test_linker_prefers_frequent_uri_and_stems():
    linker = LinkerIndex()
    linker.add("entity", "Paris", "<a>")
    linker.add("entity", "Paris", "<b>", count=3)
    assert linker.entity("paris") == "<b>"
    linker.add("class", "City", "<City>")
    assert linker.klass("cities") == "<City>"
    assert LinkerIndex.from_dict(linker.to_dict()).to_dict() == linker.to_dict()


@pytest.mark.parametrize("text", [
    "SELECT DISTINCT ?uri WHERE { ?uri dbo:director dbr:Stanley_Kubrick . ?uri a dbo:Film }",
    "ASK WHERE { dbr:Ann dbo:spouse dbr:Bob }",
    "SELECT COUNT(?uri) WHERE { ?x dbo:director dbr:Stanley_Kubrick . ?x dbo:spouse ?uri }",
    'SELECT ?uri WHERE { ?uri dbo:birthDate "1950-02-01" }',
])
def test_render_parse_round_trip(text):
    q = parse_sparql(text)
    again = parse_sparql(q.render())
    assert again == q
    assert again.render() == q.render()


def test_parse_prefix_declarations_and_errors():
    q = parse_sparql("PREFIX ex: <http://ex.org/> SELECT ?uri WHERE { ?uri ex:p ex:o }")
    assert q.triple_patterns == (("?uri", "<http://ex.org/p>", "<http://ex.org/o>"),)
    with pytest.raises(UnsupportedQuery) as err:
        parse_sparql("SELECT ?uri WHERE { ?uri dbo:p ?o . FILTER(?o > 3) }")
    assert "FILTER" in err.value.constructs
    with pytest.raises(UnsupportedQuery):
        parse_sparql("SELECT WHERE { }")
    for bad in ("SELECT ?uri WHERE { ?uri dbo:p }", "ASK { zz:p dbo:q dbo:r }", "ASK { dbr:a dbo:p != }"):
        with pytest.raises(SparqlSyntaxError):
            parse_sparql(bad)


def test_sparql_to_nqt_count_record():
    pq = preprocess(KUBRICK_QUESTION, DictionaryNerProvider(["Stanley Kubrick"]))
    q = parse_sparql(KUBRICK_QUERY)
    assert q.form is QueryForm.SELECT_COUNT
    assert sparql_to_nqt(q, pq) == make_nqt(("?ans", "director", "NER1"))


def test_sparql_to_nqt_ask():
    pq = preprocess("Is Bob the spouse of Ann?", DictionaryNerProvider(["Ann", "Bob"]))
    nqt = sparql_to_nqt("ASK { dbr:A dbo:spouse dbr:B }", pq)
    assert nqt == make_nqt(("a", "spouse", "b"))
    pq = preprocess("Is A the spouse of B?", DictionaryNerProvider(["A", "B"]))
    assert sparql_to_nqt("ASK { dbr:A dbo:spouse dbr:B }", pq) == make_nqt(("NER1", "spouse", "NER2"))


def test_sparql_to_nqt_rejects_empty_and_wide_queries():
    with pytest.raises(SparqlError):
        sparql_to_nqt(SparqlQuery(QueryForm.ASK, "", ()))
    with pytest.raises(UnsupportedQuery):
        sparql_to_nqt("SELECT ?uri WHERE { ?uri dbo:p ?a . ?a dbo:q ?b }")


def test_store_semantics(store):
    assert sorted(execute("SELECT ?uri WHERE { ?uri dbo:director dbr:Stanley_Kubrick }", store)) == [
        DBR + "Lolita", DBR + "Spartacus"]
    assert execute("SELECT COUNT(?uri) WHERE { ?uri dbo:director dbr:Stanley_Kubrick . ?uri a dbo:Film }",
                   store) == ["2"]
    assert execute("ASK WHERE { dbr:Ann dbo:spouse dbr:Bob }", store) == [True]
    assert execute("ASK WHERE { dbr:Bob dbo:spouse dbr:Ann }", store) == [False]
    assert execute("SELECT ?uri WHERE { dbr:Ann dbo:birthDate ?uri }", store) == ["1950-02-01"]


def test_store_round_trip(store, tmp_path):
    store.save(tmp_path / "s.nt")
    assert TripleStore.load(tmp_path / "s.nt").triples == store.triples
    (tmp_path / "bad.nt").write_text("<a> <b> .\n")
    with pytest.raises(SparqlSyntaxError):
        TripleStore.load(tmp_path / "bad.nt")
    with pytest.raises(ValueError):
        store.add("?v", "<p>", "<o>")


def test_endpoint_two_bindings(store):
    with FixtureEndpoint(store) as ep:
        answers = execute("SELECT ?uri WHERE { ?uri dbo:director dbr:Stanley_Kubrick }", ep.url)
        assert sorted(answers) == [DBR + "Lolita", DBR + "Spartacus"]
        assert execute("ASK WHERE { dbr:Ann dbo:spouse dbr:Bob }", ep.url) == [True]
        assert execute("SELECT COUNT(?uri) WHERE { ?uri a dbo:Film }", ep.url) == ["2"]


def test_endpoint_timeout_does_not_retry(store):
    with FixtureEndpoint(store, mode="slow", delay=1.0) as ep:
        with pytest.raises(EndpointTimeout) as err:
            execute("ASK WHERE { dbr:Ann dbo:spouse dbr:Bob }", ep.url, timeout=0.2)
        assert err.value.kind == "timeout"
        assert len(ep.requests) == 1


@pytest.mark.parametrize("mode, error", [("error", EndpointHTTPError), ("malformed", MalformedResults)])
def test_endpoint_failures(store, mode, error):
    with FixtureEndpoint(store, mode=mode) as ep:
        with pytest.raises(error):
            execute("ASK WHERE { dbr:Ann dbo:spouse dbr:Bob }", ep.url)


def test_endpoint_unreachable():
    with pytest.raises(EndpointNetworkError):
        execute("ASK WHERE { dbr:Ann dbo:spouse dbr:Bob }", "http://127.0.0.1:9/sparql", timeout=2)


def test_error_kinds_are_distinct():
    kinds = {cls.kind for cls in (EndpointTimeout, EndpointNetworkError, EndpointHTTPError, MalformedResults)}
    assert len(kinds) == 4


def test_execute_many_keeps_errors_in_place(store):
    results = execute_many(["ASK WHERE { dbr:Ann dbo:spouse dbr:Bob }", "SELECT nonsense"], store)
    assert results[0] == [True] and isinstance(results[1], SparqlError)


def test_parse_results_documents():
    doc = {"head": {"vars": ["uri"]}, "results": {"bindings": [{"uri": {"type": "uri", "value": "u1"}}, {}]}}
    assert parse_results(doc, "?uri") == ["u1"]
    with pytest.raises(MalformedResults):
        parse_results({"boolean": "yes"})
    with pytest.raises(MalformedResults):
        parse_results({"head": {"vars": ["a", "b"]}, "results": {"bindings": []}}, "?c")


def test_filter_examples():
    assert filter_answers(["3", "Kubrick"], AnswerType.NUMBER) == ["3"]
    assert filter_answers([True], AnswerType.BOOLEAN) == [True]
    assert filter_answers(["2001-05-06", "May"], AnswerType.DATE) == ["2001-05-06"]


_SHAPES = {"NNNN", "NNNN-NN", "NNNN-NN-NN"}


@given(st.text(alphabet="0123456789-+x", max_size=12))
def test_date_filter_matches_shape_oracle(text):
    body = text[1:] if text[:1] in "+-" and text else text
    shape = re.sub(r"\d", "N", body)
    assert is_date(text) == (shape in _SHAPES)
