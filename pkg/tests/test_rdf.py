from __future__ import annotations

import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reachjoin.rdf import (DataGraphMeta, Dictionary, DictionaryFrozen, MalformedLine, Term, TermKind,
                           UnknownTermId, load_ntriples, parse_ntriples, parse_ntriples_text,
                           unique_triples, write_ntriples)


def test_encode_is_idempotent():
    d = Dictionary()
    assert d.encode(Term.iri("ex:a")) == 0
    assert d.encode(Term.iri("ex:a")) == 0


def test_ids_first_seen_contiguous():
    d = Dictionary()
    ids = [d.encode(Term.iri(x)) for x in ("ex:a", "ex:b", "ex:a", "ex:c")]
    assert ids == [0, 1, 0, 2]


def test_decode_inverse_and_unknown_id():
    d = Dictionary()
    tid = d.encode(Term.iri("ex:a"))
    assert d.decode(tid) == Term(TermKind.IRI, "ex:a")
    with pytest.raises(UnknownTermId):
        d.decode(len(d))


def test_iri_and_literal_are_distinct_terms():
    d = Dictionary()
    assert d.encode(Term.iri("x")) != d.encode(Term.literal('"x"'))


def test_empty_lexical_rejected():
    with pytest.raises(ValueError):
        Term.iri("")


def test_frozen_dictionary_refuses_new_terms():
    d = Dictionary()
    d.encode(Term.iri("a"))
    d.freeze()
    assert d.encode(Term.iri("a")) == 0
    with pytest.raises(DictionaryFrozen):
        d.encode(Term.iri("b"))


_lexical = st.text(alphabet=st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=20)
_terms = st.one_of(_lexical.map(Term.iri), _lexical.map(lambda s: Term(TermKind.LITERAL, '"' + s + '"')))


@settings(max_examples=50, deadline=None)
@given(st.lists(_terms, min_size=1, max_size=50))
def test_round_trip_arbitrary_terms(terms):
    d = Dictionary()
    ids = [d.encode(t) for t in terms]
    assert [d.decode(i) for i in ids] == terms
    assert all(d.encode(d.decode(i)) == i for i in range(len(d)))


@pytest.mark.parametrize("seed", range(5))
def test_round_trip_1000_random_terms(seed):
    rng = np.random.default_rng(seed)
    terms = [Term.iri(f"ex:{x}") if rng.random() < 0.5 else Term.literal(f'"{x}"')
             for x in rng.integers(0, 400, size=1000)]
    d = Dictionary()
    ids = [d.encode(t) for t in terms]
    assert [d.decode(i) for i in ids] == terms
    assert all(d.encode(d.decode(i)) == i for i in range(len(d)))


def test_dictionary_save_load_round_trip(tmp_path):
    d = Dictionary()
    for t in [Term.iri("http://x/a b"), Term.literal('"tab\there"@en'), Term.literal('"line\nbreak"'),
              Term.literal('"5"^^<http://www.w3.org/2001/XMLSchema#int>'), Term.iri("ex:\\back")]:
        d.encode(t)
    d.save(tmp_path / "d.tsv")
    back = Dictionary.load(tmp_path / "d.tsv")
    assert back.terms() == d.terms()


def test_parse_minimal_line():
    arr, d = parse_ntriples_text("<ex:a> <ex:p> <ex:b> .\n")
    assert arr.tolist() == [[0, 1, 2]]
    assert d.decode(2) == Term.iri("ex:b")


def test_parse_literal_object_keeps_tags():
    arr, d = parse_ntriples_text('<ex:a> <ex:p> "v"@en .\n<ex:a> <ex:p> "1"^^<ex:int> .\n')
    assert d.decode(arr[0, 2]) == Term.literal('"v"@en')
    assert d.decode(arr[1, 2]).lexical == '"1"^^<ex:int>'


def test_malformed_line_reports_line_number():
    with pytest.raises(MalformedLine) as exc:
        parse_ntriples_text("# comment\n<ex:a> <ex:p> <ex:b> .\n<ex:a> <ex:p>\n")
    assert exc.value.lineno == 3


def test_lenient_mode_skips_bad_lines():
    arr, _ = parse_ntriples_text("<ex:a> <ex:p>\n<ex:a> <ex:p> <ex:b> .\n", strict=False)
    assert len(arr) == 1


def test_duplicates_kept_at_parse_and_removed_later():
    text = "<ex:a> <ex:p> <ex:b> .\n<ex:a> <ex:p> <ex:b> .\n<ex:b> <ex:p> <ex:c> .\n"
    arr, _ = parse_ntriples_text(text)
    assert len(arr) == 3
    assert len(unique_triples(arr)) == 2


def test_parse_is_deterministic():
    text = "".join(f"<ex:{i % 7}> <ex:p{i % 3}> <ex:{i % 5}> .\n" for i in range(50))
    a1, d1 = parse_ntriples_text(text)
    a2, d2 = parse_ntriples_text(text)
    assert np.array_equal(a1, a2) and d1.terms() == d2.terms()


def test_parse_accepts_byte_stream():
    d = Dictionary()
    rows = list(parse_ntriples(io.BytesIO(b"<ex:a> <ex:p> <ex:b> .\n"), d))
    assert rows == [(0, 1, 2)]


def test_file_round_trip_preserves_terms(tmp_path):
    text = '<ex:a> <ex:p> "x y"@en .\n<ex:b> <ex:q> <ex:a> .\n<ex:a> <ex:p> "z" .\n'
    path = tmp_path / "in.nt"
    path.write_text(text)
    arr, d = load_ntriples(path)
    out = io.StringIO()
    write_ntriples(arr, d, out)
    (tmp_path / "out.nt").write_text(out.getvalue())
    arr2, d2 = load_ntriples(tmp_path / "out.nt")
    assert set(d.terms()) == set(d2.terms())
    decode = lambda a, dd: {tuple(dd.decode(x) for x in row) for row in a.tolist()}
    assert decode(arr, d) == decode(arr2, d2)


def test_data_graph_meta_counts():
    arr, d = parse_ntriples_text("<a> <p> <b> .\n<b> <p> <c> .\n<a> <q> <a> .\n<a> <p> <b> .\n")
    meta = DataGraphMeta.from_triples(arr)
    p, q = d.lookup(Term.iri("p")), d.lookup(Term.iri("q"))
    assert meta.vertex_count == 3
    assert meta.edges_per_property == {p: 2, q: 1}
    assert meta.vertices_per_property == {p: 3, q: 1}
    assert all(v <= meta.vertex_count for v in meta.vertices_per_property.values())
