from __future__ import annotations

import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trq.store import (
    Graph,
    GraphBuilder,
    SnapshotError,
    load_snapshot,
    parse_ntriples,
    save_snapshot,
)
from trq.terms import RDF_TYPE, Term

from conftest import build_graph, ex


@pytest.fixture
def small():
    return build_graph(
        [
            ("a", "p", "b"),
            ("c", "p", "b"),
            ("a", "q", "c"),
            ("b", "p", "a"),
            ("a", "p", "c"),
        ]
    )


def test_dictionary_first_appearance_order(small):
    # a, p, b appear first in that order
    assert small.id(ex("a")) == 0
    assert small.id(ex("p")) == 1
    assert small.id(ex("b")) == 2
    assert small.term(0) == ex("a")


def test_id_lookup_is_total_inverse(small):
    for tid in range(small.term_count):
        assert small.id(small.term(tid)) == tid
    assert small.id(ex("missing")) is None


def test_term_out_of_range(small):
    with pytest.raises(IndexError):
        small.term(small.term_count)


def test_counts(small):
    assert small.triple_count == 5
    assert small.term_count == 5  # a p b c q


def test_contains(small):
    a, p, b = small.id(ex("a")), small.id(ex("p")), small.id(ex("b"))
    assert small.contains(a, p, b)
    assert not small.contains(b, p, b)
    from trq.terms import Triple
    assert small.contains_triple(Triple(a, p, b))
    assert not small.contains_triple(Triple(b, p, b))


def test_duplicate_add_is_noop():
    b = GraphBuilder()
    b.add(ex("a"), ex("p"), ex("b"))
    b.add(ex("a"), ex("p"), ex("b"))
    assert b.build().triple_count == 1


def test_builder_rejects_bad_positions():
    b = GraphBuilder()
    with pytest.raises(ValueError):
        b.add(Term.literal("x"), ex("p"), ex("o"))
    with pytest.raises(ValueError):
        b.add(ex("s"), Term.literal("p"), ex("o"))
    with pytest.raises(ValueError):
        b.add(ex("s"), Term.blank("b"), ex("o"))


def _scan(g: Graph, s, p, o):
    return {
        t
        for t in g.triples()
        if (s is None or t.s == s) and (p is None or t.p == p) and (o is None or t.o == o)
    }


def test_match_against_full_scan(small):
    ids = list(range(small.term_count)) + [None]
    for s in ids:
        for p in ids:
            for o in ids:
                got = set(small.match(s, p, o))
                assert got == _scan(small, s, p, o), (s, p, o)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_match_full_scan_random_graphs(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    rows = [
        (f"e{rng.integers(n)}", f"r{rng.integers(2)}", f"e{rng.integers(n)}")
        for _ in range(int(rng.integers(1, 25)))
    ]
    g = build_graph(rows)
    for _ in range(12):
        pick = lambda: None if rng.random() < 0.5 else int(rng.integers(g.term_count))
        s, p, o = pick(), pick(), pick()
        assert set(g.match(s, p, o)) == _scan(g, s, p, o)


def test_match_results_sorted_spo(small):
    out = [t.as_tuple() for t in small.match(None, None, None)]
    assert out == sorted(out)
    a = small.id(ex("a"))
    by_s = [t.as_tuple() for t in small.match(a, None, None)]
    assert by_s == sorted(by_s)


def test_rdf_type_id_property():
    g = build_graph([("a", "type", "C"), ("a", "p", "b")])
    assert g.rdf_type_id == g.id(RDF_TYPE)
    g2 = build_graph([("a", "p", "b")])
    assert g2.rdf_type_id is None


# -- statistics --------------------------------------------------------


def test_stats_dom_ran_freq(small):
    st_ = small.stats
    p = small.id(ex("p"))
    q = small.id(ex("q"))
    # p: triples (a,p,b) (c,p,b) (b,p,a) (a,p,c): subjects {a,c,b}, objects {b,a,c}
    assert st_.freq(p) == 4
    assert st_.dom(p) == 3
    assert st_.ran(p) == 3
    assert st_.freq(q) == 1 and st_.dom(q) == 1 and st_.ran(q) == 1
    assert st_.freq(small.id(ex("a"))) == 0  # not used as predicate


def test_stats_conditional_counts(small):
    st_ = small.stats
    p = small.id(ex("p"))
    b = small.id(ex("b"))
    a = small.id(ex("a"))
    # subjects with (s, p, b): a and c
    assert st_.dom_at(p, b) == 2
    # objects with (a, p, o): b and c
    assert st_.ran_at(a, p) == 2
    assert st_.dom_at(p, small.id(ex("q"))) == 0
    # cached path returns the same values
    assert st_.dom_at(p, b) == 2
    assert st_.ran_at(a, p) == 2


def test_stats_against_scan_oracle():
    rng = np.random.default_rng(3)
    rows = [
        (f"e{rng.integers(6)}", f"r{rng.integers(3)}", f"e{rng.integers(6)}")
        for _ in range(40)
    ]
    g = build_graph(rows)
    stats = g.stats
    trs = list(g.triples())
    rels = {t.p for t in trs}
    for r in rels:
        assert stats.freq(r) == sum(1 for t in trs if t.p == r)
        assert stats.dom(r) == len({t.s for t in trs if t.p == r})
        assert stats.ran(r) == len({t.o for t in trs if t.p == r})
        for c in range(g.term_count):
            assert stats.dom_at(r, c) == len({t.s for t in trs if t.p == r and t.o == c})
            assert stats.ran_at(c, r) == len({t.o for t in trs if t.p == r and t.s == c})


# -- snapshots ---------------------------------------------------------


def test_snapshot_round_trip(tmp_path, small):
    path = tmp_path / "g.trqg"
    save_snapshot(small, path)
    g2 = load_snapshot(path)
    assert g2.term_count == small.term_count
    assert g2.triple_count == small.triple_count
    assert [g2.term(i) for i in range(g2.term_count)] == [
        small.term(i) for i in range(small.term_count)
    ]
    assert {t.as_tuple() for t in g2.triples()} == {t.as_tuple() for t in small.triples()}


def test_snapshot_round_trip_with_literals_and_blanks(tmp_path):
    text = '_:x <http://p> "café"@fr .\n<http://s> <http://p> _:x .\n'
    g = parse_ntriples(text)
    path = tmp_path / "g.trqg"
    save_snapshot(g, path)
    g2 = load_snapshot(path)
    assert {t.as_tuple() for t in g2.triples()} == {t.as_tuple() for t in g.triples()}
    assert [g2.term(i) for i in range(g2.term_count)] == [
        g.term(i) for i in range(g.term_count)
    ]


def test_snapshot_bytes_deterministic(small):
    b1, b2 = io.BytesIO(), io.BytesIO()
    save_snapshot(small, b1)
    save_snapshot(small, b2)
    assert b1.getvalue() == b2.getvalue()
    assert b1.getvalue()[:4] == b"TRQG"


def test_snapshot_rejects_bad_magic(small):
    buf = io.BytesIO()
    save_snapshot(small, buf)
    data = bytearray(buf.getvalue())
    data[:4] = b"ZZZZ"
    with pytest.raises(SnapshotError):
        load_snapshot(io.BytesIO(bytes(data)))


def test_snapshot_rejects_truncation(small):
    buf = io.BytesIO()
    save_snapshot(small, buf)
    data = buf.getvalue()
    with pytest.raises(SnapshotError):
        load_snapshot(io.BytesIO(data[:-3]))


def test_snapshot_rejects_trailing_garbage(small):
    buf = io.BytesIO()
    save_snapshot(small, buf)
    with pytest.raises(SnapshotError):
        load_snapshot(io.BytesIO(buf.getvalue() + b"\x00"))


def test_snapshot_rejects_bad_version(small):
    buf = io.BytesIO()
    save_snapshot(small, buf)
    data = bytearray(buf.getvalue())
    data[4] = 99
    with pytest.raises(SnapshotError):
        load_snapshot(io.BytesIO(bytes(data)))


def test_empty_graph_round_trip(tmp_path):
    g = GraphBuilder().build()
    path = tmp_path / "empty.trqg"
    save_snapshot(g, path)
    g2 = load_snapshot(path)
    assert g2.term_count == 0 and g2.triple_count == 0
    assert list(g2.match(None, None, None)) == []
