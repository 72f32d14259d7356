"""Dictionary-encoded immutable RDF graph with three access-path indexes.

A :class:`Graph` interns every distinct term into a dense id space in
first-appearance order and keeps the (deduplicated) triples in three
sorted permutation indexes, SPO / POS / OSP, so any triple pattern with a
bound prefix is answered by a binary-searched range scan. Relation
statistics needed by the scorer (distinct-subject and distinct-object
counts, plus restricted variants) live in :class:`GraphStats`.

Snapshot format (``TRQG``, version 1, little endian)::

    magic       4 bytes  b"TRQG"
    version     u16
    term_count  u64
    triple_count u64
    terms       term_count x (kind u8, byte_len u32, utf-8 lexical)
    triples     triple_count x (s u32, p u32, o u32), SPO order

The dictionary is written in id order, so a load reproduces the exact
ids of the saved graph.
"""

from __future__ import annotations

import struct
from bisect import bisect_left
from collections.abc import Callable, Iterable, Iterator
from io import BufferedIOBase
from pathlib import Path

from .ntriples import NTriplesError, parse_line
from .terms import RDF_TYPE_IRI, Term, TermId, TermKind, Triple

SNAPSHOT_MAGIC = b"TRQG"
SNAPSHOT_VERSION = 1


class SnapshotError(ValueError):
    """Raised for a corrupt or mismatched snapshot file."""


class GraphStats:
    """Per-relation degree statistics with lazily cached restricted counts."""

    __slots__ = ("_graph", "_dom", "_ran", "_freq", "_dom_at", "_ran_at")

    def __init__(self, graph: "Graph"):
        self._graph = graph
        dom: dict[TermId, set[TermId]] = {}
        ran: dict[TermId, set[TermId]] = {}
        freq: dict[TermId, int] = {}
        for t in graph.triples():
            dom.setdefault(t.p, set()).add(t.s)
            ran.setdefault(t.p, set()).add(t.o)
            freq[t.p] = freq.get(t.p, 0) + 1
        self._dom = {r: len(s) for r, s in dom.items()}
        self._ran = {r: len(s) for r, s in ran.items()}
        self._freq = freq
        self._dom_at: dict[tuple[TermId, TermId], int] = {}
        self._ran_at: dict[tuple[TermId, TermId], int] = {}

    def dom(self, r: TermId) -> int:
        """Number of distinct subjects occurring with relation r."""
        return self._dom.get(r, 0)

    def ran(self, r: TermId) -> int:
        """Number of distinct objects occurring with relation r."""
        return self._ran.get(r, 0)

    def freq(self, r: TermId) -> int:
        """Number of triples whose predicate is r."""
        return self._freq.get(r, 0)

    def dom_at(self, r: TermId, c: TermId) -> int:
        """Distinct subjects s with (s, r, c) in the graph; cached."""
        key = (r, c)
        hit = self._dom_at.get(key)
        if hit is None:
            # triples are distinct, so the range size is the subject count
            hit = self._graph._range_size(self._graph._pos, (r, c))
            self._dom_at[key] = hit
        return hit

    def ran_at(self, c: TermId, r: TermId) -> int:
        """Distinct objects o with (c, r, o) in the graph; cached."""
        key = (c, r)
        hit = self._ran_at.get(key)
        if hit is None:
            hit = self._graph._range_size(self._graph._spo, (c, r))
            self._ran_at[key] = hit
        return hit

    def relations(self) -> list[TermId]:
        return sorted(self._freq)


class Graph:
    """Immutable triple set over a term dictionary. Build via GraphBuilder."""

    __slots__ = ("_terms", "_id_of", "_triples", "_spo", "_pos", "_osp", "stats", "_rdf_type_id")

    def __init__(self, terms: list[Term], triples: Iterable[tuple[int, int, int]]):
        self._terms = list(terms)
        self._id_of = {t: i for i, t in enumerate(self._terms)}
        if len(self._id_of) != len(self._terms):
            raise ValueError("duplicate terms in dictionary")
        spo = sorted(set(triples))
        n = len(self._terms)
        for s, p, o in spo:
            if not (0 <= s < n and 0 <= p < n and 0 <= o < n):
                raise ValueError("triple references unknown term id")
        self._spo = spo
        self._pos = sorted((p, o, s) for s, p, o in spo)
        self._osp = sorted((o, s, p) for s, p, o in spo)
        self._triples = frozenset(spo)
        self._rdf_type_id = self._id_of.get(Term.iri(RDF_TYPE_IRI))
        self.stats = GraphStats(self)

    # -- dictionary ----------------------------------------------------

    @property
    def term_count(self) -> int:
        return len(self._terms)

    @property
    def triple_count(self) -> int:
        return len(self._spo)

    @property
    def rdf_type_id(self) -> TermId | None:
        return self._rdf_type_id

    def term(self, tid: TermId) -> Term:
        return self._terms[tid]

    def id(self, term: Term) -> TermId | None:
        return self._id_of.get(term)

    def terms(self) -> Iterator[Term]:
        return iter(self._terms)

    # -- triples -------------------------------------------------------

    def contains(self, s: TermId, p: TermId, o: TermId) -> bool:
        return (s, p, o) in self._triples

    def contains_triple(self, t: Triple) -> bool:
        return t.as_tuple() in self._triples

    def triples(self) -> Iterator[Triple]:
        for s, p, o in self._spo:
            yield Triple(s, p, o)

    @staticmethod
    def _range(index: list[tuple], prefix: tuple) -> tuple[int, int]:
        lo = bisect_left(index, prefix)
        hi = bisect_left(index, prefix[:-1] + (prefix[-1] + 1,))
        return lo, hi

    @staticmethod
    def _range_size(index: list[tuple], prefix: tuple) -> int:
        lo, hi = Graph._range(index, prefix)
        return hi - lo

    def match(
        self,
        s: TermId | None = None,
        p: TermId | None = None,
        o: TermId | None = None,
    ) -> Iterator[Triple]:
        """All triples matching the pattern, in a deterministic index order.

        None is a wildcard. The index is chosen by the bound positions:
        anything with s bound scans SPO, p bound (s free) scans POS, and
        o bound alone or with s scans OSP.
        """
        if s is not None and p is not None and o is not None:
            if (s, p, o) in self._triples:
                yield Triple(s, p, o)
            return
        if s is not None:
            if p is not None:
                lo, hi = self._range(self._spo, (s, p))
            elif o is None:
                lo, hi = self._range(self._spo, (s,))
            else:
                lo, hi = self._range(self._osp, (o, s))
                for oo, ss, pp in self._osp[lo:hi]:
                    yield Triple(ss, pp, oo)
                return
            for ss, pp, oo in self._spo[lo:hi]:
                yield Triple(ss, pp, oo)
            return
        if p is not None:
            prefix = (p,) if o is None else (p, o)
            lo, hi = self._range(self._pos, prefix)
            for pp, oo, ss in self._pos[lo:hi]:
                yield Triple(ss, pp, oo)
            return
        if o is not None:
            lo, hi = self._range(self._osp, (o,))
            for oo, ss, pp in self._osp[lo:hi]:
                yield Triple(ss, pp, oo)
            return
        for ss, pp, oo in self._spo:
            yield Triple(ss, pp, oo)


class GraphBuilder:
    """Accumulates term-level triples, then freezes them into a Graph.

    Blank node labels are treated as scoped to this builder: each distinct
    input label is replaced with a fresh internal label (b0, b1, ...), so
    graphs built from different files never alias blank nodes.
    """

    def __init__(self) -> None:
        self._terms: list[Term] = []
        self._id_of: dict[Term, TermId] = {}
        self._triples: list[tuple[int, int, int]] = []
        self._seen: set[tuple[int, int, int]] = set()
        self._blanks: dict[str, Term] = {}

    def _skolemize(self, term: Term) -> Term:
        if term.kind is not TermKind.BLANK:
            return term
        mapped = self._blanks.get(term.lexical)
        if mapped is None:
            mapped = Term.blank(f"b{len(self._blanks)}")
            self._blanks[term.lexical] = mapped
        return mapped

    def _intern(self, term: Term) -> TermId:
        tid = self._id_of.get(term)
        if tid is None:
            tid = len(self._terms)
            self._terms.append(term)
            self._id_of[term] = tid
        return tid

    def add(self, s: Term, p: Term, o: Term) -> bool:
        """Add one triple; returns False when it was a duplicate."""
        if s.kind is TermKind.LITERAL:
            raise ValueError("literal not allowed as subject")
        if p.kind is not TermKind.IRI:
            raise ValueError("predicate must be an IRI")
        key = (
            self._intern(self._skolemize(s)),
            self._intern(p),
            self._intern(self._skolemize(o)),
        )
        if key in self._seen:
            return False
        self._seen.add(key)
        self._triples.append(key)
        return True

    def build(self) -> Graph:
        return Graph(self._terms, self._triples)


def parse_ntriples(
    source: str | bytes | Path | object,
    strict: bool = True,
    error_sink: Callable[[NTriplesError], None] | None = None,
) -> Graph:
    """Parse N-Triples into a Graph.

    ``source`` may be text content, UTF-8 bytes, a Path, or a file-like
    object. In strict mode (the default) the first malformed line raises
    :class:`NTriplesError` with its line number; otherwise bad lines are
    skipped, each reported to ``error_sink`` when one is given. Duplicate
    statements are stored once.
    """
    if isinstance(source, Path):
        text = source.read_text(encoding="utf-8")
    elif isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    elif hasattr(source, "read"):
        data = source.read()
        text = data.decode("utf-8") if isinstance(data, bytes) else data
    else:
        raise TypeError(f"unsupported source type: {type(source).__name__}")

    builder = GraphBuilder()
    for lineno, line in enumerate(text.split("\n"), start=1):
        try:
            parsed = parse_line(line, lineno)
        except NTriplesError as exc:
            if strict:
                raise
            if error_sink is not None:
                error_sink(exc)
            continue
        if parsed is not None:
            builder.add(*parsed)
    return builder.build()


# -- snapshot I/O ------------------------------------------------------


def save_snapshot(g: Graph, dest: str | Path | BufferedIOBase) -> None:
    """Write the graph in the TRQG binary format."""
    if g.term_count >= 2**32:
        raise SnapshotError("term dictionary too large for snapshot format")
    own = isinstance(dest, (str, Path))
    fh = open(dest, "wb") if own else dest
    try:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<HQQ", SNAPSHOT_VERSION, g.term_count, g.triple_count))
        for term in g.terms():
            data = term.lexical.encode("utf-8")
            fh.write(struct.pack("<BI", int(term.kind), len(data)))
            fh.write(data)
        for t in g.triples():
            fh.write(struct.pack("<III", t.s, t.p, t.o))
    finally:
        if own:
            fh.close()


def _read_exact(fh, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise SnapshotError("truncated snapshot")
    return data


def load_snapshot(src: str | Path | BufferedIOBase) -> Graph:
    """Read a TRQG snapshot back into a Graph."""
    own = isinstance(src, (str, Path))
    fh = open(src, "rb") if own else src
    try:
        if _read_exact(fh, 4) != SNAPSHOT_MAGIC:
            raise SnapshotError("not a TRQG snapshot (bad magic)")
        version, term_count, triple_count = struct.unpack("<HQQ", _read_exact(fh, 18))
        if version != SNAPSHOT_VERSION:
            raise SnapshotError(f"unsupported snapshot version {version}")
        terms: list[Term] = []
        for _ in range(term_count):
            kind, length = struct.unpack("<BI", _read_exact(fh, 5))
            try:
                kind = TermKind(kind)
            except ValueError as exc:
                raise SnapshotError(f"unknown term kind {kind}") from exc
            terms.append(Term(kind, _read_exact(fh, length).decode("utf-8")))
        triples = []
        for _ in range(triple_count):
            triples.append(struct.unpack("<III", _read_exact(fh, 12)))
        if fh.read(1):
            raise SnapshotError("trailing bytes after snapshot payload")
        try:
            return Graph(terms, triples)
        except ValueError as exc:
            raise SnapshotError(str(exc)) from exc
    finally:
        if own:
            fh.close()
