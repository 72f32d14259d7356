"""Parser and evaluator for a basic-graph-pattern SPARQL fragment.

Supported query shapes: ``PREFIX`` declarations, ``SELECT [DISTINCT]
?v ... WHERE { ... }``, ``ASK { ... }``, and ``SELECT COUNT(DISTINCT ?v)
WHERE { ... }``, where the body is a conjunction of dot-separated triple
patterns. Anything beyond that (FILTER, OPTIONAL, UNION, property paths,
blank nodes in patterns, ...) raises :class:`UnsupportedFeatureError`
naming the feature, so callers can tell a fragment boundary from a typo.

Evaluation is exact set-semantics join over the store: patterns are
reordered greedily by an estimated result cardinality drawn from
GraphStats, then solved pattern-at-a-time with index range scans.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .store import Graph
from .terms import RDF_TYPE_IRI, Term, TermId, unescape_string

DEFAULT_RESULT_LIMIT = 10_000


class QuerySyntaxError(ValueError):
    pass


class UnsupportedFeatureError(QuerySyntaxError):
    """The query is valid SPARQL but outside the supported fragment."""

    def __init__(self, feature: str):
        super().__init__(f"unsupported query feature: {feature}")
        self.feature = feature


@dataclass(frozen=True, slots=True)
class Var:
    name: str


@dataclass(frozen=True, slots=True)
class Const:
    term: Term


Atom = Var | Const


@dataclass(frozen=True, slots=True)
class TriplePattern:
    s: Atom
    p: Atom
    o: Atom

    def atoms(self) -> tuple[Atom, Atom, Atom]:
        return (self.s, self.p, self.o)

    def variables(self) -> set[str]:
        return {a.name for a in self.atoms() if isinstance(a, Var)}


class QueryForm(Enum):
    SELECT = "select"
    ASK = "ask"
    COUNT_DISTINCT = "count_distinct"


@dataclass(frozen=True)
class Query:
    form: QueryForm
    patterns: tuple[TriplePattern, ...]
    projected: tuple[str, ...] = ()
    distinct: bool = False
    prefixes: dict[str, str] | None = None

    def variables(self) -> tuple[str, ...]:
        """Variable names in first-appearance order."""
        out: list[str] = []
        for p in self.patterns:
            for a in p.atoms():
                if isinstance(a, Var) and a.name not in out:
                    out.append(a.name)
        return tuple(out)


# A solution mapping binds every variable of the query to a term id.
SolutionMapping = dict[str, TermId]


# -- tokenizer ---------------------------------------------------------

_TOKEN = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<comment>\#[^\n]*)
    | (?P<lbrace>\{) | (?P<rbrace>\}) | (?P<lparen>\() | (?P<rparen>\))
    | (?P<dtmark>\^\^)
    | (?P<dot>\.(?![0-9]))
    | (?P<semi>;) | (?P<comma>,)
    | (?P<var>[?$][A-Za-z_][A-Za-z0-9_]*)
    | (?P<iriref><[^<>\s]*>)
    | (?P<literal>"(?:[^"\\]|\\.)*")
    | (?P<langtag>@[A-Za-z]+(?:-[A-Za-z0-9]+)*)
    | (?P<bnode>_:[A-Za-z0-9_]*)
    | (?P<pname>(?:[A-Za-z][A-Za-z0-9_\-]*)?:(?:[A-Za-z0-9_\-]|\.(?=[A-Za-z0-9_\-]))*)
    | (?P<number>[+-]?[0-9][0-9.eE+-]*)
    | (?P<word>[A-Za-z][A-Za-z0-9_]*)
    | (?P<other>\S)
    """,
    re.X,
)

_UNSUPPORTED_KEYWORDS = {
    "filter",
    "optional",
    "union",
    "minus",
    "graph",
    "service",
    "bind",
    "values",
    "limit",
    "offset",
    "order",
    "group",
    "having",
    "construct",
    "describe",
    "insert",
    "delete",
    "exists",
    "reduced",
}


@dataclass(frozen=True, slots=True)
class _Tok:
    kind: str
    text: str


def _tokenize(text: str) -> list[_Tok]:
    out: list[_Tok] = []
    pos = 0
    for m in _TOKEN.finditer(text):
        if m.start() != pos:
            raise QuerySyntaxError(f"cannot tokenize near {text[pos:pos + 20]!r}")
        pos = m.end()
        kind = m.lastgroup or "other"
        if kind in ("ws", "comment"):
            continue
        out.append(_Tok(kind, m.group()))
    if pos != len(text):
        raise QuerySyntaxError(f"cannot tokenize near {text[pos:pos + 20]!r}")
    return out


class _Parser:
    def __init__(self, tokens: list[_Tok]):
        self.toks = tokens
        self.i = 0
        self.prefixes: dict[str, str] = {}

    def peek(self) -> _Tok | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self) -> _Tok:
        tok = self.peek()
        if tok is None:
            raise QuerySyntaxError("unexpected end of query")
        self.i += 1
        return tok

    def at_word(self, word: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == "word" and tok.text.lower() == word

    def expect_word(self, word: str) -> None:
        if not self.at_word(word):
            got = self.peek().text if self.peek() else "end of query"
            raise QuerySyntaxError(f"expected {word.upper()}, got {got!r}")
        self.next()

    def expect(self, kind: str) -> _Tok:
        tok = self.next()
        if tok.kind != kind:
            raise QuerySyntaxError(f"expected {kind}, got {tok.text!r}")
        return tok

    def _check_keyword(self, tok: _Tok) -> None:
        if tok.kind == "word" and tok.text.lower() in _UNSUPPORTED_KEYWORDS:
            raise UnsupportedFeatureError(tok.text.upper())

    def _expand_pname(self, text: str) -> str:
        prefix, _, local = text.partition(":")
        if prefix not in self.prefixes:
            raise QuerySyntaxError(f"unknown prefix {prefix!r}:")
        return self.prefixes[prefix] + local

    def _iri_from_token(self, tok: _Tok) -> str:
        raw = tok.text[1:-1]
        try:
            value = unescape_string(raw)
        except ValueError as exc:
            raise QuerySyntaxError(f"bad IRI escape in <{raw}>: {exc}") from None
        if not value:
            raise QuerySyntaxError("empty IRI")
        return value

    def parse_prologue(self) -> None:
        while self.at_word("prefix"):
            self.next()
            name = self.expect("pname").text
            prefix, _, local = name.partition(":")
            if local:
                raise QuerySyntaxError(f"malformed prefix declaration {name!r}")
            iri = self._iri_from_token(self.expect("iriref"))
            self.prefixes[prefix] = iri

    def parse_term_atom(self, position: str) -> Atom:
        tok = self.next()
        self._check_keyword(tok)
        if tok.kind == "var":
            return Var(tok.text[1:])
        if tok.kind == "word" and tok.text == "a":
            if position != "predicate":
                raise QuerySyntaxError("'a' is only valid in predicate position")
            return Const(Term.iri(RDF_TYPE_IRI))
        if tok.kind == "bnode" or tok.text in ("[", "]"):
            raise UnsupportedFeatureError("blank node in query pattern")
        if tok.kind == "number":
            raise UnsupportedFeatureError("numeric literal shorthand")
        if tok.kind == "iriref":
            term = Term.iri(self._iri_from_token(tok))
        elif tok.kind == "pname":
            term = Term.iri(self._expand_pname(tok.text))
        elif tok.kind == "literal":
            term = self._finish_literal(tok)
        else:
            if tok.kind in ("semi", "comma"):
                raise UnsupportedFeatureError("predicate-object list shorthand")
            raise QuerySyntaxError(f"unexpected token {tok.text!r}")
        if position == "predicate" and not term.is_iri:
            raise QuerySyntaxError("predicate must be an IRI or a variable")
        if position == "subject" and term.is_literal:
            raise QuerySyntaxError("literal not allowed as subject")
        return Const(term)

    def _finish_literal(self, tok: _Tok) -> Term:
        try:
            value = unescape_string(tok.text[1:-1])
        except ValueError as exc:
            raise QuerySyntaxError(f"bad literal escape: {exc}") from None
        nxt = self.peek()
        if nxt is not None and nxt.kind == "langtag":
            self.next()
            return Term.literal(value, lang=nxt.text[1:])
        if nxt is not None and nxt.kind == "dtmark":
            self.next()
            dtok = self.next()
            if dtok.kind == "iriref":
                dt = self._iri_from_token(dtok)
            elif dtok.kind == "pname":
                dt = self._expand_pname(dtok.text)
            else:
                raise QuerySyntaxError("datatype must be an IRI")
            return Term.literal(value, datatype=dt)
        return Term.literal(value)

    def parse_group(self) -> tuple[TriplePattern, ...]:
        self.expect("lbrace")
        patterns: list[TriplePattern] = []
        while True:
            tok = self.peek()
            if tok is None:
                raise QuerySyntaxError("unterminated pattern group")
            if tok.kind == "rbrace":
                self.next()
                break
            if tok.kind == "lbrace":
                # nested groups only arise for UNION/OPTIONAL style algebra
                raise UnsupportedFeatureError("group graph pattern")
            if tok.kind == "word":
                self._check_keyword(tok)
            s = self.parse_term_atom("subject")
            p = self.parse_term_atom("predicate")
            o = self.parse_term_atom("object")
            patterns.append(TriplePattern(s, p, o))
            tok = self.peek()
            if tok is None:
                raise QuerySyntaxError("unterminated pattern group")
            if tok.kind == "dot":
                self.next()
            elif tok.kind in ("semi", "comma"):
                raise UnsupportedFeatureError("predicate-object list shorthand")
            elif tok.kind not in ("rbrace",):
                # two patterns must be separated by a dot
                if tok.kind in ("var", "iriref", "pname", "literal", "word", "bnode"):
                    raise QuerySyntaxError("expected '.' between triple patterns")
        if not patterns:
            raise QuerySyntaxError("empty pattern group")
        return tuple(patterns)


def parse_query(text: str) -> Query:
    """Parse query text into a :class:`Query`; raises QuerySyntaxError."""
    parser = _Parser(_tokenize(text))
    parser.parse_prologue()
    tok = parser.peek()
    if tok is None:
        raise QuerySyntaxError("empty query")
    parser._check_keyword(tok)

    if parser.at_word("ask"):
        parser.next()
        if parser.at_word("where"):
            parser.next()
        patterns = parser.parse_group()
        query = Query(QueryForm.ASK, patterns, (), False, dict(parser.prefixes))
    elif parser.at_word("select"):
        parser.next()
        query = _parse_select_tail(parser)
    else:
        raise QuerySyntaxError(f"expected SELECT or ASK, got {tok.text!r}")

    trailing = parser.peek()
    if trailing is not None:
        parser._check_keyword(trailing)
        raise QuerySyntaxError(f"unexpected trailing token {trailing.text!r}")
    return query


def _parse_select_tail(parser: _Parser) -> Query:
    form = QueryForm.SELECT
    distinct = False
    projected: list[str] = []
    counted: str | None = None

    wrapped = False
    tok = parser.peek()
    if tok is not None and tok.kind == "lparen":
        parser.next()
        wrapped = True
        tok = parser.peek()

    if parser.at_word("count"):
        parser.next()
        parser.expect("lparen")
        parser.expect_word("distinct")
        counted = parser.expect("var").text[1:]
        parser.expect("rparen")
        if wrapped:
            parser.expect_word("as")
            parser.expect("var")
            parser.expect("rparen")
        form = QueryForm.COUNT_DISTINCT
        distinct = True
        projected = [counted]
    else:
        if wrapped:
            raise UnsupportedFeatureError("expression in SELECT clause")
        if parser.at_word("distinct"):
            parser.next()
            distinct = True
        star = parser.peek()
        if star is not None and star.kind == "other" and star.text == "*":
            parser.next()
            projected = []
        else:
            while True:
                tok = parser.peek()
                if tok is not None and tok.kind == "var":
                    projected.append(parser.next().text[1:])
                else:
                    break
            if not projected:
                raise QuerySyntaxError("SELECT needs at least one variable or *")

    if parser.at_word("where"):
        parser.next()
    patterns = parser.parse_group()

    in_patterns = set()
    for p in patterns:
        in_patterns |= p.variables()
    if not projected:
        # SELECT *: project every variable in first-appearance order
        seen: list[str] = []
        for p in patterns:
            for a in p.atoms():
                if isinstance(a, Var) and a.name not in seen:
                    seen.append(a.name)
        projected = seen
    for v in projected:
        if v not in in_patterns:
            raise QuerySyntaxError(f"projected variable ?{v} does not occur in any pattern")
    return Query(form, patterns, tuple(projected), distinct, dict(parser.prefixes))


# -- evaluation --------------------------------------------------------


@dataclass
class BGPResult:
    mappings: list[SolutionMapping]
    truncated: bool = False


def _is_bound(atom: Atom, bound: set[str]) -> bool:
    return isinstance(atom, Const) or atom.name in bound


def _cardinality_estimate(g: Graph, pat: TriplePattern, bound: set[str]) -> float:
    sb = _is_bound(pat.s, bound)
    pb = _is_bound(pat.p, bound)
    ob = _is_bound(pat.o, bound)
    if isinstance(pat.p, Const):
        rid = g.id(pat.p.term)
        if rid is None:
            return 0.0
        freq = g.stats.freq(rid)
        if freq == 0:
            return 0.0
        if sb and ob:
            return 1.0
        if sb:
            return freq / max(1, g.stats.dom(rid))
        if ob:
            return freq / max(1, g.stats.ran(rid))
        return float(freq)
    # variable predicate: fall back to coarse whole-graph ratios
    if sb and ob and pb:
        return 1.0
    if sb and ob:
        return 2.0
    if sb or ob:
        return max(2.0, 2.0 * g.triple_count / max(1, g.term_count))
    return float(g.triple_count)


def _order_patterns(g: Graph, patterns: tuple[TriplePattern, ...]) -> list[TriplePattern]:
    """Greedy join order: cheapest estimated pattern next, preferring ones
    that share a variable with what is already bound (avoids products)."""
    remaining = list(range(len(patterns)))
    bound: set[str] = set()
    order: list[TriplePattern] = []
    while remaining:
        def key(i: int) -> tuple:
            pat = patterns[i]
            vars_i = pat.variables()
            connected = not bound or not vars_i or bool(vars_i & bound)
            return (not connected, _cardinality_estimate(g, pat, bound), i)

        best = min(remaining, key=key)
        remaining.remove(best)
        order.append(patterns[best])
        bound |= patterns[best].variables()
    return order


def _resolve(g: Graph, atom: Atom, binding: SolutionMapping) -> tuple[TermId | None, str | None]:
    """Returns (bound id or None, free variable name or None).

    A constant absent from the dictionary resolves to id -1, which can
    never match.
    """
    if isinstance(atom, Const):
        tid = g.id(atom.term)
        return (-1 if tid is None else tid), None
    if atom.name in binding:
        return binding[atom.name], None
    return None, atom.name


def evaluate_bgp(g: Graph, q: Query, limit: int | None = None) -> BGPResult:
    """Evaluate the query's basic graph pattern.

    Returns every solution mapping over var(q) (each mapping is total).
    With ``distinct`` set on the query, mappings whose projected tuple
    repeats are dropped. With ``limit`` set, evaluation stops after that
    many retained mappings and the result is flagged truncated if the
    enumeration had not finished.
    """
    order = _order_patterns(g, q.patterns)

    def walk(idx: int, binding: SolutionMapping):
        if idx == len(order):
            yield binding
            return
        pat = order[idx]
        sid, sname = _resolve(g, pat.s, binding)
        pid, pname = _resolve(g, pat.p, binding)
        oid, oname = _resolve(g, pat.o, binding)
        if -1 in (sid, pid, oid):
            return
        for tr in g.match(sid, pid, oid):
            new = dict(binding)
            ok = True
            for name, value in ((sname, tr.s), (pname, tr.p), (oname, tr.o)):
                if name is None:
                    continue
                if name in new and new[name] != value:
                    ok = False
                    break
                new[name] = value
            if ok:
                yield from walk(idx + 1, new)

    gen = walk(0, {})
    out: list[SolutionMapping] = []
    seen: set[tuple] = set()
    truncated = False
    projected = q.projected or tuple(sorted(q.variables()))
    for m in gen:
        if q.distinct:
            key = tuple(m[v] for v in projected)
            if key in seen:
                continue
            seen.add(key)
        out.append(m)
        if limit is not None and len(out) >= limit:
            truncated = next(gen, None) is not None
            break
    return BGPResult(out, truncated)


def ask(g: Graph, q: Query) -> bool:
    """True iff the pattern group has at least one solution."""
    if len(q.patterns) == 1 and not q.patterns[0].variables():
        pat = q.patterns[0]
        ids = [g.id(a.term) for a in pat.atoms()]  # type: ignore[union-attr]
        if None in ids:
            return False
        return g.contains(*ids)
    probe = Query(QueryForm.SELECT, q.patterns, (), False, q.prefixes)
    return bool(evaluate_bgp(g, probe, limit=1).mappings)


def count_distinct(g: Graph, q: Query) -> int:
    """Number of distinct bindings of the counted variable."""
    if q.form is not QueryForm.COUNT_DISTINCT:
        raise ValueError("query is not a COUNT(DISTINCT ?v) form")
    var = q.projected[0]
    if var not in q.variables():
        raise ValueError(f"counted variable ?{var} does not occur in any pattern")
    result = evaluate_bgp(g, Query(QueryForm.SELECT, q.patterns, (var,), True, q.prefixes))
    return len({m[var] for m in result.mappings})
