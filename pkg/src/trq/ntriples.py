"""Line-oriented parser for the N-Triples subset accepted as input.

Each non-blank, non-comment line holds one statement:

    <subject> <predicate> <object> .

Subjects are absolute IRIs or ``_:label`` blank nodes, predicates are
absolute IRIs, objects may additionally be literals ``"value"`` with an
optional ``@lang`` tag or ``^^<datatype>`` suffix. A ``#`` comment may
follow the closing dot. Escapes inside IRIs are restricted to \\u/\\U;
literals accept the usual ECHAR set as well.
"""

from __future__ import annotations

import re

from .terms import Term, TermKind, is_absolute_iri, unescape_string

_BLANK_LABEL = re.compile(r"_:([A-Za-z0-9_]+)")
_LANG_TAG = re.compile(r"@([A-Za-z]+(?:-[A-Za-z0-9]+)*)")
_WS = re.compile(r"[ \t]+")


class NTriplesError(ValueError):
    """Parse failure carrying the one-based line number and offending text."""

    def __init__(self, message: str, lineno: int, line: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno
        self.line = line


def _skip_ws(line: str, i: int) -> int:
    m = _WS.match(line, i)
    return m.end() if m else i


def _unescape_iri(raw: str) -> str:
    # IRIs only admit \u / \U escapes.
    if "\\" in raw:
        for j, ch in enumerate(raw):
            if ch == "\\" and raw[j + 1 : j + 2] not in ("u", "U"):
                raise ValueError(f"escape \\{raw[j + 1:j + 2]} not allowed in IRI")
    return unescape_string(raw)


def _parse_iri(line: str, i: int) -> tuple[Term, int]:
    end = line.find(">", i + 1)
    if end < 0:
        raise ValueError("unterminated IRI")
    raw = line[i + 1 : end]
    value = _unescape_iri(raw)
    if not value or any(ch in value for ch in ' <>"{}|^`') or any(ord(ch) < 0x21 for ch in value):
        raise ValueError(f"malformed IRI <{raw}>")
    if not is_absolute_iri(value):
        raise ValueError(f"IRI is not absolute: <{raw}>")
    return Term.iri(value), end + 1


def _parse_blank(line: str, i: int) -> tuple[Term, int]:
    m = _BLANK_LABEL.match(line, i)
    if not m:
        raise ValueError("malformed blank node label")
    return Term.blank(m.group(1)), m.end()


def _parse_literal(line: str, i: int) -> tuple[Term, int]:
    j = i + 1
    n = len(line)
    while j < n:
        ch = line[j]
        if ch == "\\":
            j += 2
            continue
        if ch == '"':
            break
        j += 1
    if j >= n:
        raise ValueError("unterminated literal")
    value = unescape_string(line[i + 1 : j])
    j += 1
    lang = None
    datatype = None
    if line.startswith("@", j):
        m = _LANG_TAG.match(line, j)
        if not m:
            raise ValueError("malformed language tag")
        lang = m.group(1)
        j = m.end()
    elif line.startswith("^^", j):
        j += 2
        if not line.startswith("<", j):
            raise ValueError("datatype must be an IRI")
        dt, j = _parse_iri(line, j)
        datatype = dt.lexical
    return Term.literal(value, datatype=datatype, lang=lang), j


def parse_term(text: str, lineno: int = 1) -> Term:
    """Parse a single N-Triples term from a string (used by report readers)."""
    text = text.strip()
    try:
        if not text:
            raise ValueError("empty term")
        if text.startswith("<"):
            term, end = _parse_iri(text, 0)
        elif text.startswith("_:"):
            term, end = _parse_blank(text, 0)
        elif text.startswith('"'):
            term, end = _parse_literal(text, 0)
        else:
            raise ValueError(f"unrecognized term: {text!r}")
        if text[end:].strip():
            raise ValueError(f"trailing characters after term: {text!r}")
    except NTriplesError:
        raise
    except ValueError as exc:
        raise NTriplesError(str(exc), lineno, text) from None
    return term


def parse_line(line: str, lineno: int) -> tuple[Term, Term, Term] | None:
    """Parse one raw line; returns None for blank and comment lines."""
    i = _skip_ws(line.rstrip("\r\n"), 0)
    line = line.rstrip("\r\n")
    if i >= len(line) or line[i] == "#":
        return None
    try:
        # subject
        if line.startswith("<", i):
            s, i = _parse_iri(line, i)
        elif line.startswith("_:", i):
            s, i = _parse_blank(line, i)
        elif line.startswith('"', i):
            raise ValueError("literal not allowed as subject")
        else:
            raise ValueError("expected IRI or blank node subject")
        i = _skip_ws(line, i)
        # predicate
        if line.startswith("<", i):
            p, i = _parse_iri(line, i)
        elif line.startswith("_:", i):
            raise ValueError("blank node not allowed as predicate")
        elif line.startswith('"', i):
            raise ValueError("literal not allowed as predicate")
        else:
            raise ValueError("expected IRI predicate")
        i = _skip_ws(line, i)
        # object
        if line.startswith("<", i):
            o, i = _parse_iri(line, i)
        elif line.startswith("_:", i):
            o, i = _parse_blank(line, i)
        elif line.startswith('"', i):
            o, i = _parse_literal(line, i)
        else:
            raise ValueError("expected IRI, blank node, or literal object")
        i = _skip_ws(line, i)
        if not line.startswith(".", i):
            raise ValueError("missing terminating dot")
        i = _skip_ws(line, i + 1)
        if i < len(line) and line[i] != "#":
            raise ValueError("trailing characters after dot")
    except ValueError as exc:
        raise NTriplesError(str(exc), lineno, line) from None
    return s, p, o
