"""Invariance and Response properties and their negation automata."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .algebra import AtomSet, AtomUniverse, lift_action
from .automaton import UNDEFINED, PlanFSA
from .errors import InputError, ParseError
from .operators import PropertyClass


@dataclass(frozen=True)
class InvarianceProperty:
    """Always not p: no accessible atom may lie in ``p``."""

    p: AtomSet
    name: str = ""
    text: str = ""

    prop_class = PropertyClass.INVARIANCE

    @property
    def universe(self) -> AtomUniverse:
        return self.p.universe

    @property
    def blocked(self) -> AtomSet:
        """Atoms excluded when generating property-satisfying plans."""
        return self.p

    def __str__(self) -> str:
        return self.text or f"invariant !({' | '.join(self.p.names())})"


@dataclass(frozen=True)
class ResponseProperty:
    """Every trigger in ``p`` is eventually followed by a response in ``q``.

    ``first_only`` restricts the requirement to the first trigger of a run.
    An atom in both p and q answers itself.
    """

    p: AtomSet
    q: AtomSet
    first_only: bool = False
    name: str = ""
    text: str = ""

    prop_class = PropertyClass.RESPONSE

    def __post_init__(self) -> None:
        if self.p.universe != self.q.universe:
            raise InputError("trigger and response belong to different universes")

    @property
    def universe(self) -> AtomUniverse:
        return self.p.universe

    @property
    def blocked(self) -> AtomSet:
        return self.p

    def __str__(self) -> str:
        return self.text or (
            f"{'first-response' if self.first_only else 'response'} "
            f"{' | '.join(self.p.names())} => {' | '.join(self.q.names())}"
        )


Property = InvarianceProperty | ResponseProperty


def neg_invariance_fsa(prop: InvarianceProperty) -> PlanFSA:
    """Two-state Buchi automaton accepting exactly the strings that hit p."""
    u = prop.universe
    pm = prop.p.to_mask()
    table = np.empty((2, u.atom_count), dtype=np.int32)
    table[0] = np.where(pm, 1, 0)
    table[1] = 1
    return PlanFSA(f"not({prop.name or 'inv'})", u, ("1", "2"), [0], table, [1])


def neg_first_response_fsa(prop: ResponseProperty) -> PlanFSA:
    """Two-state Buchi automaton for a first trigger never answered.

    State 1 waits for the first trigger; a trigger that is its own response
    kills the run.  State 2 survives only on non-response atoms.
    """
    u = prop.universe
    pm, qm = prop.p.to_mask(), prop.q.to_mask()
    table = np.empty((2, u.atom_count), dtype=np.int32)
    table[0] = np.where(~pm, 0, np.where(qm, UNDEFINED, 1))
    table[1] = np.where(qm, UNDEFINED, 1)
    return PlanFSA(f"not({prop.name or 'resp'})", u, ("1", "2"), [0], table, [1])


def neg_fsa(prop: Property) -> PlanFSA:
    if isinstance(prop, InvarianceProperty):
        return neg_invariance_fsa(prop)
    return neg_first_response_fsa(prop)


# ----------------------------------------------------------------- parsing

_TOKEN = re.compile(r"\s*(=>|[!&|()]|[A-Za-z0-9_][A-Za-z0-9_\-]*)")


class _Parser:
    def __init__(self, text: str, universe: AtomUniverse, offset: int = 0):
        self.text = text
        self.universe = universe
        self.offset = offset
        self.tokens: list[tuple[str, int]] = []
        self.i = 0
        pos = 0
        while True:
            while pos < len(text) and text[pos].isspace():
                pos += 1
            if pos >= len(text):
                break
            m = _TOKEN.match(text, pos)
            if not m:
                self.fail("unexpected character", pos)
            self.tokens.append((m.group(1), m.start(1)))
            pos = m.end()

    def fail(self, message: str, pos: int | None = None):
        if pos is None:
            pos = self.tokens[self.i][1] if self.i < len(self.tokens) else len(self.text)
        raise ParseError(message, self.offset + pos, self.text)

    def peek(self) -> str | None:
        return self.tokens[self.i][0] if self.i < len(self.tokens) else None

    def take(self, expected: str | None = None) -> str:
        tok = self.peek()
        if tok is None:
            self.fail(f"expected {expected!r}" if expected else "unexpected end of input")
        if expected is not None and tok != expected:
            self.fail(f"expected {expected!r}, found {tok!r}")
        self.i += 1
        return tok

    def expr(self) -> AtomSet:
        acc = self.conj()
        while self.peek() == "|":
            self.take()
            acc = acc | self.conj()
        return acc

    def conj(self) -> AtomSet:
        acc = self.term()
        while self.peek() == "&":
            self.take()
            acc = acc & self.term()
        return acc

    def term(self) -> AtomSet:
        tok = self.peek()
        if tok == "(":
            self.take()
            val = self.expr()
            self.take(")")
            return val
        if tok is None or tok in ("&", "|", ")", "=>", "!"):
            self.fail("expected an action name")
        pos = self.tokens[self.i][1]
        self.take()
        try:
            return lift_action(self.universe, tok)
        except InputError:
            self.fail(f"unknown action {tok!r}", pos)
        raise AssertionError  # unreachable

    def done(self) -> None:
        if self.peek() is not None:
            self.fail(f"unexpected {self.peek()!r}")


_LABEL = re.compile(r"^\s*([A-Za-z][A-Za-z0-9_]*)\s*:")


def parse_property(text: str, universe: AtomUniverse, name: str = "") -> Property:
    """Parse one property line (see module README for the grammar)."""
    body, offset = text, 0
    m = _LABEL.match(text)
    if m and m.group(1) not in ("invariant", "response"):
        name = name or m.group(1)
        offset = m.end()
        body = text[offset:]
    stripped = body.lstrip()
    lead = len(body) - len(stripped)
    kw_match = re.match(r"(first-response|invariant|response)\b", stripped)
    if not kw_match:
        raise ParseError("expected 'invariant', 'response' or 'first-response'", offset + lead, text)
    kw = kw_match.group(1)
    rest_off = offset + lead + kw_match.end()
    parser = _Parser(text[rest_off:], universe, rest_off)
    if kw == "invariant":
        parser.take("!")
        p = parser.term()
        parser.done()
        return InvarianceProperty(p, name, text.strip())
    p = parser.expr()
    parser.take("=>")
    q = parser.expr()
    parser.done()
    return ResponseProperty(p, q, kw == "first-response", name, text.strip())


def parse_properties(text: str, universe: AtomUniverse) -> list[Property]:
    """Parse a property file body: one property per line, ``#`` comments."""
    props = []
    consumed = 0
    for line in text.splitlines(keepends=True):
        content = line.split("#", 1)[0]
        if content.strip():
            try:
                prop = parse_property(content.rstrip("\n"), universe)
            except ParseError as exc:
                raise ParseError(str(exc).rsplit(" (at", 1)[0], consumed + exc.position, text) from None
            if not prop.name:
                prop = _renamed(prop, f"P{len(props) + 1}")
            props.append(prop)
        consumed += len(line)
    return props


def _renamed(prop: Property, name: str) -> Property:
    if isinstance(prop, InvarianceProperty):
        return InvarianceProperty(prop.p, name, prop.text)
    return ResponseProperty(prop.p, prop.q, prop.first_only, name, prop.text)


def load_properties(path: str | Path, universe: AtomUniverse) -> list[Property]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    return parse_properties(text, universe)
