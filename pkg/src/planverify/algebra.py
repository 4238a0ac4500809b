"""Finite product Boolean algebra over multiagent actions.

Every element of the algebra is stored extensionally as a set of atoms.  An
atom is one joint action (one action per agent) and is identified by its
index in the universe's lexicographic enumeration: the first agent's action
index is the most significant digit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import InputError

Atom = int


@dataclass(frozen=True)
class ActionAlphabet:
    """The ordered action names available to one agent."""

    agent_name: str
    actions: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "actions", tuple(self.actions))
        if not self.actions:
            raise InputError(f"agent {self.agent_name!r} has no actions")
        if len(set(self.actions)) != len(self.actions):
            raise InputError(f"agent {self.agent_name!r} has duplicate action names")

    def short_code(self, action: str) -> str:
        """One-letter code: first letter after an ``<agent>-`` prefix."""
        prefix = self.agent_name + "-"
        stem = action[len(prefix):] if action.startswith(prefix) else action
        return stem[:1]

    def has_distinct_codes(self) -> bool:
        codes = [self.short_code(a) for a in self.actions]
        return all(codes) and len(set(codes)) == len(codes)


@dataclass(frozen=True, eq=False)
class AtomUniverse:
    """The set of joint actions of an ordered list of agents."""

    alphabets: tuple[ActionAlphabet, ...]
    _radix: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "alphabets", tuple(self.alphabets))
        if not self.alphabets:
            raise InputError("a universe needs at least one agent")
        names = [a.agent_name for a in self.alphabets]
        if len(set(names)) != len(names):
            raise InputError("agent names must be unique")
        object.__setattr__(self, "_radix", tuple(len(a.actions) for a in self.alphabets))

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        return isinstance(other, AtomUniverse) and self.alphabets == other.alphabets

    def __hash__(self) -> int:
        return hash(self.alphabets)

    @property
    def agent_count(self) -> int:
        return len(self.alphabets)

    @cached_property
    def atom_count(self) -> int:
        return int(np.prod(self._radix))

    def atoms(self) -> range:
        return range(self.atom_count)

    def agent_index(self, agent_name: str) -> int:
        for i, alpha in enumerate(self.alphabets):
            if alpha.agent_name == agent_name:
                return i
        raise InputError(f"unknown agent {agent_name!r}")

    @cached_property
    def _action_lookup(self) -> dict[str, tuple[int, int]]:
        table: dict[str, tuple[int, int]] = {}
        for i, alpha in enumerate(self.alphabets):
            for j, name in enumerate(alpha.actions):
                table.setdefault(name, (i, j))
        return table

    def find_action(self, action: str) -> tuple[int, int]:
        """Return (agent index, action index) for a globally named action."""
        try:
            return self._action_lookup[action]
        except KeyError:
            raise InputError(f"unknown action {action!r}") from None

    def decompose(self, atom: Atom) -> tuple[int, ...]:
        if not 0 <= atom < self.atom_count:
            raise InputError(f"atom index {atom} out of range")
        digits = []
        for r in reversed(self._radix):
            atom, d = divmod(atom, r)
            digits.append(d)
        return tuple(reversed(digits))

    def compose(self, indices: Sequence[int]) -> Atom:
        if len(indices) != self.agent_count:
            raise InputError(f"expected {self.agent_count} action indices, got {len(indices)}")
        atom = 0
        for d, r in zip(indices, self._radix):
            if not 0 <= d < r:
                raise InputError(f"action index {d} out of range")
            atom = atom * r + d
        return atom

    def action_names(self, atom: Atom) -> tuple[str, ...]:
        return tuple(a.actions[d] for a, d in zip(self.alphabets, self.decompose(atom)))

    def atom_name(self, atom: Atom) -> str:
        return "/".join(self.action_names(atom))

    @cached_property
    def supports_short_names(self) -> bool:
        return all(a.has_distinct_codes() for a in self.alphabets)

    def short_name(self, atom: Atom) -> str:
        if not self.supports_short_names:
            raise InputError("short atom names need distinct action initials per agent")
        return "".join(a.short_code(n) for a, n in zip(self.alphabets, self.action_names(atom)))

    @cached_property
    def _name_lookup(self) -> dict[str, Atom]:
        table = {self.atom_name(a): a for a in self.atoms()}
        if self.supports_short_names:
            for a in self.atoms():
                table.setdefault(self.short_name(a), a)
        return table

    def parse_atom(self, name: str) -> Atom:
        """Resolve a full ("F-collect/I-receive/L-transmit") or short ("crt") name."""
        try:
            return self._name_lookup[name.strip()]
        except KeyError:
            raise InputError(f"unknown atom name {name!r}") from None

    @cached_property
    def _action_masks(self) -> tuple[tuple[int, ...], ...]:
        masks = [[0] * len(a.actions) for a in self.alphabets]
        for atom in self.atoms():
            for i, d in enumerate(self.decompose(atom)):
                masks[i][d] |= 1 << atom
        return tuple(tuple(m) for m in masks)

    def action_mask(self, agent_index: int, action_index: int) -> int:
        return self._action_masks[agent_index][action_index]

    def empty(self) -> "AtomSet":
        return AtomSet(self, 0)

    def full(self) -> "AtomSet":
        return AtomSet(self, (1 << self.atom_count) - 1)

    def atom_set(self, atoms: Iterable[Atom]) -> "AtomSet":
        mask = 0
        for a in atoms:
            if not 0 <= a < self.atom_count:
                raise InputError(f"atom index {a} out of range")
            mask |= 1 << a
        return AtomSet(self, mask)

    def to_dict(self) -> list[dict]:
        return [{"agent_name": a.agent_name, "actions": list(a.actions)} for a in self.alphabets]

    @classmethod
    def from_dict(cls, agents: list[dict]) -> "AtomUniverse":
        try:
            return cls(tuple(ActionAlphabet(a["agent_name"], tuple(a["actions"])) for a in agents))
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed agents list: {exc}") from None


@dataclass(frozen=True)
class AtomSet:
    """A Boolean-algebra element: a set of atoms of one universe (bitmask)."""

    universe: AtomUniverse
    mask: int

    def _check(self, other: "AtomSet") -> None:
        if not isinstance(other, AtomSet):
            raise TypeError("expected an AtomSet")
        if other.universe != self.universe:
            raise InputError("atom sets belong to different universes")

    def __and__(self, other: "AtomSet") -> "AtomSet":
        self._check(other)
        return AtomSet(self.universe, self.mask & other.mask)

    def __or__(self, other: "AtomSet") -> "AtomSet":
        self._check(other)
        return AtomSet(self.universe, self.mask | other.mask)

    def __sub__(self, other: "AtomSet") -> "AtomSet":
        self._check(other)
        return AtomSet(self.universe, self.mask & ~other.mask)

    def __invert__(self) -> "AtomSet":
        return AtomSet(self.universe, ~self.mask & ((1 << self.universe.atom_count) - 1))

    def __le__(self, other: "AtomSet") -> bool:
        self._check(other)
        return self.mask & ~other.mask == 0

    def __contains__(self, atom: Atom) -> bool:
        return bool(self.mask >> atom & 1)

    def __iter__(self) -> Iterator[Atom]:
        m, a = self.mask, 0
        while m:
            if m & 1:
                yield a
            m >>= 1
            a += 1

    def __len__(self) -> int:
        return bin(self.mask).count("1")

    def __bool__(self) -> bool:
        return self.mask != 0

    def is_zero(self) -> bool:
        return self.mask == 0

    def to_mask(self) -> np.ndarray:
        """Boolean membership vector indexed by atom."""
        n = self.universe.atom_count
        return np.array([(self.mask >> a) & 1 for a in range(n)], dtype=np.bool_)

    def names(self) -> list[str]:
        return [self.universe.atom_name(a) for a in self]

    def __repr__(self) -> str:
        u = self.universe
        if u.supports_short_names:
            inner = ", ".join(u.short_name(a) for a in self)
        else:
            inner = ", ".join(u.atom_name(a) for a in self)
        return f"AtomSet({{{inner}}})"


def compose_atom(universe: AtomUniverse, action_per_agent: Sequence[str]) -> Atom:
    """Atom whose component for agent i is ``action_per_agent[i]``."""
    if len(action_per_agent) != universe.agent_count:
        raise InputError(
            f"expected {universe.agent_count} actions, got {len(action_per_agent)}"
        )
    indices = []
    for alpha, name in zip(universe.alphabets, action_per_agent):
        try:
            indices.append(alpha.actions.index(name))
        except ValueError:
            raise InputError(f"unknown action {name!r} for agent {alpha.agent_name!r}") from None
    return universe.compose(indices)


def meet(x: AtomSet, y: AtomSet) -> AtomSet:
    return x & y


def join(x: AtomSet, y: AtomSet) -> AtomSet:
    return x | y


def complement(x: AtomSet) -> AtomSet:
    return ~x


def leq(x: AtomSet, y: AtomSet) -> bool:
    """The partial order: x is below y iff x is a subset of y."""
    return x <= y


def lift(universe: AtomUniverse, agent_index: int, actions: Iterable[str]) -> AtomSet:
    """All atoms whose ``agent_index`` component is one of ``actions``."""
    if not 0 <= agent_index < universe.agent_count:
        raise InputError(f"agent index {agent_index} out of range")
    alpha = universe.alphabets[agent_index]
    mask = 0
    for name in actions:
        try:
            j = alpha.actions.index(name)
        except ValueError:
            raise InputError(f"unknown action {name!r} for agent {alpha.agent_name!r}") from None
        mask |= universe.action_mask(agent_index, j)
    return AtomSet(universe, mask)


def lift_action(universe: AtomUniverse, action: str) -> AtomSet:
    """Lift a single globally named action (agent found by name lookup)."""
    i, j = universe.find_action(action)
    return AtomSet(universe, universe.action_mask(i, j))
