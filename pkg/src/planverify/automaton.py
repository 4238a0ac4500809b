"""Tabular deterministic plan automata.

A plan is a table ``delta[state, atom]`` whose entries are a successor state
index or ``UNDEFINED`` (-1).  Edges, transition conditions and accessibility
are all derived from that table.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .algebra import Atom, AtomSet, AtomUniverse
from .errors import InputError

UNDEFINED = -1


def _digest(*parts: bytes | str) -> str:
    h = hashlib.blake2b(digest_size=12)
    for p in parts:
        h.update(p.encode() if isinstance(p, str) else p)
        h.update(b"\x00")
    return h.hexdigest()


class PlanFSA:
    """Deterministic table automaton with an optional Buchi bad-state set.

    Instances are immutable: the table array is flagged read-only and every
    edit goes through :func:`planverify.operators.apply_edit`, which returns a
    copy.  ``provenance`` identifies the exact table; ``derived_from`` is the
    provenance of the table this one was edited from, if any.
    """

    def __init__(
        self,
        name: str,
        universe: AtomUniverse,
        states: Sequence[str],
        initial: Iterable[int],
        delta: np.ndarray,
        bad: Iterable[int] = (),
        *,
        provenance: str | None = None,
        derived_from: str | None = None,
        validate: bool = True,
    ):
        self.name = name
        self.universe = universe
        self._states = states if not isinstance(states, list) else tuple(states)
        # The plan takes ownership of the array and freezes it.
        self._delta = np.asarray(delta, dtype=np.int32)
        self._delta.flags.writeable = False
        init = tuple(int(i) for i in initial)
        self.initial = tuple(dict.fromkeys(init))
        if isinstance(bad, np.ndarray) and bad.dtype == np.bool_:
            self._bad_mask = bad
        else:
            self._bad_mask = np.zeros(self._delta.shape[0], dtype=np.bool_)
            idx = [int(b) for b in bad]
            if any(not 0 <= b < self._delta.shape[0] for b in idx):
                raise InputError(f"{name}: bad state index out of range")
            self._bad_mask[idx] = True
        self._bad_mask.flags.writeable = False
        self._provenance = provenance
        self.derived_from = derived_from
        if validate:
            self._validate()

    def _validate(self) -> None:
        n = len(self._states)
        if self._delta.ndim != 2 or self._delta.shape != (n, self.universe.atom_count):
            raise InputError(
                f"{self.name}: table shape {self._delta.shape} does not match "
                f"{n} states x {self.universe.atom_count} atoms"
            )
        if n and (self._delta.min() < UNDEFINED or self._delta.max() >= n):
            raise InputError(f"{self.name}: table entry targets an unknown state")
        if self._bad_mask.shape != (n,):
            raise InputError(f"{self.name}: bad mask has the wrong length")
        for s in self.initial:
            if not 0 <= s < n:
                raise InputError(f"{self.name}: state index {s} out of range")
        if len(set(self._states)) != n:
            raise InputError(f"{self.name}: duplicate state labels")

    @property
    def delta(self) -> np.ndarray:
        return self._delta

    @property
    def states(self) -> Sequence[str]:
        return self._states

    @property
    def state_count(self) -> int:
        return self._delta.shape[0]

    @property
    def atom_count(self) -> int:
        return self._delta.shape[1]

    @cached_property
    def _label_lookup(self) -> dict[str, int]:
        return {label: i for i, label in enumerate(self._states)}

    def state_index(self, label: str | int) -> int:
        if isinstance(label, (int, np.integer)):
            if not 0 <= label < self.state_count:
                raise InputError(f"state index {label} out of range")
            return int(label)
        try:
            return self._label_lookup[label]
        except KeyError:
            raise InputError(f"{self.name}: unknown state {label!r}") from None

    def label(self, state: int) -> str:
        return self._states[state]

    @property
    def bad_mask(self) -> np.ndarray:
        return self._bad_mask

    @cached_property
    def bad(self) -> frozenset[int]:
        return frozenset(np.flatnonzero(self._bad_mask).tolist())

    @cached_property
    def initial_array(self) -> np.ndarray:
        return np.array(self.initial, dtype=np.int64)

    @property
    def provenance(self) -> str:
        if self._provenance is None and "_lazy_provenance" in self.__dict__:
            self._provenance = _digest(*self.__dict__.pop("_lazy_provenance"))
        if self._provenance is None:
            self._provenance = _digest(
                "plan",
                self.name,
                json.dumps(self.universe.to_dict()),
                "\x1f".join(self._states),
                repr(self.initial),
                self._bad_mask.tobytes(),
                np.ascontiguousarray(self._delta).tobytes(),
            )
        return self._provenance

    def successor(self, state: int, atom: Atom) -> int:
        return int(self._delta[state, atom])

    def same_table(self, other: "PlanFSA") -> bool:
        return (
            self.universe == other.universe
            and self.initial == other.initial
            and np.array_equal(self._bad_mask, other._bad_mask)
            and np.array_equal(self._delta, other._delta)
        )

    def with_initial(self, initial: Iterable[int | str]) -> "PlanFSA":
        """Manual fixture edit: same table, different initial states."""
        idx = [self.state_index(s) for s in initial]
        return PlanFSA(
            self.name, self.universe, self._states, idx, self._delta.copy(), self._bad_mask.copy()
        )

    def __repr__(self) -> str:
        return f"PlanFSA({self.name!r}, states={self.state_count}, atoms={self.atom_count})"


@dataclass(frozen=True)
class Run:
    """A finite run: ``vertices`` has one more entry than ``actions``."""

    vertices: tuple[int, ...]
    actions: tuple[Atom, ...]


class _Rejected:
    def __repr__(self) -> str:
        return "REJECTED"

    def __bool__(self) -> bool:
        return False


REJECTED = _Rejected()


def transition_condition(fsa: PlanFSA, v: int | str, w: int | str) -> AtomSet:
    """Atoms labelling edge (v, w); the empty set means there is no edge."""
    vi, wi = fsa.state_index(v), fsa.state_index(w)
    row = fsa.delta[vi]
    return fsa.universe.atom_set(np.flatnonzero(row == wi).tolist())


def undefined_atoms(fsa: PlanFSA, v: int | str) -> AtomSet:
    row = fsa.delta[fsa.state_index(v)]
    return fsa.universe.atom_set(np.flatnonzero(row == UNDEFINED).tolist())


def edges(fsa: PlanFSA) -> set[tuple[int, int]]:
    src, atoms = np.nonzero(fsa.delta != UNDEFINED)
    return {(int(s), int(fsa.delta[s, a])) for s, a in zip(src, atoms)}


def is_complete(fsa: PlanFSA, owner: int | None = None) -> bool:
    """Completeness check.

    With ``owner=None`` every table entry must be defined.  With an agent
    index, completeness is relative to that agent's own choice: at each
    state, an own action is either never enabled or enabled for every
    combination of the other agents' actions.
    """
    if owner is None:
        return bool((fsa.delta != UNDEFINED).all())
    u = fsa.universe
    defined = fsa.delta != UNDEFINED
    for j in range(len(u.alphabets[owner].actions)):
        cols = np.array(list(AtomSet(u, u.action_mask(owner, j))), dtype=np.int64)
        block = defined[:, cols]
        if not (block.all(axis=1) | ~block.any(axis=1)).all():
            return False
    return True


def accessible_states(fsa: PlanFSA, start: Iterable[int | str]) -> set[int]:
    """States reachable from ``start`` (inclusive) through defined entries."""
    seen = np.zeros(fsa.state_count, dtype=np.bool_)
    frontier = np.unique(np.array([fsa.state_index(s) for s in start], dtype=np.int64))
    seen[frontier] = True
    while frontier.size:
        nxt = fsa.delta[frontier].ravel()
        nxt = np.unique(nxt[nxt != UNDEFINED])
        nxt = nxt[~seen[nxt]]
        seen[nxt] = True
        frontier = nxt
    return set(np.flatnonzero(seen).tolist())


def accessible_atoms(fsa: PlanFSA) -> AtomSet:
    """Union of transition conditions on edges leaving accessible states."""
    reach = sorted(accessible_states(fsa, fsa.initial))
    if not reach:
        return fsa.universe.empty()
    cols = np.flatnonzero((fsa.delta[reach] != UNDEFINED).any(axis=0))
    return fsa.universe.atom_set(cols.tolist())


def simulate(fsa: PlanFSA, actions: Sequence[Atom]) -> Run | _Rejected:
    """Run the plan on a finite atom sequence from the first surviving initial."""
    for start in fsa.initial:
        verts = [start]
        for a in actions:
            nxt = int(fsa.delta[verts[-1], a])
            if nxt == UNDEFINED:
                break
            verts.append(nxt)
        else:
            return Run(tuple(verts), tuple(int(a) for a in actions))
    return REJECTED


# ---------------------------------------------------------------- file formats


def plan_from_dict(doc: dict) -> PlanFSA:
    """Build a plan from the JSON document form (see README)."""
    try:
        universe = AtomUniverse.from_dict(doc["agents"])
        states = [str(s) for s in doc["states"]]
        name = str(doc.get("name", "plan"))
        index = {s: i for i, s in enumerate(states)}
        if len(index) != len(states):
            raise InputError(f"{name}: duplicate state labels")

        def idx(label: object) -> int:
            try:
                return index[str(label)]
            except KeyError:
                raise InputError(f"{name}: unknown state {label!r}") from None

        table = np.full((len(states), universe.atom_count), UNDEFINED, dtype=np.int32)
        delta = doc.get("delta", {})
        if not isinstance(delta, dict):
            raise InputError(f"{name}: delta must be an object")
        for src, row in delta.items():
            s = idx(src)
            if not isinstance(row, dict):
                raise InputError(f"{name}: row {src!r} must be an object")
            for atom_name, target in row.items():
                a = universe.parse_atom(atom_name)
                table[s, a] = UNDEFINED if target is None else idx(target)
        initial = [idx(s) for s in doc.get("initial", [])]
        bad = [idx(s) for s in doc.get("bad", [])]
    except KeyError as exc:
        raise InputError(f"plan document is missing field {exc}") from None
    except TypeError as exc:
        raise InputError(f"malformed plan document: {exc}") from None
    return PlanFSA(name, universe, states, initial, table, bad)


def plan_to_dict(fsa: PlanFSA) -> dict:
    u = fsa.universe
    names = [u.atom_name(a) for a in u.atoms()]
    delta: dict[str, dict[str, str]] = {}
    for s in range(fsa.state_count):
        row = fsa.delta[s]
        entries = {names[a]: fsa.label(int(row[a])) for a in np.flatnonzero(row != UNDEFINED)}
        if entries:
            delta[fsa.label(s)] = entries
    return {
        "name": fsa.name,
        "agents": u.to_dict(),
        "states": [fsa.label(s) for s in range(fsa.state_count)],
        "initial": [fsa.label(s) for s in fsa.initial],
        "bad": [fsa.label(s) for s in sorted(fsa.bad)],
        "delta": delta,
    }


def load_plan(path: str | Path) -> PlanFSA:
    """Load a plan from a JSON document or a compact grid text file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    if path.suffix == ".grid" or not text.lstrip().startswith("{"):
        return load_grid(text)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON: {exc}") from None
    return plan_from_dict(doc)


def dump_plan(fsa: PlanFSA, path: str | Path) -> None:
    Path(path).write_text(json.dumps(plan_to_dict(fsa), indent=2) + "\n")


_HEADER = re.compile(r"^#\s*(name|agents|initial|bad)\s*:\s*(.*)$")


def load_grid(text: str) -> PlanFSA:
    """Parse the compact grid form.

    Header comment lines give metadata::

        # name: L
        # agents: F = F-collect F-deliver; I = I-receive I-deliver; L = ...
        # initial: T P R
        # bad:
             crt crr ...
        T    R   0   ...

    The column header lists atoms (short or full names) and must follow the
    universe order.  Cells hold a state label or ``0`` for UNDEFINED.
    """
    meta: dict[str, str] = {}
    rows: list[list[str]] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        m = _HEADER.match(line)
        if m:
            meta[m.group(1)] = m.group(2).strip()
            continue
        if line.startswith("#"):
            continue
        rows.append(line.split())
    if "agents" not in meta:
        raise InputError("grid file needs an '# agents:' header")
    agents = []
    for chunk in meta["agents"].split(";"):
        if not chunk.strip():
            continue
        if "=" not in chunk:
            raise InputError(f"malformed agent spec {chunk.strip()!r}")
        agent, acts = chunk.split("=", 1)
        agents.append({"agent_name": agent.strip(), "actions": acts.replace(",", " ").split()})
    universe = AtomUniverse.from_dict(agents)
    if not rows:
        raise InputError("grid has no column header")
    header, body = rows[0], rows[1:]
    cols = [universe.parse_atom(h) for h in header]
    if cols != list(universe.atoms()):
        raise InputError("grid columns must list every atom in universe order")
    states = [r[0] for r in body]
    index = {s: i for i, s in enumerate(states)}
    if len(index) != len(states):
        raise InputError("grid has duplicate state rows")
    table = np.full((len(states), universe.atom_count), UNDEFINED, dtype=np.int32)
    for i, r in enumerate(body):
        if len(r) != len(cols) + 1:
            raise InputError(f"grid row {r[0]!r} has {len(r) - 1} cells, expected {len(cols)}")
        for a, cell in enumerate(r[1:]):
            if cell == "0":
                continue
            if cell not in index:
                raise InputError(f"grid row {r[0]!r}: unknown target {cell!r}")
            table[i, a] = index[cell]

    def labels(key: str) -> list[int]:
        out = []
        for s in meta.get(key, "").replace(",", " ").split():
            if s not in index:
                raise InputError(f"grid {key} state {s!r} is not a row")
            out.append(index[s])
        return out

    return PlanFSA(meta.get("name", "plan"), universe, states, labels("initial"), table, labels("bad"))


def grid_text(fsa: PlanFSA) -> str:
    """Render a plan in the compact grid form accepted by :func:`load_grid`."""
    u = fsa.universe
    if any(("0" == s or " " in s) for s in fsa.states):
        raise InputError("grid form needs state labels without spaces and other than '0'")
    names = [u.short_name(a) if u.supports_short_names else u.atom_name(a) for a in u.atoms()]
    agents = "; ".join(f"{a.agent_name} = {' '.join(a.actions)}" for a in u.alphabets)
    lines = [
        f"# name: {fsa.name}",
        f"# agents: {agents}",
        f"# initial: {' '.join(fsa.label(s) for s in fsa.initial)}",
        f"# bad: {' '.join(fsa.label(s) for s in sorted(fsa.bad))}",
    ]
    width = max([len(n) for n in names] + [len(s) for s in fsa.states] + [1])
    lines.append(" " * (width + 1) + " ".join(n.rjust(width) for n in names))
    for s in range(fsa.state_count):
        cells = [fsa.label(int(t)) if t != UNDEFINED else "0" for t in fsa.delta[s]]
        lines.append(fsa.label(s).ljust(width + 1) + " ".join(c.rjust(width) for c in cells))
    return "\n".join(lines) + "\n"
