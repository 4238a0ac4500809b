"""Total and incremental verification of Invariance and Buchi-negated
properties over table plans."""

from __future__ import annotations

import ast
import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .algebra import Atom, AtomSet
from .automaton import UNDEFINED, PlanFSA
from .errors import ContractViolation


class Status(enum.Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    AVOID = "AVOID"


class ErrorKind(enum.Enum):
    BAD_ATOM = "BAD_ATOM"
    BAD_CYCLE = "BAD_CYCLE"
    GEN_RISK = "GEN_RISK"


class ErrorMode(enum.Enum):
    FIRST = "first"
    ALL = "all"


def _mode(mode: ErrorMode | str) -> ErrorMode:
    if isinstance(mode, ErrorMode):
        return mode
    key = str(mode).lower()
    if key in ("first", "first-error"):
        return ErrorMode.FIRST
    if key in ("all", "all-errors"):
        return ErrorMode.ALL
    raise ValueError(f"unknown error mode {mode!r}")


Step = tuple[int, int]  # (state, atom taken from that state)


@dataclass(frozen=True)
class ErrorReport:
    """One verification error.

    BAD_ATOM: ``atom`` (in p) is enabled at accessible ``state``.
    BAD_CYCLE: ``state`` is a reachable bad state on a cycle; ``stem`` leads
    from an initial state to it and ``cycle`` returns to it.
    GEN_RISK: a generalization added ``atom`` where it may break the property.
    Witness sequences are None when not extracted.
    """

    kind: ErrorKind
    state: int | None = None
    atom: Atom | None = None
    stem: tuple[Step, ...] | None = None
    cycle: tuple[Step, ...] | None = None

    def to_dict(self, fsa: PlanFSA | None = None) -> dict:
        def st(s: int | None):
            if s is None:
                return None
            return fsa.label(s) if fsa is not None else s

        def at(a: int | None):
            if a is None:
                return None
            return fsa.universe.atom_name(a) if fsa is not None else a

        def steps(seq):
            if seq is None:
                return None
            return [{"state": st(s), "atom": at(a)} for s, a in seq]

        out = {"kind": self.kind.value, "state": st(self.state), "atom": at(self.atom)}
        if self.kind is ErrorKind.BAD_CYCLE or self.stem is not None:
            out["stem"] = steps(self.stem)
        if self.kind is ErrorKind.BAD_CYCLE:
            out["cycle"] = steps(self.cycle)
        return out


@dataclass
class Verdict:
    status: Status
    errors: list[ErrorReport] = field(default_factory=list)

    def __post_init__(self) -> None:
        if (self.status is Status.PASS) != (not self.errors):
            raise ValueError("a verdict passes exactly when it has no errors")

    @property
    def passed(self) -> bool:
        return self.status is Status.PASS

    @property
    def err_count(self) -> int:
        return len(self.errors)

    def to_dict(self, fsa: PlanFSA | None = None) -> dict:
        return {
            "status": self.status.value,
            "error_count": self.err_count,
            "errors": [e.to_dict(fsa) for e in self.errors],
        }


@dataclass
class VerificationContext:
    """Visited flags left by the last verification of one exact plan.

    ``visited2`` holds nested-search stamps; a state counts as visited by the
    current nested search when its stamp equals ``stamp``.
    """

    target_id: str
    property_key: tuple
    visited: np.ndarray
    visited2: np.ndarray | None = None
    stamp: int = 0
    complete: bool = True
    last_verdict: Verdict | None = None

    def copy(self) -> "VerificationContext":
        return VerificationContext(
            self.target_id,
            self.property_key,
            self.visited.copy(),
            None if self.visited2 is None else self.visited2.copy(),
            self.stamp,
            self.complete,
            self.last_verdict,
        )

    def save(self, path) -> None:
        np.savez_compressed(
            path,
            target_id=np.array(self.target_id),
            property_key=np.array(repr(self.property_key)),
            visited=self.visited,
            complete=np.array(self.complete),
            status=np.array("" if self.last_verdict is None else self.last_verdict.status.value),
        )

    @classmethod
    def load(cls, path) -> "VerificationContext":
        with np.load(path, allow_pickle=False) as data:
            status = str(data["status"]) if "status" in data else ""
            # Only a passing verdict is restorable: it carries no error list.
            last = Verdict(Status.PASS) if status == Status.PASS.value else None
            return cls(
                str(data["target_id"]),
                ast.literal_eval(str(data["property_key"])),
                data["visited"].astype(np.uint8),
                None,
                0,
                bool(data["complete"]),
                last,
            )


def _invariance_key(p: AtomSet) -> tuple:
    return ("invariance", p.mask)


_ACCEPTING_KEY = ("accepting",)


# ------------------------------------------------------------ witnesses


def _bfs_parents(delta: np.ndarray, sources: np.ndarray, target: int):
    """Breadth-first search recording (parent, atom); stops once ``target`` is
    discovered as a successor.  Returns the parent arrays or None."""
    n, n_atoms = delta.shape
    parent = np.full(n, -2, dtype=np.int64)
    via = np.full(n, -1, dtype=np.int64)
    frontier = np.unique(sources)
    parent[frontier] = -1
    while frontier.size:
        succ = delta[frontier]
        src = np.repeat(frontier, n_atoms)
        atoms = np.tile(np.arange(n_atoms), frontier.size)
        flat = succ.ravel()
        ok = flat != UNDEFINED
        src, atoms, flat = src[ok], atoms[ok], flat[ok]
        hit = np.flatnonzero(flat == target)
        if hit.size:
            return parent, via, int(src[hit[0]]), int(atoms[hit[0]])
        fresh = parent[flat] == -2
        src, atoms, flat = src[fresh], atoms[fresh], flat[fresh]
        flat, first = np.unique(flat, return_index=True)
        parent[flat] = src[first]
        via[flat] = atoms[first]
        frontier = flat
    return None


def _trace(parent: np.ndarray, via: np.ndarray, last: int, last_atom: int) -> tuple[Step, ...]:
    steps = [(last, last_atom)]
    s = last
    while parent[s] >= 0:
        steps.append((int(parent[s]), int(via[s])))
        s = int(parent[s])
    return tuple(reversed(steps))


def _path_to(plan: PlanFSA, target: int) -> tuple[Step, ...] | None:
    """Shortest path (as steps) from an initial state to ``target``."""
    if target in plan.initial:
        return ()
    if not plan.initial:
        return None
    found = _bfs_parents(plan.delta, plan.initial_array, target)
    if found is None:
        return None
    return _trace(*found)


def _cycle_through(plan: PlanFSA, seed: int) -> tuple[Step, ...] | None:
    found = _bfs_parents(plan.delta, np.array([seed], dtype=np.int64), seed)
    if found is None:
        return None
    return _trace(*found)


# ------------------------------------------------------------ total checks


def total_i(plan: PlanFSA, p: AtomSet, mode: ErrorMode | str = ErrorMode.ALL, *,
            witnesses: int = 10) -> tuple[Verdict, VerificationContext]:
    """Depth-first search from every initial state flagging enabled atoms of p."""
    m = _mode(mode)
    n = plan.state_count
    visited = np.zeros(n, dtype=np.uint8)
    width = max(1, len(p))
    err_s = np.empty(n * width, dtype=np.int64)
    err_a = np.empty(n * width, dtype=np.int64)
    nerr = _kernels.dfs_invariance(
        plan.delta, plan.initial_array, p.to_mask(), visited, _NO_MASK, -1,
        m is ErrorMode.FIRST, err_s, err_a,
    )
    verdict = _atom_verdict(plan, err_s[:nerr], err_a[:nerr], witnesses)
    ctx = VerificationContext(
        plan.provenance, _invariance_key(p), visited, complete=nerr == 0 or m is ErrorMode.ALL,
        last_verdict=verdict,
    )
    return verdict, ctx


_NO_MASK = np.zeros(1, dtype=np.bool_)


def _atom_verdict(plan: PlanFSA, err_s, err_a, witnesses: int) -> Verdict:
    if len(err_s) == 0:
        return Verdict(Status.PASS)
    errors = []
    for i, (s, a) in enumerate(zip(err_s.tolist(), err_a.tolist())):
        stem = _path_to(plan, s) if i < witnesses else None
        errors.append(ErrorReport(ErrorKind.BAD_ATOM, s, a, stem))
    return Verdict(Status.FAIL, errors)


def _cycle_verdict(prod: PlanFSA, seeds, witnesses: int) -> Verdict:
    if len(seeds) == 0:
        return Verdict(Status.PASS)
    errors = []
    for i, s in enumerate(seeds.tolist()):
        if i < witnesses:
            errors.append(ErrorReport(ErrorKind.BAD_CYCLE, s, None, _path_to(prod, s), _cycle_through(prod, s)))
        else:
            errors.append(ErrorReport(ErrorKind.BAD_CYCLE, s))
    return Verdict(Status.FAIL, errors)


def total_at(prod: PlanFSA, mode: ErrorMode | str = ErrorMode.ALL, *,
             witnesses: int = 10) -> tuple[Verdict, VerificationContext]:
    """Nested depth-first search for reachable bad states lying on cycles."""
    m = _mode(mode)
    n = prod.state_count
    visited = np.zeros(n, dtype=np.uint8)
    visited2 = np.zeros(n, dtype=np.int64)
    seeds = np.empty(n, dtype=np.int64)
    nerr, stamp = _kernels.dfs_accepting(
        prod.delta, prod.initial_array, prod.bad_mask, visited, visited2, 0, _NO_MASK, -1,
        m is ErrorMode.FIRST, seeds,
    )
    verdict = _cycle_verdict(prod, seeds[:nerr], witnesses)
    ctx = VerificationContext(
        prod.provenance, _ACCEPTING_KEY, visited, visited2, int(stamp),
        complete=nerr == 0 or m is ErrorMode.ALL, last_verdict=verdict,
    )
    return verdict, ctx


# ------------------------------------------------------- incremental checks


def _check_ctx(plan: PlanFSA, ctx: VerificationContext, key: tuple) -> None:
    if ctx.target_id not in (plan.provenance, plan.derived_from):
        raise ContractViolation("verification context is stale for this plan")
    if ctx.property_key != key:
        raise ContractViolation("verification context was built for another property")
    if ctx.visited.shape[0] != plan.state_count:
        raise ContractViolation("verification context has the wrong state count")
    if not ctx.complete:
        raise ContractViolation("verification context comes from an interrupted search")


def _initial_array(new_initials: Iterable[int] | np.ndarray) -> np.ndarray:
    arr = np.asarray(new_initials if isinstance(new_initials, np.ndarray) else sorted(new_initials),
                     dtype=np.int64)
    return arr


def inc_i_ni(plan: PlanFSA, p: AtomSet, new_initials, a_adapt: Atom, ctx: VerificationContext,
             mode: ErrorMode | str = ErrorMode.ALL, *, witnesses: int = 10
             ) -> tuple[Verdict, VerificationContext]:
    """Re-check an edited plan starting from the new initial states.

    Only the new initials have their visited flag cleared; the first step out
    of a new initial follows ``a_adapt`` alone when it is defined.  ``ctx`` is
    updated in place and returned.
    """
    _check_ctx(plan, ctx, _invariance_key(p))
    m = _mode(mode)
    roots = _initial_array(new_initials)
    n = plan.state_count
    ni_mask = np.zeros(n, dtype=np.bool_)
    ni_mask[roots] = True
    ctx.visited[roots] = 0
    width = max(1, len(p))
    cap = n * width
    err_s = np.empty(cap, dtype=np.int64)
    err_a = np.empty(cap, dtype=np.int64)
    nerr = _kernels.dfs_invariance(
        plan.delta, roots, p.to_mask(), ctx.visited, ni_mask, int(a_adapt),
        m is ErrorMode.FIRST, err_s, err_a,
    )
    verdict = _atom_verdict(plan, err_s[:nerr], err_a[:nerr], witnesses)
    ctx.target_id = plan.provenance
    ctx.complete = nerr == 0 or m is ErrorMode.ALL
    ctx.last_verdict = verdict
    return verdict, ctx


def inc_at_ni(prod: PlanFSA, new_initials, a_adapt: Atom, ctx: VerificationContext,
              mode: ErrorMode | str = ErrorMode.ALL, *, witnesses: int = 10
              ) -> tuple[Verdict, VerificationContext]:
    """Nested search over an edited product from the new initial states.

    All visited flags are cleared first.  A new initial whose ``a_adapt``
    successor is defined and unvisited follows only that successor.  On
    return ``ctx.visited`` is the union of the previous flags and this
    search's flags, so it still covers every reachable state.
    """
    _check_ctx(prod, ctx, _ACCEPTING_KEY)
    m = _mode(mode)
    roots = _initial_array(new_initials)
    n = prod.state_count
    ni_mask = np.zeros(n, dtype=np.bool_)
    ni_mask[roots] = True
    visited = np.zeros(n, dtype=np.uint8)
    if ctx.visited2 is None or ctx.visited2.shape[0] != n:
        ctx.visited2 = np.zeros(n, dtype=np.int64)
        ctx.stamp = 0
    seeds = np.empty(n, dtype=np.int64)
    nerr, stamp = _kernels.dfs_accepting(
        prod.delta, roots, prod.bad_mask, visited, ctx.visited2, ctx.stamp, ni_mask, int(a_adapt),
        m is ErrorMode.FIRST, seeds,
    )
    verdict = _cycle_verdict(prod, seeds[:nerr], witnesses)
    np.bitwise_or(ctx.visited, visited, out=ctx.visited)
    ctx.stamp = int(stamp)
    ctx.target_id = prod.provenance
    ctx.complete = nerr == 0 or m is ErrorMode.ALL
    ctx.last_verdict = verdict
    return verdict, ctx


def inc_gen_i(v1_previously_visited: bool, z: AtomSet, p: AtomSet,
              mode: ErrorMode | str = ErrorMode.FIRST) -> Verdict:
    """Invariance re-check after adding atoms ``z`` to an existing edge."""
    if not v1_previously_visited:
        return Verdict(Status.PASS)
    hits = z & p
    if hits.is_zero():
        return Verdict(Status.PASS)
    atoms = list(hits)
    if _mode(mode) is ErrorMode.FIRST:
        atoms = atoms[:1]
    return Verdict(Status.AVOID, [ErrorReport(ErrorKind.BAD_ATOM, None, a) for a in atoms])


def inc_gen_r(y: AtomSet, z: AtomSet, p: AtomSet, q: AtomSet,
              mode: ErrorMode | str = ErrorMode.FIRST) -> Verdict:
    """Response re-check after generalizing an edge labelled ``y`` by ``z``.

    If the edge already carried only responses, the added atoms must be
    responses too.  In either case no added atom may be a trigger.
    """
    risky = z & p
    if y <= q:
        risky = risky | (z - q)
    if risky.is_zero():
        return Verdict(Status.PASS)
    atoms = list(risky)
    if _mode(mode) is ErrorMode.FIRST:
        atoms = atoms[:1]
    return Verdict(Status.AVOID, [ErrorReport(ErrorKind.GEN_RISK, None, a) for a in atoms])


# ----------------------------------------------------------------- helpers


def new_initials_for_edit(ctx: VerificationContext, state: int) -> np.ndarray:
    """New initial set for a single-plan edit at ``state``."""
    if ctx.visited[state]:
        return np.array([state], dtype=np.int64)
    return np.empty(0, dtype=np.int64)


def gen_condition_sets(after: PlanFSA, state: int, atom: Atom) -> tuple[AtomSet, AtomSet]:
    """(y, z) for a generalization that set ``after.delta[state, atom]``.

    y is the edge's condition before the edit and z the added atom.
    """
    target = int(after.delta[state, atom])
    row = after.delta[state]
    u = after.universe
    mask = 0
    for a in np.flatnonzero(row == target).tolist():
        if a != atom:
            mask |= 1 << a
    return AtomSet(u, mask), AtomSet(u, 1 << atom)
