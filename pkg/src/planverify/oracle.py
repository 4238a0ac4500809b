"""Brute-force semantics used to cross-check the checkers.

Everything here is computed from the raw table with graph primitives from
``scipy.sparse.csgraph`` (breadth-first reachability, strongly connected
components).  Nothing is shared with the depth-first code in ``checker``.
"""

from __future__ import annotations

import itertools
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .algebra import AtomSet
from .automaton import PlanFSA
from .errors import OracleBoundExceeded

DEFAULT_BOUND = 5000


def _guard(fsa: PlanFSA, bound: int | None) -> None:
    limit = DEFAULT_BOUND if bound is None else bound
    if limit >= 0 and fsa.state_count > limit:
        raise OracleBoundExceeded(
            f"{fsa.name}: {fsa.state_count} states exceeds the oracle bound {limit}"
        )


def _graph(fsa: PlanFSA, atom_filter: np.ndarray | None = None, extra_source: Sequence[int] = ()):
    """Adjacency matrix over the defined entries whose atom passes the filter.

    Node ``n`` (one past the last state) is a virtual source with edges to
    ``extra_source``.
    """
    n = fsa.state_count
    delta = fsa.delta
    cols = np.arange(fsa.atom_count)
    if atom_filter is not None:
        cols = cols[atom_filter]
    sub = delta[:, cols]
    src, idx = np.nonzero(sub >= 0)
    dst = sub[src, idx]
    src = np.concatenate([src, np.full(len(extra_source), n)])
    dst = np.concatenate([dst, np.asarray(extra_source, dtype=np.int64)])
    data = np.ones(len(src), dtype=np.int8)
    return csr_matrix((data, (src, dst)), shape=(n + 1, n + 1))


def _reachable(graph: csr_matrix, n: int) -> np.ndarray:
    """Boolean mask of states reachable from the virtual source node ``n``."""
    order = breadth_first_order(graph, n, directed=True, return_predecessors=False)
    mask = np.zeros(n + 1, dtype=np.bool_)
    mask[order] = True
    return mask[:n]


def _on_cycle(graph: csr_matrix, n: int) -> np.ndarray:
    """States lying on some cycle: non-trivial SCC or a self-loop."""
    _, labels = connected_components(graph, directed=True, connection="strong")
    sizes = np.bincount(labels)
    cyc = sizes[labels] > 1
    diag = graph.diagonal() != 0
    return (cyc | diag)[:n]


def lasso_emptiness(fsa: PlanFSA, bound: int | None = None) -> bool:
    """True iff the Buchi language is non-empty (a reachable bad state on a cycle)."""
    _guard(fsa, bound)
    n = fsa.state_count
    if not fsa.initial or not fsa.bad:
        return False
    g = _graph(fsa, extra_source=fsa.initial)
    hits = _reachable(g, n) & _on_cycle(g, n) & fsa.bad_mask
    return bool(hits.any())


def reachable_states(fsa: PlanFSA, atom_filter: np.ndarray | None = None) -> np.ndarray:
    return _reachable(_graph(fsa, atom_filter, fsa.initial), fsa.state_count)


def oracle_invariance(plan: PlanFSA, p: AtomSet, bound: int | None = None) -> bool:
    """True iff some reachable state enables an atom of p."""
    _guard(plan, bound)
    if p.is_zero() or not plan.initial:
        return False
    reach = reachable_states(plan)
    pm = p.to_mask()
    return bool((plan.delta[reach][:, pm] >= 0).any())


def _infinite_avoiding(plan: PlanFSA, q: np.ndarray) -> np.ndarray:
    """States from which an infinite path avoiding the atoms of q exists."""
    n = plan.state_count
    g = _graph(plan, ~q)
    cyclic = _on_cycle(g, n)
    if not cyclic.any():
        return np.zeros(n, dtype=np.bool_)
    # Reverse reachability towards cyclic states.
    rev = g.transpose().tocsr().tolil()
    rev.resize((n + 1, n + 1))
    rev[n, np.flatnonzero(cyclic)] = 1
    return _reachable(rev.tocsr(), n)


def oracle_response(plan: PlanFSA, p: AtomSet, q: AtomSet, first_only: bool,
                    bound: int | None = None) -> bool:
    """True iff some (first, if ``first_only``) trigger is never answered.

    A trigger is a transition on an atom of p outside q; it goes unanswered
    when its target starts an infinite path with no atom of q.
    """
    _guard(plan, bound)
    if not plan.initial:
        return False
    pm, qm = p.to_mask(), q.to_mask()
    trig = pm & ~qm
    if not trig.any():
        return False
    reach = reachable_states(plan, ~pm if first_only else None)
    live = _infinite_avoiding(plan, qm)
    targets = plan.delta[reach][:, trig]
    defined = targets >= 0
    return bool(live[targets[defined]].any())


# ---------------------------------------------------------------- lassos


def accepts_lasso(fsa: PlanFSA, stem: Sequence[int], cycle: Sequence[int]) -> bool:
    """Does ``fsa`` accept stem . cycle^omega?

    Without a bad set every infinite run is accepting; otherwise the run must
    visit a bad state infinitely often.
    """
    if not cycle:
        raise ValueError("a lasso needs a non-empty cycle")
    delta = fsa.delta
    buchi = bool(fsa.bad)
    for start in fsa.initial:
        s = start
        for a in stem:
            s = int(delta[s, a])
            if s < 0:
                break
        if s < 0:
            continue
        # Iterate whole cycle passes until a pass-boundary state repeats.
        boundary: dict[int, int] = {}
        bad_seen: list[bool] = []
        k = 0
        alive = True
        while s not in boundary:
            boundary[s] = k
            hit = False
            for a in cycle:
                s = int(delta[s, a])
                if s < 0:
                    alive = False
                    break
                hit = hit or bool(fsa.bad_mask[s])
            if not alive:
                break
            bad_seen.append(hit)
            k += 1
        if not alive:
            continue
        if not buchi or any(bad_seen[boundary[s]:]):
            return True
    return False


def lassos(atoms: Iterable[int], max_stem: int, max_cycle: int) -> Iterator[tuple[tuple[int, ...], tuple[int, ...]]]:
    """All (stem, cycle) pairs with bounded lengths over ``atoms``."""
    atoms = list(atoms)
    for ls in range(max_stem + 1):
        for stem in itertools.product(atoms, repeat=ls):
            for lc in range(1, max_cycle + 1):
                for cyc in itertools.product(atoms, repeat=lc):
                    yield stem, cyc
