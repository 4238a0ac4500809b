"""Compiled inner loops for product construction and depth-first checking.

All routines work on an int32 table ``delta[state, atom]`` where -1 marks an
undefined entry.  Recursion is replaced by explicit stacks whose frames hold
(state, next atom, end atom); the visiting order is exactly that of the
recursive formulation (preorder, atoms ascending).
"""

import numpy as np
from numba import njit


@njit(cache=True)
def product_table(comps, sizes, out):
    """Fill ``out`` (N x A) with the synchronous product of stacked tables.

    ``comps[k, s, a]`` is component k's successor of s on a (padded rows are
    never read).  Product state digits are mixed radix, first component most
    significant.
    """
    m = sizes.shape[0]
    n_states, n_atoms = out.shape
    digits = np.zeros(m, dtype=np.int64)
    for s in range(n_states):
        for a in range(n_atoms):
            t = 0
            for k in range(m):
                w = comps[k, digits[k], a]
                if w < 0:
                    t = -1
                    break
                t = t * sizes[k] + w
            out[s, a] = t
        k = m - 1
        while k >= 0:
            digits[k] += 1
            if digits[k] < sizes[k]:
                break
            digits[k] = 0
            k -= 1


@njit(cache=True)
def product_update(comps, sizes, table, agent, v_i, atom, visited, collect, out_ni):
    """Recompute column ``atom`` of the rows whose ``agent`` digit is ``v_i``.

    ``comps`` must already hold the edited component.  When ``collect`` is
    true, rows flagged in ``visited`` are written to ``out_ni`` in ascending
    order and their count is returned.
    """
    m = sizes.shape[0]
    strides = np.ones(m, dtype=np.int64)
    for k in range(m - 2, -1, -1):
        strides[k] = strides[k + 1] * sizes[k + 1]
    width = comps.shape[1]
    # contrib[k, d]: component k's share of the target index, -1 if undefined.
    contrib = np.empty((m, width), dtype=np.int64)
    for k in range(m):
        for d in range(sizes[k]):
            w = comps[k, d, atom]
            contrib[k, d] = -1 if w < 0 else w * strides[k]
    digits = np.zeros(m, dtype=np.int64)
    digits[agent] = v_i
    rows = 1
    for k in range(m):
        if k != agent:
            rows *= sizes[k]
    count = 0
    for _ in range(rows):
        r = 0
        t = 0
        for k in range(m):
            r += digits[k] * strides[k]
            c = contrib[k, digits[k]]
            if c < 0 or t < 0:
                t = -1
            else:
                t += c
        table[r, atom] = t
        if collect and visited[r]:
            out_ni[count] = r
            count += 1
        k = m - 1
        while k >= 0:
            if k == agent:
                k -= 1
                continue
            digits[k] += 1
            if digits[k] < sizes[k]:
                break
            digits[k] = 0
            k -= 1
    return count


@njit(cache=True)
def dfs_invariance(delta, roots, pmask, visited, ni_mask, a_adapt, stop_first, err_s, err_a):
    """Depth-first invariance check (total and new-initial variants).

    A state flagged in ``ni_mask`` whose ``a_adapt`` entry is defined is
    entered in restricted mode: only ``a_adapt`` is checked and followed.
    Every other state checks all atoms of p and then follows all atoms.
    Returns the number of (state, atom) errors written to err_s/err_a.
    """
    n_states, n_atoms = delta.shape
    st_s = np.empty(n_states, dtype=np.int64)
    st_a = np.empty(n_states, dtype=np.int64)
    st_e = np.empty(n_states, dtype=np.int64)
    nerr = 0
    for root in roots:
        if visited[root]:
            continue
        sp = 0
        pending = root
        while True:
            if pending >= 0:
                v = pending
                pending = -1
                visited[v] = 1
                if a_adapt >= 0 and ni_mask[v] and delta[v, a_adapt] >= 0:
                    if pmask[a_adapt]:
                        err_s[nerr] = v
                        err_a[nerr] = a_adapt
                        nerr += 1
                    st_a[sp] = a_adapt
                    st_e[sp] = a_adapt + 1
                else:
                    for a in range(n_atoms):
                        if pmask[a] and delta[v, a] >= 0:
                            err_s[nerr] = v
                            err_a[nerr] = a
                            nerr += 1
                    st_a[sp] = 0
                    st_e[sp] = n_atoms
                st_s[sp] = v
                sp += 1
                if stop_first and nerr > 0:
                    return nerr
            if sp == 0:
                break
            top = sp - 1
            a = st_a[top]
            if a >= st_e[top]:
                sp -= 1
                continue
            st_a[top] = a + 1
            w = delta[st_s[top], a]
            if w >= 0 and visited[w] == 0:
                pending = w
    return nerr


@njit(cache=True)
def _nested(delta, seed, visited2, stamp, st_s, st_a):
    """Search for a path from ``seed`` back to itself (nested search).

    ``visited2[v] == stamp`` plays the role of a freshly reset flag array.
    """
    n_atoms = delta.shape[1]
    visited2[seed] = stamp
    sp = 0
    st_s[0] = seed
    st_a[0] = 0
    sp = 1
    while sp > 0:
        top = sp - 1
        a = st_a[top]
        if a >= n_atoms:
            sp -= 1
            continue
        st_a[top] = a + 1
        w = delta[st_s[top], a]
        if w < 0:
            continue
        if w == seed:
            return True
        if visited2[w] != stamp:
            visited2[w] = stamp
            st_s[sp] = w
            st_a[sp] = 0
            sp += 1
    return False


@njit(cache=True)
def dfs_accepting(delta, roots, bad, visited, visited2, stamp0, ni_mask, a_adapt, stop_first, seeds):
    """Nested depth-first search for reachable bad states on cycles.

    The nested search runs when a bad state is first entered, before its
    successors are explored.  States flagged in ``ni_mask`` whose
    ``a_adapt`` successor is defined and unvisited follow only that
    successor.  Returns (number of seeds found, next stamp value).
    """
    n_states, n_atoms = delta.shape
    st_s = np.empty(n_states, dtype=np.int64)
    st_a = np.empty(n_states, dtype=np.int64)
    st_e = np.empty(n_states, dtype=np.int64)
    ns_s = np.empty(n_states, dtype=np.int64)
    ns_a = np.empty(n_states, dtype=np.int64)
    stamp = stamp0
    nerr = 0
    for root in roots:
        if visited[root]:
            continue
        sp = 0
        pending = root
        while True:
            if pending >= 0:
                v = pending
                pending = -1
                visited[v] = 1
                if bad[v]:
                    stamp += 1
                    if _nested(delta, v, visited2, stamp, ns_s, ns_a):
                        seeds[nerr] = v
                        nerr += 1
                        if stop_first:
                            return nerr, stamp
                restricted = False
                if a_adapt >= 0 and ni_mask[v]:
                    w = delta[v, a_adapt]
                    if w >= 0 and visited[w] == 0:
                        restricted = True
                st_s[sp] = v
                if restricted:
                    st_a[sp] = a_adapt
                    st_e[sp] = a_adapt + 1
                else:
                    st_a[sp] = 0
                    st_e[sp] = n_atoms
                sp += 1
            if sp == 0:
                break
            top = sp - 1
            a = st_a[top]
            if a >= st_e[top]:
                sp -= 1
                continue
            st_a[top] = a + 1
            w = delta[st_s[top], a]
            if w >= 0 and visited[w] == 0:
                pending = w
    return nerr, stamp
