import itertools

import numpy as np
import pytest

from planverify.automaton import UNDEFINED, PlanFSA
from planverify.checker import ErrorMode, total_at, total_i
from planverify.errors import ContractViolation, InputError
from planverify.fixtures import rovers_plans, rovers_property
from planverify.harness import GenConfig, gen_team
from planverify.operators import TableEdit, apply_edit
from planverify.product import (
    ProductFSA,
    inc_product,
    inc_product_ni,
    product_with_property,
    total_product,
)
from planverify.property import neg_fsa, neg_first_response_fsa, parse_property

from conftest import ROVERS, TINY, random_plan, random_team


def naive_product(components):
    """Reference product by explicit tuple enumeration."""
    sizes = [c.state_count for c in components]
    tuples = list(itertools.product(*(range(n) for n in sizes)))
    index = {t: i for i, t in enumerate(tuples)}
    table = np.full((len(tuples), components[0].atom_count), UNDEFINED, np.int64)
    for t, i in index.items():
        for a in range(components[0].atom_count):
            succ = tuple(int(c.delta[s, a]) for c, s in zip(components, t))
            if all(x != UNDEFINED for x in succ):
                table[i, a] = index[succ]
    initial = sorted(index[t] for t in itertools.product(*(c.initial for c in components)))
    bad = sorted(index[t] for t in tuples if any(s in c.bad for c, s in zip(components, t)))
    return table, initial, bad


def test_rovers_product_transition_and_initials():
    prod = total_product(rovers_plans())
    assert prod.state_count == 12 and prod.atom_count == 12
    crt = prod.state_index("COLLECTING,RECEIVING,TRANSMITTING")
    drt = prod.universe.parse_atom("drt")
    assert prod.label(prod.delta[crt, drt]) == "DELIVERING,DELIVERING,RECEIVING"
    labels = {prod.label(i) for i in prod.initial}
    assert {
        "COLLECTING,RECEIVING,TRANSMITTING",
        "COLLECTING,RECEIVING,PAUSING",
        "COLLECTING,RECEIVING,RECEIVING",
    } <= labels


def test_single_component_product_is_a_copy():
    L = rovers_plans()[2]
    prod = total_product([L])
    assert np.array_equal(prod.delta, L.delta)
    assert prod.initial == L.initial


def test_universe_mismatch():
    a = random_plan(np.random.default_rng(0), ROVERS)
    b = random_plan(np.random.default_rng(0), TINY)
    with pytest.raises(InputError):
        total_product([a, b])
    with pytest.raises(InputError):
        total_product([])


def test_rovers_with_negated_p2_has_bad_state():
    prod = product_with_property(total_product(rovers_plans()), neg_fsa(rovers_property("R1")))
    assert prod.state_count == 24
    s = prod.state_index("COLLECTING,RECEIVING,RECEIVING,2")
    assert s in prod.bad
    assert prod.state_index("COLLECTING,RECEIVING,RECEIVING,1") not in prod.bad


def test_unreachable_bad_state_when_trigger_is_empty():
    prop = parse_property("response F-collect & F-deliver => L-receive", ROVERS)
    prod = product_with_property(total_product(rovers_plans()), neg_first_response_fsa(prop))
    v, _ = total_at(prod)
    assert v.passed
    reach = np.zeros(prod.state_count, bool)
    stack = list(prod.initial)
    while stack:
        s = stack.pop()
        if reach[s]:
            continue
        reach[s] = True
        stack.extend(int(t) for t in prod.delta[s] if t >= 0)
    assert not any(reach[b] for b in prod.bad)


def test_matches_naive_product_on_random_teams():
    rng = np.random.default_rng(11)
    for _ in range(50):
        team = random_team(rng)
        if rng.random() < 0.5:
            team[-1] = random_plan(rng, states=team[-1].state_count, bad=True, name="B")
        prod = total_product(team)
        table, initial, bad = naive_product(team)
        assert prod.state_count == int(np.prod([c.state_count for c in team]))
        assert np.array_equal(prod.delta, table)
        assert sorted(prod.initial) == initial
        assert sorted(prod.bad) == bad
        defined = sum(
            int(np.prod([np.count_nonzero(c.delta[:, a] != UNDEFINED) for c in team]))
            for a in range(12)
        )
        assert np.count_nonzero(prod.delta != UNDEFINED) == defined


def test_product_is_associative_up_to_flattening():
    rng = np.random.default_rng(12)
    for _ in range(20):
        a, b, c = (random_plan(rng, states=int(rng.integers(1, 5))) for _ in range(3))
        left = total_product([total_product([a, b]), c])
        right = total_product([a, total_product([b, c])])
        flat = total_product([a, b, c])
        assert np.array_equal(left.delta, flat.delta)
        assert np.array_equal(right.delta, flat.delta)
        assert [left.label(i) for i in range(flat.state_count)] == \
            [flat.label(i) for i in range(flat.state_count)]


def test_tuple_labels_and_component_states():
    prod = total_product(rovers_plans())
    for i in range(prod.state_count):
        parts = prod.component_states(i)
        assert prod.index_of(parts) == i
        assert prod.label(i) == ",".join(c.label(p) for c, p in zip(prod.components, parts))


def _edits(rng, team, n):
    out = []
    for _ in range(n):
        k = int(rng.integers(len(team)))
        c = team[k]
        v, a = int(rng.integers(c.state_count)), int(rng.integers(12))
        w = int(rng.integers(-1, c.state_count))
        out.append((k, TableEdit(k, v, a, w)))
    return out


def test_inc_product_matches_total_product():
    rng = np.random.default_rng(13)
    for _ in range(100):
        team = random_team(rng)
        prev = total_product(team)
        for k, edit in _edits(rng, team, 3):
            team[k] = apply_edit(team[k], edit)
            prev = inc_product(prev, k, edit)
            assert np.array_equal(prev.delta, total_product(team).delta)


def test_inc_product_ni_table_and_new_initials():
    rng = np.random.default_rng(14)
    for _ in range(100):
        team = random_team(rng)
        base = total_product(team)
        _, ctx = total_i(base, ROVERS.empty())
        (k, edit), = _edits(rng, team, 1)
        inc = inc_product(base.copy(), k, edit)
        ni, roots = inc_product_ni(base.copy(), k, edit, ctx.copy())
        assert np.array_equal(inc.delta, ni.delta)
        if team[k].delta[edit.state, edit.atom] == edit.new_target:
            continue
        expect = [
            s for s in range(base.state_count)
            if base.component_states(s)[k] == edit.state and ctx.visited[s]
        ]
        assert sorted(roots.tolist()) == expect
        assert ni.initial == base.initial


def test_inc_product_touches_one_column_of_matching_rows():
    prop = rovers_property("I1")
    team = gen_team(GenConfig(states_per_agent=25, seed=3), prop)
    prod = total_product(team)
    col = next(a for a in range(12) if (team[1].delta[:, a] != UNDEFINED).all())
    old = int(team[1].delta[4, col])
    edit = TableEdit(1, 4, col, (old + 1) % 25)
    after = inc_product(prod.copy(), 1, edit)
    diff = np.argwhere(after.delta != prod.delta)
    assert len(diff) == 25 * 25
    assert set(diff[:, 1].tolist()) == {col}
    assert all(prod.component_states(int(r))[1] == 4 for r in diff[:, 0])


def test_new_initials_bounded_at_benchmark_scale():
    prop = rovers_property("I1")
    team = gen_team(GenConfig(states_per_agent=25, seed=5), prop)
    prod = total_product(team)
    _, ctx = total_i(prod, prop.p)
    edit = TableEdit(2, 7, 0, 3)
    _, roots = inc_product_ni(prod, 2, edit, ctx)
    assert len(roots) <= 25 * 25
    assert all(prod.component_states(int(r))[2] == 7 for r in roots)


def test_identity_edit_returns_previous_product():
    team = rovers_plans()
    prod = total_product(team)
    same = TableEdit(0, 0, 0, int(team[0].delta[0, 0]))
    assert inc_product(prod, 0, same) is prod


def test_undefined_stays_undefined_when_other_component_blocks():
    team = list(rovers_plans())
    F = team[0]
    # F-collect is never enabled at DELIVERING, so column crt stays undefined
    # on every product row whose F component is DELIVERING.
    crt = ROVERS.parse_atom("crt")
    prod = total_product(team)
    edit = TableEdit(2, 0, crt, UNDEFINED)
    after = inc_product(prod, 2, edit)
    for s in range(after.state_count):
        if after.component_states(s)[0] == F.state_index("DELIVERING"):
            assert after.delta[s, crt] == UNDEFINED


def test_consumed_product_is_rejected():
    team = rovers_plans()
    prod = total_product(team)
    edit = TableEdit(2, 0, 0, 2)
    inc_product(prod, 2, edit)
    assert prod.consumed
    with pytest.raises(ContractViolation):
        inc_product(prod, 2, TableEdit(2, 0, 1, 1))


def test_bad_component_index_is_rejected():
    prod = total_product(rovers_plans())
    with pytest.raises(ContractViolation):
        inc_product(prod, 5, TableEdit(5, 0, 0, 0))
    with pytest.raises(ContractViolation):
        inc_product(prod, 0, TableEdit(0, 7, 0, 0))


def test_stale_context_is_rejected():
    team = rovers_plans()
    prod = total_product(team)
    other = total_product([team[0], team[1]])
    _, ctx = total_i(other, ROVERS.empty())
    with pytest.raises(ContractViolation):
        inc_product_ni(prod, 0, TableEdit(0, 0, 0, 1), ctx)


def test_provenance_tracks_edits():
    prod = total_product(rovers_plans())
    before = prod.provenance
    after = inc_product(prod.copy(), 2, TableEdit(2, 0, 0, 2))
    assert after.derived_from == before
    assert after.provenance != before
    again = inc_product(total_product(rovers_plans()), 2, TableEdit(2, 0, 0, 2))
    assert again.provenance == after.provenance
