import itertools

import numpy as np
import pytest

from planverify.automaton import UNDEFINED, PlanFSA
from planverify.errors import OracleBoundExceeded
from planverify.fixtures import STAY_UNIVERSE, stay_edit, stay_example
from planverify.operators import apply_edit
from planverify.oracle import (
    accepts_lasso,
    lasso_emptiness,
    lassos,
    oracle_invariance,
    oracle_response,
)

from conftest import ROVERS, TINY, random_atomset, random_plan


def _run(plan, start, word):
    s = start
    for a in word:
        s = int(plan.delta[s, a])
        if s < 0:
            return None
    return s


def _words(max_len):
    for n in range(max_len + 1):
        yield from itertools.product(range(TINY.atom_count), repeat=n)


def test_no_initial_states_means_empty_language():
    plan = random_plan(np.random.default_rng(0), states=3, bad=True, initial=[])
    assert not lasso_emptiness(plan)
    assert not oracle_invariance(plan, ROVERS.full())
    assert not oracle_response(plan, ROVERS.full(), ROVERS.empty(), first_only=False)


def test_bad_self_loop_is_nonempty():
    table = np.full((1, 12), UNDEFINED, np.int32)
    table[0, 3] = 0
    plan = PlanFSA("B", ROVERS, ["s"], [0], table, bad=[0])
    assert lasso_emptiness(plan)
    assert accepts_lasso(plan, [], [3])
    assert not accepts_lasso(plan, [], [4])


def test_bad_state_off_any_cycle_is_empty():
    table = np.full((2, 12), UNDEFINED, np.int32)
    table[0, 0] = 1
    table[0, 1] = 0
    plan = PlanFSA("B", ROVERS, ["s", "t"], [0], table, bad=[1])
    assert not lasso_emptiness(plan)


def test_bound_is_enforced():
    plan = random_plan(np.random.default_rng(1), states=6)
    with pytest.raises(OracleBoundExceeded):
        oracle_invariance(plan, ROVERS.full(), bound=5)
    with pytest.raises(OracleBoundExceeded):
        lasso_emptiness(plan, bound=5)
    oracle_invariance(plan, ROVERS.full(), bound=-1)


def test_empty_trigger_and_universal_response():
    rng = np.random.default_rng(2)
    for _ in range(30):
        plan = random_plan(rng)
        q = random_atomset(rng)
        assert not oracle_response(plan, ROVERS.empty(), q, first_only=False)
        assert not oracle_response(plan, random_atomset(rng), ROVERS.full(), first_only=False)
        assert not oracle_invariance(plan, ROVERS.empty())


def test_atoms_answering_themselves_never_violate():
    rng = np.random.default_rng(3)
    for _ in range(50):
        plan = random_plan(rng)
        p = random_atomset(rng)
        q = p | random_atomset(rng)
        assert not oracle_response(plan, p, q, first_only=False)


def test_stay_example_verdicts():
    s1 = stay_example()
    u = STAY_UNIVERSE
    p, q = u.atom_set([u.find_action("a")[1]]), u.atom_set([u.find_action("d")[1]])
    assert not oracle_response(s1, p, q, first_only=False)
    assert oracle_response(apply_edit(s1, stay_edit()), p, q, first_only=False)


def test_invariance_matches_word_enumeration():
    rng = np.random.default_rng(4)
    for _ in range(150):
        plan = random_plan(rng, TINY, states=int(rng.integers(1, 4)))
        p = random_atomset(rng, TINY, density=0.4)
        # Every reachable state is reached by a word shorter than the state count.
        hit = any(
            _run(plan, i, w) is not None and any(a in p for a in w)
            for i in plan.initial for w in _words(plan.state_count)
        )
        assert oracle_invariance(plan, p) == hit


def _violates_by_lassos(plan, p, q, first_only, stem_len, cyc_len):
    for stem, cyc in lassos(range(TINY.atom_count), stem_len, cyc_len):
        if not accepts_lasso(plan, stem, cyc):
            continue
        if any(a in q for a in cyc):
            continue
        for k, a in enumerate(stem):
            if a in p and a not in q and not any(b in q for b in stem[k + 1:]):
                return True
            if first_only and a in p:
                break
        else:
            if any(a in p and a not in q for a in cyc):
                if not first_only or not any(a in p for a in stem):
                    return True
    return False


@pytest.mark.parametrize("first_only", [False, True])
def test_response_matches_lasso_enumeration_on_complete_plans(first_only):
    # On complete plans every finite run extends to an infinite one, so the
    # violation is witnessed by a short lasso.
    rng = np.random.default_rng(5 + first_only)
    seen = set()
    for _ in range(40):
        plan = random_plan(rng, TINY, states=int(rng.integers(1, 3)), fill=1.0)
        p = random_atomset(rng, TINY, density=0.4)
        q = random_atomset(rng, TINY, density=0.3)
        got = oracle_response(plan, p, q, first_only=first_only)
        assert got == _violates_by_lassos(plan, p, q, first_only, 4, 2)
        seen.add(got)
    assert seen == {True, False}


def test_lasso_acceptance_matches_unrolled_run():
    rng = np.random.default_rng(7)
    for _ in range(40):
        plan = random_plan(rng, TINY, states=int(rng.integers(1, 4)), bad=True)
        for stem, cyc in lassos(range(3), 2, 2):
            # Unroll far enough that the run is periodic, then look for a bad
            # state in the final period.
            runs = []
            for i in plan.initial:
                s = _run(plan, i, stem)
                if s is None:
                    continue
                trace = []
                for _ in range(2 * plan.state_count + 2):
                    for a in cyc:
                        s = -1 if s < 0 else int(plan.delta[s, a])
                        trace.append(s)
                if min(trace) < 0:
                    continue
                tail = trace[-len(cyc) * (plan.state_count + 1):]
                runs.append(any(t in plan.bad for t in tail))
            assert accepts_lasso(plan, stem, cyc) == any(runs)


def test_lassos_enumeration_counts():
    got = list(lassos(range(3), 1, 2))
    assert len(got) == (1 + 3) * (3 + 9)
    with pytest.raises(ValueError):
        accepts_lasso(stay_example(), [], [])
