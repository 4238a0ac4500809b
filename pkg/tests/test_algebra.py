import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from planverify.algebra import (
    ActionAlphabet,
    AtomSet,
    AtomUniverse,
    complement,
    compose_atom,
    join,
    leq,
    lift,
    lift_action,
    meet,
)
from planverify.errors import InputError

from conftest import ROVERS, TINY

masks = st.integers(min_value=0, max_value=(1 << ROVERS.atom_count) - 1)


def S(mask):
    return AtomSet(ROVERS, mask)


def test_universe_shape():
    assert ROVERS.agent_count == 3
    assert ROVERS.atom_count == 12
    assert list(ROVERS.atoms()) == list(range(12))


def test_atom_order_is_mixed_radix_first_agent_most_significant():
    assert ROVERS.atom_name(0) == "F-collect/I-receive/L-transmit"
    assert ROVERS.atom_name(1) == "F-collect/I-receive/L-receive"
    assert ROVERS.atom_name(11) == "F-deliver/I-deliver/L-pause"
    for a in ROVERS.atoms():
        assert ROVERS.compose(ROVERS.decompose(a)) == a


def test_short_names_round_trip():
    assert ROVERS.supports_short_names
    assert ROVERS.short_name(0) == "crt"
    for a in ROVERS.atoms():
        assert ROVERS.parse_atom(ROVERS.short_name(a)) == a
        assert ROVERS.parse_atom(ROVERS.atom_name(a)) == a


def test_compose_atom_by_action_names():
    a = compose_atom(ROVERS, ["F-deliver", "I-receive", "L-transmit"])
    assert ROVERS.short_name(a) == "drt"
    with pytest.raises(InputError):
        compose_atom(ROVERS, ["F-deliver", "I-receive"])
    with pytest.raises(InputError):
        compose_atom(ROVERS, ["F-deliver", "I-receive", "L-nope"])


def test_universe_validation():
    with pytest.raises(InputError):
        ActionAlphabet("A", ())
    with pytest.raises(InputError):
        ActionAlphabet("A", ("x", "x"))
    with pytest.raises(InputError):
        AtomUniverse(())
    with pytest.raises(InputError):
        AtomUniverse((ActionAlphabet("A", ("x",)), ActionAlphabet("A", ("y",))))


def test_universe_dict_round_trip():
    assert AtomUniverse.from_dict(ROVERS.to_dict()) == ROVERS


def test_zero_is_below_everything():
    zero = ROVERS.empty()
    for m in (0, 1, 0b1010, (1 << 12) - 1):
        assert leq(zero, S(m))


def test_leq_subset_from_single_agent_disjunction():
    collect = lift_action(ROVERS, "F-collect")
    either = lift(ROVERS, 0, ["F-collect", "F-deliver"])
    assert leq(collect, either)
    assert not leq(either, collect)


def test_lift_counts():
    assert len(lift_action(ROVERS, "L-transmit")) == 4
    assert lift(ROVERS, 2, ["L-transmit", "L-receive", "L-pause"]) == ROVERS.full()
    assert lift(ROVERS, 1, []) == ROVERS.empty()


def test_p1_forbidden_atoms():
    p = meet(lift_action(ROVERS, "I-deliver"), lift_action(ROVERS, "L-transmit"))
    assert sorted(ROVERS.short_name(a) for a in p) == ["cdt", "ddt"]


def test_lift_errors():
    with pytest.raises(InputError):
        lift(ROVERS, 0, ["L-transmit"])
    with pytest.raises(InputError):
        lift(ROVERS, 5, ["F-collect"])


def test_universe_mismatch_rejected():
    with pytest.raises(InputError):
        meet(S(1), AtomSet(TINY, 1))
    with pytest.raises(InputError):
        leq(S(1), AtomSet(TINY, 1))


def test_leq_agrees_with_meet_on_random_pairs():
    rng = np.random.default_rng(7)
    for _ in range(200):
        x = S(int(rng.integers(0, 1 << 12)))
        y = S(int(rng.integers(0, 1 << 12)))
        assert leq(x, y) == (meet(x, y) == x)


@settings(max_examples=200)
@given(masks, masks, masks)
def test_boolean_algebra_laws(a, b, c):
    x, y, z = S(a), S(b), S(c)
    assert meet(x, y) == meet(y, x)
    assert join(x, y) == join(y, x)
    assert meet(x, join(y, z)) == join(meet(x, y), meet(x, z))
    assert join(x, meet(y, z)) == meet(join(x, y), join(x, z))
    assert meet(x, complement(x)) == ROVERS.empty()
    assert join(x, complement(x)) == ROVERS.full()
    assert complement(complement(x)) == x
    assert complement(meet(x, y)) == join(complement(x), complement(y))


@settings(max_examples=200)
@given(masks, masks, masks)
def test_leq_is_partial_order(a, b, c):
    x, y, z = S(a), S(b), S(c)
    assert leq(x, x)
    if leq(x, y) and leq(y, x):
        assert x == y
    if leq(x, y) and leq(y, z):
        assert leq(x, z)


def test_atoms_are_minimal_nonzero_elements():
    for m in range(1, 1 << 6):
        x = S(m)
        minimal = all(y.is_zero() or y == x for y in (S(k) for k in range(1 << 6)) if leq(y, x))
        assert minimal == (len(x) == 1)


@settings(max_examples=100)
@given(st.sets(st.sampled_from(["L-transmit", "L-receive", "L-pause"])),
       st.sets(st.sampled_from(["L-transmit", "L-receive", "L-pause"])))
def test_lift_is_a_join_homomorphism(a, b):
    assert lift(ROVERS, 2, a | b) == join(lift(ROVERS, 2, a), lift(ROVERS, 2, b))


def test_set_protocol():
    x = S(0b101)
    assert 0 in x and 2 in x and 1 not in x
    assert list(x) == [0, 2]
    assert x.to_mask().tolist()[:3] == [True, False, True]
    assert bool(x) and not bool(ROVERS.empty())
    assert x - S(0b1) == S(0b100)
    assert ROVERS.atom_set([0, 2]) == x
