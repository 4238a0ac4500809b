import numpy as np
import pytest

from planverify.algebra import ActionAlphabet, AtomSet, AtomUniverse
from planverify.automaton import UNDEFINED, PlanFSA
from planverify.fixtures import ROVERS_UNIVERSE, rovers_properties

ROVERS = ROVERS_UNIVERSE
TINY = AtomUniverse((ActionAlphabet("X", ("x", "y", "z")),))


def random_plan(rng, universe=ROVERS, states=None, fill=None, name="R", initial=None, bad=False):
    """Random table plan for tests (independent of the harness generator)."""
    n = int(rng.integers(1, 7)) if states is None else states
    fill = float(rng.uniform(0.1, 0.9)) if fill is None else fill
    table = rng.integers(0, n, size=(n, universe.atom_count)).astype(np.int32)
    table[rng.random(table.shape) >= fill] = UNDEFINED
    if initial is None:
        k = int(rng.integers(1, min(n, 2) + 1))
        initial = sorted(rng.choice(n, size=k, replace=False).tolist())
    bad_states = ()
    if bad:
        bad_states = sorted(rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False).tolist())
    return PlanFSA(name, universe, [f"q{i}" for i in range(n)], initial, table, bad_states)


def random_team(rng, universe=ROVERS, agents=None, max_states=6, fill=None):
    k = int(rng.integers(1, 4)) if agents is None else agents
    return [
        random_plan(rng, universe, int(rng.integers(1, max_states + 1)), fill, name=f"A{i}")
        for i in range(k)
    ]


def random_atomset(rng, universe=ROVERS, density=None):
    d = float(rng.uniform(0.0, 0.5)) if density is None else density
    mask = 0
    for a in range(universe.atom_count):
        if rng.random() < d:
            mask |= 1 << a
    return AtomSet(universe, mask)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def suite():
    return rovers_properties()
