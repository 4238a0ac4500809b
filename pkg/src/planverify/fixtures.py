"""Small hand-encoded plans: the rovers-and-lander team and a one-agent
example for the stay operator under a Response property."""

from __future__ import annotations

from importlib import resources
from typing import Callable

import numpy as np

from .algebra import ActionAlphabet, AtomUniverse
from .automaton import UNDEFINED, PlanFSA, load_grid
from .operators import TableEdit
from .property import Property, parse_properties

ROVERS_UNIVERSE = AtomUniverse((
    ActionAlphabet("F", ("F-collect", "F-deliver")),
    ActionAlphabet("I", ("I-receive", "I-deliver")),
    ActionAlphabet("L", ("L-transmit", "L-receive", "L-pause")),
))

Rule = Callable[[str, str, str], bool]


def _from_rules(name: str, states: list[str], initial: list[str],
                rules: dict[str, list[tuple[Rule, str]]]) -> PlanFSA:
    """Tabulate a plan from per-state (condition, target) rules.

    Conditions are predicates over the joint action (f, i, l); the first
    matching rule wins and atoms matching no rule stay undefined.
    """
    u = ROVERS_UNIVERSE
    index = {s: k for k, s in enumerate(states)}
    table = np.full((len(states), u.atom_count), UNDEFINED, dtype=np.int32)
    for a in u.atoms():
        f, i, l = u.action_names(a)
        for s, row in rules.items():
            for cond, target in row:
                if cond(f, i, l):
                    table[index[s], a] = index[target]
                    break
    return PlanFSA(name, u, states, [index[s] for s in initial], table)


def rover_f() -> PlanFSA:
    """Rover F.

    COLLECTING:  F-collect & I-deliver  -> COLLECTING
                 F-collect & I-receive  -> DELIVERING
                 F-deliver              -> DELIVERING
    DELIVERING:  F-deliver & I-receive  -> DELIVERING
                 F-deliver & I-deliver  -> COLLECTING
                 (F-collect not allowed)
    """
    return _from_rules("F", ["COLLECTING", "DELIVERING"], ["COLLECTING"], {
        "COLLECTING": [
            (lambda f, i, l: f == "F-collect" and i == "I-deliver", "COLLECTING"),
            (lambda f, i, l: f == "F-collect" and i == "I-receive", "DELIVERING"),
            (lambda f, i, l: f == "F-deliver", "DELIVERING"),
        ],
        "DELIVERING": [
            (lambda f, i, l: f == "F-deliver" and i == "I-receive", "DELIVERING"),
            (lambda f, i, l: f == "F-deliver" and i == "I-deliver", "COLLECTING"),
        ],
    })


def rover_i() -> PlanFSA:
    """Rover I.

    RECEIVING:   I-receive & F-deliver & L-transmit  -> DELIVERING
                 else (I-receive otherwise)          -> RECEIVING
                 (I-deliver not allowed)
    DELIVERING:  I-deliver & L-transmit              -> DELIVERING
                 I-deliver & (L-receive | L-pause)   -> RECEIVING
                 (I-receive not allowed)
    """
    return _from_rules("I", ["RECEIVING", "DELIVERING"], ["RECEIVING"], {
        "RECEIVING": [
            (lambda f, i, l: i == "I-receive" and f == "F-deliver" and l == "L-transmit", "DELIVERING"),
            (lambda f, i, l: i == "I-receive", "RECEIVING"),
        ],
        "DELIVERING": [
            (lambda f, i, l: i == "I-deliver" and l == "L-transmit", "DELIVERING"),
            (lambda f, i, l: i == "I-deliver", "RECEIVING"),
        ],
    })


def _data(name: str) -> str:
    return resources.files("planverify").joinpath("data", name).read_text()


def lander_l() -> PlanFSA:
    """Lander L, read from its transition table."""
    fsa = load_grid(_data("L.grid"))
    if fsa.universe != ROVERS_UNIVERSE:
        raise AssertionError("lander table uses an unexpected universe")
    return fsa


def rovers_plans() -> tuple[PlanFSA, PlanFSA, PlanFSA]:
    return rover_f(), rover_i(), lander_l()


ROVERS_PROPERTIES_TEXT = _data("rovers.prop")


def rovers_properties() -> list[Property]:
    return parse_properties(ROVERS_PROPERTIES_TEXT, ROVERS_UNIVERSE)


def rovers_property(name: str) -> Property:
    for prop in rovers_properties():
        if prop.name == name:
            return prop
    raise KeyError(name)


# The two properties used as running examples: the first Invariance and the
# first Response property of the suite.
P1_TEXT = "P1: invariant !(I-deliver & L-transmit)"
P2_TEXT = "P2: response F-deliver => L-receive"


# ------------------------------------------------------- one-agent example

STAY_UNIVERSE = AtomUniverse((ActionAlphabet("S", ("a", "b", "c", "d", "e", "f")),))


def stay_example() -> PlanFSA:
    """STATE1 -b-> STATE2, STATE2 -e-> STATE2, STATE2 -a-> STATE3,
    STATE3 -d-> STATE1; STATE1 initial."""
    u = STAY_UNIVERSE
    a, b, d, e = (u.find_action(x)[1] for x in "abde")
    table = np.full((3, u.atom_count), UNDEFINED, dtype=np.int32)
    table[0, b] = 1
    table[1, e] = 1
    table[1, a] = 2
    table[2, d] = 0
    return PlanFSA("S1", u, ["STATE1", "STATE2", "STATE3"], [0], table)


def stay_edit() -> TableEdit:
    """Move atom a from edge (STATE2, STATE3) onto the STATE2 self-loop."""
    return TableEdit(0, 1, STAY_UNIVERSE.find_action("a")[1], 1)


P3_TEXT = "P3: response a => d"
