"""Learning operators on table plans: taxonomy, edits, classification and the
a-priori safety (reverification method) table."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .algebra import Atom, AtomSet
from .automaton import UNDEFINED, PlanFSA, _digest
from .errors import InputError, NoCandidate


class OperatorSchema(enum.Enum):
    CHANGE = "change"
    DELETE = "delete"
    ADD = "add"
    SPEC = "spec"
    GEN = "gen"
    DELETE_OR_SPEC = "delete-or-spec"
    ADD_OR_GEN = "add-or-gen"
    DELETE_ACTION = "delete-action"
    ADD_ACTION = "add-action"
    MOVE = "move"
    DELETE_ADD = "delete+add"
    SPEC_ADD = "spec+add"
    DELETE_GEN = "delete+gen"
    SPEC_GEN = "spec+gen"
    STAY = "stay"

    @classmethod
    def parse(cls, text: str) -> "OperatorSchema":
        key = text.strip().lower().replace("_", "-").replace(" ", "").replace("|", "-or-")
        for s in cls:
            if key in (s.value, s.name.lower().replace("_", "-")):
                return s
        raise InputError(f"unknown operator {text!r}")


S = OperatorSchema

# Immediate parent in the operator hierarchy.  The action-level schemas are
# sequences of one-step edits and sit outside the hierarchy.
_PARENT: dict[OperatorSchema, OperatorSchema | None] = {
    S.CHANGE: None,
    S.DELETE_OR_SPEC: S.CHANGE,
    S.ADD_OR_GEN: S.CHANGE,
    S.DELETE: S.DELETE_OR_SPEC,
    S.SPEC: S.DELETE_OR_SPEC,
    S.ADD: S.ADD_OR_GEN,
    S.GEN: S.ADD_OR_GEN,
    S.MOVE: S.CHANGE,
    S.DELETE_ADD: S.MOVE,
    S.SPEC_ADD: S.MOVE,
    S.DELETE_GEN: S.MOVE,
    S.SPEC_GEN: S.MOVE,
    S.STAY: S.MOVE,
    S.DELETE_ACTION: None,
    S.ADD_ACTION: None,
}

# Two-step schemas whose target is guaranteed accessible whenever the source is.
ACCESSIBILITY_CONDITION = frozenset({S.DELETE_GEN, S.SPEC_GEN, S.STAY})


def parent(schema: OperatorSchema) -> OperatorSchema | None:
    return _PARENT[schema]


def is_special_case(schema: OperatorSchema, ancestor: OperatorSchema) -> bool:
    """True if ``schema`` equals ``ancestor`` or lies below it in the hierarchy."""
    node: OperatorSchema | None = schema
    while node is not None:
        if node is ancestor:
            return True
        node = _PARENT[node]
    return False


@dataclass(frozen=True)
class TableEdit:
    """Set ``delta[state, atom] = new_target`` in component ``agent``.

    ``agent`` is the component index in a multi-plan product; single-plan
    edits use 0.  ``new_target`` may be UNDEFINED (-1).
    """

    agent: int
    state: int
    atom: Atom
    new_target: int

    def key(self) -> tuple[int, int, int, int]:
        return (self.agent, self.state, self.atom, self.new_target)

    def to_dict(self, fsa: PlanFSA) -> dict:
        return {
            "agent": self.agent,
            "state": fsa.label(self.state),
            "atom": fsa.universe.atom_name(self.atom),
            "new_target": None if self.new_target == UNDEFINED else fsa.label(self.new_target),
        }

    @classmethod
    def from_dict(cls, doc: dict, fsa: PlanFSA) -> "TableEdit":
        """Resolve labels against ``fsa`` (the edited component)."""
        try:
            target = doc["new_target"]
            return cls(
                int(doc.get("agent", 0)),
                fsa.state_index(doc["state"]),
                fsa.universe.parse_atom(doc["atom"]),
                UNDEFINED if target is None else fsa.state_index(target),
            )
        except KeyError as exc:
            raise InputError(f"edit document is missing field {exc}") from None


@dataclass(frozen=True)
class AccessibilityEffect:
    can_increase_global: bool
    can_increase_local: bool
    can_decrease_global: bool
    can_decrease_local: bool


def _eff(ig: bool, il: bool, dg: bool, dl: bool) -> AccessibilityEffect:
    return AccessibilityEffect(ig, il, dg, dl)


# Flags for the two-step schemas: decreases come from the first step, and
# only an add as second step can increase accessibility in net.
_EFFECTS = {
    S.DELETE: _eff(False, False, True, True),
    S.SPEC: _eff(False, False, False, True),
    S.ADD: _eff(True, True, False, False),
    S.GEN: _eff(False, True, False, False),
    S.DELETE_OR_SPEC: _eff(False, False, True, True),
    S.ADD_OR_GEN: _eff(True, True, False, False),
    S.DELETE_ACTION: _eff(False, False, True, True),
    S.ADD_ACTION: _eff(True, True, False, False),
    S.DELETE_GEN: _eff(False, False, True, True),
    S.SPEC_GEN: _eff(False, False, False, True),
    S.STAY: _eff(False, False, True, True),
    S.DELETE_ADD: _eff(True, True, True, True),
    S.SPEC_ADD: _eff(True, True, False, True),
    S.MOVE: _eff(True, True, True, True),
    S.CHANGE: _eff(True, True, True, True),
}


def accessibility_effect(schema: OperatorSchema) -> AccessibilityEffect:
    return _EFFECTS[schema]


_PRIMITIVE_IMAGE = {
    S.SPEC: {S.SPEC, S.DELETE},
    S.DELETE: {S.SPEC, S.DELETE},
    S.GEN: {S.GEN, S.ADD},
    S.ADD: {S.GEN, S.ADD},
    S.STAY: {S.STAY, S.MOVE},
    S.MOVE: {S.MOVE},
    S.CHANGE: {S.CHANGE},
}
_TWO_STEP = {
    S.DELETE_ADD: (S.DELETE, S.ADD),
    S.SPEC_ADD: (S.SPEC, S.ADD),
    S.DELETE_GEN: (S.DELETE, S.GEN),
    S.SPEC_GEN: (S.SPEC, S.GEN),
}
_COMBINE = {v: k for k, v in _TWO_STEP.items()}


def translate_to_product(schema: OperatorSchema) -> frozenset[OperatorSchema]:
    """Schemas an individual-plan edit may become in the product plan."""
    if schema in _PRIMITIVE_IMAGE:
        return frozenset(_PRIMITIVE_IMAGE[schema])
    if schema in _TWO_STEP:
        first, second = _TWO_STEP[schema]
        return frozenset(
            _COMBINE[(a, b)] for a in _PRIMITIVE_IMAGE[first] for b in _PRIMITIVE_IMAGE[second]
        )
    if schema in (S.DELETE_OR_SPEC, S.DELETE_ACTION):
        return frozenset({S.DELETE, S.SPEC})
    return frozenset({S.ADD, S.GEN})


class Situation(enum.Enum):
    ONE_AGENT = "1agent"
    ONE_PLAN = "1plan"
    MULT_PLANS = "multplans"


class PropertyClass(enum.Enum):
    INVARIANCE = "invariance"
    RESPONSE = "response"


class Method(enum.Enum):
    INC_I_NI = "Inc_I-NI"
    INC_AT_NI = "Inc_AT-NI"
    INC_GEN_I = "Inc_gen-I"
    INC_GEN_R = "Inc_gen-R"
    TOTAL_I = "Total_I"
    TOTAL_AT = "Total_AT"


@dataclass(frozen=True)
class SafetyVerdict:
    """``method is None`` means no reverification is needed."""

    method: Method | None

    @property
    def none_needed(self) -> bool:
        return self.method is None

    def __str__(self) -> str:
        return "None" if self.method is None else self.method.value


NONE_NEEDED = SafetyVerdict(None)


def USE(method: Method) -> SafetyVerdict:  # noqa: N802 - reads like the table
    return SafetyVerdict(method)


_M = Method
_CHANGE_LIKE = (_M.INC_I_NI, _M.INC_AT_NI, _M.INC_I_NI, _M.INC_AT_NI)
_SAFE = (None, None, None, None)
# Columns: single plan + invariance, single plan + response,
# multiple plans + invariance, multiple plans + response.
_TABLE: dict[OperatorSchema, tuple[Method | None, ...]] = {
    S.CHANGE: _CHANGE_LIKE,
    S.DELETE: _SAFE,
    S.SPEC: _SAFE,
    S.ADD: _CHANGE_LIKE,
    S.GEN: (_M.INC_GEN_I, _M.INC_GEN_R, _M.INC_I_NI, _M.INC_AT_NI),
    S.DELETE_OR_SPEC: _SAFE,
    S.DELETE_ACTION: _SAFE,
    S.ADD_OR_GEN: _CHANGE_LIKE,
    S.MOVE: _CHANGE_LIKE,
    S.DELETE_ADD: _CHANGE_LIKE,
    S.SPEC_ADD: _CHANGE_LIKE,
    S.DELETE_GEN: (None, _M.INC_GEN_R, _M.INC_I_NI, _M.INC_AT_NI),
    S.SPEC_GEN: (None, _M.INC_GEN_R, _M.INC_I_NI, _M.INC_AT_NI),
    S.STAY: (None, _M.INC_AT_NI, _M.INC_I_NI, _M.INC_AT_NI),
    # Not tabulated: fall back to total reverification.
    S.ADD_ACTION: (_M.TOTAL_I, _M.TOTAL_AT, _M.TOTAL_I, _M.TOTAL_AT),
}


def sml_lookup(schema: OperatorSchema, situation: Situation, prop_class: PropertyClass) -> SafetyVerdict:
    """The fastest sufficient reverification method, or NONE_NEEDED."""
    col = (2 if situation is Situation.MULT_PLANS else 0) + (
        1 if prop_class is PropertyClass.RESPONSE else 0
    )
    return SafetyVerdict(_TABLE[schema][col])


_COST = {
    None: 0,
    _M.INC_GEN_I: 1,
    _M.INC_GEN_R: 1,
    _M.INC_I_NI: 2,
    _M.INC_AT_NI: 2,
    _M.TOTAL_I: 3,
    _M.TOTAL_AT: 3,
}


def most_favorable(
    schemas: Iterable[OperatorSchema], situation: Situation, prop_class: PropertyClass
) -> SafetyVerdict:
    """Cheapest table entry over every schema an edit instantiates."""
    verdicts = [sml_lookup(s, situation, prop_class) for s in schemas]
    if not verdicts:
        return NONE_NEEDED
    return min(verdicts, key=lambda v: _COST[v.method])


# ------------------------------------------------------------------ editing


def _check_edit(fsa: PlanFSA, edit: TableEdit) -> None:
    if not 0 <= edit.state < fsa.state_count:
        raise InputError(f"edit state {edit.state} out of range")
    if not 0 <= edit.atom < fsa.atom_count:
        raise InputError(f"edit atom {edit.atom} out of range")
    if edit.new_target != UNDEFINED and not 0 <= edit.new_target < fsa.state_count:
        raise InputError(f"edit target {edit.new_target} out of range")


def apply_edit(fsa: PlanFSA, edit: TableEdit) -> PlanFSA:
    """A copy of ``fsa`` with one table cell replaced.

    The result is always a plain :class:`PlanFSA`, also for product inputs.
    """
    _check_edit(fsa, edit)
    table = fsa.delta.copy()
    table[edit.state, edit.atom] = edit.new_target
    if type(fsa) is PlanFSA:
        # Labels, initial states and bad set are unchanged: share them.
        new = object.__new__(PlanFSA)
        new.__dict__.update(fsa.__dict__)
        table.flags.writeable = False
        new._delta = table
        new._provenance = None
        new.derived_from = fsa.provenance
        new._lazy_provenance = (new.derived_from, "edit", repr(edit.key()))
        return new
    provenance = _digest(fsa.provenance, "edit", repr(edit.key()))
    return PlanFSA(
        fsa.name,
        fsa.universe,
        fsa.states,
        fsa.initial,
        table,
        fsa.bad_mask,
        provenance=provenance,
        derived_from=fsa.provenance,
        validate=False,
    )


def apply_edits(fsa: PlanFSA, edits: Iterable[TableEdit]) -> PlanFSA:
    for e in edits:
        fsa = apply_edit(fsa, e)
    return fsa


def classify_edit(before: PlanFSA, edit: TableEdit) -> frozenset[OperatorSchema]:
    """Every schema this single-cell edit instantiates (empty for a no-op)."""
    _check_edit(before, edit)
    row = before.delta[edit.state]
    old = int(row[edit.atom])
    new = edit.new_target
    if old == new:
        return frozenset()
    out = {S.CHANGE}
    if old == UNDEFINED:
        second = S.GEN if (row == new).any() else S.ADD
        return frozenset(out | {second, S.ADD_OR_GEN})
    first = S.DELETE if int((row == old).sum()) == 1 else S.SPEC
    if new == UNDEFINED:
        return frozenset(out | {first, S.DELETE_OR_SPEC})
    second = S.GEN if (row == new).any() else S.ADD
    out |= {S.MOVE, _COMBINE[(first, second)]}
    if new == edit.state:
        out.add(S.STAY)
    return frozenset(out)


# ------------------------------------------------------------ random edits


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _candidates(fsa: PlanFSA, schema: OperatorSchema, targets: str) -> list[tuple[int, int, int]]:
    out: list[tuple[int, int, int]] = []
    n = fsa.state_count
    for v in range(n):
        row = fsa.delta[v]
        present = set(int(t) for t in row if t != UNDEFINED)
        counts = {t: int((row == t).sum()) for t in present}
        for a in range(fsa.atom_count):
            old = int(row[a])
            if old == UNDEFINED:
                if schema in (S.GEN, S.ADD_OR_GEN, S.CHANGE) and present:
                    pool = sorted(present) if schema is S.GEN else range(n)
                    out.extend((v, a, w) for w in pool)
                elif schema in (S.ADD, S.ADD_OR_GEN, S.CHANGE):
                    out.extend((v, a, w) for w in range(n) if w not in present)
                continue
            last = counts[old] == 1
            if schema is S.CHANGE:
                pool = [w for w in range(n) if w != old]
                if targets == "any":
                    pool.append(UNDEFINED)
                out.extend((v, a, w) for w in pool)
            elif schema is S.DELETE_OR_SPEC or (schema is S.DELETE and last) or (
                schema is S.SPEC and not last
            ):
                out.append((v, a, UNDEFINED))
            elif schema is S.MOVE:
                out.extend((v, a, w) for w in range(n) if w != old)
            elif schema is S.STAY:
                if old != v:
                    out.append((v, a, v))
            elif schema in _TWO_STEP:
                first, second = _TWO_STEP[schema]
                if last != (first is S.DELETE):
                    continue
                for w in range(n):
                    if w == old:
                        continue
                    if (w in present) == (second is S.GEN):
                        out.append((v, a, w))
    return out


def random_edit(fsa: PlanFSA, schema: OperatorSchema, seed=None, *, agent: int = 0,
                targets: str = "any") -> TableEdit:
    """Uniformly random single-cell edit instantiating ``schema``.

    ``targets="states"`` restricts CHANGE to defined targets.  Raises
    :class:`NoCandidate` when the schema cannot be instantiated.
    """
    if schema in (S.DELETE_ACTION, S.ADD_ACTION):
        raise InputError("action-level schemas are edit sequences; use random_action_edits")
    cands = _candidates(fsa, schema, targets)
    if not cands:
        raise NoCandidate(f"no {schema.value} edit exists in {fsa.name}")
    v, a, w = cands[int(_rng(seed).integers(len(cands)))]
    return TableEdit(agent, v, a, w)


def _own_atoms(fsa: PlanFSA, owner: int, action: int) -> list[int]:
    return list(AtomSet(fsa.universe, fsa.universe.action_mask(owner, action)))


def delete_action(fsa: PlanFSA, state: int, action: int, *, owner: int = 0, agent: int = 0) -> list[TableEdit]:
    """Edits removing one of the owner's actions from ``state``."""
    return [
        TableEdit(agent, state, a, UNDEFINED)
        for a in _own_atoms(fsa, owner, action)
        if fsa.delta[state, a] != UNDEFINED
    ]


def add_action(fsa: PlanFSA, state: int, action: int, target: int, *, owner: int = 0,
               agent: int = 0) -> list[TableEdit]:
    """Edits enabling one of the owner's actions at ``state`` towards ``target``."""
    return [
        TableEdit(agent, state, a, target)
        for a in _own_atoms(fsa, owner, action)
        if fsa.delta[state, a] == UNDEFINED
    ]


def random_action_edits(fsa: PlanFSA, schema: OperatorSchema, seed=None, *, owner: int = 0,
                        agent: int = 0) -> list[TableEdit]:
    """A random delete-action or add-action edit sequence."""
    rng = _rng(seed)
    n_actions = len(fsa.universe.alphabets[owner].actions)
    options = []
    for v in range(fsa.state_count):
        for j in range(n_actions):
            if schema is S.DELETE_ACTION:
                seq = delete_action(fsa, v, j, owner=owner, agent=agent)
                if seq:
                    options.append(seq)
            elif schema is S.ADD_ACTION:
                for w in range(fsa.state_count):
                    seq = add_action(fsa, v, j, w, owner=owner, agent=agent)
                    if seq:
                        options.append(seq)
            else:
                raise InputError(f"{schema.value} is not an action-level schema")
    if not options:
        raise NoCandidate(f"no {schema.value} edit exists in {fsa.name}")
    return options[int(rng.integers(len(options)))]
