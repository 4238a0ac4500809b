"""Synchronous (tensor) product of plan automata, total and incremental."""

from __future__ import annotations

import itertools
import math
from typing import Sequence

import numpy as np

from . import _kernels
from .automaton import UNDEFINED, PlanFSA, _digest
from .errors import ContractViolation, InputError
from .operators import TableEdit, apply_edit


class _TupleLabels(Sequence):
    """Lazy product state labels: component labels joined with ','."""

    def __init__(self, components: Sequence[PlanFSA], sizes: tuple[int, ...]):
        self._components = components
        self._sizes = sizes
        self._n = math.prod(sizes)

    def __len__(self) -> int:
        return self._n

    def __getitem__(self, i):  # type: ignore[override]
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(self._n))]
        if not -self._n <= i < self._n:
            raise IndexError(i)
        digits = _decode(i % self._n, self._sizes)
        return ",".join(c.label(d) for c, d in zip(self._components, digits))


def _decode(index: int, sizes: Sequence[int]) -> tuple[int, ...]:
    out = []
    for r in reversed(sizes):
        index, d = divmod(index, r)
        out.append(d)
    return tuple(reversed(out))


class ProductFSA(PlanFSA):
    """A plan whose states are tuples of component states.

    The table is owned by exactly one live product: incremental updates
    write into it and mark the previous product as consumed.
    """

    def __init__(
        self,
        components: Sequence[PlanFSA],
        table: np.ndarray,
        initial: Sequence[int],
        bad_mask: np.ndarray,
        *,
        provenance: str,
        derived_from: str | None = None,
        stack: np.ndarray | None = None,
    ):
        self.components = tuple(components)
        self.sizes = tuple(c.state_count for c in self.components)
        name = "*".join(c.name for c in self.components)
        super().__init__(
            name,
            self.components[0].universe,
            _TupleLabels(self.components, self.sizes),
            initial,
            table,
            bad_mask,
            provenance=provenance,
            derived_from=derived_from,
            validate=False,
        )
        self._stack = stack if stack is not None else _stack_tables(self.components)
        self._sizes_arr = np.array(self.sizes, dtype=np.int64)
        self.consumed = False

    @property
    def provenance_names(self) -> list[str]:
        return [c.name for c in self.components]

    def component_states(self, state: int) -> tuple[int, ...]:
        return _decode(state, self.sizes)

    def index_of(self, component_states: Sequence[int]) -> int:
        if len(component_states) != len(self.sizes):
            raise InputError("wrong number of component states")
        idx = 0
        for d, r in zip(component_states, self.sizes):
            if not 0 <= d < r:
                raise InputError(f"component state {d} out of range")
            idx = idx * r + int(d)
        return idx

    def state_index(self, label):  # type: ignore[override]
        if isinstance(label, tuple):
            return self.index_of(label)
        if isinstance(label, str) and self.state_count > 20000:
            return self._parse_label(label)
        return super().state_index(label)

    def _parse_label(self, label: str) -> int:
        parts = label.split(",")
        # Only unambiguous when every component label is comma-free.
        if len(parts) != len(self.components):
            return super().state_index(label)
        return self.index_of([c.state_index(p) for c, p in zip(self.components, parts)])

    def _check_live(self) -> None:
        if self.consumed:
            raise ContractViolation(
                f"product {self.name} was consumed by an incremental update"
            )

    def _derive(self, components, stack: np.ndarray, provenance: tuple) -> "ProductFSA":
        """Successor sharing this product's table, labels and bad set."""
        new = object.__new__(ProductFSA)
        new.__dict__.update(self.__dict__)
        new.components = tuple(components)
        new._states = _TupleLabels(new.components, self.sizes)
        new.__dict__.pop("_label_lookup", None)
        new._stack = stack
        new._provenance = None
        new._lazy_provenance = provenance
        new.derived_from = self.provenance
        new.consumed = False
        return new

    def copy(self) -> "ProductFSA":
        """Independent product with its own table (for paired experiments)."""
        self._check_live()
        return ProductFSA(
            self.components,
            self._delta.copy(),
            self.initial,
            self._bad_mask,
            provenance=self.provenance,
            derived_from=self.derived_from,
            stack=self._stack,
        )


def _stack_tables(components: Sequence[PlanFSA]) -> np.ndarray:
    width = max(c.state_count for c in components)
    stack = np.full((len(components), width, components[0].atom_count), UNDEFINED, np.int32)
    for k, c in enumerate(components):
        stack[k, : c.state_count] = c.delta
    return stack


def total_product(components: Sequence[PlanFSA]) -> ProductFSA:
    """Form the full product table, one entry per (product state, atom)."""
    if not components:
        raise InputError("product needs at least one component")
    universe = components[0].universe
    for c in components[1:]:
        if c.universe != universe:
            raise InputError(f"{c.name} is over a different atom universe")
    if any(isinstance(c, ProductFSA) and c.consumed for c in components):
        raise ContractViolation("a component product was consumed")
    sizes = tuple(c.state_count for c in components)
    n = int(np.prod(sizes))
    stack = _stack_tables(components)
    table = np.empty((n, universe.atom_count), dtype=np.int32)
    _kernels.product_table(stack, np.array(sizes, dtype=np.int64), table)
    strides = [int(np.prod(sizes[k + 1:])) for k in range(len(sizes))]
    initial = [
        sum(d * s for d, s in zip(combo, strides))
        for combo in itertools.product(*(c.initial for c in components))
    ]
    bad = np.zeros(1, dtype=np.bool_)
    for c in components:
        bad = (bad[:, None] | c.bad_mask[None, :]).ravel()
    return ProductFSA(
        components,
        table,
        initial,
        bad,
        provenance=_digest("product", *(c.provenance for c in components)),
        stack=stack,
    )


def product_with_property(plan: PlanFSA, neg_prop: PlanFSA, *, flatten: bool = True) -> ProductFSA:
    """Product of a plan with a negated-property automaton as last component.

    A product plan contributes its own components unless ``flatten`` is false,
    in which case it is treated as a single plan (one-plan situation).
    """
    if not neg_prop.bad:
        raise InputError("negated-property automaton needs a non-empty bad set")
    if flatten and isinstance(plan, ProductFSA):
        plan._check_live()
        return total_product([*plan.components, neg_prop])
    return total_product([plan, neg_prop])


def _update(prev: ProductFSA, agent: int, edit: TableEdit, visited, collect: bool):
    prev._check_live()
    if not 0 <= agent < len(prev.components):
        raise ContractViolation(f"component index {agent} out of range")
    comp = prev.components[agent]
    if not 0 <= edit.state < comp.state_count or not 0 <= edit.atom < comp.atom_count:
        raise ContractViolation("edit cell is outside the edited component")
    if edit.new_target != UNDEFINED and not 0 <= edit.new_target < comp.state_count:
        raise ContractViolation("edit target is outside the edited component")
    if int(comp.delta[edit.state, edit.atom]) == edit.new_target:
        return prev, np.empty(0, dtype=np.int64)
    new_comp = apply_edit(comp, edit)
    stack = prev._stack.copy()
    stack[agent, edit.state, edit.atom] = edit.new_target
    table = prev._delta
    table.flags.writeable = True
    rows = prev.state_count // prev.sizes[agent]
    out_ni = np.empty(rows if collect else 0, dtype=np.int64)
    vis = visited if collect else np.zeros(0, dtype=np.uint8)
    count = _kernels.product_update(
        stack, prev._sizes_arr, table, agent, edit.state, edit.atom, vis, collect, out_ni
    )
    table.flags.writeable = False
    prev.consumed = True
    comps = list(prev.components)
    comps[agent] = new_comp
    provenance = (prev.provenance, "edit", str(agent), repr(edit.key()))
    return prev._derive(comps, stack, provenance), out_ni[:count]


def inc_product(prev: ProductFSA, agent: int, edit: TableEdit) -> ProductFSA:
    """Apply a single-cell component edit to a stored product.

    Only rows whose ``agent`` component is the edited state change, and only
    in the edited atom's column.  ``prev`` is consumed.  An edit that leaves
    the cell unchanged returns ``prev`` itself.
    """
    result, _ = _update(prev, agent, edit, None, False)
    return result


def inc_product_ni(prev: ProductFSA, agent: int, edit: TableEdit, ctx) -> tuple[ProductFSA, np.ndarray]:
    """Like :func:`inc_product`, also returning the new initial states.

    The new initials are the previously visited product states whose
    ``agent`` component is the edited state, in ascending index order.  They
    seed the next incremental check only; the product's own initial states
    are unchanged.
    """
    if ctx.target_id != prev.provenance:
        raise ContractViolation("verification context does not belong to this product")
    if ctx.visited.shape[0] != prev.state_count:
        raise ContractViolation("verification context has the wrong state count")
    return _update(prev, agent, edit, ctx.visited, True)
