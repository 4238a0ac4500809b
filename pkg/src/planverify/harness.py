"""Random plan generation, the timing protocols, suite aggregation and the
evolutionary loop skeleton."""

from __future__ import annotations

import csv
import enum
import gc
import io
import statistics
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .algebra import ActionAlphabet, AtomSet, AtomUniverse
from .automaton import UNDEFINED, PlanFSA
from .checker import (
    ErrorMode, VerificationContext, Verdict, gen_condition_sets, inc_at_ni, inc_gen_i,
    inc_gen_r, inc_i_ni, new_initials_for_edit, total_at, total_i,
)
from .errors import NoCandidate, RetryCapExceeded
from .fixtures import ROVERS_PROPERTIES_TEXT, ROVERS_UNIVERSE, rovers_plans
from .operators import (
    Method, OperatorSchema, PropertyClass, Situation, TableEdit, apply_edit, random_edit,
    sml_lookup,
)
from .oracle import oracle_invariance, oracle_response
from .product import ProductFSA, inc_product, inc_product_ni, product_with_property, total_product
from .property import (
    InvarianceProperty, Property, ResponseProperty, load_properties, neg_fsa, parse_properties,
)

ALL = ErrorMode.ALL
FIRST = ErrorMode.FIRST


class Density(enum.Enum):
    DENSE = "dense"
    SPARSE = "sparse"


@dataclass(frozen=True)
class GenConfig:
    """Random plan generation settings.

    ``agent_count`` plans are generated, each over the full universe given by
    ``alphabets``.  Each plan has ``initial_states`` initial states (the
    lowest-numbered ones).
    """

    agent_count: int = 3
    states_per_agent: int = 8
    alphabets: tuple[ActionAlphabet, ...] = ROVERS_UNIVERSE.alphabets
    density: Density = Density.DENSE
    fill_probability: float = 0.3
    seed: int = 0
    initial_states: int = 1
    retry_cap: int = 10_000

    @property
    def universe(self) -> AtomUniverse:
        if self.alphabets == ROVERS_UNIVERSE.alphabets:
            return ROVERS_UNIVERSE
        return AtomUniverse(self.alphabets)


def _rng(*key: int) -> np.random.Generator:
    return np.random.default_rng([int(k) & 0xFFFFFFFF for k in key])


def holds(plan: PlanFSA, prop: Property) -> bool:
    """Total verification, stopping at the first error."""
    if isinstance(prop, InvarianceProperty):
        return total_i(plan, prop.p, FIRST, witnesses=0)[0].passed
    prod = product_with_property(plan, neg_fsa(prop), flatten=False)
    return total_at(prod, FIRST, witnesses=0)[0].passed


def _random_table(config: GenConfig, rng: np.random.Generator, blocked: np.ndarray | None) -> np.ndarray:
    n = config.states_per_agent
    atoms = len(blocked) if blocked is not None else config.universe.atom_count
    table = rng.integers(0, n, size=(n, atoms), dtype=np.int32)
    if config.density is Density.DENSE:
        table[:, blocked] = UNDEFINED
    else:
        table[rng.random((n, atoms)) >= config.fill_probability] = UNDEFINED
    return table


def _plan(config: GenConfig, table: np.ndarray, index: int) -> PlanFSA:
    n = config.states_per_agent
    return PlanFSA(
        f"A{index + 1}", config.universe, [f"s{k}" for k in range(n)],
        list(range(min(config.initial_states, n))), table,
    )


def gen_fsa(config: GenConfig, prop: Property, *, index: int = 0) -> PlanFSA:
    """One random plan satisfying ``prop``.

    Dense plans block every column of an atom in ``prop.blocked`` and fill
    every other cell uniformly.  Sparse plans are regenerated until total
    verification passes.
    """
    rng = _rng(config.seed, index)
    blocked = prop.blocked.to_mask()
    if config.density is Density.DENSE:
        return _plan(config, _random_table(config, rng, blocked), index)
    for _ in range(config.retry_cap):
        plan = _plan(config, _random_table(config, rng, blocked), index)
        if holds(plan, prop):
            return plan
    raise RetryCapExceeded(
        f"no sparse plan satisfying {prop} after {config.retry_cap} attempts "
        f"(states={config.states_per_agent}, fill={config.fill_probability})"
    )


def gen_team(config: GenConfig, prop: Property) -> list[PlanFSA]:
    """``agent_count`` plans whose product satisfies ``prop``."""
    if config.density is Density.DENSE:
        return [gen_fsa(config, prop, index=k) for k in range(config.agent_count)]
    rng = _rng(config.seed, 0x7EA)
    blocked = prop.blocked.to_mask()
    for _ in range(config.retry_cap):
        plans = [_plan(config, _random_table(config, rng, blocked), k) for k in range(config.agent_count)]
        if holds(total_product(plans) if len(plans) > 1 else plans[0], prop):
            return plans
    raise RetryCapExceeded(f"no sparse team satisfying {prop} after {config.retry_cap} attempts")


# ------------------------------------------------------------ edit sampling


def sample_change(plans: Sequence[PlanFSA], rng: np.random.Generator) -> tuple[int, TableEdit]:
    """Random agent, random table entry, new target a different state."""
    k = int(rng.integers(len(plans)))
    plan = plans[k]
    n = plan.state_count
    if n < 2:
        raise NoCandidate("a change needs at least two states")
    v = int(rng.integers(n))
    a = int(rng.integers(plan.atom_count))
    old = int(plan.delta[v, a])
    w = int(rng.integers(n - 1)) if old != UNDEFINED else int(rng.integers(n))
    if old != UNDEFINED and w >= old:
        w += 1
    return k, TableEdit(k, v, a, w)


def sample_gen(plan: PlanFSA, rng: np.random.Generator, attempts: int = 10_000) -> TableEdit:
    """Random state, random defined atom a_i, random undefined atom a_j;
    the edit sends a_j where a_i goes."""
    for _ in range(attempts):
        v = int(rng.integers(plan.state_count))
        row = plan.delta[v]
        defined = np.flatnonzero(row != UNDEFINED)
        empty = np.flatnonzero(row == UNDEFINED)
        if defined.size and empty.size:
            a_i = int(defined[rng.integers(defined.size)])
            a_j = int(empty[rng.integers(empty.size)])
            return TableEdit(0, v, a_j, int(row[a_i]))
    raise NoCandidate(f"no generalization found in {plan.name}")


# ----------------------------------------------------------------- trials


def _timed(fn, *args, **kwargs):
    # Collector pauses would swamp microsecond-scale timings.
    enabled = gc.isenabled()
    gc.disable()
    try:
        t0 = time.perf_counter()
        out = fn(*args, **kwargs)
        elapsed = time.perf_counter() - t0
    finally:
        if enabled:
            gc.enable()
    return out, elapsed


@dataclass(frozen=True)
class Row:
    number: int
    algorithm: str
    role: str  # "p", "v", "b" or "v+b"
    reference: int  # row holding the matching total algorithm
    verifies: bool


def _triples(start: int, check: str, inc: str) -> list[Row]:
    s = start
    tot = s + 6
    return [
        Row(s, "Inc_prod", "p", tot, False),
        Row(s + 1, f"Total_{check}", "v", tot + 1, True),
        Row(s + 2, f"Inc_{check}", "b", tot + 2, False),
        Row(s + 3, "Inc_prod-NI", "p", tot, False),
        Row(s + 4, inc, "v", tot + 1, True),
        Row(s + 5, inc, "b", tot + 2, False),
        Row(tot, "Total_prod", "p", tot, False),
        Row(tot + 1, f"Total_{check}", "v", tot + 1, True),
        Row(tot + 2, f"Total_{check}", "b", tot + 2, False),
    ]


CHANGE_ROWS = _triples(1, "I", "Inc_I-NI") + _triples(10, "AT", "Inc_AT-NI")
GEN_ROWS = [
    Row(1, "Inc_gen-I", "v+b", 3, True),
    Row(2, "Inc_I-NI", "v+b", 3, True),
    Row(3, "Total_I", "v+b", 3, True),
    Row(4, "Inc_gen-R", "v+b", 10, True),
    Row(5, "Inc_prod-NI", "p", 8, False),
    Row(6, "Inc_AT-NI", "v", 9, True),
    Row(7, "Inc_AT-NI", "b", 10, False),
    Row(8, "Total_prod", "p", 8, False),
    Row(9, "Total_AT", "v", 9, True),
    Row(10, "Total_AT", "b", 10, False),
]


@dataclass
class TrialReport:
    """Timings and error counts of one trial, keyed by table row number."""

    protocol: str
    prop_name: str
    prop_class: PropertyClass
    size: int
    seed: int
    edit: TableEdit
    timings: dict[int, float] = field(default_factory=dict)
    errors: dict[int, int] = field(default_factory=dict)
    agreement: dict[str, bool] = field(default_factory=dict)
    gen_r: tuple[bool, bool] | None = None  # (avoided, truly violated)

    @property
    def agrees(self) -> bool:
        return all(self.agreement.values())


def _class_of(prop: Property) -> PropertyClass:
    return prop.prop_class


def run_change_trial(config: GenConfig, prop: Property, seed: int) -> TrialReport:
    """Change one entry of one agent's plan and re-verify the product three ways.

    Pipelines: incremental product then total check; incremental product
    collecting new initials then incremental check; total product then total
    check.  All three see the same plans and the same edit.
    """
    cfg = replace(config, seed=seed)
    plans = gen_team(cfg, prop)
    rng = _rng(seed, 0xED17)
    k, edit = sample_change(plans, rng)
    edited = list(plans)
    edited[k] = apply_edit(plans[k], edit)
    invariance = isinstance(prop, InvarianceProperty)
    neg = [] if invariance else [neg_fsa(prop)]
    base = total_product([*plans, *neg])
    if invariance:
        v0, ctx = total_i(base, prop.p, ALL, witnesses=0)
    else:
        v0, ctx = total_at(base, ALL, witnesses=0)
    if not v0.passed:
        raise AssertionError("generated plans must satisfy the property before the edit")

    def check(prod):
        if invariance:
            return total_i(prod, prop.p, ALL, witnesses=0)[0]
        return total_at(prod, ALL, witnesses=0)[0]

    first = 1 if invariance else 10
    report = TrialReport("change", prop.name, _class_of(prop), cfg.states_per_agent, seed, edit)
    t = report.timings

    inc_base = base.copy()
    inc_prod, t[first] = _timed(inc_product, inc_base, k, edit)
    inc_verdict, t[first + 1] = _timed(check, inc_prod)
    t[first + 2] = t[first] + t[first + 1]

    ni_base, ni_ctx = base.copy(), ctx.copy()
    (ni_prod, new_init), t[first + 3] = _timed(inc_product_ni, ni_base, k, edit, ni_ctx)
    if invariance:
        (ni_verdict, _), t[first + 4] = _timed(inc_i_ni, ni_prod, prop.p, new_init, edit.atom, ni_ctx, ALL, witnesses=0)
    else:
        (ni_verdict, _), t[first + 4] = _timed(inc_at_ni, ni_prod, new_init, edit.atom, ni_ctx, ALL, witnesses=0)
    t[first + 5] = t[first + 3] + t[first + 4]

    tot_prod, t[first + 6] = _timed(total_product, [*edited, *neg])
    tot_verdict, t[first + 7] = _timed(check, tot_prod)
    t[first + 8] = t[first + 6] + t[first + 7]

    e = report.errors
    e[first + 1], e[first + 4], e[first + 7] = inc_verdict.err_count, ni_verdict.err_count, tot_verdict.err_count
    a = report.agreement
    a["inc_product_table"] = bool(np.array_equal(inc_prod.delta, tot_prod.delta))
    a["inc_product_ni_table"] = bool(np.array_equal(ni_prod.delta, tot_prod.delta))
    a["inc_verdict"] = inc_verdict.status == tot_verdict.status
    a["ni_verdict"] = ni_verdict.status == tot_verdict.status
    return report


def run_gen_trial(config: GenConfig, prop: Property, seed: int, *, oracle: bool = True) -> TrialReport:
    """Generalize one entry of the team's product plan and re-verify it.

    The product is treated as a single plan.  ``oracle`` adds a brute-force
    ground truth for the Inc_gen-R statistics.
    """
    cfg = replace(config, seed=seed)
    plans = gen_team(cfg, prop)
    plan = total_product(plans)
    rng = _rng(seed, 0x6E4)
    edit = sample_gen(plan, rng)
    after = apply_edit(plan, edit)
    invariance = isinstance(prop, InvarianceProperty)
    report = TrialReport("gen", prop.name, _class_of(prop), cfg.states_per_agent, seed, edit)
    t, e, a = report.timings, report.errors, report.agreement
    u = plan.universe
    z = AtomSet(u, 1 << edit.atom)

    if invariance:
        v0, ctx = total_i(plan, prop.p, ALL, witnesses=0)
        if not v0.passed:
            raise AssertionError("generated plans must satisfy the property before the edit")
        gen_v, t[1] = _timed(inc_gen_i, bool(ctx.visited[edit.state]), z, prop.p, FIRST)
        c = ctx.copy()

        def ni_check():
            roots = new_initials_for_edit(c, edit.state)
            return inc_i_ni(after, prop.p, roots, edit.atom, c, ALL, witnesses=0)[0]

        ni_v, t[2] = _timed(ni_check)
        tot_v, t[3] = _timed(lambda: total_i(after, prop.p, ALL, witnesses=0)[0])
        e[1], e[2], e[3] = gen_v.err_count, ni_v.err_count, tot_v.err_count
        a["gen_i_verdict"] = gen_v.passed == tot_v.passed
        a["ni_verdict"] = ni_v.status == tot_v.status
        if oracle:
            a["oracle"] = oracle_invariance(after, prop.p, bound=-1) == (not tot_v.passed)
        return report

    neg = neg_fsa(prop)
    prod = product_with_property(plan, neg, flatten=False)
    v0, ctx = total_at(prod, ALL, witnesses=0)
    if not v0.passed:
        raise AssertionError("generated plans must satisfy the property before the edit")

    def gen_check():
        y, zz = gen_condition_sets(after, edit.state, edit.atom)
        return inc_gen_r(y, zz, prop.p, prop.q, FIRST)

    gen_v, t[4] = _timed(gen_check)
    c = ctx.copy()
    (ni_prod, roots), t[5] = _timed(inc_product_ni, prod.copy(), 0, edit, c)
    (ni_v, _), t[6] = _timed(inc_at_ni, ni_prod, roots, edit.atom, c, ALL, witnesses=0)
    t[7] = t[5] + t[6]
    tot_prod, t[8] = _timed(product_with_property, after, neg, flatten=False)
    (tot_v, _), t[9] = _timed(total_at, tot_prod, ALL, witnesses=0)
    t[10] = t[8] + t[9]
    e[4], e[6], e[9] = gen_v.err_count, ni_v.err_count, tot_v.err_count
    a["inc_product_ni_table"] = bool(np.array_equal(ni_prod.delta, tot_prod.delta))
    a["ni_error_count"] = ni_v.err_count == tot_v.err_count
    truth = not tot_v.passed
    if oracle:
        first_only = oracle_response(after, prop.p, prop.q, True, bound=-1)
        a["oracle_first_response"] = first_only == truth
        # Generated plans are only guaranteed first-trigger Response; judge
        # Inc_gen-R against full Response when the plan satisfied it before.
        if not oracle_response(plan, prop.p, prop.q, False, bound=-1):
            truth = oracle_response(after, prop.p, prop.q, False, bound=-1)
    a["gen_r_sound"] = not (gen_v.passed and truth)
    report.gen_r = (not gen_v.passed, truth)
    return report


# ----------------------------------------------------------------- suites


@dataclass
class SuiteRow:
    table: str
    row: Row
    size: int
    times: list[float] = field(default_factory=list)
    errs: list[int] = field(default_factory=list)

    @property
    def mean(self) -> float:
        return statistics.fmean(self.times) if self.times else float("nan")

    @property
    def median(self) -> float:
        return statistics.median(self.times) if self.times else float("nan")

    @property
    def err(self) -> float | None:
        return statistics.fmean(self.errs) if self.row.verifies and self.errs else None


@dataclass
class SuiteReport:
    protocol: str
    trials: list[TrialReport]
    rows: list[SuiteRow]

    def row(self, size: int, number: int) -> SuiteRow:
        for r in self.rows:
            if r.size == size and r.row.number == number:
                return r
        raise KeyError((size, number))

    def spd(self, r: SuiteRow) -> float:
        ref = self.row(r.size, r.row.reference).mean
        return r.mean / ref if ref > 0 else float("nan")

    @property
    def disagreements(self) -> list[TrialReport]:
        return [t for t in self.trials if not t.agrees]

    def gen_r_stats(self, size: int | None = None) -> dict:
        """AVOID count, how many of those were unnecessary, and unsound passes."""
        pairs = [t.gen_r for t in self.trials if t.gen_r and (size is None or t.size == size)]
        avoided = [truth for av, truth in pairs if av]
        false_avoid = sum(1 for truth in avoided if not truth)
        return {
            "trials": len(pairs),
            "avoided": len(avoided),
            "false_errors": false_avoid,
            "false_error_rate": false_avoid / len(avoided) if avoided else 0.0,
            "unsound_passes": sum(1 for av, truth in pairs if not av and truth),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["table", "row", "algorithm", "role", "size", "mean_sec", "median_sec", "spd", "err"])
        for r in self.rows:
            err = r.err
            w.writerow([
                r.table, r.row.number, r.row.algorithm, r.row.role, r.size,
                f"{r.mean:.9f}", f"{r.median:.9f}", f"{self.spd(r):.6g}",
                "N/A" if err is None else f"{err:.4g}",
            ])
        return buf.getvalue()

    def to_text(self) -> str:
        sizes = sorted({r.size for r in self.rows})
        head = f"{'':>3} {'algorithm':<18}" + "".join(
            f" | {s:>3}-state sec{'':>4} median{'':>6} spd{'':>6} err" for s in sizes
        )
        lines = [f"protocol: {self.protocol}, trials: {len(self.trials)}", head]
        numbers = sorted({r.row.number for r in self.rows})
        for n in numbers:
            cells = []
            label = ""
            for s in sizes:
                try:
                    r = self.row(s, n)
                except KeyError:
                    cells.append(" | " + " " * 43)
                    continue
                label = f"{r.row.algorithm} {r.row.role}"
                err = r.err
                cells.append(
                    f" | {r.mean:>12.6f} {r.median:>12.6f} {self.spd(r):>9.3g} "
                    f"{'N/A' if err is None else f'{err:.3g}':>6}"
                )
            lines.append(f"{n:>3} {label:<18}" + "".join(cells))
        bad = self.disagreements
        lines.append(f"agreement failures: {len(bad)}")
        if self.protocol == "gen" and any(t.gen_r for t in self.trials):
            st = self.gen_r_stats()
            lines.append(
                f"Inc_gen-R: {st['avoided']}/{st['trials']} avoided, "
                f"false-error rate {st['false_error_rate']:.2f}, unsound passes {st['unsound_passes']}"
            )
        return "\n".join(lines) + "\n"


def _load_props(properties) -> list[Property]:
    if properties is None:
        return parse_properties(ROVERS_PROPERTIES_TEXT, ROVERS_UNIVERSE)
    if isinstance(properties, (str, Path)):
        return load_properties(properties, ROVERS_UNIVERSE)
    return list(properties)


def run_suite(
    trials: int,
    sizes: Iterable[int],
    properties=None,
    *,
    protocol: str = "change",
    config: GenConfig | None = None,
    seed: int = 0,
    warmup: int = 3,
    caps: dict[tuple[int, PropertyClass], int] | None = None,
    progress: Callable[[TrialReport], None] | None = None,
    oracle: bool = True,
) -> SuiteReport:
    """Run ``trials`` trials per property and size, serially, and aggregate.

    ``caps`` limits the total trial count of a (size, class) pair; trials
    are interleaved across properties so a cap spreads over all of them.
    The first ``warmup`` trials at the smallest size are run and discarded.
    """
    if protocol not in ("change", "gen"):
        raise ValueError(f"unknown protocol {protocol!r}")
    config = config or GenConfig()
    props = _load_props(properties)
    sizes = list(sizes)
    layout = CHANGE_ROWS if protocol == "change" else GEN_ROWS
    runner = run_change_trial if protocol == "change" else run_gen_trial
    kwargs = {} if protocol == "change" else {"oracle": oracle}

    for w in range(warmup):
        prop = props[w % len(props)]
        runner(replace(config, states_per_agent=min(sizes)), prop, 10_000_019 + w, **kwargs)

    rows = {(s, r.number): SuiteRow(protocol, r, s) for s in sizes for r in layout}
    reports = []
    for s in sizes:
        cfg = replace(config, states_per_agent=s)
        used: dict[PropertyClass, int] = {}
        for k in range(trials):
            for pi, prop in enumerate(props):
                cap = (caps or {}).get((s, prop.prop_class))
                if cap is not None and used.get(prop.prop_class, 0) >= cap:
                    continue
                used[prop.prop_class] = used.get(prop.prop_class, 0) + 1
                trial_seed = (seed * 1_000_003 + s * 10_007 + pi * 101 + k) & 0x7FFFFFFF
                rep = runner(cfg, prop, trial_seed, **kwargs)
                reports.append(rep)
                for num, sec in rep.timings.items():
                    rows[(s, num)].times.append(sec)
                for num, err in rep.errors.items():
                    rows[(s, num)].errs.append(err)
                if progress:
                    progress(rep)
    kept = [r for r in rows.values() if r.times]
    kept.sort(key=lambda r: (r.row.number, r.size))
    return SuiteReport(protocol, reports, kept)


# -------------------------------------------------------------- evolution


def defined_cells(plan: PlanFSA) -> float:
    """Placeholder fitness: number of defined table cells."""
    return float(np.count_nonzero(plan.delta != UNDEFINED))


FITNESS: dict[str, Callable[[PlanFSA], float]] = {"defined-cells": defined_cells}


@dataclass(frozen=True)
class EvolutionConfig:
    population_size: int = 4
    generations: int = 20
    fitness: str | Callable[[PlanFSA], float] = "defined-cells"
    operators: tuple[OperatorSchema, ...] = (OperatorSchema.GEN, OperatorSchema.CHANGE,
                                             OperatorSchema.DELETE, OperatorSchema.SPEC)
    situation: Situation = Situation.ONE_PLAN
    properties: str | None = None  # property file text; defaults to the rovers suite
    property_name: str = "I1"
    gen: GenConfig = GenConfig(agent_count=1, states_per_agent=6)
    seed: int = 0
    spot_check_every: int = 10


@dataclass(frozen=True)
class LogEntry:
    generation: int
    individual: int
    operator: str
    edit: tuple | None
    method: str
    outcome: str  # "applied", "reverted" or "skipped"


@dataclass
class _Individual:
    plans: list[PlanFSA]
    ctx: VerificationContext | None = None
    prod: ProductFSA | None = None  # maintained product for AT checks / multiple plans

    @property
    def plan(self) -> PlanFSA:
        return self.plans[0]


@dataclass
class EvolutionLog:
    entries: list[LogEntry]
    population: list[list[PlanFSA]]
    reverifications: int
    spot_checks: int
    spot_check_failures: int


def _whole(ind: _Individual) -> PlanFSA:
    return total_product(ind.plans) if len(ind.plans) > 1 else ind.plans[0]


def _fresh_ctx(ind: _Individual, prop: Property) -> None:
    invariance = isinstance(prop, InvarianceProperty)
    if invariance and len(ind.plans) == 1:
        ind.prod = None
        ind.ctx = total_i(ind.plan, prop.p, ALL, witnesses=0)[1]
        return
    if invariance:
        ind.prod = total_product(ind.plans)
        ind.ctx = total_i(ind.prod, prop.p, ALL, witnesses=0)[1]
    else:
        neg = neg_fsa(prop)
        ind.prod = total_product([*ind.plans, neg]) if len(ind.plans) > 1 else \
            product_with_property(ind.plan, neg, flatten=False)
        ind.ctx = total_at(ind.prod, ALL, witnesses=0)[1]


def _violated(plans: Sequence[PlanFSA], prop: Property) -> bool:
    plan = total_product(plans) if len(plans) > 1 else plans[0]
    if isinstance(prop, InvarianceProperty):
        return oracle_invariance(plan, prop.p, bound=-1)
    return oracle_response(plan, prop.p, prop.q, True, bound=-1)


def _try_edit(ind: _Individual, agent: int, edit: TableEdit, method: Method, prop: Property) -> bool:
    """Apply ``edit`` and re-verify with ``method``; True when it is kept."""
    new_plans = list(ind.plans)
    new_plans[agent] = apply_edit(ind.plans[agent], edit)
    invariance = isinstance(prop, InvarianceProperty)
    edit0 = TableEdit(agent, edit.state, edit.atom, edit.new_target)

    if method is Method.INC_GEN_I:
        z = AtomSet(prop.universe, 1 << edit.atom)
        ok = inc_gen_i(bool(ind.ctx.visited[edit.state]), z, prop.p).passed
        if ok:
            ind.plans = new_plans
            ind.ctx = None
        return ok
    if method is Method.INC_GEN_R:
        y, z = gen_condition_sets(new_plans[agent], edit.state, edit.atom)
        ok = inc_gen_r(y, z, prop.p, prop.q).passed
        if ok:
            ind.plans = new_plans
            ind.ctx = None
        return ok
    if method in (Method.TOTAL_I, Method.TOTAL_AT):
        ok = holds(total_product(new_plans) if len(new_plans) > 1 else new_plans[0], prop)
        if ok:
            ind.plans = new_plans
            ind.ctx = None
        return ok

    # Incremental new-initial methods.
    ctx = ind.ctx.copy()
    if invariance and ind.prod is None:
        roots = new_initials_for_edit(ctx, edit.state)
        verdict, ctx = inc_i_ni(new_plans[0], prop.p, roots, edit.atom, ctx, ALL, witnesses=0)
        new_prod = None
    else:
        new_prod, roots = inc_product_ni(ind.prod.copy(), edit0.agent, edit0, ctx)
        if invariance:
            verdict, ctx = inc_i_ni(new_prod, prop.p, roots, edit.atom, ctx, ALL, witnesses=0)
        else:
            verdict, ctx = inc_at_ni(new_prod, roots, edit.atom, ctx, ALL, witnesses=0)
    if not verdict.passed:
        return False
    ind.plans, ind.ctx, ind.prod = new_plans, ctx, new_prod
    return True


def evolve(config: EvolutionConfig) -> EvolutionLog:
    """Evolutionary loop skeleton with a-priori operator safety.

    Each generation every individual receives one operator.  Operators that
    need no reverification are applied directly; others are applied, checked
    with the recommended method, and reverted on failure.  The fittest
    individual then replaces the least fit.
    """
    fitness = FITNESS[config.fitness] if isinstance(config.fitness, str) else config.fitness
    props = parse_properties(config.properties, config.gen.universe) if config.properties else \
        parse_properties(ROVERS_PROPERTIES_TEXT, ROVERS_UNIVERSE)
    matches = [p for p in props if p.name == config.property_name]
    prop = matches[0] if matches else props[0]
    n_plans = 1 if config.situation is not Situation.MULT_PLANS else config.gen.agent_count
    pop = []
    for i in range(config.population_size):
        cfg = replace(config.gen, seed=config.seed * 7919 + i, agent_count=n_plans)
        pop.append(_Individual(gen_team(cfg, prop)))
    rng = np.random.default_rng(config.seed)
    entries: list[LogEntry] = []
    reverifications = spot_checks = spot_failures = 0
    for g in range(config.generations):
        for i, ind in enumerate(pop):
            schema = config.operators[int(rng.integers(len(config.operators)))]
            agent = int(rng.integers(len(ind.plans)))
            try:
                edit = random_edit(ind.plans[agent], schema, rng, agent=agent)
            except NoCandidate:
                entries.append(LogEntry(g, i, schema.value, None, "-", "skipped"))
                continue
            advice = sml_lookup(schema, config.situation, prop.prop_class)
            if advice.none_needed:
                ind.plans[agent] = apply_edit(ind.plans[agent], edit)
                ind.ctx = None
                entries.append(LogEntry(g, i, schema.value, edit.key(), "None", "applied"))
                continue
            if ind.ctx is None:
                _fresh_ctx(ind, prop)
            reverifications += 1
            kept = _try_edit(ind, agent, edit, advice.method, prop)
            entries.append(LogEntry(g, i, schema.value, edit.key(), advice.method.value,
                                    "applied" if kept else "reverted"))
        scores = [fitness(_whole(ind)) for ind in pop]
        best, worst = int(np.argmax(scores)), int(np.argmin(scores))
        if best != worst:
            pop[worst] = _Individual(list(pop[best].plans))
        if config.spot_check_every and (g + 1) % config.spot_check_every == 0:
            for ind in pop:
                spot_checks += 1
                spot_failures += _violated(ind.plans, prop)
    return EvolutionLog(entries, [ind.plans for ind in pop], reverifications, spot_checks, spot_failures)


def rovers_fixture() -> tuple[PlanFSA, PlanFSA, PlanFSA, str]:
    """Rover F, rover I, lander L and the rovers property suite text."""
    f, i, l = rovers_plans()
    return f, i, l, ROVERS_PROPERTIES_TEXT
