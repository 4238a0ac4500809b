"""Command-line front end.

Exit status: 0 on PASS or success, 1 on FAIL/AVOID (or oracle
disagreement), 2 on malformed input or usage errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import fixtures
from .algebra import AtomSet
from .automaton import PlanFSA, dump_plan, grid_text, load_plan
from .checker import (
    ErrorMode, Status, VerificationContext, Verdict, gen_condition_sets, inc_at_ni, inc_gen_i,
    inc_gen_r, inc_i_ni, new_initials_for_edit, total_at, total_i,
)
from .errors import ContractViolation, InputError, NoCandidate, OracleBoundExceeded, RetryCapExceeded
from .operators import (
    Method, OperatorSchema, PropertyClass, Situation, TableEdit, apply_edit, classify_edit,
    most_favorable, random_edit, sml_lookup,
)
from .oracle import oracle_invariance, oracle_response
from .product import ProductFSA, inc_product_ni, product_with_property, total_product
from .property import InvarianceProperty, Property, load_properties, neg_fsa

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ loading


def _load_plans(paths: Sequence[str]) -> list[PlanFSA]:
    if not paths:
        raise UsageError("at least one --plan is required")
    plans = [load_plan(p) for p in paths]
    for p in plans[1:]:
        if p.universe != plans[0].universe:
            raise InputError(f"{p.name} is over a different set of agents and actions")
    return plans


def _whole(plans: list[PlanFSA]) -> PlanFSA:
    return plans[0] if len(plans) == 1 else total_product(plans)


def _situation(args, plans) -> Situation:
    if args.situation:
        return Situation(args.situation)
    if len(plans) > 1:
        return Situation.MULT_PLANS
    return Situation.ONE_AGENT if plans[0].universe.agent_count == 1 else Situation.ONE_PLAN


def _mode(args) -> ErrorMode:
    return ErrorMode.ALL if args.all_errors else ErrorMode.FIRST


# ---------------------------------------------------------------- checking


@dataclass
class Outcome:
    prop: Property
    algorithm: str
    verdict: Verdict
    report_fsa: PlanFSA | None
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "property": self.prop.name,
            "text": str(self.prop),
            "class": self.prop.prop_class.value,
            "algorithm": self.algorithm,
            "note": self.note,
            **self.verdict.to_dict(self.report_fsa),
        }


def _total(plan: PlanFSA, prop: Property, mode, witnesses: int) -> tuple[Verdict, VerificationContext, PlanFSA, str]:
    if isinstance(prop, InvarianceProperty):
        v, ctx = total_i(plan, prop.p, mode, witnesses=witnesses)
        return v, ctx, plan, "Total_I"
    prod = product_with_property(plan, neg_fsa(prop), flatten=False)
    v, ctx = total_at(prod, mode, witnesses=witnesses)
    return v, ctx, prod, "Total_AT"


def _total_multi(plans: list[PlanFSA], prop: Property, mode, witnesses: int):
    """Like :func:`_total` but keeps each plan as its own product component."""
    if isinstance(prop, InvarianceProperty):
        prod = total_product(plans)
        v, ctx = total_i(prod, prop.p, mode, witnesses=witnesses)
        return v, ctx, prod, "Total_I"
    prod = total_product([*plans, neg_fsa(prop)])
    v, ctx = total_at(prod, mode, witnesses=witnesses)
    return v, ctx, prod, "Total_AT"


def _pre_fsa(plans: list[PlanFSA], target: PlanFSA, prop: Property, multi: bool) -> PlanFSA:
    """The structure the pre-edit check runs on (plan or product)."""
    invariance = isinstance(prop, InvarianceProperty)
    if multi:
        return total_product(plans if invariance else [*plans, neg_fsa(prop)])
    if invariance:
        return target
    return product_with_property(target, neg_fsa(prop), flatten=False)


def _context(args, prop: Property, fsa: PlanFSA) -> tuple[bool, VerificationContext]:
    """Pre-edit (passed, ctx), reusing the --context cache when it matches."""
    invariance = isinstance(prop, InvarianceProperty)
    cache = None
    if args.context:
        path = Path(args.context)
        cache = path.with_name(f"{path.stem}.{prop.name or 'prop'}.npz")
        if cache.exists():
            try:
                cached = VerificationContext.load(cache)
            except (OSError, ValueError, KeyError, SyntaxError):
                cached = None
            key = ("invariance", prop.p.mask) if invariance else ("accepting",)
            if cached is not None and cached.target_id == fsa.provenance and \
                    cached.property_key == key and cached.visited.shape[0] == fsa.state_count \
                    and cached.last_verdict is not None:
                return cached.last_verdict.passed, cached
    if invariance:
        verdict, ctx = total_i(fsa, prop.p, ErrorMode.ALL, witnesses=0)
    else:
        verdict, ctx = total_at(fsa, ErrorMode.ALL, witnesses=0)
    if cache is not None:
        ctx.save(cache)
    return verdict.passed, ctx


def _check_edit(args, plans: list[PlanFSA], prop: Property, edit_doc: dict, situation: Situation,
                algorithm: str) -> Outcome:
    mode = _mode(args)
    w = args.witnesses
    multi = situation is Situation.MULT_PLANS and len(plans) > 1
    if multi:
        agent = int(edit_doc.get("agent", 0))
        if not 0 <= agent < len(plans):
            raise InputError(f"edit agent {agent} out of range (have {len(plans)} plans)")
        edit = TableEdit.from_dict(edit_doc, plans[agent])
        edited_plans = list(plans)
        edited_plans[agent] = apply_edit(plans[agent], edit)
        target_before = plans[agent]
    else:
        whole = _whole(plans)
        edit = TableEdit.from_dict({**edit_doc, "agent": 0}, whole)
        target_before = whole
        edited_plans = None
    schemas = classify_edit(target_before, edit)
    if not schemas:
        v, _, fsa, name = _total(_whole(plans), prop, mode, w)
        return Outcome(prop, name, v, fsa, "edit leaves the plan unchanged")

    def total_after() -> Outcome:
        if multi:
            v, _, fsa, name = _total_multi(edited_plans, prop, mode, w)
        else:
            v, _, fsa, name = _total(apply_edit(target_before, edit), prop, mode, w)
        return Outcome(prop, name, v, fsa)

    if algorithm == "total":
        return total_after()

    method: Method | None
    if algorithm == "auto":
        advice = most_favorable(schemas, situation, prop.prop_class)
        method = advice.method
    elif algorithm == "gen":
        if multi or OperatorSchema.GEN not in schemas:
            raise UsageError("--algorithm gen needs a generalization edit on a single plan")
        method = Method.INC_GEN_I if isinstance(prop, InvarianceProperty) else Method.INC_GEN_R
    else:
        method = Method.INC_I_NI if isinstance(prop, InvarianceProperty) else Method.INC_AT_NI

    if method is None and args.assume_pass:
        names = ", ".join(sorted(s.value for s in schemas))
        return Outcome(prop, "None", Verdict(Status.PASS), None,
                       f"no reverification needed ({names}); pre-edit plan assumed to pass")
    pre_fsa = _pre_fsa(plans, target_before, prop, multi)
    pre_passed, ctx = _context(args, prop, pre_fsa)
    if not pre_passed:
        out = total_after()
        out.note = "pre-edit plan violates the property; ran total verification"
        return out
    if method is None:
        names = ", ".join(sorted(s.value for s in schemas))
        return Outcome(prop, "None", Verdict(Status.PASS), None,
                       f"no reverification needed ({names})")
    if method in (Method.TOTAL_I, Method.TOTAL_AT):
        return total_after()
    if method is Method.INC_GEN_I:
        z = AtomSet(prop.universe, 1 << edit.atom)
        v = inc_gen_i(bool(ctx.visited[edit.state]), z, prop.p, mode)
        return Outcome(prop, method.value, v, target_before)
    if method is Method.INC_GEN_R:
        y, z = gen_condition_sets(apply_edit(target_before, edit), edit.state, edit.atom)
        return Outcome(prop, method.value, inc_gen_r(y, z, prop.p, prop.q, mode), target_before)

    # New-initial incremental checks.
    if isinstance(pre_fsa, ProductFSA) and (multi or not isinstance(prop, InvarianceProperty)):
        new_prod, roots = inc_product_ni(pre_fsa, edit.agent if multi else 0, edit, ctx)
        if isinstance(prop, InvarianceProperty):
            v, _ = inc_i_ni(new_prod, prop.p, roots, edit.atom, ctx, mode, witnesses=w)
        else:
            v, _ = inc_at_ni(new_prod, roots, edit.atom, ctx, mode, witnesses=w)
        name = "Inc_I-NI" if isinstance(prop, InvarianceProperty) else "Inc_AT-NI"
        return Outcome(prop, f"Inc_prod-NI+{name}", v, new_prod)
    after = apply_edit(target_before, edit)
    roots = new_initials_for_edit(ctx, edit.state)
    v, _ = inc_i_ni(after, prop.p, roots, edit.atom, ctx, mode, witnesses=w)
    return Outcome(prop, "Inc_I-NI", v, after)


def _outcomes(args) -> tuple[list[Outcome], list[PlanFSA]]:
    plans = _load_plans(args.plan)
    if not args.property:
        raise UsageError("--property is required")
    props = load_properties(args.property, plans[0].universe)
    if args.property_name:
        props = [p for p in props if p.name in args.property_name]
        if not props:
            raise UsageError("no property matches --property-name")
    situation = _situation(args, plans)
    edit_doc = None
    if args.edit:
        try:
            edit_doc = json.loads(Path(args.edit).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read edit file {args.edit}: {exc}") from None
        if isinstance(edit_doc, dict) and isinstance(edit_doc.get("edit"), dict):
            edit_doc = edit_doc["edit"]  # apply-op output
        if not isinstance(edit_doc, dict):
            raise InputError("edit file must hold one JSON object")
    elif args.algorithm in ("incremental", "gen"):
        raise UsageError(f"--algorithm {args.algorithm} needs --edit")
    out = []
    for prop in props:
        if edit_doc is None:
            v, _, fsa, name = _total(_whole(plans), prop, _mode(args), args.witnesses)
            out.append(Outcome(prop, name, v, fsa))
        else:
            out.append(_check_edit(args, plans, prop, edit_doc, situation, args.algorithm))
    return out, plans


def _print_outcomes(outcomes: list[Outcome], fmt: str, out) -> None:
    if fmt == "json":
        json.dump({"results": [o.to_dict() for o in outcomes]}, out, indent=2, sort_keys=True)
        out.write("\n")
        return
    if fmt == "csv":
        w = csv.writer(out)
        w.writerow(["property", "algorithm", "status", "error_count"])
        for o in outcomes:
            w.writerow([o.prop.name, o.algorithm, o.verdict.status.value, o.verdict.err_count])
        return
    for o in outcomes:
        note = f"  [{o.note}]" if o.note else ""
        out.write(f"{o.prop.name}: {o.verdict.status.value} by {o.algorithm}  ({o.prop}){note}\n")
        for e in o.verdict.errors:
            d = e.to_dict(o.report_fsa)
            where = " ".join(f"{k}={d[k]}" for k in ("state", "atom") if d.get(k) is not None)
            out.write(f"  {d['kind']} {where}".rstrip() + "\n")
            if d.get("stem") is not None:
                out.write("    stem: " + _steps(d["stem"]) + "\n")
            if d.get("cycle") is not None:
                out.write("    cycle: " + _steps(d["cycle"]) + "\n")


def _steps(steps) -> str:
    if not steps:
        return "(empty)"
    return " ".join(f"{s['state']} -{s['atom']}->" for s in steps)


# ---------------------------------------------------------------- commands


def cmd_verify(args, out) -> int:
    outcomes, _ = _outcomes(args)
    _print_outcomes(outcomes, args.format, out)
    return EXIT_OK if all(o.verdict.passed for o in outcomes) else EXIT_FAIL


def cmd_oracle_check(args, out) -> int:
    outcomes, plans = _outcomes(args)
    plan = _whole(plans)
    if args.edit:
        # Compare against the edited plan.
        doc = json.loads(Path(args.edit).read_text())
        situation = _situation(args, plans)
        if situation is Situation.MULT_PLANS and len(plans) > 1:
            k = int(doc.get("agent", 0))
            edited = list(plans)
            edited[k] = apply_edit(plans[k], TableEdit.from_dict(doc, plans[k]))
            plan = _whole(edited)
        else:
            plan = apply_edit(plan, TableEdit.from_dict({**doc, "agent": 0}, plan))
    rows = []
    disagree = 0
    for o in outcomes:
        p = o.prop
        if isinstance(p, InvarianceProperty):
            violated = oracle_invariance(plan, p.p, bound=args.bound)
        else:
            violated = oracle_response(plan, p.p, p.q, not args.full_response, bound=args.bound)
        checker_fail = not o.verdict.passed
        agree = violated == checker_fail
        # Incomplete checkers may report false errors; that is not a disagreement in soundness.
        disagree += not agree
        rows.append({
            "property": p.name, "algorithm": o.algorithm, "checker": o.verdict.status.value,
            "oracle": "violated" if violated else "holds", "agree": agree,
        })
    if args.format == "json":
        json.dump({"results": rows}, out, indent=2, sort_keys=True)
        out.write("\n")
    else:
        for r in rows:
            word = "agree" if r["agree"] else "DISAGREE"
            out.write(f"{r['property']}: {word} (checker {r['algorithm']} {r['checker']}, oracle {r['oracle']})\n")
    return EXIT_OK if disagree == 0 else EXIT_FAIL


def cmd_product(args, out) -> int:
    plans = _load_plans(args.plan)
    prod = _whole(plans)
    if args.out:
        path = Path(args.out)
        if path.suffix == ".grid":
            path.write_text(grid_text(prod))
        else:
            dump_plan(prod, path)
    out.write(f"{prod.name}: {prod.state_count} states, {prod.atom_count} atoms, "
              f"{len(prod.initial)} initial\n")
    return EXIT_OK


def cmd_apply_op(args, out) -> int:
    plans = _load_plans(args.plan)
    if len(plans) != 1:
        raise UsageError("apply-op edits exactly one --plan")
    plan = plans[0]
    if args.edit:
        doc = json.loads(Path(args.edit).read_text())
        if isinstance(doc, dict) and isinstance(doc.get("edit"), dict):
            doc = doc["edit"]
        edit = TableEdit.from_dict({**doc, "agent": 0}, plan)
    elif args.operator:
        edit = random_edit(plan, OperatorSchema.parse(args.operator), args.seed)
    else:
        raise UsageError("apply-op needs --edit or --operator")
    after = apply_edit(plan, edit)
    if args.out:
        path = Path(args.out)
        if path.suffix == ".grid":
            path.write_text(grid_text(after))
        else:
            dump_plan(after, path)
    doc = {"edit": edit.to_dict(plan),
           "schemas": sorted(s.value for s in classify_edit(plan, edit))}
    json.dump(doc, out, indent=2, sort_keys=True)
    out.write("\n")
    return EXIT_OK


def cmd_recommend(args, out) -> int:
    verdict = sml_lookup(OperatorSchema.parse(args.operator), Situation(args.situation),
                         PropertyClass(args.prop_class))
    out.write(f"{verdict}\n")
    return EXIT_OK


def cmd_experiment(args, out) -> int:
    from .harness import GenConfig, Density, run_suite

    cfg = GenConfig(states_per_agent=args.sizes[0], density=Density(args.density),
                    fill_probability=args.fill)
    caps = None
    if args.cap_response is not None:
        caps = {(s, PropertyClass.RESPONSE): args.cap_response for s in args.sizes}
    report = run_suite(args.trials, args.sizes, args.property, protocol=args.protocol, config=cfg,
                       seed=args.seed or 0, warmup=args.warmup, caps=caps)
    if args.format == "csv":
        out.write(report.to_csv())
    elif args.format == "json":
        rows = list(csv.DictReader(io.StringIO(report.to_csv())))
        json.dump({"protocol": report.protocol, "trials": len(report.trials),
                   "agreement_failures": len(report.disagreements), "rows": rows,
                   **({"gen_r": report.gen_r_stats()} if args.protocol == "gen" else {})},
                  out, indent=2, sort_keys=True)
        out.write("\n")
    else:
        out.write(report.to_text())
    return EXIT_OK if not report.disagreements else EXIT_FAIL


def cmd_fixture(args, out) -> int:
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    f, i, l = fixtures.rovers_plans()
    dump_plan(f, d / "F.json")
    dump_plan(i, d / "I.json")
    (d / "L.grid").write_text(grid_text(l))
    (d / "rovers.prop").write_text(fixtures.ROVERS_PROPERTIES_TEXT)
    (d / "p1.prop").write_text(fixtures.P1_TEXT + "\n")
    (d / "p2.prop").write_text(fixtures.P2_TEXT + "\n")
    s1 = fixtures.stay_example()
    dump_plan(s1, d / "S1.json")
    (d / "p3.prop").write_text(fixtures.P3_TEXT + "\n")
    (d / "stay_edit.json").write_text(json.dumps(fixtures.stay_edit().to_dict(s1), indent=2) + "\n")
    for name in ("F.json", "I.json", "L.grid", "rovers.prop", "p1.prop", "p2.prop",
                 "S1.json", "p3.prop", "stay_edit.json"):
        out.write(f"wrote {d / name}\n")
    return EXIT_OK


# ------------------------------------------------------------------ parser


def _add_check_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--plan", action="append", default=[], help="plan file (JSON or grid); repeat for a product")
    p.add_argument("--property", help="property file")
    p.add_argument("--property-name", action="append", help="only check these named properties")
    p.add_argument("--situation", choices=[s.value for s in Situation])
    p.add_argument("--algorithm", choices=["auto", "total", "incremental", "gen"], default="auto",
                   help="re-check method after --edit (default auto: consult the safe-operator table)")
    p.add_argument("--edit", help="edit file {agent, state, atom, new_target}")
    p.add_argument("--context", help="cache file for the pre-edit visited flags")
    p.add_argument("--seed", type=int)
    p.add_argument("--format", choices=["text", "json", "csv"], default="text")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--all-errors", dest="all_errors", action="store_true", default=True)
    g.add_argument("--first-error", dest="all_errors", action="store_false")
    p.add_argument("--witnesses", type=int, default=10, help="witness paths to extract (default 10)")
    p.add_argument("--assume-pass", action="store_true",
                   help="trust that the pre-edit plans satisfy the property (skips the pre-edit check "
                        "when no reverification is needed)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="planverify", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="check plans against properties")
    _add_check_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("oracle-check", help="compare a checker with the brute-force oracle")
    _add_check_flags(p)
    p.add_argument("--bound", type=int, default=5000, help="oracle state bound (-1 for none)")
    p.add_argument("--full-response", action="store_true",
                   help="compare Response checks against full rather than first-trigger semantics")
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("product", help="form the synchronous product of plans")
    p.add_argument("--plan", action="append", default=[])
    p.add_argument("--out")
    p.set_defaults(func=cmd_product)

    p = sub.add_parser("apply-op", help="apply an edit (or a random operator) to a plan")
    p.add_argument("--plan", action="append", default=[])
    p.add_argument("--edit")
    p.add_argument("--operator")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_apply_op)

    p = sub.add_parser("recommend", help="print the reverification method for an operator")
    p.add_argument("--operator", required=True)
    p.add_argument("--situation", required=True, choices=[s.value for s in Situation])
    p.add_argument("--class", dest="prop_class", required=True, choices=[c.value for c in PropertyClass])
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("experiment", help="run a timing suite")
    p.add_argument("--protocol", choices=["change", "gen"], default="change")
    p.add_argument("--sizes", type=int, nargs="+", default=[8, 15])
    p.add_argument("--trials", type=int, default=6, help="trials per property and size")
    p.add_argument("--property", help="property file (default: rovers suite)")
    p.add_argument("--density", choices=["dense", "sparse"], default="dense")
    p.add_argument("--fill", type=float, default=0.3)
    p.add_argument("--seed", type=int)
    p.add_argument("--warmup", type=int, default=3)
    p.add_argument("--cap-response", type=int, help="max Response trials per size, over all Response properties")
    p.add_argument("--format", choices=["text", "json", "csv"], default="text")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("fixture", help="write the rovers fixture files")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fixture)
    return parser


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args, out)
    except (InputError, UsageError, ContractViolation, NoCandidate, OracleBoundExceeded,
            RetryCapExceeded, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"planverify: error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
