import io
import json
from pathlib import Path

import numpy as np
import pytest

from planverify.automaton import dump_plan, load_plan
from planverify.cli import main
from planverify.errors import NoCandidate
from planverify.fixtures import rovers_property
from planverify.harness import GenConfig, gen_fsa
from planverify.operators import OperatorSchema as S, random_edit

GOLDEN = Path(__file__).parent / "golden" / "rovers_verify.json"


def run(*argv):
    buf = io.StringIO()
    code = main([str(a) for a in argv], out=buf)
    return code, buf.getvalue()


@pytest.fixture(scope="module")
def fx(tmp_path_factory):
    d = tmp_path_factory.mktemp("fx")
    code, out = run("fixture", "--out", d)
    assert code == 0 and out.count("wrote") == 9
    return d


def rovers(fx):
    return ["--plan", fx / "F.json", "--plan", fx / "I.json", "--plan", fx / "L.grid"]


def test_rovers_p1_total_passes(fx):
    code, out = run("verify", *rovers(fx), "--property", fx / "p1.prop", "--algorithm", "total")
    assert code == 0
    assert "P1: PASS by Total_I" in out


def test_rovers_p2_passes(fx):
    code, out = run("verify", *rovers(fx), "--property", fx / "p2.prop")
    assert code == 0 and "PASS by Total_AT" in out


def test_suite_failures_exit_one(fx):
    code, out = run("verify", *rovers(fx), "--property", fx / "rovers.prop", "--format", "csv")
    assert code == 1
    failing = {line.split(",")[0] for line in out.splitlines()[1:] if ",FAIL," in line}
    assert failing == {"I5", "R3"}


def test_json_output_matches_golden(fx):
    code, out = run("verify", *rovers(fx), "--property", fx / "rovers.prop", "--format", "json",
                    "--witnesses", 2)
    assert code == 1
    assert json.loads(out) == json.loads(GOLDEN.read_text())
    again = run("verify", *rovers(fx), "--property", fx / "rovers.prop", "--format", "json",
                "--witnesses", 2)[1]
    assert again == out


def test_unknown_action_exits_two(fx, tmp_path):
    doc = json.loads((fx / "F.json").read_text())
    state = next(iter(doc["delta"]))
    doc["delta"][state]["F-teleport/I-receive/L-pause"] = state
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    code, _ = run("verify", "--plan", bad, "--property", fx / "p1.prop")
    assert code == 2


@pytest.mark.parametrize("argv", [
    ["verify", "--property", "nope.prop"],
    ["verify", "--plan", "missing.json", "--property", "p.prop"],
    ["frobnicate"],
    ["recommend", "--operator", "warp", "--situation", "1plan", "--class", "response"],
])
def test_usage_errors_exit_two(argv):
    assert run(*argv)[0] == 2


def test_bad_property_text_exits_two(fx, tmp_path):
    p = tmp_path / "bad.prop"
    p.write_text("invariant !(F-collect & L-zzz)\n")
    assert run("verify", *rovers(fx), "--property", p)[0] == 2


@pytest.mark.parametrize("op,sit,cls,expect", [
    ("stay", "1plan", "invariance", "None"),
    ("gen", "1plan", "response", "Inc_gen-R"),
    ("gen", "1plan", "invariance", "Inc_gen-I"),
    ("change", "multplans", "response", "Inc_AT-NI"),
    ("delete", "multplans", "invariance", "None"),
])
def test_recommend(op, sit, cls, expect):
    code, out = run("recommend", "--operator", op, "--situation", sit, "--class", cls)
    assert code == 0 and out.strip() == expect


def test_stay_edit_is_avoided(fx):
    code, out = run("verify", "--plan", fx / "S1.json", "--property", fx / "p3.prop",
                    "--edit", fx / "stay_edit.json", "--situation", "1plan")
    assert code == 1
    assert "AVOID by Inc_gen-R" in out
    code, out = run("verify", "--plan", fx / "S1.json", "--property", fx / "p3.prop",
                    "--edit", fx / "stay_edit.json", "--algorithm", "total")
    assert code == 1 and "FAIL by Total_AT" in out
    code, out = run("oracle-check", "--plan", fx / "S1.json", "--property", fx / "p3.prop",
                    "--edit", fx / "stay_edit.json", "--algorithm", "total", "--full-response")
    assert code == 0 and "agree" in out


def test_oracle_check_on_rovers(fx):
    code, out = run("oracle-check", *rovers(fx), "--property", fx / "rovers.prop")
    assert code == 0
    assert out.count("agree") == 10 and "DISAGREE" not in out


def test_product_and_apply_op_round_trip(fx, tmp_path):
    code, out = run("product", *rovers(fx), "--out", tmp_path / "prod.json")
    assert code == 0 and "12 states" in out
    assert load_plan(tmp_path / "prod.json").state_count == 12
    code, out = run("apply-op", "--plan", fx / "S1.json", "--edit", fx / "stay_edit.json",
                    "--out", tmp_path / "S2.json")
    assert code == 0
    doc = json.loads(out)
    assert "stay" in doc["schemas"]
    (tmp_path / "e.json").write_text(out)
    code, again = run("apply-op", "--plan", fx / "S1.json", "--edit", tmp_path / "e.json")
    assert code == 0 and json.loads(again) == doc
    s2 = load_plan(tmp_path / "S2.json")
    assert s2.delta[1, 0] == 1
    code, out = run("apply-op", "--plan", fx / "S1.json", "--operator", "gen", "--seed", 3)
    assert code == 0 and "gen" in json.loads(out)["schemas"]


def test_context_cache_is_written_and_reused(fx, tmp_path):
    ctx = tmp_path / "ctx"
    args = ["verify", "--plan", fx / "S1.json", "--property", fx / "p3.prop", "--edit",
            fx / "stay_edit.json", "--algorithm", "incremental", "--context", ctx]
    first = run(*args)
    cached = sorted(p.name for p in tmp_path.iterdir())
    assert cached and all(n.startswith("ctx.") for n in cached)
    second = run(*args)
    assert first == second
    assert first[0] == 1


def test_experiment_smoke():
    code, out = run("experiment", "--protocol", "change", "--sizes", 3, "--trials", 1,
                    "--warmup", 0, "--format", "csv")
    assert code == 0
    assert len(out.strip().splitlines()) == 19


EXACT = {"None", "Total_I", "Total_AT", "Inc_I-NI", "Inc_AT-NI", "Inc_prod-NI+Inc_AT-NI", "Inc_gen-I"}


def test_auto_agrees_with_total(tmp_path):
    rng = np.random.default_rng(77)
    schemas = [S.CHANGE, S.GEN, S.DELETE, S.SPEC, S.STAY, S.MOVE, S.ADD, S.DELETE_GEN]
    checked = 0
    for trial in range(40):
        prop = rovers_property(["I1", "I3", "R1", "R2"][trial % 4])
        plan = gen_fsa(GenConfig(agent_count=1, states_per_agent=4, seed=trial), prop)
        schema = schemas[int(rng.integers(len(schemas)))]
        try:
            edit = random_edit(plan, schema, rng)
        except NoCandidate:
            continue
        dump_plan(plan, tmp_path / "p.json")
        (tmp_path / "prop.prop").write_text(f"{prop}\n")
        (tmp_path / "e.json").write_text(json.dumps(edit.to_dict(plan)))
        base = ["verify", "--plan", tmp_path / "p.json", "--property", tmp_path / "prop.prop",
                "--edit", tmp_path / "e.json", "--format", "json"]
        auto = json.loads(run(*base, "--algorithm", "auto")[1])["results"][0]
        total = json.loads(run(*base, "--algorithm", "total")[1])["results"][0]
        assert total["algorithm"].startswith("Total_")
        if auto["status"] == "PASS":
            assert total["status"] == "PASS", (schema, edit)
        if auto["algorithm"] in EXACT:
            assert (auto["status"] == "PASS") == (total["status"] == "PASS"), (schema, edit)
        checked += 1
    assert checked >= 30
