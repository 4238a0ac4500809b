import numpy as np
import pytest

from planverify.algebra import lift_action, meet
from planverify.automaton import UNDEFINED, is_complete
from planverify.errors import ParseError
from planverify.fixtures import rovers_plans
from planverify.oracle import accepts_lasso, lasso_emptiness, oracle_invariance, oracle_response
from planverify.product import product_with_property, total_product
from planverify.property import (
    InvarianceProperty,
    ResponseProperty,
    load_properties,
    neg_first_response_fsa,
    neg_invariance_fsa,
    parse_properties,
    parse_property,
)

from conftest import ROVERS, random_atomset, random_plan


def atoms(*names):
    return ROVERS.atom_set(ROVERS.parse_atom(n) for n in names)


def test_parse_p1():
    prop = parse_property("invariant !(I-deliver & L-transmit)", ROVERS)
    assert isinstance(prop, InvarianceProperty)
    assert prop.p == atoms("cdt", "ddt")


def test_parse_conjunctive_response():
    prop = parse_property("response F-deliver => I-receive & L-receive", ROVERS)
    assert isinstance(prop, ResponseProperty) and not prop.first_only
    assert prop.p == lift_action(ROVERS, "F-deliver")
    assert prop.q == meet(lift_action(ROVERS, "I-receive"), lift_action(ROVERS, "L-receive"))


def test_parse_disjunction_and_first_response():
    prop = parse_property("first-response F-deliver | L-pause => (I-receive & L-receive)", ROVERS)
    assert prop.first_only
    assert prop.p == lift_action(ROVERS, "F-deliver") | lift_action(ROVERS, "L-pause")


@pytest.mark.parametrize("text", [
    "invariant !()",
    "invariant (I-deliver)",
    "response F-deliver =>",
    "response F-deliver L-receive",
    "invariant !(I-deliver & L-fly)",
    "eventually F-deliver",
])
def test_parse_errors_carry_a_position(text):
    with pytest.raises(ParseError) as info:
        parse_property(text, ROVERS)
    assert 0 <= info.value.position <= len(text)


def test_suite_file_has_ten_named_properties(suite):
    assert [p.name for p in suite] == [f"I{k}" for k in range(1, 6)] + [f"R{k}" for k in range(1, 6)]
    assert sum(isinstance(p, InvarianceProperty) for p in suite) == 5


def test_property_file_comments_and_names(tmp_path):
    path = tmp_path / "x.prop"
    path.write_text("# comment\n\nA: invariant !(F-collect)\nresponse F-collect => L-pause\n")
    props = load_properties(path, ROVERS)
    assert [p.name for p in props][0] == "A"
    assert len(props) == 2 and props[1].name


def test_parse_properties_reports_line_offsets():
    with pytest.raises(ParseError):
        parse_properties("invariant !(F-collect)\ninvariant !(F-nope)\n", ROVERS)


def test_neg_invariance_shape():
    prop = parse_property("invariant !(I-deliver & L-transmit)", ROVERS)
    neg = neg_invariance_fsa(prop)
    assert neg.state_count == 2 and neg.initial == (0,) and neg.bad == {1}
    assert is_complete(neg)
    for a in range(12):
        assert neg.delta[0, a] == (1 if a in prop.p else 0)
        assert neg.delta[1, a] == 1


def test_neg_invariance_accepts_strings_with_forbidden_atom():
    prop = parse_property("invariant !(I-deliver & L-transmit)", ROVERS)
    neg = neg_invariance_fsa(prop)
    crt, cdt = ROVERS.parse_atom("crt"), ROVERS.parse_atom("cdt")
    assert accepts_lasso(neg, [crt, cdt], [crt])
    assert not accepts_lasso(neg, [crt], [crt])


def test_neg_invariance_empty_p_has_empty_language():
    neg = neg_invariance_fsa(InvarianceProperty(ROVERS.empty()))
    assert not lasso_emptiness(neg)


def test_neg_first_response_shape():
    prop = ResponseProperty(atoms("crt", "drt", "crr"), atoms("crr", "drr"))
    neg = neg_first_response_fsa(prop)
    assert neg.state_count == 2 and neg.bad == {1}
    for a in range(12):
        if a in prop.p and a in prop.q:
            assert neg.delta[0, a] == UNDEFINED
        elif a in prop.p:
            assert neg.delta[0, a] == 1
        else:
            assert neg.delta[0, a] == 0
        assert neg.delta[1, a] == (UNDEFINED if a in prop.q else 1)


def test_neg_p2_accepts_unanswered_deliver():
    prop = parse_property("response F-deliver => L-receive", ROVERS)
    neg = neg_first_response_fsa(prop)
    crt, drt, drr = (ROVERS.parse_atom(x) for x in ("crt", "drt", "drr"))
    assert accepts_lasso(neg, [crt, drt], [crt])
    assert not accepts_lasso(neg, [crt, drt, drr], [crt])


def test_every_atom_a_response_means_no_accepting_run():
    neg = neg_first_response_fsa(ResponseProperty(atoms("crt"), ROVERS.full()))
    assert (neg.delta[1] == UNDEFINED).all()
    assert not lasso_emptiness(neg)


def test_negations_are_deterministic_tables():
    rng = np.random.default_rng(20)
    for _ in range(20):
        p, q = random_atomset(rng), random_atomset(rng)
        for neg in (neg_invariance_fsa(InvarianceProperty(p)), neg_first_response_fsa(ResponseProperty(p, q))):
            assert neg.delta.shape == (2, 12)


def test_invariance_emptiness_matches_oracle():
    rng = np.random.default_rng(21)
    for _ in range(100):
        plan = random_plan(rng)
        p = random_atomset(rng, density=0.15)
        prod = product_with_property(plan, neg_invariance_fsa(InvarianceProperty(p)))
        assert lasso_emptiness(prod) == oracle_invariance(plan, p)


def test_first_response_emptiness_matches_oracle():
    rng = np.random.default_rng(22)
    for _ in range(100):
        plan = random_plan(rng)
        p, q = random_atomset(rng, density=0.2), random_atomset(rng, density=0.3)
        prod = product_with_property(plan, neg_first_response_fsa(ResponseProperty(p, q, True)))
        assert lasso_emptiness(prod) == oracle_response(plan, p, q, first_only=True)


def test_rovers_suite_semantics(suite):
    prod = total_product(rovers_plans())
    for prop in suite:
        if isinstance(prop, InvarianceProperty):
            violated = oracle_invariance(prod, prop.p)
        else:
            violated = oracle_response(prod, prop.p, prop.q, first_only=False)
        assert violated == (prop.name in ("I5", "R3")), prop.name
