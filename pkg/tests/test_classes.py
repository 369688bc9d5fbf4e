import random

import pytest

from tgdrewrite.classes import (acyclic_order, affected_positions, classify, count_vector, is_acyclic, is_lav,
                                is_lossless, is_sticky, is_sticky_original, simplifiable_atoms, simplify_fixpoint,
                                simplify_step, sticky_report)
from tgdrewrite.core import Atom
from tgdrewrite.generate import random_rules
from tgdrewrite.rules import same_rules
from tgdrewrite.syntax import parse_instance as I
from tgdrewrite.syntax import parse_rules as R


def test_flags():
    c = classify(R("A(x,y) -> B(x,y,z). B(x,y,z) -> C(x,y)."))
    assert c.lav and not c.lossless and c.acyclic and not c.datalog
    assert is_lossless(R("A(x,y), B(y) -> C(x,y,z)."))
    assert not is_lav(R("A(x,y), B(y) -> C(x,y,z)."))


def test_acyclic_order_and_self_loop():
    assert acyclic_order(R("A(x) -> B(x). B(x) -> C(x).")) == ["C", "B", "A"]
    assert not is_acyclic(R("A(x,y) -> A(y,z)."))


def test_count_vector_follows_order():
    assert count_vector(I("A(x), A(y), C(z)"), ["C", "B", "A"]) == (1, 0, 2)


def test_affected_positions():
    # body-only variables seed the set; frontier variables inherit it from the head
    sigma = R("A(x) -> B(x,z). B(x,y) -> C(y).")
    assert affected_positions(sigma) == {("A", 1), ("B", 1)}


def test_sticky_sets(sticky_three):
    assert is_sticky(sticky_three)
    bad = R("A(x) -> B(x,z). B(x,y), B(z,y) -> C(x,z).")
    rep = sticky_report(bad)
    assert not rep.sticky and rep.witness[1] == "y"


def test_body_only_variables_count_for_stickiness():
    sigma = R("B(x,x,x), B(x,y,y) -> B(y,y,y).")
    assert is_sticky(sigma, literal=True)
    assert not is_sticky(sigma)


def test_original_stickiness_is_stricter(sticky_three):
    sigma = R("A(x) -> B(x,z). B(x,y) -> C(y,y).")
    assert is_sticky(sigma)
    assert is_sticky_original(R("A(x) -> B(x,z)."))
    assert not is_sticky_original(R("A(x) -> B(x,z). B(x,y), C(y,y) -> D(x)."))


def test_simplify_step_on_three_rules(sticky_three):
    r1 = next(r for r in sticky_three if r.head == {Atom("B", ("x", "y"))})
    (a,) = r1.body
    assert simplifiable_atoms(r1) == [a]
    out = simplify_step(sticky_three, r1, a, "R_a")
    assert same_rules(out, R("""
        R_a(x,y) -> B(x,y).
        C(x,y) -> A(x,y,u,v,v).
        D(x,y,z,t) -> A(x,x,y,z,t).
        C(x,x) -> R_a(x,u).
        D(x,y,z,t) -> R_a(x,y).
    """))


def test_simplify_step_rejects_non_simplifiable(sticky_three):
    r = next(r for r in sticky_three if r.body == {Atom("C", ("x", "y"))})
    with pytest.raises(ValueError):
        simplify_step(sticky_three, r, next(iter(r.body)))


def test_fixpoint_trace(sticky_three):
    res = simplify_fixpoint(sticky_three)
    assert res.complete
    assert [t.atom.pred for t in res.trace] == ["A", "D"]
    assert all(t.vars_after < t.vars_before for t in res.trace)
    assert not any(simplifiable_atoms(r) for r in res.simplified)
    assert len(res.transfer) == len(res.inverse) == 2


def test_fixpoint_terminates_on_generated_sticky_sets():
    rng = random.Random(11)
    for _ in range(20):
        sigma, _ = random_rules(rng, "sticky")
        out = simplify_fixpoint(sigma)
        assert out.complete
        assert all(t.vars_after < t.vars_before for t in out.trace)


def test_lossless_sets_are_left_alone():
    sigma = R("A(x,y) -> B(x,y,z). A(x,y), C(y) -> D(y,x).")
    out = simplify_fixpoint(sigma)
    assert same_rules(out.simplified, sigma) and out.transfer == []


def test_companion_rule_can_break_stickiness():
    # matching the head against A(z,u,z) identifies y with u
    sigma = R("A(z,u,z), D(x,y) -> A(u,x,y).")
    assert is_sticky(sigma) and is_sticky(sigma, literal=True)
    out = simplify_fixpoint(sigma)
    assert out.complete
    assert same_rules(out.simplified, R("A(z,u,z), D(x,u) -> simp$0(x). simp$0(u), D(x,y) -> A(u,x,y)."))
    assert not is_sticky(out.simplified)
    assert not classify(out.simplified).lossless


def test_multi_atom_head_can_stay_non_lossless():
    sigma = R("A(x), C(y,y) -> C(x,y), D(y).")
    assert is_sticky(sigma)
    out = simplify_fixpoint(sigma)
    assert same_rules(out.simplified, sigma)
    assert not classify(out.simplified).lossless


def test_repeated_pattern_terminates():
    sigma = R("B(z), C(y,y) -> C(e1,z). C(x,z) -> B(e2). C(y,y) -> A(y,y), C(y,y). A(y,y), A(z,x) -> C(y,x).")
    out = simplify_fixpoint(sigma, max_steps=100)
    assert out.complete
    assert len({t.predicate for t in out.trace}) == len(out.trace)
