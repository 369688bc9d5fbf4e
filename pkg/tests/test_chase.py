import random

import pytest

from tgdrewrite.chase import (Answer, ChaseBudget, Status, certain_via_chase, chase_successors, chase_witness,
                              saturated_chase)
from tgdrewrite.core import canonical, entails, isomorphic
from tgdrewrite.generate import random_case
from tgdrewrite.oracle import oracle_certain
from tgdrewrite.syntax import parse_instance as I
from tgdrewrite.syntax import parse_rules


def test_successors_include_the_instance_itself():
    sigma = parse_rules("A(u) -> B(u,z).")
    succ = chase_successors(I("A(x)"), sigma)
    assert canonical(I("A(x)")) in succ
    assert any(isomorphic(s, I("A(x), B(x,z1)")) for s in succ)
    assert len(succ) == 2


def test_egd_successor_merges(key_egd):
    succ = chase_successors(I('A("c",y1), A("c",y2)'), key_egd)
    assert any(isomorphic(s, I('A("c",y1)')) for s in succ)


def test_transitivity_step_adds_two_hop(transitivity):
    succ = chase_successors(I('R("a","b"), R("b","c")'), transitivity)
    assert any(I('R("a","c")') <= s for s in succ)


def test_empty_sigma_is_a_fixpoint():
    res = saturated_chase([I("A(x)")], [])
    assert res.status is Status.FIXPOINT
    assert res.instances == [canonical(I("A(x)"))]


def test_transitive_closure(transitivity):
    res = saturated_chase([I('R("a","b"), R("b","c")')], transitivity)
    assert res.fixpoint
    (top,) = res.instances
    assert I('R("a","c")') <= top


def test_egd_forces_loop(key_egd):
    res = saturated_chase([I('A("c",y1), A("c",y2), R(y1,y2)')], key_egd)
    assert res.fixpoint
    assert any(entails(i, I("R(z,z)")) for i in res.instances)


def test_hard_constants_clash_is_inconsistent(key_egd):
    assert certain_via_chase(I('A("c","a"), A("c","b")'), key_egd, [I("Q(x)")]) is Answer.INCONSISTENT


def test_certain_answers(transitivity):
    q = [I("R(x,x)")]
    assert certain_via_chase(I('R("a","b"), R("b","a")'), transitivity, q) is Answer.YES
    assert certain_via_chase(I('R("a","b")'), transitivity, q) is Answer.NO
    assert certain_via_chase(I('R("a","b")'), transitivity, [frozenset()]) is Answer.YES


def test_budget_gives_unknown():
    sigma = parse_rules("A(x) -> R(x,z), A(z).")
    ans = certain_via_chase(I("A(x)"), sigma, [I("R(x,x)")], ChaseBudget(max_steps=20))
    assert ans is Answer.UNKNOWN


def test_witness_entails_query(transitivity):
    ans, w = chase_witness(I('R("a","b"), R("b","a")'), transitivity, [I("R(x,x)")])
    assert ans is Answer.YES and entails(w, I("R(x,x)"))


def test_budget_must_be_positive():
    with pytest.raises(ValueError):
        ChaseBudget(max_steps=0)


def test_agrees_with_oracle_on_generated_cases():
    rng = random.Random(11)
    for _ in range(40):
        c = random_case(rng)
        got = certain_via_chase(c.database, c.sigma, [c.query])
        assert got == oracle_certain(c.database, c.sigma, [c.query])
