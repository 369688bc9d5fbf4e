import random

from tgdrewrite.chase import Answer, certain_via_chase
from tgdrewrite.core import entails, equivalent, isomorphic
from tgdrewrite.generate import random_case
from tgdrewrite.resolution import (Kind, ResolutionBudget, certain_via_resolution, raw_resolvents, resolvents,
                                   resolution_witness, saturated_resolution)
from tgdrewrite.syntax import parse_instance as I
from tgdrewrite.syntax import parse_rules


def test_egd_resolvent_splits_a_repeated_variable(key_egd):
    out = resolvents(I("R(z,z)"), key_egd)
    assert any(isomorphic(r, I("R(z,z2), A(w,z), A(w,z2)")) for r in out)


def test_piece_with_existential_needs_local_variable():
    sigma = parse_rules("A(x,y) -> B(x,z), C(z,y).")
    # z would meet b, which also occurs outside the piece
    assert not any(k is Kind.TGD for k, _, _ in raw_resolvents(I("B(a,b), D(b)"), sigma))
    out = resolvents(I("B(a,b), C(b,c)"), sigma)
    assert any(isomorphic(r, I("A(a,c)")) for r in out)


def test_empty_sigma_only_factors():
    assert resolvents(I("R(x,y), S(y)"), []) == []
    assert len(resolvents(I("R(x,y), R(u,v)"), [])) == 1


def test_free_variable_rewriting():
    res = saturated_resolution([I("B(x,y)")], parse_rules("A(u,v) -> B(u,u)."))
    assert res.fixpoint
    assert len(res.queries) == 2
    assert any(isomorphic(q, I("A(u,v)")) for q in res.queries)


def test_lav_rewriting():
    res = saturated_resolution([I('Q("a","b")')], parse_rules("P(x) -> Q(x,z)."))
    assert res.fixpoint
    assert [len(q) for q in res.queries] == [1]
    (q,) = res.queries
    assert isomorphic(q, I('Q("a","b")'))
    # z is existential, so Q("a","b") cannot come from P("a")
    res = saturated_resolution([I('Q("a",u)')], parse_rules("P(x) -> Q(x,z)."))
    assert any(isomorphic(q, I('P("a")')) for q in res.queries)


def test_key_egd_has_no_finite_rewriting(key_egd):
    res = saturated_resolution([I("R(z,z)")], key_egd, ResolutionBudget(max_resolvents=300))
    assert not res.fixpoint


def test_kept_queries_are_pairwise_non_subsumed():
    sigma = parse_rules("A(x) -> B(x). B(x) -> C(x,y). C(x,x) -> D(x).")
    res = saturated_resolution([I("C(u,v), D(w)")], sigma)
    qs = res.queries
    for a in qs:
        for b in qs:
            if a is not b:
                assert not entails(b, a)


def test_certain_via_resolution(key_egd):
    d = I('A("c",y1), A("c",y2), R(y1,y2)')
    ans, w = resolution_witness(d, key_egd, [I("R(z,z)")])
    assert ans is Answer.YES
    assert equivalent(w, I("R(z,z2), A(w,z), A(w,z2)"))
    assert certain_via_resolution(I('R("a","b")'), [], [I("R(x,x)")]) is Answer.NO


def test_matches_chase_on_generated_cases():
    rng = random.Random(5)
    for _ in range(40):
        c = random_case(rng)
        assert certain_via_resolution(c.database, c.sigma, [c.query]) == \
            certain_via_chase(c.database, c.sigma, [c.query])
