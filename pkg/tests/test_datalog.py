import random

import pytest

from tgdrewrite.core import Atom, Fn
from tgdrewrite.datalog import (E, GOAL, ShapeBudgetExceeded, answer_via_datalog, bounded_fixpoint,
                                critical_depth, datalog_from_depth, decode_atom, depth_bound, derive_tgd,
                                encode_atom, flatten_k, guard_report, guarded_datalog_rewriting, is_guarded,
                                left_core, sim_e, skolemize, split_query, weak_acyclicity)
from tgdrewrite.generate import random_rules
from tgdrewrite.oracle import oracle_certain
from tgdrewrite.chase import Answer
from tgdrewrite.rules import Tgd, rule_key
from tgdrewrite.syntax import parse_instance as I
from tgdrewrite.syntax import parse_rules as R


def test_skolemize():
    (r,) = skolemize(R("A(x) -> B(x,z).")).rules
    assert r.head == {Atom("B", ("x", Fn("f1", ("x",))))}


def test_depth_bounds(transitivity):
    assert depth_bound(transitivity) == 1
    assert depth_bound(R("A(x) -> B(x,z).")) == 2
    assert depth_bound(R("A(x) -> B(x,z). B(x,y) -> C(y,w).")) == 3


def test_weak_acyclicity():
    assert weak_acyclicity(R("A(x) -> B(x,z). B(x,y) -> C(y,w)."))
    assert not weak_acyclicity(R("A(x) -> A(z)."))
    with pytest.raises(ValueError):
        depth_bound(R("A(x) -> A(z)."))


def test_critical_depth():
    # not weakly acyclic, yet the skolem fixpoint closes at depth 2
    assert critical_depth(R("A(x) -> A(z).")) == 2
    assert critical_depth(R("A(x) -> B(x,z). B(x,y) -> A(y).")) is None


def test_bounded_fixpoint_is_monotone_in_k():
    p = skolemize(R("A(x) -> B(x,z). B(x,y) -> A(y)."))
    d = I('A("a")')
    prev = bounded_fixpoint(p, d, 1)
    assert d < prev
    for k in range(2, 5):
        cur = bounded_fixpoint(p, d, k)
        assert prev <= cur and cur == bounded_fixpoint(p, d, k, reverse=True)
        prev = cur


def test_shape_encoding():
    f, g = lambda *a: Fn("f", a), lambda *a: Fn("g", a)
    a = Atom("R", ("x", f("x", "y"), g("y", f("x", "z"))))
    e = encode_atom(a)
    assert str(e) == "R@[1,f(1,2),g(2,f(1,3))](x,y,z)"
    assert decode_atom(e) == a
    assert encode_atom(Atom("R", ("x", "y"))) == Atom("R", ("x", "y"))


def test_transitivity_depth_rewriting(transitivity):
    rw = datalog_from_depth(transitivity, [I("R(x,x)")], 1)
    hand = R("R(x,y), R(y,z) -> R(x,z).") + [Tgd(I("R(x,x)"), [GOAL])]
    # the full enumeration also keeps the image with x and z identified
    assert {rule_key(r) for r in hand} <= {rule_key(r) for r in rw.program}
    assert answer_via_datalog(I('R("a","b"), R("b","a")'), rw)
    assert not answer_via_datalog(I('R("a","b"), R("b","c")'), rw)


def test_shape_cap():
    with pytest.raises(ShapeBudgetExceeded):
        datalog_from_depth(R("A(x,y) -> B(x,z,w). B(x,y,z) -> A(y,z)."), [I("A(u,v)")], 3, cap=10)


def test_depth_rewriting_matches_oracle():
    rng = random.Random(8)
    for _ in range(10):
        sigma, schema = random_rules(rng, "weakly_acyclic", 3)
        q = [Atom(p, tuple(f"q{i}" for i in range(n))) for p, n in sorted(schema.items())][:1]
        rw = datalog_from_depth(sigma, [q], depth_bound(sigma), all_partitions=False)
        for seed in range(3):
            drng = random.Random(seed)
            d = frozenset(Atom(p, tuple(drng.choice(["n1", "n2"]) for _ in range(n)))
                          for p, n in sorted(schema.items()) if drng.random() < 0.6)
            assert answer_via_datalog(d, rw) == (oracle_certain(d, sigma, [q]) is Answer.YES)


def test_sim_e():
    rules = sim_e(R("A(x,y), A(x,y2) -> y = y2."))
    assert Tgd([Atom(E, ("x", "y"))], [Atom(E, ("y", "x"))]) in rules
    assert Tgd([Atom("A", ("x1", "x2"))], [Atom(E, ("x1", "x1")), Atom(E, ("x2", "x2"))]) in rules
    (last,) = [r for r in rules if any(a.pred == "A" for a in r.body)][-1:]
    assert {a.pred for a in last.body} == {"A", E} and len([a for a in last.body if a.pred == "A"]) == 2
    assert all(len(a.args) == len(set(a.args)) for a in last.body if a.pred == "A")
    q = split_query(I("A(x,x), B(x)"))
    assert sum(1 for a in q if a.pred == E) == 2 and len(q) == 4


def test_guard_report():
    g = guard_report(R("A(x,y,z), B(i,x,y), B(j,y,z) -> B(k,x,z).")[0])
    assert g.guarded and not g.beta_guarded and g.gw == 2 and g.lw == 3
    assert not guard_report(R("A(x), B(y) -> C(x,y).")[0]).guarded
    assert guard_report(R("A(x,y), B(y) -> C(x).")[0]).beta_guarded


def test_left_core():
    assert left_core(I("A(x,y), A(x,z), B(z)"), {"x"}) == I("A(x,z), B(z)")
    assert left_core(I("A(x,y), A(x,z)"), {"x"}) in (I("A(x,y)"), I("A(x,z)"))


def test_derive_tgd_chains_two_rules():
    r1, r2 = R("A(x) -> B(x,z). B(x,y) -> C(y).")
    out = derive_tgd(r1, r2)
    assert any(rule_key(r) == rule_key(R("A(x) -> B(x,z), C(z).")[0]) for r in out)


def test_guarded_rewriting_example():
    sigma = R("A(x,y,z), B(i,x,y), B(j,y,z) -> B(k,x,z). B(i,x,y) -> A(x,y,w).")
    q = I('B(k,"a","c")')
    rw, flat = guarded_datalog_rewriting(sigma, [q], check_facts=True)
    assert flat.complete and not flat.violations
    for d in (I('B("i","a","b"), B("j","b","c")'), I('B("i","a","b"), B("j","c","b")')):
        assert answer_via_datalog(d, rw) == (oracle_certain(d, sigma, [q]) is Answer.YES)


def test_flatten_rejects_unguarded():
    with pytest.raises(ValueError):
        flatten_k(R("A(x), B(y) -> C(x,y)."))
    assert not is_guarded(R("A(x), B(y) -> C(x,y)."))


def test_term_positions_limit_valuations():
    from tgdrewrite.datalog import _term_positions, skolemize

    p = skolemize(R("A(x) -> B(x,z). B(x,y) -> C(y)."))
    assert _term_positions(p.rules) == {("B", 1), ("C", 0)}
    rw = datalog_from_depth(R("A(x) -> B(x,z). B(x,y) -> C(y)."), [I("C(u)")], 2)
    assert not any("@" in a.pred for r in rw.program for a in r.body if a.pred.startswith("A"))
    assert answer_via_datalog(I('A("a")'), rw)
