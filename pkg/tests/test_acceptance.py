"""Acceptance criteria 1-10.

Each test records its outcome in the ``acceptance`` fixture; the terminal
summary prints one PASS/FAIL line per criterion.  Run this file directly
(``python tests/test_acceptance.py``) to get the same lines without pytest.
"""
import itertools
import os
import random
import subprocess
import sys
import time
from pathlib import Path

import pytest

from tgdrewrite.chase import Answer, certain_via_chase
from tgdrewrite.classes import (acyclic_order, classify, count_vector, simplifiable_atoms, simplify_fixpoint,
                                simplify_step)
from tgdrewrite.core import Atom, Const, Fn, entails, equivalent, variables
from tgdrewrite.datalog import (GOAL, answer_via_datalog, datalog_from_depth, depth_bound, encode_atom,
                                guarded_datalog_rewriting)
from tgdrewrite.encoding import (SAT, UNSAT, certain_answers, certain_answers_datalog, rewrite_query,
                                 satisfiable, unsat_via_sim_e)
from tgdrewrite.generate import (_database, _query, random_answer_case, random_case, random_egd_case,
                                 random_fd_case, random_rules)
from tgdrewrite.integration import answer_with_integration, integrate_all
from tgdrewrite.oracle import oracle_answers, oracle_certain, oracle_satisfiable
from tgdrewrite.resolution import (Kind, ResolutionBudget, certain_via_resolution, raw_resolvents,
                                   saturated_resolution)
from tgdrewrite.rules import FunctionalDependency, Tgd, same_rules
from tgdrewrite.syntax import parse_instance as I
from tgdrewrite.syntax import parse_program
from tgdrewrite.syntax import parse_rules as R

ROOT = Path(__file__).resolve().parent.parent
DEMOS = ROOT / "demos"


def record(acc, n, ok, detail):
    acc.setdefault(n, []).append((bool(ok), detail))
    assert ok, detail


# 1 -------------------------------------------------------------------------

def test_criterion_1_chase_resolution_oracle(acceptance):
    rng = random.Random(2024)
    start = time.perf_counter()
    bad = []
    for n in range(200):
        c = random_case(rng, "weakly_acyclic")
        got = (certain_via_chase(c.database, c.sigma, [c.query]),
               certain_via_resolution(c.database, c.sigma, [c.query]),
               oracle_certain(c.database, c.sigma, [c.query]))
        if len(set(got)) != 1 or Answer.UNKNOWN in got:
            bad.append((n, got))
    secs = time.perf_counter() - start
    record(acceptance, 1, not bad and secs < 60,
           f"200 weakly acyclic cases, {len(bad)} disagreements, {secs:.1f} s")


# 2 -------------------------------------------------------------------------

def test_criterion_2_terminating_classes(acceptance):
    fix, broken, steps = 0, [], 0
    for cls in ("lav", "lossless", "acyclic"):
        rng = random.Random(7)
        for _ in range(30):
            c = random_case(rng, cls)
            res = saturated_resolution([c.query], c.sigma)
            fix += res.fixpoint
            order = acyclic_order(c.sigma)
            for _, q in res.history:
                for kind, _, j in raw_resolvents(q, c.sigma):
                    if kind is not Kind.TGD:
                        continue
                    steps += 1
                    ok = {"lav": len(j) <= len(q),
                          "lossless": variables(j) <= variables(q),
                          "acyclic": order is not None and count_vector(j, order) < count_vector(q, order)}[cls]
                    if not ok:
                        broken.append((cls, q, j))
    record(acceptance, 2, fix == 90 and not broken,
           f"{fix}/90 fixpoints, {len(broken)} measure violations over {steps} tgd steps")


# 3 -------------------------------------------------------------------------

THREE = """
    A(x,x,y,z,t) -> B(x,y).
    C(x,y) -> A(x,y,u,v,v).
    D(x,y,z,t) -> A(x,x,y,z,t).
"""


def test_criterion_3_single_step(acceptance):
    sigma = R(THREE)
    r1 = next(r for r in sigma if r.head == {Atom("B", ("x", "y"))})
    out = simplify_step(sigma, r1, next(iter(r1.body)), "R_a")
    five = R("""
        R_a(x,y) -> B(x,y).
        C(x,y) -> A(x,y,u,v,v).
        D(x,y,z,t) -> A(x,x,y,z,t).
        C(x,x) -> R_a(x,u).
        D(x,y,z,t) -> R_a(x,y).
    """)
    r3p = next(r for r in out if r.head == {Atom("R_a", ("x0", "x1"))} and r.body.__len__() == 1
               and next(iter(r.body)).pred == "D")
    res = simplify_fixpoint(sigma)
    second = res.trace[1] if len(res.trace) > 1 else None
    ok = (same_rules(out, five) and simplifiable_atoms(r3p) == list(r3p.body)
          and second is not None and second.atom.pred == "D" and second.rule.head == {Atom("simp$0", ("x0", "x1"))})
    record(acceptance, 3, ok, "five-rule step reproduced, r3' atom simplified next")


@pytest.mark.xfail(strict=True, reason="companion rules can break stickiness; see the notes")
def test_criterion_3_lossless_after_simplification(acceptance):
    rng = random.Random(3)
    lossless = 0
    for _ in range(30):
        sigma, _ = random_rules(rng, "sticky")
        lossless += classify(simplify_fixpoint(sigma).simplified).lossless
    record(acceptance, 3, lossless == 30, f"simplified set lossless on {lossless}/30 generated sticky sets")


# 4 -------------------------------------------------------------------------

def family(n):
    if n == 1:
        return frozenset({Atom("R", ("x1", "x1"))})
    out = {Atom("R", ("x1", f"x{n}"))}
    for i in range(1, n):
        out |= {Atom("A", (f"y{i}", f"x{i}")), Atom("A", (f"y{i}", f"x{i + 1}"))}
    return frozenset(out)


def test_criterion_4_infinite_rewriting(acceptance, key_egd):
    res = saturated_resolution([family(1)], key_egd, ResolutionBudget(max_resolvents=1000))
    early = [q for g, q in res.history if g <= 5]
    found = [n for n in range(1, 6) if any(equivalent(q, family(n)) for q in early)]
    fresh = all(not entails(family(n), family(m)) for n in range(2, 6) for m in range(1, n))
    record(acceptance, 4, found == [1, 2, 3, 4, 5] and fresh and not res.fixpoint,
           f"R_n found for n in {found} within 5 generations, pairwise non-subsumed: {fresh}, "
           f"status {res.status}")


# 5 -------------------------------------------------------------------------

def test_criterion_5_fd_integration(acceptance):
    fd = FunctionalDependency("B", 2, (1,), 2)
    out = integrate_all(R("A(x,y) -> B(x,z), C(z,y)."), [fd])
    expected = R("""
        B(x,y) -> fd$F$0(x,y).
        fd$D$0(x) -> fd$F$0(x,y).
        A(x,y) -> fd$D$0(x).
        A(x,y), fd$F$0(x,z) -> B(x,z), C(z,y).
    """)
    exact = out.success and same_rules(out.rules, expected) and out.fresh == {fd: ("fd$F$0", "fd$D$0")}
    rng = random.Random(5)
    bad = 0
    for _ in range(100):
        c = random_fd_case(rng)
        want = oracle_certain(c.database, list(c.sigma) + [f.as_egd() for f in c.fds], [c.query])
        bad += answer_with_integration(c.database, c.sigma, c.fds, [c.query]) != want
    record(acceptance, 5, exact and bad == 0,
           f"expected rule set {'reproduced' if exact else 'differs'}, {bad}/100 disagreements with the oracle")


# 6 -------------------------------------------------------------------------

def test_criterion_6_encoding(acceptance):
    q = parse_program("query q(x1,x2) :- B(x1,x2).").queries[0]
    rw = rewrite_query(q, R("A(u,v) -> B(u,u)."))
    worked = False
    if rw is not None and len(rw.clauses) == 2:
        plain = [c for c in rw.clauses if not c[1]]
        joined = [c for c in rw.clauses if c[1]]
        if plain == [(I("B(x1,x2)"), ())] and len(joined) == 1:
            atoms, eqs = joined[0]
            (a,) = atoms
            worked = (a.pred == "A" and a.args[0] != a.args[1]
                      and {(e.left, e.right) for e in eqs} == {("x1", a.args[0]), ("x2", a.args[0])})

    rng = random.Random(6)
    budget = ResolutionBudget(max_resolvents=300)
    compared = bad = 0
    while compared < 100:
        c = random_answer_case(rng, with_egds=compared % 2 == 1)
        want = oracle_answers(c.database, c.sigma, c.ucq)
        if want is None or want == "Unsat":
            continue
        compared += 1
        got = certain_answers(c.database, c.sigma, c.ucq, resolution_budget=budget)
        bad += got.status != SAT or got.tuples != want

    rng = random.Random(61)
    sat_bad = unsat = 0
    for _ in range(50):
        c = random_egd_case(rng, soft_p=0.1, consts=("a", "b"))
        o = oracle_satisfiable(c.database, c.sigma)
        unsat += o is False
        sat_bad += satisfiable(c.database, c.sigma) != {True: SAT, False: UNSAT, None: None}[o]
    record(acceptance, 6, worked and bad == 0 and sat_bad == 0 and unsat > 0,
           f"worked rewriting {'reproduced' if worked else 'differs'}, {bad}/100 answer disagreements, "
           f"{sat_bad}/50 satisfiability disagreements ({unsat} unsatisfiable)")


# 7 -------------------------------------------------------------------------

def test_criterion_7_depth_pipeline(acceptance, transitivity):
    rw = datalog_from_depth(transitivity, [I("R(x,x)")], depth_bound(transitivity))
    hand = type(rw)(frozenset({GOAL.pred}), transitivity + [Tgd(I("R(x,x)"), [GOAL])])
    facts = [Atom("R", (Const(a), Const(b))) for a in "ab" for b in "ab"]
    dbs = [frozenset(s) for n in range(0, 5) for s in itertools.combinations(facts, n)]
    bad = sum(answer_via_datalog(d, rw) != answer_via_datalog(d, hand) for d in dbs)
    f, g = lambda *a: Fn("f", a), lambda *a: Fn("g", a)
    shape = str(encode_atom(Atom("R", ("x", f("x", "y"), g("y", f("x", "z"))))))
    record(acceptance, 7, bad == 0 and shape == "R@[1,f(1,2),g(2,f(1,3))](x,y,z)",
           f"{len(dbs)} databases, {bad} disagreements with the hand rewriting; shape {shape}")


# 8 -------------------------------------------------------------------------

def test_criterion_8_guarded_pipeline(acceptance):
    rng = random.Random(0)
    violations = incomplete = bad = checked = 0
    for _ in range(30):
        sigma, schema = random_rules(rng, "guarded", 3)
        q = _query(rng, schema)
        rw, flat = guarded_datalog_rewriting(sigma, [q], check_facts=True)
        violations += len(flat.violations)
        incomplete += not flat.complete
        done = 0
        while done < 5:
            d = _database(rng, schema)
            want = oracle_certain(d, sigma, [q])
            if want is Answer.UNKNOWN:
                continue
            done += 1
            checked += 1
            bad += answer_via_datalog(d, rw) != (want is Answer.YES)
    record(acceptance, 8, violations == 0 and incomplete == 0 and bad == 0,
           f"30 guarded sets, {checked} databases, {bad} disagreements, "
           f"{violations} fact violations, {incomplete} unsaturated flattenings")


# 9 -------------------------------------------------------------------------

def test_criterion_9_sim_e(acceptance):
    rng = random.Random(9)
    compared = bad = 0
    while compared < 20:
        c = random_answer_case(rng, with_egds=True)
        if not any(not isinstance(r, Tgd) for r in c.sigma):
            continue
        want = oracle_answers(c.database, c.sigma, c.ucq)
        if want is None:
            continue
        compared += 1
        got = certain_answers_datalog(c.database, c.sigma, c.ucq)
        bad += ("Unsat" if got.status == UNSAT else got.tuples) != want

    rng = random.Random(90)
    unsat = unsat_bad = 0
    for _ in range(40):
        c = random_egd_case(rng, soft_p=0.1, consts=("a", "b"))
        o = oracle_satisfiable(c.database, c.sigma)
        unsat += o is False
        unsat_bad += unsat_via_sim_e(c.database, c.sigma) != (o is False)
    record(acceptance, 9, bad == 0 and unsat > 0 and unsat_bad == 0,
           f"{compared} egd cases, {bad} answer disagreements; {unsat} unsatisfiable of 40, "
           f"{unsat_bad} missed by eq$E reachability")


# 10 ------------------------------------------------------------------------

RUNS = [
    ["chase", "transitivity.dlg"],
    ["resolve", "star.dlg"],
    ["analyze", "sticky.dlg"],
    ["simplify", "sticky.dlg"],
    ["integrate", "fd.dlg"],
    ["rewrite", "transitivity.dlg", "--method", "depth"],
    ["answer", "key_chain.dlg", "--engine", "chase"],
    ["answer", "star.dlg", "--engine", "datalog", "--json"],
    ["answer", "guarded.dlg", "--engine", "datalog"],
    ["crosscheck", "--cases", "15", "--seed", "4"],
]


def _cli(argv, hashseed):
    env = dict(os.environ, PYTHONHASHSEED=str(hashseed))
    args = [a if not a.endswith(".dlg") else str(DEMOS / a) for a in argv]
    return subprocess.run([sys.executable, "-m", "tgdrewrite", *args], capture_output=True, env=env,
                          cwd=ROOT, timeout=300).stdout


def test_criterion_10_determinism(acceptance):
    differing = [a[0] for a in RUNS if _cli(a, 1) != _cli(a, 2)]
    record(acceptance, 10, not differing,
           f"{len(RUNS)} subcommand runs repeated under different hash seeds, differing: {differing or 'none'}")


if __name__ == "__main__":
    from conftest import ACCEPTANCE
    from tgdrewrite.syntax import parse_rules as _pr

    fixtures = {"transitivity": _pr("R(x,y), R(y,z) -> R(x,z)."),
                "key_egd": _pr("A(x,y), A(x,y2) -> y = y2.")}
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            extra = [fixtures[p] for p in fn.__code__.co_varnames[1:fn.__code__.co_argcount]]
            try:
                fn(ACCEPTANCE, *extra)
            except AssertionError:
                pass
    for n in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[n]
        print(f"{'PASS' if all(ok for ok, _ in parts) else 'FAIL'} criterion {n}: "
              + "; ".join(d for _, d in parts))
