"""Constants and free variables through star encodings.

A database with constants becomes a constant-free instance: each constant
``c`` turns into a variable tagged by ``const$c(v)``, and distinct hard
constants are related by ``neq$``.  Query clauses get ``fv$i`` atoms on
their free variables.  Answers are then read off entailment tests.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .chase import Answer, ChaseBudget, InconsistentMerge, certain_via_chase, saturated_chase
from .core import Atom, Const, Instance, apply_renaming, iter_homomorphisms, predicates, variables
from .datalog import (E, DatalogRewriting, ShapeBudgetExceeded, answer_via_datalog, datalog_closure, datalog_from_depth,
                      critical_depth, depth_bound, guarded_datalog_rewriting, is_guarded, sim_e, split_query,
                      ucq_datalog_rewriting, weak_acyclicity)
from .resolution import ResolutionBudget, certain_via_resolution, saturated_resolution
from .rules import Equality, UCQEqQuery, egds_of, tgds_of

NEQ = "neq$"
EQ = "eq$"
RESERVED_PREFIXES = ("const$", "neq$", "eq$", "fv$")


def const_pred(c: Const) -> str:
    return f"const${c.label}"


def fv_pred(i: int) -> str:
    return f"fv${i}"


def const_var(c: Const) -> str:
    return f"c${c.label}"


def _check_reserved(preds: Iterable[str]) -> None:
    for p in preds:
        if p.startswith(RESERVED_PREFIXES):
            raise ValueError(f"predicate name {p!r} is reserved")


def constants(atoms: Iterable[Atom]) -> Set[Const]:
    return {t for a in atoms for t in a.args if isinstance(t, Const)}


def query_constants(q: UCQEqQuery) -> Set[Const]:
    out = set()
    for atoms, eqs in q.clauses:
        out |= constants(atoms)
        out |= {t for e in eqs for t in (e.left, e.right) if isinstance(t, Const)}
    return out


def _check_labels(cs: Iterable[Const]) -> None:
    kinds: Dict[str, bool] = {}
    for c in cs:
        if kinds.setdefault(c.label, c.hard) != c.hard:
            raise ValueError(f"constant {c.label!r} used both hard and soft")


def star_database(d: Iterable[Atom], extra: Iterable[Const] = ()) -> Instance:
    """``D*``; ``extra`` constants (e.g. from a query) are encoded as well."""
    d = frozenset(d)
    _check_reserved(a.pred for a in d)
    cs = constants(d) | set(extra)
    _check_labels(cs)
    clash = {const_var(c) for c in cs} & variables(d)
    if clash:
        raise ValueError(f"null names clash with constant encodings: {sorted(clash)}")
    ren = {c: const_var(c) for c in cs}
    out = {Atom(a.pred, tuple(ren.get(t, t) for t in a.args)) for a in d}
    out |= {Atom(const_pred(c), (const_var(c),)) for c in cs}
    hard = sorted((c for c in cs if c.hard), key=lambda c: c.label)
    out |= {Atom(NEQ, (const_var(a), const_var(b))) for a in hard for b in hard if a != b}
    return frozenset(out)


def _clause_star(atoms, eqs, free, eliminate: bool) -> Optional[Instance]:
    cs = constants(atoms) | {t for e in eqs for t in (e.left, e.right) if isinstance(t, Const)}
    ren = {c: const_var(c) for c in cs}
    term = lambda t: ren.get(t, t)
    out = {Atom(a.pred, tuple(term(t) for t in a.args)) for a in atoms}
    out |= {Atom(const_pred(c), (const_var(c),)) for c in cs}
    out |= {Atom(fv_pred(i), (x,)) for i, x in enumerate(free, 1)}
    if not eliminate:
        out |= {Atom(EQ, (term(e.left), term(e.right))) for e in eqs}
        return frozenset(out)
    parent: Dict[str, str] = {}

    def find(v):
        while v in parent:
            v = parent[v]
        return v

    for e in eqs:
        a, b = find(term(e.left)), find(term(e.right))
        if a != b:
            a, b = sorted((a, b))
            parent[b] = a
    for a in cs:
        for b in cs:
            if a.hard and b.hard and a != b and find(const_var(a)) == find(const_var(b)):
                return None
    allv = variables(out)
    return apply_renaming(out, {v: find(v) for v in allv})


def star_query(q: UCQEqQuery, eliminate_equalities: bool = False) -> List[Instance]:
    """``Q*``, one instance per clause.

    With ``eliminate_equalities`` each equality merges its two sides instead
    of producing an ``eq$`` atom, and clauses equating two distinct hard
    constants are dropped; this is the form used for evaluation.
    """
    _check_reserved(a.pred for atoms, _ in q.clauses for a in atoms)
    out = []
    for atoms, eqs in q.clauses:
        c = _clause_star(atoms, eqs, q.free, eliminate_equalities)
        if c is not None:
            out.append(c)
    return out


def unstar_rewriting(rs: Iterable[Iterable[Atom]], free: Sequence[str], name: str = "q",
                     kinds: Optional[Dict[str, bool]] = None) -> UCQEqQuery:
    """Translate instances over the extended schema back into a UCQ= query.

    ``kinds`` maps constant labels to hardness (default hard).
    """
    kinds = kinds or {}
    free = tuple(free)
    clauses = []
    for r in rs:
        r = frozenset(r)
        fvs: Dict[str, List[int]] = {}
        cts: Dict[str, List[str]] = {}
        for a in r:
            if a.pred.startswith("fv$"):
                fvs.setdefault(a.args[0], []).append(int(a.pred[3:]))
            elif a.pred.startswith("const$"):
                cts.setdefault(a.args[0], []).append(a.pred[len("const$"):])
        used_free = [i for v in fvs for i in fvs[v]]
        sub: Dict[str, object] = {}
        for v, idx in fvs.items():
            if len(idx) == 1 and used_free.count(idx[0]) == 1 and v not in cts:
                x = free[idx[0] - 1]
                if v == x or x not in variables(r):
                    sub[v] = x
        for v, labels in cts.items():
            if len(labels) == 1 and v not in fvs:
                sub[v] = Const(labels[0], kinds.get(labels[0], True))
        # keep bound variables away from free names
        fresh = (f"u{k}" for k in itertools.count())
        for v in sorted(variables(r)):
            if v not in sub and v in free:
                sub[v] = next(f for f in fresh if f not in variables(r) and f not in free)
        t = lambda s: sub.get(s, s) if isinstance(s, str) else s
        atoms, eqs = set(), []
        for a in sorted(r, key=str):
            if a.pred.startswith("fv$"):
                x = free[int(a.pred[3:]) - 1]
                if t(a.args[0]) != x:
                    eqs.append(Equality(x, t(a.args[0])))
            elif a.pred.startswith("const$"):
                label = a.pred[len("const$"):]
                c = Const(label, kinds.get(label, True))
                if t(a.args[0]) != c:
                    eqs.append(Equality(t(a.args[0]), c))
            elif a.pred == EQ:
                if t(a.args[0]) != t(a.args[1]):
                    eqs.append(Equality(t(a.args[0]), t(a.args[1])))
            else:
                atoms.add(Atom(a.pred, tuple(t(s) for s in a.args)))
        clauses.append((frozenset(atoms), tuple(sorted(set(eqs), key=str))))
    return UCQEqQuery(free, tuple(clauses), name)


# --------------------------------------------------------------------------
# satisfiability and answers

SAT, UNSAT, UNKNOWN = "Sat", "Unsat", "Unknown"
_BOTTOM = frozenset({Atom(NEQ, ("x", "x"))})


def satisfiable(d: Iterable[Atom], sigma, chase_budget: Optional[ChaseBudget] = None,
                resolution_budget: Optional[ResolutionBudget] = None) -> str:
    ds = star_database(d)
    a = certain_via_chase(ds, sigma, [_BOTTOM], chase_budget)
    if a is Answer.UNKNOWN:
        a = certain_via_resolution(ds, sigma, [_BOTTOM], resolution_budget)
    return {Answer.YES: UNSAT, Answer.NO: SAT}.get(a, UNKNOWN)


def _answers_in(inst: Instance, clauses: List[Instance], free, labels: Dict[str, List[Const]]) -> set:
    """Tuples c̄ with ``inst ∪ {fv$i(v_ci)} ⊨`` some clause, read off one
    homomorphism search per clause into ``inst`` plus every ``fv$i`` fact."""
    n = len(free)
    ext = set(inst)
    for v in labels:
        ext |= {Atom(fv_pred(i), (v,)) for i in range(1, n + 1)}
    ext = frozenset(ext)
    out = set()
    for c in clauses:
        for h in iter_homomorphisms(c, ext):
            img: Dict[int, set] = {}
            for a in c:
                if a.pred.startswith("fv$"):
                    img.setdefault(int(a.pred[3:]), set()).add(h[a.args[0]])
            if any(len(s) != 1 for s in img.values()) or len(img) != n:
                continue
            vs = [next(iter(img[i])) for i in range(1, n + 1)]
            out |= set(itertools.product(*(labels[v] for v in vs)))
    return out


def _labels(inst: Instance) -> Dict[str, List[Const]]:
    out: Dict[str, List[Const]] = {}
    for a in inst:
        if a.pred.startswith("const$"):
            out.setdefault(a.args[0], []).append(a.pred[len("const$"):])
    return out


@dataclass
class AnswerResult:
    status: str
    tuples: Optional[Set[tuple]]
    method: str = ""

    @property
    def known(self) -> bool:
        return self.tuples is not None


def certain_answers(d: Iterable[Atom], sigma, q: UCQEqQuery,
                    chase_budget: Optional[ChaseBudget] = None,
                    resolution_budget: Optional[ResolutionBudget] = None,
                    engine: str = "auto") -> AnswerResult:
    """Certain answers of a UCQ= query as tuples of :class:`Const`.

    ``engine`` is ``resolution`` (rewrite then evaluate), ``chase`` (evaluate
    on a terminating chase) or ``auto`` (resolution, falling back to the
    chase).  On an unsatisfiable input every tuple over the known constants
    is returned with status ``Unsat``.
    """
    d = frozenset(d)
    qc = query_constants(q)
    allc = constants(d) | qc
    _check_labels(allc)
    kinds = {c.label: c.hard for c in allc}
    ds = star_database(d, qc)
    clauses = star_query(q, eliminate_equalities=True)
    names = lambda labels: {v: [Const(l, kinds[l]) for l in sorted(ls)] for v, ls in labels.items()}

    sat = satisfiable(d, sigma, chase_budget, resolution_budget) if any(c.hard for c in allc) else SAT
    if sat == UNKNOWN:
        return AnswerResult(UNKNOWN, None, "satisfiability")
    if sat == UNSAT:
        every = set(itertools.product(sorted(allc), repeat=len(q.free)))
        return AnswerResult(UNSAT, every, "satisfiability")

    if engine in ("auto", "resolution"):
        rw = saturated_resolution(clauses, sigma, resolution_budget)
        if rw.fixpoint:
            return AnswerResult(sat, _answers_in(ds, rw.queries, q.free, names(_labels(ds))), "resolution")
        if engine == "resolution":
            return AnswerResult(UNKNOWN, None, "resolution")
    try:
        res = saturated_chase([ds], sigma, chase_budget)
    except InconsistentMerge:
        return AnswerResult(UNSAT, set(itertools.product(sorted(allc), repeat=len(q.free))), "chase")
    if not res.fixpoint:
        return AnswerResult(UNKNOWN, None, "chase")
    found = None
    for inst in res.instances:
        got = _answers_in(inst, clauses, q.free, names(_labels(inst)))
        found = got if found is None else found & got
    return AnswerResult(sat, found or set(), "chase")


def unstar_instance(inst: Iterable[Atom]) -> Instance:
    """Put constants back for variables carrying exactly one ``const$`` label."""
    inst = frozenset(inst)
    labels = _labels(inst)
    ren = {v: Const(ls[0]) for v, ls in labels.items() if len(ls) == 1}
    return frozenset(Atom(a.pred, tuple(ren.get(t, t) for t in a.args)) for a in inst
                     if not a.pred.startswith(RESERVED_PREFIXES))


# --------------------------------------------------------------------------
# answers through a Datalog rewriting

METHODS = ("depth", "guarded", "sticky")


def datalog_rewriting(sigma, qs, method: str = "auto", k: Optional[int] = None,
                      budget: Optional[ResolutionBudget] = None) -> Tuple[Optional[DatalogRewriting], str]:
    """A Datalog rewriting of tgds ``sigma`` and boolean queries ``qs``.

    ``auto`` tries the depth route for weakly acyclic sets, then the guarded
    route, then a finite resolution rewriting.  Returns ``(None, method)``
    when the chosen route gives up within its budget.
    """
    qs = [frozenset(q) for q in qs]
    order = [method] if method != "auto" else [
        m for m, ok in (("depth", True), ("guarded", is_guarded(sigma)), ("sticky", True)) if ok]
    for m in order:
        if m == "depth":
            kk = k or (depth_bound(sigma) if weak_acyclicity(sigma) else critical_depth(sigma))
            if kk is None:
                continue
            try:
                return datalog_from_depth(sigma, qs, kk, all_partitions=False), m
            except ShapeBudgetExceeded:
                pass
        elif m == "guarded":
            try:
                return guarded_datalog_rewriting(sigma, qs)[0], m
            except (RuntimeError, ShapeBudgetExceeded):
                pass
        elif m == "sticky":
            rw = ucq_datalog_rewriting(sigma, qs, budget)
            if rw is not None:
                return rw, m
        else:
            raise ValueError(f"unknown method {m!r}")
    return None, order[-1] if order else method


def _with_sim_e(sigma, ds: Instance, clauses: List[Instance]):
    """Tgds only: egds become ``eq$E`` rules and queries are split to match."""
    if not egds_of(sigma):
        return tgds_of(sigma), clauses
    schema = predicates(ds)
    for c in clauses:
        schema.update(predicates(c))
    return sim_e(sigma, extra=schema), [split_query(c) for c in clauses]


def unsat_via_sim_e(d: Iterable[Atom], sigma, method: str = "auto",
                    k: Optional[int] = None) -> Optional[bool]:
    """True when ``eq$E`` links two distinct hard constants of ``D*``.

    ``None`` when no rewriting could be built.
    """
    ds = star_database(d)
    if not egds_of(sigma):
        return False
    prog = sim_e(sigma, extra=predicates(ds))
    rw, _ = datalog_rewriting(prog, [[Atom(E, ("x", "y")), Atom(NEQ, ("x", "y"))]], method, k)
    if rw is None:
        return None
    return answer_via_datalog(ds, rw)


def certain_answers_datalog(d: Iterable[Atom], sigma, q: UCQEqQuery, method: str = "auto",
                            k: Optional[int] = None,
                            budget: Optional[ResolutionBudget] = None) -> AnswerResult:
    """Certain answers by evaluating one Datalog rewriting per candidate tuple.

    The rewriting is built once for ``Q*``; each tuple ``c̄`` adds the facts
    ``fv$i(c_i)`` to ``D*`` and asks whether the goal is derived.
    """
    d = frozenset(d)
    qc = query_constants(q)
    allc = constants(d) | qc
    _check_labels(allc)
    ds = star_database(d, qc)
    clauses = star_query(q, eliminate_equalities=True)
    prog, clauses = _with_sim_e(sigma, ds, clauses)
    if any(c.hard for c in allc) and egds_of(sigma):
        bad = unsat_via_sim_e(d, sigma, method, k)
        if bad is None:
            return AnswerResult(UNKNOWN, None, "satisfiability")
        if bad:
            return AnswerResult(UNSAT, set(itertools.product(sorted(allc), repeat=len(q.free))), "satisfiability")
    if not clauses:
        return AnswerResult(SAT, set(), "datalog")
    rw, used = datalog_rewriting(prog, clauses, method, k, budget)
    if rw is None:
        return AnswerResult(UNKNOWN, None, used)
    base = datalog_closure(ds, rw)
    out = set()
    for tup in itertools.product(sorted(allc), repeat=len(q.free)):
        facts = {Atom(fv_pred(i), (const_var(c),)) for i, c in enumerate(tup, 1)}
        if answer_via_datalog(facts, rw, base):
            out.add(tup)
    return AnswerResult(SAT, out, used)


def rewrite_query(q: UCQEqQuery, sigma, budget: Optional[ResolutionBudget] = None):
    """UCQ= rewriting via resolution on ``Q*``; ``None`` when saturation does not finish."""
    kinds = {c.label: c.hard for c in query_constants(q)}
    rw = saturated_resolution(star_query(q, eliminate_equalities=True), sigma, budget)
    if not rw.fixpoint:
        return None
    return unstar_rewriting(rw.queries, q.free, q.name, kinds)


__all__ = ["star_database", "star_query", "unstar_rewriting", "satisfiable", "certain_answers",
           "rewrite_query", "AnswerResult", "unstar_instance", "datalog_rewriting", "unsat_via_sim_e",
           "certain_answers_datalog", "METHODS", "SAT", "UNSAT", "UNKNOWN", "NEQ", "EQ",
           "const_pred", "fv_pred", "const_var"]
