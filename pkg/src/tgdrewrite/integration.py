"""Compiling functional dependencies into tgds over two fresh predicates per FD.

For ``α = R[K] -> l`` a predicate ``F`` records the key-to-target function
and ``D`` marks keys whose target must exist.  Rules that invent an ``R``
atom with a known key but an existential target are rewritten to read the
target from ``F`` instead.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .chase import Answer, ChaseBudget, InconsistentMerge, certain_via_chase, iter_triggers
from .core import Atom, FreshVars, Instance, variables
from .resolution import ResolutionBudget, certain_via_resolution
from .rules import FunctionalDependency, Tgd, canonical_rules, rule_predicates, tgds_of

PERMUTATION_LIMIT = 6


def fd_satisfied(m: Iterable[Atom], alpha: FunctionalDependency) -> bool:
    seen: Dict[tuple, object] = {}
    for a in m:
        if a.pred != alpha.pred or len(a.args) != alpha.arity:
            continue
        key = tuple(a.args[k - 1] for k in alpha.key)
        t = a.args[alpha.target - 1]
        if seen.setdefault(key, t) != t:
            return False
    return True


def _key_target(a: Atom, alpha: FunctionalDependency):
    return tuple(a.args[k - 1] for k in alpha.key), a.args[alpha.target - 1]


def _fd_atoms(r: Tgd, alpha: FunctionalDependency) -> List[Atom]:
    return sorted((a for a in r.head if a.pred == alpha.pred and len(a.args) == alpha.arity),
                  key=lambda a: str(a))


def interactions(alpha: FunctionalDependency, sigma) -> List[Tuple[Tgd, Atom]]:
    """Head atoms of ``α``'s predicate with the key in the body and an existential target."""
    out = []
    for r in tgds_of(sigma):
        bv = variables(r.body)
        for a in _fd_atoms(r, alpha):
            key, t = _key_target(a, alpha)
            if set(key) <= bv and t not in bv:
                out.append((r, a))
    return out


def interacts(alpha: FunctionalDependency, sigma) -> bool:
    return bool(interactions(alpha, sigma))


def uncovered(alpha: FunctionalDependency, sigma) -> List[Tuple[Tgd, Atom]]:
    """Head atoms whose key and target are both body variables.

    Such an atom can copy a second target value under an existing key, so
    ``α`` is not preserved by the chase and the integration must fail.
    """
    out = []
    for r in tgds_of(sigma):
        bv = variables(r.body)
        for a in _fd_atoms(r, alpha):
            key, t = _key_target(a, alpha)
            if set(key) <= bv and t in bv:
                out.append((r, a))
    return out


@dataclass
class IntegrationOutcome:
    rules: List[Tgd]
    fresh: Dict[FunctionalDependency, Tuple[str, str]] = field(default_factory=dict)
    success: bool = True
    witnesses: List[Tuple[Tgd, Atom]] = field(default_factory=list)
    order: List[FunctionalDependency] = field(default_factory=list)
    reason: str = ""


def integrate_one(sigma, alpha: FunctionalDependency,
                  names: Optional[Tuple[str, str]] = None) -> IntegrationOutcome:
    sigma = tgds_of(sigma)
    if names is None:
        taken = rule_predicates(sigma)
        n = next(k for k in itertools.count() if f"fd$F${k}" not in taken and f"fd$D${k}" not in taken)
        names = (f"fd$F${n}", f"fd$D${n}")
    fname, dname = names
    n = len(alpha.key)
    xs = tuple(f"x{k}" for k in range(1, alpha.arity + 1))
    out = [
        Tgd([Atom(alpha.pred, xs)], [Atom(fname, tuple(xs[k - 1] for k in alpha.key) + (xs[alpha.target - 1],))]),
        Tgd([Atom(dname, xs[:n])], [Atom(fname, xs[:n] + ("y",))]),
    ]
    hits = interactions(alpha, sigma)
    for r in sigma:
        body = set(r.body)
        mine = [a for rr, a in hits if rr == r]
        for a in mine:
            key, t = _key_target(a, alpha)
            body.add(Atom(fname, key + (t,)))
            out.append(Tgd(r.body, [Atom(dname, key)]))
        out.append(Tgd(body, r.head) if mine else r)
    rules = canonical_rules(out)
    f_alpha = FunctionalDependency(fname, n + 1, tuple(range(1, n + 1)), n + 1)
    reason = ""
    if interacts(alpha, rules):
        reason = "still interacts"
    elif not all(fd_satisfied(r.body, f_alpha) for r in rules):
        reason = "a rule body forces two targets for one key"
    elif uncovered(alpha, sigma):
        reason = "a rule copies a body variable into the target position"
    bad = uncovered(alpha, sigma) if reason.startswith("a rule copies") else []
    return IntegrationOutcome(rules, {alpha: names}, not reason, hits + bad, [alpha], reason)


def integrate_all(sigma, fds: Sequence[FunctionalDependency]) -> IntegrationOutcome:
    """Integrate every FD in some order; all orders are tried for small sets."""
    sigma = canonical_rules(tgds_of(sigma))
    fds = list(dict.fromkeys(fds))
    if not fds:
        return IntegrationOutcome(sigma)
    orders = itertools.permutations(fds) if len(fds) <= PERMUTATION_LIMIT else [tuple(fds)]
    best: Optional[IntegrationOutcome] = None
    for order in orders:
        cur = sigma
        fresh: Dict = {}
        wit: List = []
        done: List = []
        failed = None
        taken = set(rule_predicates(sigma))
        counter = [0]
        for alpha in order:
            while True:
                k = counter[0]
                counter[0] += 1
                names = (f"fd$F${k}", f"fd$D${k}")
                if not (set(names) & taken):
                    break
            taken |= set(names)
            step = integrate_one(cur, alpha, names)
            wit += step.witnesses
            if not step.success:
                failed = step
                break
            cur = step.rules
            fresh.update(step.fresh)
            done.append(alpha)
        if failed is None:
            return IntegrationOutcome(cur, fresh, True, wit, done)
        out = IntegrationOutcome(cur, fresh, False, wit, done + [failed.order[0]],
                                 f"{failed.order[0]}: {failed.reason}")
        if best is None or len(out.order) > len(best.order):
            best = out
    return best


def fd_closure(d: Iterable[Atom], fds: Sequence[FunctionalDependency]) -> Instance:
    """Apply the FDs as egds to a fixpoint (``D_F``); raises InconsistentMerge on a clash."""
    egds = [f.as_egd() for f in fds]
    cur = frozenset(d)
    fresh = FreshVars(variables(cur))
    while True:
        nxt = next(iter_triggers(cur, egds, fresh), None)
        if nxt is None:
            return cur
        cur = nxt


def answer_with_integration(d: Iterable[Atom], sigma, fds: Sequence[FunctionalDependency],
                            qs: Iterable[Iterable[Atom]], engine: str = "chase",
                            chase_budget: Optional[ChaseBudget] = None,
                            resolution_budget: Optional[ResolutionBudget] = None,
                            outcome: Optional[IntegrationOutcome] = None) -> Answer:
    outcome = outcome or integrate_all(sigma, fds)
    if not outcome.success:
        raise ValueError(f"integration failed: {outcome.reason}")
    try:
        dF = fd_closure(d, fds)
    except InconsistentMerge:
        return Answer.INCONSISTENT
    qs = [frozenset(q) for q in qs]
    if engine == "resolution":
        return certain_via_resolution(dF, outcome.rules, qs, resolution_budget)
    return certain_via_chase(dF, outcome.rules, qs, chase_budget)


__all__ = ["fd_satisfied", "interactions", "interacts", "uncovered", "IntegrationOutcome",
           "integrate_one", "integrate_all", "fd_closure", "answer_with_integration"]
