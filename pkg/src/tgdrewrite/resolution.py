"""Backward resolution under tgds and egds, and its saturation into rewritings.

Three kinds of one-step resolvents are produced, all as most general forms:

* factoring: ``Q[σ]`` for the mgu σ of two atoms of ``Q``;
* tgd: piece unification of a non-empty ``S ⊆ Q`` with head atoms, giving
  ``(Q[σ] ∖ H[σ]) ∪ B[σ]`` when every existential stays a private fresh
  variable;
* egd: a variable ``v`` occurring at least twice has a non-empty proper
  subset of its occurrences renamed to a fresh ``w``, and ``B[x↦v, y↦w]``
  is added.
"""
from __future__ import annotations

import enum
import itertools
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Tuple

from .chase import Answer, Status
from .core import (Atom, FreshVars, Instance, apply_renaming, canonical, entails_any,
                   find_homomorphism, sort_key, sorted_atoms, variables)
from .rules import Egd, Tgd

log = logging.getLogger(__name__)


class Kind(str, enum.Enum):
    FACTOR = "factor"
    TGD = "tgd"
    EGD = "egd"


@dataclass(frozen=True)
class ResolutionBudget:
    max_resolvents: int = 2_000
    max_atoms: int = 16
    max_vars: int = 32

    def __post_init__(self):
        if min(self.max_resolvents, self.max_atoms, self.max_vars) < 1:
            raise ValueError("budgets must be positive")


@dataclass
class RewritingSet:
    queries: List[Instance]
    status: Status
    generation: Dict[Instance, int] = field(default_factory=dict)
    produced: int = 0
    history: List[Tuple[int, Instance]] = field(default_factory=list)

    @property
    def fixpoint(self) -> bool:
        return self.status is Status.FIXPOINT


# --------------------------------------------------------------------------
# unification

class _Unifier:
    """Union-find over terms; representatives prefer rigid terms, then query variables."""

    __slots__ = ("parent", "prio")

    def __init__(self, prio, parent=None):
        self.prio = prio
        self.parent = dict(parent or {})

    def copy(self) -> "_Unifier":
        return _Unifier(self.prio, self.parent)

    def find(self, t):
        p = self.parent
        while t in p:
            t = p[t]
        return t

    def union(self, a, b) -> bool:
        a, b = self.find(a), self.find(b)
        if a == b:
            return True
        ra, rb = not isinstance(a, str), not isinstance(b, str)
        if ra and rb:
            return False
        if self.prio(b) < self.prio(a):
            a, b = b, a
        self.parent[b] = a
        return True

    def unify_atoms(self, a: Atom, b: Atom) -> bool:
        if a.pred != b.pred or len(a.args) != len(b.args):
            return False
        return all(self.union(s, t) for s, t in zip(a.args, b.args))

    def subst(self, vs) -> dict:
        return {v: self.find(v) for v in vs}


def _prio_for(qvars):
    def prio(t):
        if not isinstance(t, str):
            return (0, "")
        return (1 if t in qvars else 2, t)
    return prio


def mgu(a: Atom, b: Atom) -> Optional[dict]:
    """Most general unifier of two atoms as a renaming, or ``None``."""
    u = _Unifier(_prio_for(variables([a, b])))
    if not u.unify_atoms(a, b):
        return None
    return u.subst(variables([a, b]))


# --------------------------------------------------------------------------
# one-step resolvents

def _factorings(q: Instance) -> Iterator[Instance]:
    atoms = sorted_atoms(q)
    for a, b in itertools.combinations(atoms, 2):
        s = mgu(a, b)
        if s is not None:
            yield apply_renaming(q, s)


def _tgd_resolvents(q: Instance, r: Tgd, fresh: FreshVars) -> Iterator[Instance]:
    ren = {v: fresh() for v in sorted(variables(r.body) | variables(r.head))}
    body, head = apply_renaming(r.body, ren), sorted_atoms(apply_renaming(r.head, ren))
    zs = {ren[z] for z in r.existentials}
    xs = {ren[x] for x in r.frontier}
    qatoms = sorted_atoms(q)
    qvars = variables(qatoms)
    allvars = qvars | variables(body) | variables(head)
    heads_by_pred: Dict[tuple, List[Atom]] = {}
    for h in head:
        heads_by_pred.setdefault((h.pred, len(h.args)), []).append(h)
    if not any((a.pred, len(a.args)) in heads_by_pred for a in qatoms):
        return

    def z_ok(u: _Unifier) -> bool:
        seen = {}
        for z in zs:
            rep = u.find(z)
            if not isinstance(rep, str) or rep in seen:
                return False
            seen[rep] = z
        for x in xs:
            if u.find(x) in seen:
                return False
        return True

    def rec(k: int, u: _Unifier, used: bool):
        if k == len(qatoms):
            if used:
                yield u
            return
        a = qatoms[k]
        yield from rec(k + 1, u, used)
        for h in heads_by_pred.get((a.pred, len(a.args)), ()):
            u2 = u.copy()
            if u2.unify_atoms(a, h) and z_ok(u2):
                yield from rec(k + 1, u2, True)

    for u in rec(0, _Unifier(_prio_for(qvars)), False):
        s = u.subst(allvars)
        hs = apply_renaming(head, s)
        res = (apply_renaming(qatoms, s) - hs) | apply_renaming(body, s)
        rv = variables(res)
        if any(s[z] in rv for z in zs):
            continue
        yield res


def _egd_resolvents(q: Instance, e: Egd, fresh: FreshVars) -> Iterator[Instance]:
    qatoms = sorted_atoms(q)
    occ: Dict[str, List[Tuple[int, int]]] = {}
    for i, a in enumerate(qatoms):
        for k, t in enumerate(a.args):
            if isinstance(t, str):
                occ.setdefault(t, []).append((i, k))
    for v in sorted(occ):
        o = occ[v]
        for m in range(1, len(o)):
            for part in itertools.combinations(o, m):
                w = fresh()
                to_w = set(part)
                new = frozenset(
                    Atom(a.pred, tuple(w if (i, k) in to_w else t for k, t in enumerate(a.args)))
                    for i, a in enumerate(qatoms))
                ren = {z: fresh() for z in sorted(variables(e.body))}
                ren[e.lhs], ren[e.rhs] = v, w
                yield new | apply_renaming(e.body, ren)


def raw_resolvents(q: Iterable[Atom], sigma) -> Iterator[Tuple[Kind, object, Instance]]:
    """All one-step resolvents with the query's own variable names kept."""
    q = frozenset(q)
    fresh = FreshVars(variables(q), prefix="_r")
    for res in _factorings(q):
        yield Kind.FACTOR, None, res
    for r in sigma:
        if isinstance(r, Tgd):
            for res in _tgd_resolvents(q, r, fresh):
                yield Kind.TGD, r, res
        else:
            for res in _egd_resolvents(q, r, fresh):
                yield Kind.EGD, r, res


def resolvents(q: Iterable[Atom], sigma) -> List[Instance]:
    """Canonical one-step resolvents, deduplicated and sorted."""
    return sorted({canonical(r) for _, _, r in raw_resolvents(q, sigma)}, key=sort_key)


# --------------------------------------------------------------------------
# saturation

def saturated_resolution(qs: Iterable[Iterable[Atom]], sigma,
                         budget: Optional[ResolutionBudget] = None,
                         max_generations: Optional[int] = None,
                         stop=None) -> RewritingSet:
    """Saturate ``qs`` under resolution, keeping only most general queries.

    A candidate is discarded when some kept query maps into it; kept queries
    that the candidate maps into are removed.  ``stop`` is called on each
    admitted query and ends the run early when it returns true.
    """
    budget = budget or ResolutionBudget()
    sigma = list(sigma)
    kept: Dict[Instance, int] = {}
    queue: deque = deque()
    produced = 0
    exceeded = False
    history: List[Tuple[int, Instance]] = []

    def admit(j: Instance, gen: int) -> bool:
        if j in kept or any(find_homomorphism(k, j) is not None for k in kept):
            return False
        for k in [k for k in kept if find_homomorphism(j, k) is not None]:
            del kept[k]
        kept[j] = gen
        queue.append(j)
        history.append((gen, j))
        return True

    def result(status):
        qs_ = sorted(kept, key=sort_key)
        return RewritingSet(qs_, status, dict(kept), produced, history)

    for q in qs:
        j = canonical(q)
        if admit(j, 0) and stop and stop(j):
            return result(Status.FIXPOINT)

    while queue:
        q = queue.popleft()
        if q not in kept:
            continue
        gen = kept[q]
        if max_generations is not None and gen >= max_generations:
            exceeded = True
            continue
        for j in resolvents(q, sigma):
            if len(j) > budget.max_atoms or len(variables(j)) > budget.max_vars:
                exceeded = True
                continue
            produced += 1
            if produced > budget.max_resolvents:
                log.debug("resolution budget exhausted after %d resolvents", produced)
                return result(Status.BUDGET_EXCEEDED)
            if admit(j, gen + 1) and stop and stop(j):
                return result(Status.FIXPOINT)
    return result(Status.BUDGET_EXCEEDED if exceeded else Status.FIXPOINT)


def certain_via_resolution(d: Iterable[Atom], sigma, qs: Iterable[Iterable[Atom]],
                           budget: Optional[ResolutionBudget] = None) -> Answer:
    return resolution_witness(d, sigma, qs, budget)[0]


def resolution_witness(d: Iterable[Atom], sigma, qs: Iterable[Iterable[Atom]],
                       budget: Optional[ResolutionBudget] = None) -> Tuple[Answer, Optional[Instance]]:
    """The answer together with a rewriting query that maps into ``d``."""
    d = frozenset(d)
    hit = []

    def stop(j):
        if entails_any(d, [j]):
            hit.append(j)
            return True
        return False

    res = saturated_resolution(qs, sigma, budget, stop=stop)
    if hit:
        return Answer.YES, hit[0]
    return (Answer.NO if res.fixpoint else Answer.UNKNOWN), None


__all__ = ["Kind", "ResolutionBudget", "RewritingSet", "mgu", "raw_resolvents", "resolvents",
           "saturated_resolution", "certain_via_resolution", "resolution_witness"]
