"""Syntactic classes of tgds and the simplification procedure.

Simplifying an atom ``A`` of a rule ``r`` replaces it by a fresh atom over
the variables ``A`` shares with the head, provided its remaining variables
occur nowhere else in the body.  Rules whose heads can produce ``A`` get
companion rules deriving the fresh predicate directly.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Set, Tuple

from .core import Atom, FreshVars, apply_renaming, sorted_atoms, variables
from .rules import Tgd, canonical_rules, rule_key, rule_predicates, tgds_of

log = logging.getLogger(__name__)

Position = Tuple[str, int]


@dataclass(frozen=True)
class Classification:
    lav: bool
    lossless: bool
    acyclic: bool
    datalog: bool

    def as_dict(self) -> dict:
        return {"lav": self.lav, "lossless": self.lossless, "acyclic": self.acyclic,
                "datalog": self.datalog}


def is_lav(sigma) -> bool:
    return all(len(r.body) <= 1 for r in tgds_of(sigma))


def is_lossless(sigma) -> bool:
    return all(variables(r.body) <= variables([a]) for r in tgds_of(sigma) for a in r.head)


def acyclic_order(sigma) -> Optional[List[str]]:
    """A linear order putting every head predicate strictly before every body
    predicate of the same rule, or ``None`` when a cycle (self-loops included)
    forbids one."""
    tgds = tgds_of(sigma)
    preds = sorted(rule_predicates(tgds))
    succ: Dict[str, Set[str]] = {p: set() for p in preds}
    for r in tgds:
        for h in r.head:
            for b in r.body:
                succ[h.pred].add(b.pred)
    indeg = {p: 0 for p in preds}
    for p in preds:
        for q in succ[p]:
            indeg[q] += 1
    ready = sorted(p for p in preds if indeg[p] == 0)
    order = []
    while ready:
        p = ready.pop(0)
        order.append(p)
        for q in sorted(succ[p]):
            indeg[q] -= 1
            if indeg[q] == 0:
                ready.append(q)
        ready.sort()
    return order if len(order) == len(preds) else None


def is_acyclic(sigma) -> bool:
    return acyclic_order(sigma) is not None


def classify(sigma) -> Classification:
    tgds = tgds_of(sigma)
    return Classification(lav=is_lav(tgds), lossless=is_lossless(tgds), acyclic=is_acyclic(tgds),
                          datalog=all(r.is_datalog for r in tgds))


def count_vector(q, order: List[str]) -> tuple:
    """Atom counts per predicate, listed in ``order`` (for the acyclic measure)."""
    counts: Dict[str, int] = {}
    for a in q:
        counts[a.pred] = counts.get(a.pred, 0) + 1
    return tuple(counts.get(p, 0) for p in order)


# --------------------------------------------------------------------------
# affected positions and stickiness

def positions(t, atoms: Iterable[Atom]) -> Set[Position]:
    return {(a.pred, k + 1) for a in atoms for k, s in enumerate(a.args) if s == t}


def gav_projections(sigma) -> List[Tgd]:
    return [Tgd(r.body, [a]) for r in tgds_of(sigma) for a in sorted_atoms(r.head)]


def affected_positions(sigma) -> Set[Position]:
    """Least set closed under: positions of body-only variables of a GAV
    projection are affected; a frontier variable whose head positions are
    all affected has all its body positions affected."""
    projs = gav_projections(sigma)
    aff: Set[Position] = set()
    for p in projs:
        for v in p.body_only:
            aff |= positions(v, p.body)
    changed = True
    while changed:
        changed = False
        for p in projs:
            for u in p.frontier:
                if positions(u, p.head) <= aff:
                    new = positions(u, p.body) - aff
                    if new:
                        aff |= new
                        changed = True
    return aff


@dataclass(frozen=True)
class StickyReport:
    sticky: bool
    witness: Optional[Tuple[Tgd, str]] = None


def sticky_report(sigma, literal: bool = False) -> StickyReport:
    """Every variable whose body positions are all affected sits in one body atom.

    By default body-only variables are checked as well as frontier ones;
    ``literal=True`` checks frontier variables only, which admits sets such
    as ``B(x,x,x), B(x,y,y) -> B(y,y,y)`` whose rewritings are infinite.
    """
    aff = affected_positions(sigma)
    for p in gav_projections(sigma):
        cands = p.frontier if literal else variables(p.body)
        for u in sorted(cands):
            if positions(u, p.body) <= aff and sum(1 for a in p.body if u in a.args) > 1:
                return StickyReport(False, (p, u))
    return StickyReport(True)


def is_sticky(sigma, literal: bool = False) -> bool:
    return sticky_report(sigma, literal).sticky


def is_sticky_original(sigma) -> bool:
    """Stricter variant: a marked variable may occur only once in the body."""
    aff = affected_positions(sigma)
    for p in gav_projections(sigma):
        for u in variables(p.body):
            if positions(u, p.body) <= aff:
                if sum(a.args.count(u) for a in p.body) > 1:
                    return False
    return True


# --------------------------------------------------------------------------
# simplification

def _split(r: Tgd, a: Atom) -> Tuple[List[str], Set[str]]:
    hv = variables(r.head)
    xs = []
    for t in a.args:
        if isinstance(t, str) and t in hv and t not in xs:
            xs.append(t)
    return xs, variables([a]) - hv


def simplifiable_atoms(r: Tgd) -> List[Atom]:
    out = []
    for a in sorted_atoms(r.body):
        _, ys = _split(r, a)
        rest = variables(r.body - {a})
        if ys and not (ys & rest):
            out.append(a)
    return out


def _unify_rigid(a: Atom, h: Atom, rigid: Set[str], pref: Set[str]) -> Optional[dict]:
    """MGU of ``a`` and ``h`` where ``rigid`` variables behave as constants."""
    if a.pred != h.pred or len(a.args) != len(h.args):
        return None
    parent: dict = {}

    def find(t):
        while t in parent:
            t = parent[t]
        return t

    def prio(t):
        return (0 if t in rigid else 1 if t in pref else 2, t)

    for s, t in zip(a.args, h.args):
        s, t = find(s), find(t)
        if s == t:
            continue
        if s in rigid and t in rigid:
            return None
        if prio(t) < prio(s):
            s, t = t, s
        parent[t] = s
    return {v: find(v) for v in variables([a, h])}


def fresh_predicate(prefix: str, taken: Iterable[str], counter: List[int]) -> str:
    taken = set(taken)
    while True:
        name = f"{prefix}{counter[0]}"
        counter[0] += 1
        if name not in taken:
            return name


@dataclass
class StepRecord:
    rule: Tgd
    atom: Atom
    predicate: str
    frontier: Tuple[str, ...]
    vars_before: int
    vars_after: int


def simplify_step(sigma, r: Tgd, a: Atom, pred: Optional[str] = None,
                  record: Optional[list] = None) -> List[Tgd]:
    """``Σ_{A,r}``: replace ``a`` in ``r`` by a fresh atom and add companion rules."""
    sigma = tgds_of(sigma)
    if r not in sigma:
        raise ValueError("rule is not in the set")
    if a not in simplifiable_atoms(r):
        raise ValueError(f"{a} cannot be simplified in {r}")
    xs, _ = _split(r, a)
    if pred is None:
        pred = fresh_predicate("simp$", rule_predicates(sigma), [0])
    new_r = Tgd((r.body - {a}) | {Atom(pred, tuple(xs))}, r.head)
    out = [x for x in sigma if x != r]
    if not new_r.head <= new_r.body:
        out.append(new_r)
    for r2 in sigma:
        fresh = FreshVars(variables(r2.body) | variables(r2.head), prefix="_s")
        ren = {v: fresh() for v in sorted(variables([a]))}
        a2 = apply_renaming([a], ren)
        (a2,) = a2
        for h in sorted_atoms(r2.head):
            s = _unify_rigid(a2, h, r2.existentials, variables(r2.body))
            if s is None:
                continue
            body = apply_renaming(r2.body, s)
            head = Atom(pred, tuple(s[ren[x]] for x in xs))
            if head not in body:
                out.append(Tgd(body, [head]))
    if record is not None:
        record.append(StepRecord(r, a, pred, tuple(xs), len(variables(r.body) | variables(r.head)),
                                 len(variables(new_r.body) | variables(new_r.head))))
    return canonical_rules(out)


@dataclass
class SimplificationResult:
    simplified: List[Tgd]
    transfer: List[Tgd] = field(default_factory=list)
    inverse: List[Tgd] = field(default_factory=list)
    trace: List[StepRecord] = field(default_factory=list)
    complete: bool = True


def _pattern(r: Tgd, a: Atom) -> tuple:
    xs, _ = _split(r, a)
    return rule_key(Tgd([a], [Atom("$", tuple(xs))]))


def simplify_fixpoint(sigma, max_steps: int = 500) -> SimplificationResult:
    """Simplify in canonical (rule, atom) order until nothing is simplifiable.

    An atom pattern that was simplified before reuses its predicate, and a step
    that leaves the set unchanged marks the pair as done; without this a
    companion rule such as ``C(y,y) -> R()`` would be simplified forever.
    A step leading back to a set seen before counts as unchanged.
    """
    cur = canonical_rules(tgds_of(sigma))
    counter = [0]
    trace: List[StepRecord] = []
    taken = set(rule_predicates(cur))
    names: Dict[tuple, str] = {}
    done: Set[tuple] = set()
    seen = {frozenset(map(rule_key, cur))}
    complete = True
    for _ in range(max_steps):
        target = next(((r, a) for r in cur for a in simplifiable_atoms(r)
                       if (rule_key(r), a) not in done), None)
        if target is None:
            break
        r, a = target
        key = _pattern(r, a)
        pred = names.get(key)
        if pred is None:
            pred = fresh_predicate("simp$", taken, counter)
            taken.add(pred)
        rec: list = []
        nxt = simplify_step(cur, r, a, pred, rec)
        state = frozenset(map(rule_key, nxt))
        if state in seen:
            done.add((rule_key(r), a))
            continue
        seen.add(state)
        assert rec[0].vars_after < rec[0].vars_before, "simplification must shrink the rule"
        if key not in names:
            names[key] = pred
            trace += rec
        cur = nxt
    else:
        complete = not any((rule_key(r), a) not in done for r in cur for a in simplifiable_atoms(r))
    transfer = [Tgd([t.atom], [Atom(t.predicate, t.frontier)]) for t in trace]
    inverse = [Tgd([Atom(t.predicate, t.frontier)], [t.atom]) for t in trace]
    return SimplificationResult(cur, transfer, inverse, trace, complete)


__all__ = ["Classification", "classify", "is_lav", "is_lossless", "is_acyclic", "acyclic_order",
           "count_vector", "positions", "gav_projections", "affected_positions", "StickyReport",
           "sticky_report", "is_sticky", "is_sticky_original", "simplifiable_atoms",
           "simplify_step", "simplify_fixpoint", "SimplificationResult", "StepRecord"]
