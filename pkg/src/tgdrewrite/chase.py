"""Chase steps, the saturated chase, and chase-based certain answering."""
from __future__ import annotations

import enum
import logging
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, List, Optional, Tuple

from .core import (Atom, Const, FreshVars, Instance, _Index, apply_renaming, canonical, entails_any,
                   find_homomorphism, iter_homomorphisms, sort_key, variables)
from .rules import Tgd

log = logging.getLogger(__name__)


class Answer(str, enum.Enum):
    YES = "Yes"
    NO = "No"
    UNKNOWN = "Unknown"
    INCONSISTENT = "Inconsistent"

    def __str__(self) -> str:
        return self.value


class Status(str, enum.Enum):
    FIXPOINT = "Fixpoint"
    BUDGET_EXCEEDED = "BudgetExceeded"

    def __str__(self) -> str:
        return self.value


class InconsistentMerge(Exception):
    """An egd demanded equating two distinct hard constants."""


@dataclass(frozen=True)
class ChaseBudget:
    max_steps: int = 10_000
    max_atoms: int = 1_000
    max_instances: int = 1_000

    def __post_init__(self):
        if min(self.max_steps, self.max_atoms, self.max_instances) < 1:
            raise ValueError("budgets must be positive")


@dataclass
class SaturationResult:
    instances: List[Instance]
    status: Status
    steps: int

    @property
    def fixpoint(self) -> bool:
        return self.status is Status.FIXPOINT


def merge_terms(a, b):
    """Return ``(old, new)``: occurrences of ``old`` are replaced by ``new``."""
    if isinstance(a, str) and isinstance(b, str):
        return (b, a)
    if isinstance(b, str):
        return (b, a)
    if isinstance(a, str):
        return (a, b)
    if getattr(a, "hard", False) and getattr(b, "hard", False):
        raise InconsistentMerge(f"cannot equate {a} and {b}")
    if getattr(a, "hard", False):
        return (b, a)
    if getattr(b, "hard", False):
        return (a, b)
    return (b, a)


def _replace(i: Iterable[Atom], old, new) -> Instance:
    return frozenset(Atom(a.pred, tuple(new if t == old else t for t in a.args)) for a in i)


def iter_triggers(i: Instance, sigma, fresh: FreshVars, restricted: bool = False,
                  frontier_ok: Optional[Callable] = None) -> Iterator[Instance]:
    """Yield one-step successors ``J != I`` in (rule index, match) order.

    With ``restricted`` a tgd trigger whose head already maps into ``I``
    (frontier fixed) is skipped; ``frontier_ok`` filters tgd triggers by the
    image of their frontier (used by the flat chase).
    """
    idx = _Index(i)
    for r in sigma:
        for theta in list(iter_homomorphisms(r.body, (), index=idx)):
            if isinstance(r, Tgd):
                fr = {x: theta[x] for x in r.frontier}
                if frontier_ok is not None and not frontier_ok(fr.values()):
                    continue
                if restricted and next(iter_homomorphisms(r.head, (), fixed=fr, index=idx), None) is not None:
                    continue
                ren = dict(fr)
                for z in sorted(r.existentials):
                    ren[z] = fresh()
                new = apply_renaming(r.head, ren)
                if new <= i:
                    continue
                yield i | new
            else:
                a, b = theta[r.lhs], theta[r.rhs]
                if a == b:
                    continue
                old, nw = merge_terms(a, b)
                yield _replace(i, old, nw)


def chase_successors(i: Iterable[Atom], sigma) -> List[Instance]:
    """All one-step chase successors (canonical), ``I`` itself included."""
    i = frozenset(i)
    fresh = FreshVars(variables(i))
    out = {canonical(i)}
    for j in iter_triggers(i, sigma, fresh):
        out.add(canonical(j))
    return sorted(out, key=sort_key)


def saturated_chase(d: Iterable[Iterable[Atom]], sigma, budget: Optional[ChaseBudget] = None,
                    frontier_ok: Optional[Callable] = None,
                    stop: Optional[Callable[[Instance], bool]] = None) -> SaturationResult:
    """Saturate ``d`` under chase steps, keeping homomorphically maximal instances.

    A candidate ``J`` is dropped when it maps into some kept instance; kept
    instances mapping into an accepted ``J`` are removed.  The instance being
    expanded always maps into its successors, so its expansion ends at the
    first accepted one, which is queued (FIFO).  ``stop`` is called on every
    admitted instance and ends the run early when it returns true.
    """
    budget = budget or ChaseBudget()
    sigma = list(sigma)
    kept: dict = {}
    queue: deque = deque()
    steps = 0
    status = Status.FIXPOINT

    def subsumed(j: Instance) -> bool:
        return j in kept or any(find_homomorphism(j, k) is not None for k in kept)

    def admit(j: Instance) -> bool:
        for k in [k for k in kept if find_homomorphism(k, j) is not None]:
            del kept[k]
        kept[j] = None
        queue.append(j)
        return bool(stop and stop(j))

    for inst in d:
        j = canonical(inst)
        if not subsumed(j) and admit(j):
            return SaturationResult(sorted(kept, key=sort_key), status, steps)

    while queue and status is Status.FIXPOINT:
        i = queue.popleft()
        if i not in kept:
            continue
        fresh = FreshVars(variables(i))
        for j in iter_triggers(i, sigma, fresh, restricted=True, frontier_ok=frontier_ok):
            j = canonical(j)
            if subsumed(j):
                continue
            if len(j) > budget.max_atoms or steps >= budget.max_steps:
                status = Status.BUDGET_EXCEEDED
                break
            steps += 1
            if admit(j):
                return SaturationResult(sorted(kept, key=sort_key), status, steps)
            if len(kept) > budget.max_instances:
                status = Status.BUDGET_EXCEEDED
            break
    log.debug("saturated chase: %s after %d steps, %d instances", status, steps, len(kept))
    return SaturationResult(sorted(kept, key=sort_key), status, steps)


def certain_via_chase(d: Iterable[Atom], sigma, qs: Iterable[Iterable[Atom]],
                      budget: Optional[ChaseBudget] = None,
                      frontier_ok: Optional[Callable] = None) -> Answer:
    """Yes/No/Unknown for ``d ∧ Σ ⊨ 𝒬``.

    Every admitted instance is tested, so Yes is reported as soon as one
    entails some query; No needs a fixpoint.
    """
    return chase_witness(d, sigma, qs, budget, frontier_ok)[0]


def chase_witness(d: Iterable[Atom], sigma, qs: Iterable[Iterable[Atom]],
                  budget: Optional[ChaseBudget] = None,
                  frontier_ok: Optional[Callable] = None) -> Tuple[Answer, Optional[Instance]]:
    """Like :func:`certain_via_chase`, also returning the instance that entails a query."""
    qs = [frozenset(q) for q in qs]
    if any(not q for q in qs):
        return Answer.YES, frozenset(d)
    hit = []

    def stop(j):
        if entails_any(j, qs):
            hit.append(j)
            return True
        return False

    try:
        res = saturated_chase([frozenset(d)], sigma, budget, frontier_ok, stop)
    except InconsistentMerge:
        return Answer.INCONSISTENT, None
    if hit:
        return Answer.YES, hit[0]
    return (Answer.NO if res.fixpoint else Answer.UNKNOWN), None


def chase_instance(d: Iterable[Atom], sigma, budget: Optional[ChaseBudget] = None,
                   frontier_ok: Optional[Callable] = None):
    """Chase a single instance; returns ``(instance, status)``."""
    res = saturated_chase([frozenset(d)], sigma, budget, frontier_ok)
    return res.instances[0], res.status


def flat_chase(d: Iterable[Atom], sigma, qs, budget: Optional[ChaseBudget] = None) -> Answer:
    """Chase restricted to tgd triggers whose frontier lands in vars(d)."""
    d = frozenset(d)
    pin = {v: Const(f"flat:{v}", False) for v in variables(d)}
    pinned = apply_renaming(d, pin)
    return certain_via_chase(pinned, [r for r in sigma if isinstance(r, Tgd)], qs, budget,
                             frontier_ok=lambda ts: all(not isinstance(t, str) for t in ts))


__all__ = ["Answer", "Status", "ChaseBudget", "SaturationResult", "InconsistentMerge",
           "chase_successors", "saturated_chase", "certain_via_chase", "chase_witness", "chase_instance",
           "flat_chase", "iter_triggers", "merge_terms"]
