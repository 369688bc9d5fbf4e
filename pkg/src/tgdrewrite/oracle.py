"""Bounded ground-truth oracle: a parallel restricted chase.

Deliberately independent of the other engines: its own matcher, its own
egd handling (union-find over terms, constants win over nulls), no
canonical forms.  Used only for cross-checking.
"""
from __future__ import annotations

import itertools
from typing import Dict, Iterable, List, Optional, Tuple

from .chase import Answer
from .core import Atom, Const
from .rules import Egd, Tgd


class OracleInconsistent(Exception):
    pass


def _match(body: List[Atom], facts: Dict[str, List[tuple]], env: dict):
    if not body:
        yield dict(env)
        return
    first, rest = body[0], body[1:]
    for tup in facts.get(first.pred, ()):
        if len(tup) != len(first.args):
            continue
        new = dict(env)
        ok = True
        for s, t in zip(first.args, tup):
            if isinstance(s, str):
                if new.setdefault(s, t) != t:
                    ok = False
                    break
            elif s != t:
                ok = False
                break
        if ok:
            yield from _match(rest, facts, new)


def _facts(inst) -> Dict[str, List[tuple]]:
    out: Dict[str, List[tuple]] = {}
    for a in inst:
        out.setdefault(a.pred, []).append(a.args)
    for v in out.values():
        v.sort(key=repr)
    return out


def _holds(atoms: Iterable[Atom], inst, env: Optional[dict] = None) -> bool:
    body = sorted(atoms, key=repr)
    return next(_match(body, _facts(inst), dict(env or {})), None) is not None


class _Terms:
    """Union-find; the representative of a class is its constant if any."""

    def __init__(self):
        self.parent: dict = {}

    def find(self, t):
        while self.parent.get(t, t) != t:
            t = self.parent[t]
        return t

    def union(self, a, b) -> bool:
        a, b = self.find(a), self.find(b)
        if a == b:
            return False
        ca, cb = isinstance(a, Const), isinstance(b, Const)
        if ca and cb:
            if a.hard and b.hard:
                raise OracleInconsistent(f"{a} = {b}")
            if b.hard or (not a.hard and repr(b) < repr(a)):
                a, b = b, a
        elif cb or (not ca and repr(b) < repr(a)):
            a, b = b, a
        self.parent[b] = a
        return True


def oracle_chase(d: Iterable[Atom], sigma, max_rounds: int = 40,
                 max_atoms: int = 4000) -> Tuple[frozenset, bool]:
    """Chase ``d`` round by round; returns ``(instance, terminated)``."""
    inst, done, _ = _run(d, sigma, max_rounds, max_atoms)
    return inst, done


def _run(d, sigma, max_rounds, max_atoms):
    """The chase proper; also returns the term union-find.

    Raises :class:`OracleInconsistent` when two hard constants are equated.
    """
    inst = set(d)
    tgds = [r for r in sigma if isinstance(r, Tgd)]
    egds = [r for r in sigma if isinstance(r, Egd)]
    uf = _Terms()
    counter = itertools.count()
    for _ in range(max_rounds):
        while True:
            facts = _facts(inst)
            changed = False
            for e in egds:
                for env in _match(sorted(e.body, key=repr), facts, {}):
                    changed |= uf.union(env[e.lhs], env[e.rhs])
            if not changed:
                break
            inst = {Atom(a.pred, tuple(uf.find(t) for t in a.args)) for a in inst}
        facts = _facts(inst)
        new = set()
        for r in tgds:
            fr = sorted(r.frontier)
            head = sorted(r.head, key=repr)
            for env in _match(sorted(r.body, key=repr), facts, {}):
                fix = {x: env[x] for x in fr}
                if next(_match(head, facts, fix), None) is not None:
                    continue
                ren = dict(fix)
                for z in sorted(r.existentials):
                    ren[z] = f"_o{next(counter)}"
                new |= {Atom(a.pred, tuple(ren[t] for t in a.args)) for a in head}
        new -= inst
        if not new:
            return frozenset(inst), True, uf
        inst |= new
        if len(inst) > max_atoms:
            return frozenset(inst), False, uf
    return frozenset(inst), False, uf


def oracle_certain(d: Iterable[Atom], sigma, qs: Iterable[Iterable[Atom]], **kw) -> Answer:
    """Boolean certain answer by bounded chasing."""
    qs = [frozenset(q) for q in qs]
    try:
        inst, done = oracle_chase(d, sigma, **kw)
    except OracleInconsistent:
        return Answer.INCONSISTENT
    if any(_holds(q, inst) for q in qs):
        return Answer.YES
    return Answer.NO if done else Answer.UNKNOWN


def _clause_answers(atoms, eqs, free, inst, consts) -> set:
    """Representative tuples for ``free`` witnessed by one clause in ``inst``."""
    out = set()
    body = sorted(atoms, key=repr)
    evars = sorted({t for e in eqs for t in (e.left, e.right) if isinstance(t, str)}
                   | set(free))
    facts = _facts(inst)
    for env in _match(body, facts, {}):
        loose = [v for v in evars if v not in env]
        for vals in itertools.product(sorted(consts, key=repr), repeat=len(loose)):
            full = dict(env)
            full.update(zip(loose, vals))
            val = lambda t: full[t] if isinstance(t, str) else t
            if all(val(e.left) == val(e.right) for e in eqs):
                tup = tuple(val(x) for x in free)
                if all(isinstance(t, Const) for t in tup):
                    out.add(tup)
    return out


def _query_consts(query) -> set:
    out = set()
    for atoms, eqs in query.clauses:
        out |= {t for a in atoms for t in a.args if isinstance(t, Const)}
        out |= {t for e in eqs for t in (e.left, e.right) if isinstance(t, Const)}
    return out


def oracle_answers(d: Iterable[Atom], sigma, query, max_rounds: int = 40, max_atoms: int = 4000):
    """Certain-answer tuples of a UCQ= query, ``"Unsat"`` or ``None`` (unknown).

    Answers are computed on the terminated chase instance over class
    representatives and then expanded to every constant of each class.
    """
    d = frozenset(d)
    try:
        inst, done, uf = _run(d, sigma, max_rounds, max_atoms)
    except OracleInconsistent:
        return "Unsat"
    if not done:
        return None
    names = {t for a in d for t in a.args if isinstance(t, Const)} | _query_consts(query)
    cls: Dict[object, set] = {}
    for c in names:
        cls.setdefault(uf.find(c), set()).add(c)
    fix = lambda t: uf.find(t) if isinstance(t, Const) else t
    reps = {t for a in inst for t in a.args if isinstance(t, Const)} | set(cls)
    out = set()
    for atoms, eqs in query.clauses:
        atoms = [Atom(a.pred, tuple(fix(t) for t in a.args)) for a in atoms]
        eqs = [type(e)(fix(e.left), fix(e.right)) for e in eqs]
        for tup in _clause_answers(atoms, eqs, query.free, inst, reps):
            out |= set(itertools.product(*(sorted(cls.get(t, {t}), key=repr) for t in tup)))
    return out


def oracle_satisfiable(d: Iterable[Atom], sigma, **kw) -> Optional[bool]:
    try:
        _, done = oracle_chase(d, sigma, **kw)
    except OracleInconsistent:
        return False
    return True if done else None
