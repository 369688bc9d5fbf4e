"""Seeded random cases for differential testing.

Every generator draws small rule sets (at most 4 predicates of arity at
most 3, at most 4 rules) and databases of at most 6 atoms, then rejects
draws until the class test of the analysers accepts.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

from .classes import is_acyclic, is_lav, is_lossless, is_sticky
from .core import Atom, Const, Instance, variables
from .datalog import guard_report, weak_acyclicity
from .integration import integrate_all
from .rules import Egd, Equality, FunctionalDependency, Tgd, UCQEqQuery

PREDICATES = ("A", "B", "C", "D")


@dataclass
class Case:
    sigma: list
    database: Instance
    query: Instance
    fds: List[FunctionalDependency] = field(default_factory=list)
    ucq: Optional[UCQEqQuery] = None

    def program_text(self) -> str:
        lines = [f"{r}." for r in self.sigma]
        lines += [f"{fd}." for fd in self.fds]
        if self.database:
            lines.append(", ".join(sorted(map(str, self.database))) + ".")
        q = self.ucq or UCQEqQuery((), ((self.query, ()),), "q")
        lines.append(str(q))
        return "\n".join(lines) + "\n"


def _schema(rng: random.Random, max_arity: int = 3) -> Dict[str, int]:
    n = rng.randint(2, len(PREDICATES))
    return {p: rng.randint(1, max_arity) for p in PREDICATES[:n]}


def _atom(rng, schema, pool) -> Atom:
    p = rng.choice(sorted(schema))
    return Atom(p, tuple(rng.choice(pool) for _ in range(schema[p])))


def _tgd(rng, schema, max_body=2, max_head=2, exist_p=0.4) -> Tgd:
    pool = ["x", "y", "z", "u"][: rng.randint(1, 4)]
    body = {_atom(rng, schema, pool) for _ in range(rng.randint(1, max_body))}
    bv = sorted(variables(body))
    head_pool = bv + (["e1", "e2"] if rng.random() < exist_p else [])
    head = {_atom(rng, schema, head_pool) for _ in range(rng.randint(1, max_head))}
    return Tgd(body, head)


def _egd(rng, schema) -> Optional[Egd]:
    p = rng.choice([p for p in sorted(schema)])
    n = schema[p]
    if n < 2:
        return None
    k = rng.randrange(n)
    xs = [f"x{i}" for i in range(n)]
    ys = [x if i != k and rng.random() < 0.7 else f"y{i}" for i, x in enumerate(xs)]
    if ys[k] == xs[k]:
        ys[k] = f"y{k}"
    return Egd({Atom(p, tuple(xs)), Atom(p, tuple(ys))}, xs[k], ys[k])


def _database(rng, schema, n_max=6, consts=("a", "b", "c"), null_p=0.3, soft_p=0.0) -> Instance:
    out = set()
    for _ in range(rng.randint(1, n_max)):
        p = rng.choice(sorted(schema))
        args = []
        for _ in range(schema[p]):
            if rng.random() < null_p:
                args.append(rng.choice(["n1", "n2"]))
            else:
                args.append(Const(rng.choice(consts), rng.random() >= soft_p))
        out.add(Atom(p, tuple(args)))
    soft = {t.label for a in out for t in a.args if isinstance(t, Const) and not t.hard}
    return frozenset(Atom(a.pred, tuple(Const(t.label, t.label not in soft) if isinstance(t, Const) else t
                                        for t in a.args)) for a in out)


def _query(rng, schema, max_atoms=2) -> Instance:
    pool = ["q1", "q2", "q3"]
    return frozenset(_atom(rng, schema, pool) for _ in range(rng.randint(1, max_atoms)))


CLASSES: Dict[str, Callable] = {
    "lav": is_lav,
    "lossless": is_lossless,
    "acyclic": is_acyclic,
    "sticky": is_sticky,
    "weakly_acyclic": lambda s: weak_acyclicity(s) and (is_lav(s) or is_lossless(s) or is_acyclic(s)
                                                        or is_sticky(s)),
    "guarded": lambda s: all(guard_report(r).guarded for r in s),
    "any": lambda s: True,
}


def random_rules(rng: random.Random, cls: str, max_rules: int = 4, max_tries: int = 10_000,
                 max_arity: int = 3, max_head: int = 2) -> tuple:
    test = CLASSES[cls]
    for _ in range(max_tries):
        schema = _schema(rng, max_arity)
        body_max = 1 if cls == "lav" else 2
        sigma = [_tgd(rng, schema, max_body=body_max, max_head=max_head) for _ in range(rng.randint(1, max_rules))]
        if any(not r.head - r.body for r in sigma):
            continue
        if test(sigma):
            return sigma, schema
    raise RuntimeError(f"no {cls} rule set found")


def random_case(rng: random.Random, cls: str = "weakly_acyclic", max_rules: int = 4) -> Case:
    sigma, schema = random_rules(rng, cls, max_rules)
    return Case(sigma, _database(rng, schema), _query(rng, schema))


def random_egd_case(rng: random.Random, max_tries: int = 10_000, soft_p: float = 0.3,
                    consts=("a", "b", "c")) -> Case:
    """Weakly acyclic tgds plus one or two egds.

    Fewer constants and fewer soft ones make clashes (unsatisfiable cases)
    more likely.
    """
    for _ in range(max_tries):
        sigma, schema = random_rules(rng, "weakly_acyclic", 3)
        egds = [e for e in (_egd(rng, schema) for _ in range(rng.randint(1, 2))) if e is not None]
        if egds:
            return Case(sigma + egds, _database(rng, schema, consts=consts, soft_p=soft_p), _query(rng, schema))
    raise RuntimeError("no egd case found")


def random_fd_case(rng: random.Random, max_tries: int = 10_000) -> Case:
    """Tgds with FDs that integrate successfully."""
    for _ in range(max_tries):
        sigma, schema = random_rules(rng, "weakly_acyclic", 3)
        binary = [p for p in sorted(schema) if schema[p] >= 2]
        if not binary:
            continue
        p = rng.choice(binary)
        n = schema[p]
        target = rng.randint(1, n)
        key = tuple(i for i in range(1, n + 1) if i != target and rng.random() < 0.8) or \
            (1 if target != 1 else 2,)
        fd = FunctionalDependency(p, n, key, target)
        out = integrate_all(sigma, [fd])
        if out.success and out.witnesses:
            return Case(sigma, _database(rng, schema, null_p=0.5), _query(rng, schema), [fd])
    raise RuntimeError("no FD-integrable case found")


def random_ucq(rng: random.Random, schema, n_free: int) -> UCQEqQuery:
    free = tuple(f"x{i}" for i in range(1, n_free + 1))
    clauses = []
    for _ in range(rng.randint(1, 2)):
        pool = list(free) + ["u", "w"]
        atoms = frozenset(_atom(rng, schema, pool) for _ in range(rng.randint(1, 2)))
        eqs = []
        for x in free:
            if x not in variables(atoms):
                eqs.append(Equality(x, rng.choice(sorted(variables(atoms)) or [Const("a")])))
        if rng.random() < 0.2:
            eqs.append(Equality(rng.choice(sorted(variables(atoms))), Const(rng.choice("ab"))))
        clauses.append((atoms, tuple(eqs)))
    return UCQEqQuery(free, tuple(clauses), "q")


def random_answer_case(rng: random.Random, with_egds: bool = False) -> Case:
    """Cases with constants and a UCQ= query with free variables."""
    sigma, schema = random_rules(rng, "weakly_acyclic", 3)
    if with_egds:
        e = _egd(rng, schema)
        if e is not None:
            sigma = sigma + [e]
    d = _database(rng, schema, soft_p=0.3 if with_egds else 0.0)
    q = random_ucq(rng, schema, rng.randint(0, 2))
    # a label keeps the hardness it has in the database
    soft = {t.label for a in d for t in a.args if isinstance(t, Const) and not t.hard}
    fix = lambda t: Const(t.label, t.label not in soft) if isinstance(t, Const) else t
    q = UCQEqQuery(q.free, tuple((frozenset(Atom(a.pred, tuple(map(fix, a.args))) for a in atoms),
                                  tuple(Equality(fix(e.left), fix(e.right)) for e in eqs))
                                 for atoms, eqs in q.clauses), q.name)
    return Case(sigma, d, frozenset(), ucq=q)


__all__ = ["Case", "CLASSES", "random_rules", "random_case", "random_egd_case", "random_fd_case",
           "random_ucq", "random_answer_case"]
