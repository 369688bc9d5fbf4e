"""Dependency types: tgds, egds, functional dependencies, UCQ= queries."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

from .core import (Atom, Const, Instance, apply_renaming, canonical_labeling, inst_str,
                   predicates, sort_key, term_str, variables)


@dataclass(frozen=True)
class Tgd:
    body: Instance
    head: Instance

    def __post_init__(self):
        object.__setattr__(self, "body", frozenset(self.body))
        object.__setattr__(self, "head", frozenset(self.head))

    @property
    def frontier(self) -> set:
        return variables(self.body) & variables(self.head)

    @property
    def body_only(self) -> set:
        return variables(self.body) - variables(self.head)

    @property
    def existentials(self) -> set:
        return variables(self.head) - variables(self.body)

    @property
    def is_datalog(self) -> bool:
        return not self.existentials

    def rename(self, ren) -> "Tgd":
        return Tgd(apply_renaming(self.body, ren), apply_renaming(self.head, ren))

    def __str__(self) -> str:
        return f"{_conj(self.body)} -> {_conj(self.head)}"


@dataclass(frozen=True)
class Egd:
    body: Instance
    lhs: str
    rhs: str

    def __post_init__(self):
        object.__setattr__(self, "body", frozenset(self.body))
        vs = variables(self.body)
        if self.lhs not in vs or self.rhs not in vs:
            raise ValueError(f"egd head variables must occur in the body: {self}")

    def rename(self, ren) -> "Egd":
        return Egd(apply_renaming(self.body, ren), ren.get(self.lhs, self.lhs), ren.get(self.rhs, self.rhs))

    def __str__(self) -> str:
        return f"{_conj(self.body)} -> {self.lhs} = {self.rhs}"


@dataclass(frozen=True)
class FunctionalDependency:
    """``pred[key] -> target`` with 1-based positions."""

    pred: str
    arity: int
    key: Tuple[int, ...]
    target: int

    def __post_init__(self):
        object.__setattr__(self, "key", tuple(sorted(set(self.key))))
        if not all(1 <= k <= self.arity for k in self.key):
            raise ValueError("key position out of range")
        if not 1 <= self.target <= self.arity or self.target in self.key:
            raise ValueError("target must be a non-key position")

    def as_egd(self) -> Egd:
        xs = [f"x{k}" for k in range(1, self.arity + 1)]
        ys = [x if (k + 1) in self.key else f"y{k + 1}" for k, x in enumerate(xs)]
        body = {Atom(self.pred, tuple(xs)), Atom(self.pred, tuple(ys))}
        return Egd(frozenset(body), xs[self.target - 1], ys[self.target - 1])

    def __str__(self) -> str:
        return f"fd {self.pred}[{','.join(map(str, self.key))}] -> {self.target}"


@dataclass(frozen=True)
class Equality:
    left: object
    right: object

    def __str__(self) -> str:
        return f"{term_str(self.left)} = {term_str(self.right)}"


@dataclass(frozen=True)
class UCQEqQuery:
    """``{(x1..xa) | Q_1 ∨ ... ∨ Q_m}``; each clause is atoms plus equalities."""

    free: Tuple[str, ...]
    clauses: Tuple[Tuple[Instance, Tuple[Equality, ...]], ...]
    name: str = "q"

    def __str__(self) -> str:
        parts = []
        for atoms, eqs in self.clauses:
            items = sorted(str(a) for a in atoms) + [str(e) for e in eqs]
            parts.append(", ".join(items))
        return f"query {self.name}({','.join(self.free)}) :- {' | '.join(parts)}."


@dataclass
class Program:
    tgds: List[Tgd] = field(default_factory=list)
    egds: List[Egd] = field(default_factory=list)
    fds: List[FunctionalDependency] = field(default_factory=list)
    database: Instance = frozenset()
    queries: List[UCQEqQuery] = field(default_factory=list)

    @property
    def dependencies(self) -> list:
        return list(self.tgds) + list(self.egds)

    def query(self, name: Optional[str] = None) -> UCQEqQuery:
        for q in self.queries:
            if name is None or q.name == name:
                return q
        raise KeyError(f"no query named {name!r}")


def _conj(atoms: Iterable[Atom]) -> str:
    return ", ".join(sorted(str(a) for a in atoms))


def tgds_of(sigma: Iterable) -> List[Tgd]:
    return [r for r in sigma if isinstance(r, Tgd)]


def egds_of(sigma: Iterable) -> List[Egd]:
    return [r for r in sigma if isinstance(r, Egd)]


def rule_predicates(sigma: Iterable) -> dict:
    out = {}
    for r in sigma:
        out.update(predicates(r.body))
        if isinstance(r, Tgd):
            out.update(predicates(r.head))
    return out


# --------------------------------------------------------------------------
# canonical forms of rules

def _tagged(r) -> frozenset:
    atoms = {Atom("b|" + a.pred, a.args) for a in r.body}
    if isinstance(r, Tgd):
        atoms |= {Atom("h|" + a.pred, a.args) for a in r.head}
    else:
        atoms.add(Atom("e|", (r.lhs, r.rhs)))
    return frozenset(atoms)


def canonical_rule(r, prefix: str = "x"):
    """Rename a rule's variables canonically (``x0, x1, ...``)."""
    lab = canonical_labeling(_tagged(r))
    return r.rename({v: f"{prefix}{n}" for v, n in lab.items()})


def rule_key(r) -> tuple:
    c = canonical_rule(r)
    if isinstance(c, Tgd):
        return (0, sort_key(c.body), sort_key(c.head))
    return (1, sort_key(c.body), c.lhs, c.rhs)


def canonical_rules(rules: Iterable) -> list:
    """Canonicalise, deduplicate up to isomorphism and sort."""
    seen = {}
    for r in rules:
        c = canonical_rule(r)
        seen.setdefault(rule_key(c), c)
    return [seen[k] for k in sorted(seen)]


def same_rules(a: Iterable, b: Iterable) -> bool:
    return {rule_key(r) for r in a} == {rule_key(r) for r in b}


def rules_str(rules: Sequence) -> str:
    return "\n".join(str(r) for r in rules)


__all__ = [
    "Tgd", "Egd", "FunctionalDependency", "Equality", "UCQEqQuery", "Program", "Const",
    "tgds_of", "egds_of", "rule_predicates", "canonical_rule", "canonical_rules", "rule_key",
    "same_rules", "rules_str", "inst_str",
]
