"""Atoms, instances, renamings, homomorphisms and canonical forms.

Variables are plain ``str`` objects.  Any other hashable term (a
:class:`Const`, a skolem :class:`Fn` term) is rigid: homomorphisms map it
to itself.  An instance is a ``frozenset`` of :class:`Atom`.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, NamedTuple, Optional, Tuple


class Atom(NamedTuple):
    pred: str
    args: tuple

    @property
    def arity(self) -> int:
        return len(self.args)

    def __str__(self) -> str:
        return f"{self.pred}({','.join(term_str(t) for t in self.args)})"


@dataclass(frozen=True, order=True)
class Const:
    """A database constant; hard constants obey the unique name assumption."""

    label: str
    hard: bool = True

    def __str__(self) -> str:
        q = '"' if self.hard else "'"
        return f"{q}{self.label}{q}"


class Fn(NamedTuple):
    """Skolem term ``name(args...)``."""

    name: str
    args: tuple

    def __str__(self) -> str:
        return f"{self.name}({','.join(term_str(t) for t in self.args)})"


Instance = FrozenSet[Atom]
Renaming = Dict[str, object]

EMPTY: Instance = frozenset()


def is_var(t) -> bool:
    return isinstance(t, str)


def term_str(t) -> str:
    return t if isinstance(t, str) else str(t)


def term_key(t) -> tuple:
    if isinstance(t, str):
        return (0, t)
    if isinstance(t, Const):
        return (1, t.label, t.hard)
    if isinstance(t, Fn):
        return (2, t.name, tuple(term_key(s) for s in t.args))
    return (3, repr(t))


def atom_key(a: Atom) -> tuple:
    return (a.pred, tuple(term_key(t) for t in a.args))


def sorted_atoms(atoms: Iterable[Atom]) -> List[Atom]:
    return sorted(set(atoms), key=atom_key)


def atom(pred: str, *args) -> Atom:
    return Atom(pred, tuple(args))


def instance(*atoms: Atom) -> Instance:
    return frozenset(atoms)


def variables(atoms: Iterable[Atom]) -> set:
    return {t for a in atoms for t in a.args if isinstance(t, str)}


def terms(atoms: Iterable[Atom]) -> set:
    return {t for a in atoms for t in a.args}


def predicates(atoms: Iterable[Atom]) -> Dict[str, int]:
    return {a.pred: len(a.args) for a in atoms}


def inst_str(i: Iterable[Atom]) -> str:
    return "{" + ", ".join(sorted(str(a) for a in i)) + "}"


# --------------------------------------------------------------------------
# renamings

def rename_term(t, ren: Mapping):
    if isinstance(t, str):
        return ren.get(t, t)
    if isinstance(t, Fn):
        return Fn(t.name, tuple(rename_term(s, ren) for s in t.args))
    return t


def rename_atom(a: Atom, ren: Mapping) -> Atom:
    return Atom(a.pred, tuple(rename_term(t, ren) for t in a.args))


def apply_renaming(i: Iterable[Atom], ren: Mapping) -> Instance:
    """``I[θ]``; identity outside the support of ``ren``."""
    return frozenset(rename_atom(a, ren) for a in i)


def compose(t2: Mapping, t1: Mapping) -> Renaming:
    """``t2 ∘ t1`` (apply ``t1`` first)."""
    out = {v: rename_term(w, t2) for v, w in t1.items()}
    for v, w in t2.items():
        out.setdefault(v, w)
    return out


class FreshVars:
    """Monotone supply of variables avoiding a given set."""

    def __init__(self, avoid: Iterable[str] = (), prefix: str = "_n"):
        self.avoid = set(avoid)
        self.prefix = prefix
        self.counter = 0

    def __call__(self) -> str:
        while True:
            v = f"{self.prefix}{self.counter}"
            self.counter += 1
            if v not in self.avoid:
                self.avoid.add(v)
                return v

    def block(self, vs: Iterable[str]) -> None:
        self.avoid.update(vs)


def rename_apart(atoms: Iterable[Atom], fresh: FreshVars) -> Tuple[Instance, Renaming]:
    ren = {v: fresh() for v in sorted(variables(atoms))}
    return apply_renaming(atoms, ren), ren


# --------------------------------------------------------------------------
# homomorphisms

class _Index:
    __slots__ = ("by_pred", "by_pos")

    def __init__(self, target: Iterable[Atom]):
        self.by_pred: Dict[Tuple[str, int], List[Atom]] = {}
        self.by_pos: Dict[tuple, List[Atom]] = {}
        for a in sorted_atoms(target):
            self.by_pred.setdefault((a.pred, len(a.args)), []).append(a)
            for k, t in enumerate(a.args):
                self.by_pos.setdefault((a.pred, k, t), []).append(a)

    def candidates(self, a: Atom, mapping: Mapping) -> List[Atom]:
        best = self.by_pred.get((a.pred, len(a.args)), [])
        for k, t in enumerate(a.args):
            if isinstance(t, str):
                if t not in mapping:
                    continue
                t = mapping[t]
            lst = self.by_pos.get((a.pred, k, t), [])
            if len(lst) < len(best):
                best = lst
                if not best:
                    break
        return best


@functools.lru_cache(maxsize=2048)
def _index_of(i: frozenset) -> _Index:
    return _Index(i)


def iter_homomorphisms(j: Iterable[Atom], i: Iterable[Atom], fixed: Optional[Mapping] = None,
                       index: Optional[_Index] = None) -> Iterator[Renaming]:
    """Yield maps θ on vars(j) with j[θ] ⊆ i, extending ``fixed``.

    Backtracking; at every node the atom with the fewest candidate matches
    is expanded next, and a node with an unmatched atom fails at once.
    """
    src = sorted_atoms(j)
    idx = index if index is not None else _index_of(i if isinstance(i, frozenset) else frozenset(i))
    if any((a.pred, len(a.args)) not in idx.by_pred for a in src):
        return
    mapping: Dict[str, object] = dict(fixed or {})
    jvars = variables(src)
    remaining = list(src)

    def pick():
        best, best_c = None, None
        for a in remaining:
            c = idx.candidates(a, mapping)
            if best_c is None or len(c) < len(best_c):
                best, best_c = a, c
                if not c:
                    break
        return best, best_c

    def rec():
        if not remaining:
            yield {v: mapping[v] for v in jvars}
            return
        a, cands = pick()
        if not cands:
            return
        remaining.remove(a)
        for cand in cands:
            added = []
            ok = True
            for s, t in zip(a.args, cand.args):
                if isinstance(s, str):
                    m = mapping.get(s)
                    if m is None:
                        mapping[s] = t
                        added.append(s)
                    elif m != t:
                        ok = False
                        break
                elif s != t:
                    ok = False
                    break
            if ok:
                yield from rec()
            for s in added:
                del mapping[s]
        remaining.append(a)

    yield from rec()


def homomorphisms(j: Iterable[Atom], i: Iterable[Atom], limit: Optional[int] = None,
                  fixed: Optional[Mapping] = None) -> List[Renaming]:
    """Up to ``limit`` renamings θ of vars(j) with ``j[θ] ⊆ i``, in canonical order.

    All matches are enumerated before truncation so the order does not depend
    on the search.
    """
    if limit is not None and limit < 1:
        raise ValueError("limit must be >= 1")
    found = list(iter_homomorphisms(j, i, fixed))
    found.sort(key=lambda h: sorted((v, term_key(t)) for v, t in h.items()))
    return found[:limit] if limit is not None else found


def find_homomorphism(j, i, fixed=None) -> Optional[Renaming]:
    return next(iter_homomorphisms(j, i, fixed), None)


def entails(i: Iterable[Atom], j: Iterable[Atom]) -> bool:
    """``I ⊨ J``: some homomorphism maps J into I."""
    return find_homomorphism(j, i) is not None


def entails_any(i: Iterable[Atom], js: Iterable[Iterable[Atom]]) -> bool:
    """``I ⊨ 𝒥``: I entails some member."""
    idx = _index_of(frozenset(i))
    return any(next(iter_homomorphisms(j, (), index=idx), None) is not None for j in js)


def entails_sets(left: Iterable[Iterable[Atom]], right: Iterable[Iterable[Atom]]) -> bool:
    """``𝓘 ⊨ 𝒥``: every member on the left entails the right."""
    right = list(right)
    return all(entails_any(i, right) for i in left)


def equivalent(i, j) -> bool:
    return entails(i, j) and entails(j, i)


# --------------------------------------------------------------------------
# canonical forms

_LEAF_CAP = 5000


def _refine(atoms: List[Atom], vs: List[str], color: Dict[str, int]) -> Dict[str, int]:
    occ: Dict[str, list] = {v: [] for v in vs}
    while True:
        for v in vs:
            occ[v] = []
        for a in atoms:
            sig = tuple((0, color[t]) if isinstance(t, str) else (1, term_key(t)) for t in a.args)
            for k, t in enumerate(a.args):
                if isinstance(t, str):
                    occ[t].append((a.pred, k, sig))
        keys = {v: (color[v], tuple(sorted(occ[v]))) for v in vs}
        ranked = sorted(set(keys.values()))
        rank = {k: n for n, k in enumerate(ranked)}
        new = {v: rank[keys[v]] for v in vs}
        if len(set(new.values())) == len(set(color.values())):
            return new
        color = new


def _encode(atoms: List[Atom], label: Dict[str, int]) -> tuple:
    return tuple(sorted(
        (a.pred, tuple((0, label[t]) if isinstance(t, str) else (1, term_key(t)) for t in a.args))
        for a in atoms))


def _is_swap_auto(atomset: frozenset, u: str, w: str) -> bool:
    return apply_renaming(atomset, {u: w, w: u}) == atomset


def canonical_labeling(i: Iterable[Atom]) -> Dict[str, int]:
    """Deterministic bijection vars(i) → 0..n-1, invariant under isomorphism.

    Colour refinement plus individualisation over ties; the lexicographically
    least encoding wins.  Beyond ``_LEAF_CAP`` search leaves the first leaf
    reached is used (forms then remain deterministic but may distinguish
    isomorphic inputs).
    """
    atoms = sorted_atoms(i)
    atomset = frozenset(atoms)
    vs = sorted(variables(atoms))
    if not vs:
        return {}
    color = _refine(atoms, vs, {v: 0 for v in vs})
    best = [None, None]
    leaves = [0]

    def search(color):
        if leaves[0] >= _LEAF_CAP and best[0] is not None:
            return
        cells: Dict[int, list] = {}
        for v in vs:
            cells.setdefault(color[v], []).append(v)
        if len(cells) == len(vs):
            leaves[0] += 1
            enc = _encode(atoms, color)
            if best[0] is None or enc < best[0]:
                best[0], best[1] = enc, dict(color)
            return
        c, cell = min(((c, cell) for c, cell in cells.items() if len(cell) > 1),
                      key=lambda x: (len(x[1]), x[0]))
        tried: List[str] = []
        for v in cell:
            if any(_is_swap_auto(atomset, v, u) for u in tried):
                continue
            tried.append(v)
            # individualise v: place it strictly before the rest of its cell
            col = {u: 2 * color[u] + (1 if (color[u] == c and u != v) else 0) for u in vs}
            search(_refine(atoms, vs, col))

    search(color)
    return best[1]


def canonicalize(i: Iterable[Atom], prefix: str = "v") -> Tuple[Instance, Renaming]:
    """Rename variables to ``v0, v1, ...``; isomorphic inputs give equal outputs."""
    lab = canonical_labeling(i)
    ren = {v: f"{prefix}{n}" for v, n in lab.items()}
    return apply_renaming(i, ren), ren


def canonical(i: Iterable[Atom]) -> Instance:
    return canonicalize(i)[0]


def isomorphic(i, j) -> bool:
    return canonical(i) == canonical(j)


def sort_key(i: Iterable[Atom]) -> tuple:
    """Total order on instances, used for deterministic output."""
    return (len(i), tuple(sorted(atom_key(a) for a in i)))
