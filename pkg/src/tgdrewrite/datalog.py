"""Datalog rewritings: skolem programs, shape predicates and the guarded route.

A skolem atom ``R(x, f(x,y))`` is simulated by the plain atom
``R@[1,f(1,2)](x,y)``: the bracketed code records the term structure with
leaves numbered by first occurrence.  Enumerating every valuation of a
rule's variables up to a depth bound turns a skolem program into a finite
set of full tgds over these shape predicates.
"""
from __future__ import annotations

import itertools
import logging
import re
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Set, Tuple

from .chase import Answer, ChaseBudget, certain_via_chase
from .core import (Atom, Const, Fn, FreshVars, Instance, apply_renaming, find_homomorphism, iter_homomorphisms,
                   sorted_atoms, variables)
from .resolution import ResolutionBudget, saturated_resolution
from .rules import Tgd, canonical_rule, canonical_rules, rule_key, rule_predicates, tgds_of

log = logging.getLogger(__name__)

GOAL = Atom("goal$", ())
QUERY_PRED = "query$"
E = "eq$E"
SHAPE_CAP = 20_000


class ShapeBudgetExceeded(RuntimeError):
    pass


# --------------------------------------------------------------------------
# skolem programs

@dataclass(frozen=True)
class SkolemRule:
    body: Instance
    head: Instance

    def __str__(self) -> str:
        return f"{', '.join(map(str, sorted_atoms(self.body)))} -> {', '.join(map(str, sorted_atoms(self.head)))}"


@dataclass
class LogicProgram:
    rules: List[SkolemRule]
    functions: Dict[str, int] = field(default_factory=dict)


def depth(t) -> int:
    if isinstance(t, Fn):
        return 1 + max((depth(s) for s in t.args), default=1)
    return 1


def atom_depth(a: Atom) -> int:
    return max((depth(t) for t in a.args), default=1)


def _head_order(r: Tgd) -> List[str]:
    out: List[str] = []
    for a in sorted_atoms(r.head):
        for t in a.args:
            if t not in out:
                out.append(t)
    return out


def skolemize(sigma, prefix: str = "f") -> LogicProgram:
    """One function symbol per (rule, existential); arguments are the
    frontier in order of first occurrence in the head."""
    rules, funcs = [], {}
    n = 0
    for r in tgds_of(sigma):
        order = _head_order(r)
        xs = tuple(v for v in order if v in r.frontier)
        sub = {}
        for z in (v for v in order if v in r.existentials):
            n += 1
            name = f"{prefix}{n}"
            funcs[name] = len(xs)
            sub[z] = Fn(name, xs)
        rules.append(SkolemRule(r.body, apply_renaming(r.head, sub)))
    return LogicProgram(rules, funcs)


# --------------------------------------------------------------------------
# semi-naive evaluation

def _bind(pattern, value, env: dict, max_depth: Optional[int]) -> bool:
    if isinstance(pattern, str):
        cur = env.get(pattern)
        if cur is None:
            if max_depth is not None and depth(value) > max_depth:
                return False
            env[pattern] = value
            return True
        return cur == value
    return pattern == value


def _subst(t, env):
    if isinstance(t, str):
        return env[t]
    if isinstance(t, Fn):
        return Fn(t.name, tuple(_subst(s, env) for s in t.args))
    return t


class _Facts:
    """Argument tuples per predicate with hash indexes on bound positions."""

    def __init__(self):
        self.all: Dict[tuple, Set[tuple]] = defaultdict(set)
        self.indexes: Dict[tuple, Dict[tuple, List[tuple]]] = {}

    def add(self, key: tuple, args: tuple) -> None:
        self.all[key].add(args)
        for (k, pos), idx in self.indexes.items():
            if k == key:
                idx.setdefault(tuple(args[p] for p in pos), []).append(args)

    def lookup(self, key: tuple, pos: tuple, values: tuple):
        if not pos:
            return self.all.get(key, ())
        idx = self.indexes.get((key, pos))
        if idx is None:
            idx = defaultdict(list)
            for args in self.all.get(key, ()):
                idx[tuple(args[p] for p in pos)].append(args)
            self.indexes[(key, pos)] = idx
        return idx.get(values, ())


def _plan(first: Atom, rest: Sequence[Atom]) -> List[Tuple[Atom, tuple]]:
    """Greedy join order: next the atom with most bound arguments."""
    bound = set(t for t in first.args if isinstance(t, str))
    fixed = lambda t: t in bound if isinstance(t, str) else not isinstance(t, Fn)
    todo, plan = list(rest), []
    while todo:
        a = max(todo, key=lambda a: (sum(map(fixed, a.args)), -todo.index(a)))
        todo.remove(a)
        pos = tuple(i for i, t in enumerate(a.args) if fixed(t))
        plan.append((a, pos))
        bound |= {t for t in a.args if isinstance(t, str)}
    return plan


def _join(plan, k: int, facts: _Facts, env: dict, max_depth) -> Iterator[dict]:
    if k == len(plan):
        yield env
        return
    a, pos = plan[k]
    values = tuple(_subst(a.args[p], env) for p in pos)
    for args in facts.lookup((a.pred, len(a.args)), pos, values):
        new = dict(env)
        if all(_bind(p, v, new, max_depth) for p, v in zip(a.args, args)):
            yield from _join(plan, k + 1, facts, new, max_depth)


def evaluate(rules: Sequence[Tuple[Sequence[Atom], Sequence[Atom]]], facts: Iterable[Atom],
             max_depth: Optional[int] = None, max_atoms: int = 2_000_000,
             base: Iterable[Atom] = ()) -> Set[Atom]:
    """Least fixpoint of full rules (heads may contain function terms).

    Semi-naive: a rule is re-matched only through an atom derived in the
    previous round.  ``max_depth`` restricts every variable binding to terms
    of at most that depth.  ``base`` must already be closed under the rules;
    only ``facts`` then seed the first round.
    """
    rules = [(tuple(b), tuple(h)) for b, h in rules]
    by_pred: Dict[tuple, List[Tuple[int, int]]] = defaultdict(list)
    for n, (body, _) in enumerate(rules):
        for i, a in enumerate(body):
            by_pred[(a.pred, len(a.args))].append((n, i))
    plans: Dict[Tuple[int, int], list] = {}
    out: Set[Atom] = set()
    index = _Facts()

    def add(atoms) -> Dict[tuple, Set[tuple]]:
        delta: Dict[tuple, Set[tuple]] = defaultdict(set)
        for a in atoms:
            if a not in out:
                out.add(a)
                index.add((a.pred, len(a.args)), a.args)
                delta[(a.pred, len(a.args))].add(a.args)
        return delta

    add(base)
    delta = add(facts)
    while delta:
        new: List[Atom] = []
        for key, tuples in delta.items():
            for n, i in by_pred.get(key, ()):
                body, head = rules[n]
                first = body[i]
                plan = plans.get((n, i))
                if plan is None:
                    plan = plans[(n, i)] = _plan(first, body[:i] + body[i + 1:])
                for args in tuples:
                    env: dict = {}
                    if not all(_bind(p, v, env, max_depth) for p, v in zip(first.args, args)):
                        continue
                    for full in _join(plan, 0, index, env, max_depth):
                        new.extend(_subst_atom(h, full) for h in head)
        delta = add(new)
        if len(out) > max_atoms:
            raise RuntimeError(f"evaluation exceeded {max_atoms} atoms")
    return out


def _subst_atom(a: Atom, env) -> Atom:
    return Atom(a.pred, tuple(_subst(t, env) for t in a.args))


def bounded_fixpoint(p: LogicProgram, d: Iterable[Atom], k: Optional[int],
                     reverse: bool = False, max_atoms: int = 2_000_000) -> frozenset:
    """``P^k(D)``: rules applied only under valuations of depth at most ``k``
    (``None`` for no bound).  ``reverse`` evaluates the rules in the opposite
    order; the result does not depend on it."""
    if k is not None and k < 1:
        raise ValueError("k must be at least 1")
    rules = [(sorted_atoms(r.body), sorted_atoms(r.head)) for r in p.rules]
    if reverse:
        rules.reverse()
    return frozenset(evaluate(rules, d, k, max_atoms))


def skolem_entails(inst: Iterable[Atom], q: Iterable[Atom]) -> bool:
    """Some map from vars(q) to terms of ``inst`` sends ``q`` inside it."""
    facts = _Facts()
    for a in inst:
        facts.add((a.pred, len(a.args)), a.args)
    plan = _plan(Atom("", ()), sorted_atoms(q))
    return next(_join(plan, 0, facts, {}, None), None) is not None


def _critical(sigma) -> Instance:
    return frozenset(Atom(p, ("*",) * n) for p, n in rule_predicates(sigma).items())


def weak_acyclicity(sigma) -> bool:
    """No cycle of the position graph goes through a special edge."""
    edges: Dict[tuple, Set[tuple]] = defaultdict(set)
    special: Set[Tuple[tuple, tuple]] = set()
    for r in tgds_of(sigma):
        zpos = {(a.pred, k) for a in r.head for k, t in enumerate(a.args, 1) if t in r.existentials}
        # special edges leave every body variable, frontier or not
        for x in variables(r.body):
            src = {(a.pred, k) for a in r.body for k, t in enumerate(a.args, 1) if t == x}
            dst = {(a.pred, k) for a in r.head for k, t in enumerate(a.args, 1) if t == x}
            for s in src:
                edges[s] |= dst | zpos
                special |= {(s, z) for z in zpos}

    def reaches(a, b) -> bool:
        seen, stack = {a}, [a]
        while stack:
            u = stack.pop()
            if u == b:
                return True
            for w in edges.get(u, ()):
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return False

    return not any(reaches(z, s) for s, z in special)


def depth_bound(sigma, max_atoms: int = 200_000) -> int:
    """Deepest term in the unbounded skolem fixpoint of the critical instance."""
    if not weak_acyclicity(sigma):
        raise ValueError("depth_bound needs a weakly acyclic rule set")
    inst = bounded_fixpoint(skolemize(sigma), _critical(sigma), None, max_atoms=max_atoms)
    return max((atom_depth(a) for a in inst), default=1)


def critical_depth(sigma, cap: int = 8, max_atoms: int = 200_000) -> Optional[int]:
    """Depth of the skolem fixpoint of the critical instance if it stays within ``cap``.

    Every database maps onto the critical instance, so a finite fixpoint
    there bounds term depth everywhere, weakly acyclic or not.
    """
    try:
        inst = bounded_fixpoint(skolemize(sigma), _critical(sigma), cap, max_atoms=max_atoms)
    except RuntimeError:
        return None
    k = max((atom_depth(a) for a in inst), default=1)
    return k if k <= cap else None


# --------------------------------------------------------------------------
# shapes

def shape_code(args: Sequence) -> Tuple[str, List]:
    """``([1,f(1,2)], [x, y])`` for ``(x, f(x,y))``."""
    slots: Dict[object, int] = {}

    def enc(t) -> str:
        if isinstance(t, Fn):
            return f"{t.name}({','.join(enc(s) for s in t.args)})"
        return str(slots.setdefault(t, len(slots) + 1))

    code = "[" + ",".join(enc(t) for t in args) + "]"
    return code, list(slots)


def encode_atom(a: Atom) -> Atom:
    """Atoms with function terms become shape atoms; others are unchanged."""
    if not any(isinstance(t, Fn) for t in a.args):
        return a
    code, leaves = shape_code(a.args)
    return Atom(f"{a.pred}@{code}", tuple(leaves))


_CODE_TOKEN = re.compile(r"\d+|[A-Za-z_][A-Za-z0-9_$]*|[(),\[\]]")


def decode_atom(a: Atom) -> Atom:
    if "@" not in a.pred:
        return a
    pred, code = a.pred.split("@", 1)
    toks = _CODE_TOKEN.findall(code)
    pos = 0

    def term():
        nonlocal pos
        t = toks[pos]
        pos += 1
        if t.isdigit():
            return a.args[int(t) - 1]
        assert toks[pos] == "("
        pos += 1
        args = []
        while toks[pos] != ")":
            args.append(term())
            if toks[pos] == ",":
                pos += 1
        pos += 1
        return Fn(t, tuple(args))

    assert toks[pos] == "["
    pos += 1
    args = []
    while toks[pos] != "]":
        args.append(term())
        if toks[pos] == ",":
            pos += 1
    return Atom(pred, tuple(args))


def _skeletons(funcs: Mapping[str, int], k: int) -> List:
    """Term templates of depth at most ``k``; ``None`` marks a leaf."""
    out: List = [None]
    for _ in range(2, k + 1):
        prev = out
        out = [None] + [(f, combo) for f in sorted(funcs)
                        for combo in itertools.product(prev, repeat=funcs[f])]
    return out


def _leaf_count(s) -> int:
    return 1 if s is None else sum(_leaf_count(c) for c in s[1])


def _partitions(items: List[str]) -> Iterator[Dict[str, str]]:
    """Set partitions as maps item -> first item of its block."""
    def rec(k, blocks):
        if k == len(items):
            yield {x: b[0] for b in blocks for x in b}
            return
        for b in blocks:
            b.append(items[k])
            yield from rec(k + 1, blocks)
            b.pop()
        blocks.append([items[k]])
        yield from rec(k + 1, blocks)
        blocks.pop()
    yield from rec(0, [])


def _bell(n: int) -> int:
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
    return row[0]


def _valuations(vs: Sequence[str], skels: List, all_partitions: bool,
                leaf_only: Iterable[str] = ()) -> Iterator[Dict[str, object]]:
    leaf_only = set(leaf_only)
    for choice in itertools.product(*[[None] if v in leaf_only else skels for v in vs]):
        leaves: List[str] = []

        def build(sk, v, counter):
            if sk is None:
                counter[0] += 1
                name = f"{v}_{counter[0]}"
                leaves.append(name)
                return name
            return Fn(sk[0], tuple(build(c, v, counter) for c in sk[1]))

        theta = {}
        for v, sk in zip(vs, choice):
            if sk is None:
                leaves.append(v)
                theta[v] = v
            else:
                theta[v] = build(sk, v, [0])
        if not all_partitions:
            yield theta
            continue
        for part in _partitions(leaves):
            yield {v: _rename_leaves(t, part) for v, t in theta.items()}


def _rename_leaves(t, ren):
    if isinstance(t, Fn):
        return Fn(t.name, tuple(_rename_leaves(s, ren) for s in t.args))
    return ren.get(t, t)


def _term_positions(rules) -> Set[Tuple[str, int]]:
    """Positions that can hold a function term in the skolem fixpoint of a
    function-free database."""
    out: Set[Tuple[str, int]] = set()
    changed = True
    while changed:
        changed = False
        for r in rules:
            fn_vars = {v for v in variables(r.body)
                       if all((a.pred, i) in out for a in r.body for i, t in enumerate(a.args) if t == v)}
            for a in r.head:
                for i, t in enumerate(a.args):
                    if (a.pred, i) not in out and (isinstance(t, Fn) or t in fn_vars):
                        out.add((a.pred, i))
                        changed = True
    return out


def _leaf_vars(body, term_pos) -> Set[str]:
    return {t for a in body for i, t in enumerate(a.args) if isinstance(t, str) and (a.pred, i) not in term_pos}


def _count(vs: Sequence[str], skels: List, all_partitions: bool, leaf_only=()) -> int:
    leaf_only = set(leaf_only)
    total = 0
    for choice in itertools.product(*[[None] if v in leaf_only else skels for v in vs]):
        total += _bell(sum(_leaf_count(s) for s in choice)) if all_partitions else 1
    return total


@dataclass
class DatalogRewriting:
    auxiliary: frozenset
    program: List[Tgd]
    goal: Instance = frozenset({GOAL})

    def manifest(self) -> dict:
        return {"auxiliaryPredicates": sorted(self.auxiliary), "ruleCount": len(self.program),
                "goal": [str(a) for a in sorted_atoms(self.goal)]}


def _general(a: Atom) -> Atom:
    """Same term structure with every leaf occurrence distinct."""
    counter = itertools.count(1)

    def spread(t):
        if isinstance(t, Fn):
            return Fn(t.name, tuple(spread(s) for s in t.args))
        return f"g{next(counter)}"

    return Atom(a.pred, tuple(spread(t) for t in a.args))


def _conversions(reps: Dict[str, Atom]) -> List[Tgd]:
    """Rules between each shape code and its all-distinct-leaves form."""
    out = []
    for pred, rep in sorted(reps.items()):
        g = _general(rep)
        ge = encode_atom(g)
        if ge.pred == pred:
            continue
        flat = []

        def leaves(t):
            if isinstance(t, Fn):
                for s in t.args:
                    leaves(s)
            else:
                flat.append(t)

        for t in rep.args:
            leaves(t)
        gen_atom = Atom(ge.pred, tuple(flat))
        spec_atom = encode_atom(rep)
        out.append(Tgd([spec_atom], [gen_atom]))
        out.append(Tgd([gen_atom], [spec_atom]))
        reps.setdefault(ge.pred, g)
    return out


def datalog_from_depth(sigma, qs: Iterable[Iterable[Atom]], k: int,
                       all_partitions: bool = True, cap: int = SHAPE_CAP) -> DatalogRewriting:
    """Shape-encoded rewriting for ``(Σ, 𝒬)`` of bounded depth ``k``.

    Every rule of the skolem program and every query gets one image per
    valuation of depth at most ``k``.  With ``all_partitions`` valuations may
    also identify leaves (the complete enumeration); otherwise only
    all-distinct leaves are used and conversion rules between shape codes
    make up the difference.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    p = skolemize(sigma)
    skels = _skeletons(p.functions, k)
    qs = [frozenset(q) for q in qs]
    jobs = [(sorted_atoms(r.body), sorted_atoms(r.head)) for r in p.rules]
    jobs += [(sorted_atoms(q), [GOAL]) for q in qs]
    term_pos = _term_positions(p.rules)
    jobs = [(b, h, _leaf_vars(b, term_pos)) for b, h in jobs]
    total = sum(_count(sorted(variables(b)), skels, all_partitions, lv) for b, _, lv in jobs)
    if total > cap:
        raise ShapeBudgetExceeded(f"{total} rule images exceed the cap of {cap}")
    images: List[Tgd] = []
    reps: Dict[str, Atom] = {}
    for body, head, lv in jobs:
        for theta in _valuations(sorted(variables(body)), skels, all_partitions, lv):
            if max((depth(t) for t in theta.values()), default=1) > k:
                continue
            b = [_subst_atom(a, theta) for a in body]
            h = [_subst_atom(a, theta) for a in head]
            for a in b + h:
                e = encode_atom(a)
                if e.pred != a.pred:
                    reps.setdefault(e.pred, a)
            img = Tgd([encode_atom(a) for a in b], [encode_atom(a) for a in h])
            if not img.head <= img.body:
                images.append(img)
    images += _conversions(reps)
    if len(reps) + len(images) > cap:
        raise ShapeBudgetExceeded(f"{len(reps)} shapes and {len(images)} rules exceed the cap of {cap}")
    program = canonical_rules(images)
    return DatalogRewriting(frozenset(reps) | {GOAL.pred}, program)


def _rules(rw: DatalogRewriting):
    return [(sorted_atoms(r.body), sorted_atoms(r.head)) for r in rw.program]


def _check_free(d: Instance, rw: DatalogRewriting) -> None:
    clash = {a.pred for a in d} & rw.auxiliary
    if clash:
        raise ValueError(f"database uses auxiliary predicates: {sorted(clash)}")


def datalog_closure(d: Iterable[Atom], rw: DatalogRewriting) -> frozenset:
    d = frozenset(d)
    _check_free(d, rw)
    return frozenset(evaluate(_rules(rw), d))


def answer_via_datalog(d: Iterable[Atom], rw: DatalogRewriting, base: Iterable[Atom] = ()) -> bool:
    """Goal reachability on ``d``; ``base`` is an earlier :func:`datalog_closure` to resume from."""
    d = frozenset(d)
    _check_free(d, rw)
    return rw.goal <= evaluate(_rules(rw), d, base=base)


def ucq_datalog_rewriting(sigma, qs, budget: Optional[ResolutionBudget] = None) -> Optional[DatalogRewriting]:
    """``R -> goal$()`` for each query of a finite resolution rewriting."""
    res = saturated_resolution(qs, sigma, budget)
    if not res.fixpoint:
        return None
    return DatalogRewriting(frozenset({GOAL.pred}), [Tgd(q, [GOAL]) for q in res.queries])


# --------------------------------------------------------------------------
# egd simulation

def _split_repeats(atoms: Instance, taken: Set[str]) -> Instance:
    """Split repeated variables of the non-``E`` atoms, linking copies by ``E``."""
    atoms = set(atoms)
    fresh = FreshVars(taken, prefix="s_")
    while True:
        plain = sorted_atoms(a for a in atoms if a.pred != E)
        occ: Dict[str, List[Tuple[Atom, int]]] = defaultdict(list)
        for a in plain:
            for i, t in enumerate(a.args):
                if isinstance(t, str):
                    occ[t].append((a, i))
        rep = next((v for v in sorted(occ) if len(occ[v]) > 1), None)
        if rep is None:
            return frozenset(atoms)
        a, i = occ[rep][-1]
        x2 = fresh()
        atoms.discard(a)
        atoms.add(Atom(a.pred, a.args[:i] + (x2,) + a.args[i + 1:]))
        atoms.add(Atom(E, (rep, x2)))


def split_query(q: Iterable[Atom]) -> Instance:
    q = frozenset(q)
    return _split_repeats(q, variables(q))


def sim_e(sigma, extra: Optional[Mapping[str, int]] = None) -> List[Tgd]:
    """A member of ``Sim_E(Σ)`` with ``E`` named ``eq$E``.

    ``extra`` adds reflexivity rules for predicates outside Σ (the database
    and query schema).
    """
    sigma = list(sigma)
    preds = dict(rule_predicates(sigma))
    preds.update(extra or {})
    if E in preds:
        raise ValueError(f"predicate {E} is reserved")
    out: List[Tgd] = [
        Tgd([Atom(E, ("x", "y"))], [Atom(E, ("y", "x"))]),
        Tgd([Atom(E, ("x", "y")), Atom(E, ("y", "z"))], [Atom(E, ("x", "z"))]),
    ]
    for p, n in sorted(preds.items()):
        if n:
            xs = tuple(f"x{i}" for i in range(1, n + 1))
            out.append(Tgd([Atom(p, xs)], [Atom(E, (x, x)) for x in xs]))
    for r in sigma:
        if isinstance(r, Tgd):
            taken = variables(r.body) | variables(r.head)
            out.append(Tgd(_split_repeats(r.body, taken), r.head))
        else:
            body = _split_repeats(r.body, variables(r.body))
            out.append(Tgd(body, [Atom(E, (r.lhs, r.rhs))]))
    return out


# --------------------------------------------------------------------------
# guardedness

@dataclass(frozen=True)
class GuardReport:
    guarded: bool
    beta_guarded: bool
    gw: Optional[int]
    lw: int
    decomposition: Optional[Tuple[Atom, Tuple[frozenset, ...]]] = None


def _blocks(rest: List[Atom], guard_vars: Set[str]) -> List[frozenset]:
    """Connected components under sharing a variable outside the guard."""
    parent = list(range(len(rest)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: Dict[str, int] = {}
    for i, a in enumerate(rest):
        for t in a.args:
            if isinstance(t, str) and t not in guard_vars:
                if t in owner:
                    parent[find(i)] = find(owner[t])
                else:
                    owner[t] = i
    comps: Dict[int, List[Atom]] = defaultdict(list)
    for i, a in enumerate(rest):
        comps[find(i)].append(a)
    return sorted((frozenset(c) for c in comps.values()), key=lambda c: sorted(map(str, c)))


def guard_report(r: Tgd) -> GuardReport:
    body = sorted_atoms(r.body)
    fr = r.frontier
    bv = variables(r.body)
    guards = [a for a in body if fr <= variables([a])]
    beta = any(bv <= variables([a]) for a in body)
    best = None
    for g in guards:
        blocks = _blocks([a for a in body if a != g], variables([g]))
        width = 1 + max((len(b) for b in blocks), default=0)
        if best is None or width < best[0]:
            best = (width, g, tuple(blocks))
    if best is None:
        return GuardReport(False, beta, None, len(body))
    return GuardReport(True, beta, best[0], len(body), (best[1], best[2]))


def is_guarded(sigma) -> bool:
    return all(guard_report(r).guarded for r in tgds_of(sigma))


def left_core(body: Iterable[Atom], keep: Set[str]) -> Instance:
    """Smallest retract of ``body`` fixing ``keep`` pointwise."""
    cur = frozenset(body)
    fixed = {v: v for v in keep if v in variables(cur)}
    changed = True
    while changed:
        changed = False
        for a in reversed(sorted_atoms(cur)):
            h = find_homomorphism(cur, cur - {a}, fixed)
            if h is not None:
                cur = apply_renaming(cur, h)
                changed = True
                break
    return cur


def left_core_projections(r: Tgd) -> List[Instance]:
    """Minimal ``B' ⊆ B`` with ``B' = B[θ_Y]``; all such sets are
    isomorphic, so a single representative is returned."""
    return [left_core(r.body, r.frontier)]


# --------------------------------------------------------------------------
# derivations and flattening

class _U:
    def __init__(self, prio):
        self.parent: Dict[str, str] = {}
        self.prio = prio

    def find(self, t):
        while t in self.parent:
            t = self.parent[t]
        return t

    def union(self, a, b) -> bool:
        """False when two distinct constants would meet."""
        a, b = self.find(a), self.find(b)
        if a == b:
            return True
        if not isinstance(a, str) and not isinstance(b, str):
            return False
        if self.prio(b) < self.prio(a):
            a, b = b, a
        self.parent[b] = a
        return True

    def copy(self):
        u = _U(self.prio)
        u.parent = dict(self.parent)
        return u


@dataclass
class Derivation:
    r1: Tgd
    r2: Tgd
    r3: Tgd


def derive_tgd(r1: Tgd, r2: Tgd) -> List[Tgd]:
    """Tgds derived from a careful refinement of ``r1`` and a refinement of ``r2``.

    A non-empty ``G2 ⊆ body(r2)`` covering r2's frontier is unified into
    ``head(r1)``; the rest of r2's body must avoid r1's existential and
    body-only variables.  Existentials of r1 stay pairwise distinct and
    apart from its frontier.
    """
    fresh = FreshVars(variables(r1.body) | variables(r1.head), prefix="w")
    ren = {v: fresh() for v in sorted(variables(r2.body) | variables(r2.head))}
    b2, h2 = sorted_atoms(apply_renaming(r2.body, ren)), apply_renaming(r2.head, ren)
    fr2 = {ren[v] for v in r2.frontier}
    x1, z1 = r1.frontier, r1.existentials
    h1 = sorted_atoms(r1.head)
    rank = lambda v: (-1, str(v)) if not isinstance(v, str) else (0 if v in x1 else 1 if v in z1 else 2, v)

    def ok(u: _U) -> bool:
        seen = set()
        for z in z1:
            rz = u.find(z)
            if not isinstance(rz, str) or rz in x1 or rz in seen or (rz in z1 and rz != z):
                return False
            seen.add(rz)
        return all(u.find(x) not in z1 for x in x1)

    out: Dict[tuple, Tgd] = {}

    def rec(i, u: _U, g2: List[Atom]):
        if i == len(b2):
            if not g2 or not fr2 <= variables(g2):
                return
            rest = [a for a in b2 if a not in g2]
            s = {v: u.find(v) for v in variables(b2) | variables(h2) | variables(r1.body) | variables(r1.head)}
            rest_s = apply_renaming(rest, s)
            if variables(rest_s) & (z1 | r1.body_only):
                return
            r3 = Tgd(apply_renaming(r1.body, s) | rest_s, apply_renaming(r1.head, s) | apply_renaming(h2, s))
            c = canonical_rule(r3)
            out.setdefault(rule_key(c), c)
            return
        a = b2[i]
        rec(i + 1, u, g2)
        for h in h1:
            if h.pred != a.pred or len(h.args) != len(a.args):
                continue
            u2 = u.copy()
            if all(u2.union(s_, t_) for s_, t_ in zip(a.args, h.args)) and ok(u2):
                rec(i + 1, u2, g2 + [a])

    rec(0, _U(rank), [])
    return [out[k] for k in sorted(out)]


def _pin(atoms, vs):
    return apply_renaming(atoms, {v: Const(f"pin:{v}", True) for v in vs})


def check_fact1(r1: Tgd, r2: Tgd, r3: Tgd) -> bool:
    """Chasing r3's body with r1 and r2 reaches its head."""
    bv = variables(r3.body)
    ans = certain_via_chase(_pin(r3.body, bv), [r1, r2], [_pin(r3.head, bv)],
                            ChaseBudget(max_steps=200, max_atoms=500, max_instances=50))
    return ans is Answer.YES


def check_fact2(r1: Tgd, r2: Tgd, r3: Tgd) -> bool:
    g1, g2, g3 = guard_report(r1), guard_report(r2), guard_report(r3)
    if not (g1.guarded and g2.guarded):
        return True
    return g3.guarded and g3.gw <= max(g1.gw, g2.lw)


@dataclass
class FlattenResult:
    rules: List[Tgd]
    k: int
    complete: bool
    derivations: int = 0
    violations: List[Tuple[str, Derivation]] = field(default_factory=list)


def _reduce(r: Tgd, k: int) -> List[Tgd]:
    """``(left-core body, head subset of at most k atoms)`` forms of ``r``."""
    head = sorted_atoms(left_core(r.head, variables(r.body)))
    out = []
    for m in range(1, min(k, len(head)) + 1):
        for hs in itertools.combinations(head, m):
            t = Tgd(r.body, hs)
            out.append(canonical_rule(Tgd(left_core(r.body, t.frontier), hs)))
    return out


def _covers(r1: Tgd, r: Tgd) -> bool:
    """One application of ``r1`` to ``body(r)`` already yields ``head(r)``."""
    keep = {v: v for v in variables(r.body)}
    for h in iter_homomorphisms(r1.body, r.body):
        fresh = FreshVars(variables(r.body) | variables(r.head), prefix="c")
        ext = dict(h)
        for z in sorted(r1.existentials):
            ext[z] = fresh()
        inst = r.body | apply_renaming(r1.head, ext)
        if find_homomorphism(r.head, inst, keep) is not None:
            return True
    return False


def flatten_k(sigma, qs: Iterable[Iterable[Atom]] = (), max_rules: int = 2_000,
              max_derivations: int = 50_000, check_facts: bool = True) -> FlattenResult:
    """``Σ^(k)`` by saturating derivations, reducing each derived rule at once.

    ``k`` starts at the largest query or left-core body and grows whenever a
    larger left-core body shows up, which restarts the saturation.  A rule
    covered by one stored rule (one step from its body gives its head) is
    not kept, and it evicts the stored rules it covers.
    """
    base = canonical_rules(tgds_of(sigma))
    for r in base:
        if not guard_report(r).guarded:
            raise ValueError(f"rule is not guarded: {r}")
    qs = [frozenset(q) for q in qs]
    k = max([len(q) for q in qs] + [len(left_core(r.body, r.frontier)) for r in base] + [1])
    while True:
        store: Dict[tuple, Tgd] = {}
        work: List[Tgd] = []

        def admit(r):
            key = rule_key(r)
            if key in store:
                return
            preds = {a.pred for a in r.body}
            if any({a.pred for a in s.body} <= preds and _covers(s, r) for s in store.values()):
                return
            for k2, s in list(store.items()):
                if preds <= {a.pred for a in s.body} and _covers(r, s):
                    del store[k2]
            store[key] = r
            work.append(r)

        for r in base:
            admit(r)
            for red in _reduce(r, k):
                admit(red)
        violations = []
        derivations = 0
        grow = k
        complete = True
        while work:
            r1 = work.pop(0)
            # the flat chase fires a rule without existentials directly
            if rule_key(r1) not in store or not r1.existentials:
                continue
            for r2 in base:
                for r3 in derive_tgd(r1, r2):
                    derivations += 1
                    if check_facts:
                        if not check_fact1(r1, r2, r3):
                            violations.append(("fact1", Derivation(r1, r2, r3)))
                        if not check_fact2(r1, r2, r3):
                            violations.append(("fact2", Derivation(r1, r2, r3)))
                    grow = max(grow, len(left_core(r3.body, r3.frontier)))
                    for red in _reduce(r3, k):
                        admit(red)
            if len(store) > max_rules or derivations > max_derivations:
                complete = False
                break
        if grow > k and complete:
            log.debug("flatten: k grows from %d to %d", k, grow)
            k = grow
            continue
        rules = canonical_rules(store.values())
        return FlattenResult(rules, k, complete, derivations, violations)


def guarded_datalog_rewriting(sigma, qs: Iterable[Iterable[Atom]], max_rules: int = 2_000,
                              check_facts: bool = False) -> Tuple[DatalogRewriting, FlattenResult]:
    """Queries become guarded rules ``Q -> query$()``; the flattened set is
    then rewritten at depth 1."""
    qs = [frozenset(q) for q in qs]
    goal = Atom(QUERY_PRED, ())
    sigma = tgds_of(sigma) + [Tgd(q, [goal]) for q in qs]
    flat = flatten_k(sigma, [[goal]], max_rules=max_rules, check_facts=check_facts)
    if not flat.complete:
        raise RuntimeError("flattening did not saturate within budget")
    rw = datalog_from_depth(flat.rules, [[goal]], 1, all_partitions=False)
    return rw, flat


def answer_via_depth(d, sigma, qs, k: Optional[int] = None) -> bool:
    k = k or depth_bound(sigma)
    return answer_via_datalog(d, datalog_from_depth(sigma, qs, k))


__all__ = ["SkolemRule", "LogicProgram", "skolemize", "depth", "bounded_fixpoint", "skolem_entails",
           "weak_acyclicity", "depth_bound", "critical_depth", "shape_code", "encode_atom", "decode_atom",
           "DatalogRewriting", "datalog_from_depth", "answer_via_datalog", "datalog_closure", "ucq_datalog_rewriting",
           "sim_e", "split_query", "GuardReport", "guard_report", "is_guarded", "left_core",
           "left_core_projections", "derive_tgd", "check_fact1", "check_fact2", "flatten_k",
           "FlattenResult", "guarded_datalog_rewriting", "ShapeBudgetExceeded", "evaluate",
           "GOAL", "E", "SHAPE_CAP"]
