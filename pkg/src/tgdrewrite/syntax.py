"""Reading and writing the ``.dlg`` rule language, plus JSON export.

Grammar (``#`` starts a line comment, statements end with ``.``)::

    A(x,y) -> B(x,z), C(z,y).            tgd; z is existential
    A(x,y), A(x,y2) -> y = y2.           egd
    fd B[1] -> 2.                        functional dependency
    A("a", n1), P('s').                  database facts ("hard", 'soft', nulls)
    query q(x1,x2) :- B(x1,x2) | A(u,v), x1 = u, x2 = u.

Predicates are identifiers followed by ``(``; variables are bare identifiers.
"""
from __future__ import annotations

import json
import re
from typing import Dict, Iterable, List

from .core import Atom, Const, Instance, apply_renaming, canonical_labeling, sorted_atoms, term_str
from .rules import (Egd, Equality, FunctionalDependency, Program, Tgd, UCQEqQuery,
                    canonical_rules)


class ParseError(ValueError):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {msg}" if line else msg)
        self.line = line
        self.col = col


_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<arrow>->)
  | (?P<if>:-)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_$]*(?:@\[[^\]]*\])?)
  | (?P<int>[0-9]+)
  | (?P<hard>"[^"\n]*")
  | (?P<soft>'[^'\n]*')
  | (?P<punct>[(),.=|\[\]])
""", re.VERBOSE)


def _tokenize(text: str):
    pos, line, lstart = 0, 1, 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - lstart + 1)
        kind = m.lastgroup
        val = m.group()
        if kind != "ws":
            out.append((kind if kind != "punct" else val, val, line, m.start() - lstart + 1))
        for k, ch in enumerate(val):
            if ch == "\n":
                line += 1
                lstart = m.start() + k + 1
        pos = m.end()
    out.append(("eof", "", line, pos - lstart + 1))
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.k = 0
        self.arity: Dict[str, int] = {}
        self.prog = Program()
        self.db: List[Atom] = []
        self.pending_fds: list = []

    def peek(self, off=0):
        return self.toks[min(self.k + off, len(self.toks) - 1)]

    def next(self):
        t = self.toks[self.k]
        self.k += 1
        return t

    def expect(self, kind):
        t = self.next()
        if t[0] != kind:
            raise ParseError(f"expected {kind!r}, found {t[1] or 'end of input'!r}", t[2], t[3])
        return t

    # -- terms and atoms
    def term(self):
        t = self.next()
        if t[0] == "ident":
            return t[1]
        if t[0] == "hard":
            return Const(t[1][1:-1], True)
        if t[0] == "soft":
            return Const(t[1][1:-1], False)
        raise ParseError(f"expected a term, found {t[1]!r}", t[2], t[3])

    def atom(self) -> Atom:
        name = self.expect("ident")
        self.expect("(")
        args = []
        if self.peek()[0] != ")":
            args.append(self.term())
            while self.peek()[0] == ",":
                self.next()
                args.append(self.term())
        self.expect(")")
        a = Atom(name[1], tuple(args))
        known = self.arity.setdefault(a.pred, len(args))
        if known != len(args):
            raise ParseError(f"predicate {a.pred} used with arity {len(args)}, previously {known}",
                             name[2], name[3])
        return a

    def conj(self) -> List[Atom]:
        atoms = [self.atom()]
        while self.peek()[0] == ",":
            self.next()
            atoms.append(self.atom())
        return atoms

    # -- statements
    def statement(self):
        t = self.peek()
        if t[0] == "ident" and t[1] == "fd" and self.peek(1)[0] == "ident":
            return self.fd()
        if t[0] == "ident" and t[1] == "query" and self.peek(1)[0] == "ident" and self.peek(2)[0] == "(":
            return self.query()
        start = t
        body = self.conj()
        if self.peek()[0] == ".":
            self.next()
            self.db.extend(body)
            return
        self.expect("arrow")
        self._no_consts(body, start)
        if self.peek()[0] == "ident" and self.peek(1)[0] == "=":
            lhs = self.next()[1]
            self.next()
            rhs = self.expect("ident")[1]
            self.expect(".")
            try:
                self.prog.egds.append(Egd(frozenset(body), lhs, rhs))
            except ValueError as e:
                raise ParseError(str(e), start[2], start[3]) from None
            return
        head = self.conj()
        self._no_consts(head, start)
        self.expect(".")
        self.prog.tgds.append(Tgd(frozenset(body), frozenset(head)))

    def _no_consts(self, atoms, tok):
        for a in atoms:
            if any(not isinstance(x, str) for x in a.args):
                raise ParseError("constants are not allowed in rules", tok[2], tok[3])

    def fd(self):
        kw = self.next()
        name = self.expect("ident")
        self.expect("[")
        key = [int(self.expect("int")[1])]
        while self.peek()[0] == ",":
            self.next()
            key.append(int(self.expect("int")[1]))
        self.expect("]")
        self.expect("arrow")
        target = int(self.expect("int")[1])
        self.expect(".")
        self.pending_fds.append((kw, name[1], tuple(key), target))

    def query(self):
        self.next()
        name = self.expect("ident")[1]
        self.expect("(")
        free = []
        if self.peek()[0] != ")":
            free.append(self.expect("ident")[1])
            while self.peek()[0] == ",":
                self.next()
                free.append(self.expect("ident")[1])
        self.expect(")")
        self.expect("if")
        clauses = [self.clause()]
        while self.peek()[0] == "|":
            self.next()
            clauses.append(self.clause())
        self.expect(".")
        self.prog.queries.append(UCQEqQuery(tuple(free), tuple(clauses), name))

    def clause(self):
        atoms, eqs = [], []
        while True:
            if self.peek()[0] == "ident" and self.peek(1)[0] == "(":
                atoms.append(self.atom())
            else:
                left = self.term()
                self.expect("=")
                eqs.append(Equality(left, self.term()))
            if self.peek()[0] != ",":
                break
            self.next()
        return (frozenset(atoms), tuple(eqs))

    def run(self) -> Program:
        while self.peek()[0] != "eof":
            self.statement()
        for kw, name, key, target in self.pending_fds:
            arity = self.arity.get(name, max(key + (target,)))
            try:
                self.prog.fds.append(FunctionalDependency(name, arity, key, target))
            except ValueError as e:
                raise ParseError(str(e), kw[2], kw[3]) from None
        self.prog.database = frozenset(self.db)
        return self.prog


def parse_program(text: str) -> Program:
    return _Parser(text).run()


def parse_rules(text: str) -> list:
    p = parse_program(text)
    return p.tgds + p.egds


def parse_instance(text: str) -> Instance:
    """Parse a bare conjunction such as ``R(x,y), R(y,z)``."""
    text = text.strip()
    if not text:
        return frozenset()
    if not text.endswith("."):
        text += "."
    return parse_program(text).database


def read_program(path) -> Program:
    with open(path, encoding="utf-8") as f:
        return parse_program(f.read())


# --------------------------------------------------------------------------
# serialisation

def _canon_db(db: Instance) -> Instance:
    lab = canonical_labeling(db)
    return apply_renaming(db, {v: f"n{k}" for v, k in lab.items()})


def _conj(atoms) -> str:
    return ", ".join(str(a) for a in sorted_atoms(atoms))


def serialize_rules(rules: Iterable) -> str:
    return "".join(f"{r}.\n" for r in canonical_rules(rules))


def serialize_program(p: Program) -> str:
    """Deterministic text form; variables renamed canonically."""
    out = []
    out.extend(f"{r}.\n" for r in canonical_rules(p.tgds))
    out.extend(f"{r}.\n" for r in canonical_rules(p.egds))
    out.extend(f"{fd}.\n" for fd in sorted(set(p.fds), key=lambda f: (f.pred, f.key, f.target)))
    if p.database:
        out.append(_conj(_canon_db(p.database)) + ".\n")
    out.extend(f"{q}\n" for q in p.queries)
    return "".join(out)


def instance_str(i: Iterable[Atom]) -> str:
    return _conj(i)


# --------------------------------------------------------------------------
# JSON

def atom_json(a: Atom) -> list:
    return [a.pred] + [term_str(t) for t in a.args]


def instance_json(i: Iterable[Atom]) -> list:
    return [atom_json(a) for a in sorted_atoms(i)]


def rule_json(r) -> dict:
    if isinstance(r, Tgd):
        return {"body": instance_json(r.body), "head": instance_json(r.head)}
    return {"body": instance_json(r.body), "lhs": r.lhs, "rhs": r.rhs}


def program_json(p: Program) -> dict:
    """Field order: tgds, egds, fds, database, queries."""
    return {
        "tgds": [rule_json(r) for r in canonical_rules(p.tgds)],
        "egds": [rule_json(r) for r in canonical_rules(p.egds)],
        "fds": [{"pred": f.pred, "key": list(f.key), "target": f.target} for f in p.fds],
        "database": instance_json(_canon_db(p.database)),
        "queries": [{"name": q.name, "free": list(q.free),
                     "clauses": [{"atoms": instance_json(a), "equalities": [[term_str(e.left), term_str(e.right)] for e in eqs]}
                                 for a, eqs in q.clauses]} for q in p.queries],
    }


def _term_from_json(s: str):
    if len(s) >= 2 and s[0] == s[-1] == '"':
        return Const(s[1:-1], True)
    if len(s) >= 2 and s[0] == s[-1] == "'":
        return Const(s[1:-1], False)
    return s


def instance_from_json(data: list) -> Instance:
    return frozenset(Atom(a[0], tuple(_term_from_json(t) for t in a[1:])) for a in data)


def program_from_json(data: dict) -> Program:
    p = Program()
    p.tgds = [Tgd(instance_from_json(r["body"]), instance_from_json(r["head"])) for r in data.get("tgds", [])]
    p.egds = [Egd(instance_from_json(r["body"]), r["lhs"], r["rhs"]) for r in data.get("egds", [])]
    arity = {}
    for r in p.tgds + p.egds:
        for a in r.body:
            arity[a.pred] = len(a.args)
    p.fds = [FunctionalDependency(f["pred"], arity.get(f["pred"], max(f["key"] + [f["target"]])),
                                  tuple(f["key"]), f["target"]) for f in data.get("fds", [])]
    p.database = instance_from_json(data.get("database", []))
    p.queries = [UCQEqQuery(tuple(q["free"]), tuple(
        (instance_from_json(c["atoms"]), tuple(Equality(_term_from_json(l), _term_from_json(r)) for l, r in c["equalities"]))
        for c in q["clauses"]), q["name"]) for q in data.get("queries", [])]
    return p


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False)
