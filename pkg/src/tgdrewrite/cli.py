"""Command-line entry point.

Exit status: 0 success or Yes, 1 No, 2 Unknown or budget exhausted,
3 usage or parse error, 4 engine disagreement (``crosscheck``).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import random
import sys
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

from .chase import Answer, ChaseBudget, InconsistentMerge, chase_witness, saturated_chase
from .classes import affected_positions, classify, simplify_fixpoint, sticky_report
from .core import canonicalize, variables
from .datalog import guard_report, weak_acyclicity
from .encoding import (METHODS, UNKNOWN, UNSAT, certain_answers, certain_answers_datalog, datalog_rewriting,
                       query_constants, star_database, star_query, unstar_instance,
                       unstar_rewriting)
from .generate import Case, random_case
from .integration import fd_closure, integrate_all
from .oracle import oracle_certain
from .resolution import ResolutionBudget, resolution_witness, saturated_resolution
from .rules import Program, UCQEqQuery
from .syntax import ParseError, instance_json, instance_str, read_program, rule_json, serialize_rules

EXIT_YES, EXIT_NO, EXIT_UNKNOWN, EXIT_USAGE, EXIT_DISAGREE = 0, 1, 2, 3, 4

log = logging.getLogger("tgdrewrite")


class UsageError(Exception):
    pass


@dataclass
class Output:
    """Collects text or a JSON document; printed once at the end."""

    as_json: bool
    lines: list
    doc: dict

    def line(self, s: str = "") -> None:
        self.lines.append(s)

    def emit(self, stream) -> None:
        if self.as_json:
            stream.write(json.dumps(self.doc, indent=2) + "\n")
        else:
            stream.write("".join(f"{s}\n" for s in self.lines))


# --------------------------------------------------------------------------
# helpers

def _budgets(args):
    cb, rb = ChaseBudget(), ResolutionBudget()
    steps = args.budget_steps or args.budget
    if steps:
        cb, rb = replace(cb, max_steps=steps), replace(rb, max_resolvents=steps)
    if args.budget_atoms:
        cb, rb = replace(cb, max_atoms=args.budget_atoms), replace(rb, max_atoms=args.budget_atoms)
    if args.budget_instances:
        cb = replace(cb, max_instances=args.budget_instances)
    return cb, rb


def _load(path: str) -> Program:
    try:
        return read_program(path)
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def _query(p: Program, name: Optional[str]) -> UCQEqQuery:
    if not p.queries:
        raise UsageError("the program declares no query")
    try:
        return p.query(name)
    except KeyError as e:
        raise UsageError(e.args[0]) from None


def _nulls(inst):
    return canonicalize(inst, prefix="_n")[0] if variables(inst) else frozenset(inst)


def _tuple_str(t) -> str:
    return "(" + ", ".join(str(c) for c in t) + ")"


def _sigma(p: Program, integrate: bool = False):
    if integrate and p.fds:
        out = integrate_all(p.tgds, p.fds)
        if not out.success:
            raise UsageError(f"integration failed: {out.reason}")
        return out.rules + p.egds
    return p.tgds + p.egds + [f.as_egd() for f in p.fds]


# --------------------------------------------------------------------------
# subcommands

def cmd_chase(args, out: Output) -> int:
    p = _load(args.file)
    cb, _ = _budgets(args)
    try:
        res = saturated_chase([p.database], _sigma(p), cb)
    except InconsistentMerge as e:
        out.doc.update(status="Inconsistent", instances=[], steps=0)
        out.line("status: Inconsistent")
        out.line(f"# {e}")
        return EXIT_NO
    insts = [_nulls(i) for i in res.instances]
    out.doc.update(status=str(res.status), instances=[instance_json(i) for i in insts], steps=res.steps)
    out.line(f"status: {res.status}")
    out.line(f"steps: {res.steps}")
    for n, i in enumerate(insts, 1):
        out.line(f"# instance {n}")
        out.line(instance_str(i) + "." if i else "# (empty)")
    return EXIT_YES if res.fixpoint else EXIT_UNKNOWN


def _ucq_json(q: UCQEqQuery) -> list:
    return [{"atoms": instance_json(a), "equalities": [[str(e.left), str(e.right)] for e in eqs]}
            for a, eqs in q.clauses]


def cmd_resolve(args, out: Output) -> int:
    p = _load(args.file)
    q = _query(p, args.query)
    _, rb = _budgets(args)
    kinds = {c.label: c.hard for c in query_constants(q)}
    rw = saturated_resolution(star_query(q, eliminate_equalities=True), _sigma(p), rb)
    ucq = unstar_rewriting(rw.queries, q.free, q.name, kinds)
    out.doc.update(status=str(rw.status), queries=_ucq_json(ucq))
    out.line(f"status: {rw.status}")
    out.line(f"# {len(rw.queries)} queries")
    out.line(str(ucq))
    return EXIT_YES if rw.fixpoint else EXIT_UNKNOWN


def cmd_analyze(args, out: Output) -> int:
    p = _load(args.file)
    sigma = p.tgds
    flags = classify(sigma)
    sticky = sticky_report(sigma)
    aff = sorted(affected_positions(sigma))
    guards = [guard_report(r) for r in sigma]
    info = {
        "lav": flags.lav, "lossless": flags.lossless, "acyclic": flags.acyclic, "datalog": flags.datalog,
        "sticky": sticky.sticky, "weaklyAcyclic": weak_acyclicity(sigma),
        "guarded": all(g.guarded for g in guards), "betaGuarded": all(g.beta_guarded for g in guards),
    }
    out.doc.update(info)
    out.doc["affectedPositions"] = [[pred, i] for pred, i in aff]
    out.doc["stickyWitness"] = ({"rule": rule_json(sticky.witness[0]), "variable": sticky.witness[1]}
                                if sticky.witness else None)
    for k, v in info.items():
        out.line(f"{k}: {str(v).lower()}")
    out.line("affected: " + (", ".join(f"{pred}[{i}]" for pred, i in aff) or "none"))
    if sticky.witness:
        r, v = sticky.witness
        out.line(f"sticky witness: {v} in {r}")
    return EXIT_YES


def cmd_simplify(args, out: Output) -> int:
    p = _load(args.file)
    res = simplify_fixpoint(p.tgds, max_steps=args.steps) if args.steps else simplify_fixpoint(p.tgds)
    out.doc.update(complete=res.complete,
                   simplified=[rule_json(r) for r in res.simplified],
                   transfer=[rule_json(r) for r in res.transfer],
                   inverse=[rule_json(r) for r in res.inverse])
    out.line("# simplified")
    out.lines.append(serialize_rules(res.simplified).rstrip("\n"))
    if res.transfer:
        out.line("# transfer")
        out.lines.append(serialize_rules(res.transfer).rstrip("\n"))
        out.line("# inverse")
        out.lines.append(serialize_rules(res.inverse).rstrip("\n"))
    if not res.complete:
        out.line("# stopped before the fixpoint")
    return EXIT_YES


def cmd_integrate(args, out: Output) -> int:
    p = _load(args.file)
    res = integrate_all(p.tgds, p.fds)
    fresh = {str(fd): list(names) for fd, names in sorted(res.fresh.items(), key=lambda kv: kv[1])}
    out.doc.update(success=res.success, reason=res.reason, fresh=fresh,
                   rules=[rule_json(r) for r in res.rules],
                   witnesses=[{"rule": rule_json(r), "atom": instance_json([a])[0]} for r, a in res.witnesses])
    for fd, (f, d) in fresh.items():
        out.line(f"# {fd}: {f}, {d}")
    if not res.success:
        out.line(f"# integration failed: {res.reason}")
    out.lines.append(serialize_rules(res.rules).rstrip("\n"))
    return EXIT_YES if res.success else EXIT_NO


def cmd_rewrite(args, out: Output) -> int:
    p = _load(args.file)
    q = _query(p, args.query)
    if q.free:
        raise UsageError("rewrite needs a boolean query")
    if p.egds or p.fds:
        raise UsageError("rewrite takes tgds only; egds are handled by `answer --engine datalog`")
    _, rb = _budgets(args)
    clauses = star_query(q, eliminate_equalities=True)
    rw, method = datalog_rewriting(p.tgds, clauses, args.method, args.k, rb)
    if rw is None:
        out.doc.update(status=UNKNOWN, method=method)
        out.line(f"# no {method} rewriting within budget")
        return EXIT_UNKNOWN
    manifest = rw.manifest()
    out.doc.update(manifest=manifest, method=method, rules=[rule_json(r) for r in rw.program])
    out.lines.append(serialize_rules(rw.program).rstrip("\n"))
    out.line("# manifest " + json.dumps(manifest))
    return EXIT_YES


def cmd_answer(args, out: Output) -> int:
    p = _load(args.file)
    q = _query(p, args.query)
    sigma = _sigma(p, args.integrate)
    d = p.database
    if args.integrate and p.fds:
        try:
            d = fd_closure(d, p.fds)
        except InconsistentMerge:
            sigma = sigma + [f.as_egd() for f in p.fds]
    cb, rb = _budgets(args)
    witness = None
    if args.engine == "datalog":
        res = certain_answers_datalog(d, sigma, q, args.method, args.k, rb)
    else:
        res = certain_answers(d, sigma, q, cb, rb, "chase" if args.engine == "chase" else "resolution")
        if not q.free and res.tuples and res.status != UNSAT:
            witness = _witness(d, sigma, q, args.engine, cb, rb)
    out.doc.update(status=res.status, method=res.method,
                   answers=None if res.tuples is None else [[str(c) for c in t] for t in sorted(res.tuples)])
    if res.tuples is None:
        out.line("UNKNOWN")
        return EXIT_UNKNOWN
    if res.status == UNSAT:
        out.line("# unsatisfiable: every tuple is an answer")
    if not q.free:
        out.line("YES" if res.tuples else "NO")
    else:
        out.lines.extend(_tuple_str(t) for t in sorted(res.tuples))
    if witness is not None:
        out.doc["witness"] = instance_json(witness)
        out.line("# witness: " + instance_str(witness))
    return EXIT_YES if res.tuples else EXIT_NO


def _witness(d, sigma, q, engine, cb, rb):
    ds = star_database(d, query_constants(q))
    clauses = star_query(q, eliminate_equalities=True)
    if engine == "chase":
        _, w = chase_witness(ds, sigma, clauses, cb)
        return None if w is None else _nulls(unstar_instance(w))
    _, w = resolution_witness(ds, sigma, clauses, rb)
    return None if w is None else _nulls(unstar_instance(w))


# --------------------------------------------------------------------------
# crosscheck

ENGINES = ("chase", "resolution", "oracle")


def _run_engines(case: Case, cb, rb) -> dict:
    from .chase import certain_via_chase
    from .resolution import certain_via_resolution
    qs = [case.query]
    return {
        "chase": certain_via_chase(case.database, case.sigma, qs, cb),
        "resolution": certain_via_resolution(case.database, case.sigma, qs, rb),
        "oracle": oracle_certain(case.database, case.sigma, qs),
    }


def disagrees(answers: dict) -> bool:
    known = {a for a in answers.values() if a is not Answer.UNKNOWN}
    return len(known) > 1


def shrink(case: Case, still_bad: Callable[[Case], bool]) -> Case:
    """Greedy removal of rules, database atoms and query atoms."""
    changed = True
    while changed:
        changed = False
        for field_ in ("sigma", "database", "query"):
            items = sorted(getattr(case, field_), key=str)
            for x in items:
                rest = [y for y in items if y != x]
                if field_ == "query" and not rest:
                    continue
                value = rest if field_ == "sigma" else frozenset(rest)
                cand = Case(**{**case.__dict__, field_: value})
                if still_bad(cand):
                    case, changed = cand, True
                    break
    return case


def cmd_crosscheck(args, out: Output) -> int:
    cb, rb = _budgets(args)
    if args.file:
        p = _load(args.file)
        cases = [Case(p.tgds + p.egds, p.database, a) for q in p.queries for a, _ in q.clauses]
        if not cases:
            raise UsageError("the program declares no query")
    else:
        rng = random.Random(args.seed)
        cases = [random_case(rng, args.cls) for _ in range(args.cases)]
    tally = {"agree": 0, "unknown": 0}
    for n, case in enumerate(cases):
        got = _run_engines(case, cb, rb)
        if disagrees(got):
            small = shrink(case, lambda c: disagrees(_run_engines(c, cb, rb)))
            final = _run_engines(small, cb, rb)
            out.doc.update(status="disagreement", case=n,
                           answers={k: str(v) for k, v in final.items()}, witness=small.program_text())
            out.line(f"disagreement on case {n}: " + ", ".join(f"{k}={v}" for k, v in final.items()))
            out.line("# minimized witness")
            out.lines.append(small.program_text().rstrip("\n"))
            return EXIT_DISAGREE
        tally["unknown" if Answer.UNKNOWN in got.values() else "agree"] += 1
    out.doc.update(status="ok", cases=len(cases), **tally)
    out.line(f"{len(cases)} cases, {tally['agree']} agree, {tally['unknown']} with an unknown engine")
    return EXIT_YES


# --------------------------------------------------------------------------
# argument parsing

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--budget-steps", type=_positive, help="chase steps and resolvents")
    common.add_argument("--budget", type=_positive, help="alias for --budget-steps")
    common.add_argument("--budget-atoms", type=_positive, help="atoms per instance or query")
    common.add_argument("--budget-instances", type=_positive, help="instances kept by the chase")

    ap = argparse.ArgumentParser(prog="tgdrewrite", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help_, file_required=True):
        sp = sub.add_parser(name, parents=[common], help=help_)
        if file_required:
            sp.add_argument("file", help=".dlg program")
        sp.set_defaults(fn=fn)
        return sp

    add("chase", cmd_chase, "saturate the database under the dependencies")
    sp = add("resolve", cmd_resolve, "saturate a query under resolution")
    sp.add_argument("--query", help="query name (default: first)")
    add("analyze", cmd_analyze, "class flags, affected positions and sticky witness")
    sp = add("simplify", cmd_simplify, "simplify a sticky rule set")
    sp.add_argument("--steps", type=_positive, help="stop after this many simplification steps")
    add("integrate", cmd_integrate, "compile functional dependencies into tgds "
                                    "(all orders tried for up to 6 FDs, input order beyond)")
    sp = add("rewrite", cmd_rewrite, "Datalog rewriting of a boolean query")
    sp.add_argument("--query")
    sp.add_argument("--method", choices=METHODS + ("auto",), default="auto")
    sp.add_argument("--k", type=_positive, help="depth bound (depth method)")
    sp = add("answer", cmd_answer, "certain answers of a query")
    sp.add_argument("--query")
    sp.add_argument("--engine", choices=("chase", "resolve", "datalog"), default="chase")
    sp.add_argument("--method", choices=METHODS + ("auto",), default="auto", help="Datalog route")
    sp.add_argument("--k", type=_positive)
    sp.add_argument("--integrate", action="store_true", help="integrate FDs before answering")
    sp = add("crosscheck", cmd_crosscheck, "compare engines on generated or supplied cases", False)
    sp.add_argument("file", nargs="?", help="check this program instead of generated cases")
    sp.add_argument("--cases", type=_positive, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--class", dest="cls", default="weakly_acyclic",
                    choices=("lav", "lossless", "acyclic", "sticky", "weakly_acyclic", "guarded"))
    return ap


def _positive(s: str) -> int:
    try:
        n = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}") from None
    if n <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return n


def _setup_logging() -> None:
    level = os.environ.get("ER_ENGINE_LOG", "").strip().upper()
    if not level:
        return
    value = int(level) if level.isdigit() else getattr(logging, level, logging.DEBUG)
    logging.basicConfig(stream=sys.stderr, level=value, format="%(name)s: %(message)s")


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else 0
    out = Output(args.json, [], {"command": args.command})
    try:
        code = args.fn(args, out)
    except ParseError as e:
        print(f"tgdrewrite: parse error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, ValueError) as e:
        print(f"tgdrewrite: {e}", file=sys.stderr)
        return EXIT_USAGE
    out.doc["exit"] = code
    out.emit(sys.stdout)
    return code


if __name__ == "__main__":
    sys.exit(main())
