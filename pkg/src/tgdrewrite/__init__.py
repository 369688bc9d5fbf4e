"""Query answering under existential rules by chase, resolution and Datalog rewriting."""
from .core import Atom, Const, Fn, atom, canonical, canonicalize, entails, homomorphisms, instance
from .rules import Egd, FunctionalDependency, Program, Tgd, UCQEqQuery
from .syntax import ParseError, parse_instance, parse_program, parse_rules, serialize_program
from .chase import Answer, ChaseBudget, Status, certain_via_chase, chase_successors, saturated_chase
from .resolution import ResolutionBudget, certain_via_resolution, saturated_resolution
from .encoding import certain_answers, rewrite_query, satisfiable

__version__ = "0.1.0"

__all__ = [
    "Atom", "Const", "Fn", "atom", "canonical", "canonicalize", "entails", "homomorphisms", "instance",
    "Egd", "FunctionalDependency", "Program", "Tgd", "UCQEqQuery",
    "ParseError", "parse_instance", "parse_program", "parse_rules", "serialize_program",
    "Answer", "ChaseBudget", "Status", "certain_via_chase", "chase_successors", "saturated_chase",
    "ResolutionBudget", "certain_via_resolution", "saturated_resolution",
    "certain_answers", "rewrite_query", "satisfiable",
]
