import random

from hypothesis import given, settings
from hypothesis import strategies as st

from tgdrewrite.chase import Answer, InconsistentMerge, certain_via_chase
from tgdrewrite.core import Atom, Const, apply_renaming, canonical, isomorphic, variables
from tgdrewrite.encoding import star_database, unstar_instance
from tgdrewrite.generate import random_case, random_fd_case
from tgdrewrite.integration import fd_closure, fd_satisfied
from tgdrewrite.oracle import oracle_certain
from tgdrewrite.resolution import certain_via_resolution
from tgdrewrite.syntax import parse_program, serialize_program

VARS = ["x", "y", "z", "u"]
terms = st.one_of(st.sampled_from(VARS), st.sampled_from(["a", "b"]).map(Const))
atoms = st.builds(lambda p, args: Atom(p, tuple(args[: {"A": 1, "B": 2, "C": 3}[p]])),
                  st.sampled_from("ABC"), st.lists(terms, min_size=3, max_size=3))
instances = st.frozensets(atoms, min_size=1, max_size=5)
seeds = st.integers(min_value=0, max_value=10**6)


@given(instances, st.permutations(VARS))
def test_canonical_form_ignores_variable_names(inst, perm):
    ren = dict(zip(VARS, perm))
    renamed = apply_renaming(inst, ren)
    assert canonical(inst) == canonical(renamed)
    assert isomorphic(inst, renamed)


@given(instances)
def test_star_round_trip(inst):
    assert unstar_instance(star_database(inst)) == inst


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_program_text_round_trip(seed):
    c = random_case(random.Random(seed))
    # serialising renames variables canonically, so it is a fixpoint after one pass
    text = serialize_program(parse_program(c.program_text()))
    assert serialize_program(parse_program(text)) == text


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_engines_agree(seed):
    c = random_case(random.Random(seed))
    want = oracle_certain(c.database, c.sigma, [c.query])
    assert certain_via_chase(c.database, c.sigma, [c.query]) == want
    assert certain_via_resolution(c.database, c.sigma, [c.query]) == want


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_fd_closure_satisfies_the_fds(seed):
    c = random_fd_case(random.Random(seed))
    try:
        d = fd_closure(c.database, c.fds)
    except InconsistentMerge:
        return
    assert all(fd_satisfied(d, fd) for fd in c.fds)
    assert variables(d) <= variables(c.database)


@given(instances)
def test_query_in_its_own_database(inst):
    assert certain_via_chase(inst, [], [inst]) is Answer.YES
