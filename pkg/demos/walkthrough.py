"""A short tour of the library on small hand-written inputs.

Run with ``python demos/walkthrough.py``.
"""
from tgdrewrite.chase import certain_via_chase
from tgdrewrite.classes import classify, simplify_fixpoint
from tgdrewrite.datalog import answer_via_datalog, datalog_from_depth, depth_bound
from tgdrewrite.encoding import certain_answers
from tgdrewrite.integration import integrate_all
from tgdrewrite.resolution import certain_via_resolution, saturated_resolution
from tgdrewrite.rules import FunctionalDependency
from tgdrewrite.syntax import parse_instance as I
from tgdrewrite.syntax import parse_program
from tgdrewrite.syntax import parse_rules as R


def section(title):
    print(f"\n== {title}")


section("chase and resolution agree")
sigma = R("Emp(x) -> WorksIn(x,d). WorksIn(x,d) -> Dept(d).")
d = I('Emp("ann")')
q = I("Dept(y)")
print("chase:     ", certain_via_chase(d, sigma, [q]))
print("resolution:", certain_via_resolution(d, sigma, [q]))
for q2 in saturated_resolution([q], sigma).queries:
    print("  rewriting:", ", ".join(map(str, sorted(q2, key=str))))

section("sticky sets and simplification")
sticky = R("""
    A(x,x,y,z,t) -> B(x,y).
    C(x,y) -> A(x,y,u,v,v).
    D(x,y,z,t) -> A(x,x,y,z,t).
""")
print(classify(sticky))
res = simplify_fixpoint(sticky)
for r in res.simplified:
    print(" ", r)
print("database facts enter through:")
for r in res.transfer:
    print(" ", r)

section("functional dependency integration")
out = integrate_all(R("A(x,y) -> B(x,z), C(z,y)."), [FunctionalDependency("B", 2, (1,), 2)])
for r in out.rules:
    print(" ", r)

section("answers with constants")
p = parse_program("""
    A(u,v) -> B(u,u).
    A("a","b"), B("c","d").
    query q(x1,x2) :- B(x1,x2).
""")
for tup in sorted(certain_answers(p.database, p.dependencies, p.queries[0]).tuples, key=str):
    print(" ", tuple(c.label for c in tup))

section("Datalog rewriting of transitivity")
trans = R("R(x,y), R(y,z) -> R(x,z).")
rw = datalog_from_depth(trans, [I("R(x,x)")], depth_bound(trans))
print(rw.manifest())
print("cycle a->b->a:", answer_via_datalog(I('R("a","b"), R("b","a")'), rw))
print("path  a->b:   ", answer_via_datalog(I('R("a","b")'), rw))
