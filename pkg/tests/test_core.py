from tgdrewrite.core import (Atom, Const, Fn, apply_renaming, canonical, entails, equivalent,
                             find_homomorphism, homomorphisms, isomorphic, term_str, variables)
from tgdrewrite.syntax import parse_instance as I


def test_constants_are_rigid():
    assert find_homomorphism(I('R("a",x)'), I('R("b",y)')) is None
    assert find_homomorphism(I('R("a",x)'), I('R("a","a")')) == {"x": Const("a")}


def test_hard_and_soft_constants_differ():
    assert Const("a") != Const("a", hard=False)
    assert term_str(Const("a", hard=False)) == "'a'"


def test_homomorphism_folds_a_path_onto_a_loop():
    path = I("R(x,y), R(y,z)")
    loop = I("R(u,u)")
    assert entails(loop, path)
    assert not entails(path, loop)


def test_all_homomorphisms_enumerated():
    # R(x,y) into a 2-cycle: exactly the two edges
    hs = homomorphisms(I("R(x,y)"), I("R(a,b), R(b,a)"))
    assert sorted((h["x"], h["y"]) for h in hs) == [("a", "b"), ("b", "a")]


def test_fixed_assignment_respected():
    assert find_homomorphism(I("R(x,y)"), I("R(a,b)"), fixed={"x": "b"}) is None


def test_canonical_form_ignores_variable_names():
    a = I("A(x,x,y,z,t), B(x,y)")
    b = apply_renaming(a, {"x": "p", "y": "q", "z": "r", "t": "s"})
    assert canonical(a) == canonical(b)
    assert isomorphic(a, b)


def test_canonical_form_separates_non_isomorphic():
    assert canonical(I("R(x,y), R(y,x)")) != canonical(I("R(x,y), R(y,z)"))


def test_equivalent_but_not_isomorphic():
    a = I("R(x,y), R(x,z)")
    b = I("R(x,y)")
    assert equivalent(a, b)
    assert not isomorphic(a, b)


def test_skolem_terms_are_rigid():
    t = Fn("f", ("x",))
    assert variables([Atom("R", (t, "y"))]) == {"y"}
    assert str(Atom("R", (t, "y"))) == "R(f(x),y)"
