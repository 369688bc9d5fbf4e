import pytest

from tgdrewrite.syntax import parse_rules


@pytest.fixture
def transitivity():
    return parse_rules("R(x,y), R(y,z) -> R(x,z).")


@pytest.fixture
def key_egd():
    return parse_rules("A(x,y), A(x,y2) -> y = y2.")


@pytest.fixture
def sticky_three():
    return parse_rules("""
        A(x,x,y,z,t) -> B(x,y).
        C(x,y) -> A(x,y,u,v,v).
        D(x,y,z,t) -> A(x,x,y,z,t).
    """)


# acceptance results, one entry per criterion: list of (ok, detail)
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def acceptance():
    return ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[n]
        verdict = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        terminalreporter.write_line(f"{verdict} criterion {n}: " + "; ".join(d for _, d in parts))
