from fractions import Fraction

from hypothesis import HealthCheck, settings, strategies as st

from nijkit.algebra import RationalFunction, var

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def polynomials(draw, names=("x", "y", "z"), max_terms=4, max_deg=3):
    acc = RationalFunction(0)
    for _ in range(draw(st.integers(0, max_terms))):
        c = Fraction(draw(st.integers(-9, 9)), draw(st.integers(1, 5)))
        mono = RationalFunction(c)
        for name in names:
            mono = mono * var(name) ** draw(st.integers(0, max_deg))
        acc = acc + mono
    return acc


@st.composite
def rational_functions(draw, names=("x", "y")):
    num = draw(polynomials(names))
    den = draw(polynomials(names).filter(lambda p: not p.is_zero()))
    return num / den


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
