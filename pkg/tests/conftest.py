import pytest

from mesoperc.lattices import MarkedTriangleDomain, builtin_torus, build_mesoscopic

FIG1_WINDOW = (0.0, 0.0, 0.05, 0.05)


def fig1_patch():
    """Nine-face asymmetric patch of the fig1 torus with four corner marks."""
    t, e = builtin_torus("fig1")
    return build_mesoscopic(t, e, 0.125, 1, FIG1_WINDOW).coarse_domain()


@pytest.fixture(scope="session")
def fig1_quad():
    return fig1_patch()


@pytest.fixture(scope="session")
def fig1_tri():
    d = fig1_patch()
    b = d.triangulation.boundary
    # every other boundary vertex: no two marks share a coarse boundary edge
    return MarkedTriangleDomain(d.triangulation, d.embedding, (b[1], b[3], b[5]))


def pytest_terminal_summary(terminalreporter):
    from _report import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
