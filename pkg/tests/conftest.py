import pytest

from fraclab.core import FracParams, Grid, constant, make_domain, sample_profile


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def acceptance_log(request):
    lines = request.config._acceptance_lines

    def record(number: int, title: str, ok: bool, detail: str):
        lines.append((number, f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {title} | {detail}"))

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)


@pytest.fixture
def line_problem():
    """Factory for 1D problems on (-1, 1) inside the box [-2, 2]."""

    def make(m=65, g="linear", f=0.0, s=0.75, p=2.0, exhaustion=False):
        grid = Grid(2.0, m, 1)
        if g == "linear":
            gf = sample_profile("linear", {"slope": 1.0}, grid)
        elif isinstance(g, (int, float)):
            gf = constant(g, grid)
        else:
            gf = g(grid)
        dom = make_domain("ball", grid, exhaustion=exhaustion, radius=1.0)
        return gf, f, dom, FracParams(s, p, 1)

    return make
