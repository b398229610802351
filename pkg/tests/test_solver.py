import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fraclab.core import FracParams, Grid, GridFunction, constant, make_domain, sample_profile
from fraclab.solver import (
    NonConvergence,
    build_energy,
    comparison_check,
    default_tolerance,
    energy,
    energy_gradient,
    minimize,
    solve_dirichlet,
    solve_obstacle,
)


def _setup(m=33, s=0.6, p=2.0, g="hat", n=1):
    grid = Grid(2.0, m, n)
    if g == "hat":
        gf = sample_profile("hat", {"c": 1.0, "w": 1.0}, grid)
    elif g == "linear":
        gf = sample_profile("linear", {"slope": 1.0}, grid)
    else:
        gf = constant(float(g), grid)
    dom = make_domain("ball", grid, exhaustion=False, radius=1.0)
    return grid, gf, dom, FracParams(s, p, n)


def _fd_gradient(v, E, step=1e-6):
    I = E.I
    out = np.empty(I.size)
    for k, i in enumerate(I):
        up, dn = v.values.copy(), v.values.copy()
        up[i] += step
        dn[i] -= step
        out[k] = (energy(v.replace(values=up), E) - energy(v.replace(values=dn), E)) / (2 * step)
    return out


@settings(max_examples=12, deadline=None)
@given(st.floats(1.2, 4.0), st.floats(0.2, 0.9), st.integers(0, 2**31 - 1))
def test_gradient_matches_finite_differences(p, s, seed):
    grid, g, dom, P = _setup(m=17, s=s, p=p)
    E = build_energy(dom, g, 0.5, P)
    rng = np.random.default_rng(seed)
    vals = g.values.copy()
    vals[E.I] = rng.normal(size=E.I.size)
    v = GridFunction(grid, vals, g.tail)
    grad = energy_gradient(v, E)
    fd = _fd_gradient(v, E)
    assert np.linalg.norm(grad - fd) <= 1e-5 * np.linalg.norm(grad)


def test_constant_data_gives_constant_solution_immediately():
    grid, g, dom, P = _setup(g=0.7)
    u, rep = solve_dirichlet(0.0, g, dom, P)
    assert np.all(u.values == 0.7) and rep.iterations == 0 and rep.converged


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_solution_satisfies_stopping_rule(p):
    grid, g, dom, P = _setup(p=p)
    u, rep = solve_dirichlet(0.0, g, dom, P)
    E = build_energy(dom, g, 0.0, P)
    grad = energy_gradient(u, E)
    assert np.max(np.abs(grad)) <= rep.tolerance
    assert rep.el_residual == pytest.approx(rep.grad_sup / grid.h)


def test_solution_minimizes_energy():
    grid, g, dom, P = _setup(p=2.5)
    u, _ = solve_dirichlet(0.2, g, dom, P)
    E = build_energy(dom, g, 0.2, P)
    e0 = energy(u, E)
    rng = np.random.default_rng(3)
    for _ in range(5):
        vals = u.values.copy()
        vals[E.I] += 1e-3 * rng.normal(size=E.I.size)
        assert energy(u.replace(values=vals), E) > e0


def test_linear_data_is_reproduced():
    grid, g, dom, P = _setup(m=65, s=0.9, p=3.0, g="linear")
    u, _ = solve_dirichlet(0.0, g, dom, P)
    assert np.max(np.abs(u.values - g.values)) < 1e-4


def test_source_orders_solutions():
    grid, g, dom, P = _setup(p=1.8)
    u0, _ = solve_dirichlet(0.0, g, dom, P)
    u1, _ = solve_dirichlet(1.0, g, dom, P)
    rep = comparison_check(u0, u1, dom, tol=1e-7, f_u=0.0, f_v=1.0)
    assert rep.passed and rep.info["status"] == "pass"
    assert np.all(u1.values[dom.interior] > u0.values[dom.interior])


def test_comparison_reports_inapplicable_hypotheses():
    grid, g, dom, P = _setup()
    u0, _ = solve_dirichlet(0.0, g, dom, P)
    rep = comparison_check(u0, u0.affine(1.0, -1.0), dom)
    assert rep.info["status"] == "inapplicable" and not rep.info["applicable"]


def test_solver_is_deterministic():
    grid, g, dom, P = _setup(p=2.5)
    a, _ = solve_dirichlet(0.3, g, dom, P)
    b, _ = solve_dirichlet(0.3, g, dom, P)
    assert np.array_equal(a.values, b.values)


def test_non_convergence_is_reported():
    grid, g, dom, P = _setup()
    with pytest.raises(NonConvergence) as info:
        solve_dirichlet(0.0, g, dom, P, max_iter=1)
    assert info.value.report is not None and not info.value.report.converged
    u, rep = solve_dirichlet(0.0, g, dom, P, max_iter=1, raise_on_fail=False)
    assert not rep.converged and "wall_time" not in rep.to_dict()


def test_interior_of_checks_exterior_values():
    grid, g, dom, P = _setup()
    E = build_energy(dom, g, 0.0, P)
    with pytest.raises(ValueError):
        E.interior_of(g.affine(1.0, 1.0))
    assert np.array_equal(E.interior_of(g), g.values[E.I])


def test_divergent_tail_is_rejected():
    grid, g, dom, P = _setup(s=0.3, p=3.0, g="linear")
    with pytest.raises(ValueError):
        build_energy(dom, g, 0.0, P)


def test_default_tolerance():
    assert default_tolerance(2.0) == 1e-8 and default_tolerance(1.5) == 1e-6


def test_minimize_quadratic_and_bound():
    A = np.diag([1.0, 4.0, 9.0])
    b = np.array([1.0, -2.0, 3.0])

    def fg(x):
        return 0.5 * x @ A @ x - b @ x, A @ x - b

    x, *_ = minimize(fg, np.zeros(3), np.diag(A), 1e-12)
    assert np.allclose(x, np.linalg.solve(A, b), atol=1e-10)
    lower = np.array([0.0, 0.0, 0.0])
    xb, *_ = minimize(fg, lower.copy(), np.diag(A), 1e-12, lower=lower)
    assert np.allclose(xb, [1.0, 0.0, 1.0 / 3.0], atol=1e-10)


# ---------------------------------------------------------------------------
# Obstacle problems


def _bump(grid):
    return sample_profile("hat", {"c": 1.0, "w": 0.5}, grid)


def test_obstacle_above():
    grid = Grid(2.0, 65, 1)
    psi = _bump(grid)
    dom = make_domain("ball", grid, exhaustion=False, radius=1.0)
    P = FracParams(0.6, 2.0, 1)
    u, rep = solve_obstacle(psi, 0.0, dom, P, "above")
    assert rep.converged and np.all(u.values >= psi.values)
    E = build_energy(dom, psi, 0.0, P)
    grad = energy_gradient(u, E)
    free = u.values[E.I] > psi.values[E.I] + 1e-9
    contact = ~free
    assert free.any() and contact.any()
    assert np.max(np.abs(grad[free]), initial=0.0) <= 10 * rep.tolerance
    # on the contact set the constraint is active: the gradient pushes downward
    assert np.all(grad[contact] >= -10 * rep.tolerance)


def test_obstacle_below_is_the_exact_mirror():
    grid = Grid(2.0, 65, 1)
    psi = _bump(grid)
    dom = make_domain("ball", grid, exhaustion=False, radius=1.0)
    P = FracParams(0.4, 1.7, 1)
    up, _ = solve_obstacle(psi, 0.3, dom, P, "above")
    lo, _ = solve_obstacle(-psi, -0.3, dom, P, "below")
    assert np.array_equal(lo.values, -up.values)
    with pytest.raises(ValueError):
        solve_obstacle(psi, 0.0, dom, P, "sideways")


def test_two_dimensional_solve_is_symmetric():
    grid, g, dom, P = _setup(m=17, s=0.5, p=2.0, g=0.0, n=2)
    u, rep = solve_dirichlet(1.0, g, dom, P)
    V = u.reshaped()
    assert rep.converged and V.max() > 0
    assert np.allclose(V, V.T, rtol=0, atol=1e-12) and np.allclose(V, V[::-1], rtol=0, atol=1e-12)
