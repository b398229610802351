"""Boundary-regularity experiments on refinement ladders."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    CertificateReport,
    ConstantTail,
    FracParams,
    Grid,
    GridFunction,
    MinTail,
    ProfileTail,
    from_profile,
    make_domain,
)
from .operator import STANDARD, eval_pv_error
from .profiles import make_profile
from .quadrature import QuadratureSpec
from .solver import comparison_check, solve_dirichlet

DEFAULT_LADDER = (129, 257, 513)
RUNGS = (4, 2, 1)


@dataclass
class RegularityReport:
    """Ladder data for one boundary point and the resulting trend verdict.

    ``approach`` holds u at the diagonal ladder points (distance
    RUNGS[k] * h_k on level k); ``fixed`` holds u - reference at the fixed
    physical point used for the 'ignoring' test.
    """

    xi0: float
    target: float
    reference: float
    spacings: list
    points: list
    approach: list
    fixed_point: float
    fixed: list
    verdict: str
    label: str = ""
    info: dict = field(default_factory=dict)

    @property
    def jump(self) -> float:
        return abs(self.target - self.reference)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "xi0": self.xi0,
            "target": self.target,
            "reference": self.reference,
            "spacings": list(self.spacings),
            "points": list(self.points),
            "approach": list(self.approach),
            "fixed_point": self.fixed_point,
            "fixed": list(self.fixed),
            "verdict": self.verdict,
            "info": self.info,
        }


def _decreasing(seq) -> bool:
    return all(b < a for a, b in zip(seq, seq[1:]))


def classify(target, approach, fixed_dev, jump, threshold=0.1) -> str:
    """'attaining' / 'ignoring' / 'inconclusive' from ladder discrepancies."""
    if len(approach) < 3 or jump <= 0:
        return "inconclusive"
    att = [abs(a - target) for a in approach]
    ign = [abs(d) for d in fixed_dev]
    if _decreasing(att) and att[-1] < threshold * jump:
        return "attaining"
    if _decreasing(ign) and ign[-1] < threshold * jump:
        return "ignoring"
    return "inconclusive"


def _grid_for(m, L):
    if m % 2 == 0:
        raise ValueError("ladder resolutions must be odd so that 0 is a node")
    return Grid(L, m, 1)


def _puncture_data(grid, g0, shift=0.0, scale=1.0):
    vals = np.full(grid.size, shift)
    c = grid.nearest([0.0])
    vals[c] = shift + scale * g0
    return GridFunction(grid, vals, ConstantTail(shift))


def puncture_experiment(params_list, ladder=DEFAULT_LADDER, L: float = 2.0, f: float = 0.0,
                        quad: QuadratureSpec = STANDARD, g0: float = 1.0, shift: float = 0.0,
                        scale: float = 1.0, tol=None):
    """Omega = (-1, 1) minus the centre node, data 0 outside and g0 at the puncture.

    For every parameter set the punctured and the unpunctured problems
    are solved on each ladder level; the approach ladder is x_k = RUNGS[k] h_k
    and the fixed point is x* = RUNGS[0] h_0.
    """
    reports = []
    for params in params_list:
        if params.n != 1:
            raise ValueError("the puncture experiment is one-dimensional")
        hs, pts, app, fix = [], [], [], []
        ordered = True
        x_star = None
        for k, m in enumerate(ladder):
            grid = _grid_for(m, L)
            h = grid.h
            x_star = RUNGS[0] * h if x_star is None else x_star
            g = _puncture_data(grid, g0, shift, scale)
            dom = make_domain("punctured-interval", grid, exhaustion=False, radius=1.0)
            ref_dom = make_domain("ball", grid, exhaustion=False, radius=1.0)
            u, _ = solve_dirichlet(f, g, dom, params, quad, tol=tol)
            g_ref = GridFunction(grid, np.full(grid.size, shift), ConstantTail(shift))
            ur, _ = solve_dirichlet(f, g_ref, ref_dom, params, quad, tol=tol)
            xk = RUNGS[min(k, len(RUNGS) - 1)] * h
            i = grid.nearest([xk])
            j = grid.nearest([x_star])
            hs.append(h)
            pts.append(float(grid.nodes()[i, 0]))
            app.append(float(u.values[i]))
            fix.append(float(u.values[j] - ur.values[j]))
        target = shift + scale * g0
        ref = shift
        verdict = classify(target, app, fix, abs(target - ref))
        reports.append(RegularityReport(0.0, target, ref, hs, pts, app, x_star, fix, verdict,
                                        label=f"s={params.s} p={params.p} sp={params.sp}",
                                        info={"f": f, "ladder": list(ladder)}))
    return reports


def _hat_data(grid, xi0):
    prof = make_profile("hat", 1, c=xi0, w=1.0)
    return from_profile(prof, grid)


def regular_point_experiment(params: FracParams, ladder=DEFAULT_LADDER, L: float = 2.0,
                             f: float = 0.0, quad: QuadratureSpec = STANDARD, xi0: float = 1.0,
                             tol=None):
    """Omega = (-1, 1), data a unit hat centred at the boundary point xi0."""
    hs, pts, app, fix = [], [], [], []
    x_star = None
    sols = []
    for k, m in enumerate(ladder):
        grid = _grid_for(m, L)
        h = grid.h
        g = _hat_data(grid, xi0)
        dom = make_domain("ball", grid, exhaustion=False, radius=1.0)
        u, _ = solve_dirichlet(f, g, dom, params, quad, tol=tol)
        sols.append(u)
        side = -np.sign(xi0)
        xk = xi0 + side * RUNGS[min(k, len(RUNGS) - 1)] * h
        x_star = xi0 + side * RUNGS[0] * h if x_star is None else x_star
        i = grid.nearest([xk])
        hs.append(h)
        pts.append(float(grid.nodes()[i, 0]))
        app.append(float(u.values[i]))
        fix.append(float("nan"))
    target = float(g(np.array([[xi0]]))[0])
    verdict = classify(target, app, [np.inf] * len(app), 1.0)
    return RegularityReport(xi0, target, 0.0, hs, pts, app, float(x_star), fix, verdict,
                            label=f"regular xi0={xi0} sp={params.sp}",
                            info={"f": f, "ladder": list(ladder)}), sols


def rhs_independence_experiment(kind: str, params: FracParams, ladder=DEFAULT_LADDER,
                                fs=(-1.0, 0.0, 1.0), quad: QuadratureSpec = STANDARD, tol=None):
    """Verdicts for each source f; the report records agreement and the f-ordering.

    ``kind`` is 'regular' (hat data at xi0 = 1 on (-1, 1)) or 'puncture'.
    """
    reports, ordered = [], True
    fields = []
    for f in fs:
        if kind == "regular":
            rep, sols = regular_point_experiment(params, ladder, f=f, quad=quad, tol=tol)
        elif kind == "puncture":
            rep = puncture_experiment([params], ladder, f=f, quad=quad, tol=tol)[0]
            sols = None
        else:
            raise ValueError("kind must be 'regular' or 'puncture'")
        reports.append(rep)
        fields.append(rep.approach)
    for a, b in zip(fields, fields[1:]):
        ordered = ordered and all(x <= y + 1e-9 for x, y in zip(a, b))
    verdicts = [r.verdict for r in reports]
    summary = {
        "kind": kind,
        "fs": list(fs),
        "verdicts": verdicts,
        "identical": len(set(verdicts)) == 1,
        "ordered": ordered,
    }
    return reports, summary


def ordered_solutions(params: FracParams, m: int, kind: str = "regular", fs=(-1.0, 0.0, 1.0),
                      quad: QuadratureSpec = STANDARD, L: float = 2.0):
    """Solutions for each f on one grid, with pairwise comparison reports."""
    grid = _grid_for(m, L)
    if kind == "regular":
        g = _hat_data(grid, 1.0)
        dom = make_domain("ball", grid, exhaustion=False, radius=1.0)
    else:
        g = _puncture_data(grid, 1.0)
        dom = make_domain("punctured-interval", grid, exhaustion=False, radius=1.0)
    sols = [solve_dirichlet(f, g, dom, params, quad)[0] for f in fs]
    reps = [comparison_check(a, b, dom, tol=1e-9, f_u=fa, f_v=fb)
            for (a, fa), (b, fb) in zip(zip(sols, fs), zip(sols[1:], fs[1:]))]
    return sols, reps


# ---------------------------------------------------------------------------
# Barrier and exterior-value certificates


def barrier_certificate_at(xi0, gamma: GridFunction, domain, params: FracParams,
                           quad: QuadratureSpec = STANDARD, max_samples: int = 12,
                           approach_dir=None) -> CertificateReport:
    """Check that gamma is a barrier at xi0: supersolution, positive, vanishing at xi0."""
    grid = gamma.grid
    xi0 = np.atleast_1d(np.asarray(xi0, dtype=float))
    X = grid.nodes()
    idx = domain.indices()
    far = np.linalg.norm(X[idx] - xi0[None, :], axis=1) > 1e-12
    idx = idx[far]
    pick = idx[np.linspace(0, idx.size - 1, min(max_samples, idx.size)).astype(int)]
    rep = CertificateReport(
        subject=f"barrier at {xi0.tolist()}",
        bound=0.0,
        margin=0.0,
        sense="le",
        tolerances={"error_factor": 2.0},
    )
    for i in pick:
        v, e = eval_pv_error(gamma, int(i), params, quad)
        rep.add(X[i], v, e)
    rep.clauses["supersolution"] = all(rep.sample_ok(v, e) for _, v, e in rep.samples)
    rep.clauses["positive"] = bool(np.all(gamma.values[idx] > 0))
    # approach ladder toward xi0 from inside
    if approach_dir is None:
        c = X[domain.indices()].mean(axis=0)
        approach_dir = c - xi0
    nu = np.asarray(approach_dir, dtype=float)
    nu = nu / np.linalg.norm(nu)
    dists = [8 * grid.h, 4 * grid.h, 2 * grid.h, grid.h]
    vals = [float(gamma(xi0[None, :] + d * nu[None, :])[0]) for d in dists]
    at = float(gamma(xi0[None, :])[0])
    rep.clauses["vanishes"] = bool(_decreasing(vals) and abs(at) <= 1e-12 and vals[-1] >= 0)
    rep.info["approach"] = list(zip(dists, vals))
    rep.info["value_at_xi0"] = at
    return rep


def exterior_shell_barrier(grid: Grid, params: FracParams, xi0: float = 1.0, rho: float = 1.0,
                           beta: float | None = None, quad: QuadratureSpec = STANDARD):
    """min(M omega, 1) with omega the shell profile around the exterior ball B_rho(xi0 + rho)."""
    from .barriers import find_shell_delta

    if grid.n != 1:
        raise ValueError("the shell barrier helper is one-dimensional")
    beta = params.s / 2 if beta is None else beta
    delta = min(find_shell_delta(beta, params.s, params.p, quad), 1.0)
    y0 = xi0 + rho
    # scale so the cap at 1 is reached at distance delta / 2 from the sphere (unit radius)
    M = (0.5 * delta * rho) ** (-beta)
    base = make_profile("one-dim-shell", 1, beta=beta, r0=rho, center=(y0,))
    prof = base.with_affine(M, 0.0)
    vals = np.minimum(prof(grid.nodes()), 1.0)
    tail = MinTail(ProfileTail(prof), ConstantTail(1.0))
    return GridFunction(grid, vals, tail)


def exterior_value_check(x0, g: GridFunction, f, domain, params: FracParams, ladder=None,
                         problem=None, quad: QuadratureSpec = STANDARD) -> CertificateReport:
    """u(x0) = g(x0) exactly and the patch oscillation at x0 shrinks under refinement.

    ``problem(m)`` may supply (g, domain) per level for the refinement part;
    without it only the given grid is checked.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    grid = g.grid
    i = grid.nearest(x0)
    X = grid.nodes()
    dist = np.min(np.linalg.norm(X[domain.indices()] - x0[None, :], axis=1))
    if domain.interior[i] or dist <= grid.h:
        raise ValueError("x0 must lie at positive grid distance from the closed domain")
    rep = CertificateReport(subject=f"exterior value at {x0.tolist()}", bound=0.0, margin=0.0,
                            sense="le")
    u0, _ = solve_dirichlet(0.0, g, domain, params, quad)
    u1, _ = solve_dirichlet(1.0, g, domain, params, quad)
    rep.add(x0, abs(u0.values[i] - g.values[i]), 0.0)
    rep.clauses["exact_value"] = bool(u0.values[i] == g.values[i] and u1.values[i] == g.values[i])

    def patch(u, gr):
        k = gr.nearest(x0)
        mi = gr.multi_index(k)
        offs = np.stack(np.meshgrid(*([np.arange(-1, 2)] * gr.n), indexing="ij"), -1)
        nb = np.clip(mi[None, :] + offs.reshape(-1, gr.n), 0, gr.m - 1)
        return u.values[gr.flat_index(nb)]

    rep.clauses["f_independent_patch"] = bool(np.array_equal(patch(u0, grid), patch(u1, grid)))
    if problem is not None and ladder:
        oscs = []
        for m in ladder:
            gm, dm = problem(m)
            um, _ = solve_dirichlet(0.0, gm, dm, params, quad)
            pv = patch(um, gm.grid)
            oscs.append(float(np.ptp(pv)))
        rep.info["oscillation"] = oscs
        rep.clauses["oscillation_shrinks"] = _decreasing(oscs)
    return rep


__all__ = [
    "RegularityReport",
    "barrier_certificate_at",
    "classify",
    "exterior_shell_barrier",
    "exterior_value_check",
    "ordered_solutions",
    "puncture_experiment",
    "regular_point_experiment",
    "rhs_independence_experiment",
]
