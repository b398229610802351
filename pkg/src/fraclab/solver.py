"""Discrete Gagliardo energy and its minimization.

Interior unknowns ``v_I`` interact with each other through the pair
weights ``W``, with the fixed box nodes outside the domain through the
same weights, and with the exterior of the box through ray quadrature of
the tail model.  With ordered pairs the energy reads

    J(v) = 1/p sum_{i,j in I} W_ij |v_i - v_j|^p
         + 2/p sum_{i in I, j in X} W_ij |v_i - g_j|^p
         + 2/p sum_{i in I, k} w_ik |v_i - g(y_k)|^p
         - h^n sum_{i in I} f_i v_i

and pairs with both ends outside the domain are dropped, so only energy
differences are meaningful.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .core import DomainMask, FracParams, GridFunction, phi_p
from .operator import STANDARD, exterior_rays, flat_outside, pair_weights, ray_rule
from .quadrature import QuadratureSpec


def _phi(t, p):
    if p == 2.0:
        return t
    if p == 3.0:
        return t * np.abs(t)
    return np.copysign(np.abs(t) ** (p - 1.0), t)


def default_tolerance(p: float) -> float:
    return 1e-8 if p >= 2 else 1e-6


@dataclass
class SolveReport:
    iterations: int
    energy: float
    grad_sup: float
    el_residual: float
    tolerance: float
    wall_time: float
    status: str = "converged"
    history: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def to_dict(self, timing: bool = False) -> dict:
        d = {
            "iterations": self.iterations,
            "energy": self.energy,
            "grad_sup": self.grad_sup,
            "el_residual": self.el_residual,
            "tolerance": self.tolerance,
            "status": self.status,
        }
        if timing:
            d["wall_time"] = self.wall_time
        return d


class NonConvergence(RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


# ---------------------------------------------------------------------------
# Energy


def _tail_coupling(grid, X, g: GridFunction, params: FracParams, quad: QuadratureSpec):
    """Per-node ray weights and tail samples for the region beyond the box.

    Returns a list of ``(weights, values)`` arrays, one pair per interior
    node, with ``weights`` already multiplied by ``h^n``.
    """
    n, h, sp, p = grid.n, grid.h, params.sp, params.p
    pad = h / 2.0
    flat = flat_outside(g.tail, grid.L)
    out = []
    for x in X:
        theta, omega, d0 = exterior_rays(grid, x, quad, pad=pad)
        if flat:
            if g.tail.constant is not None:
                out.append((np.array([h**n * float(np.sum(omega * d0 ** (-sp))) / sp]),
                            np.array([float(g.tail.constant)])))
                continue
            vals = g.tail(x[None, :] + 2.0 * d0[:, None] * theta)
            out.append((h**n * omega * d0 ** (-sp) / sp, vals))
            continue
        kappa = sp - g.tail.growth() * (p - 1.0)
        if kappa <= 0:
            raise ValueError("tail growth makes the exterior coupling diverge")
        rho, wt = ray_rule(d0, quad.far_radius(grid) + pad, kappa, quad.ray_nodes)
        Y = x[None, None, :] + rho[:, :, None] * theta[:, None, :]
        vals = g.tail(Y.reshape(-1, n))
        w = (h**n * omega[:, None] * wt * rho ** (-1.0 - sp)).ravel()
        out.append((w, vals))
    return out


@dataclass(eq=False)
class DiscreteEnergy:
    """Cached pieces of the discrete energy for one (grid, domain, data) triple."""

    domain: DomainMask
    g: GridFunction
    f: np.ndarray
    params: FracParams
    quad: QuadratureSpec = STANDARD

    def __post_init__(self):
        grid = self.domain.grid
        if self.g.grid != grid:
            raise ValueError("exterior data lives on a different grid")
        if self.params.n != grid.n:
            raise ValueError("parameter dimension differs from grid dimension")
        self.grid = grid
        self.I = self.domain.indices()
        self.X = np.flatnonzero(~self.domain.interior)
        f = np.asarray(self.f, dtype=float).reshape(-1)
        if f.size == grid.size:
            f = f[self.I]
        if f.size != self.I.size:
            raise ValueError("source term must have one value per node or per interior node")
        self.f_int = f
        self.hn = grid.h**grid.n
        self.W_II = pair_weights(grid, self.params, self.I, self.I, self.quad)
        self.W_IX = pair_weights(grid, self.params, self.I, self.X, self.quad)
        self.g_X = np.asarray(self.g.values[self.X])
        nodes = grid.nodes()[self.I]
        coup = _tail_coupling(grid, nodes, self.g, self.params, self.quad)
        self.tail_row = np.concatenate(
            [np.full(w.size, i, dtype=np.intp) for i, (w, _) in enumerate(coup)]
        ) if coup else np.zeros(0, dtype=np.intp)
        self.tail_w = np.concatenate([w for w, _ in coup]) if coup else np.zeros(0)
        self.tail_g = np.concatenate([v for _, v in coup]) if coup else np.zeros(0)
        N = self.I.size
        tail_rows = np.bincount(self.tail_row, self.tail_w, minlength=N)
        # for p = 2 the tail term is a quadratic in v_i: keep its moments only
        self._tail_moments = (
            tail_rows,
            np.bincount(self.tail_row, self.tail_w * self.tail_g, minlength=N),
            np.bincount(self.tail_row, self.tail_w * self.tail_g**2, minlength=N),
        )
        # diagonal of the p = 2 Hessian, used as the preconditioner
        self.diag = 2.0 * (self.W_II.sum(axis=1) + self.W_IX.sum(axis=1) + tail_rows)

    # -- array level ------------------------------------------------------

    def value_and_grad(self, v: np.ndarray):
        p = self.params.p
        D = v[:, None] - v[None, :]
        P = _phi(D, p)
        Ej = float(np.sum(self.W_II * D * P)) / p
        grad = 2.0 * np.sum(self.W_II * P, axis=1)
        if self.X.size:
            DX = v[:, None] - self.g_X[None, :]
            PX = _phi(DX, p)
            Ej += 2.0 / p * float(np.sum(self.W_IX * DX * PX))
            grad += 2.0 * np.sum(self.W_IX * PX, axis=1)
        if p == 2.0:
            A, B, C = self._tail_moments
            Ej += float(np.sum(A * v * v - 2.0 * B * v + C))
            grad += 2.0 * (A * v - B)
        elif self.tail_w.size:
            d = v[self.tail_row] - self.tail_g
            pk = _phi(d, p)
            Ej += 2.0 / p * float(np.sum(self.tail_w * d * pk))
            grad += 2.0 * np.bincount(self.tail_row, self.tail_w * pk, minlength=v.size)
        Ej -= self.hn * float(np.dot(self.f_int, v))
        grad -= self.hn * self.f_int
        return Ej, grad

    def interior_of(self, v: GridFunction) -> np.ndarray:
        if v.grid != self.grid:
            raise ValueError("grid function lives on a different grid")
        outside = np.asarray(v.values[self.X])
        if not np.array_equal(outside, self.g_X):
            raise ValueError("values outside the domain must equal the exterior data")
        return np.array(v.values[self.I])

    def assemble(self, vi: np.ndarray) -> GridFunction:
        vals = np.array(self.g.values, dtype=float)
        vals[self.I] = vi
        return GridFunction(self.grid, vals, self.g.tail)

    def scale(self) -> float:
        """Magnitude of a gradient component for data of unit size."""
        a = max(1.0, float(np.max(np.abs(self.g.values))) if self.g.values.size else 1.0)
        fm = float(np.max(np.abs(self.f_int))) if self.f_int.size else 0.0
        return max(a ** (self.params.p - 1.0), fm, 1.0) * self.hn


def build_energy(domain: DomainMask, g: GridFunction, f, params: FracParams,
                 quad: QuadratureSpec = STANDARD) -> DiscreteEnergy:
    fv = f.values if isinstance(f, GridFunction) else f
    if np.ndim(fv) == 0:
        fv = np.full(domain.grid.size, float(fv))
    return DiscreteEnergy(domain, g, fv, params, quad)


def energy(v: GridFunction, E: DiscreteEnergy) -> float:
    return E.value_and_grad(E.interior_of(v))[0]


def energy_gradient(v: GridFunction, E: DiscreteEnergy) -> np.ndarray:
    return E.value_and_grad(E.interior_of(v))[1]


# ---------------------------------------------------------------------------
# Optimizer


def _projected_grad(x, g, lower):
    if lower is None:
        return g
    at = x <= lower
    return np.where(at & (g > 0), 0.0, g)


def minimize(fg, x0, diag, tol, lower=None, max_iter=20000, memory=12):
    """L-BFGS with a diagonal initial metric and an optional lower bound.

    Bounded variables sitting on the bound with an outward gradient are
    frozen for the step; the trial point is projected back onto the
    feasible set.  Steps must satisfy Armijo (with roundoff slack) and,
    when the path is not bent by the projection, a curvature test on the
    directional derivative.
    """
    x = np.array(x0, dtype=float)
    if lower is not None:
        x = np.maximum(x, lower)
    f, g = fg(x)
    S, Y = [], []
    hist = [f]
    it = 0
    pg = _projected_grad(x, g, lower)
    frozen_prev = None
    status = "converged"
    while np.max(np.abs(pg), initial=0.0) > tol:
        if it >= max_iter:
            status = "max-iterations"
            break
        frozen = (x <= lower) & (g > 0) if lower is not None else None
        if frozen is not None and frozen_prev is not None and np.any(frozen != frozen_prev):
            S, Y = [], []
        frozen_prev = frozen
        # two-loop recursion on the free variables
        q = pg.copy()
        alphas = []
        for s, y in reversed(list(zip(S, Y))):
            rho = 1.0 / np.dot(y, s)
            a = rho * np.dot(s, q)
            alphas.append(a)
            q -= a * y
        if S:
            s, y = S[-1], Y[-1]
            gam = np.dot(s, y) / np.dot(y, y / diag)
            r = gam * q / diag
        else:
            r = q / diag
        for (s, y), a in zip(zip(S, Y), reversed(alphas)):
            rho = 1.0 / np.dot(y, s)
            b = rho * np.dot(y, r)
            r += s * (a - b)
        d = -r
        if frozen is not None:
            d[frozen] = 0.0
        slope = float(np.dot(g, d))
        if not slope < 0:
            S, Y = [], []
            d = -pg / diag
            slope = float(np.dot(g, d))
            if not slope < 0:
                status = "stalled"
                break
        xn, fn, gn, ok = _line_search(fg, x, f, g, d, slope, lower)
        if not ok:
            if S:
                S, Y = [], []
                it += 1
                continue
            status = "line-search-failure"
            break
        s, y = xn - x, gn - g
        sy = float(np.dot(s, y))
        if sy > 1e-300 and sy > 1e-12 * np.sqrt(np.dot(s, s) * np.dot(y, y)):
            S.append(s)
            Y.append(y)
            if len(S) > memory:
                S.pop(0)
                Y.pop(0)
        x, f, g = xn, fn, gn
        pg = _projected_grad(x, g, lower)
        hist.append(f)
        it += 1
    return x, f, g, it, status, hist


def _line_search(fg, x, f0, g0, d, slope, lower, c1=1e-4, c2=0.9, max_eval=50):
    """Strong-Wolfe bisection along x + a d, or Armijo backtracking on the projected path."""
    slack = 64 * np.finfo(float).eps * abs(f0)
    best = None
    if lower is not None:
        a = 1.0
        for _ in range(max_eval):
            xt = np.maximum(x + a * d, lower)
            ft, gt = fg(xt)
            if ft <= f0 + c1 * float(np.dot(g0, xt - x)) + slack:
                return xt, ft, gt, True
            a *= 0.5
        return x, f0, g0, False
    lo, hi, a = 0.0, math.inf, 1.0
    for _ in range(max_eval):
        xt = x + a * d
        ft, gt = fg(xt)
        dphi = float(np.dot(gt, d))
        armijo = ft <= f0 + c1 * a * slope + slack
        if armijo and (best is None or ft < best[1]):
            best = (xt, ft, gt)
        if not armijo or dphi > -c2 * slope:
            hi = a
        elif dphi < c2 * slope:
            lo = a
        else:
            return xt, ft, gt, True
        a = 2.0 * a if math.isinf(hi) else 0.5 * (lo + hi)
    if best is not None:
        return best + (True,)
    return x, f0, g0, False


# ---------------------------------------------------------------------------
# Solvers


def _finish(E, vi, f, g, it, status, hist, tol, t0):
    pg = g
    gs = float(np.max(np.abs(pg), initial=0.0))
    rep = SolveReport(
        iterations=it,
        energy=float(f),
        grad_sup=gs,
        el_residual=gs / E.hn,
        tolerance=tol,
        wall_time=time.perf_counter() - t0,
        status=status,
        history=hist,
    )
    return E.assemble(vi), rep


def solve_dirichlet(f, g: GridFunction, domain: DomainMask, params: FracParams,
                    quad: QuadratureSpec = STANDARD, tol: float | None = None,
                    x0=None, max_iter: int = 20000, energy_cache: DiscreteEnergy | None = None,
                    raise_on_fail: bool = True):
    """Minimize the discrete energy over the interior values.

    ``tol`` is relative: the exit test is ``max |grad| <= tol * scale``
    with ``scale = h^n max(1, |g|^(p-1), |f|)``.
    """
    t0 = time.perf_counter()
    E = energy_cache if energy_cache is not None else build_energy(domain, g, f, params, quad)
    tol = default_tolerance(params.p) if tol is None else float(tol)
    start = np.array(g.values[E.I]) if x0 is None else np.asarray(x0, dtype=float)
    if start.size == E.grid.size:
        start = start[E.I]
    abs_tol = tol * E.scale()
    vi, fv, gv, it, status, hist = minimize(E.value_and_grad, start, E.diag, abs_tol,
                                            max_iter=max_iter)
    u, rep = _finish(E, vi, fv, gv, it, status, hist, abs_tol, t0)
    if not rep.converged and raise_on_fail:
        raise NonConvergence(f"solver stopped: {status} (grad {rep.grad_sup:.3e} > {abs_tol:.3e})",
                             rep)
    return u, rep


def solve_obstacle(psi: GridFunction, f, domain: DomainMask, params: FracParams,
                   side: str = "above", quad: QuadratureSpec = STANDARD,
                   tol: float | None = None, max_iter: int = 20000, raise_on_fail: bool = True):
    """Minimize the energy with exterior data psi subject to v >= psi (or <= psi) in the domain.

    The 'below' problem is solved as the negated 'above' problem, which
    keeps the two sides exact mirror images.
    """
    if side not in ("above", "below"):
        raise ValueError("side must be 'above' or 'below'")
    if side == "below":
        fv = f.values if isinstance(f, GridFunction) else f
        u, rep = solve_obstacle(-psi, -np.asarray(fv, dtype=float), domain, params, "above",
                                quad, tol, max_iter, raise_on_fail)
        return -u, rep
    t0 = time.perf_counter()
    E = build_energy(domain, psi, f, params, quad)
    tol = default_tolerance(params.p) if tol is None else float(tol)
    lower = np.array(psi.values[E.I])
    abs_tol = tol * E.scale()
    vi, fv, gv, it, status, hist = minimize(E.value_and_grad, lower, E.diag, abs_tol,
                                            lower=lower, max_iter=max_iter)
    vi = np.maximum(vi, lower)
    u, rep = _finish(E, vi, fv, _projected_grad(vi, gv, lower), it, status, hist, abs_tol, t0)
    if not rep.converged and raise_on_fail:
        raise NonConvergence(f"obstacle solver stopped: {status}", rep)
    return u, rep


def _far_points(grid):
    pts = []
    for k in range(grid.n):
        for r in (1.5, 4.0, 64.0):
            for sgn in (-1.0, 1.0):
                y = np.zeros(grid.n)
                y[k] = sgn * r * grid.L
                pts.append(y)
    return np.array(pts)


def comparison_check(u: GridFunction, v: GridFunction, domain: DomainMask,
                     tol: float = 0.0, f_u=None, f_v=None):
    """Report whether v >= u at every node (comparison principle).

    The hypotheses are checked first: v >= u outside the domain (box
    nodes and sampled tail points) and, when
    both sources are given, f_v >= f_u.  If they fail the report is marked
    inapplicable instead of failed.
    """
    from .core import CertificateReport

    if u.grid != v.grid:
        raise ValueError("grid mismatch")
    outside = ~domain.interior
    hyp = bool(np.all(v.values[outside] >= u.values[outside] - tol))
    far = _far_points(u.grid)
    hyp = hyp and bool(np.all(v.tail(far) >= u.tail(far) - tol))
    if f_u is not None and f_v is not None:
        fu = np.broadcast_to(np.asarray(getattr(f_u, "values", f_u), dtype=float), (u.grid.size,))
        fv = np.broadcast_to(np.asarray(getattr(f_v, "values", f_v), dtype=float), (u.grid.size,))
        hyp = hyp and bool(np.all(fv[domain.interior] >= fu[domain.interior]))
    diff = v.values - u.values
    rep = CertificateReport(
        subject="comparison v >= u",
        bound=0.0,
        margin=-tol,
        sense="ge",
        tolerances={"tol": tol},
        info={"min_difference": float(diff.min()), "applicable": hyp},
    )
    if not hyp:
        rep.info["status"] = "inapplicable"
        return rep
    X = u.grid.nodes()
    worst = int(np.argmin(diff))
    rep.add(X[worst], float(diff[worst]), 0.0)
    rep.clauses["all_nodes_ordered"] = bool(np.all(diff >= -tol))
    rep.info["status"] = rep.verdict
    return rep


__all__ = [
    "DiscreteEnergy",
    "SolveReport",
    "NonConvergence",
    "build_energy",
    "energy",
    "energy_gradient",
    "solve_dirichlet",
    "solve_obstacle",
    "comparison_check",
    "minimize",
    "phi_p",
]
