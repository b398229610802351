"""Poisson modification and obstacle-initialised Perron envelopes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .barriers import cutoff_supersolution_margin
from .core import DomainMask, FracParams, GridFunction
from .operator import STANDARD
from .quadrature import QuadratureSpec
from .solver import default_tolerance, solve_dirichlet, solve_obstacle


class MonotonicityError(RuntimeError):
    """An envelope sequence moved the wrong way by more than the tolerance."""


def _as_domain(D, grid) -> DomainMask:
    if isinstance(D, DomainMask):
        return D
    return DomainMask(grid, np.asarray(D, dtype=bool), (), "level")


def poisson_modify(v: GridFunction, D, f, params: FracParams, quad: QuadratureSpec = STANDARD,
                   tol: float | None = None):
    """v outside D, the solution with exterior data v inside D."""
    dom = _as_domain(D, v.grid)
    u, rep = solve_dirichlet(f, v, dom, params, quad, tol=tol, x0=v.values)
    return u, rep


def _value_tol(g: GridFunction, tol: float) -> float:
    return 10.0 * tol * max(1.0, float(np.max(np.abs(g.values))))


def upper_perron(g: GridFunction, f, domain: DomainMask, params: FracParams,
                 quad: QuadratureSpec = STANDARD, tol: float | None = None,
                 max_sweeps: int = 20):
    """Obstacle solution above g, then repeated Poisson modification through the exhaustion.

    Returns the limit and a log with one entry per modification: the
    level, the sweep, the largest increase (must stay below the value
    tolerance) and the largest decrease.
    """
    tol = default_tolerance(params.p) if tol is None else float(tol)
    vtol = _value_tol(g, tol)
    dom = domain if domain.levels else domain.with_exhaustion()
    V, rep0 = solve_obstacle(g, f, dom, params, "above", quad, tol=tol)
    log = [{"sweep": 0, "level": -1, "increase": 0.0, "decrease": 0.0,
            "iterations": rep0.iterations}]
    for sweep in range(1, max_sweeps + 1):
        start = V
        for j, level in enumerate(dom.levels):
            W, rep = poisson_modify(V, level, f, params, quad, tol)
            diff = W.values - V.values
            inc, dec = float(max(diff.max(), 0.0)), float(max(-diff.min(), 0.0))
            log.append({"sweep": sweep, "level": j, "increase": inc, "decrease": dec,
                        "iterations": rep.iterations})
            if inc > vtol:
                raise MonotonicityError(
                    f"upper envelope increased by {inc:.3e} at sweep {sweep}, level {j}")
            V = W
        if float(np.max(np.abs(V.values - start.values))) < vtol:
            break
    else:
        from .solver import NonConvergence

        raise NonConvergence("Perron sweeps did not settle within the budget")
    return V, log


def lower_perron(g: GridFunction, f, domain: DomainMask, params: FracParams,
                 quad: QuadratureSpec = STANDARD, tol: float | None = None,
                 max_sweeps: int = 20):
    """Mirror image of upper_perron: obstacle from above, increasing sweeps."""
    fv = f.values if isinstance(f, GridFunction) else f
    V, log = upper_perron(-g, -np.asarray(fv, dtype=float), domain, params, quad, tol,
                          max_sweeps)
    mirrored = [dict(e, increase=e["decrease"], decrease=e["increase"]) for e in log]
    return -V, mirrored


def envelope_bounds(g: GridFunction, f, domain: DomainMask, params: FracParams,
                    quad: QuadratureSpec = STANDARD):
    """A priori interval for both envelopes from the smooth-cutoff supersolution.

    With sup g + lam C, lam^{p-1} 2 delta >= sup|f|, and C = 1 on a ball
    containing the domain, the envelopes lie within +-lam of the data range.
    """
    grid = domain.grid
    R = float(np.max(np.linalg.norm(grid.nodes()[domain.interior], axis=1))) + grid.h
    fv = np.broadcast_to(np.asarray(getattr(f, "values", f), dtype=float), (grid.size,))
    fmax = float(np.max(np.abs(fv[domain.interior]))) if domain.count else 0.0
    delta = cutoff_supersolution_margin(R, params, quad)
    lam = (fmax / (2.0 * delta)) ** (1.0 / (params.p - 1.0)) if fmax > 0 else 0.0
    return float(np.min(g.values)) - lam, float(np.max(g.values)) + lam


@dataclass
class PerronReport:
    upper: GridFunction
    lower: GridFunction
    direct: GridFunction
    gap: float
    upper_vs_direct: float
    lower_vs_direct: float
    ordered: bool
    upper_log: list = field(default_factory=list)
    lower_log: list = field(default_factory=list)
    bounds: tuple = ()
    refinement: list = field(default_factory=list)
    value_tol: float = 0.0

    @property
    def monotone(self) -> bool:
        """Upper sweeps never rose and lower sweeps never fell beyond the value tolerance."""
        up = all(e["increase"] <= self.value_tol for e in self.upper_log)
        lo = all(e["decrease"] <= self.value_tol for e in self.lower_log)
        return up and lo

    def to_dict(self) -> dict:
        return {
            "gap": self.gap,
            "upper_vs_direct": self.upper_vs_direct,
            "lower_vs_direct": self.lower_vs_direct,
            "ordered": self.ordered,
            "monotone": self.monotone,
            "value_tol": self.value_tol,
            "bounds": list(self.bounds),
            "upper_log": self.upper_log,
            "lower_log": self.lower_log,
            "refinement": self.refinement,
            "grid": self.upper.grid.to_dict(),
        }


def resolutivity_gap(g: GridFunction, f, domain: DomainMask, params: FracParams,
                     quad: QuadratureSpec = STANDARD, tol: float | None = None) -> PerronReport:
    """Both envelopes, the direct variational solution and their distances over the domain."""
    tol = default_tolerance(params.p) if tol is None else float(tol)
    up, ulog = upper_perron(g, f, domain, params, quad, tol)
    lo, llog = lower_perron(g, f, domain, params, quad, tol)
    direct, _ = solve_dirichlet(f, g, domain, params, quad, tol=tol)
    I = domain.interior
    gap = float(np.max(np.abs(up.values[I] - lo.values[I]), initial=0.0))
    ud = float(np.max(np.abs(up.values[I] - direct.values[I]), initial=0.0))
    ld = float(np.max(np.abs(lo.values[I] - direct.values[I]), initial=0.0))
    ordered = bool(np.all(lo.values <= up.values + _value_tol(g, tol)))
    bounds = envelope_bounds(g, f, domain, params, quad)
    return PerronReport(up, lo, direct, gap, ud, ld, ordered, ulog, llog, bounds,
                        value_tol=_value_tol(g, tol))


def refinement_study(problem, ms, params: FracParams, quad: QuadratureSpec = STANDARD,
                     tol: float | None = None, tol_order: float = 2.0):
    """Run resolutivity_gap for each resolution; ``problem(m)`` returns (g, f, domain).

    The algebraic tolerance shrinks like h^tol_order relative to the
    coarsest level, so that solver error stays below discretisation error.
    """
    base = default_tolerance(params.p) if tol is None else float(tol)
    reports, tols = [], []
    h0 = None
    for m in ms:
        g, f, dom = problem(m)
        h0 = dom.grid.h if h0 is None else h0
        t = base * (dom.grid.h / h0) ** tol_order
        tols.append(t)
        reports.append(resolutivity_gap(g, f, dom, params, quad, t))
    summary = [{"m": int(m), "h": r.upper.grid.h, "tol": t, "gap": r.gap,
                "upper_vs_direct": r.upper_vs_direct, "lower_vs_direct": r.lower_vs_direct}
               for m, r, t in zip(ms, reports, tols)]
    for r in reports:
        r.refinement = summary
    return reports


__all__ = [
    "MonotonicityError",
    "PerronReport",
    "envelope_bounds",
    "lower_perron",
    "poisson_modify",
    "refinement_study",
    "resolutivity_gap",
    "upper_perron",
]
