"""Explicit barriers and their numerical certificates.

Every constant below is an integral over (0, 1) with algebraic endpoint
behaviour.  Each half interval is mapped by a power substitution that
makes the leading endpoint power smooth, and the substituted variable is
split into geometric panels so that inner scales such as ``1/a`` in the
ring integrals are resolved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma as Gamma

from .core import (
    CertificateReport,
    ConstantTail,
    FracParams,
    Grid,
    GridFunction,
    ProfileTail,
    SumTail,
    from_profile,
)
from .operator import (
    STANDARD,
    dead_variable_constant,
    eval_profile_1d,
    eval_pv_error,
    radial_reduce_3d,
)
from .profiles import FAMILIES, make_profile
from .quadrature import TABLE, QuadratureSpec, gauss01


class CertificationError(RuntimeError):
    """No certified value exists at the finest sampling."""


# ---------------------------------------------------------------------------
# Endpoint-graded quadrature on (0, 1)


def _graded_nodes(e: float, nodes: int, panels: int = 40):
    """Nodes u in (0, 1] and weights for int_0^1 F(u) du, geometric toward 0."""
    x, w = gauss01(nodes)
    edges = 2.0 ** -np.arange(panels + 1, dtype=float)[::-1]
    edges = np.concatenate([[0.0], edges])
    ln = np.diff(edges)
    u = (edges[:-1, None] + ln[:, None] * x[None, :]).ravel()
    wu = (ln[:, None] * w[None, :]).ravel()
    return u, wu


def _left(F, e: float, nodes: int):
    """int_0^{1/2} F(t, 1 - t) dt where F ~ t^(e-1) at 0."""
    u, wu = _graded_nodes(e, nodes)
    q = 1.0 / e
    t = 0.5 * u**q
    jac = 0.5 * q * u ** (q - 1.0)
    return float(np.sum(wu * jac * F(t, 1.0 - t)))


def _right(F, e: float, nodes: int):
    """int_{1/2}^1 F(t, 1 - t) dt where F ~ (1-t)^(e-1) at 1."""
    u, wu = _graded_nodes(e, nodes)
    q = 1.0 / e
    w = 0.5 * u**q
    jac = 0.5 * q * u ** (q - 1.0)
    return float(np.sum(wu * jac * F(1.0 - w, w)))


def _integral(left, right, quad: QuadratureSpec):
    """Sum of left/right pieces, each a list of (F, exponent); returns (value, error)."""

    def run(k):
        return sum(_left(F, e, k) for F, e in left) + sum(_right(F, e, k) for F, e in right)

    fine = run(quad.profile_nodes)
    coarse = run(max(8, quad.profile_nodes // 2 + 2))
    return fine, abs(fine - coarse) + 1e-15 * abs(fine)


def _logt(t, omt):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(t < 0.5, np.log(t), np.log1p(-omt))


def _one_minus_pow(t, omt, a):
    """1 - t^a, accurate near t = 1."""
    return -np.expm1(a * _logt(t, omt))


def _bracket(B, A, sp):
    """(B^(1-sp) - A^(1-sp)) / (1-sp), or ln(B/A) at sp = 1, from B - A without cancellation."""
    return _bracket_d(B - A, A, sp)


def _bracket_d(dBA, A, sp):
    lr = np.log1p(dBA / A)
    if abs(1.0 - sp) < 1e-12:
        return lr
    return A ** (1.0 - sp) * np.expm1((1.0 - sp) * lr) / (1.0 - sp)


def _pw(B, sp):
    if abs(1.0 - sp) < 1e-12:
        return np.log(B)
    return B ** (1.0 - sp) / (1.0 - sp)


# ---------------------------------------------------------------------------
# The power-profile constant


def _check_beta(beta, s, p, strict=False):
    if not 0 < s < 1 or not p > 1:
        raise ValueError("need 0 < s < 1 and p > 1")
    if not beta > 0:
        raise ValueError("beta must be positive")
    if beta > s or (strict and beta >= s):
        raise ValueError(f"beta = {beta} exceeds s = {s}")


def _main_integral(beta, s, p, quad):
    """int_0^1 (t^{p(s-beta)} - 1) (1-t^beta)^{p-2} t^{beta-1} (1-t)^{-sp} dt  (<= 0)."""
    sp, g = s * p, p * (s - beta)
    if g == 0.0:
        return 0.0, 0.0

    def a(t, omt):
        return t ** (beta - 1.0 + g) * _one_minus_pow(t, omt, beta) ** (p - 2.0) * omt ** (-sp)

    def b(t, omt):
        return -(t ** (beta - 1.0)) * _one_minus_pow(t, omt, beta) ** (p - 2.0) * omt ** (-sp)

    def whole(t, omt):
        return (-_one_minus_pow(t, omt, g) * t ** (beta - 1.0)
                * _one_minus_pow(t, omt, beta) ** (p - 2.0) * omt ** (-sp))

    return _integral([(a, beta + g), (b, beta)], [(whole, p - sp)], quad)


def power_constant(beta: float, s: float, p: float, quad: QuadratureSpec = STANDARD,
                   table=TABLE, with_error: bool = False):
    """C(beta, s, p) with L (x_+)^beta = -C x^{beta(p-1) - sp} for x > 0."""
    _check_beta(beta, s, p)
    I, err = _main_integral(beta, s, p, quad)
    k = -2.0 * beta * (p - 1.0) / (s * p)
    val, err = k * I, abs(k) * err
    table.record("C", {"beta": beta, "s": s, "p": p}, val, err, "graded substitution Gauss", quad)
    return (val, err) if with_error else val


# ---------------------------------------------------------------------------
# Ring in R^3


@dataclass(frozen=True)
class RingDecomposition:
    I: float
    II: float
    III: float
    IV: float
    prefactor: float
    total: float
    error: float
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "I": self.I, "II": self.II, "III": self.III, "IV": self.IV,
            "prefactor": self.prefactor, "total": self.total, "error": self.error,
            "params": dict(self.params),
        }


def ring_decomposition(beta: float, s: float, p: float, r0: float, r: float,
                       quad: QuadratureSpec = STANDARD) -> RingDecomposition:
    """L omega(r) for omega = (|x| - r0)_+^beta in R^3, split into four integrals.

    With d = r - r0, a = 2 r0 / d and c(t) = (1 - t^beta)^{p-2} t^{beta-1}:
    I is the main (negative) term, II the two far-side kernels, III and
    IV the curvature corrections carrying the factor d / r.
    """
    _check_beta(beta, s, p)
    if not r0 > 0 or not r > r0:
        raise ValueError("need r > r0 > 0")
    sp, g = s * p, p * (s - beta)
    d = r - r0
    a = 2.0 * r0 / d

    def c(t, omt):
        return _one_minus_pow(t, omt, beta) ** (p - 2.0) * t ** (beta - 1.0)

    I, eI = _main_integral(beta, s, p, quad)

    II, eII = _integral(
        [(lambda t, o: c(t, o) * (1 + t + a) ** (-sp), beta),
         (lambda t, o: c(t, o) * t**g * (1 + t + a * t) ** (-sp), beta + g)],
        [(lambda t, o: c(t, o) * ((1 + t + a) ** (-sp) + t**g * (1 + t + a * t) ** (-sp)),
          p - 1.0)],
        quad,
    )
    k = sp * d / r
    III, eIII = _integral(
        [(lambda t, o: c(t, o) * _bracket_d(2 * t + a, o, sp), beta)],
        [(lambda t, o: c(t, o) * _pw(1 + t + a, sp), p - 1.0),
         (lambda t, o: -c(t, o) * _pw(o, sp), p - sp if sp < 1 else p - 1.0)],
        quad,
    )
    IV, eIV = _integral(
        [(lambda t, o: t ** (g - 1.0) * c(t, o) * _bracket_d((2 + a) * t, o, sp), beta + g)],
        [(lambda t, o: t ** (g - 1.0) * c(t, o) * _pw(1 + t + a * t, sp), p - 1.0),
         (lambda t, o: -t ** (g - 1.0) * c(t, o) * _pw(o, sp), p - sp if sp < 1 else p - 1.0)],
        quad,
    )
    III, IV, eIII, eIV = k * III, k * IV, k * eIII, k * eIV
    pref = 4.0 * math.pi / (1.0 + sp) * beta * (p - 1.0) / sp * d ** (beta * (p - 1.0) - sp)
    total = pref * (I + II + III + IV)
    err = abs(pref) * (eI + eII + eIII + eIV)
    return RingDecomposition(I, II, III, IV, pref, total, err,
                             {"beta": beta, "s": s, "p": p, "r0": r0, "r": r})


def find_ring_delta(beta: float, s: float, p: float, r0: float = 1.0,
                    quad: QuadratureSpec = STANDARD, table=TABLE, d_min: float = 1e-8,
                    bisections: int = 30) -> float:
    """Largest sampled delta with ring total <= -1 on (r0, r0 + delta).

    The distance ladder is geometric from ``d_min`` up to ``r0``; the first
    failing rung is refined by bisection.  Raises CertificationError when
    even the smallest rung fails.
    """
    _check_beta(beta, s, p)

    def ok(d):
        dec = ring_decomposition(beta, s, p, r0, r0 + d, quad)
        return dec.total + 2 * dec.error <= -1.0

    ladder = d_min * 2.0 ** np.arange(0, int(math.log2(r0 / d_min)) + 2)
    if not ok(ladder[0]):
        raise CertificationError(
            f"ring total exceeds -1 already at r - r0 = {ladder[0]:g} (beta={beta}, s={s})")
    lo, hi = ladder[0], None
    for d in ladder[1:]:
        if ok(d):
            lo = d
        else:
            hi = d
            break
    if hi is not None:
        for _ in range(bisections):
            mid = math.sqrt(lo * hi)
            if ok(mid):
                lo = mid
            else:
                hi = mid
    delta = float(lo)
    table.record("delta_ring", {"beta": beta, "s": s, "p": p, "r0": r0}, delta,
                 float(hi - lo) if hi is not None else 0.0, "ladder + bisection", quad)
    return delta


# ---------------------------------------------------------------------------
# Shell in one dimension


@dataclass(frozen=True)
class ShellDecomposition:
    J1: float
    J2: float
    J3: float
    prefactor: float
    total: float
    error: float

    def to_dict(self) -> dict:
        return {"J1": self.J1, "J2": self.J2, "J3": self.J3, "prefactor": self.prefactor,
                "total": self.total, "error": self.error}


def shell_1d_decomposition(beta: float, s: float, p: float, x: float,
                           quad: QuadratureSpec = STANDARD) -> ShellDecomposition:
    """L of (|x| - 1)_+^beta on the line, for |x| > 1."""
    _check_beta(beta, s, p)
    if not abs(x) > 1:
        raise ValueError("the shell formula needs |x| > 1")
    sp, g = s * p, p * (s - beta)
    d = abs(x) - 1.0

    def c(t, omt):
        return _one_minus_pow(t, omt, beta) ** (p - 2.0) * t ** (beta - 1.0)

    J1, e1 = _main_integral(beta, s, p, quad)
    J2, e2 = _integral([(lambda t, o: c(t, o) * (1 + t + 2 / d) ** (-sp), beta)],
                       [(lambda t, o: c(t, o) * (1 + t + 2 / d) ** (-sp), p - 1.0)], quad)
    J3, e3 = _integral([(lambda t, o: c(t, o) * t**g * (1 + t + 2 * t / d) ** (-sp), beta + g)],
                       [(lambda t, o: c(t, o) * t**g * (1 + t + 2 * t / d) ** (-sp), p - 1.0)],
                       quad)
    pref = 2.0 * beta * (p - 1.0) / sp * d ** (beta * (p - 1.0) - sp)
    return ShellDecomposition(J1, J2, J3, pref, pref * (J1 + J2 + J3),
                              abs(pref) * (e1 + e2 + e3))


def find_shell_delta(beta, s, p, quad: QuadratureSpec = STANDARD, d_min: float = 1e-8) -> float:
    """Largest sampled delta with a negative shell total on 1 < |x| < 1 + delta."""
    _check_beta(beta, s, p)

    def ok(d):
        dec = shell_1d_decomposition(beta, s, p, 1.0 + d, quad)
        return dec.total + 2 * dec.error < 0

    if not ok(d_min):
        raise CertificationError("shell total is not negative at the smallest sampled distance")
    lo, hi = d_min, None
    d = d_min
    while d < 1.0:
        d *= 2.0
        if ok(d):
            lo = d
        else:
            hi = d
            break
    if hi is not None:
        for _ in range(30):
            mid = math.sqrt(lo * hi)
            lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return float(lo)


# ---------------------------------------------------------------------------
# Truncated minorant


def minorant_bracket(L: float, params: FracParams, quad: QuadratureSpec = STANDARD,
                     levels: int = 25) -> CertificateReport:
    """Two-sided bracket for L of the truncated minorant near its foot.

    Ratios x / L = 0.5 * 2^(-j/2) are scanned downward; delta is the
    smallest failing ratio (or 0.5 when none fails) and the certificate
    covers every sampled ratio below it.
    """
    if not L > 0:
        raise ValueError("L must be positive")
    s, p, sp = params.s, params.p, params.sp
    P1 = params.with_dim(1)
    prof = make_profile("truncated-minorant", 1, s=s, L=L)
    k = (p - 1.0) / sp * L ** (-s)
    lo_b, hi_b = -4.0 * k, -k
    ratios = 0.5 * 2.0 ** (-np.arange(levels) / 2.0)
    vals = [eval_profile_1d(prof, r * L, P1, quad, with_error=True) for r in ratios]
    ok = [(lo_b < v - 2 * e) and (v + 2 * e < hi_b) for v, e in vals]
    if any(e > (hi_b - lo_b) for _, e in vals):
        raise ValueError("quadrature error exceeds the bracket width")
    bad = [r for r, good in zip(ratios, ok) if not good]
    delta = float(min(bad)) if bad else 0.5
    rep = CertificateReport(
        subject=f"truncated-minorant bracket L={L}",
        bound=hi_b,
        bound_lo=lo_b,
        margin=0.0,
        sense="le",
        tolerances={"error_factor": 2.0},
        info={"delta": delta, "L": L, "bracket": [lo_b, hi_b]},
    )
    for r, (v, e) in zip(ratios, vals):
        if r < delta:
            rep.add([r * L], v, e)
    rep.clauses["nonempty_interval"] = len(rep.samples) > 0
    return rep


# ---------------------------------------------------------------------------
# Smooth cutoff margin


def _sphere_area(n):
    return 2.0 * math.pi ** (n / 2.0) / Gamma(n / 2.0)


def _directions(n, k):
    """Unit directions and surface weights on S^{n-1}."""
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if n == 2:
        th, w = gauss01(k)
        panels = 16
        t = ((np.arange(panels)[:, None] + th[None, :]).ravel()) * 2 * math.pi / panels
        ww = np.tile(w, panels) * 2 * math.pi / panels
        return np.stack([np.cos(t), np.sin(t)], axis=1), ww
    # axisymmetric about e_1: polar angle only, azimuth integrated
    th, w = gauss01(k)
    panels = 16
    t = ((np.arange(panels)[:, None] + th[None, :]).ravel()) * math.pi / panels
    ww = np.tile(w, panels) * math.pi / panels * 2 * math.pi * np.sin(t)
    return np.stack([np.cos(t), np.sin(t), np.zeros_like(t)], axis=1), ww


def _cutoff_integral(x, R, p, sp, n, k):
    """int (1 - C(y))^{p-1} |y - x|^{-n-sp} dy for |x| <= R along rays from x (x on e_1)."""
    theta, wt = _directions(n, k)
    xv = np.zeros(n)
    xv[0] = x
    b = theta @ xv
    c0 = x * x
    total = 0.0
    u, wu = _graded_nodes(1.0, k, panels=30)
    for th_b, w in zip(b, wt):
        # |x + rho theta| = rad  <=>  rho = -b + sqrt(b^2 - c0 + rad^2)
        r1 = -th_b + math.sqrt(max(th_b * th_b - c0 + R * R, 0.0))
        r2 = -th_b + math.sqrt(th_b * th_b - c0 + 4 * R * R)
        r1 = max(r1, 0.0)
        q = 1.0 / max(1e-3, 3.0 * (p - 1.0) - sp) if r1 == 0.0 else 1.0
        rho = r1 + (r2 - r1) * u**q
        jac = (r2 - r1) * q * u ** (q - 1.0)
        rad = np.sqrt(np.maximum(c0 + 2 * th_b * rho + rho * rho, 0.0))
        one_c = _smooth(rad, R)  # 1 - C
        with np.errstate(divide="ignore", invalid="ignore"):
            F = np.where(rho > 0, one_c ** (p - 1.0) * rho ** (-1.0 - sp), 0.0)
        total += w * (float(np.sum(wu * jac * F)) + r2 ** (-sp) / sp)
    return total


def _smooth(rad, R):
    from .profiles import smoothstep5

    return smoothstep5((rad - R) / R)


@dataclass(frozen=True)
class CutoffMargin:
    delta: float
    error: float
    argmin: float
    naive_minorant: float
    corrected_minorant: float
    samples: tuple

    def to_dict(self):
        return {
            "delta": self.delta,
            "error": self.error,
            "argmin": self.argmin,
            "naive_minorant": self.naive_minorant,
            "corrected_minorant": self.corrected_minorant,
            "samples": [list(t) for t in self.samples],
        }


def cutoff_minorant(R: float, params: FracParams) -> float:
    """int_{|y| > 2R} (|y| / 2)^{-n-sp} dy in closed form."""
    n, sp = params.n, params.sp
    return _sphere_area(n) * 2.0 ** (n + sp) * (2.0 * R) ** (-sp) / sp


def cutoff_supersolution_margin(R: float, params: FracParams, quad: QuadratureSpec = STANDARD,
                                table=TABLE, details: bool = False, points: int = 9):
    """Certified lower bound for delta = min_{|x|<=R} int (1-C)^{p-1} |y-x|^{-n-sp} dy.

    Then L C <= -2 delta on B_R (the factor 2 comes from the operator's
    normalisation).  The minimum is sampled on ``points`` radii in
    [0, R]; the bound subtracts twice the quadrature error estimate.
    """
    if not R > 0:
        raise ValueError("R must be positive")
    n, p, sp = params.n, params.p, params.sp
    xs = np.linspace(0.0, R, points)
    k1, k2 = quad.profile_nodes, max(8, quad.profile_nodes // 2 + 2)
    fine = np.array([_cutoff_integral(x, R, p, sp, n, k1) for x in xs])
    coarse = np.array([_cutoff_integral(x, R, p, sp, n, k2) for x in xs])
    err = float(np.max(np.abs(fine - coarse))) + 1e-14 * float(np.max(fine))
    j = int(np.argmin(fine))
    delta = float(fine[j]) - 2.0 * err
    naive = cutoff_minorant(R, params)
    table.record("delta_cutoff", {"R": R, "n": n, "s": params.s, "p": p}, delta, err,
                 "ray quadrature, sampled minimum", quad)
    if not details:
        return delta
    return CutoffMargin(delta, err, float(xs[j]), naive, naive * 3.0 ** (-(n + sp)),
                        tuple(zip(xs.tolist(), fine.tolist())))


# ---------------------------------------------------------------------------
# Elementary inequality


def lemma_simple_check(p: float, na: int = 400, nM: int = 200, M_max: float = 100.0):
    """Empirical c_p = min (Phi_p(a + M) - Phi_p(a)) / M^{p-1} over a >= -2, M >= max(3, a)."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    Ms = np.geomspace(3.0, M_max, nM)
    best = (math.inf, None, None)
    for M in Ms:
        a = np.linspace(-2.0, M, na)
        r = (np.copysign(np.abs(a + M) ** (p - 1), a + M) - np.copysign(np.abs(a) ** (p - 1), a))
        r = r / M ** (p - 1)
        j = int(np.argmin(r))
        if r[j] < best[0]:
            best = (float(r[j]), float(a[j]), float(M))
    cp, a_, M_ = best
    rep = CertificateReport(
        subject=f"elementary inequality p={p}",
        bound=0.0,
        margin=1e-12,
        sense="ge",
        tolerances={"grid_a": na, "grid_M": nM},
        info={"c_p": cp, "argmin_a": a_, "argmin_M": M_},
    )
    rep.add([a_, M_], cp, 0.0)
    return rep


# ---------------------------------------------------------------------------
# Right-hand-side modification


def eta_profile(n: int):
    """0 on B_2, 1 outside B_4: one minus the cutoff of radius 2."""
    return make_profile("smooth-cutoff", n, R=2.0).with_affine(-1.0, 1.0)


def rhs_modify(u: GridFunction, M: float, params: FracParams, quad: QuadratureSpec = STANDARD,
               points=None, check_hypotheses: bool = True):
    """u - M eta together with a certificate that L of it is <= 0 in B_1.

    The input must satisfy |u| <= 1 outside B_1, u >= -1 in B_1 and
    L u <= 1 at the sampled nodes of B_1; M must be at least
    max(3, 2 sup|u|).
    """
    grid = u.grid
    X = grid.nodes()
    rad = np.linalg.norm(X, axis=1)
    if grid.L < 4.0:
        raise ValueError("the box must contain B_4 so that eta is resolved")
    inner = np.flatnonzero(rad < 1.0 - 1e-12)
    if points is not None:
        inner = np.asarray(points, dtype=int)
    sup = float(np.max(np.abs(u.values)))
    if u.tail.constant is not None:
        sup = max(sup, abs(u.tail.constant))
    if M < max(3.0, 2.0 * sup):
        raise ValueError(f"M = {M} is below max(3, 2 sup|u|) = {max(3.0, 2 * sup)}")
    if check_hypotheses:
        out = rad >= 1.0
        tail_ok = u.tail.constant is None or abs(u.tail.constant) <= 1.0
        if np.any(np.abs(u.values[out]) > 1.0) or not tail_ok:
            raise ValueError("hypothesis failed: |u| <= 1 outside B_1")
        if np.any(u.values[rad < 1.0] < -1.0):
            raise ValueError("hypothesis failed: u >= -1 in B_1")
        for i in inner:
            v, e = eval_pv_error(u, int(i), params, quad)
            if v - 2 * e > 1.0:
                raise ValueError(f"hypothesis failed: L u = {v:.6g} > 1 at node {int(i)}")
    eta = eta_profile(grid.n)
    vals = u.values - M * eta(X)
    shifted = ProfileTail(eta.with_affine(-M, 0.0))
    if u.tail.constant is not None:
        tail = ProfileTail(eta.with_affine(-M, float(u.tail.constant)))
    else:
        tail = SumTail(u.tail, shifted)
    ut = GridFunction(grid, vals, tail)
    rep = CertificateReport(
        subject=f"rhs modification M={M}",
        bound=0.0,
        margin=0.0,
        sense="le",
        tolerances={"error_factor": 2.0},
        info={"M": M, "sup_u": sup},
    )
    for i in inner:
        v, e = eval_pv_error(ut, int(i), params, quad)
        rep.add(X[i], v, e)
    rep.info["margin"] = -max(v for _, v, _ in rep.samples) if rep.samples else float("nan")
    return ut, rep


# ---------------------------------------------------------------------------
# Infimal convolution


def inf_convolution(v: GridFunction, eps: float, chunk: int = 512) -> GridFunction:
    """v_eps(x) = inf_y v(y) + |x - y|^2 / (2 eps) over the nodes and the tail.

    Constant tails contribute c + dist(x, box complement)^2 / (2 eps) and
    are kept as the output tail; other tails are sampled on a lattice
    extension of the box wide enough to matter.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    grid = v.grid
    X = grid.nodes()
    vals = np.asarray(v.values)
    Ys, Vs = X, vals
    if v.tail.constant is None:
        osc = float(np.ptp(vals)) + 1.0
        width = math.sqrt(2 * eps * osc) + grid.h
        k = int(math.ceil(width / grid.h))
        ax = -grid.L + grid.h * np.arange(-k, grid.m + k)
        mesh = np.meshgrid(*([ax] * grid.n), indexing="ij")
        E = np.stack([mm.ravel() for mm in mesh], axis=1)
        outside = np.any(np.abs(E) > grid.L + 1e-12 * grid.L, axis=1)
        Ys = np.concatenate([X, E[outside]])
        Vs = np.concatenate([vals, v.tail(E[outside])])
    out = np.empty(X.shape[0])
    for a in range(0, X.shape[0], chunk):
        Xa = X[a:a + chunk]
        d2 = np.sum((Xa[:, None, :] - Ys[None, :, :]) ** 2, axis=2)
        out[a:a + chunk] = np.min(Vs[None, :] + d2 / (2 * eps), axis=1)
    if v.tail.constant is not None:
        c = float(v.tail.constant)
        dist = grid.L - np.max(np.abs(X), axis=1)
        out = np.minimum(out, c + dist**2 / (2 * eps))
    return GridFunction(grid, out, v.tail)


# ---------------------------------------------------------------------------
# Barrier families and their certificates


BARRIER_FAMILIES = (
    "power-positive-part",
    "truncated-minorant",
    "half-space",
    "cone",
    "ring",
    "one-dim-shell",
    "indicator-ball",
    "smooth-cutoff",
)

_NEEDS_BETA = {"power-positive-part", "half-space", "cone", "ring", "one-dim-shell"}


@dataclass(frozen=True)
class BarrierSpec:
    family: str
    params: FracParams
    beta: float | None = None
    r0: float = 1.0
    R: float = 1.0
    L: float = 1.0
    normal: tuple | None = None
    validate: bool = True

    def __post_init__(self):
        if self.family not in BARRIER_FAMILIES:
            raise ValueError(f"unknown barrier family {self.family!r}")
        if self.family in _NEEDS_BETA:
            if self.beta is None or not self.beta > 0:
                raise ValueError(f"{self.family} needs beta > 0")
            if self.validate and self.beta > self.params.s:
                raise ValueError(f"beta = {self.beta} exceeds s = {self.params.s}")
        if self.family == "indicator-ball" and self.validate and not self.params.sp < 1:
            raise ValueError("the indicator barrier needs sp < 1")
        if self.family == "ring" and self.params.n != 3:
            raise ValueError("the ring barrier is three-dimensional")
        if self.family in ("power-positive-part", "one-dim-shell", "truncated-minorant") \
                and self.params.n != 1:
            raise ValueError(f"{self.family} is one-dimensional")
        if min(self.r0, self.R, self.L) <= 0:
            raise ValueError("r0, R and L must be positive")

    @property
    def strict(self) -> bool:
        return self.beta is None or self.beta < self.params.s

    def profile(self):
        n = self.params.n
        kw = {"beta": self.beta, "r0": self.r0, "R": self.R, "L": self.L, "s": self.params.s,
              "normal": self.normal}
        tag = "indicator-ball" if self.family == "indicator-ball" else self.family
        return make_profile(tag, n, **{k: v for k, v in kw.items() if v is not None})


def _eval(spec: BarrierSpec, prof, x, quad):
    """(value, error) of L prof at radius or coordinate x."""
    P = spec.params
    if P.n == 1:
        return eval_profile_1d(prof, x, P, quad, with_error=True)
    if P.n == 3 and prof.mode == "radial":
        return radial_reduce_3d(prof, x, P, quad, with_error=True)
    if spec.family == "half-space":
        N, eN = dead_variable_constant(P, with_error=True)
        base = make_profile("power-positive-part", 1, beta=spec.beta)
        v, e = eval_profile_1d(base, x, P.with_dim(1), quad, with_error=True)
        return N * v, abs(N) * e + abs(v) * eN
    raise ValueError(f"no evaluator for {spec.family} in n = {P.n}")


def certify_family(spec: BarrierSpec, quad: QuadratureSpec = STANDARD) -> CertificateReport:
    """Sign certificate of L barrier on the family's claimed region."""
    P = spec.params
    s, p, sp = P.s, P.p, P.sp
    fam = spec.family
    if fam == "truncated-minorant":
        return minorant_bracket(spec.L, P, quad)
    prof = spec.profile()
    bound, margin = 0.0, 0.0
    info = {"family": fam, "beta": spec.beta, "strict": spec.strict}
    clauses = {}
    if fam in ("power-positive-part", "half-space"):
        pts = [0.25, 0.5, 1.0, 2.0]
        if not spec.strict:
            # beta = s is the harmonic case: certify |L| small, not a strict sign
            margin = -1e-3
    elif fam == "cone":
        pts = [0.1, 0.3, 0.5, 0.7, 0.9, 0.99]
    elif fam == "ring":
        try:
            delta = find_ring_delta(spec.beta, s, p, spec.r0, quad)
            info["delta"] = delta
            pts = [spec.r0 + delta * f for f in (0.01, 0.1, 0.5, 0.9)]
            bound = -1.0
        except (CertificationError, ValueError) as exc:
            info["delta_error"] = str(exc)
            clauses["delta_found"] = False
            pts = [spec.r0 + d for d in (1e-4, 1e-3, 1e-2)]
    elif fam == "one-dim-shell":
        try:
            delta = find_shell_delta(spec.beta, s, p, quad)
            info["delta"] = delta
            pts = [1.0 + delta * f for f in (0.01, 0.1, 0.5, 0.9)]
        except (CertificationError, ValueError) as exc:
            info["delta_error"] = str(exc)
            clauses["delta_found"] = False
            pts = [1.0 + d for d in (1e-4, 1e-3, 1e-2)]
    elif fam == "indicator-ball":
        pts = [spec.R * f for f in (0.0, 0.25, 0.5, 0.75, 0.95)]
        bound = -_sphere_area(P.n) / sp * spec.R ** (-sp)
    elif fam == "smooth-cutoff":
        pts = [spec.R * f for f in (0.0, 0.25, 0.5, 0.75, 0.95)]
        delta = cutoff_supersolution_margin(spec.R, P, quad)
        info["delta"] = delta
        bound = -delta
    else:  # pragma: no cover - guarded by BarrierSpec
        raise ValueError(fam)
    if P.n != 1 and prof.mode == "radial":
        pts = [x for x in pts if x > 0] or [spec.R * 0.25]
    rep = CertificateReport(
        subject=f"{fam} sign certificate",
        bound=bound,
        margin=margin,
        sense="le",
        tolerances={"error_factor": 2.0, "margin": margin},
        clauses=clauses,
        info=info,
    )
    for x in pts:
        v, e = _eval(spec, prof, x, quad)
        rep.add([x], v, e)
    return rep


def certify_suite(s: float = 0.4, p: float = 2.0, beta_factor: float = 0.5,
                  quad: QuadratureSpec = STANDARD, validate: bool = True) -> dict:
    """Certificates for every family at beta = beta_factor * s."""
    beta = beta_factor * s
    cases = {
        "power-positive-part": BarrierSpec("power-positive-part", FracParams(s, p, 1), beta,
                                           validate=validate),
        "truncated-minorant": BarrierSpec("truncated-minorant", FracParams(s, p, 1)),
        "half-space": BarrierSpec("half-space", FracParams(s, p, 2), beta, validate=validate),
        "cone": BarrierSpec("cone", FracParams(s, p, 1), beta, validate=validate),
        "ring": BarrierSpec("ring", FracParams(s, p, 3), beta, validate=validate),
        "one-dim-shell": BarrierSpec("one-dim-shell", FracParams(s, p, 1), beta,
                                     validate=validate),
        "indicator-ball": BarrierSpec("indicator-ball", FracParams(s, p, 1)),
        "smooth-cutoff": BarrierSpec("smooth-cutoff", FracParams(s, p, 1)),
    }
    return {k: certify_family(v, quad) for k, v in cases.items()}


__all__ = [
    "BARRIER_FAMILIES",
    "BarrierSpec",
    "CertificationError",
    "CutoffMargin",
    "RingDecomposition",
    "ShellDecomposition",
    "certify_family",
    "certify_suite",
    "cutoff_minorant",
    "cutoff_supersolution_margin",
    "eta_profile",
    "find_ring_delta",
    "find_shell_delta",
    "inf_convolution",
    "lemma_simple_check",
    "minorant_bracket",
    "power_constant",
    "rhs_modify",
    "ring_decomposition",
    "shell_1d_decomposition",
]
