"""Closed-form profile families.

A profile is a scalar shape ``phi(t)`` composed with either a linear form
``t = nu . x`` (directional profiles) or a distance ``t = |x - c|`` (radial
profiles), then scaled and shifted.  Shapes carry the metadata the 1D
quadrature needs: breakpoints with their local Hölder exponents and the
power growth at infinity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class Shape:
    """Piecewise closed-form function of one real variable."""

    #: (location, local exponent) pairs; exponent < 1 requests a substitution
    breaks: tuple = ()
    #: power growth at -inf and +inf (0 for bounded shapes)
    growth: tuple = (0.0, 0.0)
    #: True when the shape is constant beyond its last / before its first break
    flat_tails: tuple = (False, False)
    #: whether phi(|t|) is smooth across t = 0 (radial profiles at the centre)
    smooth_at_zero: bool = True

    def __call__(self, t):
        raise NotImplementedError

    def diff(self, t0: float, dt):
        """phi(t0 + dt) - phi(t0), accurate for small dt where possible."""
        dt = np.asarray(dt, dtype=float)
        return self(t0 + dt) - self(t0)

    def params(self) -> dict:
        return {}


def _pow_diff(a: float, da, beta: float):
    """(a + da)^beta - a^beta for a > 0 without cancellation."""
    da = np.asarray(da, dtype=float)
    ratio = da / a
    out = np.empty_like(ratio)
    ok = ratio > -1.0
    out[ok] = a**beta * np.expm1(beta * np.log1p(ratio[ok]))
    out[~ok] = -(a**beta)
    return out


@dataclass(frozen=True)
class PowerPositive(Shape):
    """(t - r0)_+^beta."""

    beta: float
    r0: float = 0.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("power profile needs beta > 0")

    @property
    def breaks(self):
        return ((self.r0, self.beta),)

    @property
    def growth(self):
        return (0.0, self.beta)

    @property
    def flat_tails(self):
        return (True, False)

    def __call__(self, t):
        d = np.maximum(np.asarray(t, dtype=float) - self.r0, 0.0)
        return d**self.beta

    def diff(self, t0, dt):
        a = t0 - self.r0
        if a <= 0:
            return self(t0 + np.asarray(dt, dtype=float))
        return _pow_diff(a, dt, self.beta)

    def params(self):
        return {"beta": self.beta, "r0": self.r0}


@dataclass(frozen=True)
class Minorant(Shape):
    """0 for t < 0, t^s on (0, L), L^s beyond."""

    s: float
    L: float = 1.0

    @property
    def breaks(self):
        return ((0.0, self.s), (self.L, 1.0))

    @property
    def flat_tails(self):
        return (True, True)

    def __call__(self, t):
        t = np.clip(np.asarray(t, dtype=float), 0.0, self.L)
        return t**self.s

    def diff(self, t0, dt):
        dt = np.asarray(dt, dtype=float)
        if 0 < t0 < self.L:
            t1 = np.clip(t0 + dt, 0.0, self.L)
            return _pow_diff(t0, t1 - t0, self.s)
        return self(t0 + dt) - self(t0)

    def params(self):
        return {"s": self.s, "L": self.L}


@dataclass(frozen=True)
class Cone(Shape):
    """(1 - t)_+^beta for t = |x| >= 0."""

    beta: float

    smooth_at_zero = False

    @property
    def breaks(self):
        return ((1.0, self.beta),)

    @property
    def flat_tails(self):
        return (False, True)

    def __call__(self, t):
        return np.maximum(1.0 - np.asarray(t, dtype=float), 0.0) ** self.beta

    def diff(self, t0, dt):
        a = 1.0 - t0
        if a <= 0:
            return self(t0 + np.asarray(dt, dtype=float))
        return _pow_diff(a, -np.asarray(dt, dtype=float), self.beta)

    def params(self):
        return {"beta": self.beta}


@dataclass(frozen=True)
class Step(Shape):
    """1 for t < R, 0 beyond (indicator of a ball in the radial variable)."""

    R: float = 1.0

    @property
    def breaks(self):
        return ((self.R, 0.0),)

    @property
    def flat_tails(self):
        return (True, True)

    def __call__(self, t):
        return (np.asarray(t, dtype=float) < self.R).astype(float)

    def params(self):
        return {"R": self.R}


def smoothstep5(z):
    """Quintic smoothstep on [0, 1], clamped outside."""
    z = np.clip(z, 0.0, 1.0)
    return z**3 * (10.0 - 15.0 * z + 6.0 * z**2)


@dataclass(frozen=True)
class Cutoff(Shape):
    """1 on [0, R], 0 beyond 2R, quintic smoothstep ramp in between."""

    R: float = 1.0

    @property
    def breaks(self):
        return ((self.R, 3.0), (2 * self.R, 3.0))

    @property
    def flat_tails(self):
        return (True, True)

    def __call__(self, t):
        return 1.0 - smoothstep5((np.asarray(t, dtype=float) - self.R) / self.R)

    def params(self):
        return {"R": self.R}


@dataclass(frozen=True)
class Linear(Shape):
    """Identity shape t -> t (slope and offset live in the Profile)."""

    @property
    def growth(self):
        return (1.0, 1.0)

    def __call__(self, t):
        return np.asarray(t, dtype=float) * 1.0

    def diff(self, t0, dt):
        return np.asarray(dt, dtype=float) * 1.0


@dataclass(frozen=True)
class Constant(Shape):
    """Identically one (use Profile.scale for the value)."""

    @property
    def flat_tails(self):
        return (True, True)

    def __call__(self, t):
        return np.ones_like(np.asarray(t, dtype=float))

    def diff(self, t0, dt):
        return np.zeros_like(np.asarray(dt, dtype=float))


@dataclass(frozen=True)
class CappedParabola(Shape):
    """-t^2 on [0, c], continued linearly (C^1) beyond: concave, nonincreasing."""

    c: float = 1.0

    @property
    def breaks(self):
        return ((self.c, 2.0),)

    @property
    def growth(self):
        return (1.0, 1.0)

    def __call__(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        c = self.c
        return np.where(t <= c, -(t**2), -(c**2) - 2 * c * (t - c))

    def params(self):
        return {"c": self.c}


@dataclass(frozen=True)
class Gaussian(Shape):
    """exp(-t^2)."""

    @property
    def flat_tails(self):
        return (False, False)

    def __call__(self, t):
        return np.exp(-np.asarray(t, dtype=float) ** 2)

    def diff(self, t0, dt):
        dt = np.asarray(dt, dtype=float)
        return np.exp(-(t0**2)) * np.expm1(-dt * (2 * t0 + dt))


@dataclass(frozen=True)
class Hat(Shape):
    """max(0, 1 - |t - c| / w)."""

    c: float = 0.0
    w: float = 1.0

    @property
    def breaks(self):
        return ((self.c - self.w, 1.0), (self.c, 1.0), (self.c + self.w, 1.0))

    @property
    def flat_tails(self):
        return (True, True)

    def __call__(self, t):
        return np.maximum(0.0, 1.0 - np.abs(np.asarray(t, dtype=float) - self.c) / self.w)

    def params(self):
        return {"c": self.c, "w": self.w}


@dataclass(frozen=True)
class PowerDecay(Shape):
    """max(t, 1)^(-alpha): bounded, decaying like t^(-alpha)."""

    alpha: float = 1.0

    @property
    def breaks(self):
        return ((1.0, 1.0),)

    def __call__(self, t):
        return np.maximum(np.abs(np.asarray(t, dtype=float)), 1.0) ** (-self.alpha)

    def params(self):
        return {"alpha": self.alpha}


# ---------------------------------------------------------------------------
# Profiles on R^n


@dataclass(frozen=True)
class Profile:
    """``offset + scale * shape(t(x))`` with t directional or radial."""

    tag: str
    shape: Shape
    mode: str = "line"  # "line" or "radial"
    direction: tuple = (1.0,)
    center: tuple = (0.0,)
    scale: float = 1.0
    offset: float = 0.0
    params: dict = field(default_factory=dict)

    def coordinate(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.mode == "line":
            nu = np.asarray(self.direction, dtype=float)
            return X @ nu[: X.shape[1]] if len(nu) >= X.shape[1] else X[:, 0] * nu[0]
        c = np.zeros(X.shape[1])
        c[: len(self.center)] = self.center[: X.shape[1]]
        return np.linalg.norm(X - c, axis=1)

    def __call__(self, X):
        return self.offset + self.scale * self.shape(self.coordinate(X))

    def with_affine(self, scale: float = 1.0, offset: float = 0.0) -> "Profile":
        """Return ``offset + scale * self``."""
        return Profile(
            self.tag,
            self.shape,
            self.mode,
            self.direction,
            self.center,
            self.scale * scale,
            self.offset * scale + offset,
            dict(self.params),
        )

    @property
    def bounded(self) -> bool:
        return self.shape.growth == (0.0, 0.0) or self.scale == 0.0

    def growth_exponent(self) -> float:
        return 0.0 if self.scale == 0.0 else max(self.shape.growth)

    def to_dict(self) -> dict:
        return {
            "tag": self.tag,
            "params": {k: _plain(v) for k, v in self.params.items()},
            "scale": self.scale,
            "offset": self.offset,
        }

    # -- one-dimensional restriction ----------------------------------------

    def line1d(self) -> "Line1D":
        """View of the profile as a function on the real line (n = 1)."""
        return Line1D(self)


def _plain(v):
    if isinstance(v, (tuple, list, np.ndarray)):
        return [float(x) for x in v]
    return v


@dataclass(frozen=True)
class Line1D:
    """A Profile restricted to n = 1, with accurate differences."""

    profile: Profile

    def _t(self, x):
        pr = self.profile
        x = np.asarray(x, dtype=float)
        if pr.mode == "line":
            return pr.direction[0] * x
        return np.abs(x - pr.center[0])

    def __call__(self, x):
        pr = self.profile
        return pr.offset + pr.scale * pr.shape(self._t(x))

    def diff(self, x: float, dy):
        """u(x + dy) - u(x)."""
        pr = self.profile
        dy = np.asarray(dy, dtype=float)
        if pr.scale == 0.0:
            return np.zeros_like(dy)
        if pr.mode == "line":
            nu = pr.direction[0]
            return pr.scale * pr.shape.diff(nu * x, nu * dy)
        c = pr.center[0]
        t0 = abs(x - c)
        t1 = np.abs(x + dy - c)
        if t0 == 0.0:
            return pr.scale * pr.shape.diff(0.0, t1)
        same = np.sign(x + dy - c) == np.sign(x - c)
        dt = np.where(same, np.sign(x - c) * dy, t1 - t0)
        return pr.scale * pr.shape.diff(t0, dt)

    def breakpoints(self):
        """List of (x, exponent) kinks on the real line."""
        pr = self.profile
        out = []
        if pr.mode == "line":
            nu = pr.direction[0]
            out = [(b / nu, e) for b, e in pr.shape.breaks]
        else:
            c = pr.center[0]
            for b, e in pr.shape.breaks:
                if b > 0:
                    out += [(c - b, e), (c + b, e)]
                elif b == 0:
                    out.append((c, e))
            if not pr.shape.smooth_at_zero and not any(b == 0 for b, _ in pr.shape.breaks):
                out.append((c, 1.0))
        return sorted(set(out))

    def growth(self):
        """Power growth exponents at (-inf, +inf)."""
        pr = self.profile
        if pr.scale == 0.0:
            return (0.0, 0.0)
        gneg, gpos = pr.shape.growth
        if pr.mode == "line":
            return (gneg, gpos) if pr.direction[0] > 0 else (gpos, gneg)
        return (gpos, gpos)


# ---------------------------------------------------------------------------
# Registry of named families

FAMILIES = (
    "power-positive-part",
    "half-space",
    "truncated-minorant",
    "cone",
    "ring",
    "one-dim-shell",
    "indicator-ball",
    "indicator-unit-ball",
    "smooth-cutoff",
    "linear",
    "constant",
    "concave-quadratic",
    "gaussian",
    "hat",
    "power-decay",
)


def _unit(v, n):
    v = np.zeros(n) if v is None else np.asarray(v, dtype=float)
    if v.size == 0 or not np.any(v):
        v = np.zeros(n)
        v[0] = 1.0
    out = np.zeros(max(n, v.size))
    out[: v.size] = v
    return tuple(out / np.linalg.norm(out))


def make_profile(tag: str, n: int = 1, **kw) -> Profile:
    """Build a named profile family.

    Recognised keywords depend on the family: ``beta``, ``s``, ``L``,
    ``r0``, ``R``, ``normal``, ``center``, ``slope``, ``value``, ``c``,
    ``w``.  Unknown families and invalid parameters raise ``ValueError``.
    """
    beta = kw.get("beta")
    center = tuple(np.zeros(n)) if kw.get("center") is None else tuple(
        np.broadcast_to(np.asarray(kw["center"], dtype=float), (n,))
    )

    def need_beta():
        if beta is None or not beta > 0:
            raise ValueError(f"{tag}: beta must be > 0")
        return float(beta)

    if tag in ("power-positive-part", "half-space"):
        b = need_beta()
        nu = _unit(kw.get("normal"), n)
        return Profile(tag, PowerPositive(b), "line", nu, params={"beta": b, "normal": nu})
    if tag == "truncated-minorant":
        s = kw.get("s")
        L = float(kw.get("L", 1.0))
        if s is None or not 0 < s < 1 or not L > 0:
            raise ValueError("truncated-minorant needs 0 < s < 1 and L > 0")
        nu = _unit(kw.get("normal"), n)
        return Profile(tag, Minorant(float(s), L), "line", nu, params={"s": s, "L": L})
    if tag == "cone":
        b = need_beta()
        return Profile(tag, Cone(b), "radial", center=center, params={"beta": b})
    if tag in ("ring", "one-dim-shell"):
        b = need_beta()
        r0 = float(kw.get("r0", 1.0))
        if not r0 > 0:
            raise ValueError(f"{tag}: r0 must be > 0")
        return Profile(tag, PowerPositive(b, r0), "radial", center=center,
                       params={"beta": b, "r0": r0})
    if tag in ("indicator-ball", "indicator-unit-ball"):
        R = float(kw.get("R", 1.0))
        if not R > 0:
            raise ValueError("indicator radius must be > 0")
        return Profile(tag, Step(R), "radial", center=center, params={"R": R})
    if tag == "smooth-cutoff":
        R = float(kw.get("R", 1.0))
        if not R > 0:
            raise ValueError("cutoff radius must be > 0")
        return Profile(tag, Cutoff(R), "radial", center=center, params={"R": R})
    if tag == "linear":
        a = np.zeros(n) if kw.get("slope") is None else np.asarray(kw["slope"], dtype=float)
        a = np.broadcast_to(a, (n,)) if a.ndim == 0 else a
        norm = float(np.linalg.norm(a))
        offset = float(kw.get("value", 0.0))
        if norm == 0.0:
            return Profile(tag, Constant(), "line", _unit(None, n), scale=0.0, offset=offset,
                           params={"slope": tuple(float(v) for v in a), "value": offset})
        return Profile(tag, Linear(), "line", tuple(a / norm), scale=norm, offset=offset,
                       params={"slope": tuple(float(v) for v in a), "value": offset})
    if tag == "constant":
        v = float(kw.get("value", 0.0))
        return Profile(tag, Constant(), "line", _unit(None, n), scale=0.0, offset=v,
                       params={"value": v})
    if tag == "concave-quadratic":
        c = float(kw.get("c", 1.0))
        return Profile(tag, CappedParabola(c), "radial", center=center, params={"c": c})
    if tag == "gaussian":
        return Profile(tag, Gaussian(), "radial", center=center, params={})
    if tag == "hat":
        w = float(kw.get("w", 1.0))
        c = float(kw.get("c", 0.0))
        if not w > 0:
            raise ValueError("hat width must be > 0")
        return Profile(tag, Hat(c, w), "line", _unit(None, n), params={"c": c, "w": w})
    if tag == "power-decay":
        alpha = float(kw.get("alpha", 1.0))
        if not alpha > 0:
            raise ValueError("power-decay needs alpha > 0")
        return Profile(tag, PowerDecay(alpha), "radial", center=center, params={"alpha": alpha})
    raise ValueError(f"unknown profile family {tag!r}")
