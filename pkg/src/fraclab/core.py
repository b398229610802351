"""Parameter records, grids, grid functions with exterior tails, certificates."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage
from scipy.interpolate import RegularGridInterpolator

from .profiles import FAMILIES, Profile, make_profile

FLOAT_FMT = "%.17g"


def fmt(x: float) -> str:
    """Render a float with 17 significant digits (round-trip safe)."""
    return FLOAT_FMT % float(x)


# ---------------------------------------------------------------------------
# Parameters


@dataclass(frozen=True)
class FracParams:
    """Order s, integrability p and dimension n of the operator."""

    s: float
    p: float
    n: int = 1

    def __post_init__(self):
        if not (0.0 < self.s < 1.0):
            raise ValueError(f"s must lie in (0, 1), got {self.s}")
        if not (self.p > 1.0 and math.isfinite(self.p)):
            raise ValueError(f"p must lie in (1, inf), got {self.p}")
        if self.n not in (1, 2, 3):
            raise ValueError(f"n must be 1, 2 or 3, got {self.n}")

    @property
    def sp(self) -> float:
        return self.s * self.p

    @property
    def regime(self) -> str:
        """'subcritical' (sp < n), 'critical' or 'supercritical' (sp > n)."""
        if self.sp < self.n:
            return "subcritical"
        return "critical" if self.sp == self.n else "supercritical"

    @property
    def sp_branch(self) -> str:
        """Quadrature branch relative to sp = 1: 'lt', 'eq' or 'gt'."""
        if self.sp < 1.0:
            return "lt"
        return "eq" if self.sp == 1.0 else "gt"

    def with_dim(self, n: int) -> "FracParams":
        return FracParams(self.s, self.p, n)


def phi_p(t, p: float):
    """Phi_p(t) = |t|^(p-2) t, computed as sign(t) |t|^(p-1) (exactly odd)."""
    if not p > 1:
        raise ValueError(f"phi_p needs p > 1, got {p}")
    t = np.asarray(t, dtype=float)
    out = np.sign(t) * np.abs(t) ** (p - 1.0)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Grid


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid with m nodes per axis on [-L, L]^n."""

    L: float
    m: int
    n: int = 1

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError("grid half-width must be positive")
        if self.m < 3:
            raise ValueError("grid needs m >= 3 nodes per axis")
        if self.n not in (1, 2, 3):
            raise ValueError("grid dimension must be 1, 2 or 3")

    @property
    def h(self) -> float:
        return 2.0 * self.L / (self.m - 1)

    @property
    def shape(self) -> tuple:
        return (self.m,) * self.n

    @property
    def size(self) -> int:
        return self.m**self.n

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.L, self.L, self.m)

    @property
    def diagonal(self) -> float:
        return 2.0 * self.L * math.sqrt(self.n)

    def nodes(self) -> np.ndarray:
        """(size, n) array of node coordinates in C order."""
        ax = self.axis
        mesh = np.meshgrid(*([ax] * self.n), indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1)

    def multi_index(self, flat) -> np.ndarray:
        return np.stack(np.unravel_index(np.asarray(flat), self.shape), axis=-1)

    def flat_index(self, multi) -> np.ndarray:
        multi = np.atleast_2d(multi)
        return np.ravel_multi_index(tuple(multi.T), self.shape)

    def nearest(self, x) -> int:
        """Flat index of the node closest to point x."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        k = np.rint((x + self.L) / self.h).astype(int)
        k = np.clip(k, 0, self.m - 1)
        return int(np.ravel_multi_index(tuple(k), self.shape))

    def on_boundary(self) -> np.ndarray:
        idx = self.multi_index(np.arange(self.size))
        return np.any((idx == 0) | (idx == self.m - 1), axis=1)

    def to_dict(self) -> dict:
        return {"L": self.L, "m": self.m, "n": self.n}


# ---------------------------------------------------------------------------
# Exterior tail models


@dataclass(frozen=True)
class ConstantTail:
    """The function equals ``value`` outside the box."""

    value: float

    kind = "constant"

    @property
    def constant(self):
        return self.value

    def growth(self) -> float:
        return 0.0

    def __call__(self, Y):
        Y = np.atleast_2d(Y)
        return np.full(Y.shape[0], self.value)

    def affine(self, scale: float, offset: float = 0.0) -> "ConstantTail":
        return ConstantTail(scale * self.value + offset)

    def to_dict(self, n: int) -> dict:
        return {"kind": "constant", "value": self.value}


@dataclass(frozen=True)
class ProfileTail:
    """The function follows a closed-form profile outside the box."""

    profile: Profile

    kind = "profile"

    @property
    def constant(self):
        return self.profile.offset if self.profile.scale == 0.0 else None

    def growth(self) -> float:
        return self.profile.growth_exponent()

    def __call__(self, Y):
        return self.profile(Y)

    def affine(self, scale: float, offset: float = 0.0) -> "ProfileTail":
        return ProfileTail(self.profile.with_affine(scale, offset))

    def to_dict(self, n: int) -> dict:
        pr = self.profile
        return {
            "kind": "profile",
            "tag": pr.tag,
            "params": _jsonable(pr.params),
            "mode": pr.mode,
            "direction": [float(v) for v in pr.direction],
            "center": [float(v) for v in pr.center],
            "scale": pr.scale,
            "offset": pr.offset,
        }


@dataclass(frozen=True)
class MinTail:
    """Pointwise minimum of two tails of the same family."""

    a: object
    b: object

    kind = "min"

    @property
    def constant(self):
        return None

    def growth(self) -> float:
        return max(self.a.growth(), self.b.growth())

    def __call__(self, Y):
        return np.minimum(self.a(Y), self.b(Y))

    def affine(self, scale: float, offset: float = 0.0):
        if scale < 0:
            raise ValueError("negating a min-tail is not representable")
        return MinTail(self.a.affine(scale, offset), self.b.affine(scale, offset))

    def to_dict(self, n: int) -> dict:
        return {"kind": "min", "a": self.a.to_dict(n), "b": self.b.to_dict(n)}


@dataclass(frozen=True)
class SumTail:
    """Sum of two tails."""

    a: object
    b: object

    kind = "sum"

    @property
    def constant(self):
        ca, cb = self.a.constant, self.b.constant
        return None if ca is None or cb is None else ca + cb

    def growth(self) -> float:
        return max(self.a.growth(), self.b.growth())

    def __call__(self, Y):
        return self.a(Y) + self.b(Y)

    def affine(self, scale: float, offset: float = 0.0):
        return SumTail(self.a.affine(scale, offset), self.b.affine(scale, 0.0))

    def to_dict(self, n: int) -> dict:
        return {"kind": "sum", "a": self.a.to_dict(n), "b": self.b.to_dict(n)}


def _jsonable(d):
    out = {}
    for k, v in d.items():
        if isinstance(v, (tuple, list, np.ndarray)):
            out[k] = [float(x) for x in v]
        else:
            out[k] = v
    return out


def tail_from_dict(d: dict, n: int):
    kind = d["kind"]
    if kind == "constant":
        return ConstantTail(float(d["value"]))
    if kind == "profile":
        base = make_profile(d["tag"], n, **d["params"])
        prof = dataclasses.replace(
            base,
            mode=d["mode"],
            direction=tuple(d["direction"]),
            center=tuple(d["center"]),
            scale=float(d["scale"]),
            offset=float(d["offset"]),
        )
        return ProfileTail(prof)
    if kind == "min":
        return MinTail(tail_from_dict(d["a"], n), tail_from_dict(d["b"], n))
    if kind == "sum":
        return SumTail(tail_from_dict(d["a"], n), tail_from_dict(d["b"], n))
    raise ValueError(f"unknown tail kind {kind!r}")


def _tail_family(t):
    if isinstance(t, ConstantTail):
        return "constant"
    if isinstance(t, ProfileTail):
        return "constant" if t.constant is not None else t.profile.tag
    if isinstance(t, MinTail):
        fa = _tail_family(t.a)
        return fa if fa == _tail_family(t.b) else None
    return None


# ---------------------------------------------------------------------------
# Grid functions


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Node values on a Grid plus the function's behaviour beyond the box."""

    grid: Grid
    values: np.ndarray
    tail: object

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} values, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.tail is None:
            raise ValueError("a tail model is required")

    @property
    def n(self) -> int:
        return self.grid.n

    def reshaped(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def replace(self, values=None, tail=None) -> "GridFunction":
        return GridFunction(
            self.grid,
            self.values if values is None else values,
            self.tail if tail is None else tail,
        )

    def __call__(self, X) -> np.ndarray:
        """Multilinear interpolation inside the box, tail model outside."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n and self.n == 1:
            X = X.reshape(-1, 1)
        inside = np.all(np.abs(X) <= self.grid.L * (1 + 1e-14), axis=1)
        out = np.empty(X.shape[0])
        if np.any(inside):
            interp = RegularGridInterpolator(
                (self.grid.axis,) * self.n, self.reshaped(), method="linear"
            )
            out[inside] = interp(np.clip(X[inside], -self.grid.L, self.grid.L))
        if np.any(~inside):
            out[~inside] = self.tail(X[~inside])
        return out

    def affine(self, scale: float, offset: float = 0.0) -> "GridFunction":
        return GridFunction(self.grid, scale * self.values + offset,
                            self.tail.affine(scale, offset))

    def __neg__(self):
        return self.affine(-1.0)

    # -- serialization ------------------------------------------------------

    def to_csv(self, path) -> Path:
        """Write ``path`` (CSV) and ``path`` with .json suffix (metadata)."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        X = self.grid.nodes()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index"] + [f"coord_{k + 1}" for k in range(self.n)] + ["value"])
            for i in range(self.grid.size):
                w.writerow([i] + [fmt(c) for c in X[i]] + [fmt(self.values[i])])
        meta = {"grid": self.grid.to_dict(), "tail": self.tail.to_dict(self.n)}
        path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def from_csv(cls, path) -> "GridFunction":
        path = Path(path)
        meta = json.loads(path.with_suffix(".json").read_text())
        grid = Grid(**meta["grid"])
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        vals = np.array([float(r[-1]) for r in rows[1:]])
        idx = np.array([int(r[0]) for r in rows[1:]])
        out = np.empty(grid.size)
        out[idx] = vals
        return cls(grid, out, tail_from_dict(meta["tail"], grid.n))


def pointwise_min(u: GridFunction, v: GridFunction) -> GridFunction:
    """Node-wise minimum; tails must be of a comparable family."""
    if u.grid != v.grid:
        raise ValueError("pointwise_min: grid mismatch")
    fu, fv = _tail_family(u.tail), _tail_family(v.tail)
    if fu is None or fu != fv:
        raise ValueError("pointwise_min: tails are not of a comparable family")
    if u.tail == v.tail:
        tail = u.tail
    elif fu == "constant":
        tail = ConstantTail(min(u.tail.constant, v.tail.constant))
    else:
        tail = MinTail(u.tail, v.tail)
    return GridFunction(u.grid, np.minimum(u.values, v.values), tail)


def sample_profile(tag: str, params: dict | None, grid: Grid) -> GridFunction:
    """Exact node values of a named profile, with the profile itself as tail."""
    if tag not in FAMILIES:
        raise ValueError(f"unknown profile family {tag!r}")
    prof = make_profile(tag, grid.n, **(params or {}))
    return from_profile(prof, grid)


def from_profile(prof: Profile, grid: Grid) -> GridFunction:
    tail = ProfileTail(prof) if prof.scale != 0.0 else ConstantTail(prof.offset)
    return GridFunction(grid, prof(grid.nodes()), tail)


def constant(value: float, grid: Grid) -> GridFunction:
    return GridFunction(grid, np.full(grid.size, float(value)), ConstantTail(float(value)))


# ---------------------------------------------------------------------------
# Domains


@dataclass(frozen=True, eq=False)
class DomainMask:
    """Interior node set of a domain inside the grid box, plus exhaustion levels."""

    grid: Grid
    interior: np.ndarray
    levels: tuple = ()
    descriptor: str = "custom"

    def __post_init__(self):
        mask = np.asarray(self.interior, dtype=bool).reshape(-1)
        if mask.size != self.grid.size:
            raise ValueError("mask size does not match the grid")
        if np.any(mask & self.grid.on_boundary()):
            raise ValueError("interior nodes must lie strictly inside the box")
        mask.setflags(write=False)
        object.__setattr__(self, "interior", mask)
        levels = tuple(np.asarray(l, dtype=bool).reshape(-1) for l in self.levels)
        prev = np.zeros_like(mask)
        for l in levels:
            if np.any(l & ~mask) or np.any(prev & ~l):
                raise ValueError("erosion levels must be nested subsets of the interior")
            prev = l
        object.__setattr__(self, "levels", levels)

    @property
    def count(self) -> int:
        return int(self.interior.sum())

    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.interior)

    def sub(self, mask, descriptor: str | None = None) -> "DomainMask":
        return DomainMask(self.grid, mask, (), descriptor or self.descriptor)

    def with_exhaustion(self, layers: Sequence[int] = (3, 2, 1)) -> "DomainMask":
        """Attach erosion levels (k layers removed for each k) ending at the interior."""
        shaped = self.interior.reshape(self.grid.shape)
        st = ndimage.generate_binary_structure(self.grid.n, self.grid.n)
        levels = []
        for k in layers:
            er = ndimage.binary_erosion(shaped, st, iterations=k, border_value=0)
            if er.any():
                levels.append(er.reshape(-1))
        levels.append(self.interior.copy())
        return DomainMask(self.grid, self.interior, tuple(levels), self.descriptor)


def make_domain(descriptor: str, grid: Grid, exhaustion: bool = True, **kw) -> DomainMask:
    """Domain masks for 'ball', 'box', 'ring' and 'punctured-interval'.

    Interior means strictly inside the open set (nodes on the boundary are
    exterior).  Keywords: ``radius``, ``center``, ``half``, ``r_in``,
    ``r_out``.
    """
    X = grid.nodes()
    c = np.zeros(grid.n)
    if kw.get("center") is not None:
        c[:] = np.broadcast_to(np.asarray(kw["center"], dtype=float), (grid.n,))
    r = np.linalg.norm(X - c, axis=1)
    tol = 1e-12 * grid.L
    if descriptor == "ball":
        R = float(kw.get("radius", 1.0))
        mask = r < R - tol
    elif descriptor == "box":
        a = float(kw.get("half", 1.0))
        mask = np.all(np.abs(X - c) < a - tol, axis=1)
    elif descriptor == "ring":
        r_in, r_out = float(kw.get("r_in", 0.5)), float(kw.get("r_out", 1.0))
        if not 0 <= r_in < r_out:
            raise ValueError("ring needs 0 <= r_in < r_out")
        mask = (r > r_in + tol) & (r < r_out - tol)
    elif descriptor == "punctured-interval":
        if grid.n != 1:
            raise ValueError("punctured-interval is one-dimensional")
        a = float(kw.get("radius", 1.0))
        mask = (r < a - tol) & (r > tol)
    else:
        raise ValueError(f"unknown domain descriptor {descriptor!r}")
    dm = DomainMask(grid, mask, (), descriptor)
    return dm.with_exhaustion() if exhaustion else dm


# ---------------------------------------------------------------------------
# Certificates


@dataclass
class CertificateReport:
    """Sampled verdict: pass iff every sample meets the bound with the margin.

    For ``sense='le'`` a sample passes when ``bound - value - 2 * error >= margin``,
    so the quadrature error estimate always counts against the sample;
    ``sense='ge'`` is the mirror image.  Named boolean ``clauses`` must all hold as well.
    """

    subject: str
    samples: list = field(default_factory=list)  # (point, value, error)
    bound: float = 0.0
    margin: float = 0.0
    sense: str = "le"
    tolerances: dict = field(default_factory=dict)
    clauses: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)
    bound_lo: float | None = None  # two-sided check: bound_lo <= value <= bound

    def add(self, point, value: float, error: float = 0.0):
        self.samples.append((point, float(value), float(error)))

    def slack(self, value: float) -> float:
        if self.bound_lo is not None:
            return min(self.bound - value, value - self.bound_lo)
        return self.bound - value if self.sense == "le" else value - self.bound

    def sample_ok(self, value: float, error: float) -> bool:
        return bool(self.slack(value) - 2.0 * error >= self.margin)

    @property
    def failing(self) -> list:
        bad = [f"sample@{_pt(p)}" for p, v, e in self.samples if not self.sample_ok(v, e)]
        return bad + [k for k, ok in self.clauses.items() if not ok]

    @property
    def verdict(self) -> str:
        return "pass" if not self.failing else "fail"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    @property
    def worst_slack(self) -> float:
        if not self.samples:
            return float("nan")
        return float(min(self.slack(v) for _, v, _ in self.samples))

    def to_dict(self) -> dict:
        return {
            "subject": self.subject,
            "bound": self.bound,
            "bound_lo": self.bound_lo,
            "margin": self.margin,
            "sense": self.sense,
            "verdict": self.verdict,
            "failing": self.failing[:20],
            "samples": [
                {"point": _pt(p), "value": v, "error": e} for p, v, e in self.samples
            ],
            "tolerances": {k: float(v) for k, v in self.tolerances.items()},
            "clauses": {k: bool(v) for k, v in self.clauses.items()},
            "info": _json_clean(self.info),
        }


def _pt(p):
    a = np.atleast_1d(np.asarray(p, dtype=float))
    return [float(v) for v in a]


def _json_clean(obj):
    if isinstance(obj, dict):
        return {str(k): _json_clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_json_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _round17(o):
    if isinstance(o, float):
        return float(fmt(o)) if math.isfinite(o) else None
    if isinstance(o, dict):
        return {k: _round17(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_round17(v) for v in o]
    return o


def dump_json(obj, path=None) -> str:
    """Serialize to JSON (sorted keys, non-finite floats as null)."""
    text = json.dumps(_round17(_json_clean(obj)), indent=2, sort_keys=True, allow_nan=False)
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text + "\n")
    return text
