"""Quadrature presets, Gauss rules and the persisted constant table."""

from __future__ import annotations

import json
import threading
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.special import roots_legendre


@dataclass(frozen=True)
class QuadratureSpec:
    """Knobs for every singular or semi-infinite integral in the package.

    ``pv_cut`` is the radius of the Taylor-modelled core around the
    singularity as a fraction of the grid spacing; ``far_radius_factor``
    times the box diagonal is where ray quadrature switches to the
    power substitution that reaches infinity.
    """

    name: str = "standard"
    pv_cut: float = 0.25
    near_depth: int = 3
    far_radius_factor: float = 2.0
    profile_nodes: int = 16
    pv_levels: int = 20
    far_gauss: int = 3
    face_gauss: int = 2
    ray_nodes: int = 12
    endpoint_exponents: tuple = ()

    def __post_init__(self):
        if not 0 < self.pv_cut < 1:
            raise ValueError("pv_cut is a fraction of h and must lie in (0, 1)")
        if self.far_radius_factor <= 1:
            raise ValueError("far radius must exceed the box diagonal")
        if min(self.profile_nodes, self.ray_nodes) < 8:
            raise ValueError("node counts must be >= 8")
        if self.near_depth < 1 or self.far_gauss < 1 or self.face_gauss < 1:
            raise ValueError("depth and per-cell rules must be >= 1")

    def far_radius(self, grid) -> float:
        return self.far_radius_factor * grid.diagonal

    def coarser(self) -> "QuadratureSpec":
        """A cheaper companion rule used for error estimates."""
        return QuadratureSpec(
            name=self.name + "-companion",
            pv_cut=min(0.9, self.pv_cut * 2),
            near_depth=max(1, self.near_depth - 1),
            far_radius_factor=self.far_radius_factor,
            profile_nodes=max(8, self.profile_nodes // 2 + 2),
            pv_levels=max(8, self.pv_levels - 6),
            far_gauss=max(1, self.far_gauss - 1),
            face_gauss=self.face_gauss,
            ray_nodes=max(8, self.ray_nodes // 2 + 2),
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["endpoint_exponents"] = list(self.endpoint_exponents)
        return d


PRESETS = {
    "coarse": QuadratureSpec("coarse", 0.25, 2, 2.0, 10, 14, 2, 1, 8),
    "standard": QuadratureSpec("standard", 0.25, 3, 2.0, 16, 20, 3, 2, 12),
    "fine": QuadratureSpec("fine", 0.125, 4, 3.0, 24, 28, 4, 3, 16),
}


def preset(name: str) -> QuadratureSpec:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown quadrature preset {name!r}; choose from {sorted(PRESETS)}")


@lru_cache(maxsize=None)
def gauss01(k: int):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = roots_legendre(k)
    return (x + 1.0) / 2.0, w / 2.0


def composite(a: float, b: float, panels: int, k: int):
    """Composite Gauss rule on [a, b]."""
    u, w = gauss01(k)
    edges = np.linspace(a, b, panels + 1)
    ln = np.diff(edges)
    x = (edges[:-1, None] + ln[:, None] * u[None, :]).ravel()
    ww = (ln[:, None] * w[None, :]).ravel()
    return x, ww


# ---------------------------------------------------------------------------
# Constant table


def canonical_key(name: str, **params) -> str:
    body = ",".join(f"{k}={float(v)!r}" for k, v in sorted(params.items()))
    return f"{name}({body})"


@dataclass
class ConstantTable:
    """Named constants with method tag, error estimate and producing rule."""

    entries: dict = field(default_factory=dict)

    def __post_init__(self):
        self._lock = threading.Lock()

    def record(self, name: str, params: dict, value: float, error: float,
               method: str, quad: QuadratureSpec | None = None) -> str:
        key = canonical_key(name, **params)
        entry = {
            "name": name,
            "params": {k: float(v) for k, v in params.items()},
            "value": float(value),
            "error": float(error),
            "method": method,
            "quad": quad.name if quad is not None else "closed-form",
        }
        with self._lock:
            self.entries[key] = entry
        return key

    def get(self, name: str, **params):
        return self.entries.get(canonical_key(name, **params))

    def to_dict(self) -> dict:
        return {"entries": dict(sorted(self.entries.items()))}

    def save(self, path) -> Path:
        from .core import dump_json

        path = Path(path)
        dump_json(self.to_dict(), path)
        return path

    @classmethod
    def load(cls, path) -> "ConstantTable":
        data = json.loads(Path(path).read_text())
        return cls(dict(data.get("entries", {})))


TABLE = ConstantTable()
