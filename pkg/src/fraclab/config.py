"""Flat ``key = value`` run configuration.

Grammar: one assignment per line, ``#`` starts a comment, blank lines
are ignored, keys are ``[a-z_][a-z0-9_.]*``.  Values are numbers, words
or comma-separated lists.  Keys prefixed ``g.`` and ``f.`` are parameters
of the boundary-data and source profiles.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields
from pathlib import Path

from .core import FracParams, Grid, GridFunction, constant, fmt, make_domain, sample_profile
from .profiles import FAMILIES
from .quadrature import PRESETS


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\-]*$")
DOMAINS = ("ball", "box", "ring", "punctured-interval")
EXPERIMENTS = ("puncture", "rhs-independence", "exterior", "barrier")


def _num(key, v, kind=float):
    try:
        out = kind(v)
    except ValueError:
        raise ConfigError(key, f"expected a number, got {v!r}") from None
    if kind is int and str(out) != v.strip():
        raise ConfigError(key, f"expected an integer, got {v!r}")
    return out


def _numlist(key, v, kind=float):
    return tuple(_num(key, t.strip(), kind) for t in v.split(",") if t.strip())


@dataclass
class RunConfig:
    s: float = 0.5
    p: float = 2.0
    n: int = 1
    L: float = 2.0
    m: int = 65
    domain: str = "ball"
    radius: float = 1.0
    half: float = 1.0
    r_in: float = 0.5
    r_out: float = 1.0
    f: str = "0"
    g: str = "0"
    quad: str = "standard"
    tol: float | None = None
    max_iter: int = 20000
    out: str | None = None
    experiment: str = "puncture"
    ladder: tuple = (129, 257, 513)
    fs: tuple = (-1.0, 0.0, 1.0)
    xi0: float = 1.0
    x0: float = 1.5
    g_params: dict = field(default_factory=dict)
    f_params: dict = field(default_factory=dict)

    _INT = ("n", "m", "max_iter")
    _FLOAT = ("s", "p", "L", "radius", "half", "r_in", "r_out", "tol", "xi0", "x0")

    def __post_init__(self):
        self.validate()

    # -- parsing ------------------------------------------------------------

    @classmethod
    def parse(cls, text: str) -> "RunConfig":
        kw, gp, fp = {}, {}, {}
        names = {f.name for f in fields(cls)} - {"g_params", "f_params"}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw!r}")
            key, val = (t.strip() for t in line.split("=", 1))
            if not _KEY.match(key):
                raise ConfigError(key, "malformed key")
            if key.startswith("g.") or key.startswith("f."):
                target = gp if key[0] == "g" else fp
                name = key[2:]
                target[name] = _numlist(key, val) if "," in val else _num(key, val)
                continue
            if key not in names:
                raise ConfigError(key, "unknown key")
            if key in kw:
                raise ConfigError(key, "duplicate key")
            if key in cls._INT:
                kw[key] = _num(key, val, int)
            elif key in cls._FLOAT:
                kw[key] = _num(key, val)
            elif key == "ladder":
                kw[key] = _numlist(key, val, int)
            elif key == "fs":
                kw[key] = _numlist(key, val)
            else:
                kw[key] = val
        return cls(**kw, g_params=gp, f_params=fp)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError("config", str(exc)) from None
        return cls.parse(text)

    def to_text(self) -> str:
        """Canonical form: sorted keys, 17 significant digits."""

        def show(v):
            if isinstance(v, float):
                return fmt(v)
            if isinstance(v, (tuple, list)):
                return ",".join(show(x) for x in v)
            return str(v)

        lines = []
        for f in sorted(fields(self), key=lambda f: f.name):
            v = getattr(self, f.name)
            if f.name in ("g_params", "f_params") or v is None:
                continue
            lines.append(f"{f.name} = {show(v)}")
        for prefix, d in (("f", self.f_params), ("g", self.g_params)):
            for k in sorted(d):
                lines.append(f"{prefix}.{k} = {show(d[k])}")
        return "\n".join(sorted(lines)) + "\n"

    # -- validation ---------------------------------------------------------

    def validate(self):
        try:
            FracParams(self.s, self.p, self.n)
        except ValueError as exc:
            key = "s" if "s" in str(exc).split()[0:3] else "p" if "p " in str(exc) else "n"
            raise ConfigError(key, str(exc)) from None
        if self.m < 3:
            raise ConfigError("m", "need at least 3 nodes per axis")
        if not self.L > 0:
            raise ConfigError("L", "half-width must be positive")
        if self.domain not in DOMAINS:
            raise ConfigError("domain", f"choose from {DOMAINS}")
        if self.quad not in PRESETS:
            raise ConfigError("quad", f"choose from {sorted(PRESETS)}")
        if self.experiment not in EXPERIMENTS:
            raise ConfigError("experiment", f"choose from {EXPERIMENTS}")
        if self.tol is not None and not self.tol > 0:
            raise ConfigError("tol", "must be positive")
        for key in ("f", "g"):
            self._descriptor_check(key, getattr(self, key))

    @staticmethod
    def _descriptor_check(key, desc):
        try:
            float(desc)
            return
        except ValueError:
            pass
        if desc not in FAMILIES:
            raise ConfigError(key, f"expected a number or a profile family, got {desc!r}")

    # -- builders -----------------------------------------------------------

    @property
    def params(self) -> FracParams:
        return FracParams(self.s, self.p, self.n)

    def grid(self, m: int | None = None) -> Grid:
        return Grid(self.L, self.m if m is None else m, self.n)

    def quad_spec(self):
        return PRESETS[self.quad]

    def _function(self, key, grid) -> GridFunction:
        desc = getattr(self, key)
        try:
            return constant(float(desc), grid)
        except ValueError:
            pass
        prm = self.g_params if key == "g" else self.f_params
        try:
            return sample_profile(desc, dict(prm), grid)
        except (TypeError, ValueError) as exc:
            raise ConfigError(key, str(exc)) from None

    def g_function(self, grid=None) -> GridFunction:
        return self._function("g", grid or self.grid())

    def f_function(self, grid=None) -> GridFunction:
        return self._function("f", grid or self.grid())

    def domain_mask(self, grid=None, exhaustion=True):
        grid = grid or self.grid()
        try:
            return make_domain(self.domain, grid, exhaustion, radius=self.radius, half=self.half,
                               r_in=self.r_in, r_out=self.r_out)
        except ValueError as exc:
            raise ConfigError("domain", str(exc)) from None


__all__ = ["RunConfig", "ConfigError", "DOMAINS", "EXPERIMENTS"]
