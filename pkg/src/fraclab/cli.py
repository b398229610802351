"""Command-line entry point.

Exit codes: 0 success, 1 a certificate failed, 2 invalid configuration,
3 a solver did not converge.
"""

from __future__ import annotations

import argparse
import contextlib
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import barriers as B
from .config import ConfigError, RunConfig
from .core import CertificateReport, FracParams, constant, dump_json, fmt, make_domain
from .operator import dead_variable_constant, eval_pv_error, eval_profile_1d, radial_reduce_3d
from .perron import MonotonicityError, resolutivity_gap
from .probes import (
    barrier_certificate_at,
    exterior_shell_barrier,
    exterior_value_check,
    puncture_experiment,
    rhs_independence_experiment,
)
from .profiles import FAMILIES, make_profile
from .quadrature import PRESETS, TABLE
from .solver import NonConvergence, solve_dirichlet

EXIT_OK, EXIT_CERT, EXIT_CONFIG, EXIT_NONCONV = 0, 1, 2, 3
DEFAULT_OUT = "fraclab-out"

FAMILY_ALIASES = {
    "power": "power-positive-part",
    "minorant": "truncated-minorant",
    "shell": "one-dim-shell",
    "indicator": "indicator-ball",
    "cutoff": "smooth-cutoff",
}
FAMILY_DIM = {"ring": 3, "half-space": 2}


class Run:
    """Output directory plus a deterministic plain-text log."""

    def __init__(self, out: Path, command: str):
        self.out = out
        self.out.mkdir(parents=True, exist_ok=True)
        self.lines = [f"command = {command}"]

    def log(self, msg: str):
        self.lines.append(msg)

    def json(self, name: str, kind: str, payload: dict) -> Path:
        path = self.out / name
        dump_json({"kind": kind, **payload}, path)
        self.log(f"wrote {name}")
        return path

    def close(self, code: int):
        self.log(f"exit = {code}")
        (self.out / "run.log").write_text("\n".join(self.lines) + "\n")
        return code


def _out_dir(args, cfg: RunConfig | None) -> Path:
    if args.out:
        return Path(args.out)
    env = os.environ.get("NONLOCAL_OUT")
    if env:
        return Path(env)
    if cfg is not None and cfg.out:
        return Path(cfg.out)
    return Path(DEFAULT_OUT)


def _load_config(args) -> RunConfig:
    if args.config and not Path(args.config).is_file():
        raise ConfigError("config", f"no such file {args.config}")
    text = Path(args.config).read_text() if args.config else ""
    extra = "\n".join(args.set or [])
    if args.quad:
        extra += f"\nquad = {args.quad}"
    # later assignments override earlier ones: merge by key before parsing
    merged = {}
    for raw in (text + "\n" + extra).splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            if "=" not in line:
                raise ConfigError(line, "expected 'key = value'")
            k, v = (t.strip() for t in line.split("=", 1))
            merged[k] = v
    return RunConfig.parse("\n".join(f"{k} = {v}" for k, v in merged.items()))


def _kv(pairs) -> dict:
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise ConfigError(item, "expected key=value")
        k, v = (t.strip() for t in item.split("=", 1))
        try:
            out[k] = [float(t) for t in v.split(",")] if "," in v else float(v)
        except ValueError:
            raise ConfigError(k, f"expected a number, got {v!r}") from None
    return out


def _params(args) -> FracParams:
    try:
        return FracParams(args.s, args.p, args.n)
    except ValueError as exc:
        key = str(exc).split()[0]
        raise ConfigError(key, str(exc)) from None


def _certificate_csv(path: Path, rep: CertificateReport):
    rows = ["point,value,error,slack,ok"]
    for pt, v, e in rep.samples:
        coords = ";".join(fmt(c) for c in np.atleast_1d(pt))
        rows.append(f"{coords},{fmt(v)},{fmt(e)},{fmt(rep.slack(v))},{int(rep.sample_ok(v, e))}")
    path.write_text("\n".join(rows) + "\n")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_eval(args) -> int:
    cfg = _load_config(args) if (args.config or args.set) else None
    P = cfg.params if cfg is not None and args.s is None else _params(_fill(args))
    quad = PRESETS[args.quad or (cfg.quad if cfg else "standard")]
    if args.profile not in FAMILIES:
        raise ConfigError("profile", f"unknown family {args.profile!r}")
    try:
        prof = make_profile(args.profile, P.n, **_kv(args.param))
    except (TypeError, ValueError) as exc:
        raise ConfigError("param", str(exc)) from None
    run = Run(_out_dir(args, cfg), "eval")
    rows = []
    for x in args.x:
        if P.n == 1:
            v, e = eval_profile_1d(prof, x, P, quad, with_error=True)
            method = "line"
        elif P.n == 3 and prof.mode == "radial":
            v, e = radial_reduce_3d(prof, abs(x), P, quad, with_error=True)
            method = "radial"
        else:
            grid = (cfg or RunConfig(s=P.s, p=P.p, n=P.n)).grid()
            from .core import from_profile

            u = from_profile(prof, grid)
            pt = np.zeros(P.n)
            pt[0] = x
            v, e = eval_pv_error(u, grid.nearest(pt), P, quad)
            method = "grid"
        rows.append({"x": float(x), "value": float(v), "error": float(e), "method": method})
    run.json("eval.json", "eval", {
        "profile": prof.to_dict(),
        "params": {"s": P.s, "p": P.p, "n": P.n},
        "quad": quad.name,
        "rows": rows,
    })
    lines = ["x,value,error,method"] + [
        f"{fmt(r['x'])},{fmt(r['value'])},{fmt(r['error'])},{r['method']}" for r in rows]
    (run.out / "eval.csv").write_text("\n".join(lines) + "\n")
    return run.close(EXIT_OK)


def _fill(args):
    for k, d in (("s", None), ("p", 2.0), ("n", None)):
        if getattr(args, k, None) is None and d is not None:
            setattr(args, k, d)
    if args.s is None:
        raise ConfigError("s", "required")
    if args.n is None:
        args.n = 1
    return args


def cmd_barrier_check(args) -> int:
    fam = FAMILY_ALIASES.get(args.family, args.family)
    if fam not in B.BARRIER_FAMILIES:
        raise ConfigError("family", f"choose from {B.BARRIER_FAMILIES}")
    if args.n is None:
        args.n = FAMILY_DIM.get(fam, 1)
    P = _params(args)
    try:
        spec = B.BarrierSpec(fam, P, args.beta, r0=args.r0, R=args.R, L=args.L)
    except ValueError as exc:
        key = "beta" if "beta" in str(exc) else "family"
        raise ConfigError(key, str(exc)) from None
    quad = PRESETS[args.quad or "standard"]
    run = Run(_out_dir(args, None), "barrier-check")
    rep = B.certify_family(spec, quad)
    run.json("certificate.json", "certificate", {"report": rep.to_dict(), "quad": quad.name})
    _certificate_csv(run.out / "certificate.csv", rep)
    run.log(f"verdict = {rep.verdict}")
    return run.close(EXIT_OK if rep.passed else EXIT_CERT)


def cmd_solve(args) -> int:
    cfg = _load_config(args)
    run = Run(_out_dir(args, cfg), "solve")
    (run.out / "config.txt").write_text(cfg.to_text())
    grid = cfg.grid()
    g, f, dom = cfg.g_function(grid), cfg.f_function(grid), cfg.domain_mask(grid, False)
    try:
        u, rep = solve_dirichlet(f, g, dom, cfg.params, cfg.quad_spec(), tol=cfg.tol,
                                 max_iter=cfg.max_iter)
        code = EXIT_OK
    except NonConvergence as exc:
        u, rep, code = None, exc.report, EXIT_NONCONV
        run.log(f"non-convergence: {exc}")
    payload = {"report": rep.to_dict() if rep is not None else {"status": "failed"},
               "grid": grid.to_dict(), "domain": dom.descriptor, "interior_nodes": dom.count,
               "params": {"s": cfg.s, "p": cfg.p, "n": cfg.n}, "quad": cfg.quad}
    run.json("solve_report.json", "solve", payload)
    if u is not None:
        u.to_csv(run.out / "solution.csv")
        run.log("wrote solution.csv")
    return run.close(code)


def cmd_perron(args) -> int:
    cfg = _load_config(args)
    run = Run(_out_dir(args, cfg), "perron")
    (run.out / "config.txt").write_text(cfg.to_text())
    grid = cfg.grid()
    g, f, dom = cfg.g_function(grid), cfg.f_function(grid), cfg.domain_mask(grid, True)
    try:
        rep = resolutivity_gap(g, f, dom, cfg.params, cfg.quad_spec(), cfg.tol)
    except NonConvergence as exc:
        run.log(f"non-convergence: {exc}")
        return run.close(EXIT_NONCONV)
    except MonotonicityError as exc:
        run.log(f"monotonicity: {exc}")
        run.json("perron_report.json", "perron", {"error": str(exc), "verdict": "fail"})
        return run.close(EXIT_CERT)
    ok = rep.ordered and rep.monotone and rep.gap <= rep.value_tol
    run.json("perron_report.json", "perron", {**rep.to_dict(),
                                              "verdict": "pass" if ok else "fail"})
    rep.upper.to_csv(run.out / "upper.csv")
    rep.lower.to_csv(run.out / "lower.csv")
    return run.close(EXIT_OK if ok else EXIT_CERT)


def cmd_probe(args) -> int:
    cfg = _load_config(args)
    exp = args.experiment or cfg.experiment
    run = Run(_out_dir(args, cfg), f"probe {exp}")
    (run.out / "config.txt").write_text(cfg.to_text())
    quad = cfg.quad_spec()
    P = cfg.params
    if exp in ("puncture", "rhs-independence", "barrier") and P.n != 1:
        raise ConfigError("n", f"the {exp} experiment is one-dimensional")
    if any(m % 2 == 0 for m in cfg.ladder):
        raise ConfigError("ladder", "resolutions must be odd")
    if exp == "puncture":
        reps = puncture_experiment([P], cfg.ladder, L=cfg.L, f=float(cfg.f), quad=quad,
                                   tol=cfg.tol)
        run.json("regularity_report.json", "regularity",
                 {"experiment": exp, "reports": [r.to_dict() for r in reps]})
        _ladder_csv(run.out / "ladder.csv", reps)
        return run.close(EXIT_OK)
    if exp == "rhs-independence":
        out = {}
        ok = True
        for kind in ("regular", "puncture"):
            reps, summary = rhs_independence_experiment(kind, P, cfg.ladder, cfg.fs, quad,
                                                        cfg.tol)
            out[kind] = {"summary": summary, "reports": [r.to_dict() for r in reps]}
            ok = ok and summary["identical"] and summary["ordered"]
        run.json("regularity_report.json", "rhs-independence", {"experiment": exp, **out})
        return run.close(EXIT_OK if ok else EXIT_CERT)
    if exp == "exterior":
        grid = cfg.grid()
        x0 = np.zeros(P.n)
        x0[0] = cfg.x0

        def problem(m):
            gr = cfg.grid(m)
            return cfg.g_function(gr), cfg.domain_mask(gr, False)

        try:
            rep = exterior_value_check(x0, cfg.g_function(grid), cfg.f_function(grid),
                                       cfg.domain_mask(grid, False), P, cfg.ladder, problem,
                                       quad)
        except ValueError as exc:
            raise ConfigError("x0", str(exc)) from None
    else:
        grid = cfg.grid()
        dom = make_domain("ball", grid, exhaustion=False, radius=1.0)
        gamma = exterior_shell_barrier(grid, P, xi0=cfg.xi0, quad=quad)
        rep = barrier_certificate_at(cfg.xi0, gamma, dom, P, quad)
    run.json("certificate.json", "certificate", {"report": rep.to_dict(), "quad": quad.name})
    _certificate_csv(run.out / "certificate.csv", rep)
    return run.close(EXIT_OK if rep.passed else EXIT_CERT)


def _ladder_csv(path, reps):
    rows = ["label,level,h,point,approach,fixed"]
    for r in reps:
        for k, (h, x, a, d) in enumerate(zip(r.spacings, r.points, r.approach, r.fixed)):
            rows.append(f"{r.label},{k},{fmt(h)},{fmt(x)},{fmt(a)},{fmt(d)}")
    Path(path).write_text("\n".join(rows) + "\n")


CONSTANTS = ("C", "N", "delta_ring", "delta_shell", "delta_cutoff", "c_p")


def cmd_constants(args) -> int:
    quad = PRESETS[args.quad or "standard"]
    name = args.name
    need = {"C": ("beta", "s", "p"), "N": ("s", "p"), "delta_ring": ("beta", "s", "p"),
            "delta_shell": ("beta", "s", "p"), "delta_cutoff": ("s", "p"), "c_p": ("p",)}[name]
    for k in need:
        if getattr(args, k) is None:
            raise ConfigError(k, f"required for {name}")
    try:
        if name == "C":
            val, err = B.power_constant(args.beta, args.s, args.p, quad, with_error=True)
            prm = {"beta": args.beta, "s": args.s, "p": args.p}
        elif name == "N":
            P = FracParams(args.s, args.p, args.n or 3)
            val, err = dead_variable_constant(P, with_error=True)
            prm = {"n": P.n, "sp": P.sp}
        elif name == "delta_ring":
            val = B.find_ring_delta(args.beta, args.s, args.p, args.r0, quad)
            prm = {"beta": args.beta, "s": args.s, "p": args.p, "r0": args.r0}
            err = 0.0
        elif name == "delta_shell":
            val, err = B.find_shell_delta(args.beta, args.s, args.p, quad), 0.0
            prm = {"beta": args.beta, "s": args.s, "p": args.p}
        elif name == "delta_cutoff":
            P = FracParams(args.s, args.p, args.n or 1)
            m = B.cutoff_supersolution_margin(args.R, P, quad, details=True)
            val, err = m.delta, m.error
            prm = {"R": args.R, "n": P.n, "s": P.s, "p": P.p}
        else:
            rep = B.lemma_simple_check(args.p)
            val, err = rep.info["c_p"], 0.0
            prm = {"p": args.p}
    except B.CertificationError as exc:
        run = Run(_out_dir(args, None), f"constants {name}")
        run.log(f"certification failed: {exc}")
        return run.close(EXIT_CERT)
    except ValueError as exc:
        key = "beta" if "beta" in str(exc) else str(exc).split()[0]
        raise ConfigError(key, str(exc)) from None
    run = Run(_out_dir(args, None), f"constants {name}")
    entry = TABLE.get(name, **prm) or {}
    payload = {"name": name, "params": {k: float(v) for k, v in prm.items()},
               "value": float(val), "error": float(err),
               "method": entry.get("method", "sampled scan"), "quad": quad.name}
    run.json("constants.json", "constant", payload)
    sys.stdout.write(dump_json({"kind": "constant", **payload}) + "\n")
    return run.close(EXIT_OK if math.isfinite(val) else EXIT_CERT)


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value configuration file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one configuration key (repeatable)")
    common.add_argument("--out", help="output directory (else $NONLOCAL_OUT, else config)")
    common.add_argument("--quad", choices=sorted(PRESETS), help="quadrature preset")
    common.add_argument("--threads", type=int, help="cap BLAS/OpenMP threads")

    frac = argparse.ArgumentParser(add_help=False)
    frac.add_argument("--s", type=float)
    frac.add_argument("--p", type=float, default=None)
    frac.add_argument("--n", type=int)

    ap = argparse.ArgumentParser(prog="fraclab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    e = sub.add_parser("eval", parents=[common, frac], help="evaluate the operator on a profile")
    e.add_argument("--profile", required=True)
    e.add_argument("--param", action="append", metavar="KEY=VALUE")
    e.add_argument("--x", type=float, action="append", required=True)
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("barrier-check", parents=[common, frac], help="sign certificate")
    b.add_argument("--family", required=True)
    b.add_argument("--beta", type=float)
    b.add_argument("--r0", type=float, default=1.0)
    b.add_argument("--R", type=float, default=1.0)
    b.add_argument("--L", type=float, default=1.0)
    b.set_defaults(func=cmd_barrier_check)

    s = sub.add_parser("solve", parents=[common], help="variational Dirichlet solve")
    s.set_defaults(func=cmd_solve)

    pr = sub.add_parser("perron", parents=[common], help="Perron envelopes and their gap")
    pr.set_defaults(func=cmd_perron)

    pb = sub.add_parser("probe", parents=[common], help="boundary-regularity experiments")
    pb.add_argument("--experiment", choices=("puncture", "rhs-independence", "exterior",
                                             "barrier"))
    pb.set_defaults(func=cmd_probe)

    c = sub.add_parser("constants", parents=[common, frac], help="named constants")
    c.add_argument("--name", required=True, choices=CONSTANTS)
    c.add_argument("--beta", type=float)
    c.add_argument("--r0", type=float, default=1.0)
    c.add_argument("--R", type=float, default=1.0)
    c.set_defaults(func=cmd_constants)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "p", None) is None and args.command in ("barrier-check", "constants",
                                                            "eval"):
        args.p = 2.0
    if args.command == "barrier-check" and args.s is None:
        args.s = 0.5
    limits = contextlib.nullcontext()
    if args.threads is not None:
        if args.threads < 1:
            print("error: threads: must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
        from threadpoolctl import threadpool_limits

        limits = threadpool_limits(limits=args.threads)
    try:
        with limits:
            return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONV


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
