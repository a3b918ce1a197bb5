"""Command-line front end: ``teig <subcommand> ...``.

Every file output is written atomically and accompanied by
``<name>.manifest.json`` (config, versions, wall time).  Exit codes:
0 success, 1 usage error, 2 numerical acceptance failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import platform
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .coeff import PRESET_SIGMA14, CoefficientField, field_from_json, load_profile, validate
from .errors import AcceptanceFailure, TeigError, UsageError, ValidationError

SLOPE_LIMIT_HS = -2.3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class ExperimentConfig:
    command: str
    params: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    seed: int = 0

    def canonical(self):
        return json.dumps({"command": self.command, "params": self.params, "seed": self.seed},
                          sort_keys=True, default=str)

    def digest(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()


# ---------------------------------------------------------------------------
# output helpers


def fmt(x):
    """17 significant digits; complex values as 're+imj'."""
    if isinstance(x, (complex, np.complexfloating)):
        return f"{x.real:.16e}{x.imag:+.16e}j"
    if isinstance(x, (float, np.floating)):
        return f"{x:.16e}"
    return str(x)


def _atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    _atomic_write(path, buf.getvalue())


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": float(x.real), "im": float(x.imag)}
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def dumps(obj):
    return json.dumps(_jsonable(obj), sort_keys=True, indent=1) + "\n"


def write_json(path, obj):
    _atomic_write(path, dumps(obj))


def versions():
    import scipy

    return {"teig": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def write_manifest(path, config: ExperimentConfig, wall_time, extra=None):
    data = {"config": json.loads(config.canonical()), "config_hash": config.digest(),
            "versions": versions(), "wall_time": wall_time, "timestamp": time.time()}
    if extra:
        data.update(extra)
    write_json(f"{path}.manifest.json", data)


def _field(args):
    if getattr(args, "profile", None):
        return load_profile(args.profile)
    return field_from_json(PRESET_SIGMA14)


def _parse_range(text, kind=float):
    parts = text.split(":")
    if len(parts) != 2:
        raise UsageError(f"expected a range lo:hi, got {text!r}")
    try:
        return kind(parts[0]), kind(parts[1])
    except ValueError:
        raise UsageError(f"cannot parse range {text!r}") from None


def _parse_complex(text):
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise UsageError(f"cannot parse complex number {text!r}") from None


# ---------------------------------------------------------------------------
# spectrum cache and the Weyl pipeline


def _cache_dir(args):
    base = getattr(args, "cache_dir", None) or os.environ.get("TEIG_CACHE")
    if base:
        return Path(base)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "teig"


def cached_spectrum(medium, t_max, lambda_floor, cache_dir):
    """assemble_spectrum with an on-disk cache keyed by the config hash."""
    from .disk_spectrum import Spectrum, assemble_spectrum

    key = ExperimentConfig("disk-eigs", {"medium": medium.as_dict(), "tmax": float(t_max),
                                         "lambda_floor": float(lambda_floor), "version": __version__})
    path = Path(cache_dir) / f"spectrum-{key.digest()[:20]}.json"
    if path.is_file():
        with path.open() as fh:
            data = json.load(fh)
        spec = Spectrum.from_dict(data)
        spec.t_max = float(t_max)
        return spec, True
    spec = assemble_spectrum(medium, t_max, lambda_floor)
    _atomic_write(path, dumps(spec.to_dict()))
    return spec, False


def default_t_grid(t_max, lambda_floor=1.0, points=41):
    lo = max(lambda_floor * 2, t_max / 1000)
    return np.geomspace(lo, t_max, points)


def pipeline_weyl(config: ExperimentConfig):
    """Spectrum → counting fit → CSV (t, N, c t, ratio) and a JSON summary.

    Returns (fit, summary dict, cache_hit).
    """
    from .weyl import counting_fit

    p = config.params
    fld = load_profile(p["profile"]) if p.get("profile") else field_from_json(PRESET_SIGMA14)
    medium = fld.disk_medium()
    spec, hit = cached_spectrum(medium, p["tmax"], p.get("lambda_floor", 1.0), p["cache_dir"])
    grid = default_t_grid(p["tmax"], p.get("lambda_floor", 1.0), p.get("points", 41))
    fit = counting_fit(spec, fld, grid)
    rows = [(t, int(n), fit.c_analytic * t, r) for t, n, r in zip(grid, fit.curve.counts, fit.ratios)]
    out = p["out"]
    write_csv(out, ["t", "N", "c_t", "ratio"], rows)
    summary = {"c": fit.c_analytic, "slope": fit.slope, "final_ratio": float(fit.ratios[-1]),
               "tmax": p["tmax"], "entries": len(spec)}
    write_json(str(Path(out).with_suffix(".json")), summary)
    return fit, summary, hit


# ---------------------------------------------------------------------------
# subcommands


def cmd_weyl(args, cfg):
    from .weyl import weyl_constant

    fld = _field(args)
    validate(fld)
    c = weyl_constant(fld)
    print(f"{c:.12g}")
    return {"c": c}


def cmd_disk_eigs(args, cfg):
    from .disk_spectrum import DiskMedium

    if args.profile:
        medium = load_profile(args.profile).disk_medium()
    else:
        medium = DiskMedium(args.R, args.sigma1, args.sigma2, args.a0)
    spec, hit = cached_spectrum(medium, args.tmax, args.lambda_floor, _cache_dir(args))
    write_json(args.out, spec.to_dict())
    print(f"{len(spec)} entries, N({args.tmax:g}) = {int(spec.counting(args.tmax)[0])}"
          + (" (cached)" if hit else ""))
    return {"entries": len(spec), "cached": hit}


def cmd_counting_fit(args, cfg):
    from .disk_spectrum import Spectrum
    from .weyl import counting_fit

    if args.spectrum:
        p = Path(args.spectrum)
        if not p.is_file():
            raise UsageError(f"spectrum file not found: {p}")
        with p.open() as fh:
            spec = Spectrum.from_dict(json.load(fh))
        fld = _field(args)
        t_max = args.tmax or float(np.abs(spec.lambdas()).max())
        grid = default_t_grid(t_max, spec.lambda_floor, args.points)
        fit = counting_fit(spec, fld, grid)
        rows = [(t, int(n), fit.c_analytic * t, r) for t, n, r in zip(grid, fit.curve.counts, fit.ratios)]
        write_csv(args.out, ["t", "N", "c_t", "ratio"], rows)
        summary = {"c": fit.c_analytic, "slope": fit.slope, "final_ratio": float(fit.ratios[-1])}
        write_json(str(Path(args.out).with_suffix(".json")), summary)
    else:
        if not args.tmax:
            raise UsageError("counting-fit needs --spectrum or --tmax")
        pcfg = ExperimentConfig("pipeline-weyl", {"profile": args.profile, "tmax": args.tmax,
                                                  "lambda_floor": 1.0, "points": args.points,
                                                  "cache_dir": str(_cache_dir(args)), "out": args.out})
        fit, summary, hit = pipeline_weyl(pcfg)
        summary["cached"] = hit
    print(f"c = {summary['c']:.6g}, slope = {summary['slope']:.4f}, final ratio = {summary['final_ratio']:.4f}")
    if abs(summary["final_ratio"] - 1) > args.threshold:
        raise AcceptanceFailure(f"final ratio {summary['final_ratio']:.4f} deviates from 1 by more "
                                f"than {args.threshold:g}")
    return summary


def cmd_wedge_report(args, cfg):
    from .disk_spectrum import Spectrum, wedge_report

    p = Path(args.spectrum)
    if not p.is_file():
        raise UsageError(f"spectrum file not found: {p}")
    with p.open() as fh:
        spec = Spectrum.from_dict(json.load(fh))
    rep = wedge_report(spec, args.shells)
    rows = [(lo, hi, r) for (lo, hi), r in rep]
    if args.out:
        write_csv(args.out, ["t_lo", "t_hi", "max_ratio"], rows)
    for lo, hi, r in rows:
        print(f"[{lo:g}, {hi:g}): {r:.6f}")
    return {"shells": rows}


def cmd_resolvent_scan(args, cfg):
    from .cauchy_grid import RadialGrid, apply_T

    fld = _field(args)
    validate(fld)
    lo, hi = _parse_range(args.lambda_decades)
    ts = 10 ** np.arange(lo, hi + 1e-9, args.step)
    grid = RadialGrid(args.N, fld.R)
    ones, zeros = np.ones(args.N), np.zeros(args.N)
    rows = []
    for m in args.modes:
        nu, nv = [], []
        for t in ts:
            u, _ = apply_T(fld, m, 1j * t, args.N, ones, zeros)
            _, v = apply_T(fld, m, 1j * t, args.N, zeros, ones)
            nu.append(grid.norm(u))
            nv.append(grid.norm(v))
            slope = np.polyfit(np.log(ts[:len(nu)]), np.log(nu), 1)[0] if len(nu) > 1 else math.nan
            rows.append((m, t, nu[-1], nv[-1], slope))
    write_csv(args.out, ["mode", "t", "norm_u", "norm_v", "slope_so_far"], rows)
    print(f"{len(rows)} rows written to {args.out}")
    return {"rows": len(rows)}


def cmd_cauchy_eig(args, cfg):
    from .cauchy_grid import nonlinear_eig

    fld = _field(args)
    validate(fld)
    try:
        cx, cy, r = (float(x) for x in args.contour.split(","))
    except ValueError:
        raise UsageError(f"--contour expects cx,cy,r, got {args.contour!r}") from None
    eigs = nonlinear_eig(fld, args.mode, (complex(cx, cy), r), args.N)
    for lam, order in eigs:
        print(f"{fmt(lam)} {order}")
    if args.out:
        write_csv(args.out, ["re", "im", "order"], [(l.real, l.imag, o) for l, o in eigs])
    return {"eigenvalues": [l for l, _ in eigs]}


def cmd_halfspace(args, cfg):
    from .halfspace import FrozenData, multiplier

    lam = _parse_complex(args.lam)
    lo, hi = _parse_range(args.grid)
    xs = np.linspace(lo, hi, args.points)
    A = np.array(json.loads(args.A), dtype=float)
    rows = []
    for x in xs:
        data = FrozenData(A, args.sigma1, args.sigma2, lam, [x])
        m1, m2 = multiplier(data, 0.0, 1), multiplier(data, 0.0, 2)
        rows.append((x, m1, m2, abs(lam * m1)))
    write_csv(args.out, ["xi", "m1", "m2", "abs_lambda_m1"], rows)
    print(f"{len(rows)} rows written to {args.out}")
    return {"rows": len(rows)}


def _radial_average(fld, fn, points=16):
    """∫_Ω fn(A(r), Σ₁(r), Σ₂(r)) dx on the disk by Gauss-Legendre in r."""
    x, w = np.polynomial.legendre.leggauss(points)
    r = 0.5 * fld.R * (x + 1)
    total = 0j
    for ri, wi in zip(r, w):
        A = fld.A(ri)
        total += wi * 0.5 * fld.R * 2 * math.pi * ri * fn(A, [float(fld.sigma(1, ri)), float(fld.sigma(2, ri))])
    return total


def cmd_trace_check(args, cfg):
    from .trace_lab import trace_diag, trace_limit_constant

    fld = _field(args)
    validate(fld)
    t = args.t
    scale = t ** 5
    lhs = _radial_average(fld, lambda A, s: trace_diag(A, s, t)) * scale
    rhs = _radial_average(fld, lambda A, s: trace_limit_constant(A, s))
    ratio = lhs / rhs
    out = {"lhs": lhs, "rhs": rhs, "ratio": ratio, "t": t}
    text = dumps(out)
    if args.out:
        _atomic_write(args.out, text)
    sys.stdout.write(text)
    if abs(ratio - 1) > args.tolerance:
        raise AcceptanceFailure(f"trace ratio {ratio} outside tolerance {args.tolerance:g}")
    return out


def cmd_hs_scan(args, cfg):
    from .trace_lab import alpha_norm_scan

    fld = _field(args)
    validate(fld)
    lo, hi = _parse_range(args.t_decades)
    m0, m1 = _parse_range(args.modes, int)
    ts = np.logspace(lo, hi, args.points)
    rows, slopes = [], {}
    for m in range(m0, m1 + 1):
        used, norms, slope = alpha_norm_scan(fld, m, ts, args.N)
        slopes[m] = slope
        rows += [(m, t, n, slope) for t, n in zip(used, norms)]
    write_csv(args.out, ["mode", "t", "norm_alpha", "slope"], rows)
    for m, s in slopes.items():
        print(f"mode {m}: slope {s:.4f}")
    bad = {m: s for m, s in slopes.items() if s > SLOPE_LIMIT_HS}
    if bad:
        raise AcceptanceFailure(f"slopes above {SLOPE_LIMIT_HS}: {bad}")
    return {"slopes": slopes}


def selfcheck_battery():
    """Fast structural checks; returns a list of (name, passed, detail)."""
    from .halfspace import FrozenData, build_symbol, characteristic_residual, flux_residual, multiplier
    from .specfun import bessel_j
    from .trace_lab import (im_c_identity, modified_resolvent_check, product_factorization_check,
                            scheme)
    from .weyl import weyl_constant

    rng = np.random.default_rng(0)
    out = []
    sc = scheme(2)
    out.append(("scheme identity", abs(np.exp(1j * sc.alpha * 3) + np.exp(1j * sc.beta * 3)) < 1e-14, ""))
    gaps = [product_factorization_check(2, np.eye(2), 1.0, 10 ** rng.uniform(0, 3), rng.normal(size=2))
            for _ in range(20)]
    out.append(("product factorization", max(gaps) <= 1e-12, f"max gap {max(gaps):.2e}"))
    gaps = []
    for _ in range(5):
        T = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
        T /= 2 * np.linalg.norm(T, 2)
        gaps.append(modified_resolvent_check(T, 0.7, rng.uniform(0, 2 * np.pi), sc))
    out.append(("modified resolvent", max(gaps) <= 1e-11, f"max gap {max(gaps):.2e}"))
    worst = 0.0
    for _ in range(50):
        lam = 10 ** rng.uniform(0, 3) * np.exp(1j * rng.uniform(0.2, np.pi - 0.2))
        sym = build_symbol(FrozenData(np.eye(2), 1.0, 4.0, lam, [rng.normal()]))
        scale = abs(sym.c) + abs(lam) * 4 + sym.b ** 2
        worst = max(worst, abs(flux_residual(sym, 1.0)) / math.sqrt(scale),
                    abs(characteristic_residual(sym, 1)) / scale)
    out.append(("half-space residuals", worst <= 1e-12, f"worst {worst:.2e}"))
    m = multiplier(FrozenData(np.eye(2), 1.0, 2.0, 1j, [0.0]))
    out.append(("multiplier value", abs(m - (-1j / (1 - 1 / math.sqrt(2)))) < 1e-12, f"{m}"))
    gap = im_c_identity(np.array([[2.0, 0.3], [0.3, 1.0]]), [1.0, 4.0])[2]
    out.append(("Im(c) identity", gap <= 1e-6, f"gap {gap:.2e}"))
    c = weyl_constant(CoefficientField())
    out.append(("Weyl constant", abs(c - 1.25) < 1e-12, f"{c}"))
    j = complex(bessel_j(0, 2.404825557695773))
    out.append(("Bessel zero", abs(j) < 1e-14, f"{j}"))
    return out


def cmd_selfcheck(args, cfg):
    results = selfcheck_battery()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name} {detail}".rstrip())
    failed = [n for n, ok, _ in results if not ok]
    if failed:
        raise AcceptanceFailure(f"selfcheck failures: {failed}")
    return {"passed": len(results)}


def build_parser():
    p = _Parser(prog="teig", description="Transmission eigenvalue experiments.")
    p.add_argument("--version", action="version", version=f"teig {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=fn)
        return sp

    def profile(sp):
        sp.add_argument("--profile", help="medium JSON (default: sigma=(1,4) disk)")

    sp = add("weyl", cmd_weyl, "print the Weyl constant")
    profile(sp)

    sp = add("disk-eigs", cmd_disk_eigs, "assemble the disk spectrum")
    profile(sp)
    sp.add_argument("--sigma1", type=float, default=1.0)
    sp.add_argument("--sigma2", type=float, default=4.0)
    sp.add_argument("--R", type=float, default=1.0)
    sp.add_argument("--a0", type=float, default=1.0)
    sp.add_argument("--tmax", type=float, required=True)
    sp.add_argument("--lambda-floor", type=float, default=1.0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--cache-dir")

    sp = add("counting-fit", cmd_counting_fit, "compare N(t) with the Weyl law")
    profile(sp)
    sp.add_argument("--spectrum")
    sp.add_argument("--tmax", type=float)
    sp.add_argument("--points", type=int, default=41)
    sp.add_argument("--threshold", type=float, default=0.1)
    sp.add_argument("--out", required=True)
    sp.add_argument("--cache-dir")

    sp = add("wedge-report", cmd_wedge_report, "max |Im λ|/|λ| per shell")
    sp.add_argument("--spectrum", required=True)
    sp.add_argument("--shells", type=int, default=4)
    sp.add_argument("--out")

    sp = add("resolvent-scan", cmd_resolvent_scan, "norms of T_λ(1,0) and T_λ(0,1) along λ = it")
    profile(sp)
    sp.add_argument("--lambda-decades", default="2:4")
    sp.add_argument("--step", type=float, default=0.5)
    sp.add_argument("--modes", type=lambda s: [int(x) for x in s.split(",")], default=[0, 5])
    sp.add_argument("--N", type=int, default=256)
    sp.add_argument("--out", required=True)

    sp = add("cauchy-eig", cmd_cauchy_eig, "eigenvalues inside a circle (discretised system)")
    profile(sp)
    sp.add_argument("--contour", required=True, help="cx,cy,r")
    sp.add_argument("--mode", type=int, default=0)
    sp.add_argument("--N", type=int, default=256)
    sp.add_argument("--out")

    sp = add("halfspace", cmd_halfspace, "tabulate the half-space multipliers")
    sp.add_argument("--lambda", dest="lam", required=True)
    sp.add_argument("--grid", default="-10:10")
    sp.add_argument("--points", type=int, default=41)
    sp.add_argument("--A", default="[[1,0],[0,1]]")
    sp.add_argument("--sigma1", type=float, default=1.0)
    sp.add_argument("--sigma2", type=float, default=4.0)
    sp.add_argument("--out", required=True)

    sp = add("trace-check", cmd_trace_check, "trace asymptotics against the limit constant")
    profile(sp)
    sp.add_argument("--t", type=float, default=1e3)
    sp.add_argument("--tolerance", type=float, default=0.01)
    sp.add_argument("--out")

    sp = add("hs-scan", cmd_hs_scan, "double norms of T_{α,t} per mode")
    profile(sp)
    sp.add_argument("--t-decades", default="2:3")
    sp.add_argument("--points", type=int, default=9)
    sp.add_argument("--modes", default="0:8")
    sp.add_argument("--N", type=int, default=128)
    sp.add_argument("--out", required=True)

    add("selfcheck", cmd_selfcheck, "run the built-in property battery")
    return p


def _outputs(args):
    return [getattr(args, "out", None)] if getattr(args, "out", None) else []


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = build_parser().parse_args(argv)
        if not getattr(args, "command", None):
            raise UsageError("a subcommand is required (see teig --help)")
        params = {k: v for k, v in vars(args).items() if k not in ("func", "command")}
        cfg = ExperimentConfig(args.command, params, _outputs(args))
        start = time.perf_counter()
        status, result = 0, None
        try:
            result = args.func(args, cfg)
        except AcceptanceFailure as exc:
            print(f"acceptance failure: {exc}", file=sys.stderr)
            status = 2
        for out in cfg.outputs:
            if Path(out).exists():
                write_manifest(out, cfg, time.perf_counter() - start, {"exit_code": status})
        return status
    except (UsageError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except TeigError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
