"""Batch driver: config ingestion, experiment orchestration, reports, rendering.

Subcommands (each takes --config PATH, --out DIR, --grid N, --tol X, --json):

    solve    solve one configuration, write a solution container + report
    volume   sweep one-vortex volumes against the exact prediction, CSV + report
    dh       coupling-derivative of the volume against the exact slope
    coh      exact class data and predictions as JSON
    render   grayscale PGM + CSV of a stored solution field
    verify   recompute the residual certificates of a stored solution

Config files are TOML with blocks [geometry], [vortex], [run], [output],
[cohomology], [render], [verify]; unknown blocks or keys are rejected.
Exact couplings are written as rational multiples of pi powers, e.g.
tau = "8pi" or tau_area = "2.1pi" (decimals are exact: 21 pi / 10).

Exit codes: 0 all checks pass, 2 configuration error (including violated
existence bound), 3 numeric failure (non-convergence or failed check).
Reports are JSON with sorted keys; every numeric claim carries its oracle
and tolerance, and timings live in their own block so reports are
byte-identical across runs except for that block.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

import numpy as np

from . import __version__
from .cohomology import (
    PiPolynomial,
    chern_vertical,
    cup,
    cup_power,
    dh_slope_class,
    integrate_top,
    parse_pi_rational,
    predicted_volume,
    vortex_class,
)
from .moduli import dh_slope, one_vortex_volume, worker_count
from .storage import load_solution, save_solution
from .surface import GridField, make_torus, save_field_csv, torus_point
from .vortex import (
    BradlowError,
    ConvergenceError,
    DegenerateSolution,
    bradlow_limit,
    bradlow_margin,
    curvature_field,
    density_field,
    divisor,
    solve_taubes,
    verify_solution,
    vortex_params,
)
from ._elliptic import EllipticSolveError
from .moduli import ExtractionError

__all__ = ["main", "ConfigError"]


class ConfigError(Exception):
    """Invalid configuration; maps to exit code 2."""


_SCHEMA = {
    "geometry": {"period_ratio", "area", "grid"},
    "vortex": {"points", "multiplicities", "tau", "tau_area"},
    "run": {"tol", "max_iter", "tau_areas", "taus", "dh_step"},
    "output": {"dir", "json"},
    "cohomology": {"r", "g", "tau_area", "area"},
    "render": {"solution", "field"},
    "verify": {"solution"},
}


def _load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    for block, content in cfg.items():
        if block not in _SCHEMA:
            raise ConfigError(f"unknown config block [{block}]")
        if not isinstance(content, dict):
            raise ConfigError(f"config entry {block!r} must be a block")
        unknown = set(content) - _SCHEMA[block]
        if unknown:
            raise ConfigError(
                f"unknown key(s) in [{block}]: {', '.join(sorted(unknown))}"
            )
    return cfg


def _exact(value) -> PiPolynomial:
    """Exact reading of a config scalar: pi-rational string, int, or decimal."""
    if isinstance(value, str):
        try:
            return parse_pi_rational(value)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if isinstance(value, bool) or value is None:
        raise ConfigError(f"expected a numeric value, got {value!r}")
    if isinstance(value, int):
        return PiPolynomial(value)
    if isinstance(value, float):
        return PiPolynomial(Fraction(str(value)))
    raise ConfigError(f"expected a numeric value, got {value!r}")


def _build_geometry(cfg: dict, grid_override):
    geo = cfg.get("geometry")
    if geo is None:
        raise ConfigError("config needs a [geometry] block")
    ratio = geo.get("period_ratio", [0.0, 1.0])
    if not (isinstance(ratio, list) and len(ratio) == 2):
        raise ConfigError("geometry.period_ratio must be [re, im]")
    tau_prime = complex(float(ratio[0]), float(ratio[1]))
    area_e = _exact(geo.get("area", 1.0))
    grid = grid_override if grid_override else geo.get("grid", [128, 128])
    if isinstance(grid, int):
        grid = [grid, grid]
    if not (isinstance(grid, list) and len(grid) == 2):
        raise ConfigError("geometry.grid must be an integer or [n1, n2]")
    try:
        geom = make_torus(tau_prime, area_e.to_float(), (int(grid[0]), int(grid[1])))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return geom, area_e


def _build_vortex(cfg: dict, geom, area_e):
    """Divisor and exact coupling from the [vortex] block."""
    vx = cfg.get("vortex")
    if vx is None:
        raise ConfigError("config needs a [vortex] block")
    pts_raw = vx.get("points", [[0.0, 0.0]])
    try:
        pts = [torus_point(geom, lattice=(float(p[0]), float(p[1]))) for p in pts_raw]
    except (TypeError, IndexError) as exc:
        raise ConfigError("vortex.points must be a list of [s, t] pairs") from exc
    mults = vx.get("multiplicities")
    try:
        div = divisor(geom, pts, mults)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if ("tau" in vx) == ("tau_area" in vx):
        raise ConfigError("give exactly one of vortex.tau or vortex.tau_area")
    if "tau" in vx:
        tau_e = _exact(vx["tau"])
        ta_e = tau_e * area_e
        tau_f = tau_e.to_float()
    else:
        ta_e = _exact(vx["tau_area"])
        tau_f = ta_e.to_float() / area_e.to_float()
    try:
        params = vortex_params(geom, div, tau_f)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return params, ta_e


def _run_options(cfg: dict, tol_override):
    run = cfg.get("run", {})
    tol = tol_override if tol_override is not None else float(run.get("tol", 1e-10))
    max_iter = int(run.get("max_iter", 25))
    return tol, max_iter


def _check(name, value, oracle, tolerance, mode="abs", oracle_exact=None) -> dict:
    value = float(value)
    oracle = float(oracle)
    if mode == "rel":
        err = abs(value - oracle) / max(abs(oracle), 1e-300)
        ok = err <= tolerance
    elif mode == "greater":
        err = -value
        ok = value > oracle
    else:
        err = abs(value - oracle)
        ok = err <= tolerance
    out = {
        "name": name,
        "value": value,
        "oracle": oracle,
        "tolerance": tolerance,
        "mode": mode,
        "error": err,
        "pass": bool(ok),
    }
    if oracle_exact is not None:
        out["oracle_exact"] = oracle_exact
    return out


def _emit(report: dict, out_dir: Path, want_stdout: bool) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    (out_dir / "report.json").write_text(text)
    if want_stdout:
        sys.stdout.write(text)


def _finish(report: dict, out_dir: Path, args) -> int:
    ok = all(c["pass"] for c in report.get("checks", []))
    report["status"] = "pass" if ok else "fail"
    _emit(report, out_dir, args.json)
    if not args.json:
        for c in report.get("checks", []):
            tag = "PASS" if c["pass"] else "FAIL"
            print(f"{tag} {c['name']}: value {c['value']:.9g} vs {c['oracle']:.9g}")
    return 0 if ok else 3


def _out_dir(cfg: dict, args) -> Path:
    if args.out:
        return Path(args.out)
    return Path(cfg.get("output", {}).get("dir", "."))


def _want_json(cfg: dict, args) -> bool:
    return bool(args.json or cfg.get("output", {}).get("json", False))


# ---------------------------------------------------------------------------
# Commands.


def cmd_solve(cfg: dict, args) -> int:
    geom, area_e = _build_geometry(cfg, args.grid)
    params, ta_e = _build_vortex(cfg, geom, area_e)
    tol, max_iter = _run_options(cfg, args.tol)
    out_dir = _out_dir(cfg, args)
    r = params.degree
    report = {
        "command": "solve",
        "inputs": {
            "tau": params.tau,
            "tau_area_exact": repr(ta_e),
            "area": geom.area,
            "grid": list(geom.grid_dims),
            "degree": r,
            "tol": tol,
        },
        "checks": [],
        "timings": {},
    }
    margin = bradlow_margin(params)
    t0 = time.perf_counter()
    try:
        sol = solve_taubes(params, tol=tol, max_iter=max_iter)
    except BradlowError as exc:
        if not exc.at_limit:
            raise ConfigError(str(exc)) from exc
        sol = bradlow_limit(params)
        report["branch"] = "degenerate"
        report["degenerate_class"] = "4*pi^2*theta"
        report["checks"].append(
            _check("degenerate_margin", margin, 0.0, 1e-12 * max(1.0, params.tau_area))
        )
    else:
        report["branch"] = "interior"
        rep = verify_solution(sol)
        mass_e = (ta_e - PiPolynomial.pi(1, 2 * r)) * 2
        flux_e = PiPolynomial.pi(1, 2 * r)
        dens = density_field(sol)
        curv = curvature_field(sol)
        report["newton_iters"] = sol.newton_iters
        report["checks"] = [
            _check("pde_residual", rep.pde_residual, 0.0, max(1e-9, 10.0 * tol)),
            _check(
                "mass_identity",
                float(dens.values.mean()) * geom.area,
                mass_e.to_float(),
                1e-6,
                mode="rel",
                oracle_exact=repr(mass_e),
            ),
            _check(
                "flux_identity",
                float(curv.values.mean()) * geom.area,
                flux_e.to_float(),
                1e-6,
                mode="rel",
                oracle_exact=repr(flux_e),
            ),
            _check("density_positivity_margin", rep.positivity_margin, 0.0, 0.0, mode="greater"),
        ]
    report["timings"]["solve_seconds"] = time.perf_counter() - t0
    out_dir.mkdir(parents=True, exist_ok=True)
    save_solution(sol, out_dir / "solution.vxs")
    report["solution_file"] = "solution.vxs"
    return _finish(report, out_dir, args)


def _volume_tolerance(ta_float: float) -> float:
    """Documented schedule: 5% close to the existence bound, 1% elsewhere."""
    return 0.05 if ta_float < 2.5 * math.pi else 0.01


def cmd_volume(cfg: dict, args) -> int:
    geom, area_e = _build_geometry(cfg, args.grid)
    tol, _ = _run_options(cfg, args.tol)
    run = cfg.get("run", {})
    if "tau_areas" in run:
        sweep = [_exact(t) for t in run["tau_areas"]]
    elif "taus" in run:
        sweep = [_exact(t) * area_e for t in run["taus"]]
    else:
        raise ConfigError("[run] needs tau_areas (or taus) for a volume sweep")
    area_f = area_e.to_float()
    for ta in sweep:
        if ta.to_float() <= 2.0 * math.pi:
            raise ConfigError(
                f"tau * area = {ta!r} must exceed 2 pi for a one-vortex volume"
            )
    out_dir = _out_dir(cfg, args)
    t0 = time.perf_counter()

    def run_one(ta_e):
        tau_f = ta_e.to_float() / area_f
        return one_vortex_volume(geom, tau_f, tol=tol)

    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            volumes = list(pool.map(run_one, sweep))
    else:
        volumes = [run_one(ta) for ta in sweep]

    report = {
        "command": "volume",
        "inputs": {
            "area": geom.area,
            "grid": list(geom.grid_dims),
            "tau_areas_exact": [repr(ta) for ta in sweep],
            "tol": tol,
        },
        "checks": [],
        "timings": {"sweep_seconds": time.perf_counter() - t0},
    }
    rows = []
    for ta_e, vol in zip(sweep, volumes):
        pred = predicted_volume(ta_e, 1, 1)
        pred_f = pred.to_float()
        tolerance = _volume_tolerance(ta_e.to_float())
        rel = abs(vol - pred_f) / abs(pred_f)
        report["checks"].append(
            _check(
                f"volume[{ta_e!r}]",
                vol,
                pred_f,
                tolerance,
                mode="rel",
                oracle_exact=repr(pred.value),
            )
        )
        rows.append(
            (
                ta_e.to_float() / area_f,
                geom.area,
                geom.grid_dims[0],
                vol,
                pred_f,
                rel,
                tolerance,
            )
        )
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["tau,area,grid,volume,prediction,rel_error,tolerance,pass"]
    for row, chk in zip(rows, report["checks"]):
        lines.append(
            ",".join(repr(x) for x in row) + "," + ("1" if chk["pass"] else "0")
        )
    (out_dir / "volume.csv").write_text("\n".join(lines) + "\n")
    report["csv_file"] = "volume.csv"
    return _finish(report, out_dir, args)


def cmd_dh(cfg: dict, args) -> int:
    geom, area_e = _build_geometry(cfg, args.grid)
    tol, _ = _run_options(cfg, args.tol)
    run = cfg.get("run", {})
    vx = cfg.get("vortex", {})
    if "tau" not in vx:
        raise ConfigError("[vortex] needs tau (the center coupling) for dh")
    tau_e = _exact(vx["tau"])
    tau_f = tau_e.to_float()
    h = float(run.get("dh_step", 0.1))
    if (tau_f - h) * geom.area <= 2.0 * math.pi:
        raise ConfigError(
            f"tau - h = {tau_f - h!r} leaves the existence range on area {geom.area!r}"
        )
    out_dir = _out_dir(cfg, args)
    t0 = time.perf_counter()
    slope = dh_slope(geom, tau_f, h)
    slope_class = dh_slope_class(1, 1, area_e)
    oracle = integrate_top(slope_class)
    report = {
        "command": "dh",
        "inputs": {
            "tau": tau_f,
            "area": geom.area,
            "grid": list(geom.grid_dims),
            "step": h,
        },
        "checks": [
            _check(
                "dh_slope",
                slope,
                oracle.to_float(),
                0.01,
                mode="rel",
                oracle_exact=repr(oracle.value),
            )
        ],
        "timings": {},
    }
    extra_taus = run.get("taus")
    if extra_taus:
        slopes = [slope]
        for t in extra_taus:
            tf = _exact(t).to_float()
            if (tf - h) * geom.area <= 2.0 * math.pi:
                raise ConfigError(f"sweep tau {tf!r} leaves the existence range")
            slopes.append(dh_slope(geom, tf, h))
        spread = (max(slopes) - min(slopes)) / abs(oracle.to_float())
        report["checks"].append(_check("slope_flatness", spread, 0.0, 0.01))
        report["slopes"] = slopes
    report["timings"]["dh_seconds"] = time.perf_counter() - t0
    return _finish(report, out_dir, args)


def _class_json(c) -> dict:
    out = {}
    for (p, q), coeff in sorted(c.terms.items()):
        key = f"eta^{p}theta^{q}" if (p or q) else "1"
        out[key] = {"exact": repr(coeff), "float": coeff.to_float()}
    return out


def cmd_coh(cfg: dict, args) -> int:
    coh = cfg.get("cohomology")
    if coh is None:
        raise ConfigError("config needs a [cohomology] block")
    try:
        r = int(coh["r"])
        g = int(coh["g"])
        ta_e = _exact(coh["tau_area"])
    except KeyError as exc:
        raise ConfigError(f"[cohomology] needs key {exc.args[0]}") from exc
    area_e = _exact(coh.get("area", 1))
    out_dir = _out_dir(cfg, args)
    import warnings as _warnings

    with _warnings.catch_warnings(record=True) as caught:
        _warnings.simplefilter("always")
        cls = vortex_class(ta_e, r, g)
        vol = predicted_volume(ta_e, r, g)
        cv = chern_vertical(r, g)
        slope = dh_slope_class(r, g, area_e)
        mixed = integrate_top(
            cup(cv, cup_power(cls, r - 1)).scale(
                Fraction(1, math.factorial(r - 1))
            )
        )
    payload = {
        "command": "coh",
        "r": r,
        "g": g,
        "tau_area": repr(ta_e),
        "vortex_class": _class_json(cls),
        "predicted_volume": {"exact": repr(vol.value), "float": vol.to_float()},
        "chern_vertical": _class_json(cv),
        "dh_slope_class": _class_json(slope),
        "top_integral_smoke": repr(mixed.value),
        "warnings": [str(w.message) for w in caught],
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    (out_dir / "coh.json").write_text(text)
    if args.json or _want_json(cfg, args):
        sys.stdout.write(text)
    else:
        print(f"predicted volume: {vol.value!r} = {vol.to_float():.9g}")
    return 0


_RENDER_FIELDS = ("density", "curvature", "u")


def _render_values(sol, name: str) -> np.ndarray:
    if name == "density":
        return density_field(sol).values
    if name == "curvature":
        return curvature_field(sol).values
    if name == "u":
        if isinstance(sol, DegenerateSolution):
            raise ConfigError("the degenerate branch has no finite u field")
        return sol.u.values
    raise ConfigError(f"unknown render field {name!r}; choose from {_RENDER_FIELDS}")


def _write_pgm(path, values: np.ndarray, label: str) -> None:
    vmin = float(values.min())
    vmax = float(values.max())
    if vmax > vmin:
        pix = np.rint((values - vmin) / (vmax - vmin) * 65535.0).astype(np.int64)
    else:
        pix = np.zeros(values.shape, dtype=np.int64)
    lines = [
        "P2",
        f"# vortexline {label} min {vmin!r} max {vmax!r}",
        f"{values.shape[1]} {values.shape[0]}",
        "65535",
    ]
    for row in pix:
        lines.append(" ".join(str(int(x)) for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_render(cfg: dict, args) -> int:
    ren = cfg.get("render")
    if ren is None or "solution" not in ren:
        raise ConfigError("config needs [render] with a solution path")
    field = ren.get("field", "density")
    if field not in _RENDER_FIELDS:
        raise ConfigError(f"unknown render field {field!r}; choose from {_RENDER_FIELDS}")
    try:
        sol = load_solution(ren["solution"])
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load solution: {exc}") from exc
    values = _render_values(sol, field)
    out_dir = _out_dir(cfg, args)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_pgm(out_dir / f"{field}.pgm", values, field)
    save_field_csv(
        GridField(sol.params.geometry, values), out_dir / f"{field}.csv"
    )
    report = {
        "command": "render",
        "field": field,
        "files": [f"{field}.pgm", f"{field}.csv"],
        "min": float(values.min()),
        "max": float(values.max()),
        "checks": [],
        "timings": {},
    }
    return _finish(report, out_dir, args)


def cmd_verify(cfg: dict, args) -> int:
    ver = cfg.get("verify")
    if ver is None or "solution" not in ver:
        raise ConfigError("config needs [verify] with a solution path")
    try:
        sol = load_solution(ver["solution"])
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load solution: {exc}") from exc
    out_dir = _out_dir(cfg, args)
    params = sol.params
    r = params.degree
    t0 = time.perf_counter()
    rep = verify_solution(sol)
    mass = 2.0 * (params.tau_area - 2.0 * math.pi * r)
    report = {
        "command": "verify",
        "inputs": {
            "tau": params.tau,
            "area": params.geometry.area,
            "grid": list(params.geometry.grid_dims),
            "degree": r,
        },
        "branch": "degenerate" if isinstance(sol, DegenerateSolution) else "interior",
        "checks": [
            _check("pde_residual", rep.pde_residual, 0.0, 1e-9),
            _check("mass_defect_rel", rep.mass_defect_rel if mass > 0 else 0.0, 0.0, 1e-6),
            _check(
                "density_positivity_margin",
                rep.positivity_margin,
                0.0,
                0.0,
                mode="greater",
            ),
        ],
        "timings": {"verify_seconds": time.perf_counter() - t0},
    }
    return _finish(report, out_dir, args)


_COMMANDS = {
    "solve": cmd_solve,
    "volume": cmd_volume,
    "dh": cmd_dh,
    "coh": cmd_coh,
    "render": cmd_render,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="vortexline",
        description="Vortex moduli laboratory on flat tori: solve, measure, compare.",
    )
    parser.add_argument("--version", action="version", version=f"vortexline {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "solve": "solve one vortex configuration and certify it",
        "volume": "sweep one-vortex moduli volumes against the exact prediction",
        "dh": "measure the volume's coupling derivative against the exact slope",
        "coh": "emit exact class data and predictions",
        "render": "rasterize a stored solution field (PGM + CSV)",
        "verify": "recompute the certificates of a stored solution",
    }
    for name in _COMMANDS:
        sp = sub.add_parser(name, help=helps[name])
        sp.add_argument("--config", required=True, help="TOML experiment config")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--grid", type=int, default=None, help="override grid size N")
        sp.add_argument("--tol", type=float, default=None, help="override solver tolerance")
        sp.add_argument("--json", action="store_true", help="print the report to stdout")
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config)
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BradlowError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, EllipticSolveError, ExtractionError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
