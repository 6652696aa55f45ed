"""Command line driver: run, sweep, verify and oracle1d.

A run minimises one configured problem, extracts its free boundary, builds
the blow-up sequence at the contact point and evaluates every check.  All
artifacts are deterministic functions of the configuration and seed.
"""

from __future__ import annotations

import argparse
import copy
import csv
import itertools
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from .blowup import generate_sequence
from .domain import Ball, HalfBallGrid, ScalarField
from .errors import BernoulliLabError, ConfigInvalid, RadiusOverflow, Stagnation
from .fieldio import read_field, write_field
from .freeboundary import extract_free_boundary, positivity_density, sigma_profile
from .functional import energy
from .minimizer import Schedule, minimize, perturbation_audit
from .oracle1d import solve_1d_exact
from .presets import BOUNDARY_PRESETS, COEFFICIENT_PRESETS, build_spec
from .reports import _jsonable
from .verify import (
    calibrate_nondegeneracy,
    check_h1_bound,
    check_linear_growth,
    check_nondegeneracy,
    check_subharmonic,
    random_probes,
)

EXIT_OK, EXIT_CONFIG, EXIT_STAGNATION = 0, 2, 3
SWEEP_CAP = 10_000
SIGMA_RADII = (0.05, 0.1, 0.2, 0.4)
CONE_EPSILON = 0.5
DENSITY_RADII = (0.1, 0.2)
SUBHARMONIC_TRIALS = 100
NONDEGENERACY_PROBES = 200
CALIBRATION_SEED_SHIFT = 1_000_003

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["domain", "boundary", "lambda_plus", "lambda_minus"],
    "properties": {
        "domain": {
            "type": "object",
            "additionalProperties": False,
            "required": ["h"],
            "properties": {"radius": _pos, "h": _pos, "dim": {"type": "integer", "enum": [2, 3]}},
        },
        "coefficients": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "preset": {"enum": list(COEFFICIENT_PRESETS)},
                "m": {"type": "number", "minimum": 0},
                "alpha": _num,
                "mu": _num,
            },
        },
        "boundary": {
            "type": "object",
            "additionalProperties": False,
            "required": ["preset"],
            "properties": {"preset": {"enum": list(BOUNDARY_PRESETS)}, "params": {"type": "object"}},
        },
        "lambda_plus": _num,
        "lambda_minus": _num,
        "M": _pos,
        "density_D": _num,
        "continuation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"eps0": _pos, "factor": _num},
        },
        "blowup": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"radii": {"type": "array", "items": _pos, "minItems": 1}, "R": _pos},
        },
        "seed": {"type": "integer", "minimum": 0},
        "out_dir": {"type": "string"},
    },
}

SWEEP_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["base", "grid"],
    "properties": {
        "base": {"type": "object"},
        "grid": {"type": "object", "additionalProperties": {"type": "array"}},
        "workers": {"type": "integer", "minimum": 1},
        "out_dir": {"type": "string"},
    },
}

DEFAULTS = {
    "domain": {"radius": 1.0, "dim": 2},
    "coefficients": {"preset": "identity", "m": 0.0, "alpha": 0.5, "mu": 0.5},
    "boundary": {"params": {}},
    "M": 2.0,
    "density_D": 0.1,
    "continuation": {"factor": 0.5},
    "blowup": {"radii": [2.0 ** -j for j in range(1, 6)], "R": 1.0},
    "seed": 0,
    "out_dir": "out",
}


# ---------------------------------------------------------------------------
# configuration


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "params":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _schema_errors(doc, schema) -> list[str]:
    validator = jsonschema.Draft202012Validator(schema)
    errs = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    return [f"{'/'.join(str(p) for p in e.absolute_path) or '<root>'}: {e.message}" for e in errs]


def load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc


def normalize_config(doc: dict, seed: Optional[int] = None) -> dict:
    """Validate against the schema, fill defaults and check the data ordering."""
    errors = _schema_errors(doc, CONFIG_SCHEMA)
    if errors:
        raise ConfigInvalid("config does not match the schema:\n  " + "\n  ".join(errors))
    cfg = _merge(DEFAULTS, doc)
    if seed is not None:
        cfg["seed"] = int(seed)
    lp, lm = cfg["lambda_plus"], cfg["lambda_minus"]
    if not 0 < lm < lp:
        raise ConfigInvalid(
            f"lambda ordering violated: need 0 < lambda_minus < lambda_plus, "
            f"got lambda_minus={lm}, lambda_plus={lp}"
        )
    radii = cfg["blowup"]["radii"]
    if any(b >= a for a, b in zip(radii, radii[1:])) or max(radii) > 1:
        raise ConfigInvalid("blowup.radii must be strictly decreasing in (0, 1]")
    if cfg["blowup"]["R"] * max(radii) > cfg["domain"]["radius"] * (1 + 1e-12):
        raise ConfigInvalid(
            f"blowup.R * max(radii) = {cfg['blowup']['R'] * max(radii)} exceeds the domain radius"
        )
    return cfg


def build_problem_spec(cfg: dict):
    d, c, b = cfg["domain"], cfg["coefficients"], cfg["boundary"]
    try:
        spec = build_spec(
            radius=d["radius"],
            h=d["h"],
            dim=d["dim"],
            coefficients=c["preset"],
            m=c["m"],
            alpha=c["alpha"],
            mu=c["mu"],
            boundary=b["preset"],
            params=b["params"],
            lambda_plus=cfg["lambda_plus"],
            lambda_minus=cfg["lambda_minus"],
            M=cfg["M"],
            density_D=cfg["density_D"],
        )
    except ConfigInvalid:
        raise
    except BernoulliLabError as exc:
        raise ConfigInvalid(str(exc)) from exc
    issues = spec.problems()
    if issues:
        raise ConfigInvalid("problem data rejected: " + "; ".join(issues))
    return spec


def _schedule(cfg: dict) -> Schedule:
    cont = cfg["continuation"]
    try:
        return Schedule(eps0=cont.get("eps0"), factor=cont["factor"])
    except ValueError as exc:
        raise ConfigInvalid(f"continuation: {exc}") from exc


# ---------------------------------------------------------------------------
# analysis of a field


def _fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    return "nan" if math.isnan(x) else repr(x)


def _write_csv(path: Path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _blowup_center(grid: HalfBallGrid, contact, R: float, r0: float) -> np.ndarray:
    """The contact point when the analysis ball fits, otherwise the origin."""
    if contact is not None and R * r0 + float(np.linalg.norm(contact)) <= grid.radius * (1 + 1e-12):
        return np.asarray(contact, dtype=float)
    return np.zeros(grid.dim)


def analyse(u: ScalarField, spec, cfg: dict, audit) -> tuple[dict, list, list]:
    """Free boundary, blow-ups and checks for ``u``; returns (result, sigma rows, blow-up rows)."""
    grid = spec.grid
    seed = cfg["seed"]
    fb = extract_free_boundary(u)
    radii = [grid.radius * r for r in SIGMA_RADII]
    cone = sigma_profile(fb, radii, epsilon=CONE_EPSILON)
    sigma_rows = [
        [_fmt(rho), _fmt(s), "" if cone.no_contact else str(len(v) if v is not None else 0)]
        for rho, s, v in itertools.zip_longest(cone.radii, cone.s, cone.violations)
    ]

    bcfg = cfg["blowup"]
    center = _blowup_center(grid, fb.contact, bcfg["R"], bcfg["radii"][0])
    try:
        seq = generate_sequence(u, spec.A, bcfg["radii"], R=bcfg["R"], center=center)
    except RadiusOverflow as exc:
        raise ConfigInvalid(str(exc)) from exc
    blow_rows = []
    for j, r in enumerate(seq.radii):
        d = seq.distances[j] if j < len(seq.distances) else None
        f = seq.fits[j]
        blow_rows.append([str(j + 1), _fmt(r), _fmt(d), _fmt(seq.h1[j]), _fmt(f.c), _fmt(f.residual)])

    checks = {"audit": audit.to_dict()}
    checks["subharmonic"] = check_subharmonic(u, spec.A, SUBHARMONIC_TRIALS, seed).to_dict()
    checks["linear_growth"] = check_linear_growth(u, spec.A, spec.phi, spec.mu, spec.M).to_dict()
    checks["h1_bound"] = check_h1_bound(seq, min(1.0, seq.R), spec.lambda_plus).to_dict()
    c_nd = calibrate_nondegeneracy([u], NONDEGENERACY_PROBES, 0.5, seed + CALIBRATION_SEED_SHIFT)
    probes = random_probes(grid, NONDEGENERACY_PROBES, seed)
    checks["nondegeneracy"] = check_nondegeneracy(u, probes, 0.5, c_nd).to_dict()

    densities = None
    if fb.contact is not None:
        densities = {}
        for rho in DENSITY_RADII:
            rr = rho * grid.radius
            if grid.contains_ball(Ball(fb.contact, rr)):
                densities[_fmt(rr)] = positivity_density(u, rr, fb.contact)
        if densities:
            low = min(densities.values())
            checks["density"] = {
                "name": "density",
                "passed": bool(low > spec.density_D),
                "measured": low,
                "bound": spec.density_D,
                "tolerance": 0.0,
                "witnesses": [],
                "details": {"densities": densities},
            }

    result = {
        "blowup": seq.to_dict(),
        "checks": checks,
        "cone": cone.to_dict(),
        "density": densities,
        "energy": energy(u, spec.A, spec.lambda_plus, spec.lambda_minus).to_dict(),
        "fitted_c": seq.fits[-1].c,
        "free_boundary": fb.to_dict(),
        "nondegeneracy_threshold": c_nd,
        "s_rho_min": cone.s[0],
    }
    return result, sigma_rows, blow_rows


def _dump(path: Path, doc: dict):
    text = json.dumps(_jsonable(doc), sort_keys=True, indent=2, ensure_ascii=False)
    path.write_text(text + "\n", encoding="utf-8")


def _write_outputs(out: Path, result: dict, sigma_rows, blow_rows):
    out.mkdir(parents=True, exist_ok=True)
    _dump(out / "result.json", result)
    _write_csv(out / "sigma.csv", ["rho", "s_rho", "violations"], sigma_rows)
    _write_csv(
        out / "blowup.csv",
        ["j", "r_j", "uniform_dist", "h1_seminorm", "fit_c", "fit_residual"],
        blow_rows,
    )


def run_experiment(cfg: dict, out_dir: Optional[Path] = None) -> tuple[int, dict]:
    """Minimise, analyse and write artifacts; returns (exit status, result)."""
    spec = build_problem_spec(cfg)
    out = Path(out_dir if out_dir is not None else cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    write_field(spec.phi, out / "phi.fbfield")
    try:
        res = minimize(spec, _schedule(cfg), seed=cfg["seed"])
    except Stagnation as exc:
        partial = exc.result
        result = {"config": cfg, "partial": True, "status": "stagnation", "message": str(exc)}
        if partial is not None:
            write_field(partial.u, out / "u.fbfield")
            result["minimizer"] = partial.to_dict()
        _dump(out / "result.json", result)
        return EXIT_STAGNATION, result
    write_field(res.u, out / "u.fbfield")
    result, sigma_rows, blow_rows = analyse(res.u, spec, cfg, res.audit)
    result.update({"config": cfg, "minimizer": res.to_dict(), "partial": False, "status": "ok"})
    _write_outputs(out, result, sigma_rows, blow_rows)
    return EXIT_OK, result


def verify_field(field_path, cfg: dict, out_dir: Optional[Path] = None) -> tuple[int, dict]:
    """Analyse a stored field against the configured problem."""
    spec = build_problem_spec(cfg)
    try:
        u = read_field(field_path, spec.grid)
    except (OSError, ValueError) as exc:
        raise ConfigInvalid(f"cannot use field {field_path}: {exc}") from exc
    audit = perturbation_audit(u, spec, seed=cfg["seed"])
    result, sigma_rows, blow_rows = analyse(u, spec, cfg, audit)
    result.update({"config": cfg, "field": str(Path(field_path).name), "partial": False, "status": "ok"})
    _write_outputs(Path(out_dir if out_dir is not None else cfg["out_dir"]), result, sigma_rows, blow_rows)
    return EXIT_OK, result


# ---------------------------------------------------------------------------
# sweeps


def _set_path(doc: dict, dotted: str, value):
    keys = dotted.split(".")
    node = doc
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigInvalid(f"grid path {dotted!r} crosses a non-object member")
    node[keys[-1]] = copy.deepcopy(value)


def expand_sweep(doc: dict, seed: Optional[int] = None) -> list[tuple[dict, dict]]:
    """(parameters, raw config) for every grid point, in lexicographic order."""
    errors = _schema_errors(doc, SWEEP_SCHEMA)
    if errors:
        raise ConfigInvalid("sweep config does not match the schema:\n  " + "\n  ".join(errors))
    axes = sorted(doc["grid"].items())
    size = math.prod(len(v) for _, v in axes) if axes else 0
    if size > SWEEP_CAP:
        raise ConfigInvalid(f"sweep grid has {size} configurations, above the cap of {SWEEP_CAP}")
    rows = []
    if size == 0:
        return rows
    for combo in itertools.product(*(v for _, v in axes)):
        raw = copy.deepcopy(doc["base"])
        params = {}
        for (path, _), value in zip(axes, combo):
            _set_path(raw, path, value)
            params[path] = value
        if seed is not None:
            raw["seed"] = int(seed)
        rows.append((params, raw))
    return rows


def _sweep_row(args):
    k, params, raw, out = args
    row = {"index": k, "params": params}
    try:
        cfg = normalize_config(raw)
        status, result = run_experiment(cfg, Path(out) / f"row_{k:05d}")
        row["status"] = "ok" if status == EXIT_OK else result.get("status", "failed")
        if status == EXIT_OK:
            row["energy"] = result["energy"]["total"]
            dens = result["density"]
            row["density"] = min(dens.values()) if dens else None
            row["s_rho_min"] = result["s_rho_min"]
            row["checks"] = {name: bool(c["passed"]) for name, c in sorted(result["checks"].items())}
    except Exception as exc:  # rows fail independently
        row["status"] = "error"
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def run_sweep(doc: dict, seed: Optional[int] = None, out_dir: Optional[Path] = None) -> list[dict]:
    rows = expand_sweep(doc, seed)
    out = Path(out_dir if out_dir is not None else doc.get("out_dir", "sweep"))
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(k, p, raw, str(out)) for k, (p, raw) in enumerate(rows)]
    workers = int(doc.get("workers", 1))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            table = list(pool.map(_sweep_row, jobs))
    else:
        table = [_sweep_row(j) for j in jobs]
    _dump(out / "summary.json", {"rows": table})
    names = sorted({n for r in table for n in r.get("checks", {})})
    paths = sorted(doc["grid"])
    header = ["index"] + paths + ["status", "energy", "density", "s_rho_min"] + [f"pass_{n}" for n in names]
    lines = []
    for r in table:
        checks = r.get("checks", {})
        lines.append(
            [str(r["index"])]
            + [json.dumps(r["params"][p]) for p in paths]
            + [r["status"], _fmt(r.get("energy")), _fmt(r.get("density")), _fmt(r.get("s_rho_min"))]
            + [("" if n not in checks else str(checks[n]).lower()) for n in names]
        )
    _write_csv(out / "summary.csv", header, lines)
    return table


# ---------------------------------------------------------------------------
# entry point


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bernoulli-lab", description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    sub = p.add_subparsers(dest="verb", required=True)
    r = sub.add_parser("run", help="minimise and analyse one configuration")
    r.add_argument("config")
    r.add_argument("--out", default=None, help="override out_dir")
    s = sub.add_parser("sweep", help="run a grid of configurations")
    s.add_argument("config")
    s.add_argument("--out", default=None)
    v = sub.add_parser("verify", help="analyse a stored field")
    v.add_argument("field")
    v.add_argument("config")
    v.add_argument("--out", default=None)
    o = sub.add_parser("oracle1d", help="exact 1D two-phase solution")
    for name in ("a", "b", "lp", "lm"):
        o.add_argument(name, type=float)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.verb == "oracle1d":
            sol = solve_1d_exact(args.a, args.b, args.lp, args.lm)
            print(json.dumps(_jsonable(sol.to_dict()), sort_keys=True, indent=2))
            return EXIT_OK
        if args.verb == "sweep":
            table = run_sweep(load_json(args.config), args.seed, args.out)
            print(f"{len(table)} rows, {sum(r['status'] == 'ok' for r in table)} ok")
            return EXIT_OK
        cfg = normalize_config(load_json(args.config), args.seed)
        if args.verb == "run":
            status, result = run_experiment(cfg, args.out)
        else:
            status, result = verify_field(args.field, cfg, args.out)
        print(f"status: {result['status']}")
        for name, c in sorted(result.get("checks", {}).items()):
            print(f"  {name}: {'pass' if c['passed'] else 'FAIL'}")
        return status
    except BernoulliLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
