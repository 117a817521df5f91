"""Command-line front end.

Every command resolves its configuration from defaults, an optional
``--config`` file of ``key=value`` lines (keys are flag names), and flags, in
that order of precedence.  Outputs go to ``--out`` together with a
``manifest.json`` recording the resolved-config digest.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure,
4 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ensembles import DiscreteMeasure, entry_distribution, parse_population
from .kde import GAUSSIAN, BandwidthRule
from .limitlaw import SolverError, SpectralLaw, density_curve
from .quadrature import QuadratureError
from .simkit import (
    REFERENCE_POINTS,
    ExperimentConfig,
    rate_check,
    run_density_curve,
    run_mse_experiment,
    sample_spectrum,
)
from .specmat import EigenFailure
from .stieltjes import Contour, KdeSource, LawSource, RecoveryError, mmse_sir_limit, recover_population

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class UsageError(Exception):
    pass


DEFAULTS = {
    "ensemble": "exp",
    "population": "identity",
    "p": None,
    "n": None,
    "replicates": "50",
    "bandwidth": "default",
    "seed": "0",
    "grid": None,
    "points": ",".join(repr(x) for x in REFERENCE_POINTS),
    "out": ".",
    "sigma2": "1.0",
    "p1": "1.0",
    "contour_im": "0.5",
    "limit": "auto",
    "n_values": "200,800,3200",
}

# which keys each command reads; the digest covers exactly these
COMMAND_KEYS = {
    "density": ["ensemble", "population", "p", "n", "bandwidth", "seed", "grid", "limit"],
    "mse": ["ensemble", "population", "p", "n", "replicates", "bandwidth", "seed", "points", "limit"],
    "rate": ["ensemble", "population", "p", "n", "replicates", "seed", "n_values"],
    "recover": ["ensemble", "population", "p", "n", "bandwidth", "seed", "contour_im"],
    "sir": ["ensemble", "population", "p", "n", "bandwidth", "seed", "sigma2", "p1", "limit"],
}

RECIPES = {
    "fig1": ("density", {"ensemble": "exp", "population": "identity", "p": "800", "n": "3200",
                         "grid": "0.05:2.45:481", "seed": "1"},
             "density curve, exponential entries, T = I (also run with p=50, n=200)"),
    "fig2": ("density", {"ensemble": "bion", "population": "identity", "p": "800", "n": "3200",
                         "grid": "0.05:2.45:481", "seed": "1"},
             "density curve, Rademacher entries, T = I (also run with p=50, n=200)"),
    "fig3": ("density", {"ensemble": "exp", "population": "wishart:bion:4", "p": "1600", "n": "6400",
                         "grid": "0.0:5.0:501", "seed": "1"},
             "density curve, T = Y Y^T/(4p) with Y Rademacher (also p=50/n=200 and p=800/n=3200)"),
    "table1": ("mse", {"ensemble": "exp", "population": "identity", "p": "800", "n": "3200",
                       "replicates": "500", "seed": "1"},
               "MSE table, exponential entries, T = I, 500 replicates (also p=50, n=200)"),
    "table2": ("mse", {"ensemble": "bion", "population": "identity", "p": "800", "n": "3200",
                       "replicates": "500", "seed": "1"},
               "MSE table, Rademacher entries, T = I, 500 replicates (also p=50, n=200)"),
    "table3": ("mse", {"ensemble": "exp", "population": "wishart:bion:4", "p": "1600", "n": "6400",
                       "replicates": "500", "seed": "1", "limit": "none"},
               "MSE table, Wishart population, vs_average mode (also p=50/n=200, p=800/n=3200)"),
}


def read_config_file(path: str) -> dict:
    values = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key = key.strip().replace("-", "_")
        if key not in DEFAULTS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value.strip()
    return values


def resolve(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        cfg.update(read_config_file(args.config))
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = str(val)
    return cfg


def config_digest(command: str, cfg: dict) -> str:
    keys = COMMAND_KEYS[command]
    text = f"command={command}\n" + "".join(f"{k}={cfg[k] if cfg[k] is not None else ''}\n" for k in keys)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _int(cfg, key, minimum=None):
    raw = cfg.get(key)
    if raw is None or raw == "":
        raise UsageError(f"{key} required")
    try:
        val = int(raw)
    except ValueError:
        raise UsageError(f"{key}: expected an integer, got {raw!r}") from None
    if minimum is not None and val < minimum:
        raise UsageError(f"{key} must be >= {minimum}")
    return val


def _float(cfg, key):
    try:
        val = float(cfg[key])
    except (TypeError, ValueError):
        raise UsageError(f"{key}: expected a number, got {cfg[key]!r}") from None
    if not math.isfinite(val):
        raise UsageError(f"{key} must be finite")
    return val


def parse_grid(text: str) -> np.ndarray:
    try:
        lo, hi, pts = text.split(":")
        lo, hi, pts = float(lo), float(hi), int(pts)
    except ValueError:
        raise UsageError(f"grid: expected min:max:points, got {text!r}") from None
    if not hi > lo or pts < 2:
        raise UsageError("grid: need max > min and at least 2 points")
    return np.linspace(lo, hi, pts)


def build_config(cfg: dict, replicates: bool = True, allow_wide: bool = False) -> ExperimentConfig:
    p = _int(cfg, "p", 1)
    n = _int(cfg, "n", 1)
    try:
        ensemble = entry_distribution(cfg["ensemble"])
        pop = parse_population(cfg["population"], p)
        rule = BandwidthRule.parse(cfg["bandwidth"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    reps = _int(cfg, "replicates", 1) if replicates else 1
    seed = _int(cfg, "seed", 0)
    try:
        points = tuple(float(v) for v in cfg["points"].split(",") if v.strip())
    except ValueError:
        raise UsageError(f"points: expected comma-separated numbers, got {cfg['points']!r}") from None
    kwargs = {}
    if pop.kind == "diagonal":
        kwargs["measure"] = pop.measure
    elif pop.kind == "wishart":
        kwargs["wishart_entry"] = pop.entry
        kwargs["wishart_ratio"] = pop.n2 / p
    limit = None
    if cfg["limit"] not in ("auto", "none"):
        raise UsageError(f"limit: expected auto or none, got {cfg['limit']!r}")
    if cfg["limit"] == "auto" and pop.kind in ("identity", "diagonal"):
        h = DiscreteMeasure.point(1.0) if pop.kind == "identity" else pop.measure
        limit = SpectralLaw(p / n, h)
    try:
        return ExperimentConfig(ensemble=ensemble, population=pop.kind, p=p, n=n, replicates=reps,
                                bandwidth=rule, kernel=GAUSSIAN, eval_points=points, seed=seed,
                                limit=limit, allow_wide=allow_wide, **kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def fmt(x) -> str:
    return repr(float(x))


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else fmt(v) for v in row) + "\n")


def write_json(path: Path, payload) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_manifest(out: Path, command: str, cfg: dict, outputs, notes=()) -> dict:
    manifest = {
        "command": command,
        "config": {k: cfg[k] for k in COMMAND_KEYS[command]},
        "config_digest": config_digest(command, cfg),
        "seed": int(cfg["seed"]),
        "tool_version": __version__,
        "outputs": sorted(outputs) + ["manifest.json"],
        "notes": list(notes),
    }
    write_json(out / "manifest.json", manifest)
    return manifest


def _outdir(cfg) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_density(cfg: dict) -> int:
    config = build_config(cfg, replicates=False)
    out = _outdir(cfg)
    if cfg["grid"]:
        grid = parse_grid(cfg["grid"])
    elif config.limit is not None:
        lo, hi = config.limit.support_bounds()
        grid = np.linspace(lo - 0.1, hi + 0.1, 401)
    else:
        spec, _ = sample_spectrum(config, 0)
        grid = np.linspace(spec.eigenvalues[0] - 0.1, spec.eigenvalues[-1] + 0.1, 401)
    est = run_density_curve(config, grid)
    write_csv(out / "density_estimate.csv", ["x", "f_estimate"], zip(est.grid, est.values))
    outputs = ["density_estimate.csv"]
    notes = [f"bandwidth h={config.h()!r}"]
    if config.limit is not None:
        lim_grid = grid[grid != 0.0]
        lim = density_curve(config.limit, lim_grid)
        write_csv(out / "density_limit.csv", ["x", "f_limit"], zip(lim.grid, lim.values))
        outputs.append("density_limit.csv")
    else:
        notes.append("limit law has no closed form; no limit curve written")
        print("note: limit law has no closed form; no limit curve written", file=sys.stderr)
    write_manifest(out, "density", cfg, outputs, notes)
    return EXIT_OK


def cmd_mse(cfg: dict) -> int:
    config = build_config(cfg)
    out = _outdir(cfg)
    table = run_mse_experiment(config)
    rows = [(x, m, table.mode, str(table.replicates)) for x, m in zip(table.eval_points, table.mse)]
    write_csv(out / "mse.csv", ["x", "mse", "mode", "replicates"], rows)
    write_manifest(out, "mse", cfg, ["mse.csv"], [f"bandwidth h={config.h()!r}"])
    return EXIT_OK


def cmd_rate(cfg: dict) -> int:
    config = build_config(cfg)
    try:
        n_values = [int(v) for v in cfg["n_values"].split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"n_values: expected comma-separated integers, got {cfg['n_values']!r}") from None
    try:
        report = rate_check(config, n_values)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = _outdir(cfg)
    write_csv(out / "rate.csv", ["n", "mean_distance"], ((str(n), d) for n, d in zip(report.n_values, report.distances)))
    write_manifest(out, "rate", cfg, ["rate.csv"], [f"fitted_exponent={report.fitted_exponent!r}"])
    return EXIT_OK


def cmd_recover(cfg: dict) -> int:
    p, n = _int(cfg, "p", 1), _int(cfg, "n", 1)
    if not p < n:
        raise UsageError("recovery requires c in (0,1)")
    cfg = dict(cfg, limit="none")
    config = build_config(cfg, replicates=False)
    contour = Contour(im=_float(cfg, "contour_im"))
    spec, h_n = sample_spectrum(config, 0)
    result = recover_population(KdeSource(spec, config.kernel, config.h()), config.c, contour)
    oracle = h_n.moment(2)
    report = {
        "p": p,
        "n": n,
        "c": config.c,
        "bandwidth": config.h(),
        "h_moments": list(result.h_moments),
        "tr_t2_over_n": result.tr_t2_over_n,
        "oracle_tr_t2_over_n": oracle,
        "relative_error": abs(result.tr_t2_over_n - oracle) / oracle,
        "oracle_note": "oracle is tr(T^2)/p of the sampled population",
        "diagnostics": result.diagnostics,
    }
    out = _outdir(cfg)
    write_json(out / "recover.json", report)
    write_manifest(out, "recover", cfg, ["recover.json"])
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_sir(cfg: dict) -> int:
    sigma2 = _float(cfg, "sigma2")
    p1 = _float(cfg, "p1")
    if not sigma2 > 0:
        raise UsageError("sigma2 must be > 0")
    if not p1 > 0:
        raise UsageError("p1 must be > 0")
    config = build_config(cfg, replicates=False)
    spec, _ = sample_spectrum(config, 0)
    estimate = mmse_sir_limit(KdeSource(spec, config.kernel, config.h()), sigma2, p1)
    report = {"sigma2": sigma2, "p1": p1, "p": config.p, "n": config.n,
              "kernel_estimate": estimate, "limit_value": None}
    if config.limit is not None:
        report["limit_value"] = mmse_sir_limit(LawSource(config.limit), sigma2, p1)
        report["difference"] = estimate - report["limit_value"]
    out = _outdir(cfg)
    write_json(out / "sir.json", report)
    write_manifest(out, "sir", cfg, ["sir.json"])
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_recipe(name: str) -> int:
    if name not in RECIPES:
        raise UsageError(f"unknown recipe {name!r}; choose from {', '.join(RECIPES)}")
    command, values, note = RECIPES[name]
    print(f"# {note}")
    print(f"# run: spectrakde {command} --config {name}.cfg --out out/{name}")
    for key in sorted(values):
        print(f"{key}={values[key]}")
    return EXIT_OK


def _add_common(sp: argparse.ArgumentParser, *extra: str) -> None:
    sp.add_argument("--config", help="key=value config file; flags override it")
    sp.add_argument("--ensemble", choices=["exp", "bion"])
    sp.add_argument("--population", help="identity | diagonal:LOC=MASS,... | wishart:ENS:RATIO")
    sp.add_argument("--p", type=str)
    sp.add_argument("--n", type=str)
    sp.add_argument("--seed", type=str)
    sp.add_argument("--out", help="output directory")
    for name in extra:
        flag = "--" + name.replace("_", "-")
        sp.add_argument(flag, dest=name, type=str)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spectrakde", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("density", help="kernel density curve and its limit"),
                "bandwidth", "grid", "limit")
    _add_common(sub.add_parser("mse", help="pointwise MSE over replicates"),
                "replicates", "bandwidth", "points", "limit")
    _add_common(sub.add_parser("rate", help="Kolmogorov distance decay in n"),
                "replicates", "n_values")
    _add_common(sub.add_parser("recover", help="population moments from the kernel estimate"),
                "bandwidth", "contour_im")
    _add_common(sub.add_parser("sir", help="MMSE receiver SIR functional"),
                "bandwidth", "sigma2", "p1", "limit")
    rp = sub.add_parser("recipe", help="print a full-scale reproduction config")
    rp.add_argument("name", help=", ".join(RECIPES))
    return parser


COMMANDS = {"density": cmd_density, "mse": cmd_mse, "rate": cmd_rate,
            "recover": cmd_recover, "sir": cmd_sir}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "recipe":
            return cmd_recipe(args.name)
        cfg = resolve(args)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, EigenFailure, RecoveryError, QuadratureError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
