"""Command-line driver: run single simulations, refinement sweeps, property
checks, and geometry convergence reports.

Exit codes: 0 ok, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .analysis import CSV_COLUMNS, eoc_table, geometry_convergence_report, write_csv
from .solver import PRESETS, RunConfig, run_simulation

CONFIG_KEYS = {f.name for f in dataclasses.fields(RunConfig)}


class ConfigError(Exception):
    pass


def load_config(path=None, preset=None, overrides=None) -> RunConfig:
    data = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; available: {sorted(PRESETS)}")
        data.update(PRESETS[preset])
    if path is not None:
        try:
            with open(path, "rb") as f:
                raw = f.read()
        except OSError as err:
            raise ConfigError(f"cannot read config {path}: {err}") from err
        if path.endswith(".toml"):
            try:
                import tomli  # type: ignore

                loaded = tomli.loads(raw.decode())
            except ImportError as err:
                raise ConfigError("TOML configs need the 'tomli' package on Python 3.10") from err
            except Exception as err:
                raise ConfigError(f"malformed TOML config {path}: {err}") from err
        else:
            try:
                loaded = json.loads(raw.decode())
            except json.JSONDecodeError as err:
                raise ConfigError(f"malformed config {path}:{err.lineno}: {err.msg}") from err
        if not isinstance(loaded, dict):
            raise ConfigError("config root must be a table/object")
        data.update(loaded)
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        cfg = RunConfig(**data)
        cfg.resolved()
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err)) from err
    return cfg


def _add_common(p):
    p.add_argument("--config", help="JSON (or TOML) config file with RunConfig fields")
    p.add_argument("--preset", choices=sorted(PRESETS), help="named benchmark preset")
    p.add_argument("--level", type=int)
    p.add_argument("--scheme", choices=["lmm_dir", "lmm_cov", "pm"])
    p.add_argument("--klambda", type=int, dest="k_lambda")
    p.add_argument("--kg", type=int, dest="k_g")
    p.add_argument("--T", type=float)
    p.add_argument("--dt0", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--benchmark", choices=["moving_sphere", "oscillating_sphere"])
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--vtu-every", type=int, default=0, dest="vtu_every")


def _overrides(args):
    keys = ["level", "scheme", "k_lambda", "k_g", "T", "dt0", "mu", "benchmark", "threads", "vtu_every"]
    return {k: getattr(args, k, None) for k in keys}


def _config_dict(cfg: RunConfig):
    return {f.name: getattr(cfg, f.name) for f in dataclasses.fields(cfg)}


def cmd_run(args):
    cfg = load_config(args.config, args.preset, _overrides(args))
    out = args.out
    os.makedirs(out, exist_ok=True)
    cfg = dataclasses.replace(cfg, out_dir=out)
    stepper, records, report = run_simulation(cfg)
    summary = {
        "config": _config_dict(cfg),
        "resolved": {"dt": stepper.cfg.dt, "T": stepper.cfg.T, "mu": stepper.cfg.mu,
                     "h": report.h, "n_steps": stepper.n_steps},
        "errors": report.as_dict(),
        "max_solver_residual": max(r["solver_residual"] for r in records),
        "max_constraint_residual": max(r["constraint_residual"] for r in records),
    }
    with open(os.path.join(out, "summary.json"), "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
    with open(os.path.join(out, "steps.csv"), "w") as f:
        f.write("step,t,solver_residual,constraint_residual\n")
        for i, r in enumerate(records):
            f.write(f"{i},{r['t']:.12g},{r['solver_residual']:.6e},{r['constraint_residual']:.6e}\n")
    write_csv(os.path.join(out, "errors.csv"), [report])
    print(f"run complete: {out}/summary.json")
    for c in CSV_COLUMNS:
        print(f"  {c} = {getattr(report, c)}")
    return 0


def cmd_sweep(args):
    cfg = load_config(args.config, args.preset, _overrides(args))
    levels = [int(x) for x in args.levels.split(",")]
    if any(levels[i + 1] != levels[i] + 1 for i in range(len(levels) - 1)):
        raise ConfigError("sweep levels must be contiguous")
    os.makedirs(args.out, exist_ok=True)
    reports = []
    for lvl in levels:
        c = dataclasses.replace(cfg, level=lvl, dt=None)
        stepper, records, report = run_simulation(c)
        reports.append(report)
        print(f"level {lvl}: h={report.h:.4f} dt={report.dt:.6g} e_u_ah={report.e_u_ah:.4e} "
              f"e_p={report.e_p_l2l2:.4e} ({report.walltime_s:.1f}s)")
    conv = os.path.join(args.out, "convergence.csv")
    write_csv(conv, reports)
    table = eoc_table(reports)
    eoc_path = os.path.join(args.out, "eoc.csv")
    with open(eoc_path, "w") as f:
        if table:
            cols = list(table[0].keys())
            f.write(",".join(cols) + "\n")
            for row in table:
                f.write(",".join(str(row[c]) for c in cols) + "\n")
    print(f"wrote {conv} and {eoc_path}")
    for row in table:
        print("  EOC", row)
    return 0


def cmd_check(args):
    """Property suites: forms brute force, transport, Leray, geometric orders."""
    from . import checks

    results = checks.run_all(verbose=True)
    failed = [name for name, ok, _ in results if not ok]
    print()
    for name, ok, detail in results:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return 0 if not failed else 1


def cmd_geom_report(args):
    from .geometry import make_surface

    surface = make_surface(args.benchmark or "moving_sphere")
    levels = [int(x) for x in args.levels.split(",")]
    rep = geometry_convergence_report(surface, args.k_g or 2, levels, t=args.t)
    for row in rep["rows"]:
        print(f"level {row['level']}: h={row['h']:.4f} normal_err={row['normal_err']:.4e} area_err={row['area_err']:.4e}")
    if rep["normal_order"]:
        print("normal orders:", [f"{x:.2f}" for x in rep["normal_order"]])
        print("area orders:  ", [f"{x:.2f}" for x in rep["area_order"]])
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="surfns", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one configured simulation")
    _add_common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="refinement sweep with EOC table")
    _add_common(p)
    p.add_argument("--levels", default="1,2,3", help="comma-separated contiguous levels")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check", help="run the standing property suites")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("geom-report", help="geometric convergence report")
    p.add_argument("--benchmark", choices=["moving_sphere", "oscillating_sphere"])
    p.add_argument("--kg", type=int, dest="k_g", default=2)
    p.add_argument("--levels", default="1,2,3")
    p.add_argument("--t", type=float, default=0.0)
    p.set_defaults(func=cmd_geom_report)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    np.random.seed(0)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except (RuntimeError, FloatingPointError) as err:
        print(f"runtime failure: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
