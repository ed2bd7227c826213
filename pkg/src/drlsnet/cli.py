"""Command-line entry point: run, sweep, and check experiment configs.

Exit codes: 0 success, 1 validation failure, 2 numeric failure,
3 acceptance-threshold breach in `run --check-acceptance` mode.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, config_to_text, parse_config, resolve_config
from .filters import NumericalBlowupError
from .harness import (ExcludedRunThresholdError, Trajectory,
                      compare_theory_empirical, run_ensemble, to_db)
from .network import TopologyError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERIC = 2
EXIT_ACCEPTANCE = 3

CSV_COLUMNS = ("iteration", "msd_rls_empirical_db", "msd_drls_empirical_db",
               "msd_drls_theory_db", "mean_err_norm_theory")


def _fmt(v: float) -> str:
    return f"{v:.12g}"


def emit_csv(traj: Trajectory, path) -> None:
    """Write the per-iteration trajectory with the fixed column contract."""
    cols = {
        "msd_rls_empirical_db": to_db(traj.msd_empirical["rls"])
        if "rls" in traj.msd_empirical else None,
        "msd_drls_empirical_db": to_db(traj.msd_empirical["drls"])
        if "drls" in traj.msd_empirical else None,
        "msd_drls_theory_db": to_db(traj.msd_theory)
        if traj.msd_theory is not None else None,
        "mean_err_norm_theory": traj.mean_err_norm_theory,
    }
    lines = [",".join(CSV_COLUMNS)]
    for n in range(traj.iterations):
        row = [str(n + 1)]
        for name in CSV_COLUMNS[1:]:
            col = cols[name]
            row.append(_fmt(col[n]) if col is not None else "")
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def _deviation_report(traj: Trajectory) -> dict | None:
    if traj.msd_theory is None or "drls" not in traj.msd_empirical:
        return None
    N = traj.iterations
    steady = min(500, max(1, N // 4))
    lo = min(50, N)
    hi = min(500, N)
    return compare_theory_empirical(traj, transient_window=(lo, hi),
                                    steady_window=steady)


def run_experiment(cfg: ExperimentConfig, out_dir=None, *,
                   check_acceptance: bool = False,
                   steady_tol_db: float = 1.0,
                   transient_tol_db: float = 2.0,
                   label: str | None = None) -> int:
    """Execute one experiment and write trajectory CSV + metadata JSON."""
    out = cfg.values["output"]
    directory = Path(out_dir) if out_dir is not None else Path(out["directory"])
    directory.mkdir(parents=True, exist_ok=True)
    prefix = out["prefix"] if label is None else f"{out['prefix']}_{label}"

    started = time.perf_counter()
    traj = run_ensemble(
        cfg.build_combiner(), cfg.noise_variances(), cfg.build_profiles(),
        cfg.process_params(), cfg.values["algorithm"]["forgetting_factor"],
        cfg.values["algorithm"]["delta"], cfg.ensemble_spec(),
        guard=cfg.values["algorithm"]["guard"],
        inverse_delta_init=cfg.values["algorithm"]["ephi_init"] == "inverse_delta",
        snapshot_every=out["snapshot_every"],
        config_echo=cfg.resolved_dict(),
    )
    runtime = time.perf_counter() - started

    csv_path = directory / f"{prefix}_trajectory.csv"
    emit_csv(traj, csv_path)

    report = _deviation_report(traj)
    metadata = {
        "version": __version__,
        "resolved_config": cfg.resolved_dict(),
        "resolved_config_text": config_to_text(cfg),
        "master_seed": traj.master_seed,
        "runtime_s": runtime,
        "runs_effective": traj.runs_effective,
        "excluded_runs": {a: [list(t) for t in v]
                          for a, v in traj.excluded_runs.items()},
        "deviation_report_db": report,
        "outputs": {"trajectory_csv": str(csv_path)},
    }
    if traj.snapshots:
        snap_path = directory / f"{prefix}_snapshots.npz"
        np.savez(snap_path, **{
            f"{a}_{key}": np.asarray(val)
            for a, snap in traj.snapshots.items()
            for key, val in snap.items()})
        metadata["outputs"]["snapshots_npz"] = str(snap_path)
    if out["plot_script"]:
        plot_path = directory / f"{prefix}_plot.py"
        plot_path.write_text(_plot_script(csv_path.name))
        metadata["outputs"]["plot_script"] = str(plot_path)
    (directory / f"{prefix}_metadata.json").write_text(
        json.dumps(metadata, indent=2, sort_keys=True) + "\n")

    if check_acceptance:
        if report is None:
            print("acceptance check needs both theory and empirical drls curves",
                  file=sys.stderr)
            return EXIT_ACCEPTANCE
        ok = (report["steady_mean_abs_db"] <= steady_tol_db
              and report["transient_mean_abs_db"] <= transient_tol_db)
        print(f"theory/empirical deviation: steady {report['steady_mean_abs_db']:.3f} dB "
              f"(tol {steady_tol_db}), transient {report['transient_mean_abs_db']:.3f} dB "
              f"(tol {transient_tol_db}) -> {'PASS' if ok else 'FAIL'}")
        if not ok:
            return EXIT_ACCEPTANCE
    return EXIT_OK


def _plot_script(csv_name: str) -> str:
    return f'''#!/usr/bin/env python3
"""Plot the MSD trajectories from {csv_name} (generated file)."""
import csv
from pathlib import Path
import matplotlib.pyplot as plt

rows = list(csv.DictReader(Path(__file__).with_name("{csv_name}").open()))
it = [int(r["iteration"]) for r in rows]
for col, style in [("msd_rls_empirical_db", "-"),
                   ("msd_drls_empirical_db", "-"),
                   ("msd_drls_theory_db", "--")]:
    vals = [(i, float(r[col])) for i, r in zip(it, rows) if r[col]]
    if vals:
        plt.plot([v[0] for v in vals], [v[1] for v in vals], style, label=col)
plt.xlabel("iteration n")
plt.ylabel("MSD (dB)")
plt.legend()
plt.grid(True, alpha=0.4)
plt.tight_layout()
plt.savefig(Path(__file__).with_suffix(".png"), dpi=150)
print("wrote", Path(__file__).with_suffix(".png"))
'''


def _apply_override(cfg_raw: dict, dotted: str, value: str) -> None:
    section, _, key = dotted.partition(".")
    if not key:
        raise ConfigError(f"sweep parameter must be section.key, got {dotted!r}")
    cfg_raw.setdefault(section, {})[key] = value


def _raw_from_file(path) -> dict:
    import configparser
    parser = configparser.ConfigParser(interpolation=None)
    if not parser.read(path):
        raise ConfigError(f"cannot read config file {path}")
    return {s: dict(parser.items(s)) for s in parser.sections()}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="drlsnet",
        description="Diffusion RLS transient analysis: simulate, iterate the "
                    "theoretical models, and compare.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a single experiment")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="override output directory")
    p_run.add_argument("--check-acceptance", action="store_true",
                       help="exit 3 if theory/empirical deviation exceeds tolerance")
    p_run.add_argument("--steady-tol-db", type=float, default=1.0)
    p_run.add_argument("--transient-tol-db", type=float, default=2.0)

    p_sweep = sub.add_parser("sweep", help="run one experiment per value of a parameter")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--param", required=True, help="dotted key, e.g. signal.period")
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.add_argument("--out", help="override output directory")

    p_check = sub.add_parser("check", help="validate a config without running")
    p_check.add_argument("config")

    args = ap.parse_args(argv)
    try:
        if args.command == "check":
            cfg = parse_config(args.config)
            print(config_to_text(cfg))
            return EXIT_OK
        if args.command == "run":
            cfg = parse_config(args.config)
            return run_experiment(cfg, out_dir=args.out,
                                  check_acceptance=args.check_acceptance,
                                  steady_tol_db=args.steady_tol_db,
                                  transient_tol_db=args.transient_tol_db)
        if args.command == "sweep":
            raw = _raw_from_file(args.config)
            status = EXIT_OK
            for value in args.values.split(","):
                value = value.strip()
                raw_i = {s: dict(kv) for s, kv in raw.items()}
                _apply_override(raw_i, args.param, value)
                cfg = resolve_config(raw_i, source=f"{args.config} [{args.param}={value}]")
                key = args.param.split(".")[-1]
                status = max(status, run_experiment(cfg, out_dir=args.out,
                                                    label=f"{key}={value}"))
            return status
    except (ConfigError, TopologyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalBlowupError, ExcludedRunThresholdError, RuntimeError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
