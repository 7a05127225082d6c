"""Command-line front end: configured runs, identity verification, the
measure-lemma sweep, decay fits, bootstrap monitoring, and report
regeneration.

Every subcommand exits nonzero iff some emitted verdict fails.  The
ANISO_SEED environment variable overrides the config seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import constants as const
from . import harness as H
from .cutoffs import PhaseSetSpec, skl_measure_mc, measure_lemma_sweep


def _load_config(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _seed_override():
    raw = os.environ.get("ANISO_SEED")
    return int(raw) if raw else None


def _load_frozen():
    try:
        return const.load_constants()
    except FileNotFoundError:
        return None


def _print_verdict(verdict: dict):
    for cid in sorted(verdict):
        entry = verdict[cid]
        if entry.get("pass") is None:
            tag = "[----]"
        else:
            tag = "[PASS]" if entry["pass"] else "[FAIL]"
        val, bound = entry.get("value"), entry.get("bound")
        detail = ""
        if val is not None:
            detail = f"  value={val:.6g}"
            if bound is not None:
                detail += f"  bound={bound:.6g}"
        print(f"{tag} {cid}{detail}")


_COLUMN_ATTRS = {"E": "energy", "K": "point_sup", "W": "spectral_sup",
                 "N_high": "nonlin_high", "N_low": "nonlin_low"}


def _column_series(rows, column: str):
    """(t, value) pairs for a diagnostics CSV column name like K_1 or cone_2_3."""
    if column.startswith("cone_"):
        _, comp, bin_idx = column.split("_")
        ci, bi = int(comp) - 1, int(bin_idx)
        return [(row.t, row.cone_profile[ci][bi]) for row in rows
                if ci < len(row.cone_profile) and bi < len(row.cone_profile[ci])]
    stem, _, comp = column.rpartition("_")
    attr = _COLUMN_ATTRS.get(stem)
    if attr is None:
        raise ValueError(f"unknown diagnostics column {column!r}")
    ci = int(comp) - 1
    return [(row.t, getattr(row, attr)[ci]) for row in rows
            if ci < len(getattr(row, attr))]


def _apply_analysis(run: H.RunResult):
    """Populate monitors/fits/checks from the config's analysis section."""
    analysis = run.config.get("analysis", {})
    eps0 = float(run.config.get("system", {}).get("epsilon0", 1e-3))
    delta = run.diagnostics.delta
    rows = [r if isinstance(r, H.DiagnosticsRow) else H.DiagnosticsRow.from_dict(r)
            for r in run.trajectory.rows]
    for mode in analysis.get("monitors", []):
        rep = H.bootstrap_monitor(run.trajectory, eps0, delta, mode)
        run.monitors.append(rep)
        cid = "bootstrap_stability" if mode == "thm3" else "l1_data_bootstrap"
        run.checks[cid] = {"pass": rep["pass"], "value": rep["sup"],
                           "bound": rep["bound"]}
    for fit_cfg in analysis.get("fits", []):
        series = _column_series(rows, fit_cfg["column"])
        window = tuple(fit_cfg["window"]) if "window" in fit_cfg else None
        fit = H.decay_fit(series, window)
        name = fit_cfg.get("name", fit_cfg["column"])
        run.fits[name] = fit
        if "expect" in fit_cfg:
            tol = float(fit_cfg.get("tolerance", 0.1))
            ok = abs(fit.exponent - float(fit_cfg["expect"])) <= tol
            cid = fit_cfg.get("check", name)
            run.checks[cid] = {"pass": bool(ok), "value": fit.exponent,
                               "bound": float(fit_cfg["expect"]),
                               "tolerance": tol}
    return run


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    run = H.run_configured(cfg, _seed_override())
    _apply_analysis(run)
    out = args.out or os.path.join("runs", run.hash[:12])
    paths = H.emit_report(run, out, constants=_load_frozen())
    verdict = json.load(open(paths["verdict"]))
    _print_verdict(verdict)
    print(f"report: {out}")
    return 1 if H.verdict_failures(verdict) else 0


def cmd_verify_identities(args) -> int:
    cfg = _load_config(args.config) if args.config else {}
    icfg = cfg.get("identities", {})
    reports = H.identity_battery(
        n=int(icfg.get("n", 48)),
        box=float(icfg.get("box", 16.0)),
        t=float(icfg.get("t", 4.0)),
        seed=int(_seed_override() or icfg.get("seed", 0)))
    frozen = _load_frozen()
    if frozen is not None and not args.skip_calibration:
        measured = const.run_calibration(fast=True)["values"]
        slack = frozen.get("slack", const.DEFAULT_SLACK)
        for name, value in measured.items():
            stored = frozen["values"][name]
            reports.append({
                "check": f"regression_{name}",
                "resolution": None,
                "lhs": value,
                "rhs": stored,
                "residual": max(0.0, value - stored * (1.0 + slack)),
                "constant": stored,
                "tolerance": 0.0,
                "pass": bool(value <= stored * (1.0 + slack)),
            })
    failed = [r for r in reports if not r["pass"]]
    for r in reports:
        tag = "[PASS]" if r["pass"] else "[FAIL]"
        print(f"{tag} {r['check']:28s} residual={r['residual']:.3e}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "identities.json"), "w") as fh:
            json.dump(reports, fh, sort_keys=True, indent=2)
            fh.write("\n")
        print(f"report: {args.out}/identities.json")
    return 1 if failed else 0


def cmd_measure_sweep(args) -> int:
    cfg = _load_config(args.config) if args.config else {}
    mcfg = cfg.get("measure", {})
    k_lo, k_hi = mcfg.get("k_range", [-6, 6])
    l_lo, l_hi = mcfg.get("l_range", [-40, 2])
    betas = tuple(mcfg.get("betas", (0.0, 0.3, 0.5, 0.9, 1.0, 1.5, 10.0)))
    mus = tuple(mcfg.get("mus", (1, -1)))
    rows, max_ratio = measure_lemma_sweep(
        k_range=range(k_lo, k_hi + 1), l_range=range(l_lo, l_hi + 1),
        betas=betas, mus=mus)

    checks = []
    frozen = _load_frozen()
    if frozen is not None:
        bound = frozen["values"]["C_measure"] * (1.0 + frozen.get("slack", 0.05))
        checks.append(("ratio_bound", max_ratio <= bound, max_ratio, bound))
    else:
        checks.append(("ratio_finite", math.isfinite(max_ratio), max_ratio, None))

    mc_samples = int(mcfg.get("mc_samples", args.mc_samples))
    mc_summary = None
    if mc_samples > 0:
        rng = np.random.default_rng(int(_seed_override() or mcfg.get("seed", 0)))
        cells = [r for r in rows if r["measure_quad"] > 0]
        idx = rng.choice(len(cells), size=min(50, len(cells)), replace=False)
        agree, worst_z = 0, 0.0
        for j in idx:
            r = cells[int(j)]
            spec = PhaseSetSpec(k=r["k"], l=r["l"], t=1.0,
                                x=(0.0, 0.0, float(r["beta"])), mu=r["mu"])
            est, err = skl_measure_mc(spec, mc_samples,
                                      seed=int(rng.integers(2**31)))
            z = abs(est - r["measure_quad"]) / max(err, 1e-12)
            worst_z = max(worst_z, z)
            agree += z <= 3.0
        mc_summary = {"cells": len(idx), "agree_3sigma": int(agree),
                      "worst_z": worst_z}
        checks.append(("mc_agreement", agree == len(idx), worst_z, 3.0))

    out = args.out or "measure-sweep"
    os.makedirs(out, exist_ok=True)
    cols = ["k", "l", "beta", "mu", "measure_quad", "measure_mc",
            "mc_stderr", "ratio"]
    with open(os.path.join(out, "sweep.csv"), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols)
        writer.writeheader()
        writer.writerows(rows)
    summary = {
        "max_ratio": max_ratio,
        "cells": len(rows),
        "mc": mc_summary,
        "checks": {name: {"pass": bool(ok), "value": val, "bound": bnd}
                   for name, ok, val, bnd in checks},
    }
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    for name, ok, val, bnd in checks:
        tag = "[PASS]" if ok else "[FAIL]"
        print(f"{tag} {name}  value={val:.6g}" +
              (f"  bound={bnd:.6g}" if bnd is not None else ""))
    print(f"report: {out}")
    return 0 if all(ok for _, ok, _, _ in checks) else 1


def cmd_decay_fit(args) -> int:
    with open(args.csv, newline="") as fh:
        reader = csv.DictReader(fh)
        series = []
        for row in reader:
            if args.col not in row:
                raise SystemExit(f"column {args.col!r} not in {args.csv}")
            series.append((float(row["t"]), float(row[args.col])))
    window = tuple(args.window) if args.window else None
    try:
        fit = H.decay_fit(series, window)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(fit.as_dict(), indent=2, sort_keys=True))
    return 0


def cmd_bootstrap(args) -> int:
    cfg = _load_config(args.config)
    run = H.run_configured(cfg, _seed_override())
    eps0 = float(cfg.get("system", {}).get("epsilon0", 1e-3))
    rep = H.bootstrap_monitor(run.trajectory, eps0, run.diagnostics.delta,
                              args.mode)
    run.monitors.append(rep)
    cid = "bootstrap_stability" if args.mode == "thm3" else "l1_data_bootstrap"
    run.checks[cid] = {"pass": rep["pass"], "value": rep["sup"],
                       "bound": rep["bound"]}
    out = args.out or os.path.join("runs", run.hash[:12])
    H.emit_report(run, out, constants=_load_frozen())
    tag = "[PASS]" if rep["pass"] else "[FAIL]"
    print(f"{tag} {cid}  sup={rep['sup']:.6g}  bound={rep['bound']:.6g}"
          f"  margin={rep['margin']:.3g}")
    if rep["first_violation"] is not None:
        print(f"first violation at t = {rep['first_violation']}")
    print(f"report: {out}")
    return 0 if rep["pass"] else 1


def cmd_report(args) -> int:
    run_dir = args.run_dir
    manifest = _load_config(os.path.join(run_dir, "manifest.json"))
    csv_path = os.path.join(run_dir, "diagnostics.csv")
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        columns = reader.fieldnames or []
        raw = list(reader)
    plots_dir = os.path.join(run_dir, "plots")
    os.makedirs(plots_dir, exist_ok=True)
    groups = {"E": [], "K": [], "W": [], "N_high": [], "N_low": []}
    for col in columns:
        stem, _, _ = col.rpartition("_")
        if stem in groups:
            groups[stem].append(col)
    for stem, cols in groups.items():
        series = []
        for col in cols:
            pts = [(float(r["t"]), float(r[col])) for r in raw]
            series.append((col, pts))
        if series:
            H._svg_loglog(series, f"{stem}(t)",
                          os.path.join(plots_dir, f"{stem}_replot.svg"))
    verdict_path = os.path.join(run_dir, "verdict.json")
    if os.path.exists(verdict_path):
        verdict = _load_config(verdict_path)
        _print_verdict(verdict)
        failures = H.verdict_failures(verdict)
    else:
        failures = []
    print(f"config hash: {manifest.get('config_sha256', '?')}")
    print(f"replotted {run_dir}/plots")
    return 1 if failures else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="anisowave",
        description="anisotropic wave-system simulation and verification lab")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a configured run and emit reports")
    p.add_argument("config")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify-identities",
                       help="run the identity battery and constant regression")
    p.add_argument("config", nargs="?", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--skip-calibration", action="store_true")
    p.set_defaults(func=cmd_verify_identities)

    p = sub.add_parser("measure-sweep",
                       help="sweep the stationary-set measure bound")
    p.add_argument("config", nargs="?", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--mc-samples", type=int, default=0)
    p.set_defaults(func=cmd_measure_sweep)

    p = sub.add_parser("decay-fit", help="log-log fit of a diagnostics column")
    p.add_argument("csv")
    p.add_argument("--col", required=True)
    p.add_argument("--window", nargs=2, type=float, default=None)
    p.set_defaults(func=cmd_decay_fit)

    p = sub.add_parser("bootstrap", help="run and monitor a bootstrap functional")
    p.add_argument("config")
    p.add_argument("--mode", choices=("thm3", "thm4"), required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("report", help="regenerate plots/verdicts from a run dir")
    p.add_argument("run_dir")
    p.set_defaults(func=cmd_report)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
