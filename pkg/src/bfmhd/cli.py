"""Command-line entry point: ``bfmhd {run,mms,sweep,dependence,report}``.

Exit status is 0 iff every contract checked by the subcommand passed, 1 when a
contract failed and 2 for unusable input.  Each subcommand writes
``summary.json`` (machine-readable pass/fail) into its output directory.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.fft as sfft

from . import __version__
from .config import ConfigError, RunManifest, parse_config
from .diagnostics import MonitorRecord, absorbing_ball_radius, decay_envelope_check, monitor
from .integrator import Sink, run
from .io_store import COLUMNS, append_timeseries, read_snapshot, read_timeseries, write_snapshot
from .rhs import PhysParams
from .verification import MMSConfig, convergence_study, dependence_experiment, make_ic

log = logging.getLogger("bfmhd")

DIV_LIMIT = 1e-10
MEAN_B_LIMIT = 1e-13


class InputError(Exception):
    pass


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("MHDBFED_THREADS")
    return int(env) if env else 1


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=float) + "\n")


def _prepare(args, experiment: str) -> tuple[RunManifest, Path]:
    if not args.config:
        raise InputError("--config is required")
    manifest = parse_config(args.config, experiment=experiment, strict=args.strict, seed=args.seed, out_dir=args.out)
    out = Path(manifest.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    args.resolved_out = out
    manifest.command = ["bfmhd", *args.argv]
    meta = manifest.to_dict()
    meta["version"] = __version__
    _write_json(out / "manifest.json", meta)
    return manifest, out


def _simulate(manifest: RunManifest, params: PhysParams, out: Path, resume: Optional[str] = None):
    cfg = manifest.config
    series_path = out / "timeseries.csv"
    start_step, emit_initial = 0, True
    if resume:
        ic, _, meta = read_snapshot(resume, expect_N=cfg.grid.N, expect_params=params, with_metadata=True)
        start_step, emit_initial = int(meta.get("step", 0)), False
    else:
        ic = make_ic(cfg.ic, cfg.grid)
        if series_path.exists():
            series_path.unlink()
    records: list[MonitorRecord] = []

    def record(step, state):
        r = monitor(state, params)
        records.append(r)
        append_timeseries(r, series_path)

    sinks = [Sink(record, cfg.monitor_every)]
    if cfg.checkpoint_every:
        ck = out / "checkpoints"
        ck.mkdir(exist_ok=True)
        meta_base = {"manifest": manifest.to_dict()}

        def checkpoint(step, state):
            write_snapshot(state, params, ck / f"step_{step:08d}.bin", {**meta_base, "step": step})

        sinks.append(Sink(checkpoint, cfg.checkpoint_every))
    final = run(ic, params, cfg.time, sinks, start_step=start_step, emit_initial=emit_initial)
    if manifest.snapshot:
        write_snapshot(final, params, out / "final.bin", {"manifest": manifest.to_dict(), "step": None})
    return ic, final, records


def _trajectory_contracts(records: list[MonitorRecord], params: PhysParams, L: float) -> dict:
    E = np.array([r.E for r in records])
    mb = np.array([r.mean_b for r in records])
    out = {
        "div_residual": bool(max(max(r.div_u_res, r.div_b_res) for r in records) < DIV_LIMIT),
        "mean_b_conserved": bool(np.abs(mb - mb[0]).max() < MEAN_B_LIMIT),
        "energy_nonincreasing": bool(np.all(E[1:] <= E[:-1] * (1 + 1e-14))),
    }
    if params.a > 0 and params.alpha > 0.5 and len(records) >= 16 and not np.any(mb[0]):
        out["absorbing_envelope"] = decay_envelope_check(records, params, L).rigorous_pass
    return out


def cmd_run(args) -> int:
    manifest, out = _prepare(args, "run")
    params = manifest.config.physics
    params.check_simulation()
    ic, final, records = _simulate(manifest, params, out, args.resume)
    contracts = _trajectory_contracts(records, params, manifest.config.grid.L) if records else {}
    passed = all(contracts.values())
    summary = {"command": "run", "passed": passed, "contracts": contracts, "t_final": final.t}
    if records:
        summary.update(E_initial=records[0].E, E_final=records[-1].E)
    _write_json(out / "summary.json", summary)
    for k, v in contracts.items():
        print(f"{'PASS' if v else 'FAIL'} {k}")
    return 0 if passed else 1


def cmd_mms(args) -> int:
    manifest, out = _prepare(args, "mms")
    cfg, sec = manifest.config, manifest.sections.get("mms", {})
    if float(cfg.physics.alpha) not in (0.0, 1.0, 2.0):
        log.warning("manufactured solutions use integer alpha so the damping stays polynomial")
    kind = sec.get("kind", "both")
    reports = []
    if kind in ("temporal", "both"):
        base = MMSConfig(cfg.physics, cfg.grid.L, cfg.grid.N, t_end=sec.get("t_end", 0.5), rk_order=cfg.time.rk_order)
        reports.append(convergence_study("temporal", base, sec.get("dt_levels", [1e-2, 5e-3, 2.5e-3])))
    if kind in ("spatial", "both"):
        base = MMSConfig(
            cfg.physics,
            cfg.grid.L,
            dt=sec.get("spatial_dt", 2e-3),
            t_end=sec.get("spatial_t_end", 0.2),
            rk_order=cfg.time.rk_order,
            ref_N=sec.get("ref_N", 96),
            pair="smooth",
        )
        reports.append(convergence_study("spatial", base, sec.get("N_levels", [8, 16, 32])))
    if not reports:
        raise InputError(f"unknown mms kind {kind!r}")
    text = "\n\n".join(f"# {r.kind} convergence (nominal {r.nominal})\n{r.table()}" for r in reports)
    (out / "mms_report.txt").write_text(text + "\n")
    contracts = {f"{r.kind}_convergence": bool(r.passed) for r in reports}
    passed = all(contracts.values())
    _write_json(
        out / "summary.json",
        {
            "command": "mms",
            "passed": passed,
            "contracts": contracts,
            "reports": [{"kind": r.kind, "levels": r.levels, "errors": r.errors, "orders": r.orders} for r in reports],
        },
    )
    print(text)
    for k, v in contracts.items():
        print(f"{'PASS' if v else 'FAIL'} {k}")
    return 0 if passed else 1


def cmd_sweep(args) -> int:
    manifest, out = _prepare(args, "sweep")
    cfg, sec = manifest.config, manifest.sections.get("sweep", {})
    p0 = cfg.physics
    grid_vals = [sec.get(k, [getattr(p0, k)]) for k in ("alpha", "a", "nu", "kappa")]
    rows = []
    for i, (alpha, a, nu, kappa) in enumerate(itertools.product(*grid_vals)):
        params = PhysParams(nu, kappa, a, alpha)
        cell = out / f"cell_{i:03d}"
        cell.mkdir(exist_ok=True)
        sub = RunManifest(
            manifest.config_path, replace(cfg, physics=params), str(cell), manifest.seed, manifest.snapshot,
            sections={"sweep_cell": i}, command=manifest.command,
        )
        _write_json(cell / "manifest.json", {**sub.to_dict(), "version": __version__})
        _, _, records = _simulate(sub, params, cell)
        t = np.array([r.t for r in records])
        E = np.array([r.E for r in records])
        limsup = float(E[t >= t[0] + 0.75 * (t[-1] - t[0])].max())
        R2 = absorbing_ball_radius(params, cfg.grid.L) if alpha > 0.5 and min(a, nu, kappa) > 0 else float("nan")
        rows.append(dict(cell=i, alpha=alpha, a=a, nu=nu, kappa=kappa, R2=R2, limsup_E=limsup, E_final=E[-1], passed=bool(limsup <= R2)))
    header = "cell,alpha,a,nu,kappa,R2,limsup_E,E_final,pass"
    lines = [header] + [
        ",".join([str(r["cell"])] + [format(r[k], ".17g") for k in ("alpha", "a", "nu", "kappa", "R2", "limsup_E", "E_final")] + [str(int(r["passed"]))])
        for r in rows
    ]
    (out / "sweep_summary.csv").write_text("\n".join(lines) + "\n")
    passed = all(r["passed"] for r in rows)
    _write_json(out / "summary.json", {"command": "sweep", "passed": passed, "cells": rows})
    print("\n".join(lines))
    return 0 if passed else 1


def cmd_dependence(args) -> int:
    manifest, out = _prepare(args, "dependence")
    cfg, sec = manifest.config, manifest.sections.get("dependence", {})
    params = cfg.physics
    ic = make_ic(cfg.ic, cfg.grid)
    deltas = list(sec.get("deltas", [1e-3, 1e-4, 1e-5])) + [0.0]
    rep = dependence_experiment(
        ic, deltas, params, sec.get("t_end"), sec.get("dt"), cfg.time.rk_order, sec.get("seed", 12345)
    )
    (out / "dependence.txt").write_text(f"# T = {rep.t_end!r} dt = {rep.dt!r}\n{rep.table()}\n")
    contracts = {"delta_squared_scaling": bool(rep.passed), "zero_delta_identical": rep.separations[-1] == 0.0}
    passed = all(contracts.values())
    _write_json(
        out / "summary.json",
        {
            "command": "dependence",
            "passed": passed,
            "contracts": contracts,
            "deltas": rep.deltas,
            "separations": rep.separations,
            "ratio_changes": rep.ratio_changes,
            "warnings": manifest.warnings,
        },
    )
    print(rep.table())
    for k, v in contracts.items():
        print(f"{'PASS' if v else 'FAIL'} {k}")
    return 0 if passed else 1


def cmd_report(args) -> int:
    if not args.out:
        raise InputError("report needs --out DIR pointing at stored series")
    root = Path(args.out)
    files = sorted(root.rglob("timeseries.csv")) if root.is_dir() else []
    if not files:
        raise InputError(f"report: no timeseries.csv found under {root} (empty input)")
    summary = []
    for f in files:
        recs = read_timeseries(f)
        if not recs:
            raise InputError(f"report: {f} holds no records")
        dat = f.with_suffix(".dat")
        with open(dat, "w") as fh:
            fh.write("# " + " ".join(COLUMNS) + "\n")
            for r in recs:
                vals = [r.t, r.E, r.grad_u_sq, r.grad_b_sq, r.u_damp_norm, r.b_crit_norm, r.div_u_res, r.div_b_res, *r.mean_u, *r.mean_b]
                fh.write(" ".join("nan" if v is None else format(v, ".17g") for v in vals) + "\n")
        t = np.array([r.t for r in recs])
        E = np.array([r.E for r in recs])
        summary.append(
            {
                "series": str(f.relative_to(root)),
                "records": len(recs),
                "t_start": t[0],
                "t_end": t[-1],
                "E_initial": E[0],
                "E_final": E[-1],
                "E_final_quartile_max": float(E[t >= t[0] + 0.75 * (t[-1] - t[0])].max()),
            }
        )
    lines = ["# series records t_start t_end E_initial E_final E_final_quartile_max"]
    lines += [
        " ".join([s["series"], str(s["records"])] + [format(s[k], ".17g") for k in ("t_start", "t_end", "E_initial", "E_final", "E_final_quartile_max")])
        for s in summary
    ]
    (root / "report.txt").write_text("\n".join(lines) + "\n")
    _write_json(root / "summary.json", {"command": "report", "passed": True, "series": summary})
    print("\n".join(lines))
    return 0


COMMANDS = {"run": cmd_run, "mms": cmd_mms, "sweep": cmd_sweep, "dependence": cmd_dependence, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--out", metavar="DIR")
    common.add_argument("--seed", type=int, metavar="U64")
    common.add_argument("--threads", type=int, metavar="INT", help="FFT worker threads (env MHDBFED_THREADS)")
    common.add_argument("--strict", action="store_true", help="promote warnings to errors")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="bfmhd", description="Damped MHD pseudospectral simulator and verification harness")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", parents=[common], help="simulate with monitors")
    r.add_argument("--resume", metavar="CHECKPOINT", help="continue from a checkpoint written by a previous run")
    sub.add_parser("mms", parents=[common], help="manufactured-solution convergence study")
    sub.add_parser("sweep", parents=[common], help="parameter sweep vs absorbing-ball radius")
    sub.add_parser("dependence", parents=[common], help="continuous-dependence experiment")
    sub.add_parser("report", parents=[common], help="column data and summary from stored series")
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    args.resolved_out = None
    try:
        with sfft.set_workers(_threads(args)):
            return COMMANDS[args.command](args)
    except (InputError, ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        _failure_summary(args, "input", exc)
        return 2
    except RuntimeError as exc:
        print(f"failed: {exc}", file=sys.stderr)
        _failure_summary(args, "runtime", exc)
        return 1


def _failure_summary(args, kind: str, exc: Exception) -> None:
    out = args.resolved_out
    if out is None and args.out:
        out = Path(args.out)
    if out is None or (args.command == "report" and not out.is_dir()):
        return
    try:
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "summary.json", {"command": args.command, "passed": False, "error": kind, "message": str(exc)})
    except OSError:
        log.warning("could not write failure summary to %s", out)


if __name__ == "__main__":
    sys.exit(main())
