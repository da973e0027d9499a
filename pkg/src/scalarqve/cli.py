"""Command-line front end.

    scalarqve {mode,sweep,scan,semiclassical,validate} --config run.toml --out DIR

Exit codes: 0 success, 2 configuration error (nothing is written),
3 numerical failure, 4 partial failure in non-strict mode.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import warnings
from dataclasses import replace
from datetime import datetime, timezone

import numpy as np

from . import __version__
from . import io as sio
from .config import RunConfig, Task, load_config
from .errors import ConfigError, FlatProfileError, GridError, ScalarQVEError, SweepError
from .integrator import ORACLE, Formulation, solve_mode, solve_mode_all
from .qve import ModeCoordinates
from .field import build_potential
from .semiclassical import analyze
from .sweep import (GridTruncationWarning, MirrorAxis, MomentumGrid, azimuthal_profile,
                    compute_spectrum, dominant_azimuthal_mode, number_density,
                    parameter_scan, peak_ring_band, resolve_threads,
                    symmetry_residual)

logger = logging.getLogger("scalarqve")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_PARTIAL = 4

MANIFEST = "manifest.json"
VALIDATE_GRID = MomentumGrid((-1.0, 1.0, 32), (-1.0, 1.0, 32))


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class _Run:
    def __init__(self, config: RunConfig, out_dir, threads):
        self.config = config
        self.out = out_dir
        self.threads = threads
        self.artifacts = []
        self.summary = {}
        self.failures = []

    def path(self, name):
        self.artifacts.append(name)
        return os.path.join(self.out, name)

    def status(self):
        return EXIT_PARTIAL if self.failures else EXIT_OK


def _spectrum_summary(spec) -> dict:
    out = spec.summary()
    if not np.any(np.isfinite(spec.values)):
        return out
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", GridTruncationWarning)
        out["density"] = number_density(spec) if spec.converged else None
    out["grid_truncated"] = any(issubclass(w.category, GridTruncationWarning)
                                for w in caught)
    for axis in MirrorAxis:
        try:
            out[f"{axis.value}_residual"] = symmetry_residual(spec, axis)
        except GridError:
            out[f"{axis.value}_residual"] = None
    try:
        band = peak_ring_band(spec)
        out["peak_ring_band"] = list(band)
        out["dominant_mode"] = dominant_azimuthal_mode(azimuthal_profile(spec, band))
    except FlatProfileError:
        out["dominant_mode"] = "flat"
    except (GridError, ValueError) as exc:
        out["dominant_mode"] = None
        out["dominant_mode_note"] = str(exc)
    return out


def _write_spectrum(run: _Run, spec, stem="spectrum"):
    sio.write_spectrum_csv(spec, run.path(f"{stem}.csv"))
    if run.config.output.raster != "none":
        png = run.path(f"{stem}.png")
        sio.export_raster(spec, png, run.config.output.raster)
        run.artifacts.append(f"{stem}.png.json")
    if run.config.output.binary:
        sio.write_raster_bin(spec, run.path(f"{stem}.bin"))


def _task_mode(run: _Run):
    cfg = run.config
    mode = ModeCoordinates(cfg.mode.k, m=cfg.m, q=cfg.q)
    if cfg.mode.all_formulations:
        cmp = solve_mode_all(cfg.field, mode, cfg.solver)
        results = cmp.results
        run.summary["max_discrepancy"] = cmp.max_discrepancy
    else:
        results = {cfg.solver.formulation: solve_mode(cfg.field, mode, cfg.solver)}
    rows = {}
    for form, r in results.items():
        rows[form.value] = {"F_inf": r.F_inf, "invariant_drift": r.invariant_drift,
                            "n_steps": r.n_steps, "n_rejected": r.n_rejected,
                            "F_min": r.F_min, "tail_change": r.tail_change,
                            "max_step_ratio": r.max_step_ratio, "t_span": list(r.t_span)}
        if r.trajectory is not None:
            name = f"trajectory_{form.value}.csv"
            with open(run.path(name), "w") as fh:
                fh.write("t,F,constraint\n")
                for t, F, c in zip(r.trajectory.t, r.trajectory.F,
                                   r.trajectory.constraint):
                    fh.write(f"{sio.fmt(t)},{sio.fmt(F)},{sio.fmt(c)}\n")
    sio.write_json_atomic({"k": list(cfg.mode.k), "results": rows}, run.path("mode.json"))
    first = next(iter(results.values()))
    run.summary.update(peak_F=first.F_inf,
                       max_invariant_drift=max(r.invariant_drift for r in results.values()))


def _task_sweep(run: _Run):
    cfg = run.config
    spec = compute_spectrum(cfg.field, cfg.grid, cfg.solver, q=cfg.q, m=cfg.m,
                            threads=run.threads, strict=cfg.strict)
    run.failures.extend(spec.failures)
    _write_spectrum(run, spec)
    run.summary.update(_spectrum_summary(spec))


def _task_scan(run: _Run):
    cfg = run.config
    table = parameter_scan(cfg.field, cfg.scan.parameter, cfg.scan.values, cfg.grid,
                           cfg.solver, q=cfg.q, m=cfg.m, threads=run.threads)
    sio.write_scan_csv(table, run.path("scan.csv"))
    failed = [{"value": r.value, "reason": r.error} for r in table.rows if r.failed]
    if failed and cfg.strict:
        raise SweepError(f"{len(failed)} scan value(s) failed", failed)
    run.failures.extend(failed)
    ok = [r for r in table.rows if not r.failed]
    run.summary.update(
        parameter=table.parameter,
        density={sio.fmt(r.value): r.density for r in ok},
        peak_F=max((r.peak_F for r in ok), default=None),
    )


def _task_semiclassical(run: _Run):
    cfg = run.config
    sc = cfg.semiclassical
    table = build_potential(cfg.field)
    exact_settings = replace(ORACLE, formulation=Formulation.BOGOLIUBOV)
    rows = []
    for k in sc.momenta:
        mode = ModeCoordinates(k, m=cfg.m, q=cfg.q)
        row = {"kx": k[0], "ky": k[1], "kz": k[2], "pair_count": 0, "flagged": False}
        try:
            rep = analyze(cfg.field, mode, sc.region, sc.seeds, table)
        except ScalarQVEError as exc:
            if cfg.strict:
                raise
            logger.error("semiclassical analysis failed at k=%s: %s", k, exc)
            run.failures.append({"k": list(k), "reason": str(exc)})
            row["flagged"] = True
        else:
            row.update(pair_count=rep.n_pairs, K1=rep.K_values[0],
                       K2=rep.K_values[1] if rep.n_pairs > 1 else None,
                       alpha=rep.alpha, F_boson=rep.F_estimate_boson,
                       F_fermion=rep.F_estimate_fermion, flagged=rep.flagged)
        if sc.compare_exact:
            row["F_exact"] = solve_mode(cfg.field, mode, exact_settings).F_inf
        rows.append(row)
    sio.write_semiclassical_csv(rows, run.path("semiclassical.csv"))
    errs = [abs(math.log(r["F_exact"]) - math.log(r["F_boson"]))
            for r in rows if r.get("F_boson", 0) > 0 and r.get("F_exact", 0) > 0]
    run.summary.update(n_momenta=len(rows),
                       max_log_error=max(errs, default=None))


def _task_validate(run: _Run):
    cfg = run.config
    field = cfg.field
    settings = replace(cfg.solver, rel_tol=min(cfg.solver.rel_tol, ORACLE.rel_tol),
                       abs_tol=min(cfg.solver.abs_tol, ORACLE.abs_tol))
    checks = []

    def check(name, k, passed, value):
        checks.append({"check": name, "k": None if k is None else list(k), "pass": bool(passed), "value": value})

    for k in cfg.validate.momenta:
        mode = ModeCoordinates(k, m=cfg.m, q=cfg.q)
        cmp = solve_mode_all(field, mode, settings)
        F = cmp.results[Formulation.BOGOLIUBOV].F_inf
        check("constraint_drift", k, cmp.max_drift <= 1e-8, cmp.max_drift)
        check("formulation_agreement", k,
              cmp.max_discrepancy <= 1e-6 + 1e-6 * abs(F), cmp.max_discrepancy)
        f_min = min(r.F_min for r in cmp.results.values())
        check("positivity", k, f_min >= -1e-12, f_min)
        ratio = max(r.max_step_ratio for r in cmp.results.values())
        check("step_cap", k, ratio <= 1.0 + 1e-12, ratio)
        if field.is_zero():
            worst = max(abs(r.F_inf) for r in cmp.results.values())
            check("stationarity", k, worst == 0.0, worst)

    grid = cfg.grid or VALIDATE_GRID
    spec = compute_spectrum(field, grid, cfg.solver, q=cfg.q, m=cfg.m,
                            threads=run.threads, strict=False)
    run.failures.extend(spec.failures)
    f_min = float(np.nanmin(spec.values))
    check("spectrum_positivity", None, f_min >= -1e-12, f_min)
    if field.is_zero():
        check("spectrum_stationarity", None,
              bool(np.all(spec.values == 0.0)), float(np.nanmax(np.abs(spec.values))))
    sio.write_json_atomic({"checks": checks}, run.path("validate.json"))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GridTruncationWarning)
        density = number_density(spec) if spec.converged else None
    run.summary.update(all_pass=all(c["pass"] for c in checks),
                       n_checks=len(checks), density=density,
                       peak_F=spec.peak, grid=grid.to_dict())
    bad = [c for c in checks if not c["pass"]]
    if bad:
        for c in bad:
            logger.error("invariant %s failed at k=%s: %g", c["check"], c["k"], c["value"])
        raise ScalarQVEError(f"{len(bad)} invariant check(s) failed")


_TASKS = {
    Task.MODE: _task_mode,
    Task.SWEEP: _task_sweep,
    Task.SCAN: _task_scan,
    Task.SEMICLASSICAL: _task_semiclassical,
    Task.VALIDATE: _task_validate,
}


def run(config: RunConfig, out_dir, threads=0) -> int:
    """Execute the configured task, write artifacts and the manifest, and
    return the exit status."""
    os.makedirs(out_dir, exist_ok=True)
    r = _Run(config, out_dir, threads)
    started = _now()
    error = None
    try:
        _TASKS[config.task](r)
        status = r.status()
    except ScalarQVEError as exc:
        logger.error("%s", exc)
        error = str(exc)
        r.failures.extend(getattr(exc, "failures", None) or [])
        status = EXIT_NUMERICAL
    manifest = {
        "tool": "scalarqve",
        "version": __version__,
        "task": config.task.value,
        "config": config.echo(),
        "config_hash": config.field.config_hash(),
        "started": started,
        "finished": _now(),
        "threads": threads,
        "exit_status": status,
        "error": error,
        "summary": r.summary,
        "failures": r.failures,
        "artifacts": [{"name": a, "sha256": sio.file_digest(os.path.join(out_dir, a))}
                      for a in r.artifacts if os.path.exists(os.path.join(out_dir, a))],
    }
    sio.write_json_atomic(manifest, os.path.join(out_dir, MANIFEST))
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scalarqve",
        description="Scalar pair creation spectra in elliptically polarized pulses.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="task", required=True)
    helps = {
        Task.MODE: "integrate one momentum mode",
        Task.SWEEP: "momentum spectrum on a grid",
        Task.SCAN: "density versus one pulse parameter",
        Task.SEMICLASSICAL: "turning-point report",
        Task.VALIDATE: "invariant suite",
    }
    for task, text in helps.items():
        p = sub.add_parser(task.value, help=text)
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--out", help="output directory (overrides 'out' in the config)")
        p.add_argument("--threads", type=int, default=0,
                       help="worker threads, 0 = auto (SCALARQVE_THREADS)")
        p.add_argument("--strict", action="store_true",
                       help="treat any failed node as a numerical failure")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        config = load_config(args.config, args.task)
        if args.strict:
            config = replace(config, strict=True)
        out_dir = args.out or config.out
        if not out_dir:
            raise ConfigError("no output directory: pass --out or set 'out'")
        threads = resolve_threads(args.threads)
    except ConfigError as exc:
        print(f"scalarqve: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(config, out_dir, threads)


if __name__ == "__main__":
    sys.exit(main())
