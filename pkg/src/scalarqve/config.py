"""Run configuration files (TOML).

Example::

    task = "sweep"          # optional; must agree with the subcommand
    q = -1.0
    m = 1.0

    [[field.pulses]]
    E01 = 0.14142135623730951
    delta = 0.0
    omega = 0.1
    tau = 100.0

    [grid]
    kx = [-1.0, 1.0, 96]
    ky = [-1.0, 1.0, 96]

    [solver]
    rel_tol = 1e-8

    [output]
    raster = "log"

Unknown keys anywhere are rejected.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field as dc_field, fields
from typing import Optional

import tomli

from .errors import ConfigError
from .field import FieldConfig, _parse_path
from .integrator import SolverSettings
from .sweep import MomentumGrid


class Task(str, enum.Enum):
    MODE = "mode"
    SWEEP = "sweep"
    SCAN = "scan"
    SEMICLASSICAL = "semiclassical"
    VALIDATE = "validate"


_TOP_KEYS = {"task", "q", "m", "strict", "out", "field", "grid", "solver", "mode",
             "scan", "semiclassical", "validate", "output"}
_SOLVER_KEYS = {f.name for f in fields(SolverSettings)}

DEFAULT_VALIDATE_K = ((0.0, 0.0, 0.0), (0.3, 0.0, 0.0), (0.0, 0.3, 0.0),
                      (0.2, -0.2, 0.1))


def _table(data, name, allowed) -> dict:
    sec = data.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    bad = set(sec) - set(allowed)
    if bad:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(bad)}")
    return sec


def _number(value, what) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{what} must be a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{what} must be finite")
    return float(value)


def _momentum(value, what) -> tuple:
    if not isinstance(value, list) or len(value) != 3:
        raise ConfigError(f"{what} must be a list [kx, ky, kz]")
    return tuple(_number(v, what) for v in value)


def _axis(value, what) -> tuple:
    if not isinstance(value, list) or len(value) != 3:
        raise ConfigError(f"{what} must be [min, max, n]")
    lo, hi = _number(value[0], what), _number(value[1], what)
    n = value[2]
    if isinstance(n, bool) or not isinstance(n, int):
        raise ConfigError(f"{what}: point count must be an integer")
    return lo, hi, n


def _grid(sec) -> MomentumGrid:
    if "kx" not in sec or "ky" not in sec:
        raise ConfigError("[grid] needs kx and ky")
    return MomentumGrid(_axis(sec["kx"], "grid.kx"), _axis(sec["ky"], "grid.ky"),
                        _number(sec.get("kz", 0.0), "grid.kz"))


@dataclass(frozen=True)
class ModeTask:
    k: tuple
    all_formulations: bool = False


@dataclass(frozen=True)
class ScanTask:
    parameter: str
    values: tuple


@dataclass(frozen=True)
class SemiclassicalTask:
    momenta: tuple
    region: Optional[tuple] = None
    seeds: Optional[tuple] = None
    compare_exact: bool = True


@dataclass(frozen=True)
class ValidateTask:
    momenta: tuple = DEFAULT_VALIDATE_K


@dataclass(frozen=True)
class OutputOptions:
    raster: str = "log"
    binary: bool = False


@dataclass(frozen=True)
class RunConfig:
    task: Task
    field: FieldConfig
    solver: SolverSettings = SolverSettings()
    grid: Optional[MomentumGrid] = None
    mode: Optional[ModeTask] = None
    scan: Optional[ScanTask] = None
    semiclassical: Optional[SemiclassicalTask] = None
    validate: ValidateTask = ValidateTask()
    output: OutputOptions = OutputOptions()
    q: float = -1.0
    m: float = 1.0
    strict: bool = False
    out: Optional[str] = None
    raw: dict = dc_field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def from_dict(cls, data: dict, task=None) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a table")
        bad = set(data) - _TOP_KEYS
        if bad:
            raise ConfigError(f"unknown top-level keys: {sorted(bad)}")
        declared = data.get("task")
        try:
            declared = Task(declared) if declared is not None else None
            task = Task(task) if task is not None else declared
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if task is None:
            raise ConfigError("no task given")
        if declared is not None and declared is not task:
            raise ConfigError(f"config declares task {declared.value!r}, "
                              f"subcommand is {task.value!r}")
        if "field" not in data:
            raise ConfigError("missing [field] section")
        field = FieldConfig.from_dict(data["field"])

        solver_sec = _table(data, "solver", _SOLVER_KEYS)
        solver = SolverSettings(**solver_sec)
        grid = _grid(_table(data, "grid", {"kx", "ky", "kz"})) if "grid" in data else None

        out_sec = _table(data, "output", {"raster", "binary"})
        output = OutputOptions(out_sec.get("raster", "log"), out_sec.get("binary", False))
        if output.raster not in ("log", "linear", "none"):
            raise ConfigError("output.raster must be 'log', 'linear' or 'none'")
        if not isinstance(output.binary, bool):
            raise ConfigError("output.binary must be a boolean")

        q = _number(data.get("q", -1.0), "q")
        m = _number(data.get("m", 1.0), "m")
        if q == 0 or m <= 0:
            raise ConfigError("need q != 0 and m > 0")
        strict = data.get("strict", False)
        if not isinstance(strict, bool):
            raise ConfigError("strict must be a boolean")
        out = data.get("out")
        if out is not None and not isinstance(out, str):
            raise ConfigError("out must be a path string")

        kw = {}
        mode_sec = _table(data, "mode", {"k", "all_formulations"})
        scan_sec = _table(data, "scan", {"parameter", "values"})
        semi_sec = _table(data, "semiclassical",
                          {"k", "kx", "ky", "kz", "region", "seeds", "compare_exact"})
        val_sec = _table(data, "validate", {"k"})

        if task is Task.MODE:
            if "k" not in mode_sec:
                raise ConfigError("mode task needs [mode] k = [kx, ky, kz]")
            flag = mode_sec.get("all_formulations", False)
            if not isinstance(flag, bool):
                raise ConfigError("mode.all_formulations must be a boolean")
            kw["mode"] = ModeTask(_momentum(mode_sec["k"], "mode.k"), flag)
        elif task in (Task.SWEEP, Task.SCAN) and grid is None:
            raise ConfigError(f"{task.value} task needs a [grid] section")
        if task is Task.SCAN:
            if "parameter" not in scan_sec or "values" not in scan_sec:
                raise ConfigError("scan task needs [scan] parameter and values")
            _parse_path(scan_sec["parameter"])
            vals = scan_sec["values"]
            if not isinstance(vals, list) or not vals:
                raise ConfigError("scan.values must be a non-empty list")
            kw["scan"] = ScanTask(scan_sec["parameter"],
                                  tuple(_number(v, "scan.values") for v in vals))
        if task is Task.SEMICLASSICAL:
            kw["semiclassical"] = _semiclassical(semi_sec)
        if "k" in val_sec:
            ks = val_sec["k"]
            if not isinstance(ks, list) or not ks:
                raise ConfigError("validate.k must be a non-empty list of momenta")
            kw["validate"] = ValidateTask(tuple(_momentum(k, "validate.k") for k in ks))

        return cls(task=task, field=field, solver=solver, grid=grid, output=output,
                   q=q, m=m, strict=strict, out=out, raw=data, **kw)

    def echo(self) -> dict:
        """Resolved configuration, suitable for a manifest."""
        out = {"task": self.task.value, "q": self.q, "m": self.m, "strict": self.strict,
               "field": self.field.to_dict(), "solver": self.solver.to_dict(),
               "output": {"raster": self.output.raster, "binary": self.output.binary}}
        if self.grid is not None:
            out["grid"] = self.grid.to_dict()
        if self.mode is not None:
            out["mode"] = {"k": list(self.mode.k),
                           "all_formulations": self.mode.all_formulations}
        if self.scan is not None:
            out["scan"] = {"parameter": self.scan.parameter, "values": list(self.scan.values)}
        if self.semiclassical is not None:
            s = self.semiclassical
            out["semiclassical"] = {"k": [list(k) for k in s.momenta],
                                    "region": list(s.region) if s.region else None,
                                    "seeds": list(s.seeds) if s.seeds else None,
                                    "compare_exact": s.compare_exact}
        if self.task is Task.VALIDATE:
            out["validate"] = {"k": [list(k) for k in self.validate.momenta]}
        return out


def _semiclassical(sec) -> SemiclassicalTask:
    if "k" in sec and "kx" in sec:
        raise ConfigError("give either semiclassical.k or semiclassical.kx, not both")
    if "k" in sec:
        ks = sec["k"]
        if not isinstance(ks, list) or not ks:
            raise ConfigError("semiclassical.k must be a non-empty list of momenta")
        momenta = tuple(_momentum(k, "semiclassical.k") for k in ks)
    elif "kx" in sec:
        lo, hi, n = _axis(sec["kx"], "semiclassical.kx")
        if n < 1:
            raise ConfigError("semiclassical.kx needs at least one point")
        ky = _number(sec.get("ky", 0.0), "semiclassical.ky")
        kz = _number(sec.get("kz", 0.0), "semiclassical.kz")
        step = (hi - lo) / (n - 1) if n > 1 else 0.0
        momenta = tuple((lo + i * step, ky, kz) for i in range(n))
    else:
        raise ConfigError("semiclassical task needs [semiclassical] k or kx")
    region = sec.get("region")
    if region is not None:
        if not isinstance(region, list) or len(region) != 4:
            raise ConfigError("semiclassical.region must be [re_min, re_max, im_min, im_max]")
        region = tuple(_number(v, "semiclassical.region") for v in region)
    seeds = sec.get("seeds")
    if seeds is not None:
        if (not isinstance(seeds, list) or len(seeds) != 2
                or not all(isinstance(s, int) and not isinstance(s, bool) and s > 0
                           for s in seeds)):
            raise ConfigError("semiclassical.seeds must be two positive integers")
        seeds = tuple(seeds)
    compare = sec.get("compare_exact", True)
    if not isinstance(compare, bool):
        raise ConfigError("semiclassical.compare_exact must be a boolean")
    return SemiclassicalTask(momenta, region, seeds, compare)


def load_config(path, task=None) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    try:
        return RunConfig.from_dict(data, task)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
