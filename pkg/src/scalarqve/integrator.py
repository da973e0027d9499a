"""Adaptive time integration of single momentum modes.

The heavy lifting is a compiled embedded Runge-Kutta pair (DOP853 by
default, Dormand-Prince 5(4) on request) that carries the vector potential
alongside the mode state, monitors the formulation's conserved quadratic
form, and never takes a step longer than a quarter of the local
oscillation half-period ``pi / (4 omega)``.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field as dc_field, replace
from typing import Optional

import numpy as np

from . import _kernels as K
from .errors import ConfigError, StepBudgetExceeded, StepSizeUnderflow
from .field import FieldConfig
from .qve import BogoliubovState, ChiState, FghState, ModeCoordinates

logger = logging.getLogger(__name__)


class Formulation(str, enum.Enum):
    CHI = "chi"
    FGH = "fgh"
    BOGOLIUBOV = "bogoliubov"

    @property
    def code(self) -> int:
        return {"chi": K.CHI, "fgh": K.FGH, "bogoliubov": K.BOGOLIUBOV}[self.value]


_METHODS = {"dop853": K.METHOD_DOP853, "dopri5": K.METHOD_DP5}


@dataclass(frozen=True)
class SolverSettings:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-8
    max_steps: int = 1_000_000
    envelope_cut: float = 7.0
    formulation: Formulation = Formulation.FGH
    record_trajectory: bool = False
    method: str = "dop853"
    t_start: Optional[float] = None
    t_end: Optional[float] = None

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ConfigError("tolerances must be > 0")
        if int(self.max_steps) < 1:
            raise ConfigError("max_steps must be >= 1")
        if self.envelope_cut <= 0:
            raise ConfigError("envelope_cut must be > 0")
        if self.method not in _METHODS:
            raise ConfigError(f"method must be one of {sorted(_METHODS)}")
        try:
            object.__setattr__(self, "formulation", Formulation(self.formulation))
        except ValueError:
            raise ConfigError(f"unknown formulation {self.formulation!r}") from None
        object.__setattr__(self, "max_steps", int(self.max_steps))

    def window(self, field: FieldConfig) -> tuple[float, float]:
        t0, t1 = field.time_window(self.envelope_cut)
        if self.t_start is not None:
            t0 = float(self.t_start)
        if self.t_end is not None:
            t1 = float(self.t_end)
        if not t0 < t1:
            raise ConfigError("t_start must be < t_end")
        return t0, t1

    def tail_time(self, field: FieldConfig) -> float:
        _, t1 = self.window(field)
        return t1 - max(p.tau for p in field.pulses) / 10.0

    def to_dict(self) -> dict:
        return {
            "rel_tol": self.rel_tol,
            "abs_tol": self.abs_tol,
            "max_steps": self.max_steps,
            "envelope_cut": self.envelope_cut,
            "formulation": self.formulation.value,
            "method": self.method,
            "t_start": self.t_start,
            "t_end": self.t_end,
        }


PRODUCTION = SolverSettings()
ORACLE = SolverSettings(rel_tol=1e-10, abs_tol=1e-10)


@dataclass
class Trajectory:
    t: np.ndarray
    states: np.ndarray  # raw kernel layout, one row per accepted step
    F: np.ndarray
    constraint: np.ndarray


@dataclass
class ModeResult:
    F_inf: float
    invariant_drift: float
    n_steps: int
    t_span: tuple
    formulation: Formulation
    k: tuple
    state: object = None
    n_rejected: int = 0
    F_min: float = 0.0
    tail_change: float = 0.0
    max_step_ratio: float = 0.0
    trajectory: Optional[Trajectory] = None

    @property
    def tail_ok(self) -> bool:
        return self.tail_change < 1e-8 * (1.0 + abs(self.F_inf))


def _typed_state(form: Formulation, y):
    if form is Formulation.CHI:
        return ChiState(*map(float, y[:3]))
    if form is Formulation.FGH:
        return FghState(*map(float, y[:3]))
    return BogoliubovState(complex(y[0], y[1]), complex(y[2], y[3]), float(y[4]))


def _raise_failure(status, t_fail, k, form):
    if status == K.STEP_BUDGET:
        raise StepBudgetExceeded("step budget exceeded", k=k, t=t_fail,
                                 formulation=form.value)
    if status == K.STEP_UNDERFLOW:
        raise StepSizeUnderflow("step size underflow", k=k, t=t_fail,
                                formulation=form.value)


def solve_mode(field: FieldConfig, mode: ModeCoordinates,
               settings: SolverSettings = PRODUCTION) -> ModeResult:
    """Integrate one mode from vacuum over the envelope window and return
    the asymptotic distribution plus diagnostics."""
    form = settings.formulation
    t0, t1 = settings.window(field)
    kx, ky, kz = mode.k
    y0 = K.vacuum_state(form.code, kx, ky, kz, mode.q, mode.m, 0.0, 0.0)
    rec_cap = settings.max_steps + 1 if settings.record_trajectory else 0
    (y, status, t_fail, n_steps, n_rej, drift, f_min, f_tail, ratio,
     rec_t, rec_y, n_rec) = K.integrate(
        form.code, _METHODS[settings.method], y0, t0, t1, field.as_array(),
        kx, ky, kz, mode.q, mode.m, settings.rel_tol, settings.abs_tol,
        settings.max_steps, settings.tail_time(field), rec_cap)
    _raise_failure(status, t_fail, mode.k, form)
    F = float(K.distribution(form.code, y, kx, ky, kz, mode.q, mode.m))
    tail = abs(F - f_tail) if not math.isnan(f_tail) else 0.0
    traj = None
    if settings.record_trajectory:
        states = rec_y[:n_rec].copy()
        traj = Trajectory(
            t=rec_t[:n_rec].copy(),
            states=states,
            F=np.array([K.distribution(form.code, s, kx, ky, kz, mode.q, mode.m)
                        for s in states]),
            constraint=np.array([K.constraint(form.code, s) for s in states]),
        )
    result = ModeResult(
        F_inf=F, invariant_drift=float(drift), n_steps=int(n_steps), t_span=(t0, t1),
        formulation=form, k=mode.k, state=_typed_state(form, y), n_rejected=int(n_rej),
        F_min=float(f_min), tail_change=tail, max_step_ratio=float(ratio),
        trajectory=traj,
    )
    if not result.tail_ok:
        logger.warning("F still changing near t_end for k=%s: |dF|=%.3g",
                       mode.k, tail)
    return result


def propagate(field: FieldConfig, mode: ModeCoordinates, y0, t0, t1,
              settings: SolverSettings = PRODUCTION):
    """Integrate a raw kernel-layout state from ``t0`` to ``t1`` (either
    direction). Returns the final raw state."""
    form = settings.formulation
    kx, ky, kz = mode.k
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (K.STATE_SIZE[form.code],):
        raise ValueError("state has the wrong length for this formulation")
    res = K.integrate(form.code, _METHODS[settings.method], y0, float(t0), float(t1),
                      field.as_array(), kx, ky, kz, mode.q, mode.m,
                      settings.rel_tol, settings.abs_tol, settings.max_steps,
                      float(t1), 0)
    _raise_failure(res[1], res[2], mode.k, form)
    return res[0]


@dataclass
class FormulationComparison:
    results: dict = dc_field(default_factory=dict)

    def discrepancy(self, a, b) -> float:
        a, b = Formulation(a), Formulation(b)
        return abs(self.results[a].F_inf - self.results[b].F_inf)

    @property
    def pairwise(self) -> dict:
        forms = list(self.results)
        out = {}
        for i, a in enumerate(forms):
            for b in forms[i + 1:]:
                out[frozenset((a, b))] = self.discrepancy(a, b)
        return out

    @property
    def max_discrepancy(self) -> float:
        return max(self.pairwise.values(), default=0.0)

    @property
    def max_drift(self) -> float:
        return max(r.invariant_drift for r in self.results.values())


def solve_mode_all(field: FieldConfig, mode: ModeCoordinates,
                   settings: SolverSettings = ORACLE) -> FormulationComparison:
    out = FormulationComparison()
    for form in Formulation:
        out.results[form] = solve_mode(field, mode, replace(settings, formulation=form))
    return out
