"""External electric field: Gaussian-enveloped elliptic pulses.

Units are natural with ``m = |q| = 1``, so amplitudes are in units of the
critical field, times in ``1/m`` and frequencies in ``m``.

A pulse contributes::

    E(t) = E1 exp(-(t-T)^2 / 2 tau^2) (cos(w(t-T) + phi), delta sin(w(t-T) + phi), 0)

with the effective amplitude ``E1 = E01 / sqrt(1 + delta^2)``.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from .errors import ConfigError, EnvelopeOverflowError, QuadratureError, ToleranceError

PULSE_KEYS = ("E01", "delta", "omega", "tau", "delay", "phase")

# largest real exponent allowed in the continued envelope/carrier
_EXP_LIMIT = 700.0


@dataclass(frozen=True)
class EllipticPulse:
    E01: float
    delta: float = 0.0
    omega: float = 0.0
    tau: float = 1.0
    delay: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        for name in PULSE_KEYS:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"pulse field {name!r} must be a number, got {value!r}")
            if not math.isfinite(value):
                raise ConfigError(f"pulse field {name!r} must be finite")
            object.__setattr__(self, name, float(value))
        if self.E01 < 0:
            raise ConfigError("E01 must be >= 0")
        if self.tau <= 0:
            raise ConfigError("tau must be > 0")
        if self.omega < 0:
            raise ConfigError("omega must be >= 0")
        if abs(self.delta) > 1:
            raise ConfigError("|delta| must be <= 1")

    @property
    def E1(self) -> float:
        return self.E01 / math.sqrt(1.0 + self.delta**2)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in PULSE_KEYS}


@dataclass(frozen=True)
class FieldConfig:
    pulses: tuple = dc_field(default_factory=tuple)

    def __post_init__(self):
        pulses = tuple(self.pulses)
        if not pulses:
            raise ConfigError("a field needs at least one pulse")
        for p in pulses:
            if not isinstance(p, EllipticPulse):
                raise ConfigError(f"expected EllipticPulse, got {type(p).__name__}")
        object.__setattr__(self, "pulses", pulses)

    @classmethod
    def single(cls, E01, delta=0.0, omega=0.0, tau=1.0, delay=0.0, phase=0.0):
        return cls((EllipticPulse(E01, delta, omega, tau, delay, phase),))

    @classmethod
    def two_pulse(cls, E01, E02, delta1, delta2, omega1, omega2, tau, T,
                  phase1=0.0, phase2=0.0):
        """First pulse centred at 0, second at the delay ``T``."""
        return cls((
            EllipticPulse(E01, delta1, omega1, tau, 0.0, phase1),
            EllipticPulse(E02, delta2, omega2, tau, T, phase2),
        ))

    @classmethod
    def zero(cls, tau=1.0):
        return cls.single(0.0, tau=tau)

    @classmethod
    def from_dict(cls, data) -> "FieldConfig":
        if not isinstance(data, dict):
            raise ConfigError("field section must be a table")
        unknown = set(data) - {"pulses"}
        if unknown:
            raise ConfigError(f"unknown field keys: {sorted(unknown)}")
        raw = data.get("pulses")
        if not isinstance(raw, list) or not raw:
            raise ConfigError("'pulses' must be a non-empty list")
        pulses = []
        for i, entry in enumerate(raw):
            if not isinstance(entry, dict):
                raise ConfigError(f"pulses[{i}] must be a table")
            bad = set(entry) - set(PULSE_KEYS)
            if bad:
                raise ConfigError(f"unknown keys in pulses[{i}]: {sorted(bad)}")
            if "E01" not in entry:
                raise ConfigError(f"pulses[{i}] is missing 'E01'")
            pulses.append(EllipticPulse(**entry))
        return cls(tuple(pulses))

    def to_dict(self) -> dict:
        return {"pulses": [p.to_dict() for p in self.pulses]}

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def as_array(self) -> np.ndarray:
        """Kernel layout: rows of (E1, delta, omega, tau, delay, phase)."""
        return np.array([[p.E1, p.delta, p.omega, p.tau, p.delay, p.phase]
                         for p in self.pulses], dtype=float)

    def time_window(self, envelope_cut: float = 7.0) -> tuple[float, float]:
        t0 = min(p.delay - envelope_cut * p.tau for p in self.pulses)
        t1 = max(p.delay + envelope_cut * p.tau for p in self.pulses)
        return t0, t1

    def is_zero(self) -> bool:
        return all(p.E01 == 0.0 for p in self.pulses)

    def replace_value(self, path: str, value: float) -> "FieldConfig":
        """Copy with one numeric parameter changed, e.g. ``pulses[1].delta``."""
        idx, key = _parse_path(path)
        if idx >= len(self.pulses):
            raise ConfigError(f"{path!r}: pulse index out of range")
        d = self.to_dict()
        d["pulses"][idx][key] = value
        return FieldConfig.from_dict(d)


def _parse_path(path: str):
    import re

    m = re.fullmatch(r"(?:field\.)?pulses\[(\d+)\]\.(\w+)", path.strip())
    if not m or m.group(2) not in PULSE_KEYS:
        raise ConfigError(f"{path!r} does not address a numeric pulse parameter")
    return int(m.group(1)), m.group(2)


def _field_terms(config: FieldConfig, t):
    t = np.asarray(t)
    ex = np.zeros(t.shape, dtype=t.dtype if np.iscomplexobj(t) else float)
    ey = np.zeros_like(ex)
    for p in config.pulses:
        if p.E01 == 0.0:
            continue
        s = t - p.delay
        env = p.E1 * np.exp(-s * s / (2.0 * p.tau**2))
        ph = p.omega * s + p.phase
        ex = ex + env * np.cos(ph)
        ey = ey + env * p.delta * np.sin(ph)
    return np.stack([ex, ey, np.zeros_like(ex)], axis=-1)


def eval_field(config: FieldConfig, t):
    """Field 3-vector at real time(s) ``t``; shape ``t.shape + (3,)``."""
    t = np.asarray(t, dtype=float)
    return _field_terms(config, t)


def _check_overflow(config: FieldConfig, t):
    t = np.asarray(t, dtype=complex)
    for p in config.pulses:
        s = t - p.delay
        growth = (s.imag**2 - s.real**2) / (2.0 * p.tau**2) + p.omega * np.abs(s.imag)
        if np.any(growth > _EXP_LIMIT):
            raise EnvelopeOverflowError(
                "continued envelope overflows; restrict |Im t| for this field")


def eval_field_complex(config: FieldConfig, t):
    """Analytic continuation of :func:`eval_field` to complex time."""
    t = np.asarray(t)
    if not np.iscomplexobj(t) or not np.any(t.imag):
        return eval_field(config, np.real(t)).astype(complex)
    _check_overflow(config, t)
    return _field_terms(config, t.astype(complex))


class PotentialTable:
    """Sampled vector potential ``A(t)`` in temporal gauge, ``dA/dt = -E``.

    Interpolation is cubic Hermite, using the exact field as the derivative
    at every node. ``accuracy`` is the largest deviation observed at interval
    midpoints against the integrator's dense output.
    """

    order = 3

    def __init__(self, config, t_grid, A_values, accuracy):
        self.config = config
        self.t_grid = np.asarray(t_grid, dtype=float)
        self.A_values = np.asarray(A_values, dtype=float)
        self.accuracy = float(accuracy)
        self.t_grid.setflags(write=False)
        self.A_values.setflags(write=False)
        slopes = -eval_field(config, self.t_grid)
        self._spline = CubicHermiteSpline(self.t_grid, self.A_values, slopes, axis=0)

    @property
    def t_start(self):
        return float(self.t_grid[0])

    @property
    def t_end(self):
        return float(self.t_grid[-1])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < self.t_start) or np.any(t > self.t_end):
            raise ValueError("time outside the tabulated range")
        return self._spline(t)


def build_potential(config: FieldConfig, t_start=None, t_end=None, tol=1e-10,
                    max_nodes=200_000) -> PotentialTable:
    """Tabulate ``A(t)`` on ``[t_start, t_end]`` with ``A(t_start) = 0``."""
    w0, w1 = config.time_window()
    t_start = w0 if t_start is None else float(t_start)
    t_end = w1 if t_end is None else float(t_end)
    if not t_start < t_end:
        raise ValueError("t_start must be < t_end")
    if tol <= 0:
        raise ValueError("tol must be > 0")

    if config.is_zero():
        grid = np.linspace(t_start, t_end, 3)
        return PotentialTable(config, grid, np.zeros((3, 3)), 0.0)

    scales = [p.tau for p in config.pulses if p.E01 > 0]
    scales += [math.pi / p.omega for p in config.pulses if p.E01 > 0 and p.omega > 0]
    max_step = 0.5 * min(scales)

    def rhs(t, a):
        return -eval_field(config, t)

    sol = solve_ivp(rhs, (t_start, t_end), np.zeros(3), method="DOP853",
                    rtol=1e-13, atol=tol * 1e-3, dense_output=True, max_step=max_step)
    if not sol.success:
        raise ToleranceError(f"potential integration failed: {sol.message}")
    grid = sol.t
    while True:
        table = PotentialTable(config, grid, sol.sol(grid).T, 0.0)
        mids = 0.5 * (grid[1:] + grid[:-1])
        dev = np.abs(table(mids) - sol.sol(mids).T).max(axis=1)
        worst = float(dev.max())
        if worst <= tol:
            return PotentialTable(config, grid, sol.sol(grid).T, worst)
        bad = mids[dev > tol]
        if grid.size + bad.size > max_nodes:
            raise ToleranceError(
                f"potential table cannot reach tol={tol:g} within {max_nodes} nodes")
        grid = np.sort(np.concatenate([grid, bad]))


_GL_CACHE = {}


def _gauss_legendre01(n):
    if n not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(n)
        _GL_CACHE[n] = (0.5 * (x + 1.0), 0.5 * w)
    return _GL_CACHE[n]


def eval_potential_complex(config: FieldConfig, t, anchor, table=None, tol=1e-13):
    """``A(t)`` for complex ``t`` by integrating ``-E`` along the straight
    segment from the real ``anchor`` (where the table supplies ``A``)."""
    if table is None:
        table = build_potential(config)
    t = complex(t)
    a0 = np.asarray(table(float(anchor)), dtype=complex)
    d = t - anchor
    if d == 0:
        return a0
    _check_overflow(config, np.array([anchor, t]))
    prev = None
    n = 16
    while n <= 2048:
        u, w = _gauss_legendre01(n)
        vals = eval_field_complex(config, anchor + u * d)
        integral = -d * (w @ vals)
        if prev is not None:
            change = np.max(np.abs(integral - prev))
            if change <= tol * (1.0 + np.max(np.abs(integral))):
                return a0 + integral
        prev = integral
        n *= 2
    raise QuadratureError("complex potential quadrature did not converge")


def keldysh_gamma(pulse: EllipticPulse, m: float = 1.0, q: float = -1.0) -> float:
    """Adiabaticity parameter ``m omega / |q E1|``."""
    e1 = pulse.E1
    if e1 == 0.0:
        raise ZeroDivisionError("Keldysh parameter undefined for zero amplitude")
    return m * pulse.omega / abs(q * e1)
