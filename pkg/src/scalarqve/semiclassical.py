"""Complex turning points and phase integrals for one momentum mode.

A turning point is a complex time where ``omega^2(k, t) = (k - qA(t))^2 + m^2``
vanishes. Each conjugate pair ``(t_p, t_p*)`` contributes an amplitude
``exp(-K)`` with ``K = |int_{t_p}^{t_p*} omega dt|``; two pairs interfere
through the real-axis phase accumulated between them.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np
from scipy.integrate import quad

from .errors import (EnvelopeOverflowError, NoRootsFound, QuadratureError,
                     SeedBudgetExhausted)
from .field import (FieldConfig, build_potential, eval_field_complex,
                    eval_potential_complex)
from .qve import ModeCoordinates

logger = logging.getLogger(__name__)


class Statistics(str, enum.Enum):
    BOSON = "boson"
    FERMION = "fermion"


@dataclass(frozen=True)
class TurningPointPair:
    t_p: complex
    residual: float

    @property
    def conjugate(self) -> complex:
        return self.t_p.conjugate()


@dataclass
class PhaseIntegralReport:
    k: tuple
    pairs: list = dc_field(default_factory=list)  # sorted by K
    K_values: list = dc_field(default_factory=list)
    alpha: float = 0.0
    F_estimate_boson: float = 0.0
    F_estimate_fermion: float = 0.0
    flagged: bool = False

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)

    @property
    def has_dominant_pair(self) -> bool:
        return bool(self.pairs)


def _omega2_and_slope(field, mode, t, table):
    anchor = min(max(t.real, table.t_start), table.t_end)
    A = eval_potential_complex(field, t, anchor, table)
    E = eval_field_complex(field, np.array([t]))[0]
    p = np.asarray(mode.k, dtype=complex) - mode.q * A
    f = complex(np.sum(p * p) + mode.m**2)
    df = complex(2.0 * mode.q * np.sum(p * E))
    return f, df


def default_region(field: FieldConfig, envelope_cut=7.0):
    """Envelope window on the real axis; up to ``min(3 tau, 3 / omega)`` above it."""
    t0, t1 = field.time_window(envelope_cut)
    im = 3.0 * max(p.tau for p in field.pulses)
    w = max(p.omega for p in field.pulses)
    if w > 0:
        im = min(im, 3.0 / w)
    return (t0, t1, 0.0, im)


def default_seeds(field: FieldConfig, region):
    """At least one seed column per carrier half-period, never fewer than 20."""
    w = max(p.omega for p in field.pulses)
    n = 20
    if w > 0:
        n = max(n, int(math.ceil((region[1] - region[0]) * w / math.pi)) + 1)
    return (n, 10)


def find_turning_points(field: FieldConfig, mode: ModeCoordinates, region=None,
                        seeds=None, table=None, tol=1e-10, max_iter=60,
                        max_evaluations=50_000) -> list:
    """Newton search for zeros of ``omega^2`` from a seed lattice.

    ``region`` is ``(re_min, re_max, im_min, im_max)`` with ``im_max > 0``;
    seeds sit on a ``seeds[0] x seeds[1]`` lattice strictly inside it.
    Returns upper-half-plane representatives sorted by ``Im t``.
    """
    if region is None:
        region = default_region(field)
    if seeds is None:
        seeds = default_seeds(field, region)
    re0, re1, im0, im1 = map(float, region)
    if not im1 > max(im0, 0.0):
        raise ValueError("region needs a positive imaginary extent")
    if table is None:
        table = build_potential(field)
    nre, nim = seeds
    res = re0 + (np.arange(nre) + 0.5) * (re1 - re0) / nre
    ims = max(im0, 0.0) + (np.arange(nim) + 0.5) * (im1 - max(im0, 0.0)) / nim
    scales = [p.tau for p in field.pulses]
    scales += [math.pi / p.omega for p in field.pulses if p.omega > 0]
    max_jump = 0.5 * min(scales)

    roots = []
    evaluations = 0
    exhausted = False
    for x in res:
        for y in ims:
            t = complex(x, y)
            for _ in range(max_iter):
                if evaluations >= max_evaluations:
                    exhausted = True
                    break
                evaluations += 1
                try:
                    f, df = _omega2_and_slope(field, mode, t, table)
                except EnvelopeOverflowError:
                    break
                if abs(f) <= tol:
                    if abs(t.imag) > 1e-8:
                        rep = t if t.imag > 0 else t.conjugate()
                        roots.append(TurningPointPair(rep, abs(f)))
                    break
                if df == 0 or not np.isfinite(df):
                    break
                step = f / df
                if abs(step) > max_jump:
                    step *= max_jump / abs(step)
                t = t - step
                if not (np.isfinite(t.real) and np.isfinite(t.imag)):
                    break
            if exhausted:
                break
        if exhausted:
            break

    unique = []
    for r in sorted(roots, key=lambda r: (r.t_p.imag, r.t_p.real)):
        if all(abs(r.t_p - u.t_p) >= 1e-6 for u in unique):
            unique.append(r)
    if not unique:
        if exhausted:
            raise SeedBudgetExhausted("evaluation budget spent before any root converged")
        raise NoRootsFound("no turning points in the search region")
    if exhausted:
        logger.warning("seed budget exhausted; returning %d roots", len(unique))
    return unique


_GL = {}


def _gl01(n):
    if n not in _GL:
        x, w = np.polynomial.legendre.leggauss(n)
        _GL[n] = (0.5 * (x + 1.0), 0.5 * w)
    return _GL[n]


def _omega_on_segment(field, mode, x, s_values, table):
    """Continuous branch of omega on the vertical line ``x + i s``
    (``s_values`` ascending from the real axis)."""
    out = np.empty(s_values.size, dtype=complex)
    prev = None
    a_x = float(min(max(x, table.t_start), table.t_end))
    k = np.asarray(mode.k, dtype=complex)
    for i, s in enumerate(s_values):
        A = eval_potential_complex(field, complex(x, s), a_x, table)
        p = k - mode.q * A
        w = np.sqrt(complex(np.sum(p * p) + mode.m**2))
        if prev is None:
            if w.real < 0:
                w = -w
        elif abs(-w - prev) < abs(w - prev):
            w = -w
        out[i] = w
        prev = w
    return out


def phase_integral_K(field: FieldConfig, mode: ModeCoordinates,
                     pair: TurningPointPair, table=None, tol=1e-10) -> float:
    """``|int_{t_p}^{t_p*} omega dt|`` along the vertical segment.

    Uses ``s = b (1 - u^2)`` so the square-root endpoint becomes smooth,
    then doubles the Gauss-Legendre order until converged.
    """
    if table is None:
        table = build_potential(field)
    x, b = pair.t_p.real, abs(pair.t_p.imag)
    prev = None
    n = 16
    while n <= 1024:
        u, w = _gl01(n)
        order = np.argsort(-u)  # s ascending
        s = b * (1.0 - u[order] ** 2)
        wv = _omega_on_segment(field, mode, x, s, table)
        integrand = wv.real * 2.0 * b * u[order]
        val = 2.0 * abs(float(np.dot(w[order], integrand)))
        if prev is not None and abs(val - prev) <= tol * max(1.0, val):
            return val
        prev = val
        n *= 2
    raise QuadratureError("phase integral did not converge near the branch point")


def interference_phase(field: FieldConfig, mode: ModeCoordinates, t1: float, t2: float,
                       table=None) -> float:
    """Real-axis dynamical phase ``int_{t1}^{t2} omega dt``."""
    if table is None:
        table = build_potential(field)
    lo, hi = sorted((float(t1), float(t2)))
    lo = max(lo, table.t_start)
    hi = min(hi, table.t_end)
    k = np.asarray(mode.k)

    def w(t):
        p = k - mode.q * table(t)
        return math.sqrt(float(np.dot(p, p)) + mode.m**2)

    val, err = quad(w, lo, hi, limit=500, epsabs=1e-12, epsrel=1e-12)
    return float(val)


def interference_estimate(K1: float, K2: Optional[float] = None, alpha: float = 0.0,
                          statistics=Statistics.BOSON) -> float:
    """Single pair: ``exp(-2 K1)``. Two pairs:
    ``exp(-2K1) + exp(-2K2) +- 2 cos(2 alpha) exp(-K1-K2)``,
    plus for bosons and minus for fermions."""
    statistics = Statistics(statistics)
    if K2 is None:
        return math.exp(-2.0 * K1)
    sign = 1.0 if statistics is Statistics.BOSON else -1.0
    return (math.exp(-2.0 * K1) + math.exp(-2.0 * K2)
            + sign * 2.0 * math.cos(2.0 * alpha) * math.exp(-K1 - K2))


def analyze(field: FieldConfig, mode: ModeCoordinates, region=None, seeds=None,
            table=None) -> PhaseIntegralReport:
    """Turning points, phase integrals and interference estimates for one k."""
    if table is None:
        table = build_potential(field)
    pairs = find_turning_points(field, mode, region, seeds, table)
    Ks = [phase_integral_K(field, mode, p, table) for p in pairs]
    order = np.argsort(Ks, kind="stable")
    pairs = [pairs[i] for i in order]
    Ks = [float(Ks[i]) for i in order]
    report = PhaseIntegralReport(mode.k, pairs, Ks)
    if len(pairs) == 1:
        report.F_estimate_boson = report.F_estimate_fermion = interference_estimate(Ks[0])
        return report
    report.alpha = interference_phase(field, mode, pairs[0].t_p.real, pairs[1].t_p.real,
                                      table)
    report.F_estimate_boson = interference_estimate(Ks[0], Ks[1], report.alpha,
                                                    Statistics.BOSON)
    report.F_estimate_fermion = interference_estimate(Ks[0], Ks[1], report.alpha,
                                                      Statistics.FERMION)
    report.flagged = report.F_estimate_boson < 0 or report.F_estimate_fermion < 0
    return report
