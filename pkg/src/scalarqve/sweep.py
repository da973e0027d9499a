"""Momentum-grid sweeps and spectrum analysis.

Grid nodes are independent work items. They are solved in fixed-size
blocks on a thread pool (the compiled kernel releases the GIL) and written
back by position, so results do not depend on the worker count or on
scheduling order.
"""
from __future__ import annotations

import enum
import logging
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field, replace
from datetime import datetime, timezone
from typing import Optional

import numpy as np
from scipy.integrate import quad, trapezoid
from scipy.interpolate import RegularGridInterpolator

from . import _kernels as K
from .errors import (ConfigError, FlatProfileError, GridError, QuadratureError,
                     ScalarQVEError, SweepError)
from .field import FieldConfig, build_potential, keldysh_gamma, _parse_path
from .integrator import PRODUCTION, SolverSettings, _METHODS

logger = logging.getLogger(__name__)

BLOCK_SIZE = 16
THREADS_ENV = "SCALARQVE_THREADS"


class GridTruncationWarning(UserWarning):
    """Distribution has not decayed at the grid boundary."""


def resolve_threads(threads: Optional[int] = None) -> int:
    """0 or None means auto; the environment override applies only then."""
    if threads is None or threads == 0:
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise ConfigError(f"{THREADS_ENV} must be an integer") from None
        if not threads:
            threads = os.cpu_count() or 1
    if threads < 0:
        raise ConfigError("thread count must be >= 0")
    return int(threads)


@dataclass(frozen=True)
class MomentumGrid:
    kx_range: tuple = (-1.0, 1.0, 128)
    ky_range: tuple = (-1.0, 1.0, 128)
    kz: float = 0.0

    def __post_init__(self):
        for name in ("kx_range", "ky_range"):
            r = getattr(self, name)
            if len(r) != 3:
                raise ConfigError(f"{name} must be (min, max, count)")
            lo, hi, n = float(r[0]), float(r[1]), r[2]
            if isinstance(n, float) and n.is_integer():
                n = int(n)
            if not isinstance(n, int) or n < 2:
                raise ConfigError(f"{name} count must be an integer >= 2")
            if not hi > lo:
                raise ConfigError(f"{name} needs max > min")
            object.__setattr__(self, name, (lo, hi, n))
        object.__setattr__(self, "kz", float(self.kz))

    @classmethod
    def square(cls, extent=1.0, n=128, kz=0.0):
        return cls((-extent, extent, n), (-extent, extent, n), kz)

    @property
    def shape(self):
        return self.kx_range[2], self.ky_range[2]

    @property
    def kx(self):
        return np.linspace(*self.kx_range)

    @property
    def ky(self):
        return np.linspace(*self.ky_range)

    @property
    def spacing(self):
        return ((self.kx_range[1] - self.kx_range[0]) / (self.kx_range[2] - 1),
                (self.ky_range[1] - self.ky_range[0]) / (self.ky_range[2] - 1))

    def points(self):
        """Row-major node list: kx is the slow index, ky the fast one."""
        kx, ky = np.meshgrid(self.kx, self.ky, indexing="ij")
        pts = np.empty((kx.size, 3))
        pts[:, 0] = kx.ravel()
        pts[:, 1] = ky.ravel()
        pts[:, 2] = self.kz
        return pts

    def to_dict(self):
        return {"kx": list(self.kx_range), "ky": list(self.ky_range), "kz": self.kz}


@dataclass
class Spectrum:
    grid: MomentumGrid
    values: np.ndarray  # shape (nx, ny), values[i, j] = F(kx[i], ky[j])
    metadata: dict = dc_field(default_factory=dict)
    drift: Optional[np.ndarray] = None
    n_steps: Optional[np.ndarray] = None
    failures: list = dc_field(default_factory=list)

    @property
    def peak(self) -> float:
        ok = self.values[np.isfinite(self.values)]
        return float(ok.max()) if ok.size else math.nan

    @property
    def converged(self) -> bool:
        return not self.failures and bool(np.all(np.isfinite(self.values)))

    def summary(self) -> dict:
        ok = self.values[np.isfinite(self.values)]
        out = {"peak_F": self.peak, "min_F": float(ok.min()) if ok.size else math.nan,
               "failed_nodes": len(self.failures)}
        if self.drift is not None:
            d = self.drift[np.isfinite(self.values)]
            out["max_invariant_drift"] = float(d.max()) if d.size else math.nan
        if self.n_steps is not None:
            out["total_steps"] = int(np.nansum(self.n_steps))
        return out


def _solve_nodes(field: FieldConfig, pts, settings: SolverSettings, q, m, threads):
    t0, t1 = settings.window(field)
    pulses = field.as_array()
    out = np.zeros((pts.shape[0], 7))
    args = (settings.formulation.code, _METHODS[settings.method])
    tail = settings.tail_time(field)

    def work(start):
        stop = min(start + BLOCK_SIZE, pts.shape[0])
        K.solve_block(*args, pts[start:stop], pulses, q, m, t0, t1,
                      settings.rel_tol, settings.abs_tol, settings.max_steps,
                      tail, out[start:stop])

    starts = range(0, pts.shape[0], BLOCK_SIZE)
    threads = resolve_threads(threads)
    if threads == 1 or len(starts) == 1:
        for s in starts:
            work(s)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, starts))
    return out


def compute_spectrum(field: FieldConfig, grid: MomentumGrid,
                     settings: SolverSettings = PRODUCTION, *, q=-1.0, m=1.0,
                     threads=0, strict=True) -> Spectrum:
    """One asymptotic F per grid node."""
    pts = grid.points()
    raw = _solve_nodes(field, pts, settings, q, m, threads)
    nx, ny = grid.shape
    values = raw[:, 0].copy()
    failures = []
    for i in np.flatnonzero(raw[:, 1] != K.OK):
        code = int(raw[i, 1])
        reason = "step budget exceeded" if code == K.STEP_BUDGET else "step size underflow"
        failures.append({"index": int(i), "k": pts[i].tolist(), "reason": reason,
                         "t": float(raw[i, 2])})
        values[i] = np.nan
    if failures and strict:
        raise SweepError(f"{len(failures)} grid node(s) failed; first: {failures[0]}",
                         failures)
    A_end = build_potential(field, *settings.window(field)).A_values[-1]
    meta = {
        "config_hash": field.config_hash(),
        "field": field.to_dict(),
        "solver": settings.to_dict(),
        "grid": grid.to_dict(),
        "q": q,
        "m": m,
        "A_end": [float(v) for v in A_end],
        "density_measure": "dkx dky / (2 pi)^2 over the kz slice",
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    spec = Spectrum(grid, values.reshape(nx, ny), meta,
                    drift=raw[:, 4].reshape(nx, ny),
                    n_steps=raw[:, 3].reshape(nx, ny), failures=failures)
    if not np.all(np.isnan(spec.values)) and np.nanmin(spec.values) < -1e-12:
        logger.warning("negative distribution value %.3g in spectrum",
                       np.nanmin(spec.values))
    return spec


class DensityMode(str, enum.Enum):
    SLICE_2D = "slice_2d"
    FULL_3D = "full_3d"


def _slice_density(values, grid: MomentumGrid):
    dens = trapezoid(trapezoid(values, grid.ky, axis=1), grid.kx)
    return float(dens) / (2.0 * math.pi) ** 2


def _check_truncation(values):
    peak = np.max(values)
    if peak <= 0:
        return
    edge = max(values[0].max(), values[-1].max(), values[:, 0].max(), values[:, -1].max())
    if edge > 1e-6 * peak:
        warnings.warn(f"boundary F is {edge / peak:.2g} of the peak; "
                      "grid may truncate the distribution", GridTruncationWarning,
                      stacklevel=3)


def number_density(source, mode=DensityMode.SLICE_2D, *, grid=None,
                   settings: SolverSettings = PRODUCTION, kz_max=None,
                   rtol=1e-3, threads=0, q=-1.0, m=1.0) -> float:
    """Pair density from a spectrum (slice) or a field (slice or full 3-D).

    ``SLICE_2D``: trapezoidal ``int dkx dky / (2 pi)^2 F`` on the grid.
    ``FULL_3D``: adaptive quadrature over ``kz >= 0`` (doubled by the
    ``kz -> -kz`` symmetry) of slice densities, ``int d^3k / (2 pi)^3 F``.
    """
    mode = DensityMode(mode)
    if isinstance(source, Spectrum):
        if mode is DensityMode.FULL_3D:
            raise ValueError("full 3-D density needs the field, not a spectrum")
        if not source.converged:
            raise ValueError("spectrum has failed nodes; density undefined")
        _check_truncation(source.values)
        return _slice_density(source.values, source.grid)

    field = source
    if grid is None:
        raise ValueError("a momentum grid is required when integrating a field")
    if mode is DensityMode.SLICE_2D:
        spec = compute_spectrum(field, grid, settings, q=q, m=m, threads=threads)
        return number_density(spec)
    if field.is_zero():
        return 0.0
    if kz_max is None:
        kz_max = max(abs(grid.kx_range[0]), abs(grid.kx_range[1]),
                     abs(grid.ky_range[0]), abs(grid.ky_range[1]))

    def slice_at(kz):
        g = replace(grid, kz=float(kz))
        spec = compute_spectrum(field, g, settings, q=q, m=m, threads=threads)
        return _slice_density(spec.values, g)

    val, err, info, *msg = quad(slice_at, 0.0, kz_max, epsabs=0.0, epsrel=rtol,
                                limit=20, full_output=1)
    if msg:
        raise QuadratureError(f"kz quadrature did not converge: {msg[0]}")
    return 2.0 * val / (2.0 * math.pi)


class MirrorAxis(str, enum.Enum):
    KX_MIRROR = "kx"
    KY_MIRROR = "ky"


def symmetry_residual(spectrum: Spectrum, axis) -> float:
    """``max |F(mirror) - F| / peak`` for a reflection of one momentum axis."""
    axis = MirrorAxis(axis)
    rng = spectrum.grid.kx_range if axis is MirrorAxis.KX_MIRROR else spectrum.grid.ky_range
    if not math.isclose(rng[0], -rng[1], rel_tol=1e-12, abs_tol=1e-12):
        raise GridError(f"grid is not symmetric about 0 along {axis.value}")
    v = spectrum.values
    mirrored = v[::-1, :] if axis is MirrorAxis.KX_MIRROR else v[:, ::-1]
    peak = np.nanmax(np.abs(v))
    if peak == 0:
        return 0.0
    return float(np.nanmax(np.abs(mirrored - v)) / peak)


@dataclass
class AzimuthalProfile:
    phi: np.ndarray
    values: np.ndarray
    r_band: tuple
    center: tuple

    @property
    def peak_to_mean(self) -> float:
        return float(self.values.max() / self.values.mean())


def kinetic_center(spectrum: Spectrum):
    """Canonical momentum at which the final kinetic momentum vanishes."""
    q = spectrum.metadata.get("q", -1.0)
    A = spectrum.metadata.get("A_end", [0.0, 0.0, 0.0])
    return q * A[0], q * A[1]


def peak_ring_band(spectrum: Spectrum, width_cells=3, center=None):
    """Band of +-``width_cells`` grid cells around the radius of the maximum."""
    if center is None:
        center = kinetic_center(spectrum)
    i, j = np.unravel_index(np.nanargmax(spectrum.values), spectrum.values.shape)
    kx, ky = spectrum.grid.kx[i], spectrum.grid.ky[j]
    r = math.hypot(kx - center[0], ky - center[1])
    dk = max(spectrum.grid.spacing)
    return max(r - width_cells * dk, 0.0), r + width_cells * dk


def azimuthal_profile(spectrum: Spectrum, r_band, n_phi=256, n_r=None,
                      center=None) -> AzimuthalProfile:
    """Radially averaged, bilinearly interpolated ``F(phi)`` over a ring band
    measured in final kinetic momentum."""
    r_min, r_max = map(float, r_band)
    if not 0 <= r_min <= r_max:
        raise GridError("invalid radial band")
    if center is None:
        center = kinetic_center(spectrum)
    g = spectrum.grid
    cx, cy = center
    if (cx - r_max < g.kx_range[0] or cx + r_max > g.kx_range[1]
            or cy - r_max < g.ky_range[0] or cy + r_max > g.ky_range[1]):
        raise GridError("radial band extends outside the grid")
    if n_r is None:
        n_r = max(3, 2 * int(math.ceil((r_max - r_min) / min(g.spacing))) + 1)
    interp = RegularGridInterpolator((g.kx, g.ky), spectrum.values, method="linear")
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    radii = np.linspace(r_min, r_max, n_r)
    rr, pp = np.meshgrid(radii, phi, indexing="ij")
    pts = np.stack([cx + rr * np.cos(pp), cy + rr * np.sin(pp)], axis=-1)
    vals = interp(pts.reshape(-1, 2)).reshape(rr.shape).mean(axis=0)
    return AzimuthalProfile(phi, vals, (r_min, r_max), (cx, cy))


def azimuthal_spectrum(profile):
    """Amplitudes of the cosine modes of a profile (index = mode number)."""
    values = getattr(profile, "values", profile)
    values = np.asarray(values, dtype=float)
    c = np.fft.rfft(values) / values.size
    amp = np.abs(c)
    amp[1:] *= 2.0
    return amp


def dominant_azimuthal_mode(profile, noise_floor=1e-3, tie=0.01) -> int:
    """Mode number of the strongest non-constant Fourier component.

    Raises :class:`FlatProfileError` if no mode exceeds ``noise_floor``
    times the profile mean. Among modes within ``tie`` of the strongest,
    the lowest mode number wins.
    """
    values = np.asarray(getattr(profile, "values", profile), dtype=float)
    if values.size < 64:
        raise ValueError("profile needs at least 64 samples")
    amp = azimuthal_spectrum(values)
    mean = amp[0]
    harmonics = amp[1:values.size // 2]
    top = harmonics.max(initial=0.0)
    if mean <= 0 or top < noise_floor * mean:
        raise FlatProfileError(
            f"no azimuthal mode above {noise_floor:g} of the mean (max {top / mean if mean else 0:.3g})")
    return int(np.flatnonzero(harmonics >= (1.0 - tie) * top)[0] + 1)


def effective_mass(E01: float, m: float = 1.0) -> float:
    """Field-dressed mass ``m sqrt(1 + (m E01 / E_cr)^2 / 2)``, ``E_cr = 1``."""
    if E01 < 0:
        raise ValueError("E01 must be >= 0")
    return m * math.sqrt(1.0 + (m * E01) ** 2 / 2.0)


@dataclass
class ScanRow:
    value: float
    density: float
    peak_F: float
    keldysh_gamma: float
    failed: bool = False
    error: str = ""


@dataclass
class ScanTable:
    parameter: str
    rows: list
    metadata: dict = dc_field(default_factory=dict)

    @property
    def values(self):
        return np.array([r.value for r in self.rows])

    @property
    def densities(self):
        return np.array([r.density for r in self.rows])


def parameter_scan(base: FieldConfig, parameter: str, values, grid: MomentumGrid,
                   settings: SolverSettings = PRODUCTION, *, q=-1.0, m=1.0,
                   threads=0) -> ScanTable:
    """Slice density and peak F for each value of one pulse parameter."""
    idx, _ = _parse_path(parameter)
    rows = []
    for v in sorted(float(x) for x in values):
        try:
            cfg = base.replace_value(parameter, v)
        except ConfigError as exc:
            rows.append(ScanRow(v, math.nan, math.nan, math.nan, True, str(exc)))
            continue
        try:
            gamma = keldysh_gamma(cfg.pulses[idx], m=m, q=q)
        except ZeroDivisionError:
            gamma = math.inf
        try:
            spec = compute_spectrum(cfg, grid, settings, q=q, m=m, threads=threads)
            dens = number_density(spec)
            rows.append(ScanRow(v, dens, spec.peak, gamma))
        except ScalarQVEError as exc:
            logger.error("scan row %s=%g failed: %s", parameter, v, exc)
            rows.append(ScanRow(v, math.nan, math.nan, gamma, True, str(exc)))
    meta = {"base_field": base.to_dict(), "config_hash": base.config_hash(),
            "grid": grid.to_dict(), "solver": settings.to_dict(),
            "density_measure": "dkx dky / (2 pi)^2 over the kz slice"}
    return ScanTable(parameter, rows, meta)
