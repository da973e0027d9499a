"""Per-mode dynamics of scalar pair creation in a homogeneous field.

Three equivalent descriptions of one canonical-momentum mode ``k`` are
provided, all driven by the kinetic momentum ``p(t) = k - q A(t)``:

* ``ChiState``: the phase-space components ``chi0, chi1, chi2`` of the
  equal-time Wigner function (``chi3`` vanishes identically for a purely
  electric homogeneous field and is not stored);
* ``FghState``: the distribution ``F`` and the two auxiliary functions
  ``G, H`` of the differential quantum Vlasov equation;
* ``BogoliubovState``: mode-mixing coefficients ``alpha, beta`` plus the
  accumulated dynamical phase ``Theta``.

These are plain reference implementations; the compiled versions used in
production sweeps live in :mod:`scalarqve._kernels` and are tested
against them.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class ModeCoordinates:
    k: tuple = (0.0, 0.0, 0.0)
    m: float = 1.0
    q: float = -1.0

    def __post_init__(self):
        k = tuple(float(v) for v in self.k)
        if len(k) == 2:
            k = k + (0.0,)
        if len(k) != 3:
            raise ConfigError("k must have 2 or 3 components")
        if not self.m > 0:
            raise ConfigError("mass must be > 0")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "m", float(self.m))
        object.__setattr__(self, "q", float(self.q))

    def kinetic(self, A):
        """``p = k - q A``; complex ``A`` gives complex ``p``."""
        return np.asarray(self.k) - self.q * np.asarray(A)


class ChiState(NamedTuple):
    chi0: float
    chi1: float
    chi2: float


class FghState(NamedTuple):
    F: float
    G: float
    H: float


class BogoliubovState(NamedTuple):
    alpha: complex
    beta: complex
    Theta: float


def omega(mode: ModeCoordinates, A):
    """Instantaneous energy ``sqrt((k - qA)^2 + m^2)``.

    Real ``A`` gives a positive real number; complex ``A`` gives the
    principal square root.
    """
    p = mode.kinetic(A)
    return np.sqrt(np.sum(p * p, axis=-1) + mode.m**2)


def w_factor(mode: ModeCoordinates, E, A):
    """``W = q E.p / omega^2``, the rate that couples the mode to the field."""
    p = mode.kinetic(A)
    w2 = np.dot(p, p) + mode.m**2
    return mode.q * np.dot(np.asarray(E), p) / w2


def chi_rhs(state: ChiState, mode: ModeCoordinates, E, A) -> ChiState:
    p = mode.kinetic(A)
    a = np.dot(p, p) / mode.m
    b = a + 2.0 * mode.m
    c0, c1, c2 = state
    return ChiState(a * c2, -b * c2, a * c0 + b * c1)


def fgh_rhs(state: FghState, mode: ModeCoordinates, E, A) -> FghState:
    F, G, H = state
    w = omega(mode, A)
    W = w_factor(mode, E, A)
    return FghState(0.5 * W * G, W * (1.0 + 2.0 * F) - 2.0 * w * H, 2.0 * w * G)


def bogoliubov_rhs(state: BogoliubovState, mode: ModeCoordinates, E, A) -> BogoliubovState:
    alpha, beta, theta = state
    W = w_factor(mode, E, A)
    phase = np.exp(2j * theta)
    return BogoliubovState(
        0.5 * W * beta * phase,
        0.5 * W * alpha / phase,
        float(omega(mode, A)),
    )


def chi_to_fgh(state: ChiState, mode: ModeCoordinates, A) -> FghState:
    p = mode.kinetic(A)
    p2 = float(np.dot(p, p))
    w = float(omega(mode, A))
    b = p2 / (2.0 * mode.m * w)
    a = b + mode.m / w
    c0, c1, c2 = state
    # differences from the instantaneous vacuum, where (F, G) = (0, 0) exactly
    d0 = c0 - 0.5 * (mode.m / w + w / mode.m)
    d1 = c1 - 0.5 * (mode.m / w - w / mode.m)
    return FghState(0.5 * (a * d0 + b * d1), b * d0 + a * d1, c2)


def vacuum_chi(mode: ModeCoordinates, A_start=(0.0, 0.0, 0.0)) -> ChiState:
    w = float(omega(mode, A_start))
    m = mode.m
    return ChiState(0.5 * (m / w + w / m), 0.5 * (m / w - w / m), 0.0)


def fgh_constraint(state: FghState) -> float:
    """``(1+2F)^2 - G^2 - H^2 - 1``, zero on every vacuum-seeded trajectory."""
    F, G, H = state
    return (1.0 + 2.0 * F) ** 2 - G * G - H * H - 1.0


def chi_constraint(state: ChiState) -> float:
    c0, c1, c2 = state
    return c0 * c0 - c1 * c1 - c2 * c2 - 1.0


def bogoliubov_constraint(state: BogoliubovState) -> float:
    return abs(state.alpha) ** 2 - abs(state.beta) ** 2 - 1.0
