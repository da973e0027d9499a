import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from scalarqve import (ChiState, FghState, BogoliubovState, ModeCoordinates,
                       bogoliubov_rhs, chi_rhs, chi_to_fgh, fgh_rhs, omega,
                       vacuum_chi, w_factor)
from scalarqve import _kernels as K
from scalarqve.qve import fgh_constraint, chi_constraint, bogoliubov_constraint

vec = st.tuples(*[st.floats(-1.0, 1.0)] * 3)
small = st.floats(-2.0, 2.0)


def test_omega_examples():
    assert omega(ModeCoordinates((0, 0, 0)), (0, 0, 0)) == 1.0
    assert omega(ModeCoordinates((0.6, 0, 0)), (0, 0, 0)) == pytest.approx(math.sqrt(1.36))
    # q = -1, qA = (0.3, 0, 0)
    assert omega(ModeCoordinates((0, 0, 0)), (-0.3, 0, 0)) == pytest.approx(math.sqrt(1.09))


def test_w_factor_examples():
    mode = ModeCoordinates((0.5, 0, 0))
    assert w_factor(mode, (0.1, 0, 0), (0, 0, 0)) == pytest.approx(-0.04)
    assert w_factor(mode, (0, 0.1, 0), (0, 0, 0)) == 0.0
    assert w_factor(mode, (0, 0, 0), (0.2, 0, 0)) == 0.0


def test_vacuum_chi_examples():
    assert vacuum_chi(ModeCoordinates((0, 0, 0))) == (1.0, 0.0, 0.0)
    c = vacuum_chi(ModeCoordinates((0.6, 0, 0)))
    assert c.chi0 == pytest.approx(1.01185, abs=1e-5)
    assert c.chi1 == pytest.approx(-0.15434, abs=1e-5)


@given(vec, vec)
def test_vacuum_chi_maps_to_zero(k, A):
    mode = ModeCoordinates(k)
    s = chi_to_fgh(vacuum_chi(mode, A), mode, A)
    assert s == (0.0, 0.0, 0.0)


def test_chi_h_component_is_chi2():
    mode = ModeCoordinates((0.3, 0.1, 0))
    v = vacuum_chi(mode)
    s = chi_to_fgh(ChiState(v.chi0, v.chi1, 0.25), mode, (0, 0, 0))
    assert s == (0.0, 0.0, 0.25)


def test_chi_rhs_vacuum_at_rest_is_stationary():
    mode = ModeCoordinates((0, 0, 0))
    assert chi_rhs(vacuum_chi(mode), mode, (0, 0, 0), (0, 0, 0)) == (0.0, 0.0, 0.0)


def test_chi_rhs_zero_kinetic_momentum():
    mode = ModeCoordinates((0.2, 0, 0))
    d = chi_rhs(ChiState(1.3, 0.2, 0.4), mode, (0.1, 0, 0), (-0.2, 0, 0))
    assert d.chi0 == 0.0


@given(vec, vec, vec, st.tuples(small, small, small))
def test_chi_chain_rule_matches_fgh(k, E, A, state):
    # dF/dt via chi_to_fgh must equal fgh_rhs of the transformed state,
    # including the explicit time dependence through A(t)
    mode = ModeCoordinates(k)
    chi = ChiState(*state)
    dchi = chi_rhs(chi, mode, E, A)
    dA = -np.asarray(E)
    h = 1e-6

    def fgh_at(s):
        c = ChiState(*(np.asarray(chi) + s * np.asarray(dchi)))
        return np.asarray(chi_to_fgh(c, mode, np.asarray(A) + s * dA))

    lhs = (fgh_at(h) - fgh_at(-h)) / (2 * h)
    rhs = np.asarray(fgh_rhs(FghState(*chi_to_fgh(chi, mode, A)), mode, E, A))
    np.testing.assert_allclose(lhs, rhs, atol=1e-6 * (1 + np.max(np.abs(rhs))))


def test_fgh_rhs_vacuum_seeding():
    mode = ModeCoordinates((0.4, 0, 0))
    E, A = (0.1, 0, 0), (0, 0, 0)
    W = w_factor(mode, E, A)
    assert fgh_rhs(FghState(0, 0, 0), mode, E, A) == (0.0, W, 0.0)


def test_fgh_rhs_g_zero():
    mode = ModeCoordinates((0.4, 0.1, 0))
    d = fgh_rhs(FghState(0.3, 0.0, 0.2), mode, (0.1, 0.05, 0), (0.1, 0, 0))
    assert d.F == 0.0 and d.H == 0.0


@given(vec, vec, vec, st.tuples(small, small, small))
def test_fgh_constraint_derivative_vanishes(k, E, A, s):
    mode = ModeCoordinates(k)
    F, G, H = s
    dF, dG, dH = fgh_rhs(FghState(F, G, H), mode, E, A)
    deriv = 4 * (1 + 2 * F) * dF - 2 * G * dG - 2 * H * dH
    assert abs(deriv) <= 1e-12 * (1 + abs(F) + abs(G) + abs(H)) ** 2 * (1 + np.max(np.abs(E)))


def test_bogoliubov_rhs_examples():
    mode = ModeCoordinates((0.4, 0, 0))
    E0 = (0, 0, 0)
    d = bogoliubov_rhs(BogoliubovState(0.9 + 0.1j, 0.2j, 0.3), mode, E0, (0, 0, 0))
    assert d.alpha == 0 and d.beta == 0
    assert d.Theta == pytest.approx(omega(mode, (0, 0, 0)))
    E = (0.1, 0, 0)
    W = w_factor(mode, E, (0, 0, 0))
    d = bogoliubov_rhs(BogoliubovState(1.0, 0.0, 0.0), mode, E, (0, 0, 0))
    assert d.beta == pytest.approx(W / 2)


def test_constraint_helpers():
    assert fgh_constraint(FghState(0, 0, 0)) == 0.0
    assert chi_constraint(ChiState(1, 0, 0)) == 0.0
    assert bogoliubov_constraint(BogoliubovState(1.0, 0.0, 0.0)) == 0.0


@given(vec, st.floats(-1, 1), st.floats(-1, 1), st.floats(-3, 3),
       st.tuples(small, small, small, small, small))
def test_kernel_rhs_matches_reference(k, ax, ay, t, s):
    pulses = np.array([[0.15, 0.5, 0.6, 8.0, 0.0, 0.3]])
    E = np.array([K.field_at(pulses, t)[0], K.field_at(pulses, t)[1], 0.0])
    A = np.array([ax, ay, 0.0])
    mode = ModeCoordinates(k)
    out = np.empty(5)
    K.rhs(K.CHI, t, np.array([s[0], s[1], s[2], ax, ay]), out, pulses, *k, -1.0, 1.0)
    # kernel subtracts the instantaneous vacuum in d(chi2); same value analytically
    np.testing.assert_allclose(out[:3], chi_rhs(ChiState(*s[:3]), mode, E, A),
                               atol=1e-12)
    np.testing.assert_allclose(out[3:], -E[:2], rtol=1e-15)
    K.rhs(K.FGH, t, np.array([s[0], s[1], s[2], ax, ay]), out, pulses, *k, -1.0, 1.0)
    np.testing.assert_allclose(out[:3], fgh_rhs(FghState(*s[:3]), mode, E, A), rtol=1e-13,
                               atol=1e-15)
    out7 = np.empty(7)
    y = np.array([s[0], s[1], s[2], s[3], s[4], ax, ay])
    K.rhs(K.BOGOLIUBOV, t, y, out7, pulses, *k, -1.0, 1.0)
    ref = bogoliubov_rhs(BogoliubovState(complex(s[0], s[1]), complex(s[2], s[3]), s[4]),
                         mode, E, A)
    np.testing.assert_allclose(out7[:5], [ref.alpha.real, ref.alpha.imag, ref.beta.real,
                                          ref.beta.imag, ref.Theta], rtol=1e-12, atol=1e-14)


@given(vec, st.floats(-1, 1), st.floats(-1, 1))
def test_kernel_vacuum_and_distribution(k, ax, ay):
    for form in (K.CHI, K.FGH, K.BOGOLIUBOV):
        y = K.vacuum_state(form, *k, -1.0, 1.0, ax, ay)
        assert K.distribution(form, y, *k, -1.0, 1.0) == 0.0
        assert abs(K.constraint(form, y)) <= 1e-15 * (1 + y[0] ** 2)
