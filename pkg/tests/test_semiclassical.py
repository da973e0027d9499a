import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.signal import argrelmax, argrelmin

from scalarqve import (FieldConfig, ModeCoordinates, Statistics, analyze, build_potential,
                       find_turning_points, interference_estimate, phase_integral_K,
                       solve_mode)
from scalarqve.errors import NoRootsFound
from scalarqve.semiclassical import TurningPointPair, _omega2_and_slope

from conftest import slow_pulse

REGION = (-150.0, 150.0, 0.0, 20.0)
SEEDS = (30, 4)


@pytest.fixture(scope="module")
def slow_pulse_setup():
    field = slow_pulse()
    return field, build_potential(field)


def test_zero_field_has_no_turning_points():
    with pytest.raises(NoRootsFound):
        find_turning_points(FieldConfig.zero(tau=10.0), ModeCoordinates((0.1, 0, 0)))


def test_roots_conjugate_and_distinct(slow_pulse_setup):
    field, table = slow_pulse_setup
    mode = ModeCoordinates((0.1, 0, 0))
    roots = find_turning_points(field, mode, REGION, SEEDS, table)
    assert len(roots) >= 2
    for r in roots:
        assert r.t_p.imag > 0
        f, _ = _omega2_and_slope(field, mode, r.conjugate, table)
        assert abs(f) <= 1e-9
    ts = np.array([r.t_p for r in roots])
    gaps = np.abs(ts[:, None] - ts[None, :]) + np.eye(ts.size)
    assert gaps.min() >= 1e-6


def test_fringe_maximum_pairs_are_a_carrier_period_apart(slow_pulse_setup):
    field, table = slow_pulse_setup
    rep = analyze(field, ModeCoordinates((0.105, 0, 0)), REGION, SEEDS, table)
    t1, t2 = rep.pairs[0].t_p, rep.pairs[1].t_p
    assert abs(abs(t2.real - t1.real) - math.pi / 0.1) <= 0.1 * math.pi / 0.1


def test_k_is_positive_and_endpoint_symmetric(slow_pulse_setup):
    field, table = slow_pulse_setup
    mode = ModeCoordinates((0.2, 0, 0))
    root = find_turning_points(field, mode, REGION, SEEDS, table)[0]
    K = phase_integral_K(field, mode, root, table)
    K_swapped = phase_integral_K(field, mode, TurningPointPair(root.conjugate, 0.0), table)
    assert K > 0
    assert K_swapped == pytest.approx(K, rel=1e-10)


def test_k0_dominant_exponent_matches_ode(slow_pulse_setup):
    field, table = slow_pulse_setup
    mode = ModeCoordinates((0, 0, 0))
    rep = analyze(field, mode, table=table)  # default region and seeds
    F_ode = solve_mode(field, mode).F_inf
    F_semi = math.exp(-2 * rep.K_values[0])
    assert abs(math.log(F_ode) - math.log(F_semi)) <= 0.35 * abs(math.log(F_ode))


def test_interference_examples():
    assert interference_estimate(1.0) == pytest.approx(0.1353352832366127, rel=1e-15)
    K = 2.0
    alpha = math.pi / 2  # cos(2 alpha) = -1
    assert interference_estimate(K, K, alpha, Statistics.BOSON) == pytest.approx(0.0, abs=1e-17)
    assert interference_estimate(K, K, alpha, Statistics.FERMION) == pytest.approx(
        4 * math.exp(-2 * K), rel=1e-14)


@given(st.floats(0.0, 30.0), st.floats(0.0, 30.0), st.floats(-100.0, 100.0))
def test_statistics_complementarity(K1, K2, alpha):
    b = interference_estimate(K1, K2, alpha, Statistics.BOSON)
    f = interference_estimate(K1, K2, alpha, Statistics.FERMION)
    target = 2 * (math.exp(-2 * K1) + math.exp(-2 * K2))
    assert abs(b + f - target) <= 4 * np.finfo(float).eps * target


def test_fringe_phase_prediction(slow_pulse_setup):
    # two-pair interference phase versus the exact spectrum along the field axis
    field, table = slow_pulse_setup
    kxs = np.linspace(0.0, 0.63, 43)
    cell = kxs[1] - kxs[0]
    exact, c2, fermion = [], [], []
    for kx in kxs:
        mode = ModeCoordinates((kx, 0, 0))
        rep = analyze(field, mode, REGION, SEEDS, table)
        exact.append(solve_mode(field, mode).F_inf)
        c2.append(math.cos(2 * rep.alpha))
        fermion.append(rep.F_estimate_fermion)
    predicted = kxs[argrelmax(np.array(c2))[0]]
    ode_max = kxs[argrelmax(np.array(exact))[0]]
    fermion_min = kxs[argrelmin(np.array(fermion))[0]]
    assert predicted.size >= 4
    for k in predicted:
        assert np.min(np.abs(ode_max - k)) <= cell + 1e-12
        assert np.min(np.abs(fermion_min - k)) <= cell + 1e-12


def test_report_is_sorted_and_flags(slow_pulse_setup):
    field, table = slow_pulse_setup
    rep = analyze(field, ModeCoordinates((0.3, 0, 0)), REGION, SEEDS, table)
    assert rep.K_values == sorted(rep.K_values)
    assert rep.n_pairs == len(rep.pairs) >= 2
    assert rep.F_estimate_boson > 0 and rep.F_estimate_fermion > 0
    assert not rep.flagged


def test_region_must_reach_into_upper_half_plane(slow_pulse_setup):
    field, table = slow_pulse_setup
    with pytest.raises(ValueError):
        find_turning_points(field, ModeCoordinates((0, 0, 0)), (-10, 10, 0, 0), SEEDS, table)
