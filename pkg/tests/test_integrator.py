import math
from dataclasses import replace

import numpy as np
import pytest

from scalarqve import (ORACLE, PRODUCTION, FieldConfig, Formulation, ModeCoordinates,
                       SolverSettings, solve_mode, solve_mode_all)
from scalarqve import _kernels as K
from scalarqve.errors import ConfigError, StepBudgetExceeded, StepSizeUnderflow
from scalarqve.integrator import propagate

from conftest import slow_pulse, pulse_pair, short_field

# |beta|^2 at k = 0 for the slow linear pulse, from an independent fixed-step
# RK4 integration of the Bogoliubov system (1.4e5 steps over [-700, 700];
# 2.8e4 / 5.6e4 / 1.12e5 steps give 3.0823114e-9 / 3.0823113e-9 / 3.0823113e-9).
SLOW_PULSE_K0_REFERENCE = 3.0823113e-9

FORMS = list(Formulation)


@pytest.mark.parametrize("form", FORMS)
def test_zero_field_is_stationary(form):
    s = replace(PRODUCTION, formulation=form)
    r = solve_mode(FieldConfig.zero(tau=5.0), ModeCoordinates((0.3, -0.2, 0.1)), s)
    assert r.F_inf == 0.0
    assert r.invariant_drift == 0.0


def test_zero_field_all_formulations():
    cmp = solve_mode_all(FieldConfig.zero(tau=5.0), ModeCoordinates((0.5, 0.1, 0.0)))
    assert all(r.F_inf == 0.0 for r in cmp.results.values())


def test_slow_pulse_k0_matches_fixed_step_reference():
    s = replace(ORACLE, formulation=Formulation.BOGOLIUBOV)
    F = solve_mode(slow_pulse(), ModeCoordinates((0, 0, 0)), s).F_inf
    assert f"{F:.4e}" == f"{SLOW_PULSE_K0_REFERENCE:.4e}"


def test_pulse_pair_ring_point_chi_fgh_agree():
    tight = SolverSettings(rel_tol=1e-12, abs_tol=1e-12)
    cmp = solve_mode_all(pulse_pair(-1.0), ModeCoordinates((0.67, 0, 0)), tight)
    chi = cmp.results[Formulation.CHI].F_inf
    fgh = cmp.results[Formulation.FGH].F_inf
    assert abs(chi - fgh) <= 1e-6 * fgh


def test_discrepancy_is_symmetric():
    cmp = solve_mode_all(short_field(), ModeCoordinates((0.1, 0.2, 0)))
    for a in FORMS:
        for b in FORMS:
            assert cmp.discrepancy(a, b) == cmp.discrepancy(b, a)


@pytest.mark.parametrize("k", [(0.0, 0.0, 0.0), (0.3, -0.1, 0.2)])
def test_tolerance_halving_converges(k):
    field, mode = short_field(), ModeCoordinates(k)
    coarse = solve_mode_all(field, mode, SolverSettings(rel_tol=1e-9, abs_tol=1e-9))
    fine = solve_mode_all(field, mode, SolverSettings(rel_tol=5e-10, abs_tol=5e-10))
    for form in FORMS:
        change = abs(fine.results[form].F_inf - coarse.results[form].F_inf)
        assert change <= max(coarse.max_discrepancy, 1e-15)


def test_time_reversal_without_field():
    field = FieldConfig.zero(tau=5.0)
    mode = ModeCoordinates((0.4, 0.1, 0))
    s = replace(ORACLE, formulation=Formulation.BOGOLIUBOV)
    y0 = np.array([1.1, 0.2, 0.3, -0.4, 0.0, 0.0, 0.0])
    t0, t1 = field.time_window()
    back = propagate(field, mode, propagate(field, mode, y0, t0, t1, s), t1, t0, s)
    np.testing.assert_allclose(back, y0, atol=1e-10)


@pytest.mark.parametrize("form", FORMS)
def test_step_never_exceeds_oscillation_cap(form):
    s = replace(PRODUCTION, formulation=form)
    r = solve_mode(pulse_pair(-1.0), ModeCoordinates((0.5, 0.3, 0)), s)
    assert 0 < r.max_step_ratio <= 1.0


@pytest.mark.parametrize("form", FORMS)
def test_trajectory_invariants(form):
    s = replace(ORACLE, formulation=form, record_trajectory=True)
    r = solve_mode(short_field(), ModeCoordinates((0.2, 0.1, 0)), s)
    tr = r.trajectory
    assert tr.t[0] == r.t_span[0] and tr.t[-1] == r.t_span[1]
    assert np.all(np.diff(tr.t) > 0)
    assert np.max(np.abs(tr.constraint)) <= 1e-8
    assert np.min(tr.F) >= -1e-12
    assert tr.F[-1] == r.F_inf


def test_kernel_vacuum_matches_reference_vacuum():
    from scalarqve import vacuum_chi
    mode = ModeCoordinates((0.6, 0, 0))
    y = K.vacuum_state(K.CHI, 0.6, 0, 0, -1.0, 1.0, 0.0, 0.0)
    assert tuple(y[:3]) == tuple(vacuum_chi(mode))


def test_asymptotic_f_is_settled():
    r = solve_mode(slow_pulse(), ModeCoordinates((0.2, 0, 0)))
    assert r.tail_ok
    assert r.F_min >= -1e-12


def test_dopri5_agrees_with_dop853():
    field, mode = short_field(), ModeCoordinates((0.1, 0, 0))
    a = solve_mode(field, mode, replace(ORACLE, method="dop853"))
    b = solve_mode(field, mode, replace(ORACLE, method="dopri5"))
    assert b.F_inf == pytest.approx(a.F_inf, rel=1e-5, abs=1e-12)
    assert b.n_steps > a.n_steps


def test_step_budget_failure_carries_context():
    with pytest.raises(StepBudgetExceeded) as info:
        solve_mode(short_field(), ModeCoordinates((0.1, 0, 0)),
                   SolverSettings(max_steps=10))
    assert info.value.k == (0.1, 0.0, 0.0)
    assert info.value.formulation == "fgh"
    assert math.isfinite(info.value.t)


def test_step_underflow_failure():
    with pytest.raises(StepSizeUnderflow) as info:
        solve_mode(short_field(), ModeCoordinates((0, 0, 0)),
                   SolverSettings(rel_tol=1e-300, abs_tol=1e-300))
    assert info.value.t is not None


def test_window_defaults_and_overrides():
    s = SolverSettings()
    assert s.window(slow_pulse()) == (-700.0, 700.0)
    assert SolverSettings(t_start=-50.0, t_end=60.0).window(slow_pulse()) == (-50.0, 60.0)
    with pytest.raises(ConfigError):
        SolverSettings(t_start=1.0, t_end=0.0).window(slow_pulse())


@pytest.mark.parametrize("kwargs", [
    {"rel_tol": 0.0}, {"abs_tol": -1.0}, {"max_steps": 0}, {"method": "rk4"},
    {"formulation": "wigner"}, {"envelope_cut": 0.0},
])
def test_settings_validation(kwargs):
    with pytest.raises(ConfigError):
        SolverSettings(**kwargs)


def test_preset_tolerances():
    assert (PRODUCTION.rel_tol, PRODUCTION.abs_tol) == (1e-8, 1e-8)
    assert (ORACLE.rel_tol, ORACLE.abs_tol) == (1e-10, 1e-10)
    assert PRODUCTION.formulation is Formulation.FGH
