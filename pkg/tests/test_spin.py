import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from sta_forge import spin
from sta_forge.ansatz import eval_shape
from sta_forge.numerics import InfeasibleTargetError

CASE_I = spin.SpinSpec(np.pi / 2, float(np.exp(-2.0)))
SHORT_TARGET = spin.SpinSpec(np.pi / 2, 0.6, tf=3.6357955)
FLIP = spin.SpinSpec(np.pi, 0.6)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([np.pi / 2, np.pi]), st.floats(0.01, 0.99))
def test_costate_closed_forms(theta_f, r_f):
    p1 = spin.solve_p1(theta_f, r_f)
    assert abs(p1 - spin.p1_closed_form(theta_f, r_f)) < 1e-10 * p1
    assert abs(spin.oct_radius(theta_f, p1) - r_f) < 1e-13


def test_costate_for_general_angle_and_infeasible_target():
    theta_f = np.pi / 3
    p1 = spin.solve_p1(theta_f, 0.8)
    assert abs(spin.oct_radius(theta_f, p1) - 0.8) < 1e-13
    with pytest.raises(InfeasibleTargetError) as err:
        spin.solve_p1(theta_f, 0.4)
    assert err.value.reachable == pytest.approx((0.5, 1.0))


@pytest.mark.parametrize("spec", [CASE_I, spin.SpinSpec(np.pi / 2, 0.6), FLIP])
def test_optimal_time_and_energy_closed_forms(spec):
    assert abs(spin.oct_final_time(spec) - spin.oct_final_time_closed_form(spec)) < 1e-6
    quad = spin.oct_energy_quadrature(spec)
    assert abs(quad - spin.oct_energy_closed_form(spec)) < 5e-6 * quad


def test_hamiltonian_vanishes_and_radius_chain_holds():
    sol = spin.oct_solution(CASE_I)
    t = np.linspace(0.0, sol.tf, 400)
    theta, a, p2 = sol.trajectory(t).T
    assert np.max(np.abs(spin.control_hamiltonian(theta, sol.p1, p2))) < 1e-7
    r = spin.oct_radius(theta, sol.p1) / spin.oct_radius(CASE_I.epsilon, sol.p1)
    assert np.max(np.abs(np.exp(a) - r)) < 1e-7
    # the optimal field equals the costate p2
    assert np.max(np.abs(sol.protocol.field(t) - p2)) < 1e-7


def test_spherical_and_cartesian_bloch_agree():
    shape = spin.cubic_shape(4.0, np.pi / 2, 0.4, 0.1)
    field = spin.field_from_theta(shape)
    sph = spin.integrate_spherical(field, 0.0, (0.0, 4.0))
    cart = spin.integrate_bloch(field, [0.0, 0.0, 1.0], (0.0, 4.0), phi=0.3)
    t = np.linspace(0.0, 4.0, 201)
    theta, r, drift = spin.bloch_angles(cart(t), phi=0.3)
    assert np.max(np.abs(theta - sph(t)[:, 0])) < 1e-7
    assert np.max(np.abs(r - np.exp(sph(t)[:, 1]))) < 1e-7
    assert np.max(drift) < 1e-9


def test_bloch_matches_scipy():
    shape = spin.quadratic_shape(3.0, np.pi / 2, 0.2)
    field = spin.field_from_theta(shape)

    def rhs(t, s):
        b = field(t)
        return [-s[0] + b * s[2], -s[1], -b * s[0]]

    ref = solve_ivp(rhs, (0, 3.0), [0, 0, 1], method="DOP853", rtol=1e-12, atol=1e-14)
    ours = spin.integrate_bloch(field, [0.0, 0.0, 1.0], (0.0, 3.0))
    assert np.allclose(ours.final, ref.y[:, -1], atol=1e-9)


def test_designed_log_radius_matches_integration():
    shape = spin.cubic_shape(3.0, np.pi / 2, 0.3, 0.1)
    sph = spin.integrate_spherical(spin.field_from_theta(shape), 0.0, (0.0, 3.0))
    assert abs(sph.final[1] - spin.final_log_radius(shape)) < 1e-9
    fast_a, fast_e = spin._fast_integrals(shape)
    assert abs(fast_a - spin.final_log_radius(shape)) < 1e-12
    assert abs(fast_e - spin.energy_functional(shape)) < 1e-11


def test_reachable_ranges_at_short_target():
    lo, hi, _, _ = spin.reachable_range(SHORT_TARGET, spin.QUADRATIC)
    assert abs(lo - 0.055) < 0.005 and abs(hi - 0.476) < 0.005
    lo, hi, _, _ = spin.reachable_range(SHORT_TARGET, spin.CUBIC)
    assert abs(lo - 0.043) < 0.005 and abs(hi - 0.608) < 0.005


def test_unreachable_target_reports_interval():
    with pytest.raises(InfeasibleTargetError) as err:
        spin.optimize_ansatz(SHORT_TARGET, spin.QUADRATIC)
    lo, hi = err.value.reachable
    assert lo < hi < 0.6


def test_constrained_optimum_meets_radius_target():
    _, protocol = spin.optimize_ansatz(SHORT_TARGET, spin.CUBIC)
    assert abs(protocol.final_log_radius - np.log(0.6)) < 1e-6
    # no member of the family can beat the optimal-control energy for the same target
    assert protocol.energy >= spin.oct_energy(SHORT_TARGET) * 0.999


@pytest.mark.parametrize("phi", [0.0, 1.1])
@pytest.mark.parametrize("family,spec", [
    (spin.QUADRATIC, CASE_I), (spin.CUBIC, SHORT_TARGET), (spin.TANH_FLIP, FLIP),
])
def test_forward_closure_for_ansatz_families(family, spec, phi):
    _, protocol = spin.optimize_ansatz(spec, family)
    closure = spin.verify_spin(protocol, phi=phi)
    limit = 1e-4 if family == spin.TANH_FLIP else 1e-6
    assert closure.theta_error < limit and closure.radius_error < limit
    assert closure.phi_drift < 1e-9 and closure.max_theta_residual < 1e-10


def test_forward_closure_of_optimal_protocol():
    sol = spin.oct_solution(FLIP)
    closure = spin.verify_spin(sol.protocol)
    assert closure.theta_error < 1e-6 and closure.radius_error < 1e-6
    # the path runs from epsilon to pi - epsilon, which moves r_f only at order epsilon^2
    assert abs(np.exp(sol.protocol.final_log_radius) - FLIP.r_f) < 1e-6


def test_explicit_parameters_reproduce_optimum():
    _, best = spin.optimize_ansatz(FLIP, spin.TANH_FLIP)
    again = spin.ansatz_protocol(FLIP, spin.TANH_FLIP, best.parameters)
    assert abs(again.energy - best.energy) < 1e-12
    assert eval_shape(again.theta_shape, 0.0)[0] < FLIP.epsilon


def test_invalid_inputs():
    with pytest.raises(ValueError):
        spin.SpinSpec(np.pi / 2, 1.2)
    with pytest.raises(ValueError):
        spin.SpinSpec(4.0, 0.5)
    with pytest.raises(ValueError):
        spin.optimize_ansatz(CASE_I, spin.TANH_FLIP)
    with pytest.raises(ValueError):
        spin.optimize_ansatz(CASE_I, "sextic")
    with pytest.raises(ValueError):
        spin.oct_radius(0.5, -1.0)
