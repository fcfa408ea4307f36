import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from sta_forge import transport as tr
from sta_forge.ansatz import eval_shape
from sta_forge.numerics import quadrature

SPEC = tr.TransportSpec()


def test_septic_energy_polynomial_is_exact():
    tau, a3, a4 = sp.symbols("tau a3 a4")
    c = sp.symbols("c5:8")
    p = a3 * tau**3 + a4 * tau**4 + sum(ci * tau ** (5 + i) for i, ci in enumerate(c))
    conds = [p.subs(tau, 1) - 1, sp.diff(p, tau).subs(tau, 1), sp.diff(p, tau, 2).subs(tau, 1)]
    p = p.subs(sp.solve(conds, c))
    # mean potential in units of m d^2 / (omega0^2 tf^4) is half of int p''^2
    energy = sp.expand(sp.integrate(sp.diff(p, tau, 2) ** 2, (tau, 0, 1)) / 2)
    P, Q = sp.symbols("P Q")
    shifted = sp.expand(energy.subs({a3: P + 21, a4: Q - 70}))
    assert shifted.coeff(P, 2).subs(Q, 0) == sp.Rational(16, 77)
    assert shifted.coeff(Q, 2).subs(P, 0) == sp.Rational(4, 385)
    assert shifted.coeff(P, 1).coeff(Q, 1) == sp.Rational(1, 11)
    assert shifted.subs({P: 0, Q: 0}) == 7


@settings(max_examples=20, deadline=None)
@given(st.floats(-40, 80), st.floats(-150, 20))
def test_septic_closed_form_matches_quadrature(a3, a4):
    shape = tr.septic_shape(SPEC, a3, a4)
    numeric = tr.mean_potential(shape, SPEC).joules
    assert abs(numeric - tr.septic_energy_closed_form(a3, a4, SPEC)) <= 1e-9 * numeric


def test_polynomial_energy_matches_adaptive_quadrature():
    shape = tr.septic_shape(SPEC, 10.0, -40.0)
    exact = tr.mean_potential(shape, SPEC)
    ref = quadrature(lambda t: (eval_shape(shape, t)[2] / (SPEC.omega0**2 * SPEC.d)) ** 2,
                     0.0, SPEC.tf, rel_tol=1e-12, vectorized=True) / SPEC.tf
    assert abs(exact.normalized - ref) < 1e-10 * ref


def test_quintic_ratio_and_boundary_state():
    protocol = tr.quintic_protocol(SPEC)
    assert abs(protocol.ratio - 10 / 7) < 1e-12
    for t, x in ((0.0, 0.0), (SPEC.tf, 1.0)):
        v, d1, d2 = eval_shape(protocol.x_shape, t)
        assert abs(v - x) < 1e-12 and abs(d1) < 1e-9 and abs(d2) < 1e-6
    assert protocol.jumps == ()


def test_energy_optimum_and_its_jumps():
    protocol = tr.energy_optimal_protocol(SPEC)
    assert abs(protocol.mean_potential.joules / tr.oct_mean_potential(SPEC) - 1) < 1e-12
    assert len(protocol.jumps) == 2
    start, end = protocol.jumps
    assert start.before == 0.0 and abs(start.after - 6 / SPEC.omega_tf**2) < 1e-12
    assert end.after == 1.0


def test_time_optimal_identity():
    delta = 0.05
    spec = tr.TransportSpec(delta=delta)
    protocol, t1, tf = tr.time_optimal_protocol(spec)
    assert abs(tf - 2 / spec.omega0 * np.sqrt(1 / delta)) < 1e-15
    identity = 0.5 * spec.m * spec.omega0**2 * delta**2
    assert abs(protocol.mean_potential.joules - identity) < 1e-12 * identity
    assert abs(identity - 8 * spec.m * spec.d**2 / (spec.omega0**2 * tf**4)) < 1e-12 * identity
    with pytest.raises(ValueError):
        tr.time_optimal_protocol(SPEC)


def test_optimized_ratios_decrease_with_degree():
    ratios = [tr.optimize_polynomial(SPEC, n)[1].ratio for n in (5, 7, 9, 19)]
    assert all(a >= b - 1e-12 for a, b in zip(ratios, ratios[1:]))
    assert abs(ratios[1] - 7 / 6) < 1e-9
    assert ratios[-1] <= 1.03


def test_degree_nineteen_shape_keeps_rest_conditions():
    _, protocol = tr.optimize_polynomial(SPEC, 19)
    for t, x in ((0.0, 0.0), (SPEC.tf, 1.0)):
        v, d1, d2 = eval_shape(protocol.x_shape, t)
        assert abs(v - x) < 1e-11
        assert abs(d1) * SPEC.tf < 1e-9 and abs(d2) * SPEC.tf**2 < 1e-7


def test_closure_against_scipy():
    _, protocol = tr.optimize_polynomial(SPEC, 7)
    w2 = SPEC.omega0**2
    ref = solve_ivp(lambda t, y: [y[1], -w2 * (y[0] - protocol.trap(t))], (0, SPEC.tf), [0, 0],
                    method="DOP853", rtol=1e-12, atol=1e-14)
    assert abs(ref.y[0, -1] - 1) < 1e-8
    closure = tr.verify_transport(protocol)
    assert closure.excitation < 1e-12 and closure.position_error < 1e-8
    assert closure.max_newton_residual < 1e-10


@pytest.mark.parametrize("build", [
    tr.quintic_protocol,
    tr.energy_optimal_protocol,
    lambda s: tr.optimize_polynomial(s, 19)[1],
    lambda s: tr.time_optimal_protocol(tr.TransportSpec(delta=0.1))[0],
])
def test_forward_closure(build):
    closure = tr.verify_transport(build(SPEC))
    assert closure.excitation < 1e-12
    assert closure.position_error < 1e-6 and closure.velocity_error < 1e-6


def test_hyperbolic_shape_saturates_within_tolerance():
    protocol = tr.hyperbolic_protocol(SPEC, 1.2, 1.25)
    assert protocol.ratio <= 1.001
    assert abs(eval_shape(protocol.x_shape, 0.0)[0]) < 1e-3
    closure = tr.verify_transport(protocol)
    assert closure.excitation < 1e-4


def test_hyperbolic_optimizer_respects_endpoint_tolerance():
    result, protocol = tr.optimize_hyperbolic(SPEC)
    assert abs(eval_shape(protocol.x_shape, 0.0)[0]) <= 1e-3 * (1 + 1e-9)
    assert protocol.ratio < tr.hyperbolic_protocol(SPEC, 1.2, 1.25).ratio


def test_invalid_specs():
    with pytest.raises(ValueError):
        tr.TransportSpec(tf=0.0)
    with pytest.raises(ValueError):
        tr.TransportSpec(delta=-1.0)
    with pytest.raises(ValueError):
        tr.optimize_polynomial(SPEC, 4)
