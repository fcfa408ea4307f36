import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad, solve_ivp

from sta_forge.numerics import (
    IntegrationError,
    OptimizationError,
    QuadratureError,
    RootError,
    find_root,
    integrate_adaptive,
    minimize,
    quadrature,
)
from sta_forge.numerics.tolerances import ENV_VAR, env_rel_tol, ode_rel_tol


# ---------------------------------------------------------------- ODE


def oscillator(t, y):
    return np.array([y[1], -y[0]])


def test_harmonic_oscillator_matches_closed_form():
    traj = integrate_adaptive(oscillator, [1.0, 0.0], (0.0, 10.0), rel_tol=1e-11, abs_tol=1e-13)
    assert traj.times[0] == 0.0 and traj.times[-1] == 10.0
    assert np.all(np.diff(traj.times) > 0)
    assert np.allclose(traj.final, [np.cos(10.0), -np.sin(10.0)], atol=1e-9)


def test_dense_output_between_steps():
    traj = integrate_adaptive(oscillator, [1.0, 0.0], (0.0, 6.0), rel_tol=1e-11, abs_tol=1e-13)
    t = np.linspace(0.0, 6.0, 777)
    assert np.max(np.abs(traj(t)[:, 0] - np.cos(t))) < 1e-8


def test_agrees_with_scipy_on_nonlinear_problem():
    def vdp(t, y):
        return np.array([y[1], 2.0 * (1 - y[0] ** 2) * y[1] - y[0]])

    ours = integrate_adaptive(vdp, [2.0, 0.0], (0.0, 5.0), rel_tol=1e-10, abs_tol=1e-12)
    ref = solve_ivp(vdp, (0.0, 5.0), [2.0, 0.0], method="DOP853", rtol=1e-12, atol=1e-13)
    assert np.allclose(ours.final, ref.y[:, -1], rtol=1e-7, atol=1e-8)


def test_breakpoints_are_hit_and_discontinuity_resolved():
    # y' = sign(t - 1): y(2) = 0 exactly, with a kink at t = 1
    def rhs(t, y):
        return np.array([-1.0 if t < 1.0 else 1.0])

    traj = integrate_adaptive(rhs, [1.0], (0.0, 2.0), breakpoints=(1.0,), rel_tol=1e-10)
    assert 1.0 in traj.times
    assert abs(traj.final[0] - 1.0) < 1e-12
    assert abs(traj(1.0)[0]) < 1e-12


def test_trajectory_arrays_are_read_only():
    traj = integrate_adaptive(oscillator, [1.0, 0.0], (0.0, 1.0))
    with pytest.raises(ValueError):
        traj.states[0, 0] = 3.0
    with pytest.raises(ValueError):
        traj(1.5)


def test_ode_rejects_bad_inputs():
    with pytest.raises(ValueError):
        integrate_adaptive(oscillator, [1.0, 0.0], (1.0, 0.0))
    with pytest.raises(ValueError):
        integrate_adaptive(oscillator, [1.0, 0.0], (0.0, 1.0), rel_tol=-1.0)


def test_finite_time_blow_up_raises():
    with pytest.raises(IntegrationError):
        integrate_adaptive(lambda t, y: y**2, [1.0], (0.0, 2.0))


def test_step_budget_exhaustion_raises():
    with pytest.raises(IntegrationError):
        integrate_adaptive(oscillator, [1.0, 0.0], (0.0, 100.0), max_steps=5)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(0.5, 5.0))
def test_linear_decay_property(rate, t1):
    traj = integrate_adaptive(lambda t, y: -rate * y, [1.0], (0.0, t1), rel_tol=1e-10)
    assert abs(traj.final[0] - np.exp(-rate * t1)) < 1e-9


# ---------------------------------------------------------------- quadrature


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=12), st.floats(-2, 0), st.floats(0.1, 3))
def test_polynomials_integrate_exactly(coeffs, a, width):
    b = a + width
    poly = np.polynomial.Polynomial(coeffs)
    exact = poly.integ()(b) - poly.integ()(a)
    value = quadrature(poly, a, b, rel_tol=1e-13, vectorized=True)
    assert abs(value - exact) <= 1e-11 * max(1.0, np.sum(np.abs(coeffs)) * max(1, abs(a), abs(b)) ** 12)


def test_quadrature_matches_scipy_on_peaked_integrand():
    def g(x):
        return 1.0 / (1e-3 + (x - 0.3) ** 2)

    ref = quad(g, 0.0, 1.0, points=[0.3], epsabs=0, epsrel=1e-13, limit=500)[0]
    assert abs(quadrature(g, 0.0, 1.0, rel_tol=1e-12) - ref) < 1e-10 * ref


def test_quadrature_breakpoint_handles_kink():
    value = quadrature(lambda x: np.abs(x - 0.37), 0.0, 1.0, breakpoints=(0.37,), vectorized=True)
    assert abs(value - (0.37**2 + 0.63**2) / 2) < 1e-14


def test_quadrature_reports_non_finite_samples():
    with pytest.raises(QuadratureError) as err:
        quadrature(lambda x: 1.0 / (x - 0.5) if x != 0.5 else np.inf, 0.0, 1.0)
    assert err.value.location is not None


def test_quadrature_rejects_reversed_interval():
    with pytest.raises(ValueError):
        quadrature(np.sin, 1.0, 0.0)


# ---------------------------------------------------------------- roots


def test_find_root():
    assert abs(find_root(np.cos, (0.0, 3.0)) - np.pi / 2) < 1e-12
    with pytest.raises(RootError):
        find_root(lambda x: x**2 + 1, (-1.0, 1.0))


# ---------------------------------------------------------------- optimizer


def rosenbrock(p):
    x, y = p
    return (1 - x) ** 2 + 100 * (y - x * x) ** 2


def test_minimize_rosenbrock():
    res = minimize(rosenbrock, [-1.2, 1.0], tol=1e-10, restarts=2)
    assert res.converged
    assert np.allclose(res.best_params, [1.0, 1.0], atol=1e-7)
    assert res.simplex_spread <= 1e-10


def test_best_cost_bounds_history():
    res = minimize(lambda p: (p[0] - 0.3) ** 2 + abs(p[1]), [2.0, 1.0], restarts=1)
    assert all(res.best_cost <= cost for _, cost in res.history)
    assert np.isfinite(res.best_cost)


def test_minimize_is_deterministic():
    a = minimize(rosenbrock, [-1.2, 1.0])
    b = minimize(rosenbrock, [-1.2, 1.0])
    assert np.array_equal(a.best_params, b.best_params) and a.evaluations == b.evaluations


def test_ties_prefer_smallest_parameters():
    # flat plateau: every point has cost 0, so the lexicographically smallest sample wins
    res = minimize(lambda p: 0.0, [1.0, 1.0], restarts=0)
    smallest = min(tuple(x) for x, _ in res.history)
    assert tuple(res.best_params) == smallest


def test_infeasible_region_is_avoided():
    res = minimize(lambda p: np.inf if p[0] < 0.5 else (p[0] - 0.2) ** 2, [1.0])
    assert abs(res.best_params[0] - 0.5) < 1e-6


def test_all_non_finite_raises():
    with pytest.raises(OptimizationError):
        minimize(lambda p: np.nan, [0.0, 0.0], max_evals=50)


def test_budget_exhaustion_reports_not_converged():
    res = minimize(rosenbrock, [-1.2, 1.0], max_evals=30)
    assert not res.converged and res.evaluations == 30


# ---------------------------------------------------------------- tolerance override


def test_env_tolerance(monkeypatch):
    monkeypatch.delenv(ENV_VAR, raising=False)
    assert env_rel_tol() is None
    monkeypatch.setenv(ENV_VAR, "1e-8")
    assert ode_rel_tol() == 1e-8
    monkeypatch.setenv(ENV_VAR, "abc")
    with pytest.raises(ValueError):
        env_rel_tol()
    monkeypatch.setenv(ENV_VAR, "2")
    with pytest.raises(ValueError):
        env_rel_tol()
