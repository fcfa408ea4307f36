"""Transport of a particle by a moving harmonic trap.

The mass follows ``x'' = -omega0^2 (x - x0)``.  A mass trajectory fixes the
trap path ``x0 = x + x''/omega0^2``; the relative displacement ``u = x - x0``
sets the potential energy ``m omega0^2 u^2 / 2``.  Energies are reported in
joules and in units of ``m omega0^2 d^2 / 2``.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial import Legendre, Polynomial

from .ansatz import (
    LEGENDRE,
    BoundaryCondition,
    PolynomialShape,
    eval_shape,
    fit_constrained_polynomial,
    make_tanh_tan,
)
from .numerics import OptimizationResult, integrate_adaptive, minimize, quadrature

P5 = "p5"
POLY = "poly-opt"
HYPERBOLIC = "hyperbolic"
TIME_OPTIMAL = "time-optimal"
OCT_ENERGY = "oct-energy"

DEFAULT_OMEGA0 = 2 * np.pi * 50.0
DEFAULT_TF = 0.022


@dataclass(frozen=True)
class TransportSpec:
    omega0: float = DEFAULT_OMEGA0
    tf: float = DEFAULT_TF
    d: float = 1.0
    m: float = 1.0
    delta: Optional[float] = None

    def __post_init__(self):
        for name in ("omega0", "tf", "d", "m"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.delta is not None and not self.delta > 0:
            raise ValueError(f"displacement bound must be positive, got {self.delta!r}")

    @property
    def epsilon(self):
        """Energy unit ``m omega0^2 d^2 / 2`` in joules."""
        return 0.5 * self.m * self.omega0**2 * self.d**2

    @property
    def omega_tf(self):
        return self.omega0 * self.tf


@dataclass(frozen=True)
class Jump:
    """Trap-centre discontinuity: ``x0`` goes from ``before`` to ``after`` at ``time``."""

    time: float
    before: float
    after: float


@dataclass(frozen=True)
class PotentialEnergy:
    joules: float
    normalized: float


@dataclass(frozen=True)
class TransportProtocol:
    x_shape: object
    spec: TransportSpec
    mean_potential: PotentialEnergy
    method: str
    breakpoints: tuple = ()
    jumps: tuple = ()
    parameters: dict = field(default_factory=dict)

    @property
    def tf(self):
        return self.x_shape.span[1]

    @property
    def ratio(self):
        """Mean potential energy relative to the unbounded energy optimum at the same ``tf``."""
        return self.mean_potential.joules / oct_mean_potential(self.spec, self.tf)

    def trap(self, t):
        return trap_from_mass(self.x_shape, self.spec.omega0)(t)

    def displacement(self, t):
        _, _, acc = eval_shape(self.x_shape, t)
        return -acc / self.spec.omega0**2


@dataclass(frozen=True)
class TimeOptimalPath:
    """Mass path under the bang-bang displacement ``-delta`` then ``+delta``."""

    omega0: float
    delta: float
    d: float
    tf: float

    @property
    def span(self):
        return (0.0, self.tf)

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        a = self.omega0**2 * self.delta
        first = t < 0.5 * self.tf
        x = np.where(first, 0.5 * a * t**2, self.d - 0.5 * a * (t - self.tf) ** 2)
        v = np.where(first, a * t, -a * (t - self.tf))
        acc = np.where(first, a, -a)
        return x, v, acc


def trap_from_mass(x_shape, omega0):
    """Trap-centre trajectory ``x0(t) = x(t) + x''(t)/omega0^2``."""
    def trap(t):
        x, _, acc = eval_shape(x_shape, t)
        return x + acc / omega0**2
    return trap


def mean_potential(x_shape, spec, breakpoints=(), rel_tol=None):
    """Time-averaged potential energy of the relative displacement.

    Polynomial paths use a Gauss-Legendre rule exact for their degree, since
    high-degree monomial sums carry round-off above adaptive tolerances.
    """
    lo, hi = x_shape.span

    def integrand(t):
        acc = eval_shape(x_shape, t)[2]
        return (acc / (spec.omega0**2 * spec.d)) ** 2

    if isinstance(x_shape, PolynomialShape):
        nodes, weights = np.polynomial.legendre.leggauss(max(x_shape.degree, 1))
        t = lo + 0.5 * (hi - lo) * (nodes + 1.0)
        normalized = 0.5 * float(np.dot(weights, integrand(t)))
    else:
        normalized = quadrature(integrand, lo, hi, rel_tol=rel_tol, breakpoints=breakpoints,
                                vectorized=True) / (hi - lo)
    return PotentialEnergy(joules=normalized * spec.epsilon, normalized=normalized)


def oct_mean_potential(spec, tf=None):
    """Lowest mean potential energy ``6 m d^2 / (omega0^2 tf^4)`` in joules."""
    tf = spec.tf if tf is None else tf
    return 6.0 * spec.m * spec.d**2 / (spec.omega0**2 * tf**4)


def septic_energy_closed_form(a3, a4, spec):
    """Mean potential energy (joules) of the septic with free coefficients ``a3``, ``a4``."""
    p, q = a3 - 21.0, a4 + 70.0
    bracket = 7.0 + 16.0 / 77.0 * p**2 + 4.0 / 385.0 * q**2 + p * q / 11.0
    return bracket * spec.m * spec.d**2 / (spec.omega0**2 * spec.tf**4)


def _rest_conditions(spec):
    tf, d = spec.tf, spec.d
    return [
        BoundaryCondition(0, 0.0, 0.0),
        BoundaryCondition(1, 0.0, 0.0),
        BoundaryCondition(2, 0.0, 0.0),
        BoundaryCondition(0, tf, d),
        BoundaryCondition(1, tf, 0.0),
        BoundaryCondition(2, tf, 0.0),
    ]


def _jumps(x_shape, omega0, start=0.0, end=None):
    """Jumps of the trap centre from rest at ``start`` and back to rest at ``end``."""
    lo, hi = x_shape.span
    trap = trap_from_mass(x_shape, omega0)
    x_hi = eval_shape(x_shape, hi)[0]
    end = x_hi if end is None else end
    records = []
    for time, before, after in ((lo, start, trap(lo)), (hi, trap(hi), end)):
        if abs(after - before) > 1e-12 * max(1.0, abs(end)):
            records.append(Jump(float(time), float(before), float(after)))
    return tuple(records)


def _protocol(x_shape, spec, method, parameters=None, breakpoints=()):
    return TransportProtocol(
        x_shape=x_shape,
        spec=spec,
        mean_potential=mean_potential(x_shape, spec, breakpoints),
        method=method,
        breakpoints=tuple(breakpoints),
        jumps=_jumps(x_shape, spec.omega0, 0.0, spec.d),
        parameters=dict(parameters or {}),
    )


def quintic_protocol(spec):
    shape = fit_constrained_polynomial(5, _rest_conditions(spec), T=spec.tf)
    return _protocol(shape, spec, P5)


def septic_shape(spec, a3, a4):
    """Degree-7 path in ``t/tf`` with rest conditions and free ``a3``, ``a4`` (units of d)."""
    return fit_constrained_polynomial(7, _rest_conditions(spec), {3: a3 * spec.d, 4: a4 * spec.d},
                                      T=spec.tf)


def time_optimal_protocol(spec):
    """Bang-bang displacement bounded by ``spec.delta``; returns ``(protocol, t1, tf)``."""
    if spec.delta is None:
        raise ValueError("time-optimal transport needs a displacement bound delta")
    tf = 2.0 / spec.omega0 * np.sqrt(spec.d / spec.delta)
    t1 = 0.5 * tf
    shape = TimeOptimalPath(spec.omega0, spec.delta, spec.d, tf)
    protocol = TransportProtocol(
        x_shape=shape,
        spec=spec,
        mean_potential=mean_potential(shape, spec, (t1,)),
        method=TIME_OPTIMAL,
        breakpoints=(t1,),
        jumps=_jumps(shape, spec.omega0, 0.0, spec.d),
        parameters={"t1": t1, "tf": tf},
    )
    return protocol, t1, tf


def energy_optimal_protocol(spec):
    """Cubic mass path ``d tau^2 (3 - 2 tau)``; the trap jumps at both ends."""
    shape = PolynomialShape((0.0, 0.0, 3.0 * spec.d, -2.0 * spec.d), spec.tf)
    return _protocol(shape, spec, OCT_ENERGY)


def _to_legendre(monomial, degree):
    leg = Polynomial(monomial).convert(kind=Legendre, domain=[0, 1]).coef
    return np.pad(leg, (0, degree + 1 - leg.size))


def _null_space_basis(degree):
    """Shifted-Legendre coefficients of ``tau^3 (1-tau)^3 P_k(2 tau - 1)``, k = 0..degree-6.

    These span the polynomials of ``degree`` that vanish with their first two
    derivatives at both ends.
    """
    bump = Polynomial([0, 0, 0, 1]) * Polynomial([1, -1]) ** 3
    bump = bump.convert(kind=Legendre, domain=[0, 1])
    rows = []
    for k in range(degree - 5):
        coef = (bump * Legendre.basis(k, domain=[0, 1])).coef
        rows.append(np.pad(coef, (0, degree + 1 - coef.size)))
    return np.array(rows)


def _second_derivative_gram(rows):
    """Gram matrix of ``int_0^1 p_i'' p_j'' dtau`` for shifted-Legendre coefficient rows."""
    degree = rows.shape[1] - 1
    tau, w = np.polynomial.legendre.leggauss(degree + 2)
    tau, w = 0.5 * (tau + 1), 0.5 * w
    second = np.array([Legendre(r, domain=[0, 1]).deriv(2)(tau) for r in rows])
    return (second * w) @ second.T


def _unit_septic(a3=21.0, a4=-70.0):
    return np.array([0, 0, 0, a3, a4, 21 - 6 * a3 - 3 * a4, -35 + 8 * a3 + 3 * a4, 15 - 3 * a3 - a4])


def optimize_polynomial(spec, degree, tol=None, restarts=None, max_evals=None):
    """Minimize the mean potential energy over polynomials of ``degree`` (>= 5).

    Degree 5 has no freedom.  Degree 7 optimizes ``(a3, a4)`` directly.  Higher
    degrees add ``tau^3 (1-tau)^3 q(tau)`` to the septic optimum, with ``q``
    expanded in shifted Legendre polynomials and whitened by the energy Gram
    matrix so the simplex sees an isotropic problem.  Returns
    ``(OptimizationResult, TransportProtocol)``.
    """
    if degree < 5:
        raise ValueError(f"six boundary conditions need degree >= 5, got {degree}")
    conditions = _rest_conditions(spec)
    oct_norm = 12.0 / spec.omega_tf**4

    if degree == 5:
        protocol = quintic_protocol(spec)
        result = OptimizationResult(np.zeros(0), protocol.mean_potential.normalized / oct_norm,
                                    1, True, 0.0)
        return result, protocol

    if degree in (6, 7):
        free = (3, 4) if degree == 7 else (3,)

        def cost(p):
            params = {i: v * spec.d for i, v in zip(free, p)}
            shape = fit_constrained_polynomial(degree, conditions, params, T=spec.tf)
            return mean_potential(shape, spec).normalized / oct_norm

        result = minimize(cost, np.zeros(len(free)), scale=np.full(len(free), 5.0),
                          tol=tol or 1e-8, restarts=2 if restarts is None else restarts,
                          max_evals=max_evals or 20000)
        params = {i: v * spec.d for i, v in zip(free, result.best_params)}
        shape = fit_constrained_polynomial(degree, conditions, params, T=spec.tf)
        named = {f"a{i}": float(v) for i, v in zip(free, result.best_params)}
        return result, _protocol(shape, spec, POLY, {"degree": degree, **named})

    base = _to_legendre(_unit_septic(), degree)
    basis = _null_space_basis(degree)
    gram = _second_derivative_gram(np.vstack([base, basis]))
    g = gram[0, 1:]
    quad = gram[1:, 1:]
    # beta = L^-T z turns the quadratic part into |z|^2
    to_beta = np.linalg.inv(np.linalg.cholesky(quad)).T
    const = gram[0, 0]

    def cost(z):
        beta = to_beta @ z
        return (const + 2 * g @ beta + beta @ quad @ beta) / 12.0

    n_free = degree - 5
    result = minimize(cost, np.zeros(n_free), scale=np.full(n_free, 1.0), tol=tol or 1e-8,
                      restarts=8 if restarts is None else restarts, max_evals=max_evals or 200000)
    coeffs = base + (to_beta @ result.best_params) @ basis
    shape = PolynomialShape(tuple(coeffs * spec.d), spec.tf, basis=LEGENDRE)
    return result, _protocol(shape, spec, POLY, {"degree": degree})


def hyperbolic_shape(spec, a1, a2):
    return make_tanh_tan(0.5 * spec.d, 0.5 * spec.d, a1, a2, spec.tf)


def hyperbolic_protocol(spec, a1, a2):
    return _protocol(hyperbolic_shape(spec, a1, a2), spec, HYPERBOLIC, {"a1": a1, "a2": a2})


def optimize_hyperbolic(spec, initial=(2.0, 1.2), endpoint_tol=1e-3, tol=1e-8, restarts=4):
    """Minimize the mean potential energy of the tanh-tan path over ``(a1, a2)``.

    The shape reaches its endpoints only by saturation, so trials with
    ``|x(0)| > endpoint_tol * d`` are infeasible.  Search domain is
    ``a1 in (0, 5]``, ``a2 in (1, 3]``.
    """
    oct_norm = 12.0 / spec.omega_tf**4

    def cost(p):
        a1, a2 = p
        if not (0 < a1 <= 5 and 1 < a2 <= 3):
            return np.inf
        shape = hyperbolic_shape(spec, a1, a2)
        if abs(eval_shape(shape, 0.0)[0]) > endpoint_tol * spec.d:
            return np.inf
        return mean_potential(shape, spec).normalized / oct_norm

    result = minimize(cost, initial, scale=[0.2, 0.1], tol=tol, restarts=restarts)
    a1, a2 = (float(v) for v in result.best_params)
    return result, hyperbolic_protocol(spec, a1, a2)


@dataclass(frozen=True)
class TransportClosure:
    excitation: float  # final energy above the trap ground state, units of m omega0^2 d^2 / 2
    position_error: float  # |x(tf) - d| / d
    velocity_error: float  # |x'(tf)| / (d / tf)
    max_newton_residual: float  # units of omega0^2 d
    max_deviation: float  # max |x_ode - x_shape| / d


def verify_transport(protocol, rel_tol=1e-10, samples=1000):
    """Drive the mass from rest with the protocol's trap path and measure the final excitation."""
    spec = protocol.spec
    tf = protocol.tf
    k2 = (spec.omega0 * tf) ** 2
    trap = protocol.trap

    # normalized variables: xi = x/d as a function of tau = t/tf
    def rhs(tau, y):
        return np.array([y[1], -k2 * (y[0] - trap(tau * tf) / spec.d)])

    breakpoints = tuple(b / tf for b in protocol.breakpoints)
    traj = integrate_adaptive(rhs, [0.0, 0.0], (0.0, 1.0), rel_tol=rel_tol, abs_tol=1e-13,
                              breakpoints=breakpoints)
    xi, dxi = traj.final
    tau = np.linspace(0.0, 1.0, samples + 2)[1:-1]
    tau = tau[~np.isin(tau, breakpoints)]
    x, _, acc = eval_shape(protocol.x_shape, tau * tf)
    x0 = protocol.trap(tau * tf)
    residual = np.max(np.abs(acc + spec.omega0**2 * (x - x0))) / (spec.omega0**2 * spec.d)
    return TransportClosure(
        excitation=float(dxi**2 / k2 + (xi - 1.0) ** 2),
        position_error=float(abs(xi - 1.0)),
        velocity_error=float(abs(dxi)),
        max_newton_residual=float(residual),
        max_deviation=float(np.max(np.abs(traj(tau)[:, 0] - x / spec.d))),
    )
