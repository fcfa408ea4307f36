"""Frictionless expansion of a harmonic trap through the Ermakov equation.

Everything is in normalized units: time ``s = omega0 t``, control
``u = omega(s)^2 / omega0^2``, scaling factor ``b`` obeying

    b'' + u b = 1 / b^3,

and energies in units of ``hbar omega0 / 4``.  The expansion ratio is
``gamma = sqrt(omega0 / omega_f)``, so the final control is ``1 / gamma^4``.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .ansatz import BoundaryCondition, eval_shape, fit_constrained_polynomial
from .numerics import integrate_adaptive, minimize, quadrature

QUINTIC = "quintic-IE"
CUBIC = "cubic-IE"
BANG_BANG_3 = "bang-bang-3"
BANG_BANG_2 = "bang-bang-2"
OCT_ENERGY = "oct-energy"


@dataclass(frozen=True)
class ExpansionSpec:
    gamma: float
    sf: float
    control_bound: float = 1.0

    def __post_init__(self):
        if not self.gamma > 1:
            raise ValueError(f"gamma must exceed 1 for an expansion, got {self.gamma!r}")
        if not self.sf > 0:
            raise ValueError(f"normalized final time must be positive, got {self.sf!r}")
        if not self.control_bound > 0:
            raise ValueError(f"control bound must be positive, got {self.control_bound!r}")

    @classmethod
    def from_gamma_sq(cls, gamma_sq, sf, control_bound=1.0):
        return cls(float(np.sqrt(gamma_sq)), sf, control_bound)

    @classmethod
    def from_frequency_ratio(cls, omega_f_sq_ratio, sf, control_bound=1.0):
        """Build from ``omega_f^2 / omega0^2`` (equal to ``gamma^-4``)."""
        if not 0 < omega_f_sq_ratio < 1:
            raise ValueError("omega_f^2/omega0^2 must lie in (0, 1) for an expansion")
        return cls(float(omega_f_sq_ratio ** -0.25), sf, control_bound)


@dataclass(frozen=True)
class ExpansionProtocol:
    """A designed scaling trajectory and the control that produces it.

    ``initial_state`` is ``(b, b')`` just after ``s = 0``; it differs from the
    trap's resting state ``(1, 0)`` only for protocols with an impulsive kick.
    """

    b_shape: object
    control: Callable
    mean_energy_ratio: float
    method: str
    gamma: float
    sf: float
    breakpoints: tuple = ()
    initial_state: tuple = (1.0, 0.0)
    parameters: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BangBangScaling:
    """Closed-form scaling factor under the control ``-w1^2`` then ``w2^2``."""

    gamma: float
    w1: float
    w2: float
    s1: float
    sf: float

    @property
    def span(self):
        return (0.0, self.sf)

    def evaluate(self, s):
        s = np.asarray(s, dtype=float)
        g2 = self.gamma**2
        # first branch, b^2 = 1 + c1 sinh^2(w1 s)
        c1 = (self.w1**2 + 1.0) / self.w1**2
        x1 = self.w1 * np.minimum(s, self.s1)
        q1 = 1.0 + c1 * np.sinh(x1) ** 2
        dq1 = c1 * self.w1 * np.sinh(2 * x1)
        ddq1 = 2 * c1 * self.w1**2 * np.cosh(2 * x1)
        # second branch, b^2 = gamma^2 + c2 sin^2(w2 (sf - s))
        c2 = (1.0 - g2**2 * self.w2**2) / (g2 * self.w2**2)
        x2 = self.w2 * (self.sf - np.maximum(s, self.s1))
        q2 = g2 + c2 * np.sin(x2) ** 2
        dq2 = -c2 * self.w2 * np.sin(2 * x2)
        ddq2 = 2 * c2 * self.w2**2 * np.cos(2 * x2)
        first = s < self.s1
        q = np.where(first, q1, q2)
        dq = np.where(first, dq1, dq2)
        ddq = np.where(first, ddq1, ddq2)
        b = np.sqrt(q)
        d1 = dq / (2 * b)
        d2 = (0.5 * ddq - d1**2) / b
        return b, d1, d2

    def control(self, s):
        return np.where(np.asarray(s) < self.s1, -self.w1**2, self.w2**2)


@dataclass(frozen=True)
class OptimalEnergyScaling:
    """``b(s)^2 = alpha s^2 + beta s + 1``, the unbounded energy-optimal path."""

    alpha: float
    beta: float
    sf: float

    @property
    def span(self):
        return (0.0, self.sf)

    def evaluate(self, s):
        s = np.asarray(s, dtype=float)
        q = self.alpha * s**2 + self.beta * s + 1.0
        b = np.sqrt(q)
        d1 = (2 * self.alpha * s + self.beta) / (2 * b)
        d2 = (self.alpha - d1**2) / b
        return b, d1, d2


def control_from_scaling(b_shape, samples=401):
    """Control ``u(s) = 1/b^4 - b''/b`` that makes ``b_shape`` solve the Ermakov equation."""
    lo, hi = b_shape.span
    b = eval_shape(b_shape, np.linspace(lo, hi, samples))[0]
    if np.any(b <= 0):
        raise ValueError("scaling factor must stay positive on its span")

    def control(s):
        b, _, d2 = eval_shape(b_shape, s)
        if np.any(np.asarray(b) <= 0):
            raise ValueError(f"non-positive scaling factor at s = {s!r}")
        return 1.0 / b**4 - d2 / b

    return control


def energy_density(b_shape, s):
    """Integrand ``b'^2 + 1/b^2`` of the mean potential energy."""
    b, d1, _ = eval_shape(b_shape, s)
    return d1**2 + 1.0 / b**2


def mean_energy(b_shape, sf=None, breakpoints=(), rel_tol=None):
    """Time-averaged potential energy ``(1/sf) int (b'^2 + 1/b^2) ds`` in units of hbar omega0/4."""
    lo, hi = b_shape.span
    if sf is not None and abs(sf - hi) > 1e-12 * hi:
        raise ValueError(f"shape span {hi!r} does not match final time {sf!r}")
    total = quadrature(lambda s: energy_density(b_shape, s), lo, hi, rel_tol=rel_tol,
                       breakpoints=breakpoints, vectorized=True)
    return total / (hi - lo)


def quintic_shape(gamma, sf):
    conditions = [
        BoundaryCondition(0, 0.0, 1.0),
        BoundaryCondition(1, 0.0, 0.0),
        BoundaryCondition(2, 0.0, 0.0),
        BoundaryCondition(0, sf, gamma),
        BoundaryCondition(1, sf, 0.0),
        BoundaryCondition(2, sf, 0.0),
    ]
    return fit_constrained_polynomial(5, conditions, T=sf)


def quintic_protocol(spec):
    shape = quintic_shape(spec.gamma, spec.sf)
    return ExpansionProtocol(
        b_shape=shape,
        control=control_from_scaling(shape),
        mean_energy_ratio=mean_energy(shape),
        method=QUINTIC,
        gamma=spec.gamma,
        sf=spec.sf,
    )


def cubic_shape(gamma, sf, a2, a3):
    """Cubic in ``tau = s/sf`` with ``b(0) = 1``, ``b(sf) = gamma`` and given ``a2``, ``a3``."""
    conditions = [BoundaryCondition(0, 0.0, 1.0), BoundaryCondition(0, sf, gamma)]
    return fit_constrained_polynomial(3, conditions, {2: a2, 3: a3}, T=sf)


def _cubic_protocol(spec, a2, a3, parameters):
    shape = cubic_shape(spec.gamma, spec.sf, a2, a3)
    _, d1, _ = eval_shape(shape, 0.0)
    return ExpansionProtocol(
        b_shape=shape,
        control=control_from_scaling(shape),
        mean_energy_ratio=mean_energy(shape),
        method=CUBIC,
        gamma=spec.gamma,
        sf=spec.sf,
        initial_state=(1.0, d1),
        parameters=parameters,
    )


def bang_bang_times(w1, w2, gamma):
    """Switching time ``s1`` and final time ``sf`` of the three-jump protocol.

    ``w1``, ``w2`` are the bang frequencies in units of omega0; ``w2`` must lie
    in ``[1/gamma, 1]``.
    """
    if not gamma > 1:
        raise ValueError(f"gamma must exceed 1, got {gamma!r}")
    if not w1 > 0:
        raise ValueError(f"w1 must be positive, got {w1!r}")
    g2 = gamma**2
    lower = 1.0 / gamma
    if w2 < lower * (1 - 1e-12) or w2 > 1.0:
        raise ValueError(f"w2 must lie in [1/gamma, 1] = [{lower!r}, 1], got {w2!r}")
    a, b = w1**2, w2**2
    arg1 = a * (g2 - 1) * max(g2 * b - 1, 0.0) / (g2 * (a + 1) * (b + a))
    s1 = np.arcsinh(np.sqrt(arg1)) / w1
    arg2 = b * (g2 - 1) * (g2 * a + 1) / ((a + b) * (g2**2 * b - 1))
    sf = s1 + np.arcsin(np.sqrt(min(arg2, 1.0))) / w2
    return float(s1), float(sf)


def bang_bang_protocol(w1, w2, gamma, control_bound=1.0):
    """Time-optimal protocol with control ``-w1^2`` on ``(0, s1)`` and ``w2^2`` on ``(s1, sf)``."""
    if max(w1, w2) ** 2 > control_bound * (1 + 1e-12):
        raise ValueError(f"bang amplitudes exceed the control bound {control_bound!r}")
    s1, sf = bang_bang_times(w1, w2, gamma)
    shape = BangBangScaling(gamma, w1, w2, s1, sf)
    breakpoints = (s1,) if s1 > 0 else ()
    two_jump = s1 == 0.0
    return ExpansionProtocol(
        b_shape=shape,
        control=shape.control,
        mean_energy_ratio=mean_energy(shape, breakpoints=breakpoints),
        method=BANG_BANG_2 if two_jump else BANG_BANG_3,
        gamma=gamma,
        sf=sf,
        breakpoints=breakpoints,
        parameters={"w1": w1, "w2": w2, "s1": s1},
    )


def two_jump_protocol(gamma):
    """Limit ``w2 = 1/gamma`` where the first bang vanishes and ``sf = pi gamma / 2``."""
    return bang_bang_protocol(1.0, 1.0 / gamma, gamma)


def two_jump_energy(sf):
    """Mean energy along the two-jump family, ``(1 + pi^2 / (4 sf^2)) / 2``."""
    return 0.5 * (1.0 + np.pi**2 / (4.0 * np.asarray(sf, dtype=float) ** 2))


def oct_energy_bound(gamma, sf):
    """Lowest mean energy over all paths from ``b = 1`` to ``b = gamma`` in time ``sf``.

    Returns ``(bound, shape)`` where ``shape`` is the optimal scaling.  The
    closed form uses two arctanh terms and is rejected outside their domain.
    """
    if not sf > 0:
        raise ValueError(f"normalized final time must be positive, got {sf!r}")
    B = -1.0 + np.sqrt(sf**2 + gamma**2)
    arg1 = (B**2 + B - sf**2) / sf
    arg2 = B / sf
    if abs(arg1) >= 1 or abs(arg2) >= 1:
        raise ValueError(
            f"closed-form energy bound undefined at gamma={gamma!r}, sf={sf!r}: "
            f"arctanh arguments ({arg1:.6g}, {arg2:.6g}) must lie in (-1, 1)")
    bound = (B / sf) ** 2 - 1.0 - 2.0 / sf * np.arctanh(arg1) + 2.0 / sf * np.arctanh(arg2)
    shape = OptimalEnergyScaling(alpha=(B**2 - sf**2) / sf**2, beta=2.0 * B / sf, sf=sf)
    s = np.linspace(0.0, sf, 401)
    if np.any(shape.evaluate(s)[0] <= 0) or not np.all(np.isfinite(shape.evaluate(s)[0])):
        raise ValueError("optimal scaling leaves the positive axis")
    return float(bound), shape


def oct_energy_protocol(spec):
    bound, shape = oct_energy_bound(spec.gamma, spec.sf)
    return ExpansionProtocol(
        b_shape=shape,
        control=control_from_scaling(shape),
        mean_energy_ratio=bound,
        method=OCT_ENERGY,
        gamma=spec.gamma,
        sf=spec.sf,
        initial_state=(1.0, shape.beta / 2.0),
    )


def _oct_fit_gram(spec):
    """Quadratic form of ``int_0^1 (cubic - optimal)^2 dtau`` in ``(a2, a3)``."""
    _, oct_shape = oct_energy_bound(spec.gamma, spec.sf)
    # cubic = 1 + (gamma - 1) tau + a2 (tau^2 - tau) + a3 (tau^3 - tau)
    tau, w = np.polynomial.legendre.leggauss(64)
    tau, w = 0.5 * (tau + 1), 0.5 * w
    residual = 1.0 + (spec.gamma - 1) * tau - oct_shape.evaluate(tau * spec.sf)[0]
    basis = np.stack([tau**2 - tau, tau**3 - tau])
    return basis, residual, w


def optimize_cubic(spec, objective="oct-fit", tol=1e-10, restarts=2):
    """Optimize the free coefficients ``(a2, a3)`` of the two-point cubic.

    ``objective="energy"`` minimizes the mean energy directly.  The default
    ``"oct-fit"`` picks the cubic closest in L2 (over normalized time) to the
    energy-optimal scaling, whose energy stays within a few 1e-5 of the
    direct minimum.  Returns ``(OptimizationResult, ExpansionProtocol)``.
    """
    if objective == "energy":
        def cost(p):
            shape = cubic_shape(spec.gamma, spec.sf, p[0], p[1])
            b = shape.evaluate(np.linspace(0.0, spec.sf, 201))[0]
            if np.any(b <= 0):
                return np.inf
            return mean_energy(shape, rel_tol=1e-12)
    elif objective == "oct-fit":
        basis, residual, w = _oct_fit_gram(spec)

        def cost(p):
            diff = residual + p[0] * basis[0] + p[1] * basis[1]
            return float(np.dot(w, diff**2))
    else:
        raise ValueError(f"unknown cubic objective {objective!r}")

    result = minimize(cost, [0.0, 0.0], scale=[1.0, 0.5], tol=tol, restarts=restarts)
    a2, a3 = (float(v) for v in result.best_params)
    protocol = _cubic_protocol(spec, a2, a3, {"a2": a2, "a3": a3, "objective": objective})
    return result, protocol


@dataclass(frozen=True)
class ExpansionClosure:
    b_error: float
    bprime_error: float
    max_ermakov_residual: float
    max_deviation: float
    invariant_drift: Optional[float] = None


def _ermakov_rhs(control):
    def rhs(s, x):
        return np.array([x[1], -control(s) * x[0] + 1.0 / x[0] ** 3])
    return rhs


def verify_expansion(protocol, rel_tol=1e-10, samples=1001):
    """Forward-integrate the Ermakov system under ``protocol.control``.

    Errors are measured against the designed endpoint ``(gamma, b'(sf))``;
    the terminal slope is zero except for protocols with impulsive kicks.
    """
    rhs = _ermakov_rhs(protocol.control)
    traj = integrate_adaptive(rhs, protocol.initial_state, (0.0, protocol.sf),
                              rel_tol=rel_tol, abs_tol=1e-13, breakpoints=protocol.breakpoints)
    b_end, d1_end, _ = eval_shape(protocol.b_shape, protocol.sf)
    s = np.linspace(0.0, protocol.sf, samples)[1:-1]
    s = s[~np.isin(s, protocol.breakpoints)]
    b, d1, d2 = eval_shape(protocol.b_shape, s)
    residual = np.max(np.abs(d2 + np.asarray(protocol.control(s)) * b - 1.0 / b**3))
    deviation = np.max(np.abs(traj(s)[:, 0] - b))

    drift = None
    if isinstance(protocol.b_shape, BangBangScaling):
        nodes, states = traj.times, traj.states
        # the conserved quantity is checked separately on each constant-control interval
        drift = 0.0
        for lo, hi in _intervals(protocol.breakpoints, protocol.sf):
            mask = (nodes >= lo) & (nodes <= hi)
            ui = protocol.control(0.5 * (lo + hi))
            c = states[mask, 1] ** 2 + ui * states[mask, 0] ** 2 + states[mask, 0] ** -2
            drift = max(drift, float(np.max(c) - np.min(c)))

    return ExpansionClosure(
        b_error=float(abs(traj.final[0] - protocol.gamma)),
        bprime_error=float(abs(traj.final[1] - d1_end)),
        max_ermakov_residual=float(residual),
        max_deviation=float(deviation),
        invariant_drift=drift,
    )


def _intervals(breakpoints, end):
    edges = [0.0, *breakpoints, end]
    return list(zip(edges[:-1], edges[1:]))
