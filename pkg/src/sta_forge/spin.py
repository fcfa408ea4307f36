"""Dissipative spin-1/2 rotation with a transverse field.

Time is in units of ``1/R`` (transverse relaxation rate) and the field in
units of ``R``.  With the azimuth held fixed, the polar angle and the log of
the spin length obey

    theta' = B - sin(theta) cos(theta),    a' = -sin(theta)^2,

and the field energy is ``E = int B^2 / 2 dt``.  The energy-optimal field
follows from a conserved costate ``p1`` that fixes the final spin length.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .ansatz import BoundaryCondition, PolynomialShape, eval_shape, fit_constrained_polynomial, make_tanh_tan
from .numerics import (
    InfeasibleTargetError,
    OptimizationResult,
    find_root,
    integrate_adaptive,
    minimize,
    quadrature,
)

OCT = "oct"
QUADRATIC = "quadratic"
CUBIC = "cubic"
NINTH_FLIP = "ninth-flip"
TANH_FLIP = "tanh-flip"
FAMILIES = (QUADRATIC, CUBIC, NINTH_FLIP, TANH_FLIP)

# Gauss-Legendre rule used inside optimization loops; reported values use adaptive quadrature
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(300)


@dataclass(frozen=True)
class SpinSpec:
    theta_f: float
    r_f: float
    epsilon: float = 1e-3
    tf: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.r_f < 1:
            raise ValueError(f"final spin length must lie in (0, 1), got {self.r_f!r}")
        if not 0 < self.theta_f <= np.pi:
            raise ValueError(f"final angle must lie in (0, pi], got {self.theta_f!r}")
        if not 0 < self.epsilon < 0.1:
            raise ValueError(f"endpoint shift must be small and positive, got {self.epsilon!r}")
        if self.tf is not None and not self.tf > 0:
            raise ValueError(f"final time must be positive, got {self.tf!r}")

    @property
    def a_f(self):
        return float(np.log(self.r_f))

    @property
    def is_flip(self):
        return self.theta_f == np.pi

    @property
    def oct_theta_end(self):
        """End angle of the regularized optimal path (``pi - epsilon`` for a flip)."""
        return np.pi - self.epsilon if self.is_flip else self.theta_f


@dataclass(frozen=True)
class SpinProtocol:
    theta_shape: object
    field: Callable
    energy: float
    final_log_radius: float
    method: str
    spec: SpinSpec
    parameters: dict = field(default_factory=dict)

    @property
    def tf(self):
        return self.theta_shape.span[1]


# ---------------------------------------------------------------- field, radius, energy


def field_from_theta(theta_shape):
    """Field ``B = theta' + sin(theta) cos(theta)`` that realizes ``theta_shape``."""
    def field(t):
        theta, d1, _ = eval_shape(theta_shape, t)
        return d1 + np.sin(theta) * np.cos(theta)
    return field


def _span_integral(integrand, shape, rel_tol=None):
    lo, hi = shape.span
    return quadrature(integrand, lo, hi, rel_tol=rel_tol, vectorized=True)


def final_log_radius(theta_shape, tf=None, rel_tol=None):
    """``a(tf) = -int_0^tf sin(theta)^2 dt``."""
    _check_tf(theta_shape, tf)
    return -_span_integral(lambda t: np.sin(eval_shape(theta_shape, t)[0]) ** 2, theta_shape, rel_tol)


def energy_functional(theta_shape, tf=None, rel_tol=None):
    """``E = int_0^tf B(t)^2 / 2 dt`` with ``B`` from :func:`field_from_theta`."""
    _check_tf(theta_shape, tf)
    field = field_from_theta(theta_shape)
    return _span_integral(lambda t: 0.5 * field(t) ** 2, theta_shape, rel_tol)


def _check_tf(shape, tf):
    if tf is not None and abs(shape.span[1] - tf) > 1e-12 * tf:
        raise ValueError(f"shape span {shape.span[1]!r} does not match final time {tf!r}")


def _fast_integrals(shape):
    """Log radius and energy on a fixed Gauss-Legendre rule (for inner loops)."""
    lo, hi = shape.span
    half = 0.5 * (hi - lo)
    t = lo + half * (_GL_NODES + 1.0)
    theta, d1, _ = shape.evaluate(t)
    s, c = np.sin(theta), np.cos(theta)
    b = d1 + s * c
    return -half * np.dot(_GL_WEIGHTS, s * s), half * np.dot(_GL_WEIGHTS, 0.5 * b * b)


# ---------------------------------------------------------------- optimal control reference


def oct_radius(theta, p1):
    """Spin length along the optimal path as a function of the polar angle."""
    if not p1 > 0:
        raise ValueError(f"p1 must be positive, got {p1!r}")
    c = np.cos(theta)
    return (c + np.sqrt(2 * p1 + c * c)) / (1.0 + np.sqrt(2 * p1 + 1.0))


def p1_closed_form(theta_f, r_f):
    if theta_f == np.pi / 2:
        return 2 * r_f**2 / (1 - r_f**2) ** 2
    if theta_f == np.pi:
        return 2 * r_f / (1 - r_f) ** 2
    raise ValueError("closed form exists only for theta_f in {pi/2, pi}")


def solve_p1(theta_f, r_f, tol=1e-14):
    """Costate ``p1`` for which the optimal path ends at spin length ``r_f``.

    The optimal spin length at ``theta_f`` increases from ``max(cos theta_f, 0)``
    (``p1 -> 0``) to 1 (``p1 -> inf``); targets outside are rejected.
    """
    infimum = max(float(np.cos(theta_f)), 0.0)
    if not infimum < r_f < 1:
        raise InfeasibleTargetError(
            f"spin length {r_f!r} cannot be reached at theta_f = {theta_f!r}", (infimum, 1.0))

    def residual(log_p1):
        return oct_radius(theta_f, np.exp(log_p1)) - r_f

    lo, hi = -5.0, 5.0
    while residual(lo) > 0:
        lo -= 5.0
        if lo < -700:
            raise InfeasibleTargetError("no costate found", (infimum, 1.0))
    while residual(hi) < 0:
        hi += 5.0
        if hi > 700:
            raise InfeasibleTargetError("no costate found", (infimum, 1.0))
    log_p1 = find_root(residual, (lo, hi), tol=tol)
    return float(np.exp(log_p1))


def _oct_speed(theta, p1):
    """Polar angular velocity along the optimal path."""
    c = np.cos(theta)
    return np.sin(theta) * np.sqrt(c * c + 2 * p1)


def oct_final_time(spec, rel_tol=None):
    """Duration of the optimal path from ``epsilon`` to its end angle (by quadrature)."""
    p1 = solve_p1(spec.theta_f, spec.r_f)
    return quadrature(lambda th: 1.0 / _oct_speed(th, p1), spec.epsilon, spec.oct_theta_end,
                      rel_tol=rel_tol, vectorized=True)


def oct_final_time_closed_form(spec):
    r, eps = spec.r_f, spec.epsilon
    if spec.theta_f == np.pi / 2:
        return (1 - r**2) / (1 + r**2) * (np.log((1 + r**2) / r) - np.log(eps))
    if spec.is_flip:
        return (1 - r) / (1 + r) * (np.log((1 + r) ** 2 / r) - 2 * np.log(eps))
    raise ValueError("closed form exists only for theta_f in {pi/2, pi}")


def oct_energy(spec, rel_tol=None):
    """Field energy of the optimal path.

    Uses the exact expression for ``theta_f`` in ``{pi/2, pi}`` and the
    angular quadrature otherwise.
    """
    if spec.theta_f in (np.pi / 2, np.pi):
        return float(oct_energy_closed_form(spec))
    return oct_energy_quadrature(spec, rel_tol)


def oct_energy_quadrature(spec, rel_tol=None):
    """Field energy of the optimal path, integrated over the polar angle on the shifted span."""
    p1 = solve_p1(spec.theta_f, spec.r_f)

    def integrand(th):
        c = np.cos(th)
        root = np.sqrt(2 * p1 + c * c)
        # B^2/2 dt with B = (root + c) sin and dt = dtheta / (sin root)
        return 0.5 * (root + c) ** 2 * np.sin(th) / root

    return quadrature(integrand, spec.epsilon, spec.oct_theta_end, rel_tol=rel_tol, vectorized=True)


def oct_energy_closed_form(spec):
    r = spec.r_f
    if spec.theta_f == np.pi / 2:
        return 1.0 / (1 - r**2)
    if spec.is_flip:
        return (1 + r) / (1 - r)
    raise ValueError("closed form exists only for theta_f in {pi/2, pi}")


@dataclass(frozen=True)
class OctThetaPath:
    """Polar angle of the optimal path, from its integrated dense output."""

    trajectory: object
    p1: float
    tf: float

    @property
    def span(self):
        return (0.0, self.tf)

    def evaluate(self, t):
        theta = np.asarray(self.trajectory(t))[..., 0]
        s, c = np.sin(theta), np.cos(theta)
        root = np.sqrt(c * c + 2 * self.p1)
        d1 = s * root
        # d/dtheta (sin root) = cos root - sin^2 cos / root
        d2 = d1 * (c * root - s * s * c / root)
        return theta, d1, d2


@dataclass(frozen=True)
class OctSolution:
    p1: float
    tf: float
    energy: float
    protocol: SpinProtocol
    trajectory: object  # states (theta, a, p2) on [0, tf]


def oct_solution(spec, rel_tol=1e-12):
    """Energy-optimal field for ``spec``; the path starts at ``theta = epsilon``.

    Integrates the angle, the log radius and the costate ``p2`` together so
    the Hamiltonian and radius identities can be checked along the way.
    """
    p1 = solve_p1(spec.theta_f, spec.r_f)
    tf = oct_final_time(spec)
    eps = spec.epsilon

    def rhs(t, y):
        theta, _, p2 = y
        s, c = np.sin(theta), np.cos(theta)
        return np.array([
            s * np.sqrt(c * c + 2 * p1),
            -s * s,
            p1 * np.sin(2 * theta) + p2 * np.cos(2 * theta),
        ])

    c0 = np.cos(eps)
    p2_0 = (np.sqrt(2 * p1 + c0 * c0) + c0) * np.sin(eps)
    traj = integrate_adaptive(rhs, [eps, 0.0, p2_0], (0.0, tf), rel_tol=rel_tol, abs_tol=1e-14)
    path = OctThetaPath(traj, p1, tf)
    energy = oct_energy(spec)
    protocol = SpinProtocol(
        theta_shape=path,
        field=field_from_theta(path),
        energy=energy,
        final_log_radius=float(np.log(oct_radius(spec.oct_theta_end, p1) / oct_radius(eps, p1))),
        method=OCT,
        spec=spec,
        parameters={"p1": p1},
    )
    return OctSolution(p1=p1, tf=tf, energy=energy, protocol=protocol, trajectory=traj)


def control_hamiltonian(theta, p1, p2):
    """Pontryagin Hamiltonian with the optimal control ``u = p2`` substituted."""
    s, c = np.sin(theta), np.cos(theta)
    return -0.5 * p2**2 - p1 * s * s + p2 * (p2 - s * c)


# ---------------------------------------------------------------- ansatz families


def quadratic_shape(tf, theta_f, a1):
    """``theta = a1 t - (a1 tf - theta_f) t^2 / tf^2``."""
    conditions = [BoundaryCondition(0, 0.0, 0.0), BoundaryCondition(0, tf, theta_f)]
    return fit_constrained_polynomial(2, conditions, {1: a1 * tf}, T=tf)


def cubic_shape(tf, theta_f, a1, a3):
    """``theta = a1 t + a2 t^2 + a3 t^3`` with ``a2`` fixed by ``theta(tf) = theta_f``."""
    conditions = [BoundaryCondition(0, 0.0, 0.0), BoundaryCondition(0, tf, theta_f)]
    return fit_constrained_polynomial(3, conditions, {1: a1 * tf, 3: a3 * tf**3}, T=tf)


def _ninth_basis():
    """Monomial rows (in tau) of the flip base path and three symmetric-preserving corrections.

    The base is the rest-to-rest quintic from 0 to pi; each correction
    ``tau^3 (1-tau)^3 (tau - 1/2)^(k+1)`` keeps all seven flip conditions and
    is scaled to unit peak on ``[0, 1]``.
    """
    from numpy.polynomial import Polynomial

    base = np.zeros(10)
    base[3:6] = np.pi * np.array([10.0, -15.0, 6.0])
    bump = Polynomial([0, 0, 0, 1]) * Polynomial([1, -1]) ** 3
    grid = np.linspace(0.0, 1.0, 2001)
    rows = []
    for k in range(3):
        h = bump * Polynomial([-0.5, 1.0]) ** (k + 1)
        h = h / np.max(np.abs(h(grid)))
        rows.append(np.pad(h.coef, (0, 10 - h.coef.size)))
    return base, np.array(rows)


_NINTH_BASE, _NINTH_ROWS = _ninth_basis()


def ninth_flip_conditions(tf):
    return [
        BoundaryCondition(0, 0.0, 0.0),
        BoundaryCondition(1, 0.0, 0.0),
        BoundaryCondition(2, 0.0, 0.0),
        BoundaryCondition(0, 0.5 * tf, np.pi / 2),
        BoundaryCondition(0, tf, np.pi),
        BoundaryCondition(1, tf, 0.0),
        BoundaryCondition(2, tf, 0.0),
    ]


def ninth_flip_shape(tf, betas):
    coeffs = _NINTH_BASE + np.asarray(betas, dtype=float) @ _NINTH_ROWS
    return PolynomialShape(tuple(coeffs), tf)


def tanh_flip_shape(tf, a1, a5):
    """``theta = pi/2 tanh(a1 tan(pi (t - tf/2) / (a5 tf))) + pi/2``."""
    return make_tanh_tan(np.pi / 2, np.pi / 2, a1, a5, tf)


@dataclass(frozen=True)
class _Family:
    name: str
    build: Callable  # (solved, outer) -> shape
    scan: tuple  # (lo, hi, step) for the solved parameter
    outer_initial: tuple = ()
    outer_scale: tuple = ()


def _family(spec, tf, family, a3=0.1, a5=1.1):
    if family == QUADRATIC:
        return _Family(family, lambda s, o: quadratic_shape(tf, spec.theta_f, s), (-8.0, 8.0, 0.05))
    if family == CUBIC:
        return _Family(family, lambda s, o: cubic_shape(tf, spec.theta_f, s, a3), (-8.0, 8.0, 0.05))
    if family == NINTH_FLIP:
        if not spec.is_flip:
            raise ValueError("the ninth-order family is built for a spin flip (theta_f = pi)")
        return _Family(family, lambda s, o: ninth_flip_shape(tf, [s, *o]), (-4.0, 4.0, 0.05),
                       (0.0, 0.0), (0.5, 0.5))
    if family == TANH_FLIP:
        if not spec.is_flip:
            raise ValueError("the tanh family is built for a spin flip (theta_f = pi)")
        if a5 is None:
            return _Family(family, lambda s, o: tanh_flip_shape(tf, s, o[0]), (0.05, 8.0, 0.05),
                           (1.1,), (0.05,))
        return _Family(family, lambda s, o: tanh_flip_shape(tf, s, a5), (0.05, 8.0, 0.05))
    raise ValueError(f"unknown ansatz family {family!r}; expected one of {FAMILIES}")


def _grid(scan):
    lo, hi, step = scan
    return np.linspace(lo, hi, int(round((hi - lo) / step)) + 1)


def _radius_roots(fam, outer, target_log_r):
    """Roots of ``a(tf) = ln r_f`` in the solved parameter, by scan and bracketing."""
    grid = _grid(fam.scan)

    def residual(x):
        return _fast_integrals(fam.build(x, outer))[0] - target_log_r

    values = np.array([residual(x) for x in grid])
    roots = []
    for i in np.nonzero(np.sign(values[:-1]) * np.sign(values[1:]) <= 0)[0]:
        if values[i] == 0.0 and i > 0 and values[i - 1] == 0.0:
            continue
        roots.append(find_root(residual, (grid[i], grid[i + 1]), tol=1e-13))
    return roots, grid, values


def _best_root(fam, outer, target_log_r):
    roots, _, _ = _radius_roots(fam, outer, target_log_r)
    best = None
    for x in roots:
        energy = _fast_integrals(fam.build(x, outer))[1]
        if best is None or (energy, x) < best[::-1]:
            best = (x, energy)
    return best


def reachable_range(spec, family, tf=None, a3=0.1, a5=1.1, outer=()):
    """Extreme final spin lengths over the scanned parameter of ``family`` at fixed ``tf``.

    Returns ``(r_min, r_max, arg_min, arg_max)``.
    """
    tf = _resolve_tf(spec, tf)
    fam = _family(spec, tf, family, a3, a5)
    if not outer:
        outer = fam.outer_initial
    grid = _grid(fam.scan)
    log_r = np.array([_fast_integrals(fam.build(x, outer))[0] for x in grid])
    lo_step = fam.scan[2]

    def refine(sign, i0):
        res = minimize(lambda p: sign * _fast_integrals(fam.build(p[0], outer))[0],
                       [grid[i0]], scale=[0.5 * lo_step], tol=1e-10, restarts=1)
        return float(np.exp(sign * res.best_cost)), float(res.best_params[0])

    r_min, arg_min = refine(1.0, int(np.argmin(log_r)))
    r_max, arg_max = refine(-1.0, int(np.argmax(log_r)))
    return r_min, r_max, arg_min, arg_max


def _resolve_tf(spec, tf):
    if tf is not None:
        return float(tf)
    if spec.tf is not None:
        return float(spec.tf)
    return oct_final_time(spec)


def optimize_ansatz(spec, family, tf=None, a3=0.1, a5=1.1, tol=1e-8, restarts=2):
    """Least-energy member of ``family`` that reaches ``(theta_f, r_f)`` at ``tf``.

    One parameter is fixed by root finding on the final log radius; among its
    roots the lowest-energy one is kept.  Remaining parameters (ninth-order
    family, or the tanh width when ``a5`` is None) are optimized by the
    simplex method around that inner solve.  Returns
    ``(OptimizationResult, SpinProtocol)``.
    """
    tf = _resolve_tf(spec, tf)
    fam = _family(spec, tf, family, a3, a5)
    target = spec.a_f

    if not fam.outer_initial:
        best = _best_root(fam, (), target)
        if best is None:
            r_min, r_max, _, _ = reachable_range(spec, family, tf, a3, a5)
            raise InfeasibleTargetError(
                f"{family} ansatz cannot reach r_f = {spec.r_f!r} at tf = {tf!r}", (r_min, r_max))
        solved, energy = best
        result = OptimizationResult(np.array([solved]), energy, 1, True, 0.0)
        outer = ()
    else:
        start = np.array(fam.outer_initial, dtype=float)
        if _best_root(fam, tuple(start), target) is None:
            start = _feasible_start(fam, start, target)

        def cost(o):
            if family == TANH_FLIP and not o[0] > 1.0:
                return np.inf
            best = _best_root(fam, tuple(o), target)
            if best is None:
                return np.inf
            # a free tanh width must still saturate to within epsilon of the pole
            if family == TANH_FLIP and fam.build(best[0], tuple(o)).evaluate(0.0)[0] > spec.epsilon:
                return np.inf
            return best[1]

        result = minimize(cost, start, scale=fam.outer_scale, tol=tol, restarts=restarts)
        outer = tuple(float(v) for v in result.best_params)
        solved = _best_root(fam, outer, target)[0]

    shape = fam.build(solved, outer)
    protocol = _ansatz_protocol(spec, family, shape, solved, outer, a3, a5)
    return result, protocol


def _feasible_start(fam, start, target):
    """Move the outer parameters to where the reachable radius is largest."""
    n = len(start)

    def neg_radius(p):
        return -_fast_integrals(fam.build(p[0], tuple(p[1:])))[0]

    res = minimize(neg_radius, np.concatenate([[0.0], start]), scale=np.full(n + 1, 0.5),
                   tol=1e-6, restarts=1)
    if -res.best_cost < target:
        raise InfeasibleTargetError(
            f"{fam.name} ansatz cannot reach the requested spin length",
            (0.0, float(np.exp(-res.best_cost))))
    return np.asarray(res.best_params[1:])


def _ansatz_protocol(spec, family, shape, solved, outer, a3, a5):
    if family in (QUADRATIC, CUBIC):
        params = {"a1": solved}
        if family == CUBIC:
            params["a3"] = a3
    elif family == NINTH_FLIP:
        params = {"beta0": solved, "beta1": outer[0], "beta2": outer[1]}
    else:
        params = {"a1": solved, "a5": outer[0] if outer else a5}
    return SpinProtocol(
        theta_shape=shape,
        field=field_from_theta(shape),
        energy=energy_functional(shape),
        final_log_radius=final_log_radius(shape),
        method=family,
        spec=spec,
        parameters=params,
    )


def ansatz_protocol(spec, family, params, tf=None):
    """Protocol for explicit family parameters (no optimization)."""
    tf = _resolve_tf(spec, tf)
    if family == QUADRATIC:
        shape = quadratic_shape(tf, spec.theta_f, params["a1"])
    elif family == CUBIC:
        shape = cubic_shape(tf, spec.theta_f, params["a1"], params["a3"])
    elif family == NINTH_FLIP:
        shape = ninth_flip_shape(tf, [params["beta0"], params["beta1"], params["beta2"]])
    elif family == TANH_FLIP:
        shape = tanh_flip_shape(tf, params["a1"], params["a5"])
    else:
        raise ValueError(f"unknown ansatz family {family!r}")
    return SpinProtocol(
        theta_shape=shape,
        field=field_from_theta(shape),
        energy=energy_functional(shape),
        final_log_radius=final_log_radius(shape),
        method=family,
        spec=spec,
        parameters=dict(params),
    )


# ---------------------------------------------------------------- forward checks


def integrate_spherical(field, theta0, span, rel_tol=1e-11):
    """Integrate ``(theta, a)`` under a given field history."""
    def rhs(t, y):
        s, c = np.sin(y[0]), np.cos(y[0])
        return np.array([field(t) - s * c, -s * s])
    return integrate_adaptive(rhs, [theta0, 0.0], span, rel_tol=rel_tol, abs_tol=1e-14)


def integrate_bloch(field, s0, span, phi=0.0, rel_tol=1e-11):
    """Cartesian Bloch equations with unit transverse relaxation.

    The transverse field is ``(B sin phi, -B cos phi)``, which rotates the spin
    within the meridian plane at azimuth ``phi`` and increases its polar angle
    for ``B > 0``.
    """
    sp, cp = np.sin(phi), np.cos(phi)

    def rhs(t, s):
        b = field(t)
        bx, by = b * sp, -b * cp
        return np.array([
            -s[0] - by * s[2],
            -s[1] + bx * s[2],
            by * s[0] - bx * s[1],
        ])

    return integrate_adaptive(rhs, s0, span, rel_tol=rel_tol, abs_tol=1e-14)


def bloch_angles(states, phi=0.0):
    """Signed polar angle in the meridian plane, spin length and azimuth drift.

    The azimuth is undefined at the poles, so the drift is set to zero where
    the transverse length is below ``1e-6`` of the spin length.
    """
    sx, sy, sz = states[..., 0], states[..., 1], states[..., 2]
    along = sx * np.cos(phi) + sy * np.sin(phi)
    across = -sx * np.sin(phi) + sy * np.cos(phi)
    r = np.sqrt(sx * sx + sy * sy + sz * sz)
    theta = np.arctan2(along, sz)
    transverse = np.hypot(along, across)
    drift = np.where(transverse > 1e-6 * r, np.abs(np.arctan2(across, np.abs(along) + 1e-300)), 0.0)
    return theta, r, drift


@dataclass(frozen=True)
class SpinClosure:
    theta_error: float
    radius_error: float
    phi_drift: float
    final_state: tuple
    max_theta_residual: float


def verify_spin(protocol, phi=0.0, rel_tol=1e-11, samples=1001):
    """Drive the Cartesian Bloch equations with the protocol's field.

    The spin starts on the protocol's initial angle at unit length; errors
    are measured against the designed final angle and ``exp(a(tf))`` of the
    designed path.
    """
    shape = protocol.theta_shape
    tf = protocol.tf
    theta0 = eval_shape(shape, 0.0)[0]
    s0 = [np.sin(theta0) * np.cos(phi), np.sin(theta0) * np.sin(phi), np.cos(theta0)]
    traj = integrate_bloch(protocol.field, s0, (0.0, tf), phi=phi, rel_tol=rel_tol)
    theta_end = eval_shape(shape, tf)[0]
    theta, r, drift = bloch_angles(traj.final, phi)
    t = np.linspace(0.0, tf, samples)
    th, d1, _ = eval_shape(shape, t)
    b = protocol.field(t)
    residual = np.max(np.abs(d1 - b + np.sin(th) * np.cos(th)))
    _, _, drifts = bloch_angles(traj(t[1:]), phi)
    # atan2 wraps to -pi at the south pole; compare modulo 2 pi
    theta_err = abs((theta - theta_end + np.pi) % (2 * np.pi) - np.pi)
    return SpinClosure(
        theta_error=float(theta_err),
        radius_error=float(abs(r - np.exp(protocol.final_log_radius))),
        phi_drift=float(np.max(drifts)),
        final_state=tuple(float(v) for v in traj.final),
        max_theta_residual=float(residual),
    )
