"""Boundary-constrained trajectory shapes.

Two families are provided: polynomials stored in normalized time
``tau = t / T`` whose coefficients are partly fixed by linear boundary
conditions, and the saturating ``tanh(a1 tan(...))`` family whose endpoint
values only approach their targets.
"""

from dataclasses import dataclass
from math import factorial

import numpy as np
from numpy.polynomial import Legendre, Polynomial

CONSTRAINED_POLYNOMIAL = "constrained-polynomial"
TANH_TAN = "tanh-tan"


@dataclass(frozen=True)
class BoundaryCondition:
    """``d^order x / dt^order`` at ``time`` equals ``value`` (physical time units)."""

    order: int
    time: float
    value: float

    def __post_init__(self):
        if self.order not in (0, 1, 2):
            raise ValueError(f"derivative order must be 0, 1 or 2, got {self.order!r}")


MONOMIAL = "monomial"
LEGENDRE = "legendre"


@dataclass(frozen=True)
class PolynomialShape:
    """``x(t) = sum_n coefficients[n] * phi_n(t / T)`` on ``[0, T]``.

    ``phi_n`` is ``tau**n`` for the monomial basis, or the Legendre polynomial
    shifted to ``[0, 1]``.  The latter keeps high-degree shapes well conditioned.
    """

    coefficients: tuple
    T: float = 1.0
    basis: str = MONOMIAL

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if not self.T > 0:
            raise ValueError(f"span length must be positive, got {self.T!r}")
        if self.basis not in (MONOMIAL, LEGENDRE):
            raise ValueError(f"unknown polynomial basis {self.basis!r}")

    kind = CONSTRAINED_POLYNOMIAL

    @property
    def parameters(self):
        return np.array(self.coefficients)

    @property
    def span(self):
        return (0.0, self.T)

    @property
    def degree(self):
        return len(self.coefficients) - 1

    def monomial_coefficients(self):
        if self.basis == MONOMIAL:
            return np.array(self.coefficients)
        leg = Legendre(self.coefficients, domain=[0, 1])
        return leg.convert(kind=Polynomial).coef

    def evaluate(self, t):
        """Value, first and second time derivative; no domain check."""
        if self.basis == LEGENDRE:
            tau = np.asarray(t, dtype=float) / self.T
            leg = Legendre(self.coefficients, domain=[0, 1])
            return leg(tau), leg.deriv(1)(tau) / self.T, leg.deriv(2)(tau) / self.T**2
        c = np.array(self.coefficients)
        n = np.arange(len(c))
        tau = np.asarray(t, dtype=float) / self.T
        d1c = (c * n)[1:]
        d2c = (c * n * (n - 1))[2:]
        # np.polyval wants the highest power first
        value = np.polyval(c[::-1], tau)
        d1 = np.polyval(d1c[::-1], tau) / self.T if d1c.size else np.zeros_like(tau)
        d2 = np.polyval(d2c[::-1], tau) / self.T**2 if d2c.size else np.zeros_like(tau)
        return value, d1, d2


@dataclass(frozen=True)
class TanhTanShape:
    """``offset + amplitude * tanh(a1 * tan(pi / width * (t/T - 1/2)))``.

    For ``width > 1`` the tangent stays finite on ``[0, T]`` and the shape only
    approaches ``offset -/+ amplitude`` at the endpoints.
    """

    amplitude: float
    offset: float
    a1: float
    width: float
    T: float

    def __post_init__(self):
        if not self.width > 1:
            raise ValueError(f"width must exceed 1 to keep tan finite on the span, got {self.width!r}")
        if not self.T > 0:
            raise ValueError(f"span length must be positive, got {self.T!r}")

    kind = TANH_TAN

    @property
    def parameters(self):
        return np.array([self.amplitude, self.offset, self.a1, self.width])

    @property
    def span(self):
        return (0.0, self.T)

    def evaluate(self, t):
        k = np.pi / (self.width * self.T)
        phase = k * (np.asarray(t, dtype=float) - 0.5 * self.T)
        tan = np.tan(phase)
        sec2 = 1.0 + tan**2
        th = np.tanh(self.a1 * tan)
        sech2 = 1.0 - th**2
        # z = a1 tan(phase): z' = a1 k sec^2, z'' = 2 a1 k^2 sec^2 tan
        z1 = self.a1 * k * sec2
        z2 = 2.0 * self.a1 * k**2 * sec2 * tan
        value = self.offset + self.amplitude * th
        d1 = self.amplitude * sech2 * z1
        d2 = self.amplitude * sech2 * (z2 - 2.0 * th * z1**2)
        return value, d1, d2


def eval_shape(shape, t):
    """Value and analytic first/second derivatives of ``shape`` at ``t``.

    Accepts scalars or arrays; raises ``ValueError`` for times outside the span.
    """
    lo, hi = shape.span
    t_arr = np.asarray(t, dtype=float)
    slack = 1e-12 * (hi - lo)
    if np.any(t_arr < lo - slack) or np.any(t_arr > hi + slack):
        raise ValueError(f"time outside shape span [{lo}, {hi}]")
    value, d1, d2 = shape.evaluate(np.clip(t_arr, lo, hi))
    if np.ndim(t) == 0:
        return float(value), float(d1), float(d2)
    return value, d1, d2


def _condition_row(degree, order, tau):
    row = np.zeros(degree + 1)
    for n in range(order, degree + 1):
        row[n] = factorial(n) // factorial(n - order) * tau ** (n - order)
    return row


def fit_constrained_polynomial(degree, conditions, free_params=None, T=1.0):
    """Polynomial of ``degree`` in ``t / T`` meeting every boundary condition.

    ``free_params`` maps coefficient indices (normalized-time basis) to fixed
    values; the remaining coefficients are solved from ``conditions``.  The
    count must match exactly and the resulting system must be nonsingular.
    """
    free_params = dict(free_params or {})
    conditions = sorted(conditions, key=lambda c: (c.time, c.order))
    if degree < 0:
        raise ValueError("degree must be non-negative")
    for idx in free_params:
        if not 0 <= idx <= degree:
            raise ValueError(f"free coefficient index {idx} outside 0..{degree}")
    unknown = [n for n in range(degree + 1) if n not in free_params]
    if len(unknown) != len(conditions):
        raise ValueError(
            f"degree {degree} with {len(free_params)} free coefficients leaves "
            f"{len(unknown)} unknowns for {len(conditions)} conditions")
    for c in conditions:
        if not -1e-12 * T <= c.time <= T * (1 + 1e-12):
            raise ValueError(f"condition time {c.time!r} outside [0, {T!r}]")

    coeffs = np.zeros(degree + 1)
    for idx, value in free_params.items():
        coeffs[idx] = value
    if unknown:
        rows = np.array([_condition_row(degree, c.order, c.time / T) for c in conditions])
        # derivative conditions in t become tau-derivatives scaled by T^order
        rhs = np.array([c.value * T**c.order for c in conditions]) - rows @ coeffs
        matrix = rows[:, unknown]
        if np.linalg.cond(matrix) > 1e14:
            raise ValueError(f"singular boundary-condition system for {conditions!r}")
        coeffs[unknown] = np.linalg.solve(matrix, rhs)
    return PolynomialShape(tuple(coeffs), T)


def make_tanh_tan(amplitude, offset, a1, width, T):
    """Saturating shape ``offset + amplitude * tanh(a1 tan(pi (t/T - 1/2) / width))``."""
    return TanhTanShape(float(amplitude), float(offset), float(a1), float(width), float(T))
