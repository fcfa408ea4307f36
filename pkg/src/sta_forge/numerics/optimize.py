"""Deterministic Nelder-Mead minimization with simplex re-inflation restarts."""

from dataclasses import dataclass, field

import numpy as np

from .errors import OptimizationError
from .tolerances import PARAM_TOL

_REFLECT, _EXPAND, _CONTRACT, _SHRINK = 1.0, 2.0, 0.5, 0.5


@dataclass(frozen=True)
class OptimizationResult:
    best_params: np.ndarray
    best_cost: float
    evaluations: int
    converged: bool
    simplex_spread: float
    # every finite evaluation, in call order, as (params, cost)
    history: tuple = field(default=(), repr=False)


def _key(cost, x):
    # total order used for ties: cost first, then the parameter vector
    return (cost, tuple(x))


class _Counter:
    def __init__(self, objective, max_evals):
        self.objective = objective
        self.max_evals = max_evals
        self.count = 0
        self.history = []
        self.samples = []

    def __call__(self, x):
        if self.count >= self.max_evals:
            raise _Exhausted
        self.count += 1
        try:
            value = float(self.objective(x.copy()))
        except (ArithmeticError, ValueError):
            value = np.inf
        if not np.isfinite(value):
            if len(self.samples) < 20:
                self.samples.append((tuple(x), value))
            return np.inf
        self.history.append((x.copy(), value))
        return value


class _Exhausted(Exception):
    pass


def _spread(simplex):
    return float(np.max(np.abs(simplex[1:] - simplex[0]))) if len(simplex) > 1 else 0.0


def _nelder_mead(f, x0, scale, tol):
    n = x0.size
    simplex = np.vstack([x0] + [x0 + scale[i] * np.eye(n)[i] for i in range(n)])
    costs = np.array([f(x) for x in simplex])
    while True:
        order = sorted(range(n + 1), key=lambda i: _key(costs[i], simplex[i]))
        simplex, costs = simplex[order], costs[order]
        spread = _spread(simplex)
        if spread <= tol:
            return simplex[0], costs[0], spread
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + _REFLECT * (centroid - worst)
        fr = f(xr)
        if fr < costs[0]:
            xe = centroid + _EXPAND * (centroid - worst)
            fe = f(xe)
            if fe < fr:
                simplex[-1], costs[-1] = xe, fe
            else:
                simplex[-1], costs[-1] = xr, fr
            continue
        if fr < costs[-2]:
            simplex[-1], costs[-1] = xr, fr
            continue
        if fr < costs[-1]:
            xc = centroid + _CONTRACT * (xr - centroid)
            fc = f(xc)
            if fc <= fr:
                simplex[-1], costs[-1] = xc, fc
                continue
        else:
            xc = centroid + _CONTRACT * (worst - centroid)
            fc = f(xc)
            if fc < costs[-1]:
                simplex[-1], costs[-1] = xc, fc
                continue
        for i in range(1, n + 1):
            simplex[i] = simplex[0] + _SHRINK * (simplex[i] - simplex[0])
            costs[i] = f(simplex[i])


def minimize(objective, initial, scale=None, tol=PARAM_TOL, max_evals=20000, restarts=2):
    """Minimize ``objective`` from ``initial`` with a restarted Nelder-Mead.

    ``scale`` sets the initial simplex edge along each coordinate.  After each
    converged run the simplex is re-inflated around the incumbent with the same
    edges, ``restarts`` times, which is deterministic and guards against the
    premature collapse Nelder-Mead is known for.  Non-finite objective values
    count as +inf.  The returned point is the best seen over all runs, with
    ties broken toward the lexicographically smallest parameter vector.
    """
    x0 = np.atleast_1d(np.asarray(initial, dtype=float)).copy()
    scale = np.ones_like(x0) if scale is None else np.broadcast_to(
        np.asarray(scale, dtype=float), x0.shape).copy()
    if np.any(scale <= 0):
        raise ValueError("scale entries must be positive")
    if restarts < 0:
        raise ValueError("restarts must be non-negative")

    f = _Counter(objective, max_evals)
    best_x, best_f = x0, np.inf
    converged = False
    spread = np.inf
    try:
        for _ in range(restarts + 1):
            x, fx, spread = _nelder_mead(f, best_x, scale, tol)
            converged = True
            if _key(fx, x) < _key(best_f, best_x):
                best_x, best_f = x.copy(), fx
    except _Exhausted:
        converged = False
        spread = np.inf

    for x, fx in f.history:
        if _key(fx, x) < _key(best_f, best_x):
            best_x, best_f = x.copy(), fx
    if not np.isfinite(best_f):
        raise OptimizationError("objective non-finite at every sampled point", f.samples)
    best_x.setflags(write=False)
    return OptimizationResult(
        best_params=best_x,
        best_cost=float(best_f),
        evaluations=f.count,
        converged=converged,
        simplex_spread=float(spread),
        history=tuple(f.history),
    )

