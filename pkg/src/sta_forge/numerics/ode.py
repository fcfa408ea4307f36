"""Embedded Dormand-Prince 5(4) integrator with PI step control and dense output."""

from dataclasses import dataclass, field

import numpy as np

from .errors import IntegrationError
from .tolerances import ode_rel_tol

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# difference between the 5th and embedded 4th order weights
_E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# Shampine's continuous extension, y(t + s h) = y + h K^T P [s, s^2, s^3, s^4]
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_ORDER = 5
_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_PI_ALPHA = 0.7 / _ORDER
_PI_BETA = 0.4 / _ORDER


@dataclass(frozen=True)
class OdeTrajectory:
    """Accepted integration nodes plus the dense interpolant between them.

    ``times`` is strictly increasing and starts/ends exactly on the requested
    span; ``states`` has one row per time.  Calling the trajectory evaluates the
    4th-order continuous extension at arbitrary times inside the span.
    """

    times: np.ndarray
    states: np.ndarray
    _coeffs: np.ndarray = field(repr=False, default=None)  # (steps, dim, 4)

    def __post_init__(self):
        for arr in (self.times, self.states, self._coeffs):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def final(self):
        return self.states[-1]

    @property
    def dim(self):
        return self.states.shape[1]

    def __call__(self, t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        t0, t1 = self.times[0], self.times[-1]
        span = t1 - t0
        if np.any(t_arr < t0 - 1e-12 * span) or np.any(t_arr > t1 + 1e-12 * span):
            raise ValueError(f"time outside integrated span [{t0}, {t1}]")
        idx = np.clip(np.searchsorted(self.times, t_arr, side="right") - 1, 0, len(self.times) - 2)
        h = self.times[idx + 1] - self.times[idx]
        s = np.clip((t_arr - self.times[idx]) / h, 0.0, 1.0)
        powers = np.stack([s, s**2, s**3, s**4], axis=-1)  # (n, 4)
        out = self.states[idx] + h[:, None] * np.einsum("ndk,nk->nd", self._coeffs[idx], powers)
        return out[0] if np.ndim(t) == 0 else out


def _rms(x):
    return float(np.sqrt(np.mean(x * x)))


def _initial_step(rhs, t0, y0, f0, rel_tol, abs_tol, max_step):
    scale = abs_tol + rel_tol * np.abs(y0)
    d0 = _rms(y0 / scale)
    d1 = _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, max_step)
    f1 = rhs(t0 + h0, y0 + h0 * f0)
    d2 = _rms((np.asarray(f1, dtype=float) - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / _ORDER)
    return min(100 * h0, h1, max_step)


def integrate_adaptive(rhs, y0, span, rel_tol=None, abs_tol=1e-12, breakpoints=(),
                       first_step=None, max_steps=2_000_000):
    """Integrate ``y' = rhs(t, y)`` over ``span`` with local error control.

    Breakpoints strictly inside the span are hit exactly and treated as
    segment boundaries: stage evaluations never straddle them, so a
    right-hand side with jumps at those times keeps full order.  Raises
    :class:`IntegrationError` on step-size underflow or when the right-hand
    side is non-finite on the accepted trajectory.
    """
    if rel_tol is None:
        rel_tol = ode_rel_tol()
    t_start, t_end = float(span[0]), float(span[1])
    if not t_end > t_start:
        raise ValueError(f"span must satisfy t1 > t0, got {span!r}")
    if rel_tol <= 0 or abs_tol <= 0:
        raise ValueError("tolerances must be positive")

    y = np.array(y0, dtype=float).reshape(-1)
    stops = sorted({float(b) for b in breakpoints if t_start < b < t_end})
    stops.append(t_end)

    times = [t_start]
    states = [y.copy()]
    coeffs = []
    n_steps = 0
    t = t_start
    h = None
    seg_lo = t_start

    def f_eval(tt, yy, lo, hi):
        # keep stage times one ulp inside the current segment
        if tt <= lo:
            tt = np.nextafter(lo, np.inf)
        elif tt >= hi:
            tt = np.nextafter(hi, -np.inf)
        return np.asarray(rhs(tt, yy), dtype=float).reshape(-1)

    for seg_hi in stops:
        f = f_eval(t, y, seg_lo, seg_hi)
        if not np.all(np.isfinite(f)):
            raise IntegrationError("non-finite right-hand side", t)
        seg_len = seg_hi - seg_lo
        if h is None or first_step is not None and seg_lo == t_start:
            h = first_step if first_step is not None else _initial_step(
                lambda tt, yy: f_eval(tt, yy, seg_lo, seg_hi), t, y, f, rel_tol, abs_tol, seg_len)
        h = min(h, seg_len)
        err_prev = 1e-4
        while t < seg_hi:
            if n_steps >= max_steps:
                raise IntegrationError("maximum number of steps exceeded", t)
            min_step = 16 * np.finfo(float).eps * max(abs(t), seg_len)
            last = t + h >= seg_hi - min_step
            h_plan = h
            if last:
                h = seg_hi - t
            K = np.empty((7, y.size))
            K[0] = f
            finite = True
            for i in range(1, 7):
                yi = y + h * np.dot(_A[i], K[:i])
                K[i] = f_eval(t + _C[i] * h, yi, seg_lo, seg_hi)
                if not np.all(np.isfinite(K[i])):
                    finite = False
                    break
            if finite:
                y_new = y + h * np.dot(_B, K)
                scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y_new))
                err = _rms(h * np.dot(_E, K) / scale)
            else:
                err = np.inf
            if err <= 1.0:
                t_new = seg_hi if last else t + h
                coeffs.append(K.T @ _P)
                t, y, f = t_new, y_new, K[6]
                times.append(t)
                states.append(y.copy())
                n_steps += 1
                if err == 0.0:
                    factor = _MAX_FACTOR
                else:
                    factor = _SAFETY * err ** (-_PI_ALPHA) * err_prev ** _PI_BETA
                    factor = min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
                err_prev = max(err, 1e-4)
                # a step truncated at a segment end should not shrink the next one
                h = max(h, h_plan) * factor if last else h * factor
            else:
                if not np.isfinite(err):
                    h *= 0.25
                else:
                    h *= max(_MIN_FACTOR, _SAFETY * err ** (-1.0 / _ORDER))
                if h < min_step:
                    raise IntegrationError("step size underflow", t)
        # the FSAL stage lies on the left side of the breakpoint, so f is
        # re-evaluated at the start of the next segment
        seg_lo = seg_hi

    return OdeTrajectory(
        times=np.array(times),
        states=np.array(states),
        _coeffs=np.array(coeffs),
    )
