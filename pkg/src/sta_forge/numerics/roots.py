from scipy.optimize import brentq

from .errors import RootError


def find_root(g, bracket, tol=1e-12, max_iter=200):
    """Root of the scalar function ``g`` inside ``bracket`` (Brent's method).

    Requires ``g(lo) * g(hi) <= 0``.  Every iterate stays inside the bracket.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if lo > hi:
        lo, hi = hi, lo
    g_lo, g_hi = g(lo), g(hi)
    if g_lo == 0.0:
        return lo
    if g_hi == 0.0:
        return hi
    if not (g_lo * g_hi < 0.0):
        raise RootError(f"no sign change on [{lo!r}, {hi!r}]: g = ({g_lo!r}, {g_hi!r})")
    try:
        return brentq(g, lo, hi, xtol=tol, rtol=4 * 2.220446049250313e-16, maxiter=max_iter)
    except (RuntimeError, ValueError) as exc:
        raise RootError(str(exc)) from None
