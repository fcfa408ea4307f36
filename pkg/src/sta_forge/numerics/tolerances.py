import os

ODE_REL_TOL = 1e-10
QUAD_REL_TOL = 1e-10
PARAM_TOL = 1e-8

ENV_VAR = "STA_FORGE_TOL"


def env_rel_tol():
    """Relative tolerance override from ``STA_FORGE_TOL``, or None when unset."""
    raw = os.environ.get(ENV_VAR)
    if raw is None or raw.strip() == "":
        return None
    try:
        value = float(raw)
    except ValueError:
        raise ValueError(f"{ENV_VAR} must be a real number, got {raw!r}") from None
    if not (value > 0.0 and value < 1.0):
        raise ValueError(f"{ENV_VAR} must lie in (0, 1), got {value!r}")
    return value


def ode_rel_tol():
    return env_rel_tol() or ODE_REL_TOL


def quad_rel_tol():
    return env_rel_tol() or QUAD_REL_TOL
