"""Problem-agnostic numerical kernel."""

from .errors import (
    InfeasibleTargetError,
    IntegrationError,
    NumericalError,
    OptimizationError,
    QuadratureError,
    RootError,
)
from .ode import OdeTrajectory, integrate_adaptive
from .optimize import OptimizationResult, minimize
from .quadrature import quadrature
from .roots import find_root
from .tolerances import ODE_REL_TOL, PARAM_TOL, QUAD_REL_TOL

__all__ = [
    "InfeasibleTargetError",
    "IntegrationError",
    "NumericalError",
    "OptimizationError",
    "QuadratureError",
    "RootError",
    "OdeTrajectory",
    "integrate_adaptive",
    "OptimizationResult",
    "minimize",
    "quadrature",
    "find_root",
    "ODE_REL_TOL",
    "PARAM_TOL",
    "QUAD_REL_TOL",
]
