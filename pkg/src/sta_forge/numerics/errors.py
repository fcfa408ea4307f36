"""Exception hierarchy shared by the numerical kernel and the physics modules."""


class NumericalError(RuntimeError):
    """Base class for failures of a numerical procedure (CLI exit code 3)."""


class IntegrationError(NumericalError):
    def __init__(self, message, time):
        super().__init__(f"{message} (t = {time!r})")
        self.time = time


class QuadratureError(NumericalError):
    def __init__(self, message, location=None):
        if location is not None:
            message = f"{message} (x = {location!r})"
        super().__init__(message)
        self.location = location


class OptimizationError(NumericalError):
    def __init__(self, message, samples=()):
        super().__init__(message)
        self.samples = list(samples)


class RootError(NumericalError):
    pass


class InfeasibleTargetError(NumericalError):
    """A control target lies outside what the chosen model or ansatz can reach."""

    def __init__(self, message, reachable=None):
        if reachable is not None:
            lo, hi = reachable
            message = f"{message}; reachable interval [{lo:.6g}, {hi:.6g}]"
        super().__init__(message)
        self.reachable = reachable
