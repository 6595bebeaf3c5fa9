"""Error types shared across the toolkit."""


class RaykitError(Exception):
    """Base class for toolkit errors."""


class PreconditionError(RaykitError, ValueError):
    """An operation was called outside its documented preconditions."""


class IntegrationDivergedError(RaykitError):
    """A flow blew up; carries the time at which the state went non-finite."""

    def __init__(self, t: float, message: str = ""):
        self.t = t
        super().__init__(message or f"integration diverged at t={t:.6g}")


class ChartIncompleteError(RaykitError):
    """A path left the gridded chart, so the requested quantity is undefined."""


class TransformUndefinedError(RaykitError):
    """X-ray transform requested along a path that never exits."""


class ConnectionNotFoundError(RaykitError):
    """Shooting failed to connect two boundary points; carries best residual."""

    def __init__(self, best_residual: float, message: str = ""):
        self.best_residual = best_residual
        super().__init__(message or
                         f"no connecting geodesic found (best residual {best_residual:.3g})")


class NonConvergedError(RaykitError):
    """An iterative solve stagnated; carries the residual history."""

    def __init__(self, residual_history, message: str = ""):
        self.residual_history = list(residual_history)
        super().__init__(message or
                         f"iteration stagnated at residual {self.residual_history[-1]:.3g}")


class IllConditionedEstimateWarning(UserWarning):
    """An extrapolated estimate looked unreliable (e.g. nonmonotone tail)."""
