"""Exception hierarchy shared by the library and the command line."""


class GridSyncError(Exception):
    """Base class for domain errors (CLI exit code 2)."""


class ParameterError(GridSyncError, ValueError):
    """Invalid network, machine or disturbance parameters."""


class DisconnectedGraphError(GridSyncError):
    """The scaled Laplacian has more than one (numerically) zero eigenvalue."""


class NeedsSimulation(GridSyncError):
    """No closed form exists for this case; the caller should use the simulation oracle.

    Raised for over-damped (or critically damped) turbine machines, where
    the analytic system-frequency response is not available.
    """


class NotHurwitzError(GridSyncError):
    """A closed-loop state matrix has an eigenvalue with non-negative real part."""


class NearResonanceError(GridSyncError):
    """The Kronecker form of a Sylvester equation is numerically singular."""


class TailNotConvergedError(GridSyncError):
    """Simulation horizon too short for the L2 cost to have converged."""

    def __init__(self, message, suggested_horizon=None):
        super().__init__(message)
        self.suggested_horizon = suggested_horizon


class UnstableSystemError(GridSyncError):
    """The assembled coupled system has an unstable mode besides the angle drift."""
