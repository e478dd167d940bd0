"""Exception hierarchy shared by all solvers."""


class BeamFluidError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(BeamFluidError, ValueError):
    """An argument violates an operation precondition."""


class InvalidDataError(BeamFluidError, ValueError):
    """Problem data violate a compatibility or normalization requirement."""


class ContactError(BeamFluidError, RuntimeError):
    """The height field reached the contact floor.

    Carries the simulation time at which the floor was hit (None for
    static checks).
    """

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time


class ResolutionError(BeamFluidError, RuntimeError):
    """The grid cannot resolve the requested geometry (min h too small)."""


class SolverFailureError(BeamFluidError, RuntimeError):
    """A linear solve failed or returned a non-finite solution."""


class StepSizeError(BeamFluidError, RuntimeError):
    """Explicit-convection CFL guard rejected the time step."""
