"""Exception types shared across the package.

The CLI maps these onto exit codes: input/validation problems exit with 2,
numerical failures with 3.  Negative analysis verdicts (a system that is not
controllable, a problem with no solution) are ordinary results, not errors.
"""


class InputError(ValueError):
    """Malformed user input: bad file, bad schema, inconsistent declaration."""


class NumericalError(RuntimeError):
    """A numerical routine failed or violated its accuracy contract."""


class EigenSolverError(NumericalError):
    """The underlying eigenvalue/Schur iteration did not converge."""


class SpectraOverlapError(NumericalError):
    """Lyapunov/Sylvester operator is (numerically) singular: spectra overlap."""


class SingularMatrixError(NumericalError):
    """Inversion hit a pivot below the absolute floor."""

    def __init__(self, message: str, pivot: float):
        super().__init__(message)
        self.pivot = pivot


class GramianRangeError(NumericalError):
    """An intermediate of a Gramian computation exceeds double range."""


class SimulationOverflowError(NumericalError):
    """State blew up during simulation."""

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


class NotStabilizableError(ValueError):
    """Operation requires a stabilizable pair."""

    def __init__(self, message: str, eigenvalues=()):
        super().__init__(message)
        self.eigenvalues = tuple(eigenvalues)


class NotControllableError(ValueError):
    """Operation requires a controllable pair."""
