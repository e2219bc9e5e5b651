"""Exception hierarchy for the PTC entropy toolkit."""


class PtcError(Exception):
    """Base class for all errors raised by ptc_entropy."""


class ArgumentError(PtcError, ValueError):
    """Invalid argument or violated precondition."""


class MultiIndexError(PtcError, IndexError):
    """Coordinate or linear index outside the tensor shape."""


class InvariantViolationError(PtcError):
    """A model no longer satisfies a structural invariant."""


class DegenerateModelError(PtcError):
    """A factor column is identically zero and cannot be normalized."""


class GridError(ArgumentError):
    """A binning grid cannot be built for the given samples."""

    def __init__(self, message: str, dimension: int | None = None):
        super().__init__(message)
        self.dimension = dimension


class FitError(PtcError):
    """CP-APR cannot be run on the given tensor."""


class NumericalFailureError(PtcError, ArithmeticError):
    """Non-finite values appeared during a computation."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration


class CapacityError(PtcError):
    """Full enumeration would exceed the configured term budget."""

    def __init__(self, message: str, required: int, budget: int):
        super().__init__(message)
        self.required = required
        self.budget = budget


class IngestError(PtcError):
    """No usable rows could be read from an input CSV."""
