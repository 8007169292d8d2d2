"""Exception hierarchy.

Every error raised on purpose by the library derives from
:class:`LdsSpectraError`. The two intermediate classes decide the CLI exit
code: :class:`DataError` maps to 3, :class:`NumericalError` to 4.
"""


class LdsSpectraError(Exception):
    """Base class for all library errors."""


class DataError(LdsSpectraError, ValueError):
    """Inputs are malformed, inconsistent or insufficient."""


class NumericalError(LdsSpectraError, ArithmeticError):
    """A numerical procedure failed on otherwise valid input."""


class InvalidDegree(DataError):
    pass


class SpectrumSizeMismatch(DataError):
    pass


class DegenerateSpectrum(NumericalError):
    """Two eigenvalues (or Vandermonde nodes) coincide within tolerance."""


class RootSolverFailure(NumericalError):
    """QR iteration did not converge.

    ``partial`` holds the eigenvalues that had deflated before the iteration
    budget ran out.
    """

    def __init__(self, message, partial=()):
        super().__init__(message)
        self.partial = partial


class ShapeError(DataError):
    pass


class InvalidParams(DataError):
    pass


class GenerationFailure(NumericalError):
    pass


class SingularBasis(NumericalError):
    pass


class RankDeficient(NumericalError):
    pass


class InsufficientData(DataError):
    pass


class MissingInputs(DataError):
    pass


class OrderMismatch(DataError):
    pass


class TooManyClusters(DataError):
    pass


class LengthMismatch(DataError):
    pass


__all__ = [
    "LdsSpectraError",
    "DataError",
    "NumericalError",
    "InvalidDegree",
    "SpectrumSizeMismatch",
    "DegenerateSpectrum",
    "RootSolverFailure",
    "ShapeError",
    "InvalidParams",
    "GenerationFailure",
    "SingularBasis",
    "RankDeficient",
    "InsufficientData",
    "MissingInputs",
    "OrderMismatch",
    "TooManyClusters",
    "LengthMismatch",
]
