"""Exception types shared across the package.

Every failure mode that callers are expected to handle gets its own class
so that the CLI can map numerical failures to a distinct exit code.
"""


class RifleError(Exception):
    """Base class for all package-specific failures."""


class DimMismatch(RifleError):
    """Operands have incompatible dimensions."""


class IndexOutOfRange(RifleError):
    """An index set refers to a coordinate outside the matrix dimension."""


class NotPositiveDefinite(RifleError):
    """A matrix required to be positive definite is not (to tolerance)."""


class NoConvergence(RifleError):
    """An iterative routine exhausted its iteration budget."""


class DegenerateDenominator(RifleError):
    """A Rayleigh quotient denominator vanished relative to the problem scale."""


class ZeroUpdate(RifleError):
    """A matrix-vector update produced the zero vector and cannot be normalized."""


class NonFiniteIterate(RifleError):
    """An iterate picked up a NaN or infinity."""


class ZeroVector(RifleError):
    """A vector that must be nonzero is (numerically) zero."""


class ZeroMatrix(RifleError):
    """A matrix that must be nonzero is zero."""


class TooLarge(RifleError):
    """A brute-force enumeration would exceed the configured size cap."""


class TooSmall(RifleError):
    """A problem is too small for the requested operation."""


class AllSupportsSingular(RifleError):
    """Every candidate support produced a singular restricted pencil."""


class ZeroGap(RifleError):
    """A spectral gap required to be positive vanished."""


class DegenerateClass(RifleError):
    """Label vector is malformed: missing class, empty class, or fewer than two classes."""


class EmptySlice(RifleError):
    """A response slicing produced an empty slice."""


class Indivisible(RifleError):
    """A dimension does not satisfy a required divisibility constraint."""


class TooFewSamples(RifleError):
    """Not enough samples for the requested procedure."""


class ParseError(RifleError):
    """A data file could not be parsed; message includes the offending row."""
