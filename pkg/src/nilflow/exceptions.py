"""Exception types shared across the library."""


class NilflowError(Exception):
    """Base class for all library-specific errors."""


class DimensionMismatch(NilflowError, ValueError):
    """Operands live on spaces of different dimension."""


class BracketFormatError(NilflowError, ValueError):
    """Malformed bracket JSON: bad indices, duplicates, wrong types."""


class SingularMatrix(NilflowError, ValueError):
    """A change of basis is singular (or numerically indistinguishable from it)."""


class NotNilpotentError(NilflowError, ValueError):
    """The descending central series stabilizes at a nonzero subspace."""


class ZeroBracket(NilflowError, ValueError):
    """Operation undefined for the zero bracket."""


class DegreeTooHigh(NilflowError, ValueError):
    """Closed form only valid up to a fixed nilpotency degree."""


class BadNormalization(NilflowError, ValueError):
    """Initial bracket is off the prescribed sphere; rescale explicitly."""


class TooFewSamples(NilflowError, ValueError):
    """Not enough trace samples for a finite-difference check."""


class ConfigError(NilflowError, ValueError):
    """Invalid CLI / experiment configuration."""


class NumericalFailure(NilflowError, RuntimeError):
    """Integration failed; carries the partial trace when one exists."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class StepSizeUnderflow(NumericalFailure):
    """Adaptive step size collapsed below the resolution limit."""


class LossOfPositivity(NumericalFailure):
    """Evolving inner product stopped being positive definite."""
