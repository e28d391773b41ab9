"""Exception and warning types raised across the package."""


class GoodTuringError(Exception):
    pass


class DomainError(GoodTuringError, ValueError):
    """An argument lies outside the domain of the function."""


class NormalizationError(GoodTuringError, ValueError):
    """Probabilities do not sum to one, even allowing for float drift."""


class UnsupportedN(GoodTuringError, ValueError):
    pass


class ConsistencyError(GoodTuringError, ValueError):
    """A sample refers to atoms that its distribution does not have."""


class EmptyFrequencyClass(GoodTuringError, ValueError):
    pass


class Unsupported(GoodTuringError, ValueError):
    pass


class QuadratureError(GoodTuringError, ArithmeticError):
    pass


class TooLarge(GoodTuringError, ValueError):
    pass


class SchemaError(GoodTuringError, ValueError):
    """A JSON document does not match the expected field layout."""


class RegimeWarning(UserWarning):
    """A bound was evaluated outside the range where it is valid."""
