"""Exception hierarchy shared by every fedsa module."""


class FedsaError(Exception):
    """Base class for all library errors."""


class SingularMatrix(FedsaError):
    pass


class NotSymmetric(FedsaError):
    pass


class DimensionMismatch(FedsaError, ValueError):
    pass


class LengthMismatch(FedsaError, ValueError):
    pass


class NotStochastic(FedsaError):
    pass


class Reducible(FedsaError):
    pass


class Periodic(FedsaError):
    pass


class DidNotMix(FedsaError):
    pass


class StateOutOfRange(FedsaError, IndexError):
    pass


class InvalidParam(FedsaError, ValueError):
    pass


class NotStronglyMonotone(FedsaError):
    pass


class NotSchurStable(FedsaError):
    pass


class EmptyInput(FedsaError, ValueError):
    pass


class InvalidInput(FedsaError, ValueError):
    pass


class NotEnumerable(FedsaError):
    pass


class Diverged(FedsaError, ArithmeticError):
    pass


class ConfigError(FedsaError):
    """Raised for malformed experiment or instance files.

    The message always names the offending field (dotted path) or the
    line/column of a syntax error.
    """
