"""Exception hierarchy shared by every shufflelab module."""


class ShuffleLabError(Exception):
    """Base class for all errors raised by shufflelab."""


class StructuralError(ShuffleLabError, ValueError):
    """A pool mixes lengths or alphabets where a fixed-length pool is required."""


class AlphabetMismatchError(ShuffleLabError, ValueError):
    """An operation was applied to sequences over the wrong alphabet."""


class DomainError(ShuffleLabError, ValueError):
    """An argument lies outside the domain of an evaluator."""


class UndefinedConditionalError(DomainError):
    """A conditional expectation given N >= 1 was requested while q0 = 1."""


class LayoutError(ShuffleLabError, ValueError):
    """Codec parameters do not fit the requested sequence layout."""


class ContractViolation(ShuffleLabError):
    """A caller broke a documented precondition."""


class SpecParseError(ShuffleLabError, ValueError):
    """A compact spec string (e.g. ``poisson:2.0``) could not be parsed."""


class SingularSystemError(ShuffleLabError):
    """A finite-field linear system has no unique solution."""
