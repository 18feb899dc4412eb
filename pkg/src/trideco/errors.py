"""Typed errors shared by all modules.

Mathematical failures (the ``NotSeparating`` family) are kept distinct from
plain usage errors so the CLI can map them to exit code 2.
"""


class TridecoError(Exception):
    """Base class for everything raised on purpose by this package."""


class MathError(TridecoError):
    """A well-formed request that fails for a mathematical reason."""


# fpcore
class DivisionByZeroPoly(MathError):
    pass


class BothZero(MathError):
    pass


class DegreeExceedsCharacteristic(MathError):
    pass


class EmptyLeafSet(TridecoError):
    pass


class NonCoprimeModuli(MathError):
    pass


class CharacteristicTooSmall(MathError):
    pass


class LengthMismatch(TridecoError):
    pass


# tring
class VariableNotInRing(TridecoError):
    pass


class UnsupportedArity(TridecoError):
    pass


class BoundsExceedRingDegree(TridecoError):
    pass


class NotSeparating(MathError):
    pass


class NotInSubalgebra(MathError):
    pass


class ZeroDivisor(MathError):
    pass


# urep / decomp / solve
class RadicalitySuspect(MathError):
    pass


class NotEquiprojectable(MathError):
    pass


class StaleConversionData(TridecoError):
    pass


class RetryBudgetExhausted(MathError):
    pass


# oracle
class NotSplit(MathError):
    pass


# duality
class MalformedResultChain(MathError):
    pass


# cli
class ParseError(TridecoError):
    def __init__(self, message, line=None):
        if line is not None:
            message = "line %d: %s" % (line, message)
        super().__init__(message)
        self.line = line
