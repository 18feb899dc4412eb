"""Exact arithmetic for zero-dimensional triangular sets over F_p."""

from .errors import (
    BothZero,
    BoundsExceedRingDegree,
    CharacteristicTooSmall,
    DegreeExceedsCharacteristic,
    DivisionByZeroPoly,
    EmptyLeafSet,
    LengthMismatch,
    MalformedResultChain,
    MathError,
    NonCoprimeModuli,
    NotEquiprojectable,
    NotInSubalgebra,
    NotSeparating,
    NotSplit,
    ParseError,
    RadicalitySuspect,
    RetryBudgetExhausted,
    StaleConversionData,
    TridecoError,
    UnsupportedArity,
    VariableNotInRing,
    ZeroDivisor,
)
from .fpcore import Poly, PrimeField

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
