from typing import Any, Iterator, List, Optional, Sequence, Tuple, Type, Union
from fractions import Fraction
from enum import Enum
import itertools
import re

import numpy as np

Number = Union[Fraction, float]
History = Tuple[int, ...]
Distribution = Tuple[Number, ...]

SYMBOLS = "0123456789abcdefghijklmnopqrstuvwxyz"
# Largest number of cylinders we are willing to enumerate at one depth
ENUMERATION_LIMIT = 2**22
FLOAT_TOLERANCE = 1e-12


class ExpertestError(Exception):
    exit_code: int = 1

    def __init__(self, message: str) -> None:
        self.message = message
        super().__init__(self.message)


class ConfigInvalid(ExpertestError):
    exit_code = 3

    def __init__(self, field: str, message: str) -> None:
        self.field = field
        self.msg = message
        super().__init__(f"Invalid config field '{self.field}': {self.msg}")


class ConditioningOnNullEvent(ExpertestError):
    exit_code = 10

    def __init__(self, label: str, history: History) -> None:
        self.label = label
        self.history = history
        super().__init__(
            f"Can't condition '{self.label}' on history '{format_history(history)}': "
            f"the cylinder has probability 0"
        )


class EnumerationTooLarge(ExpertestError):
    exit_code = 11

    def __init__(self, size: int, limit: int = ENUMERATION_LIMIT) -> None:
        self.size = size
        self.limit = limit
        super().__init__(f"Enumeration of {self.size} items exceeds limit {self.limit}")


class AtomDetected(ExpertestError):
    exit_code = 12

    def __init__(
        self, label: str, history: History, prob: Number, epsilon: Number
    ) -> None:
        self.label = label
        self.history = history
        self.prob = prob
        self.epsilon = epsilon
        super().__init__(
            f"Opinion '{self.label}' concentrates on '{format_history(history)}': "
            f"probability {format_number(prob)} still exceeds {format_number(epsilon)} "
            f"at depth {len(history)}"
        )


class NonConvergence(ExpertestError):
    exit_code = 13

    def __init__(self, message: str, report: Optional[Any] = None) -> None:
        self.report = report
        super().__init__(message)


class RegionDeeperThanHorizon(ExpertestError):
    exit_code = 14

    def __init__(self, label: str, depth: int, horizon: int) -> None:
        self.label = label
        self.depth = depth
        self.horizon = horizon
        super().__init__(
            f"Rejection region of '{self.label}' has depth {self.depth}, "
            f"deeper than horizon {self.horizon}"
        )


class UndecidedMembership(ExpertestError):
    exit_code = 15

    def __init__(self, label: str, history: History) -> None:
        self.label = label
        self.history = history
        super().__init__(
            f"History '{format_history(history)}' is too short to decide membership "
            f"in the rejection region of '{self.label}'"
        )


class PreconditionViolated(ExpertestError):
    exit_code = 16

    def __init__(self, operation: str, message: str) -> None:
        self.operation = operation
        self.msg = message
        super().__init__(f"{self.operation}: {self.msg}")


class InvalidTest(ExpertestError):
    exit_code = 17

    def __init__(self, label: str, message: str) -> None:
        self.label = label
        self.msg = message
        super().__init__(f"Test '{self.label}' can't be used here: {self.msg}")


ERRORS: List[Type[ExpertestError]] = [
    ConfigInvalid,
    ConditioningOnNullEvent,
    EnumerationTooLarge,
    AtomDetected,
    NonConvergence,
    RegionDeeperThanHorizon,
    UndecidedMembership,
    PreconditionViolated,
    InvalidTest,
]


class NumberMode(Enum):
    """Arithmetic used throughout one computation."""

    rational = "rational"
    float = "float"

    @property
    def zero(self) -> Number:
        return Fraction(0) if self is NumberMode.rational else 0.0

    @property
    def one(self) -> Number:
        return Fraction(1) if self is NumberMode.rational else 1.0

    @property
    def dtype(self) -> Any:
        return object if self is NumberMode.rational else np.float64

    def coerce(self, value: Union[Number, int, str]) -> Number:
        """Lift a config or user value into this mode. Floats are read via
        their decimal representation, so 0.7 becomes 7/10 in rational mode.
        """
        if isinstance(value, bool):
            raise ValueError(f"Not a number: {value!r}")
        if isinstance(value, str):
            value = Fraction(value.strip())
        elif isinstance(value, float):
            if not np.isfinite(value):
                raise ValueError(f"Not a finite number: {value!r}")
            if self is NumberMode.rational:
                value = Fraction(repr(value))
        if self is NumberMode.rational:
            return Fraction(value)
        return float(value)

    def is_one(self, total: Number) -> bool:
        if self is NumberMode.rational:
            return total == 1
        return abs(float(total) - 1.0) <= FLOAT_TOLERANCE

    def array(self, values: Sequence[Number]) -> np.ndarray:
        return np.array(list(values), dtype=self.dtype)


def mode_of(value: Number) -> NumberMode:
    return NumberMode.rational if isinstance(value, Fraction) else NumberMode.float


def format_number(value: Any) -> str:
    if isinstance(value, Fraction):
        return str(value)
    return repr(float(value))


def to_json_number(value: Any) -> Union[str, float, int]:
    """Fractions serialize as 'a/b' strings so exact results survive JSON."""
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    return float(value)


def check_enumerable(alphabet_size: int, depth: int) -> int:
    if depth < 0:
        raise ValueError(f"Depth must be nonnegative, got {depth}")
    size = alphabet_size**depth
    if size > ENUMERATION_LIMIT:
        raise EnumerationTooLarge(size)
    return size


def enumerate_histories(alphabet_size: int, depth: int) -> Iterator[History]:
    """All histories of a given depth in lexicographic order."""
    check_enumerable(alphabet_size, depth)
    return itertools.product(range(alphabet_size), repeat=depth)


def history_index(history: History, alphabet_size: int) -> int:
    """Position of a history in the lexicographic enumeration of its depth."""
    index = 0
    for symbol in history:
        index = index * alphabet_size + symbol
    return index


def parse_history(text: str, alphabet_size: Optional[int] = None) -> History:
    text = text.strip()
    if text in ("", "-"):
        return ()
    if "," in text:
        history = tuple(int(part) for part in text.split(","))
    else:
        history = tuple(SYMBOLS.index(char) for char in text.lower())
    if alphabet_size is not None:
        validate_history(history, alphabet_size)
    return history


def format_history(history: History) -> str:
    if any(symbol >= len(SYMBOLS) for symbol in history):
        return ",".join(str(symbol) for symbol in history)
    return "".join(SYMBOLS[symbol] for symbol in history)


def validate_history(history: History, alphabet_size: int) -> None:
    for symbol in history:
        if not 0 <= symbol < alphabet_size:
            raise ValueError(
                f"Symbol {symbol} in history '{format_history(history)}' "
                f"is not in an alphabet of size {alphabet_size}"
            )


def is_prefix(prefix: History, history: History) -> bool:
    return len(prefix) <= len(history) and history[: len(prefix)] == prefix


reference_matcher = re.compile(r"^([0-9a-z,]*)\(([0-9a-z,]+)\)$")


def split_reference(text: str) -> Tuple[str, str]:
    """Split an eventually periodic path like '1(01)' into prefix and cycle."""
    match = reference_matcher.match(text.strip().lower())
    if not match:
        raise ValueError(
            f"Not a valid reference path: '{text}'. Expected 'prefix(cycle)', e.g. '(01)'"
        )
    return match.group(1), match.group(2)


def normalize_weights(weights: Sequence[float], cutoff: float = 0.0) -> List[float]:
    """Clip solver noise and renormalize a float probability vector."""
    clipped = [w if w > cutoff else 0.0 for w in (float(x) for x in weights)]
    total = sum(clipped)
    if total <= 0:
        raise ValueError("Can't normalize a vector with no positive mass")
    return [w / total for w in clipped]

