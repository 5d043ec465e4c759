"""Opinions as forecast kernels on a finite-alphabet outcome tree.

Every opinion answers two questions: the next-symbol distribution after a
history, and the probability of the cylinder a history identifies. Kernels
are frozen dataclasses, so they hash and compare by value. The merging code
relies on this to merge equal conditional states.
"""
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
import logging

import numpy as np

from .util import Number, History, Distribution, NumberMode, mode_of
from .util import ConditioningOnNullEvent, PreconditionViolated
from .util import check_enumerable, validate_history, format_history, parse_history
from .util import format_number, to_json_number, split_reference

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Alphabet:
    size: int = 2

    def __post_init__(self) -> None:
        if not isinstance(self.size, int) or self.size < 2:
            raise ValueError(f"Alphabet needs at least 2 symbols, got {self.size!r}")

    @property
    def symbols(self) -> range:
        return range(self.size)

    def uniform(self, mode: NumberMode) -> Distribution:
        return tuple(mode.coerce(Fraction(1, self.size)) for _ in self.symbols)


BINARY = Alphabet(2)


def check_distribution(dist: Sequence[Number], alphabet: Alphabet, what: str) -> None:
    if len(dist) != alphabet.size:
        raise ValueError(
            f"{what}: expected {alphabet.size} probabilities, got {len(dist)}"
        )
    mode = mode_of(dist[0])
    if any(mode_of(p) is not mode for p in dist):
        raise ValueError(f"{what}: mixed rational and float entries")
    if any(p < 0 for p in dist):
        raise ValueError(f"{what}: negative probability in {_format_dist(dist)}")
    if not mode.is_one(sum(dist)):
        raise ValueError(f"{what}: probabilities sum to {format_number(sum(dist))}")


def _format_dist(dist: Sequence[Number]) -> str:
    return "(" + ", ".join(format_number(p) for p in dist) + ")"


def _coerce_dist(values: Sequence[Any], mode: NumberMode) -> Distribution:
    return tuple(mode.coerce(v) for v in values)


class Opinion(ABC):
    """A probability process given by next-symbol forecasts."""

    alphabet: Alphabet
    label: str

    @property
    @abstractmethod
    def mode(self) -> NumberMode:
        ...

    @abstractmethod
    def forecast(self, history: History) -> Distribution:
        """Next-symbol distribution, assuming the history has positive mass."""
        ...

    @abstractmethod
    def to_spec(self) -> Dict[str, Any]:
        ...

    def cylinder(self, history: History) -> Number:
        prob = self.mode.one
        for t, symbol in enumerate(history):
            prob = prob * self.forecast(history[:t])[symbol]
            if prob == 0:
                break
        return prob

    def conditioned(self, history: History) -> "Opinion":
        if not history:
            return self
        return ConditionedOpinion(self, history)

    def table(self, depth: int) -> np.ndarray:
        # Breadth-first chain rule; null prefixes never get forecast
        level = np.array([self.mode.one], dtype=self.mode.dtype)
        prefixes: List[History] = [()]
        for _ in range(depth):
            values = []
            children: List[History] = []
            for prefix, mass in zip(prefixes, level):
                dist = self.forecast(prefix) if mass != 0 else None
                for symbol in self.alphabet.symbols:
                    values.append(mass * dist[symbol] if dist else self.mode.zero)
                    children.append(prefix + (symbol,))
            level = np.array(values, dtype=self.mode.dtype)
            prefixes = children
        return level


def _outer_table(mode: NumberMode, dists: Sequence[Distribution]) -> np.ndarray:
    table = np.array([mode.one], dtype=mode.dtype)
    for dist in dists:
        table = np.multiply.outer(table, np.array(dist, dtype=mode.dtype)).ravel()
    return table


@dataclass(frozen=True)
class IID(Opinion):
    alphabet: Alphabet
    p: Distribution
    label: str = "iid"

    def __post_init__(self) -> None:
        check_distribution(self.p, self.alphabet, f"IID '{self.label}'")

    @property
    def mode(self) -> NumberMode:
        return mode_of(self.p[0])

    def forecast(self, history: History) -> Distribution:
        return self.p

    def cylinder(self, history: History) -> Number:
        prob = self.mode.one
        for symbol in self.alphabet.symbols:
            count = history.count(symbol)
            if count:
                prob = prob * self.p[symbol] ** count
        return prob

    def conditioned(self, history: History) -> Opinion:
        return self

    def table(self, depth: int) -> np.ndarray:
        return _outer_table(self.mode, [self.p] * depth)

    def to_spec(self) -> Dict[str, Any]:
        return {
            "kind": "iid",
            "label": self.label,
            "p": [to_json_number(x) for x in self.p],
        }


class PeriodwiseIID(Opinion):
    """Independent coordinates whose law depends on the (absolute) period."""

    offset: int

    @abstractmethod
    def period_distribution(self, period: int) -> Distribution:
        """Distribution of the outcome in a 1-based absolute period."""
        ...

    def forecast(self, history: History) -> Distribution:
        return self.period_distribution(self.offset + len(history) + 1)

    def cylinder(self, history: History) -> Number:
        prob = self.mode.one
        for t, symbol in enumerate(history):
            prob = prob * self.period_distribution(self.offset + t + 1)[symbol]
            if prob == 0:
                break
        return prob

    def conditioned(self, history: History) -> Opinion:
        if not history:
            return self
        return replace(self, offset=self.offset + len(history))

    def table(self, depth: int) -> np.ndarray:
        dists = [self.period_distribution(self.offset + t + 1) for t in range(depth)]
        return _outer_table(self.mode, dists)


@dataclass(frozen=True)
class TimeInhomogeneousIID(PeriodwiseIID):
    alphabet: Alphabet
    periods: Tuple[Distribution, ...]
    tail: Distribution
    offset: int = 0
    label: str = "time-iid"

    def __post_init__(self) -> None:
        for i, dist in enumerate(self.periods):
            check_distribution(dist, self.alphabet, f"'{self.label}' period {i + 1}")
        check_distribution(self.tail, self.alphabet, f"'{self.label}' tail")

    @property
    def mode(self) -> NumberMode:
        return mode_of(self.tail[0])

    def period_distribution(self, period: int) -> Distribution:
        if period <= len(self.periods):
            return self.periods[period - 1]
        return self.tail

    def to_spec(self) -> Dict[str, Any]:
        return {
            "kind": "time-iid",
            "label": self.label,
            "periods": [[to_json_number(x) for x in d] for d in self.periods],
            "tail": [to_json_number(x) for x in self.tail],
            "offset": self.offset,
        }


@dataclass(frozen=True)
class DyadicIID(PeriodwiseIID):
    """Binary coordinates with Prob(X_k = 0) = 2^-k up to period n and 1 after.
    With n=None the dyadic law holds in every period.
    """

    n: Optional[int] = None
    mode: NumberMode = NumberMode.rational  # type: ignore[assignment]
    offset: int = 0
    label: str = ""
    alphabet: Alphabet = BINARY

    def __post_init__(self) -> None:
        if self.n is not None and self.n < 0:
            raise ValueError(f"Truncation period must be nonnegative, got {self.n}")
        if self.alphabet != BINARY:
            raise ValueError("Dyadic kernels are defined on the binary alphabet")
        if not self.label:
            name = "P_inf" if self.n is None else f"P_{self.n}"
            object.__setattr__(self, "label", name)

    def period_distribution(self, period: int) -> Distribution:
        if self.n is not None and period > self.n:
            return (self.mode.one, self.mode.zero)
        zero = self.mode.coerce(Fraction(1, 2**period))
        return (zero, self.mode.one - zero)

    @property
    def prob_ones_infinitely_often(self) -> Number:
        # Truncated kernels end in all zeros; the untruncated one sees 1
        # infinitely often because the sum of (1 - 2^-k) diverges
        return self.mode.one if self.n is None else self.mode.zero

    def to_spec(self) -> Dict[str, Any]:
        return {
            "kind": "dyadic",
            "label": self.label,
            "n": self.n,
            "offset": self.offset,
        }


@dataclass(frozen=True)
class Markov(Opinion):
    alphabet: Alphabet
    initial: Distribution
    transition: Tuple[Distribution, ...]
    label: str = "markov"

    def __post_init__(self) -> None:
        check_distribution(self.initial, self.alphabet, f"'{self.label}' initial")
        if len(self.transition) != self.alphabet.size:
            raise ValueError(
                f"'{self.label}': transition matrix needs {self.alphabet.size} rows"
            )
        for i, row in enumerate(self.transition):
            check_distribution(row, self.alphabet, f"'{self.label}' transition row {i}")

    @property
    def mode(self) -> NumberMode:
        return mode_of(self.initial[0])

    def forecast(self, history: History) -> Distribution:
        return self.transition[history[-1]] if history else self.initial

    def conditioned(self, history: History) -> Opinion:
        if not history:
            return self
        return replace(self, initial=self.transition[history[-1]])

    def to_spec(self) -> Dict[str, Any]:
        return {
            "kind": "markov",
            "label": self.label,
            "initial": [to_json_number(x) for x in self.initial],
            "transition": [[to_json_number(x) for x in row] for row in self.transition],
        }


@dataclass(frozen=True)
class BayesMixture(Opinion):
    alphabet: Alphabet
    components: Tuple[Opinion, ...]
    weights: Tuple[Number, ...]
    label: str = "mixture"

    def __post_init__(self) -> None:
        if not self.components or len(self.components) != len(self.weights):
            raise ValueError(f"'{self.label}': need one weight per component")
        mode = mode_of(self.weights[0])
        for comp in self.components:
            if comp.alphabet != self.alphabet:
                raise ValueError(f"'{self.label}': component '{comp.label}' alphabet")
            if comp.mode is not mode:
                raise ValueError(f"'{self.label}': component '{comp.label}' mode")
        if any(w <= 0 for w in self.weights):
            raise ValueError(f"'{self.label}': mixture weights must be positive")
        if not mode.is_one(sum(self.weights)):
            raise ValueError(f"'{self.label}': mixture weights must sum to 1")

    @property
    def mode(self) -> NumberMode:
        return mode_of(self.weights[0])

    def cylinder(self, history: History) -> Number:
        total = self.mode.zero
        for weight, comp in zip(self.weights, self.components):
            total = total + weight * comp.cylinder(history)
        return total

    def posterior(self, history: History) -> Tuple[Number, ...]:
        joint = [w * c.cylinder(history) for w, c in zip(self.weights, self.components)]
        total = sum(joint, self.mode.zero)
        if total == 0:
            raise ConditioningOnNullEvent(self.label, history)
        return tuple(j / total for j in joint)

    def forecast(self, history: History) -> Distribution:
        posterior = self.posterior(history)
        dist = [self.mode.zero] * self.alphabet.size
        for weight, comp in zip(posterior, self.components):
            if weight == 0:
                continue
            for symbol, p in enumerate(comp.forecast(history)):
                dist[symbol] = dist[symbol] + weight * p
        return tuple(dist)

    def conditioned(self, history: History) -> Opinion:
        if not history:
            return self
        posterior = self.posterior(history)
        kept = [(w, c) for w, c in zip(posterior, self.components) if w != 0]
        if self.mode is NumberMode.float:
            # Keep the weight invariant exact after dropping components
            total = sum(w for w, _ in kept)
            kept = [(w / total, c) for w, c in kept]
        return replace(
            self,
            components=tuple(c.conditioned(history) for _, c in kept),
            weights=tuple(w for w, _ in kept),
        )

    def table(self, depth: int) -> np.ndarray:
        total = None
        for weight, comp in zip(self.weights, self.components):
            part = cylinder_table(comp, depth) * weight
            total = part if total is None else total + part
        return total

    def to_spec(self) -> Dict[str, Any]:
        return {
            "kind": "mixture",
            "label": self.label,
            "components": [
                {"weight": to_json_number(w), "opinion": c.to_spec()}
                for w, c in zip(self.weights, self.components)
            ],
        }


@dataclass(frozen=True)
class TableKernel(Opinion):
    """Explicit forecasts for every history shorter than depth, then a tail."""

    alphabet: Alphabet
    depth: int
    entries: Tuple[Tuple[History, Distribution], ...]
    tail: Opinion
    label: str = "table"
    _lookup: Dict[History, Distribution] = field(
        init=False, repr=False, compare=False, hash=False
    )

    def __post_init__(self) -> None:
        lookup = dict(self.entries)
        if len(lookup) != len(self.entries):
            raise ValueError(f"'{self.label}': duplicate table entries")
        expected = sum(self.alphabet.size**t for t in range(self.depth))
        for history, dist in lookup.items():
            validate_history(history, self.alphabet.size)
            if len(history) >= self.depth:
                raise ValueError(
                    f"'{self.label}': entry '{format_history(history)}' "
                    f"is deeper than the table depth {self.depth}"
                )
            check_distribution(dist, self.alphabet, f"'{self.label}' entry")
        if len(lookup) != expected:
            raise ValueError(
                f"'{self.label}': table of depth {self.depth} needs {expected} "
                f"entries, got {len(lookup)}"
            )
        if self.tail.alphabet != self.alphabet:
            raise ValueError(f"'{self.label}': tail rule alphabet")
        object.__setattr__(self, "_lookup", lookup)

    @property
    def mode(self) -> NumberMode:
        return self.tail.mode

    def forecast(self, history: History) -> Distribution:
        if len(history) < self.depth:
            return self._lookup[history]
        return self.tail.forecast(history)

    def to_spec(self) -> Dict[str, Any]:
        return {
            "kind": "table",
            "label": self.label,
            "depth": self.depth,
            "table": {
                format_history(h): [to_json_number(x) for x in dist]
                for h, dist in self.entries
            },
            "tail": self.tail.to_spec(),
        }


@dataclass(frozen=True)
class ConditionedOpinion(Opinion):
    base: Opinion
    prefix: History

    @property
    def alphabet(self) -> Alphabet:  # type: ignore[override]
        return self.base.alphabet

    @property
    def label(self) -> str:  # type: ignore[override]
        return f"{self.base.label}|{format_history(self.prefix)}"

    @property
    def mode(self) -> NumberMode:
        return self.base.mode

    def forecast(self, history: History) -> Distribution:
        return self.base.forecast(self.prefix + history)

    def cylinder(self, history: History) -> Number:
        return self.base.cylinder(self.prefix + history) / self.base.cylinder(
            self.prefix
        )

    def conditioned(self, history: History) -> Opinion:
        if not history:
            return self
        return ConditionedOpinion(self.base, self.prefix + history)

    def to_spec(self) -> Dict[str, Any]:
        return {
            "kind": "conditioned",
            "base": self.base.to_spec(),
            "prefix": format_history(self.prefix),
        }


@dataclass(frozen=True)
class Example1Surrogate:
    """Half the dyadic law plus half a uniform window of truncations
    N+1..N+K. Agrees with the untruncated law on every cylinder of length at
    most N, but puts mass 1/2 on paths that end in all zeros.
    """

    N: int
    K: int
    opinion: BayesMixture

    @property
    def p_infinity(self) -> DyadicIID:
        return DyadicIID(None, mode=self.opinion.mode)


@dataclass(frozen=True)
class ReferencePath:
    """An eventually periodic infinite path, written 'prefix(cycle)'."""

    prefix: History
    cycle: History

    def __post_init__(self) -> None:
        if not self.cycle:
            raise ValueError("Reference path needs a nonempty cycle")

    @classmethod
    def parse(cls, text: str, alphabet: Alphabet = BINARY) -> "ReferencePath":
        prefix, cycle = split_reference(text)
        return cls(
            parse_history(prefix, alphabet.size), parse_history(cycle, alphabet.size)
        )

    def head(self, t: int) -> History:
        """The first t outcomes, i.e. the base of the cylinder of length t."""
        if t <= len(self.prefix):
            return self.prefix[:t]
        rest = t - len(self.prefix)
        repeats = -(-rest // len(self.cycle))
        return self.prefix + (self.cycle * repeats)[:rest]

    def validate(self, alphabet: Alphabet) -> None:
        validate_history(self.prefix + self.cycle, alphabet.size)

    def __str__(self) -> str:
        return f"{format_history(self.prefix)}({format_history(self.cycle)})"


def _check(opinion: Opinion, history: History) -> None:
    validate_history(history, opinion.alphabet.size)


def next_distribution(opinion: Opinion, history: History) -> Distribution:
    _check(opinion, history)
    if opinion.cylinder(history) == 0:
        raise ConditioningOnNullEvent(opinion.label, history)
    return opinion.forecast(history)


def cylinder_prob(opinion: Opinion, history: History) -> Number:
    _check(opinion, history)
    return opinion.cylinder(history)


def condition(opinion: Opinion, history: History) -> Opinion:
    _check(opinion, history)
    if not history:
        return opinion
    if opinion.cylinder(history) == 0:
        raise ConditioningOnNullEvent(opinion.label, history)
    return opinion.conditioned(history)


def posterior_weights(mixture: Opinion, history: History) -> Tuple[Number, ...]:
    if not isinstance(mixture, BayesMixture):
        raise PreconditionViolated(
            "posterior_weights", f"'{mixture.label}' is not a Bayes mixture"
        )
    _check(mixture, history)
    return mixture.posterior(history)


def cylinder_table(opinion: Opinion, depth: int) -> np.ndarray:
    """Probabilities of all depth-d cylinders in lexicographic order. The
    returned array is shared and read-only.
    """
    check_enumerable(opinion.alphabet.size, depth)
    # Rational and float kernels can compare equal, so the mode is part of the key
    return _cached_table(opinion, depth, opinion.mode)


@lru_cache(maxsize=64)
def _cached_table(opinion: Opinion, depth: int, mode: NumberMode) -> np.ndarray:
    table = opinion.table(depth)
    table.flags.writeable = False
    logger.debug("Cylinder table of '%s' at depth %d", opinion.label, depth)
    return table


def draw_symbol(dist: Distribution, u: float) -> int:
    cumulative = 0.0
    last = 0
    for symbol, p in enumerate(dist):
        if p == 0:
            continue
        last = symbol
        cumulative += float(p)
        if u < cumulative:
            return symbol
    return last


def sample_path(opinion: Opinion, depth: int, seed: int) -> History:
    if depth < 0:
        raise ValueError(f"Depth must be nonnegative, got {depth}")
    rng = np.random.default_rng(seed)
    return _sample(opinion, depth, rng)


def _sample(opinion: Opinion, depth: int, rng: np.random.Generator) -> History:
    current = opinion
    path: List[int] = []
    for _ in range(depth):
        symbol = draw_symbol(current.forecast(()), rng.random())
        path.append(symbol)
        current = current.conditioned((symbol,))
    return tuple(path)


def make_example1_surrogate(
    N: int, K: int, mode: NumberMode = NumberMode.rational
) -> Example1Surrogate:
    if N < 1 or K < 1:
        raise PreconditionViolated(
            "make_example1_surrogate", f"need N >= 1 and K >= 1, got N={N}, K={K}"
        )
    half = mode.coerce(Fraction(1, 2))
    window = mode.coerce(Fraction(1, 2 * K))
    components: List[Opinion] = [DyadicIID(None, mode=mode)]
    components.extend(DyadicIID(n, mode=mode) for n in range(N + 1, N + K + 1))
    opinion = BayesMixture(
        BINARY,
        tuple(components),
        (half,) + (window,) * K,
        label=f"example1[N={N},K={K}]",
    )
    return Example1Surrogate(N, K, opinion)


def iid(
    p: Sequence[Any],
    mode: NumberMode = NumberMode.rational,
    label: Optional[str] = None,
) -> IID:
    dist = _coerce_dist(p, mode)
    name = label or "iid" + _format_dist(dist)
    return IID(Alphabet(len(dist)), dist, label=name)


def bernoulli(
    p1: Any, mode: NumberMode = NumberMode.rational, label: Optional[str] = None
) -> IID:
    """Binary IID kernel with probability p1 on symbol 1."""
    one = mode.coerce(p1)
    return IID(BINARY, (mode.one - one, one), label=label or f"Bern({format_number(one)})")


def from_spec(
    spec: Mapping[str, Any],
    alphabet: Alphabet = BINARY,
    mode: NumberMode = NumberMode.rational,
) -> Opinion:
    """Build an opinion from its structured description (see the README)."""
    if not isinstance(spec, Mapping) or "kind" not in spec:
        raise ValueError("Opinion spec needs a 'kind'")
    kind = spec["kind"]
    allowed = {"kind", "label", *_SPEC_KEYS.get(kind, ())}
    if kind not in _SPEC_KEYS:
        raise ValueError(f"Unknown opinion kind '{kind}'. Available: {', '.join(_SPEC_KEYS)}")
    unknown = set(spec) - allowed
    if unknown:
        raise ValueError(f"Unknown keys for '{kind}' opinion: {', '.join(sorted(unknown))}")
    label = spec.get("label")
    if kind == "iid":
        dist = _coerce_dist(spec["p"], mode)
        return IID(alphabet, dist, label=label or "iid" + _format_dist(dist))
    if kind == "bernoulli":
        if alphabet != BINARY:
            raise ValueError("Bernoulli opinions need the binary alphabet")
        return bernoulli(spec["p"], mode, label=label)
    if kind == "time-iid":
        periods = tuple(_coerce_dist(d, mode) for d in spec["periods"])
        tail = spec.get("tail")
        tail_dist = _coerce_dist(tail, mode) if tail else alphabet.uniform(mode)
        return TimeInhomogeneousIID(
            alphabet, periods, tail_dist, spec.get("offset", 0), label or "time-iid"
        )
    if kind == "dyadic":
        if alphabet != BINARY:
            raise ValueError("Dyadic opinions need the binary alphabet")
        return DyadicIID(spec.get("n"), mode=mode, offset=spec.get("offset", 0), label=label or "")
    if kind == "markov":
        return Markov(
            alphabet,
            _coerce_dist(spec["initial"], mode),
            tuple(_coerce_dist(row, mode) for row in spec["transition"]),
            label=label or "markov",
        )
    if kind == "mixture":
        parts = spec["components"]
        components = tuple(from_spec(p["opinion"], alphabet, mode) for p in parts)
        weights = tuple(mode.coerce(p["weight"]) for p in parts)
        name = label or "mix[" + ",".join(c.label for c in components) + "]"
        return BayesMixture(alphabet, components, weights, label=name)
    if kind == "table":
        tail_spec = spec.get("tail")
        tail = (
            from_spec(tail_spec, alphabet, mode)
            if tail_spec
            else IID(alphabet, alphabet.uniform(mode), label="uniform")
        )
        entries = tuple(
            (parse_history(str(h), alphabet.size), _coerce_dist(d, mode))
            for h, d in spec["table"].items()
        )
        return TableKernel(alphabet, spec["depth"], entries, tail, label=label or "table")
    base = from_spec(spec["base"], alphabet, mode)
    return condition(base, parse_history(spec["prefix"], alphabet.size))


_SPEC_KEYS: Dict[str, Tuple[str, ...]] = {
    "iid": ("p",),
    "bernoulli": ("p",),
    "time-iid": ("periods", "tail", "offset"),
    "dyadic": ("n", "offset"),
    "markov": ("initial", "transition"),
    "mixture": ("components",),
    "table": ("depth", "table", "tail"),
    "conditioned": ("base", "prefix"),
}

