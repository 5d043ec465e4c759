"""Manipulating and refuting tests at a finite horizon.

Nature picks a depth-d history, the expert picks an opinion to report, and
the expert scores 1 when the history avoids the opinion's rejection region.
A strategy that scores at least q on every history manipulates the test.
"""
from typing import Any, Dict, List, Optional, Sequence, Tuple
from dataclasses import dataclass, field
from fractions import Fraction
import logging
import math

import numpy as np

from .game import MatrixGame, solve_matrix_game
from .measures import BINARY, IID, Alphabet, Opinion, ReferencePath, TableKernel
from .testing import RejectionRegion, Test
from .util import Number, History, NumberMode, mode_of
from .util import InvalidTest, NonConvergence, PreconditionViolated
from .util import RegionDeeperThanHorizon, UndecidedMembership
from .util import check_enumerable, enumerate_histories, format_history, history_index
from .util import normalize_weights, to_json_number

logger = logging.getLogger(__name__)

# Slack on the best-response payoff bound, which holds exactly in theory
PAYOFF_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Strategy:
    """A finite-support randomization over opinions."""

    support: Tuple[Opinion, ...]
    weights: Tuple[Number, ...]

    def __post_init__(self) -> None:
        if not self.support or len(self.support) != len(self.weights):
            raise ValueError("Strategy needs one positive weight per opinion")
        if any(w <= 0 for w in self.weights):
            raise ValueError("Strategy weights must be positive")
        if not mode_of(self.weights[0]).is_one(sum(self.weights)):
            raise ValueError("Strategy weights must sum to 1")
        labels = [opinion.label for opinion in self.support]
        if len(set(labels)) != len(labels):
            raise ValueError(f"Strategy support labels must be distinct: {labels}")

    @classmethod
    def uniform(
        cls, support: Sequence[Opinion], mode: NumberMode = NumberMode.rational
    ) -> "Strategy":
        weight = mode.coerce(Fraction(1, len(support)))
        return cls(tuple(support), (weight,) * len(support))

    @property
    def mode(self) -> NumberMode:
        return mode_of(self.weights[0])

    def to_json(self) -> List[Dict[str, Any]]:
        return [
            {"weight": to_json_number(w), "opinion": opinion.to_spec()}
            for w, opinion in zip(self.weights, self.support)
        ]


@dataclass
class ManipulationReport:
    horizon: int
    test_label: str
    epsilon: float
    delta: float
    value: float
    strategy: Strategy
    per_path: List[Tuple[History, Number]]
    iterations: int
    value_trace: List[float] = field(default_factory=list)
    best_response_payoffs: List[float] = field(default_factory=list)

    @property
    def target(self) -> float:
        return 1 - self.epsilon - self.delta

    @property
    def min_pass_prob(self) -> Number:
        return min(prob for _, prob in self.per_path)

    @property
    def certified(self) -> bool:
        return self.min_pass_prob >= self.target

    def to_json(self) -> Dict[str, Any]:
        return {
            "horizon": self.horizon,
            "test": self.test_label,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "value": self.value,
            "certified": self.certified,
            "min_pass_prob": to_json_number(self.min_pass_prob),
            "iterations": self.iterations,
            "value_trace": self.value_trace,
            "best_response_payoffs": self.best_response_payoffs,
            "strategy": self.strategy.to_json(),
        }

    def to_csv_rows(self) -> List[List[Any]]:
        rows: List[List[Any]] = [["history", "pass_prob"]]
        for history, prob in self.per_path:
            rows.append([format_history(history), to_json_number(prob)])
        return rows


def _regions(strategy: Strategy, test: Test) -> List[RejectionRegion]:
    return [test(opinion) for opinion in strategy.support]


def _pass_prob(
    strategy: Strategy, regions: Sequence[RejectionRegion], history: History
) -> Number:
    total = strategy.mode.zero
    for weight, opinion, region in zip(strategy.weights, strategy.support, regions):
        member = region.contains(history)
        if member is None:
            raise UndecidedMembership(opinion.label, history)
        if not member:
            total = total + weight
    return total


def pass_prob(strategy: Strategy, test: Test, history: History) -> Number:
    """Weight of the opinions whose rejection region misses the history."""
    return _pass_prob(strategy, _regions(strategy, test), history)


def verify_nonmanipulable(
    test: Test, strategy: Strategy, reference: Optional[ReferencePath] = None
) -> History:
    """Find the cylinder along the reference path on which every opinion in
    the strategy is rejected, and check that it passes with probability 0.
    """
    if test.kind != "bd":
        raise InvalidTest(test.label, "needs a test whose regions are cylinders on one path")
    reference = reference or test.params["reference"]
    regions = _regions(strategy, test)
    depth = 0
    for opinion, region in zip(strategy.support, regions):
        if len(region.cylinders) != 1:
            raise InvalidTest(test.label, f"region of '{opinion.label}' is not a single cylinder")
        cylinder = region.cylinders[0]
        if cylinder != reference.head(len(cylinder)):
            raise InvalidTest(
                test.label, f"region of '{opinion.label}' is off the reference path {reference}"
            )
        depth = max(depth, len(cylinder))
    witness = reference.head(depth)
    prob = _pass_prob(strategy, regions, witness)
    if prob != 0:
        raise InvalidTest(
            test.label, f"cylinder '{format_history(witness)}' passes with probability {prob}"
        )
    logger.debug("Refuting cylinder for %s: %s", test.label, format_history(witness))
    return witness


def _column(region: RejectionRegion, size: int, d: int) -> np.ndarray:
    column = np.ones(size**d)
    for cylinder in region.cylinders:
        width = size ** (d - len(cylinder))
        start = history_index(cylinder, size) * width
        column[start : start + width] = 0.0
    return column


def _menu_column(test: Test, opinion: Opinion, size: int, d: int) -> np.ndarray:
    region = test(opinion)
    if region.depth > d:
        raise RegionDeeperThanHorizon(opinion.label, region.depth, d)
    return _column(region, size, d)


def _stack(
    columns: Sequence[np.ndarray], menu: Sequence[Opinion], row_labels: List[str]
) -> MatrixGame:
    return MatrixGame(
        np.column_stack(columns),
        row_labels=row_labels,
        col_labels=[opinion.label for opinion in menu],
    )


def build_game(test: Test, d: int, menu: Sequence[Opinion]) -> MatrixGame:
    """Rows are depth-d histories in lexicographic order, columns are the
    menu opinions. An entry is 1 when the history passes the opinion.
    """
    if not menu:
        raise PreconditionViolated("build_game", "the opinion menu is empty")
    size = menu[0].alphabet.size
    check_enumerable(size, d)
    columns = [_menu_column(test, opinion, size, d) for opinion in menu]
    return _stack(columns, menu, [format_history(h) for h in enumerate_histories(size, d)])


def nature_to_opinion(
    row_strategy: Sequence[Any],
    d: int,
    alphabet: Alphabet = BINARY,
    label: str = "nature",
) -> TableKernel:
    """Lift a distribution over depth-d histories to an opinion with exactly
    those cylinder probabilities. Null prefixes get uniform forecasts.
    """
    size = alphabet.size
    check_enumerable(size, d)
    values = list(row_strategy)
    if len(values) != size**d:
        raise ValueError(f"Expected {size ** d} probabilities over depth-{d} histories")
    mode = NumberMode.rational if isinstance(values[0], Fraction) else NumberMode.float
    leaf = mode.array([mode.coerce(v) for v in values])
    if any(v < 0 for v in leaf) or not mode.is_one(leaf.sum()):
        raise ValueError("Nature's strategy must be a probability vector")
    levels = [leaf]
    for _ in range(d):
        levels.append(levels[-1].reshape(-1, size).sum(axis=1))
    levels.reverse()
    uniform = alphabet.uniform(mode)
    entries = []
    for t in range(d):
        for i, prefix in enumerate(enumerate_histories(size, t)):
            mass = levels[t][i]
            if mass == 0:
                entries.append((prefix, uniform))
                continue
            children = levels[t + 1][i * size : (i + 1) * size]
            entries.append((prefix, tuple(mode.coerce(c / mass) for c in children)))
    tail = IID(alphabet, uniform, label="uniform")
    return TableKernel(alphabet, d, tuple(entries), tail, label=label)


def lightest_cells_opinion(
    row_strategy: Sequence[Any],
    d: int,
    epsilon: Any,
    alphabet: Alphabet = BINARY,
    label: str = "lightest",
) -> TableKernel:
    """An exact opinion whose tail region at level epsilon is the floor(epsilon * m^d)
    depth-d cells lightest under the row strategy (ties to the smaller index).
    Those cells get epsilon / (k + 1) each and the other cells share the rest
    equally, which keeps every other cell heavier and outside the region.
    """
    size = alphabet.size
    check_enumerable(size, d)
    n = size**d
    weights = [float(w) for w in row_strategy]
    if len(weights) != n:
        raise ValueError(f"Expected {n} probabilities over depth-{d} histories")
    eps = NumberMode.rational.coerce(epsilon)
    if not 0 < eps < 1:
        raise PreconditionViolated(
            "lightest_cells_opinion", f"epsilon must be in (0, 1), got {epsilon}"
        )
    k = math.floor(eps * n)
    light = set(sorted(range(n), key=lambda i: (weights[i], i))[:k])
    low = eps / (k + 1)
    high = (1 - low * k) / (n - k)
    cells = [low if i in light else high for i in range(n)]
    return nature_to_opinion(cells, d, alphabet, label=label)


def _scan(strategy: Strategy, test: Test, d: int) -> List[Tuple[History, Number]]:
    regions = _regions(strategy, test)
    size = strategy.support[0].alphabet.size
    return [(h, _pass_prob(strategy, regions, h)) for h in enumerate_histories(size, d)]


def _fresh_label(taken: Sequence[str]) -> str:
    i = len(taken)
    while f"nature-{i}" in taken:
        i += 1
    return f"nature-{i}"


def double_oracle_manipulate(
    test: Test,
    d: int,
    epsilon: Any,
    delta: Any,
    max_iters: int = 300,
    tol: float = 1e-6,
    alphabet: Alphabet = BINARY,
    initial_menu: Optional[Sequence[Opinion]] = None,
) -> ManipulationReport:
    """Grow a menu of reportable opinions until the expert's mixture over it
    passes every depth-d history with probability at least 1 - epsilon - delta.
    Each new column is the better response to Nature's current optimal mixture
    of two candidates: the mixture itself reported as an opinion, and for tail
    tests the opinion whose region is the mixture's lightest cells.
    """
    eps = NumberMode.float.coerce(epsilon)
    slack = NumberMode.float.coerce(delta)
    if not 0 < eps < 1 or not 0 < slack <= 1 - eps or max_iters < 1:
        raise PreconditionViolated(
            "double_oracle_manipulate",
            "need 0 < epsilon < 1, 0 < delta <= 1 - epsilon and max_iters >= 1",
        )
    target = 1 - eps - slack
    size = alphabet.size
    check_enumerable(size, d)
    if initial_menu:
        menu = list(initial_menu)
    else:
        uniform = np.full(size**d, 1.0 / size**d)
        menu = [nature_to_opinion(uniform, d, alphabet, label="nature-0")]
    columns = [_menu_column(test, opinion, size, d) for opinion in menu]
    row_labels = [format_history(h) for h in enumerate_histories(size, d)]
    trace: List[float] = []
    payoffs: List[float] = []

    def make_report(value: float, strategy: Strategy) -> ManipulationReport:
        per_path = _scan(strategy, test, d)
        return ManipulationReport(
            d, test.label, eps, slack, value, strategy, per_path, len(trace), trace, payoffs
        )

    for iteration in range(1, max_iters + 1):
        game = _stack(columns, menu, row_labels)
        solution = solve_matrix_game(game, tol=tol)
        value = min(max(solution.value, 0.0), 1.0)
        trace.append(value)
        logger.debug("Iteration %d: %d columns, value %.6f", iteration, len(menu), value)
        weights = normalize_weights(solution.col_strategy, cutoff=1e-12)
        kept = [(w, o) for w, o in zip(weights, menu) if w > 0]
        strategy = Strategy(tuple(o for _, o in kept), tuple(w for w, _ in kept))
        if value >= target:
            report = make_report(value, strategy)
            if report.certified:
                logger.info(
                    "Manipulated %s at horizon %d: value %.6f after %d iterations",
                    test.label, d, value, iteration,
                )
                return report
        mu = solution.row_strategy
        label = _fresh_label([o.label for o in menu])
        response = nature_to_opinion(mu, d, alphabet, label=label)
        column = _menu_column(test, response, size, d)
        payoff = float(column @ mu)
        if payoff < 1 - eps - PAYOFF_TOLERANCE:
            raise InvalidTest(
                test.label,
                f"reporting Nature's mixture passes with probability {payoff:.6f} "
                f"< 1 - epsilon, so the test does not control type I error",
            )
        if test.kind == "tail":
            light = lightest_cells_opinion(mu, d, test.epsilon, alphabet, label=label)
            light_column = _menu_column(test, light, size, d)
            light_payoff = float(light_column @ mu)
            if light_payoff > payoff:
                response, column, payoff = light, light_column, light_payoff
        payoffs.append(payoff)
        if payoff - value <= tol:
            logger.info("No column improves the value %.6f by more than %g", value, tol)
            break
        menu.append(response)
        columns.append(column)
    report = make_report(trace[-1], strategy)
    raise NonConvergence(
        f"Double oracle stopped after {len(trace)} iterations with value "
        f"{trace[-1]:.6f} and min pass probability {float(report.min_pass_prob):.6f}, "
        f"short of {target:.6f}",
        report=report,
    )
