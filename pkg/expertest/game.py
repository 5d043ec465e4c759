"""Finite two-player zero-sum matrix games.

The row player (Nature) minimizes and the column player (the expert)
maximizes the payoff. Games are solved exactly by a pair of linear programs,
or approximately by multiplicative-weights self-play for large matrices.
"""
from typing import Any, Dict, List, Optional, Sequence, Tuple
from dataclasses import dataclass, field
from functools import lru_cache
import logging
import math

import numpy as np
from scipy.optimize import linprog

from .util import NonConvergence, PreconditionViolated, normalize_weights

logger = logging.getLogger(__name__)

SOLVER_METHODS = ("lp", "mwu")
TIE_TOLERANCE = 1e-12


@dataclass
class MatrixGame:
    payoffs: np.ndarray
    row_labels: List[str] = field(default_factory=list)
    col_labels: List[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.payoffs = np.array(self.payoffs, dtype=np.float64)
        if self.payoffs.ndim != 2 or 0 in self.payoffs.shape:
            raise ValueError(f"Payoffs must be a nonempty matrix, got shape {self.payoffs.shape}")
        if not np.all(np.isfinite(self.payoffs)):
            raise ValueError("Payoff entries must be finite")
        rows, cols = self.payoffs.shape
        if not self.row_labels:
            self.row_labels = [f"r{i}" for i in range(rows)]
        if not self.col_labels:
            self.col_labels = [f"c{j}" for j in range(cols)]
        if len(self.row_labels) != rows or len(self.col_labels) != cols:
            raise ValueError("Need one label per row and per column")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.payoffs.shape  # type: ignore[return-value]

    def to_json(self) -> Dict[str, Any]:
        return {
            "payoffs": self.payoffs.tolist(),
            "row_labels": self.row_labels,
            "col_labels": self.col_labels,
        }

    def to_text(self) -> str:
        """Rows of space-separated decimals."""
        return "\n".join(" ".join(repr(float(x)) for x in row) for row in self.payoffs) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MatrixGame":
        rows = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                rows.append([float(x) for x in line.split()])
        if not rows or any(len(row) != len(rows[0]) for row in rows):
            raise ValueError("Matrix text needs rows of equal length")
        return cls(np.array(rows))


@dataclass
class GameSolution:
    value: float
    row_strategy: np.ndarray
    col_strategy: np.ndarray
    duality_gap: float
    method: str = "lp"
    iterations: int = 0

    def to_json(self) -> Dict[str, Any]:
        return {
            "value": self.value,
            "row_strategy": self.row_strategy.tolist(),
            "col_strategy": self.col_strategy.tolist(),
            "duality_gap": self.duality_gap,
            "method": self.method,
            "iterations": self.iterations,
        }


def _first_within(values: np.ndarray, target: float) -> int:
    # Lowest index among (numerically) tied optima
    return int(np.flatnonzero(np.abs(values - target) <= TIE_TOLERANCE)[0])


def best_row_response(game: MatrixGame, col_strategy: Sequence[float]) -> Tuple[int, float]:
    expected = game.payoffs @ np.asarray(col_strategy, dtype=np.float64)
    index = _first_within(expected, expected.min())
    return index, float(expected[index])


def best_col_response(game: MatrixGame, row_strategy: Sequence[float]) -> Tuple[int, float]:
    expected = np.asarray(row_strategy, dtype=np.float64) @ game.payoffs
    index = _first_within(expected, expected.max())
    return index, float(expected[index])


def _bracket(game: MatrixGame, x: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    upper = float((x @ game.payoffs).max())
    lower = float((game.payoffs @ y).min())
    return lower, upper


def _solution(
    game: MatrixGame, x: np.ndarray, y: np.ndarray, method: str, iterations: int
) -> GameSolution:
    lower, upper = _bracket(game, x, y)
    return GameSolution(
        value=(lower + upper) / 2,
        row_strategy=x,
        col_strategy=y,
        duality_gap=max(upper - lower, 0.0),
        method=method,
        iterations=iterations,
    )


def _solve_lp(game: MatrixGame) -> Tuple[np.ndarray, np.ndarray, int]:
    A = game.payoffs
    rows, cols = A.shape
    # Nature: min v s.t. (x^T A)_j <= v for every column, x in the simplex
    row_res = linprog(
        c=np.r_[np.zeros(rows), 1.0],
        A_ub=np.c_[A.T, -np.ones(cols)],
        b_ub=np.zeros(cols),
        A_eq=np.r_[np.ones(rows), 0.0].reshape(1, -1),
        b_eq=[1.0],
        bounds=[(0, None)] * rows + [(None, None)],
        method="highs",
    )
    # Expert: max u s.t. (A y)_i >= u for every row, y in the simplex
    col_res = linprog(
        c=np.r_[np.zeros(cols), -1.0],
        A_ub=np.c_[-A, np.ones(rows)],
        b_ub=np.zeros(rows),
        A_eq=np.r_[np.ones(cols), 0.0].reshape(1, -1),
        b_eq=[1.0],
        bounds=[(0, None)] * cols + [(None, None)],
        method="highs",
    )
    for res in (row_res, col_res):
        if res.status != 0:
            raise NonConvergence(f"Game LP failed: {res.message}")
    x = np.array(normalize_weights(row_res.x[:rows]))
    y = np.array(normalize_weights(col_res.x[:cols]))
    return x, y, int(row_res.nit + col_res.nit)


def _softmax(scores: np.ndarray) -> np.ndarray:
    weights = np.exp(scores - scores.max())
    return weights / weights.sum()


def _solve_mwu(
    game: MatrixGame, tol: float, max_iters: int, check_every: int = 50
) -> GameSolution:
    A = game.payoffs
    rows, cols = A.shape
    eta_row = math.sqrt(math.log(max(rows, 2)) / max_iters)
    eta_col = math.sqrt(math.log(max(cols, 2)) / max_iters)
    row_loss = np.zeros(rows)
    col_gain = np.zeros(cols)
    x_sum = np.zeros(rows)
    y_sum = np.zeros(cols)
    solution: Optional[GameSolution] = None
    for it in range(1, max_iters + 1):
        x = _softmax(-eta_row * row_loss)
        y = _softmax(eta_col * col_gain)
        x_sum += x
        y_sum += y
        row_loss += A @ y
        col_gain += x @ A
        if it % check_every == 0 or it == max_iters:
            solution = _solution(game, x_sum / it, y_sum / it, "mwu", it)
            if solution.duality_gap <= tol:
                return solution
    gap = solution.duality_gap if solution else float("inf")
    raise NonConvergence(
        f"Multiplicative weights stopped after {max_iters} iterations with gap {gap:.3g} > {tol:g}"
    )


def solve_matrix_game(
    game: MatrixGame, tol: float = 1e-9, method: str = "lp", max_iters: int = 100_000
) -> GameSolution:
    if tol <= 0:
        raise PreconditionViolated("solve_matrix_game", f"tol must be positive, got {tol}")
    if method not in SOLVER_METHODS:
        raise PreconditionViolated(
            "solve_matrix_game", f"unknown method '{method}'. Available: {', '.join(SOLVER_METHODS)}"
        )
    if method == "mwu":
        return _solve_mwu(game, tol, max_iters)
    x, y, iterations = _solve_lp(game)
    solution = _solution(game, x, y, "lp", iterations)
    if solution.duality_gap > tol:
        raise NonConvergence(
            f"LP strategies leave a duality gap of {solution.duality_gap:.3g} > {tol:g}"
        )
    logger.debug("Solved %dx%d game: value %.12g", *game.shape, solution.value)
    return solution


@lru_cache(maxsize=None)
def _simplex_grid(n: int, grid: int) -> np.ndarray:
    """All nonnegative integer vectors of length n summing to grid."""
    if n == 1:
        return np.array([[grid]])
    blocks = []
    for k in range(grid + 1):
        rest = _simplex_grid(n - 1, grid - k)
        blocks.append(np.hstack([np.full((len(rest), 1), k), rest]))
    return np.vstack(blocks)


def brute_force_value(game: MatrixGame, grid: int) -> float:
    """Grid search over both simplices, for tiny games only. Each bound is
    off by at most (range of payoffs) * (size - 1) / grid.
    """
    rows, cols = game.shape
    if rows > 3 or cols > 3 or grid < 1:
        raise PreconditionViolated(
            "brute_force_value", f"needs at most 3x3 and grid >= 1, got {rows}x{cols}"
        )
    A = game.payoffs
    ys = _simplex_grid(cols, grid) / grid
    xs = _simplex_grid(rows, grid) / grid
    lower = float((ys @ A.T).min(axis=1).max())
    upper = float((xs @ A).max(axis=1).min())
    return (lower + upper) / 2
