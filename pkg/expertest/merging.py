"""Finite-horizon diagnostics for merging of opinions and absolute continuity."""
from typing import Any, Dict, List, Optional, Sequence, Tuple
from dataclasses import dataclass, field
from enum import Enum
import logging

import numpy as np

from .measures import Opinion, DyadicIID, condition, cylinder_table, draw_symbol
from .measures import make_example1_surrogate
from .util import Number, History, NumberMode, ENUMERATION_LIMIT
from .util import ConditioningOnNullEvent, EnumerationTooLarge, PreconditionViolated
from .util import check_enumerable, enumerate_histories, to_json_number, mode_of
from .util import format_history

logger = logging.getLogger(__name__)

# Step factor above which the tail of a ratio profile counts as geometric growth
GROWTH_FACTOR = 1.05


class CurveMethod(Enum):
    exact = "exact"
    monte_carlo = "monte-carlo"


@dataclass(frozen=True)
class CurvePoint:
    t: int
    mean: Number
    max: Number
    exceedance: Number


@dataclass
class MergingCurve:
    lookahead: int
    threshold: Number
    method: CurveMethod
    points: List[CurvePoint] = field(default_factory=list)
    seed: Optional[int] = None
    n_paths: Optional[int] = None

    @property
    def exceedance(self) -> List[Number]:
        return [point.exceedance for point in self.points]

    def to_json(self) -> Dict[str, Any]:
        return {
            "lookahead": self.lookahead,
            "threshold": to_json_number(self.threshold),
            "method": self.method.value,
            "seed": self.seed,
            "n_paths": self.n_paths,
            "points": [
                {
                    "t": p.t,
                    "mean": to_json_number(p.mean),
                    "max": to_json_number(p.max),
                    "exceedance": to_json_number(p.exceedance),
                }
                for p in self.points
            ],
        }

    def to_csv_rows(self) -> List[List[Any]]:
        rows: List[List[Any]] = [["t", "mean", "max", "exceedance"]]
        for p in self.points:
            rows.append(
                [p.t, to_json_number(p.mean), to_json_number(p.max), to_json_number(p.exceedance)]
            )
        return rows


@dataclass
class AbsContinuityReport:
    horizon: int
    max_ratio: Optional[Number]
    min_p_mass: Number
    violations: List[History]
    ratio_profile: List[Optional[Number]]
    geometric_growth: bool

    @property
    def ratio_infinite(self) -> bool:
        return self.max_ratio is None

    def to_json(self) -> Dict[str, Any]:
        return {
            "horizon": self.horizon,
            "max_ratio": "inf" if self.max_ratio is None else to_json_number(self.max_ratio),
            "min_p_mass": to_json_number(self.min_p_mass),
            "violations": [format_history(h) for h in self.violations],
            "ratio_profile": [
                "inf" if r is None else to_json_number(r) for r in self.ratio_profile
            ],
            "geometric_growth": self.geometric_growth,
        }


def _same_space(P: Opinion, Q: Opinion) -> None:
    if P.alphabet != Q.alphabet:
        raise PreconditionViolated("merging", "opinions live on different alphabets")
    if P.mode is not Q.mode:
        raise PreconditionViolated("merging", "opinions use different number modes")


def _tv(P: Opinion, Q: Opinion, lookahead: int) -> Number:
    diff = cylinder_table(P, lookahead) - cylinder_table(Q, lookahead)
    total = np.abs(diff).sum()
    if P.mode is NumberMode.rational:
        return total / 2
    return float(total) / 2


def tv_lookahead(P: Opinion, Q: Opinion, history: History, L: int) -> Number:
    """Total variation between the depth-L marginals of the conditionals of P
    and Q given the history. A lower bound on the distance over all events
    that grows with L.
    """
    _same_space(P, Q)
    if L < 1:
        raise PreconditionViolated("tv_lookahead", f"lookahead must be >= 1, got {L}")
    check_enumerable(P.alphabet.size, L)
    return _tv(condition(P, history), condition(Q, history), L)


def _summarize(t: int, tvs: Sequence[Tuple[Number, Number]], threshold: Number, mode: NumberMode) -> CurvePoint:
    mean, exceed, top = mode.zero, mode.zero, mode.zero
    for mass, tv in tvs:
        mean = mean + mass * tv
        if tv > threshold:
            exceed = exceed + mass
        if mass > 0 and tv > top:
            top = tv
    return CurvePoint(t, mean, top, exceed)


def _exact_curve(
    P: Opinion, Q: Opinion, t_max: int, L: int, threshold: Number
) -> List[CurvePoint]:
    # States are pairs of conditioned opinions; None stands for a P-null history
    mode = Q.mode
    states: Dict[Tuple[Optional[Opinion], Opinion], Number] = {(P, Q): mode.one}
    points = []
    for t in range(t_max + 1):
        tvs = [
            (mass, mode.one if p is None else _tv(p, q, L))
            for (p, q), mass in states.items()
        ]
        points.append(_summarize(t, tvs, threshold, mode))
        if t == t_max:
            break
        following: Dict[Tuple[Optional[Opinion], Opinion], Number] = {}
        for (p, q), mass in states.items():
            q_dist = q.forecast(())
            p_dist = p.forecast(()) if p is not None else None
            for symbol, q_prob in enumerate(q_dist):
                if q_prob == 0:
                    continue
                step = (symbol,)
                if p is None or p_dist is None or p_dist[symbol] == 0:
                    p_next = None
                else:
                    p_next = p.conditioned(step)
                key = (p_next, q.conditioned(step))
                following[key] = following.get(key, mode.zero) + mass * q_prob
        if len(following) > ENUMERATION_LIMIT:
            raise EnumerationTooLarge(len(following))
        states = following
        logger.debug("Exact merging curve: t=%d, %d conditional states", t + 1, len(states))
    return points


def _monte_carlo_curve(
    P: Opinion,
    Q: Opinion,
    t_max: int,
    L: int,
    threshold: Number,
    n_paths: int,
    seed: int,
) -> List[CurvePoint]:
    tvs = np.empty((n_paths, t_max + 1), dtype=np.float64)
    children = np.random.SeedSequence(seed).spawn(n_paths)
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        p: Optional[Opinion] = P
        q = Q
        for t in range(t_max + 1):
            tvs[i, t] = 1.0 if p is None else float(_tv(p, q, L))
            if t == t_max:
                break
            symbol = draw_symbol(q.forecast(()), rng.random())
            if p is not None:
                p = p.conditioned((symbol,)) if p.forecast(())[symbol] != 0 else None
            q = q.conditioned((symbol,))
        if (i + 1) % 1000 == 0:
            logger.info("Monte Carlo merging curve: %d/%d paths", i + 1, n_paths)
    limit = float(threshold)
    points = []
    for t in range(t_max + 1):
        column = tvs[:, t]
        points.append(
            CurvePoint(
                t,
                float(column.sum() / n_paths),
                float(column.max()),
                float((column > limit).sum() / n_paths),
            )
        )
    return points


def merging_curve(
    P: Opinion,
    Q: Opinion,
    t_max: int,
    L: int,
    threshold: Any,
    method: CurveMethod = CurveMethod.exact,
    *,
    n_paths: Optional[int] = None,
    seed: Optional[int] = None,
) -> MergingCurve:
    """Summaries of TV_L(t) under paths drawn from Q, for t = 0..t_max."""
    _same_space(P, Q)
    if t_max < 0 or L < 1:
        raise PreconditionViolated("merging_curve", "need t_max >= 0 and L >= 1")
    check_enumerable(P.alphabet.size, L)
    limit = P.mode.coerce(threshold)
    curve = MergingCurve(L, limit, method)
    if method is CurveMethod.exact:
        curve.points = _exact_curve(P, Q, t_max, L, limit)
        return curve
    if n_paths is None or n_paths < 1 or seed is None:
        raise PreconditionViolated(
            "merging_curve", "monte-carlo needs n_paths >= 1 and a seed"
        )
    curve.seed = seed
    curve.n_paths = n_paths
    curve.points = _monte_carlo_curve(P, Q, t_max, L, limit, n_paths, seed)
    return curve


def _max_ratio(
    p_table: np.ndarray, q_table: np.ndarray
) -> Tuple[Optional[Number], List[int]]:
    best: Optional[Number] = None
    violations = []
    for index, (p, q) in enumerate(zip(p_table, q_table)):
        if q == 0:
            continue
        if p == 0:
            violations.append(index)
            continue
        ratio = q / p
        if best is None or ratio > best:
            best = ratio
    return best, violations


def abs_continuity_report(P: Opinion, Q: Opinion, d: int) -> AbsContinuityReport:
    """Exhaustive check of Q << P on all depth-d cylinders."""
    _same_space(P, Q)
    size = P.alphabet.size
    check_enumerable(size, d)
    mode = P.mode
    profile: List[Optional[Number]] = []
    max_ratio: Optional[Number] = mode.one
    violating: List[int] = []
    for depth in range(1, d + 1):
        max_ratio, violating = _max_ratio(cylinder_table(P, depth), cylinder_table(Q, depth))
        profile.append(None if violating else _plain(max_ratio))
    histories = list(enumerate_histories(size, d))
    p_table, q_table = cylinder_table(P, d), cylinder_table(Q, d)
    support = [p for p, q in zip(p_table, q_table) if q > 0]
    min_mass = _plain(min(support)) if support else mode.zero
    return AbsContinuityReport(
        horizon=d,
        max_ratio=None if violating else _plain(max_ratio),
        min_p_mass=min_mass,
        violations=[histories[i] for i in violating],
        ratio_profile=profile,
        geometric_growth=_grows_geometrically(profile),
    )


def _plain(value: Any) -> Any:
    return float(value) if isinstance(value, np.floating) else value


def _grows_geometrically(profile: List[Optional[Number]]) -> bool:
    if len(profile) < 2 or any(r is None for r in profile):
        return False
    start = max(1, len(profile) // 2)
    steps = [profile[k] / profile[k - 1] for k in range(start, len(profile))]  # type: ignore[operator]
    return all(step >= GROWTH_FACTOR for step in steps)


def example1_gap(
    N: int,
    K: int,
    t: int,
    reference: History,
    mode: NumberMode = NumberMode.rational,
) -> Number:
    """Disagreement on A = {1 infinitely often} between the dyadic law and the
    surrogate after observing the reference history. The tail constants of
    the components are analytic, and the cylinders are computed exactly.
    """
    if t > N:
        raise PreconditionViolated("example1_gap", f"t={t} exceeds N={N}")
    if len(reference) != t:
        raise PreconditionViolated(
            "example1_gap", f"reference has length {len(reference)}, expected {t}"
        )
    surrogate = make_example1_surrogate(N, K, mode)
    mixture = surrogate.opinion
    p_inf = surrogate.p_infinity
    total = mixture.cylinder(reference)
    if total == 0:
        raise ConditioningOnNullEvent(mixture.label, reference)
    in_a = mode.zero
    for weight, comp in zip(mixture.weights, mixture.components):
        assert isinstance(comp, DyadicIID)
        in_a = in_a + weight * comp.prob_ones_infinitely_often * comp.cylinder(reference)
    # Independent coordinates: conditioning leaves the tail event unchanged
    return p_inf.prob_ones_infinitely_often - in_a / total


@dataclass
class CandidateResult:
    label: str
    abs_continuous: bool
    final_exceedance: Number
    merged: bool

    def to_json(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "abs_continuous": self.abs_continuous,
            "final_exceedance": to_json_number(self.final_exceedance),
            "merged": self.merged,
        }


@dataclass
class BDPropertyReport:
    label: str
    candidates: List[CandidateResult]

    @property
    def consistent(self) -> bool:
        """No absolutely continuous candidate failed to merge at this horizon."""
        return all(c.merged for c in self.candidates if c.abs_continuous)

    def to_json(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "consistent": self.consistent,
            "candidates": [c.to_json() for c in self.candidates],
        }


def bd_property_report(
    P: Opinion,
    candidates: Sequence[Opinion],
    *,
    t_max: int,
    L: int,
    threshold: Any,
    d: int,
    tolerance: Any = 0.05,
    method: CurveMethod = CurveMethod.exact,
    n_paths: Optional[int] = None,
    seed: Optional[int] = None,
) -> BDPropertyReport:
    """Check the observable side of the Blackwell-Dubins property: P should
    merge with every candidate that looks absolutely continuous w.r.t. P.
    """
    results = []
    for Q in candidates:
        report = abs_continuity_report(P, Q, d)
        abs_continuous = not report.violations and not report.geometric_growth
        curve = merging_curve(
            P, Q, t_max, L, threshold, method, n_paths=n_paths, seed=seed
        )
        final = curve.points[-1].exceedance
        merged = final <= mode_of(final).coerce(tolerance)
        results.append(CandidateResult(Q.label, abs_continuous, final, merged))
    return BDPropertyReport(P.label, results)
