from typing import Any, Callable, Dict, Iterable, List, Optional, Tuple
from dataclasses import dataclass, field
from collections import deque
from fractions import Fraction
import logging

from .measures import Opinion, ReferencePath, cylinder_prob, cylinder_table
from .util import Number, History, AtomDetected, PreconditionViolated
from .util import check_enumerable, enumerate_histories, format_history, is_prefix
from .util import NumberMode, to_json_number

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RejectionRegion:
    """A finite union of cylinders, no one of which is a prefix of another."""

    cylinders: Tuple[History, ...] = ()
    alphabet_size: int = 2

    @property
    def depth(self) -> int:
        return max((len(c) for c in self.cylinders), default=0)

    @property
    def full_cover(self) -> bool:
        # Disjoint cylinders cover the space iff their uniform mass adds to 1
        if not self.cylinders:
            return False
        size = self.alphabet_size
        return sum(Fraction(1, size ** len(c)) for c in self.cylinders) == 1

    def contains(self, history: History) -> Optional[bool]:
        """True if every path through the history is rejected, False if none
        is, and None if the history is too short to tell.
        """
        undecided = False
        for cylinder in self.cylinders:
            if is_prefix(cylinder, history):
                return True
            if len(cylinder) > len(history) and is_prefix(history, cylinder):
                undecided = True
        return None if undecided else False

    def to_json(self) -> List[str]:
        return [format_history(c) for c in self.cylinders]


def normalize_region(
    cylinders: Iterable[History], alphabet_size: int = 2
) -> RejectionRegion:
    unique = sorted(set(tuple(c) for c in cylinders), key=lambda c: (len(c), c))
    kept: List[History] = []
    for cylinder in unique:
        # Shorter cylinders come first, so any prefix is already kept
        if not any(is_prefix(prefix, cylinder) for prefix in kept):
            kept.append(cylinder)
    return RejectionRegion(tuple(sorted(kept)), alphabet_size)


def region_prob(opinion: Opinion, region: RejectionRegion) -> Number:
    total = opinion.mode.zero
    for cylinder in region.cylinders:
        total = total + cylinder_prob(opinion, cylinder)
    return total


@dataclass
class CylinderPartition:
    cells: List[History]
    probs: List[Number]
    epsilon: Number
    label: str = ""

    @property
    def total(self) -> Number:
        return sum(self.probs)

    def to_json(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "epsilon": to_json_number(self.epsilon),
            "cells": [
                {"history": format_history(c), "prob": to_json_number(p)}
                for c, p in zip(self.cells, self.probs)
            ],
        }

    def format_tree(self, indent: str = "  ") -> str:
        """Render the partition as the tree of splits that produced it."""
        lines = [f"{self.label} (epsilon={to_json_number(self.epsilon)})"]
        seen = set()
        for cell, prob in zip(self.cells, self.probs):
            for t in range(1, len(cell)):
                node = cell[:t]
                if node not in seen:
                    seen.add(node)
                    lines.append(f"{indent * t}{format_history(node)}")
            lines.append(f"{indent * len(cell)}{format_history(cell)}: {to_json_number(prob)}")
        return "\n".join(lines)


def epsilon_cylinder_partition(
    opinion: Opinion, epsilon: Any, max_depth: int
) -> CylinderPartition:
    """Split cells breadth-first until every cell has probability at most
    epsilon. A cell that is still too heavy at max_depth is an atom.
    """
    eps = opinion.mode.coerce(epsilon)
    if not 0 < eps <= 1 or max_depth < 1:
        raise PreconditionViolated(
            "epsilon_cylinder_partition", "need 0 < epsilon <= 1 and max_depth >= 1"
        )
    queue = deque([((), opinion.mode.one)])
    cells: List[Tuple[History, Number]] = []
    while queue:
        history, prob = queue.popleft()
        if prob <= eps:
            cells.append((history, prob))
            continue
        if len(history) >= max_depth:
            raise AtomDetected(opinion.label, history, prob, eps)
        for symbol in opinion.alphabet.symbols:
            child = history + (symbol,)
            queue.append((child, cylinder_prob(opinion, child)))
    cells.sort(key=lambda item: item[0])
    logger.debug("Partition of '%s' at epsilon %s: %d cells", opinion.label, eps, len(cells))
    return CylinderPartition(
        [c for c, _ in cells], [p for _, p in cells], eps, label=opinion.label
    )


@dataclass
class Test:
    """A deterministic rule mapping each opinion to a rejection region."""

    __test__ = False

    label: str
    rule: Callable[[Opinion], RejectionRegion]
    epsilon: Any
    kind: str = "custom"
    params: Dict[str, Any] = field(default_factory=dict)

    def __call__(self, opinion: Opinion) -> RejectionRegion:
        return self.rule(opinion)


def rejection_time(
    opinion: Opinion, reference: ReferencePath, epsilon: Any, max_depth: int
) -> int:
    """Smallest t >= 1 with P(reference^t) < epsilon."""
    eps = opinion.mode.coerce(epsilon)
    prob = opinion.mode.one
    for t in range(1, max_depth + 1):
        prob = cylinder_prob(opinion, reference.head(t))
        if prob < eps:
            return t
    raise AtomDetected(opinion.label, reference.head(max_depth), prob, eps)


def build_bd_test(reference: ReferencePath, epsilon: Any, max_depth: int = 200) -> Test:
    """Reject an opinion on the first cylinder along the reference path to
    which it assigns probability below epsilon.
    """
    if not 0 < NumberMode.float.coerce(epsilon) <= 1:
        raise PreconditionViolated("build_bd_test", f"epsilon must be in (0, 1], got {epsilon}")

    def rule(opinion: Opinion) -> RejectionRegion:
        reference.validate(opinion.alphabet)
        t = rejection_time(opinion, reference, epsilon, max_depth)
        return RejectionRegion((reference.head(t),), opinion.alphabet.size)

    return Test(
        label=f"bd[{reference},eps={epsilon}]",
        rule=rule,
        epsilon=epsilon,
        kind="bd",
        params={"reference": reference, "max_depth": max_depth},
    )


def tail_rejection_test(d: int, epsilon: Any) -> Test:
    """Reject the least likely depth-d cylinders while their total mass stays
    within epsilon. Ties go to the lexicographically smaller cylinder.
    """
    if not 0 < NumberMode.float.coerce(epsilon) < 1:
        raise PreconditionViolated(
            "tail_rejection_test", f"epsilon must be in (0, 1), got {epsilon}"
        )

    def rule(opinion: Opinion) -> RejectionRegion:
        size = opinion.alphabet.size
        check_enumerable(size, d)
        eps = opinion.mode.coerce(epsilon)
        table = cylinder_table(opinion, d)
        order = sorted(range(len(table)), key=lambda i: (table[i], i))
        histories = list(enumerate_histories(size, d))
        total = opinion.mode.zero
        rejected = []
        for index in order:
            if total + table[index] > eps:
                break
            total = total + table[index]
            rejected.append(histories[index])
        return RejectionRegion(tuple(sorted(rejected)), size)

    return Test(
        label=f"tail[d={d},eps={epsilon}]",
        rule=rule,
        epsilon=epsilon,
        kind="tail",
        params={"horizon": d},
    )


def empty_test(epsilon: Any = 0) -> Test:
    """Never rejects. Controls type I error at every level."""
    return Test(
        label="empty", rule=lambda opinion: RejectionRegion(), epsilon=epsilon, kind="empty"
    )


def type1_error(test: Test, opinion: Opinion) -> Number:
    return region_prob(opinion, test(opinion))
