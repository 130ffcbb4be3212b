"""
Uncertainty set of group assignments
Membership test, exhaustive enumeration for small instances, closed-form two-color count.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .config import get_settings
from .errors import InstanceError, NoiseSpecError, UncertaintyBudgetError
from .instance import GroupAssignment
from .noise import NoiseParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Coloring:
    """A candidate group assignment over the same points as the base labels."""
    labels: Tuple[int, ...]

    @classmethod
    def of(cls, base: GroupAssignment) -> "Coloring":
        return cls(labels=tuple(base.labels))

    @property
    def n(self) -> int:
        return len(self.labels)

    def relabel(self, changes: dict) -> "Coloring":
        """Copy with the given point -> label changes applied."""
        labels = list(self.labels)
        for point, label in changes.items():
            labels[point] = label
        return Coloring(labels=tuple(labels))

    def flips(self, base: GroupAssignment) -> List[int]:
        """Points whose label differs from the base."""
        return [j for j, (a, b) in enumerate(zip(base.labels, self.labels)) if a != b]


@dataclass(frozen=True)
class Deviation:
    """Per-group loss/gain counts and the pairwise flow matrix of a coloring."""
    lost: Tuple[int, ...]
    gained: Tuple[int, ...]
    pairs: Tuple[Tuple[int, ...], ...]

    @property
    def total(self) -> int:
        return sum(self.lost)


def deviation(base: GroupAssignment, candidate: Coloring) -> Deviation:
    """Count |P_h minus P^_h|, |P^_h minus P_h| and the g -> h flows."""
    if candidate.n != base.n:
        raise InstanceError(f"coloring covers {candidate.n} points but the base covers {base.n}")
    size = base.group_count
    given = np.asarray(base.labels, dtype=int)
    new = np.asarray(candidate.labels, dtype=int)
    if new.size and (new.min() < 0 or new.max() >= size):
        bad = int(np.flatnonzero((new < 0) | (new >= size))[0])
        raise InstanceError(f"point {bad} has label {candidate.labels[bad]} outside [0, {size})")
    flow = np.zeros((size, size), dtype=int)
    np.add.at(flow, (given, new), 1)
    np.fill_diagonal(flow, 0)
    return Deviation(
        lost=tuple(int(v) for v in flow.sum(axis=1)),
        gained=tuple(int(v) for v in flow.sum(axis=0)),
        pairs=tuple(tuple(int(v) for v in row) for row in flow),
    )


def in_uncertainty_set(base: GroupAssignment, candidate: Coloring, params: NoiseParams) -> bool:
    """True iff the candidate respects every per-group, joint and pairwise cap."""
    if params.group_count != base.group_count:
        raise InstanceError(f"noise params cover {params.group_count} groups, labels use {base.group_count}")
    dev = deviation(base, candidate)
    for h in range(base.group_count):
        if dev.lost[h] > params.outflow[h] or dev.gained[h] > params.inflow[h]:
            return False
    if dev.total > params.aggregate_star:
        return False
    if params.enforces_pairs:
        for g in range(base.group_count):
            for h in range(base.group_count):
                if dev.pairs[g][h] > params.pair_flow[g][h]:
                    return False
    return True


def enumerate_uncertainty_set(
    base: GroupAssignment, params: NoiseParams, limit: Optional[int] = None
) -> List[Coloring]:
    """Every member of the uncertainty set, in lexicographic label order."""
    if params.group_count != base.group_count:
        raise InstanceError(f"noise params cover {params.group_count} groups, labels use {base.group_count}")
    if limit is None:
        limit = get_settings().enum_limit

    size = base.group_count
    given = base.labels
    lost = [0] * size
    gained = [0] * size
    pairs = [[0] * size for _ in range(size)]
    total = [0]
    current: List[int] = []
    found: List[Coloring] = []

    def allowed(g: int, h: int) -> bool:
        if lost[g] + 1 > params.outflow[g] or gained[h] + 1 > params.inflow[h]:
            return False
        if total[0] + 1 > params.aggregate_star:
            return False
        if params.enforces_pairs and pairs[g][h] + 1 > params.pair_flow[g][h]:
            return False
        return True

    # Counters only grow along a branch, so pruning at the first exceeded cap is exact
    def visit(j: int) -> None:
        if j == len(given):
            if len(found) >= limit:
                raise UncertaintyBudgetError(f"uncertainty set has more than {limit} colorings")
            found.append(Coloring(labels=tuple(current)))
            return
        g = given[j]
        for h in range(size):
            if h == g:
                current.append(h)
                visit(j + 1)
                current.pop()
                continue
            if not allowed(g, h):
                continue
            lost[g] += 1
            gained[h] += 1
            pairs[g][h] += 1
            total[0] += 1
            current.append(h)
            visit(j + 1)
            current.pop()
            lost[g] -= 1
            gained[h] -= 1
            pairs[g][h] -= 1
            total[0] -= 1

    visit(0)
    logger.debug(f"Enumerated {len(found)} colorings for n={base.n}, groups={size}")
    return found


def count_two_color_symmetric(n1: int, n2: int, m: int) -> int:
    """Size of the two-color uncertainty set with at most m flips per color."""
    if min(n1, n2, m) < 0:
        raise NoiseSpecError(f"counts must be nonnegative, got n1={n1}, n2={n2}, m={m}")
    left = sum(math.comb(n1, i) for i in range(m + 1))
    right = sum(math.comb(n2, j) for j in range(m + 1))
    return left * right


def count_two_color(sizes: Sequence[int], m: int) -> int:
    if len(sizes) != 2:
        raise NoiseSpecError(f"closed-form count needs exactly two groups, got {len(sizes)}")
    return count_two_color_symmetric(sizes[0], sizes[1], m)
