"""
Brute-force oracles and instance generators for small fixtures.
"""

import itertools
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.audit import realized_violation
from core.instance import Instance, ProportionBounds
from core.noise import NoiseParams
from core.uncertainty import enumerate_uncertainty_set

RED, BLUE = 0, 1
EPS = 1e-9


def toy_caps(red_out: int, blue_out: int) -> NoiseParams:
    """Two-group caps on 2+2 points with m_r+ = m_b- and m_b+ = m_r-."""
    return NoiseParams.from_caps([blue_out, red_out], [red_out, blue_out], [2, 2])


def random_instance(rng, n: int, k: int, bounds: Optional[ProportionBounds] = None, dim: int = 2) -> Instance:
    """Random two-group instance with both groups present."""
    labels = np.zeros(n, dtype=int)
    labels[rng.choice(n, size=int(rng.integers(1, n)), replace=False)] = 1
    features = np.round(rng.random((n, dim)) * 10, 1)
    return Instance.from_arrays(features, labels, k=k, bounds=bounds, group_count=2)


def write_bank_like_csv(path, n: int, seed: int = 7) -> pd.DataFrame:
    """Bank-style table: age, balance, duration and a binary marital group."""
    rng = np.random.default_rng(seed)
    marital = np.where(rng.random(n) < 0.4, "married", "single")
    frame = pd.DataFrame({
        "age": rng.integers(18, 90, size=n),
        "balance": np.round(rng.normal(1500, 900, size=n), 2),
        "duration": rng.integers(5, 900, size=n),
        "marital": marital,
    })
    frame.to_csv(path, index=False)
    return frame


def distance_matrix(inst: Instance) -> np.ndarray:
    return np.array([inst.distances_from(i) for i in range(inst.n)])


def robust_fair_counts(size: int, counts: Sequence[int], bounds: ProportionBounds, params: NoiseParams) -> bool:
    """Robust upper/lower rows on integral counts of one cluster."""
    for h, count in enumerate(counts):
        if count + params.inflow[h] > bounds.upper[h] * size + EPS:
            return False
        if count - params.outflow[h] < bounds.lower[h] * size - EPS:
            return False
    return True


def block_counts(members: Sequence[int], labels: Sequence[int], group_count: int) -> List[int]:
    counts = [0] * group_count
    for j in members:
        counts[labels[j]] += 1
    return counts


def set_partitions(n: int, max_blocks: int) -> Iterator[Tuple[int, ...]]:
    """Restricted-growth strings: block index of every point, at most max_blocks blocks."""
    labels = [0] * n

    def extend(i: int, used: int):
        if i == n:
            yield tuple(labels)
            return
        for b in range(min(used + 1, max_blocks)):
            labels[i] = b
            yield from extend(i + 1, max(used, b + 1))

    yield from extend(1, 1)


def _has_distinct_centers(allowed: List[np.ndarray]) -> bool:
    """Hall's condition for picking one distinct center per block."""
    for size in range(1, len(allowed) + 1):
        for subset in itertools.combinations(allowed, size):
            if np.count_nonzero(np.logical_or.reduce(subset)) < size:
                return False
    return True


def bottleneck_radius(dist: np.ndarray, blocks: List[List[int]]) -> float:
    """Smallest max-radius over distinct center choices for the blocks."""
    radii = [dist[:, block].max(axis=1) for block in blocks]
    thresholds = np.unique(np.concatenate(radii))
    lo, hi = 0, len(thresholds) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _has_distinct_centers([r <= thresholds[mid] for r in radii]):
            hi = mid
        else:
            lo = mid + 1
    return float(thresholds[hi])


def optimal_robust_radius(inst: Instance, params: NoiseParams) -> Optional[float]:
    """R*: best robust fair clustering with at most k clusters, None if none exists."""
    bounds = inst.require_bounds()
    labels = inst.groups.labels
    dist = distance_matrix(inst)
    best = None
    for partition in set_partitions(inst.n, inst.k):
        blocks: List[List[int]] = [[] for _ in range(max(partition) + 1)]
        for j, b in enumerate(partition):
            blocks[b].append(j)
        if not all(
            robust_fair_counts(len(block), block_counts(block, labels, inst.group_count), bounds, params)
            for block in blocks
        ):
            continue
        radius = bottleneck_radius(dist, blocks)
        if best is None or radius < best:
            best = radius
    return best


def integral_assignment_exists(inst: Instance, params: NoiseParams, centers: Sequence[int], radius: float) -> bool:
    """Some assignment to the given centers within 3R satisfies every robust row."""
    bounds = inst.require_bounds()
    labels = inst.groups.labels
    dist = distance_matrix(inst)
    choices = [[c for c in centers if dist[c, j] <= 3 * radius] for j in range(inst.n)]
    if any(not options for options in choices):
        return False
    for assignment in itertools.product(*choices):
        ok = True
        for center in centers:
            members = [j for j, c in enumerate(assignment) if c == center]
            if not robust_fair_counts(len(members), block_counts(members, labels, inst.group_count), bounds, params):
                ok = False
                break
        if ok:
            return True
    return False


def enumerated_worst_violation(inst: Instance, params: NoiseParams, assignment: Sequence[int]) -> float:
    """Largest realized violation over every coloring in the uncertainty set."""
    bounds = inst.require_bounds()
    return max(
        realized_violation(assignment, coloring, bounds)
        for coloring in enumerate_uncertainty_set(inst.groups, params)
    )
