"""
Center selection
Ball-marking selection for a radius guess and a farthest-first k-center baseline.
"""

import logging
from enum import Enum
from typing import List, Optional

import numpy as np

from .errors import InstanceError
from .instance import Instance

logger = logging.getLogger(__name__)


class CenterPolicy(Enum):
    """Which unmarked point becomes the next center."""
    LOWEST_ID = "lowest-id"
    RANDOM = "random"


def get_centers(
    inst: Instance,
    radius: float,
    policy: CenterPolicy = CenterPolicy.LOWEST_ID,
    seed: Optional[int] = None,
) -> List[int]:
    """Pick unmarked points until every point lies within 2R of a center."""
    if radius < 0:
        raise ValueError(f"radius must be nonnegative, got {radius}")
    rng = np.random.default_rng(seed) if policy == CenterPolicy.RANDOM else None
    marked = np.zeros(inst.n, dtype=bool)
    centers: List[int] = []
    reach = 2 * radius
    while not marked.all():
        unmarked = np.flatnonzero(~marked)
        if rng is not None:
            chosen = int(rng.choice(unmarked))
        else:
            chosen = int(unmarked[0])
        centers.append(chosen)
        # Inclusive ball: points at exactly 2R are covered
        marked |= inst.distances_from(chosen) <= reach
    logger.debug(f"GetCenters(R={radius}) selected {len(centers)} centers")
    return centers


def vanilla_kcenter(inst: Instance, k: int) -> List[int]:
    """Greedy farthest-first traversal seeded at point 0."""
    if not 1 <= k <= inst.n:
        raise InstanceError(f"k={k} must lie in [1, n={inst.n}]")
    centers = [0]
    nearest = np.array(inst.distances_from(0), dtype=float)
    nearest[0] = -1.0
    while len(centers) < k:
        # argmax returns the lowest id among ties
        chosen = int(np.argmax(nearest))
        centers.append(chosen)
        nearest = np.minimum(nearest, inst.distances_from(chosen))
        nearest[centers] = -1.0
    return centers
