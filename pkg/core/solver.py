"""
Robust fair k-center pipeline
Binary search over candidate radii, LP feasibility, max-flow rounding; plus the deterministic fair baseline.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .centers import CenterPolicy, get_centers
from .config import get_settings
from .errors import InfeasibleInstanceError, NoiseSpecError, RobustFairError
from .instance import Instance
from .lp import FractionalAssignment, build_lp, solve_feasibility
from .noise import NoiseParams, check_consistency, infeasible_groups
from .rounding import round_assignment

logger = logging.getLogger(__name__)


@dataclass
class SolveOptions:
    """Knobs for one robust_solve run."""
    policy: CenterPolicy = CenterPolicy.LOWEST_ID
    seed: Optional[int] = None
    linear_scan: bool = False
    keep_trace: bool = True


@dataclass(frozen=True)
class RadiusTrial:
    """One predicate evaluation during the radius search."""
    radius: float
    num_centers: int
    verdict: str  # 'feasible', 'infeasible' or 'too-many-centers'


@dataclass
class Solution:
    """Centers S, assignment phi and the radius the search settled on."""
    centers: Tuple[int, ...]
    assignment: Tuple[int, ...]
    found_radius: float
    cost: float
    fractional_trace: Optional[FractionalAssignment] = None
    search_trace: List[RadiusTrial] = field(default_factory=list)

    @property
    def num_centers(self) -> int:
        return len(self.centers)

    def cluster_sizes(self) -> Dict[int, int]:
        sizes = {center: 0 for center in self.centers}
        for center in self.assignment:
            sizes[center] = sizes.get(center, 0) + 1
        return sizes

    def clusters(self) -> Dict[int, List[int]]:
        """Center -> member point ids."""
        members: Dict[int, List[int]] = {center: [] for center in self.centers}
        for point, center in enumerate(self.assignment):
            members.setdefault(center, []).append(point)
        return members


def _assignment_cost(inst: Instance, assignment: Tuple[int, ...]) -> float:
    return max((inst.distance(j, center) for j, center in enumerate(assignment)), default=0.0)


def robust_solve(inst: Instance, params: NoiseParams, options: Optional[SolveOptions] = None) -> Solution:
    """Smallest-radius robust fair clustering found by binary search (3-approximation)."""
    options = options or SolveOptions()
    bounds = inst.require_bounds()

    report = check_consistency(params)
    if not report.ok:
        raise NoiseSpecError(f"inconsistent noise parameters: {report.violations[0].describe()}")
    failing = infeasible_groups(inst, params)
    if failing:
        logger.info(f"No robust fair clustering exists; groups {failing} fail the one-cluster test")
        raise InfeasibleInstanceError(
            f"bounds cannot hold for groups {failing} even with a single cluster", groups=failing
        )

    radii = inst.candidate_radii()
    trace: List[RadiusTrial] = []
    cache: Dict[int, Optional[Tuple[List[int], FractionalAssignment]]] = {}

    def predicate(index: int) -> Optional[Tuple[List[int], FractionalAssignment]]:
        if index in cache:
            return cache[index]
        radius = radii[index]
        centers = get_centers(inst, radius, options.policy, options.seed)
        outcome = None
        if len(centers) > inst.k:
            trace.append(RadiusTrial(radius, len(centers), 'too-many-centers'))
        else:
            frac = solve_feasibility(build_lp(inst, params, centers, radius))
            trace.append(RadiusTrial(radius, len(centers), 'feasible' if frac is not None else 'infeasible'))
            if frac is not None:
                outcome = (centers, frac)
        logger.debug(f"Radius R={radius}: |S|={len(centers)}, {trace[-1].verdict}")
        cache[index] = outcome
        return outcome

    if options.linear_scan:
        hits = [index for index in range(len(radii)) if predicate(index) is not None]
        if not hits:
            raise RobustFairError("no candidate radius admits a solution, though the one-cluster test passed")
        best = hits[0]
    else:
        lo, hi = 0, len(radii) - 1
        if predicate(hi) is None:
            raise RobustFairError("largest candidate radius admits no solution, though the one-cluster test passed")
        while lo < hi:
            mid = (lo + hi) // 2
            if predicate(mid) is not None:
                hi = mid
            else:
                lo = mid + 1
        best = hi

    centers, frac = cache[best]
    integral = round_assignment(frac, inst)
    used = set(integral.assignment)
    kept = tuple(center for center in centers if center in used)
    if len(kept) < len(centers):
        logger.info(f"Dropped {len(centers) - len(kept)} empty clusters after rounding")

    keep = options.keep_trace and inst.n <= get_settings().trace_limit
    solution = Solution(
        centers=kept,
        assignment=integral.assignment,
        found_radius=radii[best],
        cost=_assignment_cost(inst, integral.assignment),
        fractional_trace=frac if keep else None,
        search_trace=trace,
    )
    logger.info(
        f"Solved n={inst.n}, k={inst.k}: R={solution.found_radius}, cost={solution.cost}, "
        f"{solution.num_centers} centers, {len(trace)} radii tried"
    )
    return solution


def deterministic_fair_solve(inst: Instance, options: Optional[SolveOptions] = None) -> Solution:
    """Fair k-center that trusts the given labels (all noise caps zero)."""
    return robust_solve(inst, NoiseParams.zero(inst.group_sizes), options)
