"""
Noise sweep harness
Runs robust and deterministic solves over a grid of m/n fractions and audits each under the sweep's noise.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .audit import worst_case_violation
from .config import get_settings
from .errors import RobustFairError
from .instance import Instance
from .noise import NoiseParams, auto_bounds, violation_bounds
from .solver import SolveOptions, deterministic_fair_solve, robust_solve

logger = logging.getLogger(__name__)

ALGORITHMS = ("robust", "deterministic")


@dataclass
class SweepRow:
    """One (fraction, algorithm) result."""
    algorithm: str
    m_fraction: float
    m: int
    cap_ratios: str = ""
    objective: Optional[float] = None
    lam: Optional[float] = None
    num_centers: Optional[int] = None
    bound_2_over_m_out: Optional[float] = None
    status: str = "ok"
    message: str = ""


def parse_grid(text: str) -> List[float]:
    """Parse 'start:stop:steps' into evenly spaced fractions."""
    try:
        start, stop, steps = text.split(':')
        start, stop, steps = float(start), float(stop), int(steps)
    except ValueError:
        raise ValueError(f"cannot parse fraction grid '{text}', expected start:stop:steps")
    if steps < 1 or not 0 <= start <= stop < 1:
        raise ValueError(f"fraction grid needs 0 <= start <= stop < 1 and steps >= 1, got '{text}'")
    return [float(v) for v in np.linspace(start, stop, steps)]


def parse_cap_ratios(text: str) -> Tuple[float, ...]:
    """Parse 'r_1,r_2,...' per-group inflow cap ratios, each in [0, 1]."""
    try:
        ratios = tuple(float(part) for part in text.split(','))
    except ValueError:
        raise ValueError(f"cannot parse cap ratios '{text}', expected comma-separated numbers")
    if any(not 0 <= r <= 1 for r in ratios):
        raise ValueError(f"cap ratios must lie in [0, 1], got '{text}'")
    return ratios


def _ratio_label(ratios: Optional[Sequence[float]]) -> str:
    return "uniform" if ratios is None else ','.join(f"{r:g}" for r in ratios)


def sweep_row(
    inst: Instance,
    fraction: float,
    algorithm: str,
    slack: float = 0.0,
    options: Optional[SolveOptions] = None,
    cap_ratios: Optional[Sequence[float]] = None,
) -> SweepRow:
    """Solve and audit one grid point; failures become an 'error' row.

    Without cap ratios every group gets m_h+ = m_h- = m; with them the caps come from NoiseParams.scaled.
    """
    m = math.ceil(round(fraction * inst.n, 9))
    row = SweepRow(algorithm=algorithm, m_fraction=fraction, m=m, cap_ratios=_ratio_label(cap_ratios))
    try:
        if cap_ratios is None:
            params = NoiseParams.uniform(m, inst.group_sizes)
        else:
            params = NoiseParams.scaled(m, cap_ratios, inst.group_sizes)
        row.bound_2_over_m_out = violation_bounds(params)[0]
        bounded = inst.with_bounds(auto_bounds(inst, params, slack))
        if algorithm == "robust":
            solution = robust_solve(bounded, params, options)
        else:
            solution = deterministic_fair_solve(bounded, options)
        report = worst_case_violation(solution, bounded, params)
        row.objective = solution.cost
        row.lam = report.lam
        row.num_centers = solution.num_centers
    except RobustFairError as e:
        logger.warning(f"Sweep row {algorithm} at m/n={fraction} ({row.cap_ratios}) failed: {e}")
        row.status = "error"
        row.message = str(e)
    return row


def run_sweep(
    inst: Instance,
    fractions: Sequence[float],
    slack: float = 0.0,
    options: Optional[SolveOptions] = None,
    workers: Optional[int] = None,
    cap_ratios: Optional[Sequence[Sequence[float]]] = None,
) -> List[SweepRow]:
    """All (cap ratios, fraction, algorithm) rows in grid order."""
    workers = workers or get_settings().workers
    cap_settings: List[Optional[Sequence[float]]] = list(cap_ratios) if cap_ratios else [None]
    grid = [
        (ratios, fraction, algorithm)
        for ratios in cap_settings
        for fraction in fractions
        for algorithm in ALGORITHMS
    ]
    logger.info(
        f"Sweeping {len(fractions)} fractions x {len(cap_settings)} cap settings on n={inst.n}, k={inst.k} "
        f"with {workers} workers"
    )
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [
            executor.submit(sweep_row, inst, fraction, algorithm, slack, options, ratios)
            for ratios, fraction, algorithm in grid
        ]
        # Collected in submission order, not completion order
        return [future.result() for future in futures]


def rows_to_frame(rows: Sequence[SweepRow]) -> pd.DataFrame:
    frame = pd.DataFrame([asdict(row) for row in rows])
    return frame.rename(columns={'lam': 'lambda'})
