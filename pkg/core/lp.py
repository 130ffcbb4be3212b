"""
Robust fair assignment LP
Builds the feasibility program LP(S, R) as a sparse system and decides it with HiGHS, or with a
phase-1 dense simplex (Bland's rule) for small models.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sps
from scipy.optimize import linprog

from .config import get_settings
from .errors import InstanceError, LPIndeterminateError
from .instance import Instance, ProportionBounds
from .noise import NoiseParams

logger = logging.getLogger(__name__)

# Reduced costs and pivot entries smaller than this are treated as zero
PIVOT_EPS = 1e-10
# Solution entries at or below this are zeroed before clamping
ZERO_EPS = 1e-12
# Smallest primal feasibility tolerance HiGHS accepts
HIGHS_MIN_TOL = 1e-10

LP_METHODS = ('highs', 'simplex')


@dataclass(frozen=True)
class Constraint:
    """One LP row in sparse form."""
    name: str
    sense: str  # '=', '<=' or '>='
    coefficients: Dict[int, float]
    rhs: float


@dataclass(frozen=True, eq=False)
class LPModel:
    """LP(S, R): one variable per (center, point) pair within 3R."""
    centers: Tuple[int, ...]
    radius: float
    variables: Tuple[Tuple[int, int], ...]
    labels: Tuple[int, ...]
    bounds: ProportionBounds
    inflow: Tuple[int, ...]
    outflow: Tuple[int, ...]
    uncovered: Tuple[int, ...] = ()

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def group_count(self) -> int:
        return self.bounds.group_count

    @property
    def var_count(self) -> int:
        return len(self.variables)

    @property
    def eq_count(self) -> int:
        return self.n

    @property
    def ineq_count(self) -> int:
        return 2 * len(self.centers) * self.group_count

    @property
    def trivially_infeasible(self) -> bool:
        return bool(self.uncovered)

    def _index(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        position = {center: s for s, center in enumerate(self.centers)}
        slots = np.array([position[i] for i, _ in self.variables], dtype=int)
        points = np.array([j for _, j in self.variables], dtype=int)
        labels = np.asarray(self.labels, dtype=int)[points] if points.size else np.empty(0, dtype=int)
        return slots, points, labels

    def _proportion_block(self, slots: np.ndarray, labels: np.ndarray, shares: Sequence[float]) -> sps.csr_matrix:
        # Row slot*size + h holds (in_h - share_h) for every variable of that center
        size = self.group_count
        groups = np.arange(size)
        rows = (slots[:, None] * size + groups[None, :]).ravel()
        cols = np.repeat(np.arange(self.var_count), size)
        values = ((labels[:, None] == groups[None, :]) - np.asarray(shares, dtype=float)[None, :]).ravel()
        block = sps.csr_matrix((values, (rows, cols)), shape=(len(self.centers) * size, self.var_count))
        block.eliminate_zeros()
        return block

    def sparse(self) -> Tuple[sps.csr_matrix, List[str], np.ndarray]:
        """Constraint matrix, row senses and right-hand sides.

        Row order: one assignment row per point, then an upper row per (center, group),
        then a lower row per (center, group).
        """
        slots, points, labels = self._index()
        size = self.group_count
        pairs = len(self.centers) * size

        eq = sps.csr_matrix(
            (np.ones(self.var_count), (points, np.arange(self.var_count))), shape=(self.n, self.var_count)
        )
        upper = self._proportion_block(slots, labels, self.bounds.upper)
        lower = self._proportion_block(slots, labels, self.bounds.lower)

        up_rhs = np.array([-self.inflow[h] for _ in self.centers for h in range(size)], dtype=float)
        lo_rhs = np.array([self.outflow[h] for _ in self.centers for h in range(size)], dtype=float)
        matrix = sps.vstack([eq, upper, lower], format='csr')
        matrix.sort_indices()
        senses = ['='] * self.n + ['<='] * pairs + ['>='] * pairs
        rhs = np.concatenate([np.ones(self.n), up_rhs, lo_rhs])
        return matrix, senses, rhs

    def dense(self) -> Tuple[np.ndarray, List[str], np.ndarray]:
        matrix, senses, rhs = self.sparse()
        return matrix.toarray(), senses, rhs

    def constraints(self) -> List[Constraint]:
        matrix, senses, rhs = self.sparse()
        names = [f"assign_{j}" for j in range(self.n)]
        names += [f"upper_{i}_{h}" for i in self.centers for h in range(self.group_count)]
        names += [f"lower_{i}_{h}" for i in self.centers for h in range(self.group_count)]
        rows = []
        for r, name in enumerate(names):
            start, end = matrix.indptr[r], matrix.indptr[r + 1]
            rows.append(Constraint(
                name=name,
                sense=senses[r],
                coefficients={int(v): float(c) for v, c in zip(matrix.indices[start:end], matrix.data[start:end])},
                rhs=float(rhs[r]),
            ))
        return rows

    def variable_name(self, v: int) -> str:
        i, j = self.variables[v]
        return f"x_{i}_{j}"

    def to_lp_text(self) -> str:
        """CPLEX LP text of the model, for cross-checking with external solvers."""
        lines = [
            f"\\ LP(S,R) feasibility model: R={self.radius!r}, centers={list(self.centers)}",
            "Minimize",
            f" obj: 0 {self.variable_name(0)}" if self.variables else " obj:",
            "Subject To",
        ]
        for row in self.constraints():
            terms = []
            for v, coef in row.coefficients.items():
                sign = '-' if coef < 0 else '+'
                magnitude = abs(coef)
                body = self.variable_name(v) if magnitude == 1.0 else f"{magnitude:.17g} {self.variable_name(v)}"
                terms.append(f"{sign} {body}")
            if not terms:
                terms = [f"0 {self.variable_name(0)}"] if self.variables else ["0"]
            expression = ' '.join(terms).lstrip('+ ')
            lines.append(f" {row.name}: {expression} {row.sense} {row.rhs:.17g}")
        lines.append("End")
        return '\n'.join(lines) + '\n'


@dataclass(frozen=True, eq=False)
class FractionalAssignment:
    """LP solution: x[s, j] is the share of point j given to centers[s]."""
    centers: Tuple[int, ...]
    radius: float
    values: np.ndarray
    labels: Tuple[int, ...]

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def slot(self, center: int) -> int:
        return self.centers.index(center)

    def value(self, center: int, point: int) -> float:
        return float(self.values[self.slot(center), point])

    def center_mass(self, center: int) -> float:
        """|C_i^LP|"""
        return float(self.values[self.slot(center)].sum())

    def group_mass(self, center: int, group: int) -> float:
        """|C_{i,h}^LP|"""
        members = np.asarray(self.labels) == group
        return float(self.values[self.slot(center), members].sum())

    def support(self) -> List[Tuple[int, int]]:
        """(center, point) pairs with positive mass."""
        slots, points = np.nonzero(self.values > 0)
        return [(self.centers[s], int(j)) for s, j in zip(slots, points)]

    def is_integral(self) -> bool:
        return bool(np.all((self.values == 0) | (self.values == 1)))

    def structural_violations(self, inst: Instance, tol: float) -> List[str]:
        """Assignment rows, value range and the 3R support restriction."""
        problems = []
        if self.values.shape != (len(self.centers), inst.n):
            return [f"values have shape {self.values.shape}, expected {(len(self.centers), inst.n)}"]
        if self.values.min(initial=0.0) < -tol or self.values.max(initial=0.0) > 1 + tol:
            problems.append("values outside [0, 1]")
        sums = self.values.sum(axis=0)
        off = np.flatnonzero(np.abs(sums - 1.0) > tol)
        if off.size:
            j = int(off[0])
            problems.append(f"point {j} has total mass {sums[j]:.12g}")
        for s, center in enumerate(self.centers):
            far = inst.distances_from(center) > 3 * self.radius
            if np.any(self.values[s, far] > 0):
                j = int(np.flatnonzero(far & (self.values[s] > 0))[0])
                problems.append(f"point {j} has mass on center {center} beyond 3R")
        return problems

    def fairness_violations(
        self, bounds: ProportionBounds, inflow: Sequence[int], outflow: Sequence[int], tol: float
    ) -> List[str]:
        """Robust upper/lower rows evaluated on the fractional masses."""
        problems = []
        for center in self.centers:
            total = self.center_mass(center)
            for h in range(bounds.group_count):
                mass = self.group_mass(center, h)
                if mass + inflow[h] > bounds.upper[h] * total + tol:
                    problems.append(f"center {center}, group {h}: upper row violated")
                if mass - outflow[h] < bounds.lower[h] * total - tol:
                    problems.append(f"center {center}, group {h}: lower row violated")
        return problems


def build_lp(inst: Instance, params: NoiseParams, centers: Sequence[int], radius: float) -> LPModel:
    """Assemble LP(S, R) for the given centers and radius guess."""
    if not centers:
        raise InstanceError("center set S is empty")
    if radius < 0:
        raise ValueError(f"radius must be nonnegative, got {radius}")
    if len(set(centers)) != len(centers):
        raise InstanceError(f"center set has duplicates: {list(centers)}")
    bounds = inst.require_bounds()
    if params.group_count != inst.group_count:
        raise InstanceError(f"noise params cover {params.group_count} groups, instance has {inst.group_count}")

    reach = 3 * radius
    variables: List[Tuple[int, int]] = []
    covered = np.zeros(inst.n, dtype=bool)
    for center in centers:
        allowed = np.flatnonzero(inst.distances_from(center) <= reach)
        covered[allowed] = True
        variables.extend((int(center), int(j)) for j in allowed)
    uncovered = tuple(int(j) for j in np.flatnonzero(~covered))

    model = LPModel(
        centers=tuple(int(c) for c in centers),
        radius=float(radius),
        variables=tuple(variables),
        labels=tuple(inst.groups.labels),
        bounds=bounds,
        inflow=params.inflow,
        outflow=params.outflow,
        uncovered=uncovered,
    )
    logger.debug(f"LP(S,R={radius}): {model.var_count} variables, {len(centers)} centers")
    return model


class _Tableau:
    """Phase-1 simplex tableau over rows made nonnegative on the right-hand side."""

    def __init__(self, matrix: np.ndarray, senses: List[str], rhs: np.ndarray):
        rows, structural = matrix.shape
        matrix = matrix.copy()
        rhs = rhs.copy()
        senses = list(senses)
        flip = {'<=': '>=', '>=': '<=', '=': '='}
        for r in range(rows):
            if rhs[r] < 0:
                matrix[r] *= -1
                rhs[r] *= -1
                senses[r] = flip[senses[r]]

        slack_rows = [r for r in range(rows) if senses[r] == '<=']
        surplus_rows = [r for r in range(rows) if senses[r] == '>=']
        artificial_rows = [r for r in range(rows) if senses[r] in ('=', '>=')]
        slack_base = structural
        surplus_base = slack_base + len(slack_rows)
        artificial_base = surplus_base + len(surplus_rows)
        total = artificial_base + len(artificial_rows)

        table = np.zeros((rows + 1, total + 1))
        table[:rows, :structural] = matrix
        table[:rows, -1] = rhs
        basis = np.empty(rows, dtype=int)
        for offset, r in enumerate(slack_rows):
            table[r, slack_base + offset] = 1.0
            basis[r] = slack_base + offset
        for offset, r in enumerate(surplus_rows):
            table[r, surplus_base + offset] = -1.0
        for offset, r in enumerate(artificial_rows):
            table[r, artificial_base + offset] = 1.0
            basis[r] = artificial_base + offset

        # Phase-1 objective: minimize the sum of artificials
        if artificial_rows:
            table[-1] = -table[artificial_rows].sum(axis=0)
        table[-1, artificial_base:total] += 1.0

        self.table = table
        self.basis = basis
        self.structural = structural
        self.artificial_base = artificial_base
        self.enterable = np.ones(total, dtype=bool)

    @property
    def infeasibility(self) -> float:
        return float(-self.table[-1, -1])

    def entering(self) -> int:
        candidates = np.flatnonzero((self.table[-1, :-1] < -PIVOT_EPS) & self.enterable)
        return int(candidates[0]) if candidates.size else -1

    def leaving(self, col: int) -> int:
        column = self.table[:-1, col]
        rows = np.flatnonzero(column > PIVOT_EPS)
        if not rows.size:
            return -1
        ratios = self.table[rows, -1] / column[rows]
        best = ratios.min()
        tied = rows[ratios <= best + ZERO_EPS]
        # Bland: among tied rows, the one whose basic variable has the lowest index
        return int(tied[np.argmin(self.basis[tied])])

    def pivot(self, row: int, col: int) -> None:
        table = self.table
        table[row] /= table[row, col]
        column = table[:, col].copy()
        column[row] = 0.0
        touched = np.flatnonzero(column)
        table[touched] -= np.outer(column[touched], table[row])
        leaving = self.basis[row]
        if leaving >= self.artificial_base:
            # An artificial that leaves the basis never re-enters
            self.enterable[leaving] = False
        self.basis[row] = col

    def run(self, max_pivots: int) -> Tuple[str, int]:
        """Pivot until optimal; returns (status, pivot count)."""
        for count in range(max_pivots):
            col = self.entering()
            if col < 0:
                return 'optimal', count
            row = self.leaving(col)
            if row < 0:
                return 'unbounded', count
            self.pivot(row, col)
        return 'iteration_limit', max_pivots

    def structural_solution(self) -> np.ndarray:
        x = np.zeros(self.structural)
        rows = np.flatnonzero(self.basis < self.structural)
        x[self.basis[rows]] = self.table[rows, -1]
        return x


def _solve_highs(
    matrix: sps.csr_matrix, senses: List[str], rhs: np.ndarray, tol: float, max_pivots: int
) -> Tuple[str, np.ndarray]:
    """Zero-objective linprog over 0 <= x <= 1; returns (status, x)."""
    kinds = np.asarray(senses)
    eq = np.flatnonzero(kinds == '=')
    le = np.flatnonzero(kinds == '<=')
    ge = np.flatnonzero(kinds == '>=')
    a_ub = sps.vstack([matrix[le], -matrix[ge]], format='csr')
    b_ub = np.concatenate([rhs[le], -rhs[ge]])
    result = linprog(
        np.zeros(matrix.shape[1]),
        A_ub=a_ub if a_ub.shape[0] else None,
        b_ub=b_ub if a_ub.shape[0] else None,
        A_eq=matrix[eq] if eq.size else None,
        b_eq=rhs[eq] if eq.size else None,
        bounds=(0.0, 1.0),
        method='highs',
        options={'primal_feasibility_tolerance': max(tol * 1e-2, HIGHS_MIN_TOL), 'maxiter': max_pivots},
    )
    status = {0: 'optimal', 1: 'iteration_limit', 2: 'infeasible', 3: 'unbounded'}.get(result.status, 'numerical')
    x = np.asarray(result.x, dtype=float) if result.x is not None else np.zeros(matrix.shape[1])
    logger.debug(f"HiGHS: status {result.status} ({result.message})")
    return status, x


def _row_violation(matrix: sps.csr_matrix, senses: List[str], rhs: np.ndarray, x: np.ndarray) -> float:
    """Largest amount by which x misses a row."""
    if not matrix.shape[0]:
        return 0.0
    lhs = matrix @ x
    worst = 0.0
    for r, sense in enumerate(senses):
        if sense == '=':
            worst = max(worst, abs(lhs[r] - rhs[r]))
        elif sense == '<=':
            worst = max(worst, lhs[r] - rhs[r])
        else:
            worst = max(worst, rhs[r] - lhs[r])
    return float(worst)


def solve_feasibility(
    model: LPModel,
    tol: Optional[float] = None,
    max_pivots: Optional[int] = None,
    method: Optional[str] = None,
) -> Optional[FractionalAssignment]:
    """Solve LP(S, R); a FractionalAssignment when feasible, None when infeasible."""
    settings = get_settings()
    tol = settings.tol if tol is None else tol
    max_pivots = settings.max_pivots if max_pivots is None else max_pivots
    method = settings.lp_method if method is None else method
    if method not in LP_METHODS:
        raise ValueError(f"unknown LP method {method!r}, expected one of {LP_METHODS}")

    if model.trivially_infeasible:
        logger.debug(f"LP at R={model.radius} trivially infeasible: point {model.uncovered[0]} has no center")
        return None

    matrix, senses, rhs = model.sparse()
    n = model.n

    # Points with a single allowed center are fixed at x = 1 and folded into the right-hand sides
    per_point = np.bincount([j for _, j in model.variables], minlength=n)
    forced = np.array([per_point[j] == 1 for _, j in model.variables], dtype=bool)
    fixed_rows = np.flatnonzero(per_point == 1)
    columns = matrix.tocsc()
    reduced_rhs = rhs - np.asarray(columns[:, np.flatnonzero(forced)].sum(axis=1)).ravel()
    keep_rows = np.setdiff1d(np.arange(matrix.shape[0]), fixed_rows)
    keep_cols = np.flatnonzero(~forced)
    reduced = columns[:, keep_cols].tocsr()[keep_rows]
    kept_senses = [senses[r] for r in keep_rows]
    kept_rhs = reduced_rhs[keep_rows]

    # A model with nothing left to choose goes through the tableau, which handles empty column sets
    if method == 'highs' and keep_cols.size:
        status, free = _solve_highs(reduced, kept_senses, kept_rhs, tol, max_pivots)
        if status == 'infeasible':
            logger.debug(f"HiGHS at R={model.radius}: infeasible")
            return None
        if status != 'optimal':
            reason = f"HiGHS stopped with status '{status}'"
            logger.error(f"LP breakdown at R={model.radius}: {reason}")
            raise LPIndeterminateError(float('nan'), tol, radius=model.radius, reason=reason)
        gap = _row_violation(reduced, kept_senses, kept_rhs, np.clip(free, 0.0, 1.0))
        logger.debug(f"HiGHS at R={model.radius}: largest row violation {gap:.3e}")
    else:
        tableau = _Tableau(reduced.toarray(), kept_senses, kept_rhs)
        status, pivots = tableau.run(max_pivots)
        gap = tableau.infeasibility
        if status != 'optimal':
            reason = "phase-1 objective unbounded" if status == 'unbounded' else f"no optimum after {pivots} pivots"
            logger.error(f"Simplex breakdown at R={model.radius}: {reason}")
            raise LPIndeterminateError(gap, tol, radius=model.radius, reason=reason)

        logger.debug(f"Phase 1 at R={model.radius}: {pivots} pivots, optimum {gap:.3e}")
        if gap > tol:
            if gap < 10 * tol:
                raise LPIndeterminateError(gap, tol, radius=model.radius)
            return None
        free = tableau.structural_solution()

    x = np.zeros(model.var_count)
    x[forced] = 1.0
    x[keep_cols] = free
    x[x <= ZERO_EPS] = 0.0
    x = np.clip(x, 0.0, 1.0)

    values = np.zeros((len(model.centers), n))
    position = {center: s for s, center in enumerate(model.centers)}
    for v, (i, j) in enumerate(model.variables):
        values[position[i], j] = x[v]

    frac = FractionalAssignment(centers=model.centers, radius=model.radius, values=values, labels=model.labels)
    problems = _validate(frac, model, tol)
    if problems:
        logger.error(f"LP solution at R={model.radius} fails validation: {problems[0]}")
        raise LPIndeterminateError(gap, tol, radius=model.radius, reason=f"solution fails validation: {problems[0]}")
    return frac


def _validate(frac: FractionalAssignment, model: LPModel, tol: float) -> List[str]:
    problems = []
    sums = frac.values.sum(axis=0)
    off = np.flatnonzero(np.abs(sums - 1.0) > tol)
    if off.size:
        problems.append(f"point {int(off[0])} has total mass {sums[off[0]]:.12g}")
    problems.extend(frac.fairness_violations(model.bounds, model.inflow, model.outflow, tol))
    return problems
