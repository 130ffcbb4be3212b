"""
Group-label error models
BAE / BPE / BAPE specifications, derived inflow/outflow caps, consistency and bound checks.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

from pydantic import BaseModel, ValidationError

from .errors import BoundCollapseError, NoiseSpecError
from .instance import Instance, ProportionBounds

logger = logging.getLogger(__name__)


class ErrorModelPayload(BaseModel):
    """Wire form of an error-model spec."""
    variant: str
    m: Optional[int] = None
    M: Optional[List[List[int]]] = None


class ErrorModel(Enum):
    BAE = "bae"
    BPE = "bpe"
    BAPE = "bape"


Matrix = Tuple[Tuple[int, ...], ...]


def _as_matrix(rows: Sequence[Sequence[int]]) -> Matrix:
    return tuple(tuple(int(v) for v in row) for row in rows)


@dataclass(frozen=True)
class ErrorModelSpec:
    """Error-model parameters: aggregate error m and/or pairwise matrix M."""
    variant: ErrorModel
    aggregate: Optional[int] = None
    pairwise: Optional[Matrix] = None

    def __post_init__(self):
        if self.pairwise is not None:
            object.__setattr__(self, 'pairwise', _as_matrix(self.pairwise))
        needs_m = self.variant in (ErrorModel.BAE, ErrorModel.BAPE)
        needs_M = self.variant in (ErrorModel.BPE, ErrorModel.BAPE)
        if needs_m and self.aggregate is None:
            raise NoiseSpecError(f"{self.variant.value} requires the aggregate error m")
        if needs_M and self.pairwise is None:
            raise NoiseSpecError(f"{self.variant.value} requires the pairwise matrix M")
        if self.aggregate is not None and self.aggregate < 0:
            raise NoiseSpecError(f"aggregate error must be nonnegative, got {self.aggregate}")
        if self.pairwise is not None:
            size = len(self.pairwise)
            for g, row in enumerate(self.pairwise):
                if len(row) != size:
                    raise NoiseSpecError(f"pairwise matrix row {g} has {len(row)} entries, expected {size}")
                if row[g] != 0:
                    raise NoiseSpecError(f"pairwise matrix diagonal entry ({g},{g}) must be 0, got {row[g]}")
                for h, value in enumerate(row):
                    if value < 0:
                        raise NoiseSpecError(f"pairwise matrix entry ({g},{h}) is negative: {value}")

    @classmethod
    def bae(cls, m: int) -> "ErrorModelSpec":
        return cls(variant=ErrorModel.BAE, aggregate=m)

    @classmethod
    def bpe(cls, M: Sequence[Sequence[int]]) -> "ErrorModelSpec":
        return cls(variant=ErrorModel.BPE, pairwise=_as_matrix(M))

    @classmethod
    def bape(cls, m: int, M: Sequence[Sequence[int]]) -> "ErrorModelSpec":
        return cls(variant=ErrorModel.BAPE, aggregate=m, pairwise=_as_matrix(M))

    @classmethod
    def from_json(cls, text: str) -> "ErrorModelSpec":
        """Parse {"variant": "bae"|"bpe"|"bape", "m": int?, "M": [[int]]?}."""
        try:
            payload = ErrorModelPayload.model_validate_json(text)
        except ValidationError as e:
            raise NoiseSpecError(f"malformed error-model spec: {e.errors()[0]['msg']}")
        try:
            variant = ErrorModel(payload.variant.lower())
        except ValueError:
            raise NoiseSpecError(f"unknown error model '{payload.variant}', expected bae, bpe or bape")
        return cls(variant=variant, aggregate=payload.m, pairwise=payload.M)

    def to_dict(self) -> dict:
        payload = {'variant': self.variant.value}
        if self.aggregate is not None:
            payload['m'] = self.aggregate
        if self.pairwise is not None:
            payload['M'] = [list(row) for row in self.pairwise]
        return payload

    def validate_against(self, group_sizes: Sequence[int]) -> None:
        """Check the spec's shape and row sums against the group sizes."""
        if self.pairwise is None:
            return
        if len(self.pairwise) != len(group_sizes):
            raise NoiseSpecError(
                f"pairwise matrix is {len(self.pairwise)}x{len(self.pairwise)} but there are {len(group_sizes)} groups"
            )
        for g, row in enumerate(self.pairwise):
            # Equality is admitted: a group may lose every point it has
            if sum(row) > group_sizes[g]:
                raise NoiseSpecError(
                    f"error flowing out of group {g} ({sum(row)}) exceeds its size n_{g}={group_sizes[g]}"
                )

    def as_bape(self, group_sizes: Sequence[int]) -> "ErrorModelSpec":
        """Equivalent BAPE specification."""
        size = len(group_sizes)
        if self.variant == ErrorModel.BAPE:
            return self
        if self.variant == ErrorModel.BAE:
            M = [[0 if g == h else self.aggregate for h in range(size)] for g in range(size)]
            return ErrorModelSpec.bape(self.aggregate, M)
        m_star = sum(
            min(self.pairwise[g][h], group_sizes[g]) for g in range(size) for h in range(size)
        )
        return ErrorModelSpec.bape(m_star, self.pairwise)


@dataclass(frozen=True)
class NoiseParams:
    """Per-group caps: inflow m_h+ (gainable), outflow m_h- (losable), pair flows, aggregate m*."""
    inflow: Tuple[int, ...]
    outflow: Tuple[int, ...]
    aggregate_star: int
    pair_flow: Optional[Matrix] = None
    group_sizes: Tuple[int, ...] = ()
    variant: Optional[ErrorModel] = None

    def __post_init__(self):
        if len(self.inflow) != len(self.outflow):
            raise NoiseSpecError("inflow and outflow vectors must have the same length")
        if any(v < 0 for v in self.inflow + self.outflow) or self.aggregate_star < 0:
            raise NoiseSpecError("noise caps must be nonnegative")

    @classmethod
    def from_caps(
        cls, inflow: Sequence[int], outflow: Sequence[int], group_sizes: Sequence[int]
    ) -> "NoiseParams":
        """Params given directly as m_h+ / m_h- caps, with no pairwise caps."""
        inflow = tuple(int(v) for v in inflow)
        outflow = tuple(int(v) for v in outflow)
        sizes = tuple(int(v) for v in group_sizes)
        return cls(
            inflow=inflow,
            outflow=outflow,
            aggregate_star=min(sum(outflow), sum(sizes)),
            group_sizes=sizes,
        )

    @classmethod
    def uniform(cls, m: int, group_sizes: Sequence[int]) -> "NoiseParams":
        """The m_h+ = m_h- = m setting used in noise sweeps."""
        size = len(group_sizes)
        return cls.from_caps([m] * size, [m] * size, group_sizes)

    @classmethod
    def scaled(cls, m: int, ratios: Sequence[float], group_sizes: Sequence[int]) -> "NoiseParams":
        """Inflow caps m_h+ = ceil(r_h * m); a group can lose at most what the others can gain, and at most m.

        With two groups, ratios (1, 0.5) give m_0+ = m, m_1+ = ceil(m/2) and the mirrored outflows.
        """
        if len(ratios) != len(group_sizes):
            raise NoiseSpecError(f"{len(ratios)} cap ratios given for {len(group_sizes)} groups")
        if any(not 0 <= r <= 1 for r in ratios):
            raise NoiseSpecError(f"cap ratios must lie in [0, 1], got {list(ratios)}")
        inflow = [math.ceil(round(r * m, 9)) for r in ratios]
        total = sum(inflow)
        outflow = [min(m, total - inflow[h]) for h in range(len(inflow))]
        return cls.from_caps(inflow, outflow, group_sizes)

    @classmethod
    def zero(cls, group_sizes: Sequence[int]) -> "NoiseParams":
        return cls.uniform(0, group_sizes)

    @property
    def group_count(self) -> int:
        return len(self.inflow)

    @property
    def m_in(self) -> int:
        return sum(self.outflow)

    @property
    def m_out(self) -> int:
        return sum(self.inflow)

    @property
    def is_zero(self) -> bool:
        return not any(self.inflow) and not any(self.outflow)

    @property
    def enforces_pairs(self) -> bool:
        return self.pair_flow is not None and self.variant in (ErrorModel.BPE, ErrorModel.BAPE)

    def pair_cap(self, g: int, h: int) -> Optional[int]:
        """Cap on points labelled g whose candidate label is h; None when not enforced."""
        if not self.enforces_pairs:
            return None
        return self.pair_flow[g][h]

    def to_dict(self) -> dict:
        return {
            'inflow': list(self.inflow),
            'outflow': list(self.outflow),
            'aggregate_star': self.aggregate_star,
            'pair_flow': [list(row) for row in self.pair_flow] if self.pair_flow is not None else None,
            'variant': self.variant.value if self.variant else None,
        }


def derive(spec: ErrorModelSpec, group_sizes: Sequence[int]) -> NoiseParams:
    """Derive inflow/outflow caps from an error-model specification."""
    sizes = tuple(int(v) for v in group_sizes)
    spec.validate_against(sizes)
    size = len(sizes)
    n = sum(sizes)
    groups = range(size)

    if spec.variant == ErrorModel.BAE:
        m = spec.aggregate
        pair = tuple(tuple(0 if g == h else m for h in groups) for g in groups)
        inflow = tuple(m for _ in groups)
        outflow = tuple(min(m, sizes[h]) for h in groups)
        m_star = m
    elif spec.variant == ErrorModel.BPE:
        M = spec.pairwise
        pair = tuple(tuple(min(M[g][h], sizes[g]) for h in groups) for g in groups)
        inflow = tuple(sum(pair[g][h] for g in groups) for h in groups)
        outflow = tuple(sum(pair[h][g] for g in groups) for h in groups)
        m_star = min(sum(outflow), n)
    else:
        m, M = spec.aggregate, spec.pairwise
        pair = tuple(tuple(min(M[g][h], m, sizes[g]) for h in groups) for g in groups)
        inflow = tuple(min(sum(pair[g][h] for g in groups), m) for h in groups)
        outflow = tuple(min(sum(pair[h][g] for g in groups), m, sizes[h]) for h in groups)
        m_star = m

    params = NoiseParams(
        inflow=inflow,
        outflow=outflow,
        aggregate_star=m_star,
        pair_flow=pair,
        group_sizes=sizes,
        variant=spec.variant,
    )
    logger.info(f"Derived {spec.variant.value} caps: inflow={inflow}, outflow={outflow}, m*={m_star}")
    return params


@dataclass(frozen=True)
class ConsistencyViolation:
    """One violated consistency inequality."""
    constraint: str  # 'inflow', 'outflow' or 'size'
    group: int
    lhs: int
    rhs: int

    def describe(self) -> str:
        labels = {
            'inflow': "m_h+ <= sum of other groups' m_g-",
            'outflow': "m_h- <= sum of other groups' m_g+",
            'size': "m_h- <= n_h",
        }
        return f"group {self.group}: {labels[self.constraint]} violated ({self.lhs} > {self.rhs})"


@dataclass
class ConsistencyReport:
    violations: List[ConsistencyViolation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def check_consistency(params: NoiseParams) -> ConsistencyReport:
    """Report every violated consistency inequality; violations are data, not faults."""
    report = ConsistencyReport()
    total_in = sum(params.inflow)
    total_out = sum(params.outflow)
    for h in range(params.group_count):
        others_out = total_out - params.outflow[h]
        others_in = total_in - params.inflow[h]
        if params.inflow[h] > others_out:
            report.violations.append(ConsistencyViolation('inflow', h, params.inflow[h], others_out))
        if params.outflow[h] > others_in:
            report.violations.append(ConsistencyViolation('outflow', h, params.outflow[h], others_in))
        if params.group_sizes and params.outflow[h] > params.group_sizes[h]:
            report.violations.append(ConsistencyViolation('size', h, params.outflow[h], params.group_sizes[h]))
    if not report.ok:
        logger.info(f"Noise parameters inconsistent: {[v.describe() for v in report.violations]}")
    return report


def infeasible_groups(inst: Instance, params: NoiseParams) -> List[int]:
    """Groups whose bounds cannot hold even for the one-cluster solution."""
    bounds = inst.require_bounds()
    n = inst.n
    sizes = inst.group_sizes
    failing = []
    for h in range(inst.group_count):
        if bounds.upper[h] < (sizes[h] + params.inflow[h]) / n or bounds.lower[h] > (sizes[h] - params.outflow[h]) / n:
            failing.append(h)
    return failing


def check_feasible_bounds(inst: Instance, params: NoiseParams) -> bool:
    """True iff a robust fair clustering exists for these bounds."""
    return not infeasible_groups(inst, params)


def auto_bounds(inst: Instance, params: NoiseParams, slack: float = 0.0) -> ProportionBounds:
    """Tightest feasible bounds, widened by an additive slack."""
    if slack < 0:
        raise NoiseSpecError(f"slack must be nonnegative, got {slack}")
    n = inst.n
    sizes = inst.group_sizes
    floor = 1.0 / (2 * n)
    lower, upper = [], []
    for h in range(inst.group_count):
        low = (sizes[h] - params.outflow[h]) / n
        high = (sizes[h] + params.inflow[h]) / n
        if low <= 0:
            raise BoundCollapseError(h, f"n_h={sizes[h]} <= m_h-={params.outflow[h]}, lower bound collapses to 0")
        if high >= 1:
            raise BoundCollapseError(h, f"n_h + m_h+ = {sizes[h] + params.inflow[h]} >= n={n}, upper bound reaches 1")
        lower.append(max(floor, low - slack))
        upper.append(min(1 - floor, high + slack))
    bounds = ProportionBounds(lower=tuple(lower), upper=tuple(upper))
    logger.info(f"Auto bounds (slack={slack}): lower={bounds.lower}, upper={bounds.upper}")
    return bounds


def violation_bounds(params: NoiseParams) -> Tuple[Optional[float], Optional[float]]:
    """Guaranteed violation bounds: (2 / sum_h m_h+, 2 / max_h m_h+)."""
    total = sum(params.inflow)
    largest = max(params.inflow) if params.inflow else 0
    summed = 2.0 / total if total > 0 else None
    per_group = 2.0 / largest if largest > 0 else None
    return summed, per_group
