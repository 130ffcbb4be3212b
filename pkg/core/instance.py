"""
Problem data for robust fair k-center
Points, metric, group labels, k and proportion bounds; CSV ingestion and candidate radii.
"""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from sklearn.preprocessing import minmax_scale

from .config import get_settings
from .errors import InstanceError

logger = logging.getLogger(__name__)

DistanceHook = Callable[[np.ndarray, np.ndarray], float]

# Rows per block when building distance matrices
_BLOCK_ROWS = 256


@dataclass(frozen=True)
class Point:
    """A point with its normalized feature vector."""
    id: int
    features: Tuple[float, ...]


@dataclass(frozen=True)
class GroupAssignment:
    """Group label of every point, densely indexed in [0, group_count)."""
    labels: Tuple[int, ...]
    group_count: int
    names: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.group_count < 1:
            raise InstanceError("at least one group is required")
        for point, label in enumerate(self.labels):
            if not 0 <= label < self.group_count:
                raise InstanceError(f"point {point} has label {label} outside [0, {self.group_count})")
        if self.names and len(self.names) != self.group_count:
            raise InstanceError(f"{len(self.names)} group names given for {self.group_count} groups")

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def sizes(self) -> Tuple[int, ...]:
        counts = np.bincount(np.asarray(self.labels, dtype=int), minlength=self.group_count)
        return tuple(int(c) for c in counts)

    def members(self, group: int) -> List[int]:
        """Point ids carrying the given label."""
        return [j for j, label in enumerate(self.labels) if label == group]

    def ratio(self, group: int) -> float:
        """Dataset share r_h = n_h / n."""
        return self.sizes[group] / self.n

    def name(self, group: int) -> str:
        return self.names[group] if self.names else str(group)


@dataclass(frozen=True)
class ProportionBounds:
    """Per-group lower and upper proportion bounds."""
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise InstanceError("lower and upper bounds must have the same length")
        for h, (lo, hi) in enumerate(zip(self.lower, self.upper)):
            if not 0 < lo <= hi < 1:
                raise InstanceError(f"bounds for group {h} must satisfy 0 < l <= u < 1, got l={lo}, u={hi}")

    @property
    def group_count(self) -> int:
        return len(self.lower)

    @classmethod
    def uniform(cls, lower: float, upper: float, group_count: int) -> "ProportionBounds":
        return cls(lower=(lower,) * group_count, upper=(upper,) * group_count)

    @classmethod
    def parse(cls, text: str) -> "ProportionBounds":
        """Parse the 'l1:u1,l2:u2,...' form."""
        lower, upper = [], []
        for part in text.split(','):
            try:
                lo, hi = part.split(':')
                lower.append(float(lo))
                upper.append(float(hi))
            except ValueError:
                raise InstanceError(f"cannot parse bounds entry '{part}', expected l:u")
        return cls(lower=tuple(lower), upper=tuple(upper))


@dataclass(frozen=True, eq=False)
class Instance:
    """Immutable fair clustering instance (P, chi, k, H, l, u)."""
    features: np.ndarray
    groups: GroupAssignment
    k: int
    bounds: Optional[ProportionBounds] = None
    distance_hook: Optional[DistanceHook] = None
    dense_threshold: Optional[int] = None
    _matrix: Optional[np.ndarray] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        features = np.array(self.features, dtype=float, copy=True)
        if features.ndim != 2 or features.shape[1] < 1:
            raise InstanceError("features must be an n x d array with d >= 1")
        if features.shape[0] != self.groups.n:
            raise InstanceError(f"{features.shape[0]} feature rows but {self.groups.n} group labels")
        if features.shape[0] < 1:
            raise InstanceError("instance has no points")
        if not 1 <= self.k <= features.shape[0]:
            raise InstanceError(f"k={self.k} must lie in [1, n={features.shape[0]}]")
        if self.bounds is not None and self.bounds.group_count != self.groups.group_count:
            raise InstanceError(
                f"bounds cover {self.bounds.group_count} groups but the instance has {self.groups.group_count}"
            )
        features.setflags(write=False)
        object.__setattr__(self, 'features', features)

        threshold = self.dense_threshold
        if threshold is None:
            threshold = get_settings().dense_threshold
        if features.shape[0] <= threshold:
            matrix = self._build_matrix()
            matrix.setflags(write=False)
            object.__setattr__(self, '_matrix', matrix)

    @classmethod
    def from_arrays(
        cls,
        features: Sequence[Sequence[float]],
        labels: Sequence[int],
        k: int,
        bounds: Optional[ProportionBounds] = None,
        group_count: Optional[int] = None,
        names: Sequence[str] = (),
        **kwargs,
    ) -> "Instance":
        """Build an instance from in-memory features and integer labels."""
        labels = tuple(int(label) for label in labels)
        if group_count is None:
            group_count = max(labels) + 1 if labels else 1
        groups = GroupAssignment(labels=labels, group_count=group_count, names=tuple(names))
        return cls(features=np.asarray(features, dtype=float), groups=groups, k=k, bounds=bounds, **kwargs)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def group_count(self) -> int:
        return self.groups.group_count

    @property
    def group_sizes(self) -> Tuple[int, ...]:
        return self.groups.sizes

    @property
    def is_dense(self) -> bool:
        return self._matrix is not None

    @property
    def points(self) -> List[Point]:
        return [Point(id=j, features=tuple(float(v) for v in row)) for j, row in enumerate(self.features)]

    def ratio(self, group: int) -> float:
        return self.groups.ratio(group)

    def with_bounds(self, bounds: ProportionBounds) -> "Instance":
        """Copy of this instance with the given proportion bounds."""
        return replace(self, bounds=bounds)

    def with_k(self, k: int) -> "Instance":
        return replace(self, k=k)

    def subsample(self, size: int, seed: int = 0) -> "Instance":
        """Seeded subsample of `size` points, kept in original id order."""
        if size >= self.n:
            return self
        rng = np.random.default_rng(seed)
        chosen = np.sort(rng.choice(self.n, size=size, replace=False))
        labels = tuple(self.groups.labels[j] for j in chosen)
        groups = GroupAssignment(labels=labels, group_count=self.group_count, names=self.groups.names)
        return Instance(
            features=self.features[chosen],
            groups=groups,
            k=min(self.k, size),
            bounds=self.bounds,
            distance_hook=self.distance_hook,
            dense_threshold=self.dense_threshold,
        )

    def require_bounds(self) -> ProportionBounds:
        if self.bounds is None:
            raise InstanceError("instance has no proportion bounds yet (auto bounds not resolved)")
        return self.bounds

    def _check_id(self, j: int) -> None:
        if not 0 <= j < self.n:
            raise InstanceError(f"point id {j} out of range [0, {self.n})")

    def _pair(self, a: int, b: int) -> float:
        if self.distance_hook is not None:
            return float(self.distance_hook(self.features[a], self.features[b]))
        diff = self.features[a] - self.features[b]
        return float(np.sqrt(np.sum(diff * diff)))

    def _build_matrix(self) -> np.ndarray:
        n = self.n
        if self.distance_hook is not None:
            matrix = np.zeros((n, n))
            for a in range(n):
                for b in range(a + 1, n):
                    matrix[a, b] = matrix[b, a] = self._pair(a, b)
            return matrix
        matrix = np.empty((n, n))
        for start in range(0, n, _BLOCK_ROWS):
            block = self.features[start:start + _BLOCK_ROWS]
            diff = block[:, None, :] - self.features[None, :, :]
            matrix[start:start + _BLOCK_ROWS] = np.sqrt(np.sum(diff * diff, axis=2))
        # Mirror the upper triangle so both orders read the same value
        upper = np.triu(matrix, 1)
        return upper + upper.T

    def distance(self, i: int, j: int) -> float:
        """Distance between points i and j."""
        self._check_id(i)
        self._check_id(j)
        if i == j:
            return 0.0
        a, b = min(i, j), max(i, j)
        if self._matrix is not None:
            return float(self._matrix[a, b])
        return self._pair(a, b)

    def distances_from(self, i: int) -> np.ndarray:
        """Distances from point i to every point."""
        self._check_id(i)
        if self._matrix is not None:
            return self._matrix[i]
        if self.distance_hook is not None:
            row = np.array([self._pair(min(i, j), max(i, j)) for j in range(self.n)])
        else:
            diff = self.features - self.features[i]
            row = np.sqrt(np.sum(diff * diff, axis=1))
        row[i] = 0.0
        return row

    def candidate_radii(self) -> List[float]:
        """Sorted distinct pairwise distances with 0 prepended."""
        if self._matrix is not None:
            values = self._matrix[np.triu_indices(self.n, 1)]
        else:
            chunks = [np.unique(self.distances_from(i)[i + 1:]) for i in range(self.n - 1)]
            values = np.concatenate(chunks) if chunks else np.empty(0)
        radii = np.unique(np.concatenate([[0.0], values]))
        return [float(r) for r in radii]

    def max_distance(self) -> float:
        if self._matrix is not None:
            return float(self._matrix.max())
        return max(float(self.distances_from(i).max()) for i in range(self.n))


def distance(inst: Instance, i: int, j: int) -> float:
    """Euclidean distance over normalized features (or the instance's hook)."""
    return inst.distance(i, j)


def candidate_radii(inst: Instance) -> List[float]:
    return inst.candidate_radii()


def _read_frame(path: Path) -> pd.DataFrame:
    if not path.exists():
        raise InstanceError(f"input file {path} does not exist")
    try:
        frame = pd.read_csv(path, sep=',', encoding='utf-8', dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise InstanceError(f"input file {path} is empty")
    if frame.empty:
        raise InstanceError(f"input file {path} has a header but no rows")
    return frame


def _factorize_groups(frame: pd.DataFrame, group_column: str) -> GroupAssignment:
    if group_column not in frame.columns:
        raise InstanceError("missing column", column=group_column)
    cells = frame[group_column]
    blank = np.flatnonzero((cells.str.strip() == '').to_numpy())
    if blank.size:
        # +2: header line and 1-based numbering
        raise InstanceError("empty group label", row=int(blank[0]) + 2, column=group_column)
    codes, uniques = pd.factorize(cells, sort=False)
    return GroupAssignment(
        labels=tuple(int(c) for c in codes),
        group_count=len(uniques),
        names=tuple(str(u) for u in uniques),
    )


def load_groups(path: Union[str, Path], group_column: str) -> GroupAssignment:
    """Read only the group column of a CSV file."""
    return _factorize_groups(_read_frame(Path(path)), group_column)


def load_csv(
    path: Union[str, Path],
    feature_columns: Sequence[str],
    group_column: str,
    k: int,
    bounds: Union[ProportionBounds, str, None] = "auto",
    normalization: str = "minmax",
) -> Instance:
    """Load an instance from a headed UTF-8 CSV file."""
    path = Path(path)
    if normalization not in ("minmax", "none"):
        raise InstanceError(f"unknown normalization '{normalization}', expected minmax or none")
    if not feature_columns:
        raise InstanceError("at least one feature column is required")

    frame = _read_frame(path)
    for column in list(feature_columns) + [group_column]:
        if column not in frame.columns:
            raise InstanceError("missing column", column=column)

    columns: Dict[str, np.ndarray] = {}
    for column in feature_columns:
        parsed = pd.to_numeric(frame[column].str.strip(), errors='coerce')
        bad = np.flatnonzero(parsed.isna().to_numpy())
        if bad.size:
            row = int(bad[0])
            raise InstanceError(f"cannot parse '{frame[column].iloc[row]}' as a real", row=row + 2, column=column)
        columns[column] = parsed.to_numpy(dtype=float)
    values = np.column_stack([columns[column] for column in feature_columns])
    groups = _factorize_groups(frame, group_column)

    if normalization == "minmax":
        values = minmax_scale(values, axis=0)

    n = values.shape[0]
    if k > n:
        raise InstanceError(f"k={k} exceeds the number of points n={n}")

    resolved = None if bounds is None or bounds == "auto" else bounds
    if isinstance(resolved, str):
        resolved = ProportionBounds.parse(resolved)

    inst = Instance(features=values, groups=groups, k=k, bounds=resolved)
    logger.info(f"Loaded {path.name}: n={inst.n}, d={inst.dim}, groups={inst.group_sizes}, k={k}")
    return inst
