"""Semantic label grids and the localization-reliability cost maps built from them.

A :class:`SemanticMap` holds integer class labels (0..22) on a regular
grid anchored in the world frame; a :class:`LabelCostTable` maps each
class id to a cost in [0, 1]; :func:`build_costmap` applies the table
per cell.  All grid types are immutable after construction and safe to
share across threads; updates return new maps.

World-to-cell convention: cell (ix, iy) covers the half-open square
[origin + i * resolution, origin + (i + 1) * resolution) on each axis,
so ``ix = floor((x - origin_x) / resolution)``.  Queries outside the
grid read as cost 1.0 (worst-case localization).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ShapeError

MAX_LABEL = 22
NUM_CLASSES = MAX_LABEL + 1


class _Grid:
    """Shared geometry for grid-backed types (expects resolution/origin and a 2D array)."""

    @property
    def width(self) -> int:
        return self._array().shape[1]

    @property
    def height(self) -> int:
        return self._array().shape[0]

    def _array(self) -> np.ndarray:
        raise NotImplementedError

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """Cell index (ix, iy) containing world point (x, y); may be out of range."""
        ix = int(math.floor((x - self.origin[0]) / self.resolution))
        iy = int(math.floor((y - self.origin[1]) / self.resolution))
        return ix, iy

    def in_bounds(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height

    def contains_point(self, x: float, y: float) -> bool:
        ix, iy = self.cell_of(x, y)
        return self.in_bounds(ix, iy)

    def cell_center(self, ix: int, iy: int) -> tuple[float, float]:
        return (
            self.origin[0] + (ix + 0.5) * self.resolution,
            self.origin[1] + (iy + 0.5) * self.resolution,
        )


@dataclass(frozen=True, eq=False)
class SemanticMap(_Grid):
    """2D grid of class labels with world anchoring.

    labels is row-major, shape (height, width); row iy corresponds to
    world y in [origin_y + iy * res, origin_y + (iy + 1) * res).
    """

    labels: np.ndarray
    resolution: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2 or labels.size == 0:
            raise ShapeError(f"labels must be a non-empty 2D grid, got shape {labels.shape}")
        if not np.issubdtype(labels.dtype, np.integer):
            if not np.all(labels == np.floor(labels)):
                raise DomainError("labels must be integers")
        if labels.min() < 0 or labels.max() > MAX_LABEL:
            raise DomainError(
                f"label values must lie in [0, {MAX_LABEL}], got "
                f"[{labels.min()}, {labels.max()}]"
            )
        if not self.resolution > 0:
            raise DomainError(f"resolution must be > 0, got {self.resolution}")
        labels = labels.astype(np.uint8, copy=True)
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "resolution", float(self.resolution))

    def _array(self) -> np.ndarray:
        return self.labels

    def __eq__(self, other) -> bool:
        if not isinstance(other, SemanticMap):
            return NotImplemented
        return (
            self.resolution == other.resolution
            and self.origin == other.origin
            and np.array_equal(self.labels, other.labels)
        )


@dataclass(frozen=True, eq=False)
class CostMap(_Grid):
    """2D grid of costs in [0, 1], same anchoring convention as SemanticMap."""

    costs: np.ndarray
    resolution: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        costs = np.asarray(self.costs, dtype=np.float64)
        if costs.ndim != 2 or costs.size == 0:
            raise ShapeError(f"costs must be a non-empty 2D grid, got shape {costs.shape}")
        if costs.min() < 0.0 or costs.max() > 1.0:
            raise DomainError(
                f"cost values must lie in [0, 1], got [{costs.min()}, {costs.max()}]"
            )
        costs = costs.copy()
        costs.flags.writeable = False
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "resolution", float(self.resolution))

    def _array(self) -> np.ndarray:
        return self.costs

    def __eq__(self, other) -> bool:
        if not isinstance(other, CostMap):
            return NotImplemented
        return (
            self.resolution == other.resolution
            and self.origin == other.origin
            and np.array_equal(self.costs, other.costs)
        )


@dataclass(frozen=True, eq=False)
class LabelCostTable:
    """Cost per class id, one entry for every id 0..22."""

    costs: np.ndarray

    def __post_init__(self):
        costs = np.asarray(self.costs, dtype=np.float64)
        if costs.shape != (NUM_CLASSES,):
            raise ShapeError(
                f"cost table needs exactly {NUM_CLASSES} entries, got shape {costs.shape}"
            )
        if costs.min() < 0.0 or costs.max() > 1.0:
            raise DomainError("cost table entries must lie in [0, 1]")
        costs = costs.copy()
        costs.flags.writeable = False
        object.__setattr__(self, "costs", costs)

    @classmethod
    def linear(cls) -> "LabelCostTable":
        """The default table: cost = label / 22."""
        return cls(np.arange(NUM_CLASSES, dtype=np.float64) / MAX_LABEL)

    @classmethod
    def from_mapping(cls, mapping) -> "LabelCostTable":
        """Table from a complete {class id: cost} mapping (all 23 ids present)."""
        missing = sorted(set(range(NUM_CLASSES)) - set(int(k) for k in mapping))
        if missing:
            raise DomainError(f"cost table mapping is missing class ids {missing}")
        costs = np.empty(NUM_CLASSES)
        for k, v in mapping.items():
            k = int(k)
            if not 0 <= k <= MAX_LABEL:
                raise DomainError(f"class id {k} out of range [0, {MAX_LABEL}]")
            costs[k] = float(v)
        return cls(costs)

    def with_overrides(self, mapping) -> "LabelCostTable":
        """Copy of this table with selected class ids remapped."""
        costs = self.costs.copy()
        for k, v in mapping.items():
            k = int(k)
            if not 0 <= k <= MAX_LABEL:
                raise DomainError(f"class id {k} out of range [0, {MAX_LABEL}]")
            costs[k] = float(v)
        return LabelCostTable(costs)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabelCostTable):
            return NotImplemented
        return np.array_equal(self.costs, other.costs)


def cost_from_label(label: int, table: LabelCostTable) -> float:
    """Cost for one class id per the table; label must be in [0, 22]."""
    label = int(label)
    if not 0 <= label <= MAX_LABEL:
        raise DomainError(f"label {label} out of range [0, {MAX_LABEL}]")
    return float(table.costs[label])


def build_costmap(sem: SemanticMap, table: LabelCostTable) -> CostMap:
    """Apply the cost table per cell; geometry is preserved exactly."""
    return CostMap(
        costs=table.costs[sem.labels],
        resolution=sem.resolution,
        origin=sem.origin,
    )


def sample_cost(cm: CostMap, x: float, y: float) -> float:
    """Nearest-cell cost at a world point; 1.0 outside the grid."""
    ix = int(math.floor((x - cm.origin[0]) / cm.resolution))
    iy = int(math.floor((y - cm.origin[1]) / cm.resolution))
    if 0 <= ix < cm.width and 0 <= iy < cm.height:
        return float(cm.costs[iy, ix])
    return 1.0


@dataclass(frozen=True)
class PatchUpdate:
    """Result of a patch application: the new map plus update metadata."""

    costmap: CostMap
    cells_updated: int
    overlapped: bool


def patch_update(cm: CostMap, sem_patch: SemanticMap, table: LabelCostTable) -> PatchUpdate:
    """Overwrite the cells covered by a label patch with freshly derived costs.

    The patch must share the map's resolution and sit on its cell grid.
    A patch with no overlap is a no-op, reported via ``overlapped=False``.
    """
    if not math.isclose(sem_patch.resolution, cm.resolution, rel_tol=0.0, abs_tol=1e-12):
        raise ShapeError(
            f"patch resolution {sem_patch.resolution} != map resolution {cm.resolution}"
        )
    fx = (sem_patch.origin[0] - cm.origin[0]) / cm.resolution
    fy = (sem_patch.origin[1] - cm.origin[1]) / cm.resolution
    col0, row0 = round(fx), round(fy)
    if abs(fx - col0) > 1e-6 or abs(fy - row0) > 1e-6:
        raise ShapeError("patch origin is not aligned to the map's cell grid")

    # Overlap rectangle in map indices.
    c_lo, c_hi = max(col0, 0), min(col0 + sem_patch.width, cm.width)
    r_lo, r_hi = max(row0, 0), min(row0 + sem_patch.height, cm.height)
    if c_lo >= c_hi or r_lo >= r_hi:
        return PatchUpdate(costmap=cm, cells_updated=0, overlapped=False)

    costs = cm.costs.copy()
    sub = sem_patch.labels[r_lo - row0:r_hi - row0, c_lo - col0:c_hi - col0]
    costs[r_lo:r_hi, c_lo:c_hi] = table.costs[sub]
    updated = CostMap(costs=costs, resolution=cm.resolution, origin=cm.origin)
    return PatchUpdate(costmap=updated, cells_updated=sub.size, overlapped=True)


@dataclass(frozen=True, eq=False)
class Occupancy(_Grid):
    """Obstacle cells derived from a semantic map, for collision and clearance checks."""

    mask: np.ndarray
    resolution: float
    origin: tuple[float, float] = (0.0, 0.0)
    centers_x: np.ndarray = field(init=False)
    centers_y: np.ndarray = field(init=False)

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.ndim != 2 or mask.size == 0:
            raise ShapeError(f"mask must be a non-empty 2D grid, got shape {mask.shape}")
        mask = mask.copy()
        mask.flags.writeable = False
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "resolution", float(self.resolution))
        rows, cols = np.nonzero(mask)
        cx = self.origin[0] + (cols + 0.5) * self.resolution
        cy = self.origin[1] + (rows + 0.5) * self.resolution
        cx.flags.writeable = False
        cy.flags.writeable = False
        object.__setattr__(self, "centers_x", cx)
        object.__setattr__(self, "centers_y", cy)

    def _array(self) -> np.ndarray:
        return self.mask

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    @classmethod
    def from_semantic(cls, sem: SemanticMap, obstacle_labels) -> "Occupancy":
        mask = np.isin(sem.labels, np.asarray(sorted(int(l) for l in obstacle_labels)))
        return cls(mask=mask, resolution=sem.resolution, origin=sem.origin)
