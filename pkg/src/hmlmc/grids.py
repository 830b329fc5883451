"""Nested uniform grid hierarchies, functional regions, and tally restriction.

Levels refine by a fixed factor of 2. Edges are computed as i*(X/I) per
level, which makes nesting exact in floating point (halving the spacing and
doubling the integer index commute with rounding), so the hierarchy can
assert bitwise nesting instead of comparing with tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError, ConfigurationError, DimensionError
from .tallies import ClosureTallies

REFINEMENT_RATIO = 2


@dataclass
class Grid:
    """One uniform grid level: cell edges and derived widths."""

    level: int
    edges: np.ndarray
    widths: np.ndarray = field(init=False)

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.float64)
        if self.edges.ndim != 1 or self.edges.size < 2:
            raise ConfigurationError("a grid needs at least two edges")
        if self.edges[0] != 0.0:
            raise ConfigurationError("grid must start at x = 0")
        self.widths = np.diff(self.edges)
        if np.any(self.widths <= 0.0):
            raise ConfigurationError("grid edges must be strictly increasing")
        X = self.edges[-1]
        if abs(self.widths.sum() - X) > 1e-12 * X:
            raise ConfigurationError("cell widths do not sum to the slab length")

    @property
    def cell_count(self) -> int:
        return self.edges.size - 1

    @property
    def length(self) -> float:
        return float(self.edges[-1])

    @property
    def dx(self) -> float:
        """Uniform spacing (grids built here are always uniform)."""
        return float(self.edges[-1] / self.cell_count)


@dataclass
class GridHierarchy:
    """Nested grids G_0 .. G_L with refinement ratio 2."""

    grids: list[Grid]
    refinement_ratio: int = REFINEMENT_RATIO

    def __post_init__(self):
        if not self.grids:
            raise ConfigurationError("hierarchy needs at least one grid")
        if self.refinement_ratio != REFINEMENT_RATIO:
            raise ConfigurationError("only refinement ratio 2 is supported")
        for lvl, (lo, hi) in enumerate(zip(self.grids[:-1], self.grids[1:]), start=1):
            if hi.cell_count != self.refinement_ratio * lo.cell_count:
                raise ConfigurationError(f"grid {lvl} does not double grid {lvl - 1}")
            if not np.array_equal(lo.edges, hi.edges[:: self.refinement_ratio]):
                raise ConfigurationError(f"grid {lvl} edges do not nest grid {lvl - 1}")

    @property
    def max_level(self) -> int:
        return len(self.grids) - 1

    def __getitem__(self, level: int) -> Grid:
        return self.grids[level]


@dataclass(frozen=True)
class RegionSpec:
    """Integration region for the flux functional.

    Either the whole domain or one cell of the coarsest grid (1-based index,
    the usual cell numbering).
    """

    kind: str
    index: int | None = None

    WHOLE = "whole_domain"
    CELL = "coarse_cell"

    def __post_init__(self):
        if self.kind not in (self.WHOLE, self.CELL):
            raise ConfigurationError(f"unknown region kind {self.kind!r}")
        if self.kind == self.CELL and (self.index is None or self.index < 1):
            raise ConfigurationError("coarse-cell region needs a 1-based cell index")

    @classmethod
    def whole_domain(cls) -> "RegionSpec":
        return cls(cls.WHOLE)

    @classmethod
    def coarse_cell(cls, index: int) -> "RegionSpec":
        return cls(cls.CELL, index)


def build_hierarchy(X: float, I0: int, L: int) -> GridHierarchy:
    """Build L+1 nested uniform grids over [0, X].

    Parameters
    ----------
    X : slab length.
    I0 : cell count of the coarsest grid.
    L : finest level index; grid ``l`` has ``I0 * 2**l`` cells.
    """
    if not np.isfinite(X) or X <= 0.0:
        raise ConfigurationError("slab length must be positive")
    if I0 < 1:
        raise ConfigurationError("coarse cell count must be at least 1")
    if L < 0:
        raise ConfigurationError("level count must be non-negative")
    grids = []
    for level in range(L + 1):
        cells = I0 * REFINEMENT_RATIO**level
        edges = np.arange(cells + 1, dtype=np.float64) * (X / cells)
        edges[-1] = X  # guard the last edge against rounding in X/cells*cells
        grids.append(Grid(level=level, edges=edges))
    return GridHierarchy(grids=grids)


def restrict_tallies(fine: ClosureTallies, hierarchy: GridHierarchy, to_level: int) -> ClosureTallies:
    """Restrict per-cell tallies to a coarser level of the hierarchy.

    Each parent cell receives the sum of its children's numerator and
    denominator sums; boundary sums and metadata pass through unchanged.
    Multi-level restriction is performed one level at a time, so composing
    restrictions and restricting directly are the same operation.
    """
    src = fine.grid_level
    if not (0 <= to_level < src <= hierarchy.max_level):
        raise ConfigurationError(f"cannot restrict level {src} tallies to level {to_level}")
    if fine.num.size != hierarchy[src].cell_count:
        raise DimensionError(
            f"tallies have {fine.num.size} cells but grid {src} has {hierarchy[src].cell_count}"
        )
    num, den = fine.num, fine.den
    for _ in range(src - to_level):
        num = num[0::2] + num[1::2]
        den = den[0::2] + den[1::2]
    return ClosureTallies(
        grid_level=to_level,
        num=num,
        den=den,
        current_left=fine.current_left,
        flux_left=fine.flux_left,
        current_right=fine.current_right,
        flux_right=fine.flux_right,
        histories=fine.histories,
        cost=fine.cost,
        segments=fine.segments,
        source_total=fine.source_total,
    )


def integrate_flux(phi: np.ndarray, grid: Grid, region: RegionSpec) -> float:
    """Integrate a cell-average flux over a region: sum of phi_i * dx_i.

    The region must resolve exactly onto the grid; coarse-cell regions cover
    ``2**level`` cells of the given grid.
    """
    phi = np.asarray(phi, dtype=np.float64)
    if phi.shape != (grid.cell_count,):
        raise DimensionError(f"flux has {phi.size} entries but grid has {grid.cell_count} cells")
    if region.kind == RegionSpec.WHOLE:
        return float(np.sum(phi * grid.widths))
    per_coarse = REFINEMENT_RATIO**grid.level
    start = (region.index - 1) * per_coarse
    stop = start + per_coarse
    if stop > grid.cell_count:
        raise AlignmentError(
            f"coarse cell {region.index} does not resolve on a grid with {grid.cell_count} cells"
        )
    return float(np.sum(phi[start:stop] * grid.widths[start:stop]))
