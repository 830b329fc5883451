"""Tally containers shared by the transport sampler and the grid machinery."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError

ISOTROPIC_EDDINGTON = 1.0 / 3.0


@dataclass
class ClosureTallies:
    """Track-length and boundary-crossing sums from one Monte Carlo sample.

    ``num``/``den`` hold per-cell sums of mu^2*w*track and w*track; the
    boundary sums hold outgoing-crossing currents (sum of w) and fluxes
    (sum of w/|mu|) at x=0 and x=X. Additive under cell merging and under
    concatenation of history windows.
    """

    grid_level: int
    num: np.ndarray
    den: np.ndarray
    current_left: float = 0.0
    flux_left: float = 0.0
    current_right: float = 0.0
    flux_right: float = 0.0
    histories: int = 0
    cost: float = 0.0  # elapsed wall seconds for the generating simulation
    segments: int = 0  # deterministic cost proxy: cell sub-segments processed
    source_total: float = field(default=0.0, repr=False)  # integral of Q over the slab

    def __post_init__(self):
        self.num = np.asarray(self.num, dtype=np.float64)
        self.den = np.asarray(self.den, dtype=np.float64)
        if self.num.shape != self.den.shape or self.num.ndim != 1:
            raise DimensionError("num and den must be 1-D arrays of equal length")


def estimate_eddington(tallies: ClosureTallies) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell Eddington factors num_i/den_i.

    Cells with no recorded track length fall back to the isotropic value 1/3
    and are flagged in the returned boolean mask.
    """
    void = tallies.den == 0.0
    e = np.full_like(tallies.den, ISOTROPIC_EDDINGTON)
    np.divide(tallies.num, tallies.den, out=e, where=~void)
    return e, void


def estimate_boundary_factors(tallies: ClosureTallies) -> tuple[float, float, bool]:
    """Boundary factors from outgoing-crossing sums.

    B at x=0 is -current/flux (outgoing means mu < 0 there), B at x=X is
    +current/flux. Sides with no crossings fall back to -1/2 and +1/2; the
    returned flag is True if either side fell back.
    """
    fallback = False
    if tallies.flux_left > 0.0:
        b0 = -tallies.current_left / tallies.flux_left
    else:
        b0, fallback = -0.5, True
    if tallies.flux_right > 0.0:
        bx = tallies.current_right / tallies.flux_right
    else:
        bx, fallback = 0.5, True
    return b0, bx, fallback
