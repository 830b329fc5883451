"""Slab geometry, materials, and the Monte Carlo history engine.

The problem is a 1-D slab of region-wise constant materials with vacuum on
both faces. Histories carry statistical weight under implicit capture and
deposit track-length tallies on a cell grid; those tallies close the
low-order solver in :mod:`hmlmc.loqd`.
"""
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import ConfigurationError
from .grids import Grid
from .tallies import ClosureTallies

# history termination codes (shared with the kernel module)
LEAK_LEFT = _kernels.LEAK_LEFT
LEAK_RIGHT = _kernels.LEAK_RIGHT
KILLED = _kernels.KILLED

_EDGE_TOL = 1e-12


@dataclass(frozen=True)
class Region:
    """One material region [x_lo, x_hi] with constant data."""

    x_lo: float
    x_hi: float
    sigma_t: float
    sigma_s: float
    q: float

    @property
    def sigma_a(self):
        return self.sigma_t - self.sigma_s

    @property
    def scattering_ratio(self):
        return self.sigma_s / self.sigma_t

    @property
    def width(self):
        return self.x_hi - self.x_lo


@dataclass(frozen=True)
class SlabProblem:
    """Slab of length X partitioned into ordered material regions.

    Regions may be given as Region objects or (x_lo, x_hi, sigma_t,
    sigma_s, q) tuples. They must tile [0, X] exactly; cross sections are
    validated here, while a positive total source is required only by the
    sampling entry points (a source-free problem is still a valid solver
    input).
    """

    X: float
    regions: tuple = ()

    def __post_init__(self):
        if not np.isfinite(self.X) or self.X <= 0.0:
            raise ConfigurationError("slab length must be positive")
        if not self.regions:
            raise ConfigurationError("at least one material region required")
        normalized = tuple(
            r if isinstance(r, Region) else Region(*map(float, r)) for r in self.regions
        )
        object.__setattr__(self, "regions", normalized)
        tol = _EDGE_TOL * max(1.0, self.X)
        cursor = 0.0
        for r in normalized:
            if abs(r.x_lo - cursor) > tol:
                raise ConfigurationError(
                    f"regions must tile the slab: gap/overlap at x={r.x_lo!r}"
                )
            if r.x_hi <= r.x_lo:
                raise ConfigurationError("region must have positive width")
            if not np.isfinite(r.sigma_t) or r.sigma_t <= 0.0:
                raise ConfigurationError("sigma_t must be positive")
            if r.sigma_s < 0.0 or r.sigma_s > r.sigma_t:
                raise ConfigurationError("need 0 <= sigma_s <= sigma_t")
            if r.q < 0.0 or not np.isfinite(r.q):
                raise ConfigurationError("source density must be non-negative")
            cursor = r.x_hi
        if abs(cursor - self.X) > tol:
            raise ConfigurationError("regions must end at the slab boundary")

    @property
    def total_source(self):
        return float(sum(r.q * r.width for r in self.regions))

    @property
    def breakpoints(self):
        """Interior material interfaces (region boundaries excluding 0, X)."""
        return tuple(r.x_hi for r in self.regions[:-1])

    def cell_data(self, grid: Grid):
        """Per-cell (sigma_t, sigma_a, q) arrays via midpoint region lookup.

        Grids are required (and asserted at configuration time) to align
        cell edges with material interfaces, so midpoint lookup is exact.
        """
        mids = grid.edges[:-1] + 0.5 * grid.widths
        uppers = np.array([r.x_hi for r in self.regions])
        idx = np.minimum(
            np.searchsorted(uppers, mids, side="right"), len(self.regions) - 1
        )
        sigma_t = np.array([r.sigma_t for r in self.regions])[idx]
        sigma_a = np.array([r.sigma_a for r in self.regions])[idx]
        q = np.array([r.q for r in self.regions])[idx]
        return sigma_t, sigma_a, q


# ------------------------------------------------------------------ rng

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MULT1 = 0xBF58476D1CE4E5B9
_MULT2 = 0x94D049BB133111EB


def _mix64(z):
    # python mirror of the kernel's splitmix64 finalizer
    z = (z ^ (z >> 30)) * _MULT1 & _MASK64
    z = (z ^ (z >> 27)) * _MULT2 & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class SampleSeed:
    """Addresses one realization: (master, level, replicate)."""

    master: int
    level: int
    replicate: int

    def __post_init__(self):
        for name in ("master", "level", "replicate"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 0 or v > _MASK64:
                raise ConfigurationError(f"{name} must be a non-negative 64-bit int")


@dataclass
class HistoryStream:
    """Splitmix64 substream owned by a single history."""

    state: int

    @classmethod
    def for_history(cls, seed: SampleSeed, history: int) -> "HistoryStream":
        s = _mix64((seed.master + _GAMMA + seed.level) & _MASK64)
        s = _mix64((s + _GAMMA + seed.replicate) & _MASK64)
        s = _mix64((s + _GAMMA + history) & _MASK64)
        return cls(state=s)

    def next_raw(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK64
        return _mix64(self.state)

    def uniform(self) -> float:
        """Uniform on (0, 1]: zero is excluded so -log(u) is always finite."""
        return ((self.next_raw() >> 11) + 1) * 2.0**-53


# ------------------------------------------------------------------ types


@dataclass
class Particle:
    x: float
    mu: float
    w: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.x):
            raise ConfigurationError("particle position must be finite")
        if not -1.0 <= self.mu <= 1.0 or self.mu == 0.0:
            raise ConfigurationError("direction cosine must lie in [-1, 1] \\ {0}")
        if self.w < 0.0 or not np.isfinite(self.w):
            raise ConfigurationError("weight must be non-negative")


@dataclass(frozen=True)
class TransportSettings:
    """Tracking knobs; defaults follow the implicit-capture scheme."""

    weight_cutoff: float = 1e-3
    roulette_survival: float = 0.5  # survivor weight is divided by this
    chunk_size: int = 2048
    parallelism: int = 1

    def __post_init__(self):
        if self.weight_cutoff < 0.0:
            raise ConfigurationError("weight cutoff must be non-negative")
        if not 0.0 <= self.roulette_survival < 1.0:
            raise ConfigurationError("roulette survival must lie in [0, 1)")
        if self.chunk_size < 1:
            raise ConfigurationError("chunk size must be positive")
        if self.parallelism < 1:
            raise ConfigurationError("parallelism must be positive")


class _RegionTables(NamedTuple):
    lower: np.ndarray
    upper: np.ndarray
    sigma_t: np.ndarray
    ratio: np.ndarray
    q_cum: np.ndarray
    q_density: np.ndarray


@lru_cache(maxsize=128)
def _region_tables(problem: SlabProblem) -> _RegionTables:
    lower = np.array([r.x_lo for r in problem.regions])
    upper = np.array([r.x_hi for r in problem.regions])
    sigma_t = np.array([r.sigma_t for r in problem.regions])
    ratio = np.array([r.scattering_ratio for r in problem.regions])
    q_density = np.array([r.q for r in problem.regions])
    mass = q_density * (upper - lower)
    total = mass.sum()
    q_cum = np.cumsum(mass) / total if total > 0.0 else np.zeros_like(mass)
    if total > 0.0:
        q_cum[-1] = 1.0
    return _RegionTables(lower, upper, sigma_t, ratio, q_cum, q_density)


def _require_source(problem):
    if problem.total_source <= 0.0:
        raise ConfigurationError("total source must be positive to sample histories")


def _require_span(problem, grid):
    if abs(grid.length - problem.X) > _EDGE_TOL * max(1.0, problem.X):
        raise ConfigurationError("grid does not span the problem domain")


# ------------------------------------------------------------------ ops


def sample_source(problem: SlabProblem, rng: HistoryStream) -> Particle:
    """Birth draw: x ~ Q/int(Q), mu uniform on [-1, 1], unit weight."""
    _require_source(problem)
    t = _region_tables(problem)
    x = float(
        _kernels._birth(
            rng.uniform(), t.q_cum, t.lower, t.upper, t.q_density, problem.total_source
        )
    )
    mu = 2.0 * rng.uniform() - 1.0
    while mu == 0.0:
        mu = 2.0 * rng.uniform() - 1.0
    return Particle(x=x, mu=mu, w=1.0)


def track_history(
    problem: SlabProblem,
    grid: Grid,
    particle: Particle,
    rng: HistoryStream,
    tallies: ClosureTallies,
    settings: TransportSettings = None,
    return_weight: bool = False,
):
    """Advance one history to termination, accumulating into ``tallies``.

    Returns the termination code (LEAK_LEFT / LEAK_RIGHT / KILLED), or the
    (code, final weight) pair when return_weight is set.
    """
    settings = settings or TransportSettings()
    _require_span(problem, grid)
    t = _region_tables(problem)
    bnd = np.zeros(4)
    state, segments, code, weight = _kernels._track_one(
        particle.x,
        particle.mu,
        particle.w,
        np.uint64(rng.state),
        t.lower,
        t.upper,
        t.sigma_t,
        t.ratio,
        grid.dx,
        grid.cell_count,
        grid.length,
        settings.weight_cutoff,
        settings.roulette_survival,
        tallies.num,
        tallies.den,
        bnd,
    )
    rng.state = int(state)
    tallies.current_left += bnd[0]
    tallies.flux_left += bnd[1]
    tallies.current_right += bnd[2]
    tallies.flux_right += bnd[3]
    tallies.segments += int(segments)
    return (code, float(weight)) if return_weight else code


def simulate_sample(
    problem: SlabProblem,
    grid: Grid,
    histories: int,
    seed: SampleSeed,
    settings: TransportSettings = None,
    history_offset: int = 0,
) -> ClosureTallies:
    """Run ``histories`` source histories and return their tallies.

    Histories are processed in fixed windows of ``settings.chunk_size``
    aligned to absolute history indices, each with private tallies merged in
    window order, so results are bit-identical for any parallelism and
    additive across window-aligned history offsets.
    """
    settings = settings or TransportSettings()
    if not isinstance(histories, int) or histories < 1:
        raise ConfigurationError("need at least one history")
    if history_offset < 0:
        raise ConfigurationError("history offset must be non-negative")
    _require_source(problem)
    _require_span(problem, grid)
    t = _region_tables(problem)
    started = time.perf_counter()

    size = settings.chunk_size
    lo, hi = history_offset, history_offset + histories
    windows = [
        (max(lo, k * size), min(hi, (k + 1) * size))
        for k in range(lo // size, (hi - 1) // size + 1)
    ]
    cells = grid.cell_count

    def run_window(window):
        num = np.zeros(cells)
        den = np.zeros(cells)
        bnd = np.zeros(4)
        segments = _kernels._run_chunk(
            np.uint64(seed.master),
            np.uint64(seed.level),
            np.uint64(seed.replicate),
            window[0],
            window[1],
            t.lower,
            t.upper,
            t.sigma_t,
            t.ratio,
            t.q_cum,
            t.q_density,
            problem.total_source,
            grid.dx,
            cells,
            grid.length,
            settings.weight_cutoff,
            settings.roulette_survival,
            num,
            den,
            bnd,
        )
        return num, den, bnd, int(segments)

    if settings.parallelism == 1 or len(windows) == 1:
        results = [run_window(w) for w in windows]
    else:
        with ThreadPoolExecutor(max_workers=settings.parallelism) as pool:
            results = list(pool.map(run_window, windows))

    num = np.zeros(cells)
    den = np.zeros(cells)
    bnd = np.zeros(4)
    segments = 0
    for w_num, w_den, w_bnd, w_segments in results:  # deterministic window order
        num += w_num
        den += w_den
        bnd += w_bnd
        segments += w_segments

    return ClosureTallies(
        grid_level=grid.level,
        num=num,
        den=den,
        current_left=float(bnd[0]),
        flux_left=float(bnd[1]),
        current_right=float(bnd[2]),
        flux_right=float(bnd[3]),
        histories=histories,
        cost=time.perf_counter() - started,
        segments=segments,
        source_total=problem.total_source,
    )
