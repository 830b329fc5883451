"""Multilevel Monte Carlo driver for the hybrid transport estimator.

One *sample* at level ``l`` runs a single Monte Carlo batch on grid ``G_l``
and, for ``l > 0``, restricts the tallies to ``G_{l-1}``. Both members of the
pair close with that one shape-factor field at the pair's coarse resolution —
the ``G_{l-1}`` solve directly, the ``G_l`` solve with the field held
piecewise constant over child cells — and the sample is the correction
``dP = P_l - P_{l-1}`` of the flux functional (``dP = P_0`` on the coarsest
level). Sharing one closure field across the pair means the per-cell
statistical noise of the closures cancels in the difference, so the
correction variance is governed by the grid refinement rather than by the
batch size. The driver accumulates per-level statistics over several
allocation passes, sizing each level by the usual variance/cost trade-off,
and finishes with rate fits and convergence diagnostics.

Reproducibility notes:

- the per-level sample means use compensated (Neumaier) running sums, so a
  constant-valued sampler with a power-of-two sample count reproduces its
  value bitwise;
- the combined estimator is the plain left-to-right sum of the per-level
  correction means, in ascending level order; reports preserve this identity
  bitwise.
"""

from __future__ import annotations

import math
import sys
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    DimensionError,
    FitError,
    InsufficientSamplesError,
)
from .grids import GridHierarchy, RegionSpec, integrate_flux, restrict_tallies
from .loqd import Closures, closures_from_tallies, isotropic_closures, solve_loqd
from .transport import SampleSeed, SlabProblem, TransportSettings, simulate_sample

__all__ = [
    "HybridSample",
    "LevelAccumulator",
    "LevelStats",
    "MlmcConfig",
    "MlmcReport",
    "RateFit",
    "combine_estimator",
    "consistency_check",
    "deterministic_sampler",
    "draw_level_sample",
    "fit_rates",
    "level_stats",
    "optimal_samples",
    "run_mlmc",
    "theory_optimal_cost",
    "weak_convergence",
]

COST_MEASURED = "measured"
COST_PROXY = "proxy"
_COST_MODES = {
    COST_MEASURED: COST_MEASURED,
    COST_PROXY: COST_PROXY,
    "deterministic-proxy": COST_PROXY,
}

#: A sampler maps (level, replicate) to one hybrid sample. Replicate indices
#: are assigned by the driver in increasing order and never reused.
SamplerFn = Callable[[int, int], "HybridSample"]


def _normalize_cost_mode(mode: str) -> str:
    try:
        return _COST_MODES[mode]
    except KeyError:
        raise ConfigurationError(
            f"cost_mode must be one of {sorted(_COST_MODES)}, got {mode!r}"
        ) from None


@dataclass(frozen=True)
class HybridSample:
    """One realization of a level pair.

    ``fine`` is the flux functional on the level's own grid, ``coarse`` the
    functional of the same tallies restricted one level down (absent on level
    0), ``delta`` their difference, and ``cost`` the per-sample cost in the
    active cost mode.
    """

    fine: float
    coarse: float | None
    delta: float
    cost: float

    def __post_init__(self):
        for name in ("fine", "delta", "cost"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigurationError(f"sample {name} must be finite")
        if self.coarse is not None and not math.isfinite(self.coarse):
            raise ConfigurationError("sample coarse value must be finite")
        if self.cost < 0.0:
            raise ConfigurationError("sample cost must be nonnegative")


class _CompensatedSum:
    """Neumaier compensated accumulator."""

    __slots__ = ("_total", "_compensation")

    def __init__(self) -> None:
        self._total = 0.0
        self._compensation = 0.0

    def add(self, x: float) -> None:
        t = self._total + x
        if abs(self._total) >= abs(x):
            self._compensation += (self._total - t) + x
        else:
            self._compensation += (x - t) + self._total
        self._total = t

    @property
    def value(self) -> float:
        return self._total + self._compensation


class LevelAccumulator:
    """Running sums for one level's correction statistics.

    Tracks powers of the correction up to the fourth (for the variance and
    kurtosis), the fine and coarse functional values and their squares (for
    the consistency check), and the accumulated cost.
    """

    def __init__(self, level: int) -> None:
        if level < 0:
            raise ConfigurationError("level must be nonnegative")
        self.level = level
        self.count = 0
        self._delta = [_CompensatedSum() for _ in range(4)]
        self._fine = [_CompensatedSum() for _ in range(2)]
        self._coarse = [_CompensatedSum() for _ in range(2)]
        self._cost = _CompensatedSum()

    def add(self, sample: HybridSample) -> None:
        if self.level == 0:
            if sample.coarse is not None:
                raise ConfigurationError("level-0 samples carry no coarse value")
            if sample.delta != sample.fine:
                raise ConfigurationError(
                    "on level 0 the correction must equal the fine functional"
                )
        elif sample.coarse is None:
            raise ConfigurationError(
                f"level-{self.level} samples need a coarse functional value"
            )
        d = sample.delta
        d2 = d * d
        self._delta[0].add(d)
        self._delta[1].add(d2)
        self._delta[2].add(d2 * d)
        self._delta[3].add(d2 * d2)
        self._fine[0].add(sample.fine)
        self._fine[1].add(sample.fine * sample.fine)
        if sample.coarse is not None:
            self._coarse[0].add(sample.coarse)
            self._coarse[1].add(sample.coarse * sample.coarse)
        self._cost.add(sample.cost)
        self.count += 1

    @property
    def sum_delta(self) -> float:
        return self._delta[0].value

    @property
    def sum_delta2(self) -> float:
        return self._delta[1].value

    @property
    def sum_delta3(self) -> float:
        return self._delta[2].value

    @property
    def sum_delta4(self) -> float:
        return self._delta[3].value

    @property
    def sum_fine(self) -> float:
        return self._fine[0].value

    @property
    def sum_fine2(self) -> float:
        return self._fine[1].value

    @property
    def sum_coarse(self) -> float:
        return self._coarse[0].value

    @property
    def sum_coarse2(self) -> float:
        return self._coarse[1].value

    @property
    def cost_total(self) -> float:
        return self._cost.value


@dataclass(frozen=True)
class LevelStats:
    """Summary statistics of one level's accumulated samples."""

    level: int
    count: int
    mean_dP: float
    variance: float
    kurtosis: float
    kurtosis_degenerate: bool
    cost_per_sample: float
    mean_P: float
    var_P: float
    mean_P_coarse: float | None
    var_P_coarse: float | None


def _mean_and_variance(s1: float, s2: float, n: int) -> tuple[float, float]:
    mean = s1 / n
    variance = max((s2 - s1 * s1 / n) / (n - 1), 0.0)
    return mean, variance


def level_stats(acc: LevelAccumulator) -> LevelStats:
    """Reduce an accumulator to means, unbiased variance, kurtosis, and cost.

    The variance uses the ``N-1`` normalization (it feeds the allocation);
    the kurtosis uses ``1/N`` central moments. Constant samples have zero
    variance and are reported with kurtosis 0 and the degenerate flag set.
    """
    n = acc.count
    if n < 2:
        raise InsufficientSamplesError(
            f"level {acc.level} has {n} sample(s); statistics need at least 2"
        )
    mean, variance = _mean_and_variance(acc.sum_delta, acc.sum_delta2, n)
    # Central moments from raw power sums cancel catastrophically when the
    # mean dominates the spread; when the surviving moment is below the
    # rounding floor of its constituent terms, the kurtosis is reported as
    # degenerate instead of returning cancellation noise.
    guard = 64.0 * n * sys.float_info.epsilon
    s2n = acc.sum_delta2 / n
    s3n = acc.sum_delta3 / n
    s4n = acc.sum_delta4 / n
    m2 = s2n - mean * mean
    if m2 <= guard * (s2n + mean * mean) or m2 * m2 == 0.0:
        kurtosis, degenerate = 0.0, True
    else:
        m4 = s4n - 4.0 * mean * s3n + 6.0 * mean * mean * s2n - 3.0 * mean ** 4
        scale = abs(s4n) + 4.0 * abs(mean * s3n) + 6.0 * mean * mean * s2n + 3.0 * mean ** 4
        if m4 <= guard * scale:
            kurtosis, degenerate = 0.0, True
        else:
            kurtosis = m4 / (m2 * m2)
            degenerate = not math.isfinite(kurtosis)
            if degenerate:
                kurtosis = 0.0
    mean_fine, var_fine = _mean_and_variance(acc.sum_fine, acc.sum_fine2, n)
    if acc.level == 0:
        mean_coarse, var_coarse = None, None
    else:
        mean_coarse, var_coarse = _mean_and_variance(acc.sum_coarse, acc.sum_coarse2, n)
    return LevelStats(
        level=acc.level,
        count=n,
        mean_dP=mean,
        variance=variance,
        kurtosis=kurtosis,
        kurtosis_degenerate=degenerate,
        cost_per_sample=acc.cost_total / n,
        mean_P=mean_fine,
        var_P=var_fine,
        mean_P_coarse=mean_coarse,
        var_P_coarse=var_coarse,
    )


def _allocation_inputs(
    V: Sequence[float], C: Sequence[float], epsilon: float
) -> tuple[np.ndarray, np.ndarray]:
    V = np.asarray(V, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    if V.shape != C.shape or V.ndim != 1:
        raise DimensionError("variance and cost arrays must have matching 1-D shapes")
    if np.any(V < 0.0) or not np.all(np.isfinite(V)):
        raise ConfigurationError("variances must be finite and nonnegative")
    if np.any(C <= 0.0) or not np.all(np.isfinite(C)):
        raise ConfigurationError("costs must be finite and positive")
    if not (epsilon > 0.0 and math.isfinite(epsilon)):
        raise ConfigurationError("epsilon must be positive")
    return V, C


def optimal_samples(
    V: Sequence[float], C: Sequence[float], epsilon: float
) -> np.ndarray:
    """Per-level sample targets minimizing cost at fixed estimator variance.

    ``N_l = ceil(2 eps^-2 sqrt(V_l/C_l) * sum_k sqrt(V_k C_k))``: the
    Lagrange-optimal real allocation (variance budget ``eps^2 / 2``), rounded
    up. Zero-variance levels get a target of zero.
    """
    V, C = _allocation_inputs(V, C, epsilon)
    weight = np.sqrt(V * C).sum()
    targets = np.ceil(2.0 / (epsilon * epsilon) * np.sqrt(V / C) * weight)
    return targets.astype(np.int64)


def theory_optimal_cost(
    V: Sequence[float], C: Sequence[float], epsilon: float
) -> float:
    """Cost of the real-valued optimal allocation at variance budget ``eps^2``.

    Evaluated by the multiplier route ``lambda * sum sqrt(V C)`` with
    ``lambda = eps^-2 sum sqrt(V C)``, which collapses to the closed form
    ``eps^-2 (sum sqrt(V_l C_l))^2``.
    """
    V, C = _allocation_inputs(V, C, epsilon)
    weight = float(np.sqrt(V * C).sum())
    multiplier = weight / (epsilon * epsilon)
    return multiplier * weight


@dataclass(frozen=True)
class RateFit:
    """Log2-linear rate fits: mean decay, variance decay, cost growth."""

    alpha: float
    beta: float
    gamma: float
    alpha_residual: float
    beta_residual: float
    gamma_residual: float


def _fit_line(points: list[tuple[int, float]]) -> tuple[float, float]:
    """Least-squares slope and RMS residual of y against x."""
    xs = np.array([p[0] for p in points], dtype=np.float64)
    ys = np.array([p[1] for p in points], dtype=np.float64)
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    slope = float((dx * dy).sum() / (dx * dx).sum())
    resid = ys - (ys.mean() + slope * dx)
    return slope, float(np.sqrt(np.mean(resid * resid)))


def _check_contiguous(stats: Sequence[LevelStats]) -> None:
    if not stats:
        raise ConfigurationError("no level statistics given")
    for i, s in enumerate(stats):
        if s.level != i:
            raise ConfigurationError(
                f"level statistics must be contiguous from 0; position {i} "
                f"holds level {s.level}"
            )


def _alpha_points(stats: Sequence[LevelStats]) -> list[tuple[int, float]]:
    return [
        (s.level, math.log2(abs(s.mean_dP)))
        for s in stats[1:]
        if s.mean_dP != 0.0
    ]


def _beta_points(stats: Sequence[LevelStats]) -> list[tuple[int, float]]:
    return [(s.level, math.log2(s.variance)) for s in stats[1:] if s.variance > 0.0]


def _gamma_points(stats: Sequence[LevelStats]) -> list[tuple[int, float]]:
    return [
        (s.level, math.log2(s.cost_per_sample))
        for s in stats
        if s.cost_per_sample > 0.0
    ]


def fit_rates(stats: Sequence[LevelStats]) -> RateFit:
    """Fit the decay/growth exponents of corrections, variances, and costs.

    Means and variances are fitted over levels 1..L (level 0 carries no
    correction-versus-coarser meaning), costs over all levels. Zero-valued
    points are excluded; fewer than two surviving points for any exponent is
    a fit error.
    """
    _check_contiguous(stats)
    fits = {}
    for name, points, sign in (
        ("alpha", _alpha_points(stats), -1.0),
        ("beta", _beta_points(stats), -1.0),
        ("gamma", _gamma_points(stats), 1.0),
    ):
        if len(points) < 2:
            raise FitError(f"{name} fit has {len(points)} usable point(s); needs 2")
        slope, resid = _fit_line(points)
        fits[name] = (sign * slope, resid)
    return RateFit(
        alpha=fits["alpha"][0],
        beta=fits["beta"][0],
        gamma=fits["gamma"][0],
        alpha_residual=fits["alpha"][1],
        beta_residual=fits["beta"][1],
        gamma_residual=fits["gamma"][1],
    )


def weak_convergence(
    stats: Sequence[LevelStats], alpha: float, epsilon: float
) -> tuple[tuple[float, float, float], bool]:
    """Remaining-discretization-error check on the last three levels.

    ``W = |mean correction| / (2^alpha - 1)`` for the three finest levels;
    the verdict requires every value below ``epsilon / sqrt(2)``.
    """
    if len(stats) < 3:
        raise ConfigurationError("weak-convergence check needs at least 3 levels")
    if not (alpha > 0.0 and math.isfinite(alpha)):
        raise ConfigurationError("weak-convergence check needs alpha > 0")
    if not (epsilon > 0.0 and math.isfinite(epsilon)):
        raise ConfigurationError("epsilon must be positive")
    divisor = 2.0 ** alpha - 1.0
    values = tuple(abs(s.mean_dP) / divisor for s in stats[-3:])
    threshold = epsilon / math.sqrt(2.0)
    return values, all(v < threshold for v in values)


def consistency_check(prev: LevelStats, curr: LevelStats) -> float:
    """Telescoping agreement between adjacent levels, in pooled deviations.

    Numerator: mean fine functional of the coarser level, minus the finer
    level's fine mean, plus the finer level's correction mean (zero in exact
    arithmetic). Denominator: three times the sum of the three standard
    deviations. Defined as 0 when all three variances vanish.
    """
    if curr.level != prev.level + 1 or curr.level < 1:
        raise ConfigurationError(
            f"consistency check needs adjacent levels; got {prev.level} and {curr.level}"
        )
    denominator = 3.0 * (
        math.sqrt(prev.var_P) + math.sqrt(curr.var_P) + math.sqrt(curr.variance)
    )
    if denominator == 0.0:
        return 0.0
    numerator = (prev.mean_P - curr.mean_P) + curr.mean_dP
    return numerator / denominator


def combine_estimator(stats: Sequence[LevelStats]) -> float:
    """Sum of per-level correction means, left to right in level order."""
    if not stats:
        raise ConfigurationError("no level statistics given")
    total = 0.0
    for s in stats:
        total += s.mean_dP
    return total


@dataclass(frozen=True)
class MlmcConfig:
    """Settings of one multilevel run.

    ``histories`` is the Monte Carlo batch size per sample, either one value
    for all levels or a sequence of length ``levels + 1``. ``cost_mode``
    selects wall-clock measurement ("measured") or the deterministic track
    segment count ("proxy", alias "deterministic-proxy").
    """

    epsilon: float
    levels: int
    histories: int | tuple[int, ...]
    n_initial: int = 10
    outer_passes: int = 3
    functional: RegionSpec = RegionSpec.whole_domain()
    cost_mode: str = COST_MEASURED

    def __post_init__(self):
        if not (isinstance(self.epsilon, (int, float)) and self.epsilon > 0.0
                and math.isfinite(self.epsilon)):
            raise ConfigurationError("epsilon must be positive and finite")
        if self.levels < 2:
            raise ConfigurationError(
                "at least 2 refinement levels are required (the weak-convergence "
                "check reads the last three levels)"
            )
        if isinstance(self.histories, int):
            if self.histories < 1:
                raise ConfigurationError("histories must be at least 1")
        else:
            histories = tuple(int(k) for k in self.histories)
            if len(histories) != self.levels + 1:
                raise ConfigurationError(
                    f"per-level histories need {self.levels + 1} entries, "
                    f"got {len(histories)}"
                )
            if any(k < 1 for k in histories):
                raise ConfigurationError("histories must be at least 1")
            object.__setattr__(self, "histories", histories)
        if self.n_initial < 2:
            raise ConfigurationError("n_initial must be at least 2")
        if self.outer_passes < 1:
            raise ConfigurationError("outer_passes must be at least 1")
        if not isinstance(self.functional, RegionSpec):
            raise ConfigurationError("functional must be a RegionSpec")
        object.__setattr__(self, "cost_mode", _normalize_cost_mode(self.cost_mode))

    def histories_for(self, level: int) -> int:
        if isinstance(self.histories, int):
            return self.histories
        return self.histories[level]


@dataclass(frozen=True)
class MlmcReport:
    """Results of a multilevel run.

    ``combined_estimate`` equals the left-to-right sum of ``mean_dP`` over
    ``levels`` bitwise. Fit fields are None when fewer than two usable points
    exist; weak-convergence fields are None when no positive mean-decay rate
    is available.
    """

    epsilon: float
    combined_estimate: float
    levels: tuple[LevelStats, ...]
    counts: tuple[int, ...]
    alpha: float | None
    beta: float | None
    gamma: float | None
    alpha_residual: float | None
    beta_residual: float | None
    gamma_residual: float | None
    weak_values: tuple[float, float, float] | None
    max_weak: float | None
    weak_pass: bool | None
    consistency: tuple[float, ...]
    consistency_pass: bool
    total_cost: float
    theory_optimal_cost: float
    regime: str | None


def draw_level_sample(
    problem: SlabProblem,
    hierarchy: GridHierarchy,
    level: int,
    histories: int,
    seed: SampleSeed,
    *,
    settings: TransportSettings | None = None,
    functional: RegionSpec | None = None,
    cost_mode: str = COST_MEASURED,
) -> HybridSample:
    """Draw one hybrid sample: simulate on the level grid, close, solve.

    The same Monte Carlo tallies feed both solves of a level pair. On a
    refined level the tallies are restricted one grid down and closed there;
    the coarse solve uses that field directly and the fine solve uses it held
    piecewise constant over child cells. With the closure field identical
    across the pair, its statistical noise cancels in the difference and the
    correction isolates the grid-refinement effect at a common noise
    realization. Solver failures propagate with their diagnostics; samples
    are never retried.
    """
    mode = _normalize_cost_mode(cost_mode)
    if not 0 <= level <= hierarchy.max_level:
        raise ConfigurationError(
            f"level {level} outside hierarchy range 0..{hierarchy.max_level}"
        )
    region = RegionSpec.whole_domain() if functional is None else functional
    grid = hierarchy[level]
    tallies = simulate_sample(problem, grid, histories, seed, settings)
    solve_start = time.perf_counter()
    if level == 0:
        solution = solve_loqd(problem, grid, closures_from_tallies(tallies))
        fine = integrate_flux(solution.phi, grid, region)
        coarse = None
        delta = fine
    else:
        coarse_grid = hierarchy[level - 1]
        coarse_tallies = restrict_tallies(tallies, hierarchy, level - 1)
        closures = closures_from_tallies(coarse_tallies)
        ratio = grid.cell_count // coarse_grid.cell_count
        prolonged = Closures(
            E=np.repeat(closures.E, ratio),
            B_0=closures.B_0,
            B_X=closures.B_X,
            void_cells=np.repeat(closures.void_cells, ratio),
            boundary_fallback=closures.boundary_fallback,
        )
        solution = solve_loqd(problem, grid, prolonged)
        fine = integrate_flux(solution.phi, grid, region)
        coarse_solution = solve_loqd(problem, coarse_grid, closures)
        coarse = integrate_flux(coarse_solution.phi, coarse_grid, region)
        delta = fine - coarse
    solve_seconds = time.perf_counter() - solve_start
    if mode == COST_MEASURED:
        cost = tallies.cost + solve_seconds
    else:
        cost = float(tallies.segments)
    return HybridSample(fine=fine, coarse=coarse, delta=delta, cost=cost)


def deterministic_sampler(
    problem: SlabProblem,
    hierarchy: GridHierarchy,
    functional: RegionSpec | None = None,
) -> SamplerFn:
    """Noise-free sampler: low-order solves under fixed isotropic closures.

    Every replicate returns the same value, so corrections are the pure
    discretization differences between adjacent grids. Per-sample cost is
    the number of cells solved. Useful for exercising the driver's
    telescoping and allocation identities without Monte Carlo noise.
    """
    region = RegionSpec.whole_domain() if functional is None else functional
    cache: dict[int, float] = {}

    def value(level: int) -> float:
        if level not in cache:
            grid = hierarchy[level]
            solution = solve_loqd(problem, grid, isotropic_closures(grid.cell_count))
            cache[level] = integrate_flux(solution.phi, grid, region)
        return cache[level]

    def sample(level: int, replicate: int) -> HybridSample:
        if not 0 <= level <= hierarchy.max_level:
            raise ConfigurationError(
                f"level {level} outside hierarchy range 0..{hierarchy.max_level}"
            )
        fine = value(level)
        if level == 0:
            return HybridSample(
                fine=fine, coarse=None, delta=fine,
                cost=float(hierarchy[0].cell_count),
            )
        coarse = value(level - 1)
        cost = float(hierarchy[level].cell_count + hierarchy[level - 1].cell_count)
        return HybridSample(fine=fine, coarse=coarse, delta=fine - coarse, cost=cost)

    return sample


def _monte_carlo_sampler(
    problem: SlabProblem,
    hierarchy: GridHierarchy,
    config: MlmcConfig,
    master_seed: int,
    settings: TransportSettings | None,
) -> SamplerFn:
    def sample(level: int, replicate: int) -> HybridSample:
        seed = SampleSeed(master=master_seed, level=level, replicate=replicate)
        return draw_level_sample(
            problem,
            hierarchy,
            level,
            config.histories_for(level),
            seed,
            settings=settings,
            functional=config.functional,
            cost_mode=config.cost_mode,
        )

    return sample


def _try_fit(points: list[tuple[int, float]], sign: float) -> tuple[float | None, float | None]:
    if len(points) < 2:
        return None, None
    slope, resid = _fit_line(points)
    return sign * slope, resid


def run_mlmc(
    problem: SlabProblem,
    hierarchy: GridHierarchy,
    config: MlmcConfig,
    master_seed: int = 0,
    sampler: SamplerFn | None = None,
    settings: TransportSettings | None = None,
) -> MlmcReport:
    """Run the multilevel estimator and assemble its report.

    Pass 1 draws ``n_initial`` samples on every level; each later pass
    recomputes the optimal targets from the current variance and cost
    estimates and draws only the shortfall. Samples are accumulated in
    deterministic (level, replicate) order. After the passes, rates are
    fitted (each exponent independently, None when unfittable), the
    weak-convergence check runs when a positive mean-decay rate exists, and
    adjacent-level consistency ratios are evaluated.
    """
    if hierarchy.max_level != config.levels:
        raise ConfigurationError(
            f"hierarchy has max level {hierarchy.max_level} but the run is "
            f"configured for {config.levels}"
        )
    if sampler is None:
        sampler = _monte_carlo_sampler(problem, hierarchy, config, master_seed, settings)

    accumulators = [LevelAccumulator(level) for level in range(config.levels + 1)]
    for outer in range(config.outer_passes):
        if outer == 0:
            requests = [config.n_initial] * len(accumulators)
        else:
            stats = [level_stats(acc) for acc in accumulators]
            # The run spends the full eps^2 budget on sampling variance; the
            # remaining discretization bias is controlled separately by the
            # weak-convergence check. optimal_samples defaults to the
            # conservative half-budget split, so evaluate it at sqrt(2)*eps.
            targets = optimal_samples(
                [s.variance for s in stats],
                [s.cost_per_sample for s in stats],
                math.sqrt(2.0) * config.epsilon,
            )
            requests = [
                max(int(target) - acc.count, 0)
                for target, acc in zip(targets, accumulators)
            ]
        for level, extra in enumerate(requests):
            acc = accumulators[level]
            for _ in range(extra):
                acc.add(sampler(level, acc.count))

    stats = [level_stats(acc) for acc in accumulators]
    alpha, alpha_resid = _try_fit(_alpha_points(stats), -1.0)
    beta, beta_resid = _try_fit(_beta_points(stats), -1.0)
    gamma, gamma_resid = _try_fit(_gamma_points(stats), 1.0)

    if alpha is not None and alpha > 0.0:
        weak_values, weak_pass = weak_convergence(stats, alpha, config.epsilon)
        max_weak = max(weak_values)
    else:
        weak_values, weak_pass, max_weak = None, None, None

    consistency = tuple(
        consistency_check(stats[level - 1], stats[level])
        for level in range(1, config.levels + 1)
    )

    if beta is None or gamma is None:
        regime = None
    elif beta - gamma > 1e-9:
        regime = "beta>gamma"
    elif gamma - beta > 1e-9:
        regime = "beta<gamma"
    else:
        regime = "beta=gamma"

    return MlmcReport(
        epsilon=config.epsilon,
        combined_estimate=combine_estimator(stats),
        levels=tuple(stats),
        counts=tuple(acc.count for acc in accumulators),
        alpha=alpha,
        beta=beta,
        gamma=gamma,
        alpha_residual=alpha_resid,
        beta_residual=beta_resid,
        gamma_residual=gamma_resid,
        weak_values=weak_values,
        max_weak=max_weak,
        weak_pass=weak_pass,
        consistency=consistency,
        consistency_pass=all(abs(cc) < 1.0 for cc in consistency),
        total_cost=float(sum(acc.cost_total for acc in accumulators)),
        theory_optimal_cost=theory_optimal_cost(
            [s.variance for s in stats],
            [s.cost_per_sample for s in stats],
            config.epsilon,
        ),
        regime=regime,
    )
