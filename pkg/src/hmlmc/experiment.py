"""Experiment orchestration: config files, case runs, and result emission.

A run configuration describes one slab problem, a grid hierarchy, and a list
of target tolerances; running it produces one multilevel case per tolerance.
Results are written as a per-level table (levels.csv), a JSON report
(report.json), and gnuplot-ready panel blocks (plotdata.csv).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

try:  # Python 3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - version dependent
    import tomli as tomllib

from .errors import AlignmentError, ConfigurationError
from .grids import GridHierarchy, RegionSpec, build_hierarchy
from .mlmc import MlmcConfig, MlmcReport, _normalize_cost_mode, run_mlmc
from .transport import _GAMMA, _MASK64, _mix64, SlabProblem, TransportSettings

__all__ = [
    "CaseResult",
    "OutputBundle",
    "RunConfig",
    "emit_outputs",
    "load_config",
    "run_experiment",
    "serialize_config",
    "three_material_problem",
    "two_material_problem",
]


def two_material_problem(
    c2: float,
    sigma_t: float = 1.0,
    c1: float = 0.9,
    q: float = 1.0,
    X: float = 1.0,
) -> SlabProblem:
    """Two-region slab with an interface at the midpoint.

    Scattering ratios ``c1`` (left half) and ``c2`` (right half) set the
    scattering cross sections as ``c * sigma_t``; the source is flat.
    """
    half = X / 2.0
    return SlabProblem(
        X=X,
        regions=(
            (0.0, half, sigma_t, c1 * sigma_t, q),
            (half, X, sigma_t, c2 * sigma_t, q),
        ),
    )


def three_material_problem(
    sigma_t: float, q: float = 1.0, X: float = 1.0
) -> SlabProblem:
    """Three-region slab with scattering ratios 0.9 / 0.5 / 0.1.

    Breakpoints at one and three quarters of the slab; flat unit source.
    """
    quarter = X / 4.0
    ratios = (0.9, 0.5, 0.1)
    edges = (0.0, quarter, 3.0 * quarter, X)
    return SlabProblem(
        X=X,
        regions=tuple(
            (edges[i], edges[i + 1], sigma_t, ratios[i] * sigma_t, q)
            for i in range(3)
        ),
    )


_REGION_FIELDS = 5  # x_lo, x_hi, sigma_t, sigma_s, q


@dataclass(frozen=True)
class RunConfig:
    """One experiment: a problem, a hierarchy, and a tolerance sweep."""

    label: str
    regions: tuple[tuple[float, ...], ...]
    length: float
    cells: int
    levels: int
    epsilons: tuple[float, ...]
    histories: int | tuple[int, ...]
    n_initial: int = 10
    passes: int = 3
    functional: RegionSpec = field(default_factory=RegionSpec.whole_domain)
    cost_mode: str = "measured"
    seed: int = 0
    parallelism: int = 1
    output_dir: str = "results"

    def __post_init__(self):
        if not isinstance(self.label, str) or not self.label:
            raise ConfigurationError("label must be a nonempty string")
        rows = []
        for row in self.regions:
            row = tuple(float(v) for v in row)
            if len(row) != _REGION_FIELDS:
                raise ConfigurationError(
                    "each region row needs 5 entries: "
                    "x_lo, x_hi, sigma_t, sigma_s, q"
                )
            rows.append(row)
        if not rows:
            raise ConfigurationError("at least one region is required")
        object.__setattr__(self, "regions", tuple(rows))
        if not (isinstance(self.length, (int, float)) and self.length > 0.0
                and math.isfinite(self.length)):
            raise ConfigurationError("slab length must be positive")
        object.__setattr__(self, "length", float(self.length))
        if self.cells < 1:
            raise ConfigurationError("the coarsest grid needs at least one cell")
        epsilons = tuple(float(e) for e in self.epsilons)
        if not epsilons:
            raise ConfigurationError("at least one epsilon is required")
        if any(not (e > 0.0 and math.isfinite(e)) for e in epsilons):
            raise ConfigurationError("epsilon values must be positive")
        object.__setattr__(self, "epsilons", epsilons)
        if not isinstance(self.histories, int):
            object.__setattr__(
                self, "histories", tuple(int(k) for k in self.histories)
            )
        if not isinstance(self.functional, RegionSpec):
            raise ConfigurationError("functional must be a RegionSpec")
        if (self.functional.kind == RegionSpec.CELL
                and self.functional.index > self.cells):
            raise ConfigurationError(
                f"functional references coarse cell {self.functional.index} "
                f"but the coarsest grid has {self.cells} cells"
            )
        object.__setattr__(self, "cost_mode", _normalize_cost_mode(self.cost_mode))
        if not 0 <= self.seed <= _MASK64:
            raise ConfigurationError("seed must fit in an unsigned 64-bit integer")
        if self.parallelism < 1:
            raise ConfigurationError("parallelism must be at least 1")
        if not isinstance(self.output_dir, str) or not self.output_dir:
            raise ConfigurationError("output directory must be a nonempty string")
        # Delegate the remaining MLMC parameter checks, then verify the
        # problem tiles the slab and every interface lands on a coarse edge.
        self.mlmc_config(epsilons[0])
        problem = self.problem()
        dx0 = self.length / self.cells
        for region in problem.regions:
            for edge in (region.x_lo, region.x_hi):
                ratio = edge / dx0
                if abs(ratio - round(ratio)) > 1e-9 * max(1.0, abs(ratio)):
                    raise AlignmentError(
                        f"material breakpoint {edge:g} does not align with the "
                        f"coarsest grid (cell width {dx0:g})"
                    )

    def problem(self) -> SlabProblem:
        return SlabProblem(X=self.length, regions=self.regions)

    def hierarchy(self) -> GridHierarchy:
        return build_hierarchy(self.length, self.cells, self.levels)

    def mlmc_config(self, epsilon: float) -> MlmcConfig:
        return MlmcConfig(
            epsilon=epsilon,
            levels=self.levels,
            histories=self.histories,
            n_initial=self.n_initial,
            outer_passes=self.passes,
            functional=self.functional,
            cost_mode=self.cost_mode,
        )


@dataclass(frozen=True)
class CaseResult:
    """One tolerance case of an experiment."""

    case: str
    label: str
    epsilon: float
    histories: int | tuple[int, ...]
    seed: int
    report: MlmcReport


@dataclass(frozen=True)
class OutputBundle:
    """All case results of one experiment, ready for emission."""

    config: RunConfig
    cases: tuple[CaseResult, ...]


def _require(mapping: Mapping[str, Any], section: str, key: str) -> Any:
    if key not in mapping:
        raise ConfigurationError(f"missing key {key!r} in [{section}]")
    return mapping[key]


def _parse_functional(value: Any) -> RegionSpec:
    if value == "whole":
        return RegionSpec.whole_domain()
    if isinstance(value, int) and not isinstance(value, bool):
        return RegionSpec.coarse_cell(value)
    raise ConfigurationError(
        f'functional must be "whole" or a 1-based coarse cell index, got {value!r}'
    )


def load_config(path: str | Path) -> RunConfig:
    """Read and validate a run configuration from a TOML file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc

    for section in ("problem", "grid", "mlmc"):
        if section not in doc or not isinstance(doc[section], dict):
            raise ConfigurationError(f"missing section [{section}] in {path}")
    problem = doc["problem"]
    grid = doc["grid"]
    mlmc = doc["mlmc"]
    output = doc.get("output", {})

    histories = _require(mlmc, "mlmc", "histories")
    if not isinstance(histories, int):
        histories = tuple(histories)
    try:
        return RunConfig(
            label=doc.get("label", path.stem),
            regions=tuple(tuple(row) for row in _require(problem, "problem", "regions")),
            length=_require(grid, "grid", "length"),
            cells=_require(grid, "grid", "cells"),
            levels=_require(grid, "grid", "levels"),
            epsilons=tuple(_require(mlmc, "mlmc", "epsilon")),
            histories=histories,
            n_initial=mlmc.get("n_initial", 10),
            passes=mlmc.get("passes", 3),
            functional=_parse_functional(mlmc.get("functional", "whole")),
            cost_mode=mlmc.get("cost_mode", "measured"),
            seed=mlmc.get("seed", 0),
            parallelism=mlmc.get("parallelism", 1),
            output_dir=output.get("directory", "results"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{path}: invalid configuration: {exc}") from exc


def _toml_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    return json.dumps(value)


def serialize_config(config: RunConfig) -> str:
    """Render a configuration back to TOML; loading the result reproduces it."""
    lines = [f"label = {json.dumps(config.label)}", "", "[problem]", "regions = ["]
    for row in config.regions:
        lines.append("    [" + ", ".join(repr(v) for v in row) + "],")
    lines.append("]")
    lines += [
        "",
        "[grid]",
        f"length = {repr(config.length)}",
        f"cells = {config.cells}",
        f"levels = {config.levels}",
        "",
        "[mlmc]",
        "epsilon = [" + ", ".join(repr(e) for e in config.epsilons) + "]",
    ]
    if isinstance(config.histories, int):
        lines.append(f"histories = {config.histories}")
    else:
        lines.append("histories = [" + ", ".join(str(k) for k in config.histories) + "]")
    if config.functional.kind == RegionSpec.WHOLE:
        functional = '"whole"'
    else:
        functional = str(config.functional.index)
    lines += [
        f"n_initial = {config.n_initial}",
        f"passes = {config.passes}",
        f"functional = {functional}",
        f'cost_mode = "{config.cost_mode}"',
        f"seed = {config.seed}",
        f"parallelism = {config.parallelism}",
        "",
        "[output]",
        f"directory = {json.dumps(config.output_dir)}",
        "",
    ]
    return "\n".join(lines)


def _case_seed(master: int, index: int) -> int:
    """Derive a per-case master seed; distinct cases get distinct streams."""
    return _mix64((master + (index + 1) * _GAMMA) & _MASK64)


def run_experiment(
    config: RunConfig, settings: TransportSettings | None = None
) -> OutputBundle:
    """Run one multilevel case per configured tolerance."""
    problem = config.problem()
    hierarchy = config.hierarchy()
    if settings is None:
        settings = TransportSettings(parallelism=config.parallelism)
    cases = []
    for index, epsilon in enumerate(config.epsilons):
        seed = _case_seed(config.seed, index)
        report = run_mlmc(
            problem,
            hierarchy,
            config.mlmc_config(epsilon),
            master_seed=seed,
            settings=settings,
        )
        cases.append(
            CaseResult(
                case=f"{config.label} eps={epsilon:g}",
                label=config.label,
                epsilon=epsilon,
                histories=config.histories,
                seed=seed,
                report=report,
            )
        )
    return OutputBundle(config=config, cases=tuple(cases))


def _fmt(x: float | None) -> str:
    """6 significant digits; scientific notation below 1e-3; '' for absent."""
    if x is None:
        return ""
    x = float(x)
    if x == 0.0:
        return "0"
    if math.isfinite(x) and abs(x) < 1.0e-3:
        return f"{x:.5e}"
    return f"{x:.6g}"


def _levels_csv(bundle: OutputBundle) -> str:
    lines = ["case,level,N,mean_P,mean_dP,V,kappa,C,CC"]
    for case in bundle.cases:
        report = case.report
        for stats in report.levels:
            cc = report.consistency[stats.level - 1] if stats.level >= 1 else None
            lines.append(
                ",".join(
                    [
                        case.case,
                        str(stats.level),
                        str(stats.count),
                        _fmt(stats.mean_P),
                        _fmt(stats.mean_dP),
                        _fmt(stats.variance),
                        _fmt(stats.kurtosis),
                        _fmt(stats.cost_per_sample),
                        _fmt(cc),
                    ]
                )
            )
    return "\n".join(lines) + "\n"


def _case_document(case: CaseResult) -> dict[str, Any]:
    report = case.report
    histories = (
        case.histories if isinstance(case.histories, int) else list(case.histories)
    )
    return {
        "case": case.case,
        "label": case.label,
        "epsilon": case.epsilon,
        "histories": histories,
        "seed": case.seed,
        "alpha": report.alpha,
        "beta": report.beta,
        "gamma": report.gamma,
        "alpha_residual": report.alpha_residual,
        "beta_residual": report.beta_residual,
        "gamma_residual": report.gamma_residual,
        "N": list(report.counts),
        "maxW": report.max_weak,
        "weak_values": list(report.weak_values) if report.weak_values else None,
        "weak_pass": report.weak_pass,
        "CC": list(report.consistency),
        "consistency_pass": report.consistency_pass,
        "combined_estimate": report.combined_estimate,
        "total_cost": report.total_cost,
        "theory_optimal_cost": report.theory_optimal_cost,
        "regime": report.regime,
        "levels": [
            {
                "level": s.level,
                "count": s.count,
                "mean_P": s.mean_P,
                "mean_dP": s.mean_dP,
                "variance": s.variance,
                "kurtosis": s.kurtosis,
                "kurtosis_degenerate": s.kurtosis_degenerate,
                "cost_per_sample": s.cost_per_sample,
                "mean_P_coarse": s.mean_P_coarse,
                "var_P": s.var_P,
                "var_P_coarse": s.var_P_coarse,
            }
            for s in report.levels
        ],
    }


def _log2_or_nan(x: float) -> float:
    return math.log2(abs(x)) if x != 0.0 else math.nan


def _plotdata(bundle: OutputBundle) -> str:
    blocks = []
    for case in bundle.cases:
        report = case.report
        levels = report.levels

        def block(panel: str, columns: str, rows: list[str]) -> None:
            header = [f"# case: {case.case}", f"# panel: {panel}", f"# {columns}"]
            blocks.append("\n".join(header + rows))

        block(
            "mean",
            "level log2_abs_mean_dP log2_abs_mean_P",
            [
                f"{s.level} {_fmt(_log2_or_nan(s.mean_dP))} "
                f"{_fmt(_log2_or_nan(s.mean_P))}"
                for s in levels
            ],
        )
        block(
            "variance",
            "level log2_V log2_var_P",
            [
                f"{s.level} {_fmt(_log2_or_nan(s.variance))} "
                f"{_fmt(_log2_or_nan(s.var_P))}"
                for s in levels
            ],
        )
        block(
            "cost",
            "level log2_C",
            [f"{s.level} {_fmt(_log2_or_nan(s.cost_per_sample))}" for s in levels],
        )
        block(
            "realizations",
            "level N",
            [f"{s.level} {s.count}" for s in levels],
        )
        block(
            "kurtosis",
            "level kappa",
            [f"{s.level} {_fmt(s.kurtosis)}" for s in levels],
        )
        block(
            "consistency",
            "level CC",
            [
                f"{level} {_fmt(cc)}"
                for level, cc in enumerate(report.consistency, start=1)
            ],
        )
    # Two blank lines between blocks: gnuplot treats each as its own index.
    return "\n\n\n".join(blocks) + "\n"


def emit_outputs(bundle: OutputBundle, directory: str | Path) -> None:
    """Write levels.csv, report.json, and plotdata.csv into a directory."""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {directory}: {exc}") from exc
    report_doc = {"cases": [_case_document(case) for case in bundle.cases]}
    outputs = {
        "levels.csv": _levels_csv(bundle),
        "report.json": json.dumps(report_doc, indent=2) + "\n",
        "plotdata.csv": _plotdata(bundle),
    }
    for name, content in outputs.items():
        target = directory / name
        try:
            target.write_text(content, encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot write {target}: {exc}") from exc
