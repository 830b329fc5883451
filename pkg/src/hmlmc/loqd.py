"""Finite-volume low-order solver for the cell-average scalar flux.

The balance equation per cell couples neighbors through face currents

    J = -(1/sigma_t) d(E phi)/dx

where E is the per-cell flux-shape (second-moment) factor supplied by the
Monte Carlo tallies. At the two vacuum faces the exiting current is tied to
the boundary scalar flux through the current ratios B_0 < 0 < B_X; a
half-cell discretization of J eliminates the boundary flux unknown and
keeps the system tridiagonal.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import AssemblyError, DimensionError, NumericalError, SingularSystemError
from .grids import Grid
from .tallies import (
    ISOTROPIC_EDDINGTON,
    ClosureTallies,
    estimate_boundary_factors,
    estimate_eddington,
)

# below this the closure is considered degenerate and rejected
EDDINGTON_FLOOR = 1e-6
BALANCE_TOL = 1e-10


@dataclass
class Closures:
    """Per-cell shape factors plus boundary current ratios for one grid."""

    E: np.ndarray
    B_0: float
    B_X: float
    void_cells: np.ndarray = None
    boundary_fallback: bool = False

    def __post_init__(self):
        self.E = np.asarray(self.E, dtype=np.float64)
        if self.void_cells is None:
            self.void_cells = np.zeros(self.E.shape, dtype=bool)
        self.void_cells = np.asarray(self.void_cells, dtype=bool)
        if self.void_cells.shape != self.E.shape:
            raise DimensionError("void flags must match the shape-factor array")
        if np.any(self.E < EDDINGTON_FLOOR) or np.any(self.E > 1.0):
            raise AssemblyError("shape factors must lie in [1e-6, 1]")
        if not -1.0 <= self.B_0 < 0.0:
            raise AssemblyError("left boundary factor must lie in [-1, 0)")
        if not 0.0 < self.B_X <= 1.0:
            raise AssemblyError("right boundary factor must lie in (0, 1]")


def isotropic_closures(cell_count: int) -> Closures:
    """Closures of a fully isotropic field: E = 1/3, half-range B = -+1/2."""
    return Closures(E=np.full(cell_count, ISOTROPIC_EDDINGTON), B_0=-0.5, B_X=0.5)


def closures_from_tallies(tallies: ClosureTallies) -> Closures:
    eddington, void = estimate_eddington(tallies)
    b_left, b_right, fallback = estimate_boundary_factors(tallies)
    return Closures(
        E=eddington, B_0=b_left, B_X=b_right, void_cells=void, boundary_fallback=fallback
    )


@dataclass
class TridiagonalSystem:
    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        self.sub = np.asarray(self.sub, dtype=np.float64)
        self.diag = np.asarray(self.diag, dtype=np.float64)
        self.sup = np.asarray(self.sup, dtype=np.float64)
        self.rhs = np.asarray(self.rhs, dtype=np.float64)
        n = self.diag.shape[0]
        if n < 1:
            raise DimensionError("empty system")
        for arr in (self.sub, self.sup, self.rhs):
            if arr.shape != (n,):
                raise DimensionError("tridiagonal bands must share one length")

    @property
    def n(self):
        return self.diag.shape[0]


@dataclass
class FluxSolution:
    """Cell-average scalar flux plus the eliminated boundary fluxes."""

    phi: np.ndarray
    grid: Grid
    phi_left: float
    phi_right: float

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=np.float64)
        if not (
            np.all(np.isfinite(self.phi))
            and np.isfinite(self.phi_left)
            and np.isfinite(self.phi_right)
        ):
            raise NumericalError("non-finite flux solution")


def _half_cell_coefficients(problem, grid, closures):
    """Half-cell conductances a = 2E/(sigma_t dx) at the two faces."""
    sigma_t, _, _ = problem.cell_data(grid)
    a_left = 2.0 * closures.E[0] / (sigma_t[0] * grid.widths[0])
    a_right = 2.0 * closures.E[-1] / (sigma_t[-1] * grid.widths[-1])
    return a_left, a_right


def assemble_system(problem, grid: Grid, closures: Closures) -> TridiagonalSystem:
    """Assemble the cell-balance rows in the unknowns phi_1..phi_I.

    Interior face currents use the optical half-sum
    sigma_{t,i+1/2} dx_{i+1/2} = (sigma_{t,i} dx_i + sigma_{t,i+1} dx_{i+1})/2;
    each boundary row carries the eliminated half-cell closure
    J(0) = B_0 a_L phi_1 / (a_L - B_0) (mirrored on the right).
    """
    cells = grid.cell_count
    if closures.E.shape != (cells,):
        raise DimensionError("closures defined on a different grid")
    if cells < 2:
        raise AssemblyError("at least two cells required for boundary rows")
    sigma_t, sigma_a, q = problem.cell_data(grid)
    if np.any(sigma_t <= 0.0) or np.any(closures.E <= 0.0):
        raise AssemblyError("non-positive sigma_t or shape factor")
    dx = grid.widths
    eddington = closures.E

    # interior faces: coupling 1 / (sigma_{t,f} dx_f)
    inv_face = 1.0 / (0.5 * (sigma_t[:-1] * dx[:-1] + sigma_t[1:] * dx[1:]))

    sub = np.zeros(cells)
    sup = np.zeros(cells)
    diag = sigma_a * dx
    sup[:-1] -= eddington[1:] * inv_face
    sub[1:] -= eddington[:-1] * inv_face
    diag[:-1] += eddington[:-1] * inv_face
    diag[1:] += eddington[1:] * inv_face

    a_left, a_right = _half_cell_coefficients(problem, grid, closures)
    diag[0] += -closures.B_0 * a_left / (a_left - closures.B_0)
    diag[-1] += closures.B_X * a_right / (a_right + closures.B_X)

    return TridiagonalSystem(sub=sub, diag=diag, sup=sup, rhs=q * dx)


def solve_tridiagonal(system: TridiagonalSystem) -> np.ndarray:
    """Thomas elimination: one forward sweep, one back substitution."""
    n = system.n
    upper = np.empty(n)
    partial = np.empty(n)
    pivot = system.diag[0]
    if pivot == 0.0:
        raise SingularSystemError("zero pivot in row 0")
    upper[0] = system.sup[0] / pivot
    partial[0] = system.rhs[0] / pivot
    for i in range(1, n):
        pivot = system.diag[i] - system.sub[i] * upper[i - 1]
        if pivot == 0.0:
            raise SingularSystemError(f"zero pivot in row {i}")
        upper[i] = system.sup[i] / pivot
        partial[i] = (system.rhs[i] - system.sub[i] * partial[i - 1]) / pivot
    x = np.empty(n)
    x[-1] = partial[-1]
    for i in range(n - 2, -1, -1):
        x[i] = partial[i] - upper[i] * x[i + 1]
    return x


def solve_loqd(problem, grid: Grid, closures: Closures) -> FluxSolution:
    """Assemble, solve, recover boundary fluxes, and verify global balance."""
    system = assemble_system(problem, grid, closures)
    phi = solve_tridiagonal(system)
    a_left, a_right = _half_cell_coefficients(problem, grid, closures)
    solution = FluxSolution(
        phi=phi,
        grid=grid,
        phi_left=float(a_left * phi[0] / (a_left - closures.B_0)),
        phi_right=float(a_right * phi[-1] / (a_right + closures.B_X)),
    )
    residual = balance_residual(solution, problem, grid, closures)
    if residual > BALANCE_TOL:
        raise NumericalError(f"global balance violated: residual {residual:.3e}")
    return solution


def balance_residual(solution: FluxSolution, problem, grid: Grid, closures: Closures):
    """Absorption + net leakage - source, relative to the total source.

    Zero-source problems report the absolute imbalance instead.
    """
    _, sigma_a, q = problem.cell_data(grid)
    absorbed = float(np.sum(sigma_a * solution.phi * grid.widths))
    source = float(np.sum(q * grid.widths))
    leak_right = closures.B_X * solution.phi_right
    leak_left = closures.B_0 * solution.phi_left
    net = absorbed + leak_right - leak_left - source
    return abs(net) / source if source > 0.0 else abs(net)
