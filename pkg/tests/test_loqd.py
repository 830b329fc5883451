import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hmlmc.errors import AssemblyError, DimensionError, SingularSystemError
from hmlmc.grids import build_hierarchy
from hmlmc.loqd import (
    Closures,
    TridiagonalSystem,
    assemble_system,
    balance_residual,
    isotropic_closures,
    solve_loqd,
    solve_tridiagonal,
)
from hmlmc.transport import SlabProblem

from oracles import (
    MMS_B0,
    MMS_BX,
    MMS_SIGMA_S,
    MMS_SIGMA_T,
    dense_tridiagonal_solve,
    diffusion_slab_reference,
    mms_exact_cell_average,
    mms_source_cell_average,
)


def _grid(cells, length=1.0):
    return build_hierarchy(length, cells, 0)[0]


def _uniform_problem(sigma_t, sigma_s, q, length=1.0):
    return SlabProblem(X=length, regions=[(0.0, length, sigma_t, sigma_s, q)])


# ---------------------------------------------------------------- solver


def test_solve_identity():
    sys_ = TridiagonalSystem(
        sub=np.zeros(4), diag=np.ones(4), sup=np.zeros(4), rhs=np.array([3.0, -1.0, 0.5, 2.0])
    )
    np.testing.assert_array_equal(solve_tridiagonal(sys_), sys_.rhs)


def test_solve_hand_3x3():
    # elimination by hand: x = (1, 1, 1)
    sys_ = TridiagonalSystem(
        sub=np.array([0.0, -1.0, -1.0]),
        diag=np.full(3, 2.0),
        sup=np.array([-1.0, -1.0, 0.0]),
        rhs=np.array([1.0, 0.0, 1.0]),
    )
    np.testing.assert_allclose(solve_tridiagonal(sys_), np.ones(3), rtol=1e-14)


def test_solve_matches_dense_oracle():
    rng = np.random.default_rng(1234)
    n = 50
    sub = rng.uniform(-1.0, 1.0, n)
    sup = rng.uniform(-1.0, 1.0, n)
    sub[0] = sup[-1] = 0.0
    diag = np.abs(sub) + np.abs(sup) + rng.uniform(0.5, 2.0, n)
    rhs = rng.uniform(-5.0, 5.0, n)
    got = solve_tridiagonal(TridiagonalSystem(sub=sub, diag=diag, sup=sup, rhs=rhs))
    want = dense_tridiagonal_solve(sub, diag, sup, rhs)
    assert np.max(np.abs(got - want)) < 1e-10


def test_solve_zero_pivot_raises():
    sys_ = TridiagonalSystem(
        sub=np.zeros(2), diag=np.array([0.0, 1.0]), sup=np.zeros(2), rhs=np.ones(2)
    )
    with pytest.raises(SingularSystemError):
        solve_tridiagonal(sys_)
    # pivot vanishes only during elimination: 1 - 1*1 = 0 in row 2
    sys_ = TridiagonalSystem(
        sub=np.array([0.0, 1.0]), diag=np.ones(2), sup=np.array([1.0, 0.0]), rhs=np.ones(2)
    )
    with pytest.raises(SingularSystemError):
        solve_tridiagonal(sys_)


def test_system_length_mismatch():
    with pytest.raises(DimensionError):
        TridiagonalSystem(sub=np.zeros(3), diag=np.ones(4), sup=np.zeros(4), rhs=np.ones(4))


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_solver_property_diagonally_dominant(data):
    n = data.draw(st.integers(min_value=1, max_value=24))
    vals = st.floats(min_value=-3.0, max_value=3.0, allow_nan=False)
    sub = np.array(data.draw(st.lists(vals, min_size=n, max_size=n)))
    sup = np.array(data.draw(st.lists(vals, min_size=n, max_size=n)))
    rhs = np.array(data.draw(st.lists(vals, min_size=n, max_size=n)))
    sub[0] = sup[-1] = 0.0
    diag = np.abs(sub) + np.abs(sup) + 1.0
    got = solve_tridiagonal(TridiagonalSystem(sub=sub, diag=diag, sup=sup, rhs=rhs))
    want = dense_tridiagonal_solve(sub, diag, sup, rhs)
    assert np.max(np.abs(got - want)) < 1e-10


# ---------------------------------------------------------------- closures


def test_isotropic_closures():
    cl = isotropic_closures(5)
    np.testing.assert_array_equal(cl.E, np.full(5, 1.0 / 3.0))
    assert cl.B_0 == -0.5 and cl.B_X == 0.5
    assert not cl.void_cells.any()


@pytest.mark.parametrize(
    "E, b0, bx",
    [
        (np.full(4, 1e-7), -0.5, 0.5),  # below floor
        (np.full(4, 1.5), -0.5, 0.5),  # above isotropy-normalized ceiling
        (np.full(4, 1 / 3), 0.1, 0.5),  # wrong sign left
        (np.full(4, 1 / 3), -0.5, -0.2),  # wrong sign right
        (np.full(4, 1 / 3), -1.5, 0.5),  # magnitude > 1
        (np.full(4, 1 / 3), -0.5, 1.5),
    ],
)
def test_closures_rejects_unphysical(E, b0, bx):
    with pytest.raises(AssemblyError):
        Closures(E=E, B_0=b0, B_X=bx)


# ---------------------------------------------------------------- assembly


def test_interior_rows_match_diffusion_stencil():
    # c = 0 pure absorber with E = 1/3 must reduce to the standard FV
    # diffusion stencil with D = 1/(3 sigma_t)
    sigma_t, q, cells = 2.0, 1.0, 8
    grid = _grid(cells)
    problem = _uniform_problem(sigma_t, 0.0, q)
    sys_ = assemble_system(problem, grid, isotropic_closures(cells))
    dx = grid.dx
    diff = 1.0 / (3.0 * sigma_t)
    np.testing.assert_allclose(sys_.sup[:-1], -diff / dx, rtol=1e-14)
    np.testing.assert_allclose(sys_.sub[1:], -diff / dx, rtol=1e-14)
    np.testing.assert_allclose(sys_.diag[1:-1], 2.0 * diff / dx + sigma_t * dx, rtol=1e-14)
    np.testing.assert_allclose(sys_.rhs, q * dx, rtol=1e-14)


def test_two_cell_hand_coefficients():
    # dx = 1/2, sigma_t = 1, sigma_a = 0.1, E = 1/3, B = -+1/2:
    #   face coupling  E / (sigma_t dx)              = 2/3
    #   half-cell a    2E / (sigma_t dx)             = 4/3
    #   eliminated bc  -B0 a / (a - B0) = (2/3)/(11/6) = 4/11
    grid = _grid(2)
    problem = _uniform_problem(1.0, 0.9, 1.0)
    sys_ = assemble_system(problem, grid, isotropic_closures(2))
    np.testing.assert_allclose(sys_.sup[0], -2.0 / 3.0, rtol=1e-14)
    np.testing.assert_allclose(sys_.sub[1], -2.0 / 3.0, rtol=1e-14)
    want_diag = 2.0 / 3.0 + 4.0 / 11.0 + 0.05
    np.testing.assert_allclose(sys_.diag, want_diag, rtol=1e-14)
    np.testing.assert_allclose(sys_.rhs, 0.5, rtol=1e-14)


def test_constant_flux_annihilates_interior_rows():
    # sigma_a = 0, Q = 0: interior conservation rows telescope to zero on a
    # constant vector; only the boundary rows pin the level
    cells = 8
    grid = _grid(cells)
    problem = _uniform_problem(1.0, 1.0, 0.0)
    cl = Closures(E=np.full(cells, 0.4), B_0=-0.5, B_X=0.5)
    sys_ = assemble_system(problem, grid, cl)
    ones = np.ones(cells)
    row = sys_.sub * np.roll(ones, 1) + sys_.diag * ones + sys_.sup * np.roll(ones, -1)
    np.testing.assert_array_equal(row[1:-1], 0.0)
    assert row[0] > 0.0 and row[-1] > 0.0


def test_assemble_guards_nonpositive_eddington():
    cells = 4
    cl = isotropic_closures(cells)
    cl.E[:] = 0.0  # bypass construction-time validation via array mutation
    with pytest.raises(AssemblyError):
        assemble_system(_uniform_problem(1.0, 0.0, 1.0), _grid(cells), cl)


def test_assemble_rejects_wrong_length():
    with pytest.raises(DimensionError):
        assemble_system(_uniform_problem(1.0, 0.0, 1.0), _grid(8), isotropic_closures(4))


# ---------------------------------------------------------------- solves


def _diffusion_error(cells):
    sigma_t, sigma_s, q = 1.0, 0.9, 1.0
    grid = _grid(cells)
    problem = _uniform_problem(sigma_t, sigma_s, q)
    sol = solve_loqd(problem, grid, isotropic_closures(cells))
    assert balance_residual(sol, problem, grid, isotropic_closures(cells)) < 1e-10
    _, cell_avg = diffusion_slab_reference(sigma_t, sigma_t - sigma_s, q, 1.0)
    ref = cell_avg(grid.edges)
    return float(np.max(np.abs(sol.phi - ref) / ref))


def test_diffusion_limit_second_order():
    e64 = _diffusion_error(64)
    e128 = _diffusion_error(128)
    # measured 1.13e-4 at I=64: error constant ~0.46 dx^2
    assert e64 < 2e-4
    assert 3.4 < e64 / e128 < 4.7


def test_manufactured_solution_order():
    errors = {}
    for cells in (32, 64, 128, 256):
        grid = _grid(cells)
        q = mms_source_cell_average(grid.edges)
        regions = [
            (grid.edges[i], grid.edges[i + 1], MMS_SIGMA_T, MMS_SIGMA_S, q[i])
            for i in range(cells)
        ]
        problem = SlabProblem(X=1.0, regions=regions)
        cl = Closures(E=np.full(cells, 1.0 / 3.0), B_0=MMS_B0, B_X=MMS_BX)
        sol = solve_loqd(problem, grid, cl)
        assert balance_residual(sol, problem, grid, cl) < 1e-10
        errors[cells] = float(np.max(np.abs(sol.phi - mms_exact_cell_average(grid.edges))))
    order = math.log(errors[32] / errors[256]) / math.log(8.0)
    assert 1.9 <= order <= 2.1


def test_zero_source_zero_flux():
    cells = 16
    problem = _uniform_problem(1.0, 0.5, 0.0)
    sol = solve_loqd(problem, _grid(cells), isotropic_closures(cells))
    np.testing.assert_array_equal(sol.phi, 0.0)
    assert balance_residual(sol, problem, _grid(cells), isotropic_closures(cells)) == 0.0


def test_two_cell_solution_and_balance():
    grid = _grid(2)
    problem = _uniform_problem(1.0, 0.9, 1.0)
    cl = isotropic_closures(2)
    sol = solve_loqd(problem, grid, cl)
    d = 2.0 / 3.0 + 4.0 / 11.0 + 0.05
    want = dense_tridiagonal_solve([0.0, -2 / 3], [d, d], [-2 / 3, 0.0], [0.5, 0.5])
    np.testing.assert_allclose(sol.phi, want, rtol=1e-13)
    assert balance_residual(sol, problem, grid, cl) < 1e-12


def test_solution_positivity_and_symmetry():
    cells = 32
    grid = _grid(cells)
    problem = _uniform_problem(1.0, 0.9, 1.0)
    sol = solve_loqd(problem, grid, isotropic_closures(cells))
    assert np.all(sol.phi > 0.0)
    assert sol.phi_left > 0.0 and sol.phi_right > 0.0
    # problem and closures are mirror symmetric
    np.testing.assert_allclose(sol.phi, sol.phi[::-1], rtol=1e-12)
    np.testing.assert_allclose(sol.phi_left, sol.phi_right, rtol=1e-12)
    assert sol.grid is grid


@settings(max_examples=40, deadline=None)
@given(
    eddington=st.floats(min_value=0.05, max_value=1.0),
    sigma_t=st.floats(min_value=0.1, max_value=5.0),
    ratio=st.floats(min_value=0.0, max_value=0.99),
    q=st.floats(min_value=0.01, max_value=10.0),
    cells=st.sampled_from([4, 8, 16]),
)
def test_balance_and_positivity_property(eddington, sigma_t, ratio, q, cells):
    problem = _uniform_problem(sigma_t, ratio * sigma_t, q)
    grid = _grid(cells)
    cl = Closures(E=np.full(cells, eddington), B_0=-0.5, B_X=0.5)
    sol = solve_loqd(problem, grid, cl)
    assert np.all(np.isfinite(sol.phi)) and np.all(sol.phi >= 0.0)
    assert balance_residual(sol, problem, grid, cl) < 1e-10
