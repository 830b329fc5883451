"""Independent reference computations used by the test suite.

Everything here is coded straight from the governing equations with no
imports from the package under test, so agreement between the two routes
is evidence rather than tautology.
"""
import math

import numpy as np


def dense_tridiagonal_solve(sub, diag, sup, rhs):
    """Solve a tridiagonal system by dense LU (numpy), as a solver oracle."""
    n = len(diag)
    a = np.zeros((n, n))
    for i in range(n):
        a[i, i] = diag[i]
        if i > 0:
            a[i, i - 1] = sub[i]
        if i < n - 1:
            a[i, i + 1] = sup[i]
    return np.linalg.solve(a, np.asarray(rhs, dtype=float))


def diffusion_slab_reference(sigma_t, sigma_a, q, length):
    """Closed form for -D phi'' + sigma_a phi = q with D = 1/(3 sigma_t)
    and Marshak-like conditions J(0) = -phi(0)/2, J(X) = +phi(X)/2 where
    J = -D phi'.

    The general solution is phi = q/sigma_a + A cosh(kappa (x - X/2)) with
    kappa = sqrt(3 sigma_t sigma_a); symmetry leaves one constant, fixed by
    the boundary condition at x = X:

        -D A kappa sinh(kappa X/2) = (q/sigma_a + A cosh(kappa X/2)) / 2
        A = -(q/sigma_a) / (2 D kappa sinh(kappa X/2) + cosh(kappa X/2))

    Returns (pointwise callable, exact-cell-average callable).
    """
    diff = 1.0 / (3.0 * sigma_t)
    kappa = math.sqrt(3.0 * sigma_t * sigma_a)
    particular = q / sigma_a
    amp = -particular / (
        2.0 * diff * kappa * math.sinh(kappa * length / 2.0)
        + math.cosh(kappa * length / 2.0)
    )

    def pointwise(x):
        return particular + amp * np.cosh(kappa * (np.asarray(x) - length / 2.0))

    def cell_average(edges):
        lo = np.asarray(edges)[:-1]
        hi = np.asarray(edges)[1:]
        anti = lambda x: np.sinh(kappa * (x - length / 2.0)) / kappa
        return particular + amp * (anti(hi) - anti(lo)) / (hi - lo)

    return pointwise, cell_average


# Manufactured problem: phi*(x) = sin(pi x) + 1 on [0, 1] with uniform
# material data below and the isotropic closure E = 1/3.  Substituting into
#   -d/dx[(E/sigma_t) phi'] + sigma_a phi = Q
# gives Q*(x) = (E pi^2/sigma_t) sin(pi x) + sigma_a (sin(pi x) + 1), and the
# exact exiting-current ratios at the faces are
#   J(x) = -(E/sigma_t) phi*'(x) = -(pi/6) cos(pi x)
#   B0* = J(0)/phi*(0) = -pi/6,  BX* = J(1)/phi*(1) = +pi/6.
MMS_SIGMA_T = 2.0
MMS_SIGMA_A = 0.5
MMS_SIGMA_S = MMS_SIGMA_T - MMS_SIGMA_A
MMS_B0 = -math.pi / 6.0
MMS_BX = math.pi / 6.0


def _sin_cell_average(edges):
    lo = np.asarray(edges)[:-1]
    hi = np.asarray(edges)[1:]
    return (np.cos(np.pi * lo) - np.cos(np.pi * hi)) / (np.pi * (hi - lo))


def mms_exact_cell_average(edges):
    return 1.0 + _sin_cell_average(edges)


def mms_source_cell_average(edges):
    amp = (1.0 / 3.0) * np.pi**2 / MMS_SIGMA_T + MMS_SIGMA_A
    return amp * _sin_cell_average(edges) + MMS_SIGMA_A


def sn_absorber_boundary_currents(sigma_t, q, length, n_angles=64, n_cells=8192):
    """Exiting partial currents (J_left, J_right) of a uniform pure
    absorber with isotropic source q and vacuum faces, by a fine
    discrete-ordinates diamond-difference sweep.

    No scattering means a single sweep per direction suffices: for mu > 0
    march left to right with
        mu (psi_out - psi_in)/dx + sigma_t (psi_in + psi_out)/2 = q/2.
    Half-range Gauss-Legendre nodes (n_angles per hemisphere) keep the
    quadrature clear of the mu = 0 boundary layer; the problem is mirror
    symmetric, so one sweep serves both faces.
    """
    nodes, weights = np.polynomial.legendre.leggauss(n_angles)
    mu = 0.5 * (nodes + 1.0)
    wt = 0.5 * weights
    k = mu / (length / n_cells)
    psi = np.zeros(n_angles)  # vacuum inflow
    for _ in range(n_cells):
        psi = (0.5 * q + (k - 0.5 * sigma_t) * psi) / (k + 0.5 * sigma_t)
    exit_current = float(np.sum(wt * mu * psi))
    return exit_current, exit_current


def absorber_exit_current_closed_form(sigma_t, q, length):
    """Same quantity as the sweep, from the exponential-integral identity

        J(X) = int_0^1 mu (q/2Sigma_t)(1 - exp(-Sigma_t X/mu)) dmu
             = (q / (2 sigma_t)) * (1/2 - E_3(sigma_t X))

    obtained by integrating the uncollided angular flux over exiting
    directions. Used to validate the sweep oracle itself.
    """
    from scipy.special import expn

    return (q / (2.0 * sigma_t)) * (0.5 - expn(3, sigma_t * length))
