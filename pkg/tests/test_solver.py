import numpy as np
import pytest

from fresnelwave import solver
from fresnelwave.errors import ValidationError


@pytest.fixture(scope="module")
def grid():
    return solver.SpectralGrid(8.0, 32)


@pytest.mark.parametrize("n", [15, 17, 22, 8])
def test_grid_rejects_bad_sizes(n):
    with pytest.raises(ValidationError):
        solver.SpectralGrid(8.0, n)


def test_grid_round_trip(grid):
    f = np.random.default_rng(0).standard_normal((grid.n,) * 3)
    np.testing.assert_allclose(grid.to_frequency(grid.to_physical(f)), f, atol=1e-12)


def test_residual_identity(biaxial, grid):
    J = solver.random_current(grid, np.random.default_rng(0))
    fp = solver.solve_regularized(biaxial, J, 0.05)
    assert solver.residual_check(biaxial, J, fp).passed


def test_effective_symbol_needs_divergence_free_current(biaxial, grid):
    J = solver.random_current(grid, np.random.default_rng(0), project=False)
    full = solver.solve_regularized(biaxial, J, 0.05, project=False)
    assert solver.residual_check(biaxial, J, full, raise_on_violation=False).passed
    eff = solver.solve_regularized(biaxial, J, 0.05, effective=True, project=False)
    assert not solver.residual_check(biaxial, J, eff, raise_on_violation=False).passed


def test_solve_is_linear(biaxial, grid):
    rng = np.random.default_rng(3)
    A, B = solver.random_current(grid, rng), solver.random_current(grid, rng)
    a, b = 0.7 - 0.2j, -1.3
    C = solver.CurrentPair(a * A.Je + b * B.Je, a * A.Jm + b * B.Jm, grid)
    fa, fb, fc = (solver.solve_regularized(biaxial, J, 0.1) for J in (A, B, C))
    np.testing.assert_allclose(fc.E, a * fa.E + b * fb.E, atol=1e-10 * np.abs(fc.E).max())
    np.testing.assert_allclose(fc.H, a * fa.H + b * fb.H, atol=1e-10 * np.abs(fc.H).max())


def test_richardson_is_exact_on_polynomials():
    ds = [0.4, 0.2, 0.1]
    vals = [3.0 - 2 * d + 5 * d**2 for d in ds]
    assert solver.richardson(vals, ds, order=2) == pytest.approx(3.0, abs=1e-12)
    with pytest.raises(ValidationError):
        solver.richardson(vals[:1], ds[:1], order=1)


def test_projection_handles_currents_parallel_to_nodes(biaxial):
    # amplitude (1, 0, 1) is exactly parallel to the nodes (-a, 0, -a); projection leaves only roundoff there
    grid = solver.SpectralGrid(7.482603824872729, 32)
    J = solver.leray_project(solver.GaussianBump((0.0, 1.0, 0.0), 0.3, (1.0, 0.0, 1.0)).on_grid(grid).to_frequency())
    assert J.divergence_residual() < 1e-12
    fp = solver.solve_regularized(biaxial, J, 0.1)
    assert solver.residual_check(biaxial, J, fp).passed
