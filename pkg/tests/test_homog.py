import numpy as np
import pytest

from suspensia.corrector import CorrectorSet
from suspensia.fields import NOSLIP, PERIODIC, StaggeredGrid, VelocityField
from suspensia.homog import (
    HomogenizationCase,
    compact_support_case,
    default_forcing,
    rate_fit,
    solve_heterogeneous,
    solve_homogenized,
    two_scale_error,
    two_scale_expansion,
)
from suspensia.solver import PreconditionError, SolverConfig


def test_case_resolution_guard(lattice_cell):
    with pytest.raises(ValueError):
        HomogenizationCase(lattice_cell, default_forcing(), [0.125],
                           resolution_factor=8)
    case = HomogenizationCase(lattice_cell, default_forcing(), [0.125])
    assert case.grid_for(0.125).n == 128
    with pytest.raises(ValueError):
        case.grid_for(0.13)


def test_heterogeneous_underresolved_rejected(lattice_cell):
    case = HomogenizationCase(lattice_cell, default_forcing(), [1 / 8])
    coarse = StaggeredGrid(64, 1.0, NOSLIP)
    with pytest.raises(PreconditionError):
        solve_heterogeneous(case, 1 / 8, coarse)


def test_homogenized_solver_guards():
    grid = StaggeredGrid(32, 1.0, NOSLIP)
    with pytest.raises(PreconditionError):
        solve_homogenized(grid, -np.eye(2), 0.1, default_forcing())
    with pytest.raises(PreconditionError):
        solve_homogenized(grid, np.array([[2.0, 0.5], [0.5, 1.5]]), 0.1,
                          default_forcing())
    per = StaggeredGrid(32, 1.0, PERIODIC)
    with pytest.raises(PreconditionError):
        solve_homogenized(per, np.eye(2), 0.1, default_forcing())


def test_manufactured_anisotropic_solution():
    # the compact-support construction doubles as an exact solution of the
    # homogenized operator, so the discrete solve must converge at order 2
    B = np.diag([1.7, 1.4])
    lam = 0.2
    forcing, u_star = compact_support_case(B, lam)
    errs = []
    for n in (32, 64):
        grid = StaggeredGrid(n, 1.0, NOSLIP)
        u, _p = solve_homogenized(grid, B, lam, forcing)
        ref = VelocityField.from_function(grid, *u_star)
        errs.append((u - ref).l2_norm())
    assert errs[1] < errs[0] / 3.0
    assert errs[1] < 5e-3


def test_rate_fit_recovers_slope():
    eps = [1 / 8, 1 / 16, 1 / 32, 1 / 64]
    pts = [(e, 3.0 * e**0.55) for e in eps]
    slope, band = rate_fit(pts)
    assert slope == pytest.approx(0.55, abs=1e-12)
    assert band < 1e-10
    with pytest.raises(ValueError):
        rate_fit(pts[:2])
    with pytest.raises(ValueError):
        rate_fit([(e, -1.0) for e in eps])


def test_two_scale_expansion_commensurability(lattice_cell, fast_config):
    cell_grid = StaggeredGrid(32, 4.0, PERIODIC)
    cs = CorrectorSet.compute(cell_grid, lattice_cell, fast_config)
    grid = StaggeredGrid(64, 1.0, NOSLIP)
    u_bar = VelocityField.zeros(grid)
    with pytest.raises(ValueError):
        two_scale_expansion(u_bar, cs, 1 / 16)  # 64 cells/period != 32
    out = two_scale_expansion(u_bar, cs, 1 / 8)
    assert out.l2_norm() == 0.0


def test_small_eps_two_scale_error(lattice_cell):
    # one moderate sweep point end to end
    config = SolverConfig(mu_stiff=1e4)
    eps = 1 / 8
    case = HomogenizationCase(lattice_cell, default_forcing(), [eps],
                              config=config)
    from suspensia.effective import EffectiveTensors

    cell_grid = StaggeredGrid(64, 4.0, PERIODIC)
    cs = CorrectorSet.compute(cell_grid, lattice_cell, config)
    eff = EffectiveTensors(cs)
    grid = case.grid_for(eps)
    u_eps, p_eps, chi, _rep = solve_heterogeneous(case, eps, grid)
    u_bar, p_bar = solve_homogenized(grid, eff.B_bar, eff.lam, case.forcing,
                                     config)
    h1, perr = two_scale_error(u_eps, p_eps, u_bar, p_bar, cs, eps,
                               b_bar=eff.b_bar, chi=chi)
    assert 0 < h1 < 0.02
    assert 0 < perr < 0.05
