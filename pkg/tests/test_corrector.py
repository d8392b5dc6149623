import numpy as np
import pytest

from suspensia.corrector import (
    CorrectorSet,
    extended_flux,
    flux_corrector,
    geometry_hash,
    rigidity_residual,
    solve_corrector,
    solve_theta,
    trace_free_sym_basis,
)
from suspensia.fields import PERIODIC, StaggeredGrid, divergence
from suspensia.geometry import rasterize_indicator
from suspensia.solver import SolverConfig, ViscosityField


def test_basis_orthonormal_trace_free():
    basis = trace_free_sym_basis(2)
    assert len(basis) == 2
    for i, E in enumerate(basis):
        assert abs(np.trace(E)) < 1e-15
        assert np.allclose(E, E.T)
        for j, F in enumerate(basis):
            assert np.sum(E * F) == pytest.approx(1.0 if i == j else 0.0)
    with pytest.raises(ValueError):
        trace_free_sym_basis(3)


def test_zero_strain_shortcut(lattice_cell, fast_config):
    grid = StaggeredGrid(32, 4.0, PERIODIC)
    psi, sigma = solve_corrector(grid, lattice_cell, np.zeros((2, 2)),
                                 fast_config)
    assert psi.l2_norm() == 0.0
    assert sigma.l2_norm() == 0.0


def test_corrector_mean_free_and_divergence_free(lattice_cell, fast_config):
    grid = StaggeredGrid(48, 4.0, PERIODIC)
    E = trace_free_sym_basis(2)[1]
    psi, _sigma = solve_corrector(grid, lattice_cell, E, fast_config)
    assert abs(psi.ux.mean()) < 1e-12
    assert abs(psi.uy.mean()) < 1e-12
    assert np.max(np.abs(divergence(psi))) < 1e-7


def test_flux_divergence_small(lattice_cell, fast_config):
    grid = StaggeredGrid(48, 4.0, PERIODIC)
    chi = rasterize_indicator(lattice_cell, grid)
    mu = ViscosityField(grid, chi, fast_config.mu_stiff)
    E = trace_free_sym_basis(2)[0]
    psi, sigma = solve_corrector(grid, lattice_cell, E, fast_config)
    J = extended_flux(psi, sigma, mu, E)
    div = J.divergence_faces()
    assert div.l2_norm() <= 10 * fast_config.rel_tolerance * J.l2_norm()


def test_flux_corrector_skew_and_divergence(lattice_cell, fast_config):
    E = trace_free_sym_basis(2)[0]
    resid = {}
    for n in (32, 64):
        grid = StaggeredGrid(n, 4.0, PERIODIC)
        chi = rasterize_indicator(lattice_cell, grid)
        mu = ViscosityField(grid, chi, fast_config.mu_stiff)
        psi, sigma = solve_corrector(grid, lattice_cell, E, fast_config)
        J = extended_flux(psi, sigma, mu, E)
        zeta = flux_corrector(J)
        vals = zeta.values
        # skew symmetry in the last two indices is exact by construction
        assert np.array_equal(vals[..., 0, 1], -vals[..., 1, 0])
        assert np.all(vals[..., 0, 0] == 0) and np.all(vals[..., 1, 1] == 0)
        mean = J.mean()
        err2 = 0.0
        for i in range(2):
            d = zeta.divergence(i)
            target = np.stack(
                [J.values[..., i, 0] - mean[i, 0],
                 J.values[..., i, 1] - mean[i, 1]], axis=-1
            )
            err2 += np.sum((d - target) ** 2) * grid.h**2
        resid[n] = np.sqrt(err2)
    # the reconstruction error is interface-dominated and shrinks with h
    assert resid[64] < resid[32]


def test_theta_identity_exact(lattice_cell):
    grid = StaggeredGrid(64, 4.0, PERIODIC)
    chi = rasterize_indicator(lattice_cell, grid)
    theta, gamma = solve_theta(grid, chi)
    d = divergence(theta)
    lam = chi.mean()
    assert np.max(np.abs(d - (chi - lam))) < 1e-11
    assert abs(theta.ux.mean()) < 1e-12
    assert abs(gamma.values.mean()) < 1e-12


def test_rigidity_residual_contrast_scaling(lattice_cell):
    grid = StaggeredGrid(48, 4.0, PERIODIC)
    chi = rasterize_indicator(lattice_cell, grid)
    E = trace_free_sym_basis(2)[0]
    res = {}
    for ms in (1e3, 1e5):
        cfg = SolverConfig(mu_stiff=ms)
        psi, _ = solve_corrector(grid, lattice_cell, E, cfg)
        res[ms] = rigidity_residual(psi, E, chi)
    assert res[1e5] < res[1e3] / 5.0


def test_corrector_set_roundtrip(tmp_path, lattice_cell, fast_config):
    grid = StaggeredGrid(32, 4.0, PERIODIC)
    cs = CorrectorSet.compute(grid, lattice_cell, fast_config)
    d = tmp_path / "cell"
    cs.save(d)
    back = CorrectorSet.load(d)
    assert back.lam == cs.lam
    assert back.grid.n == cs.grid.n
    for i in range(2):
        assert np.array_equal(back.psi[i].ux, cs.psi[i].ux)
        assert np.array_equal(back.sigma[i].values, cs.sigma[i].values)
        assert np.array_equal(back.zeta[i].z, cs.zeta[i].z)
        assert np.array_equal(back.mean_flux[i], cs.mean_flux[i])
    assert np.array_equal(back.chi, cs.chi)
    assert geometry_hash(back.geometry) == geometry_hash(cs.geometry)


def test_corrector_set_detects_tampering(tmp_path, lattice_cell, fast_config):
    grid = StaggeredGrid(32, 4.0, PERIODIC)
    cs = CorrectorSet.compute(grid, lattice_cell, fast_config)
    d = tmp_path / "cell"
    cs.save(d)
    geo_file = d / "geometry.json"
    text = geo_file.read_text().replace('"delta": 0.25', '"delta": 0.3')
    geo_file.write_text(text)
    with pytest.raises(ValueError):
        CorrectorSet.load(d)


def test_noslip_grid_rejected(lattice_cell, fast_config):
    from suspensia.fields import NOSLIP

    grid = StaggeredGrid(32, 4.0, NOSLIP)
    with pytest.raises(Exception):
        solve_corrector(grid, lattice_cell, trace_free_sym_basis(2)[0],
                        fast_config)
