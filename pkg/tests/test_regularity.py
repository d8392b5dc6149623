import numpy as np
import pytest

from suspensia.corrector import CorrectorSet
from suspensia.fields import PERIODIC, StaggeredGrid, velocity_gradient
from suspensia.regularity import (
    RegularityProbe,
    excess,
    free_problem,
    lipschitz_ratio,
    minimal_radius,
    nondegeneracy,
)
from suspensia.solver import SolverConfig


@pytest.fixture(scope="module")
def cell_correctors():
    from suspensia.geometry import gen_periodic_lattice

    geo = gen_periodic_lattice(4.0, 4.0, 1.0, 0.25)
    grid = StaggeredGrid(32, 4.0, PERIODIC)
    return CorrectorSet.compute(grid, geo, SolverConfig(mu_stiff=1e3))


def test_excess_vanishes_on_family_members(cell_correctors):
    # a corrected affine gradient has zero distance to the affine family
    cs = cell_correctors
    grid = cs.grid
    E = cs.basis[0]
    g = velocity_gradient(cs.psi[0]).values + E
    from suspensia.fields import TensorField

    field = TensorField(grid, g)
    val, E0 = excess(field, cs, (2.0, 2.0), 1.5)
    assert val < 1e-20
    assert np.allclose(E0, E, atol=1e-8)


def test_excess_degenerate_ball_rejected(cell_correctors):
    cs = cell_correctors
    g = velocity_gradient(cs.psi[0]).values
    from suspensia.fields import TensorField

    field = TensorField(cs.grid, g)
    with pytest.raises(ValueError):
        excess(field, cs, (2.0, 2.0), 0.05)


def test_minimal_radius_curve(cell_correctors):
    mr = minimal_radius(cell_correctors)
    radii = [r for r, _q, _g in mr.curve]
    assert radii == sorted(radii)
    # gamma accumulates a sup from above: non-increasing in r
    gammas = [g for _r, _q, g in mr.curve]
    assert all(a >= b - 1e-15 for a, b in zip(gammas, gammas[1:]))
    assert mr.interval[0] <= mr.r_star <= mr.interval[1] + 1e-15


def test_minimal_radius_threshold_extremes(cell_correctors):
    # huge C0 forces violations everywhere; tiny C0 never triggers one
    loose = minimal_radius(cell_correctors, C0=1e-9)
    assert not loose.censored
    assert loose.r_star == loose.curve[0][0]
    tight = minimal_radius(cell_correctors, C0=1e12)
    assert tight.censored


def test_lipschitz_ratio_normalization(cell_correctors):
    cs = cell_correctors
    rows = lipschitz_ratio(cs.psi[0], (2.0, 2.0), [0.5, 1.0, 2.0])
    assert rows[-1][1] == pytest.approx(1.0)
    for _r, v in rows:
        assert np.isnan(v) or v >= 0


def test_nondegeneracy_order_one(cell_correctors):
    # probe a fluid-rich region (the disk sits at the cell center)
    out = nondegeneracy(cell_correctors, (0.0, 0.0), [1.0, 2.0])
    for rows in out.values():
        for _r, v in rows:
            assert 0.2 < v < 5.0


def test_free_problem_and_probe(tmp_path, cell_correctors):
    cs = cell_correctors
    bnd = (lambda x, y: 0.1 * y, lambda x, y: 0.1 * x)  # pure shear data
    u, p, chi, grid = free_problem(cs.geometry, 2, 32, bnd,
                                   SolverConfig(mu_stiff=1e3))
    assert grid.n == 64
    assert not grid.periodic
    # wall-touching inclusions were dropped but the interior kept some
    assert chi.max() > 0.99
    probe = RegularityProbe(u, cs, (4.0, 4.0), [1.0, 2.0, 4.0])
    assert len(probe.rows) == 3
    path = tmp_path / "probe.csv"
    probe.to_csv(path)
    text = path.read_text()
    assert text.startswith("r,excess,lipschitz_ratio,gamma_R")
    assert "r_star" in text


def test_probe_rejects_bad_inputs(cell_correctors):
    cs = cell_correctors
    u = cs.psi[0]
    with pytest.raises(ValueError):
        RegularityProbe(u, cs, (2.0, 2.0), [2.0, 1.0])
    with pytest.raises(ValueError):
        RegularityProbe(u, cs, (2.0, 2.0), [1.0, 2.0], alpha=1.5)
