import json

import numpy as np
import pytest

from suspensia.corrector import CorrectorSet, trace_free_sym_basis
from suspensia.effective import (
    EffectiveTensors,
    effective_b,
    effective_viscosity,
)
from suspensia.fields import PERIODIC, StaggeredGrid
from suspensia.geometry import InclusionSet, gen_matern_hardcore


def empty_geometry(box):
    return InclusionSet(centers=np.zeros((0, 2)), shapes=(), delta=0.25,
                        box_size=box, periodic=True)


def test_empty_cell_gives_identity(fast_config):
    grid = StaggeredGrid(32, 4.0, PERIODIC)
    cs = CorrectorSet.compute(grid, empty_geometry(4.0), fast_config)
    eff = EffectiveTensors(cs)
    assert np.allclose(eff.B_bar, np.eye(2), atol=1e-6)
    assert np.allclose(eff.b_bar, 0.0, atol=1e-6)
    assert cs.lam == 0.0
    assert not eff.warnings


def test_lattice_cell_tensors(lattice_cell, fast_config):
    grid = StaggeredGrid(64, 4.0, PERIODIC)
    cs = CorrectorSet.compute(grid, lattice_cell, fast_config)
    B = effective_viscosity(cs)
    # symmetric, coercive, and square-lattice symmetry kills the off-diagonal
    assert B[0, 1] == pytest.approx(B[1, 0])
    assert abs(B[0, 1]) < 1e-6
    evals = np.linalg.eigvalsh(B)
    assert evals.min() >= 1.0 - 1e-9
    b, coeffs = effective_b(cs)
    # reflection symmetry of the square lattice forces b to vanish
    assert np.max(np.abs(b)) < 1e-6
    assert abs(np.trace(b)) < 1e-12


def test_coercivity_random_geometry(fast_config):
    grid = StaggeredGrid(48, 8.0, PERIODIC)
    geo = gen_matern_hardcore(8.0, 0.05, 1.0, 0.25, seed=4)
    cs = CorrectorSet.compute(grid, geo, fast_config)
    B = effective_viscosity(cs)
    rng = np.random.default_rng(0)
    basis = trace_free_sym_basis(2)
    for _ in range(10):
        c = rng.standard_normal(2)
        E = c[0] * basis[0] + c[1] * basis[1]
        quad = c @ B @ c
        assert quad >= np.sum(E * E) * (1 - 1e-9)


def test_monotone_in_volume_fraction(fast_config):
    # more rigid material cannot soften the suspension
    grid = StaggeredGrid(48, 4.0, PERIODIC)
    from suspensia.geometry import gen_periodic_lattice

    small = gen_periodic_lattice(4.0, 4.0, 0.6, 0.2)
    large = gen_periodic_lattice(4.0, 4.0, 1.0, 0.2)
    Bs = effective_viscosity(CorrectorSet.compute(grid, small, fast_config))
    Bl = effective_viscosity(CorrectorSet.compute(grid, large, fast_config))
    assert Bl[0, 0] > Bs[0, 0]
    assert Bl[1, 1] > Bs[1, 1]


def test_persistence_roundtrip(tmp_path, lattice_cell, fast_config):
    grid = StaggeredGrid(32, 4.0, PERIODIC)
    cs = CorrectorSet.compute(grid, lattice_cell, fast_config)
    eff = EffectiveTensors(cs)
    path = tmp_path / "eff.json"
    eff.save(path)
    back = EffectiveTensors.load_dict(path)
    assert back["B_bar"] == eff.B_bar.tolist()
    assert back["b_bar"] == eff.b_bar.tolist()
    assert back["lambda"] == eff.lam
    assert back["provenance"]["grid_n"] == 32
    # file is valid sorted-key JSON
    with open(path) as fh:
        assert json.load(fh) == back
