import json

import numpy as np
import pytest

from suspensia.fields import PERIODIC, StaggeredGrid
from suspensia.geometry import (
    GeometryError,
    InclusionSet,
    Shape,
    clip_to_domain,
    gen_matern_hardcore,
    gen_periodic_lattice,
    load_geometry,
    rasterize_indicator,
    save_geometry,
    validate_hardcore,
)

from conftest import single_disk


def test_lattice_count_and_hardcore():
    geo = gen_periodic_lattice(8.0, 4.0, 1.0, 0.25)
    assert len(geo) == 4
    assert validate_hardcore(geo).passed


def test_lattice_rejects_bad_spacing():
    with pytest.raises(GeometryError):
        gen_periodic_lattice(10.0, 4.0, 1.0, 0.25)


def test_lattice_rejects_touching_disks():
    # spacing 4 with radius 1.9 leaves a gap of 0.2 < 2*delta
    with pytest.raises(GeometryError):
        gen_periodic_lattice(8.0, 4.0, 1.9, 0.25)


def test_matern_deterministic_and_hardcore():
    a = gen_matern_hardcore(16.0, 0.05, 1.0, 0.25, seed=11)
    b = gen_matern_hardcore(16.0, 0.05, 1.0, 0.25, seed=11)
    c = gen_matern_hardcore(16.0, 0.05, 1.0, 0.25, seed=12)
    assert np.array_equal(a.centers, b.centers)
    assert len(a) > 0
    assert validate_hardcore(a).passed
    assert not np.array_equal(
        np.sort(a.centers, axis=0), np.sort(c.centers, axis=0)
    ) or len(a) != len(c)


def test_validate_hardcore_flags_overlap():
    geo = InclusionSet(
        centers=np.array([[4.0, 4.0], [5.5, 4.0]]),
        shapes=(Shape("disk", 1.0), Shape("disk", 1.0)),
        delta=0.25,
        box_size=16.0,
        periodic=True,
    )
    report = validate_hardcore(geo)
    assert not report.passed
    assert report.violations[0][:2] == (0, 1)


def test_validate_hardcore_periodic_wrap():
    # disks near opposite walls are close through the periodic boundary
    geo = InclusionSet(
        centers=np.array([[0.5, 4.0], [15.5, 4.0]]),
        shapes=(Shape("disk", 1.0), Shape("disk", 1.0)),
        delta=0.25,
        box_size=16.0,
        periodic=True,
    )
    assert not validate_hardcore(geo).passed


def test_rasterize_area_converges():
    geo = single_disk(8.0, 1.5)
    exact = np.pi * 1.5**2
    errs = []
    for n in (32, 64, 128):
        grid = StaggeredGrid(n, 8.0, PERIODIC)
        chi = rasterize_indicator(geo, grid)
        errs.append(abs(chi.sum() * grid.h**2 - exact))
    assert errs[-1] < 1e-3 * exact
    assert errs[-1] <= errs[0]


def test_rasterize_fraction_bounds():
    geo = single_disk(8.0, 1.5)
    chi = rasterize_indicator(geo, StaggeredGrid(64, 8.0, PERIODIC))
    assert chi.min() >= 0.0 and chi.max() <= 1.0
    # interior cells are fully covered
    assert chi[32, 32] == 1.0


def test_rasterize_box_mismatch():
    geo = single_disk(8.0, 1.5)
    with pytest.raises(GeometryError):
        rasterize_indicator(geo, StaggeredGrid(32, 4.0, PERIODIC))


def test_clip_drops_wall_touching_inclusions():
    cell = gen_periodic_lattice(4.0, 4.0, 1.0, 0.25)
    eps = 0.25
    clipped = clip_to_domain(cell, 1.0, eps)
    assert not clipped.periodic
    assert clipped.box_size == 1.0
    # radii rescale by eps
    assert np.allclose([s.max_radius() for s in clipped.shapes], eps)
    # every disk plus safety margin stays inside the unit box
    r = eps
    for c in clipped.centers:
        assert np.all(c - r > 0) and np.all(c + r < 1)


def test_save_load_roundtrip(tmp_path, lattice_cell):
    path = tmp_path / "geo.json"
    save_geometry(path, lattice_cell)
    back = load_geometry(path)
    assert np.array_equal(back.centers, lattice_cell.centers)
    assert back.box_size == lattice_cell.box_size
    assert back.delta == lattice_cell.delta
    assert back.periodic == lattice_cell.periodic
    with open(path) as fh:
        blob = json.load(fh)
    assert "centers" in blob


def test_smooth_star_shape_checked():
    # large high-frequency perturbation violates the ball conditions
    with pytest.raises(GeometryError):
        Shape("smooth-star", 0.8, star_coeffs=((8, 0.15, 0.0),)).check(0.25)
    shape = Shape("smooth-star", 0.9, star_coeffs=((3, 0.02, 0.0),))
    shape.check(0.25)
    assert shape.max_radius() <= 0.92 + 1e-12
