import numpy as np
import pytest

from suspensia.corrector import trace_free_sym_basis
from suspensia.solver import SolverConfig
from suspensia.stats import (
    EnsembleSpec,
    corrector_growth,
    rstar_moments,
    variance_scaling,
)


def make_spec(samples=16, intensity=0.04, L_list=(2.0, 4.0, 8.0), seed=1):
    return EnsembleSpec(
        intensity=intensity,
        disk_radius=1.0,
        delta=0.25,
        L_list=list(L_list),
        samples=samples,
        base_seed=seed,
        config=SolverConfig(mu_stiff=1e3),
    )


def test_spec_validation():
    with pytest.raises(ValueError):
        make_spec(samples=8)
    spec = make_spec()
    assert spec.seed_for(3) == 4
    a = spec.sample_geometry(8.0, 0)
    b = spec.sample_geometry(8.0, 0)
    assert np.array_equal(a.centers, b.centers)
    c = spec.sample_geometry(8.0, 1)
    assert len(a) != len(c) or not np.array_equal(a.centers, c.centers)


def test_variance_scaling_needs_three_sizes():
    spec = make_spec(L_list=(4.0, 8.0))
    E = trace_free_sym_basis(2)[0]
    with pytest.raises(ValueError):
        variance_scaling(spec, E)


def test_variance_scaling_degenerate_on_empty_medium():
    # vanishing intensity gives no inclusions, hence zero correctors
    spec = make_spec(intensity=1e-9)
    E = trace_free_sym_basis(2)[0]
    exponent, band, table, degenerate = variance_scaling(spec, E, n_boot=10)
    assert degenerate
    assert exponent is None
    assert all(v == 0.0 for v in table.values())


def test_variance_scaling_negative_exponent():
    spec = make_spec()
    E = trace_free_sym_basis(2)[0]
    exponent, band, table, degenerate = variance_scaling(spec, E, n_boot=50)
    assert not degenerate
    assert exponent < -1.0
    assert band[0] <= exponent <= band[1]
    Ls = sorted(table)
    assert table[Ls[0]] > table[Ls[-1]]


def test_corrector_growth_monotone():
    spec = make_spec()
    E = trace_free_sym_basis(2)[0]
    radii, moments, slope, intercept, r2 = corrector_growth(
        spec, E, box_size=16.0
    )
    assert len(radii) == len(moments)
    assert slope > 0
    assert 0 <= r2 <= 1


def test_rstar_moments_minimum_samples():
    spec = make_spec(samples=16)
    with pytest.raises(ValueError):
        rstar_moments(spec)


def test_rstar_moments_bootstrap():
    spec = make_spec(samples=32, L_list=(2.0, 4.0))
    out = rstar_moments(spec, box_size=8.0, n_boot=40)
    assert set(out["moments"]) == {1, 2, 4}
    for q, (m, (lo, hi)) in out["moments"].items():
        assert np.isfinite(m)
        assert lo <= m <= hi
    assert 0 <= out["censoring_fraction"] <= 1
    assert len(out["values"]) == 32
