"""Desk-scale 2D laboratory for rigid suspensions in steady Stokes flow."""

from .fields import (
    NOSLIP,
    PERIODIC,
    PressureField,
    StaggeredGrid,
    TensorField,
    VelocityField,
    divergence,
    load_field,
    local_average,
    save_field,
    sym_gradient,
    velocity_gradient,
)
from .geometry import (
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
from .corrector import (
    CorrectorSet,
    FluxCorrector,
    FluxField,
    extended_flux,
    flux_corrector,
    geometry_hash,
    rigidity_residual,
    solve_corrector,
    solve_theta,
    trace_free_sym_basis,
)
from .solver import (
    PreconditionError,
    SolverConfig,
    SolverError,
    ViscosityField,
    analytic_stokes_oracle,
    forcing_for_oracle,
    pressure_diagnostic,
    solve_stokes,
)

__version__ = "0.1.0"
