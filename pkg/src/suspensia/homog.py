"""Epsilon-sweeps: heterogeneous solves vs the two-scale expansion.

The microstructure is an eps-rescaled periodic cell clipped to the unit box.
Errors are measured exactly at the statement level: H1 distance of the
heterogeneous velocity to u_bar + eps * sum_E psi_E(./eps) dE(u_bar), and the
fluid-region L2 distance of the pressures after the optimal constant shift.
"""

from dataclasses import dataclass, field

import numpy as np

from .fields import (
    NOSLIP,
    PressureField,
    StaggeredGrid,
    VelocityField,
    velocity_gradient,
)
from .geometry import clip_to_domain, rasterize_indicator
from .solver import (
    PreconditionError,
    SolverConfig,
    ViscosityField,
    _solve_noslip,
    solve_stokes,
)


@dataclass
class HomogenizationCase:
    cell_geometry: object          # periodic InclusionSet, the unit pattern
    forcing: tuple                 # (fx, fy) callables on the unit box
    epsilon_list: list
    domain_size: float = 1.0
    compact_support: bool = False
    resolution_factor: int = 16    # cells per eps, must be >= 16
    config: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.resolution_factor < 16:
            raise ValueError("resolution must satisfy h <= eps/16")

    def grid_for(self, eps):
        n = self.resolution_factor / eps * (self.domain_size / 1.0)
        n_int = int(round(n))
        if abs(n - n_int) > 1e-9:
            raise ValueError(f"eps {eps} needs non-integer resolution {n}")
        return StaggeredGrid(n_int, self.domain_size, NOSLIP)


def default_forcing():
    """Smooth unit-scale forcing for the sweeps."""
    c = 1.0 / np.pi

    def fx(x, y):
        return c * np.sin(np.pi * x) * np.sin(np.pi * y)

    def fy(x, y):
        return x * (1.0 - x)

    return fx, fy


def solve_heterogeneous(case, eps, grid=None):
    """Stokes flow past the eps-scale suspension in the unit box."""
    if grid is None:
        grid = case.grid_for(eps)
    if grid.h > eps / 16 + 1e-12:
        needed = int(np.ceil(16 * case.domain_size / eps))
        raise PreconditionError(
            f"grid under-resolves the microstructure: need N >= {needed}"
        )
    geo = clip_to_domain(case.cell_geometry, case.domain_size, eps)
    chi = rasterize_indicator(geo, grid)
    mu = ViscosityField(grid, chi, case.config.mu_stiff)
    f = _fluid_forcing(grid, case.forcing, chi)
    u, p, report = solve_stokes(grid, mu, body_force=f, config=case.config)
    return u, p, chi, report


def _fluid_forcing(grid, forcing, chi):
    """Face samples of f zeroed inside inclusions (force-free particles)."""
    fxf, fyf = forcing
    f = VelocityField.from_function(grid, fxf, fyf)
    pad = np.pad(chi, 1, mode="edge")
    chix = 0.5 * (pad[:-1, 1:-1] + pad[1:, 1:-1])   # (n+1, n)
    chiy = 0.5 * (pad[1:-1, :-1] + pad[1:-1, 1:])
    return VelocityField(grid, f.ux * (1.0 - chix), f.uy * (1.0 - chiy),
                         allow_boundary=True)


class _AnisotropicViscosity:
    """Constant coefficients for the homogenized operator.

    The diagonal effective tensor acts through the same stencils as a
    two-constant viscosity: B11 on the center (normal strain) terms, B22 on
    the corner (shear) terms.
    """

    def __init__(self, grid, b11, b22):
        n = grid.n
        self.grid = grid
        self.chi = np.zeros((n, n))
        self.mu_stiff = 1.0
        self.mu_c = np.full((n, n), float(b11))
        self._corner = float(b22)

    def fluid_mask(self):
        return np.ones((self.grid.n, self.grid.n), dtype=bool)

    def mu_corners(self):
        n = self.grid.n
        shape = (n, n) if self.grid.periodic else (n + 1, n + 1)
        return np.full(shape, self._corner)


def solve_homogenized(grid, B_bar, lam, forcing, config=None):
    """Anisotropic constant-coefficient Stokes: -div(2 B D(u)) + grad P = (1-lam) f."""
    config = config or SolverConfig()
    B = np.asarray(B_bar, dtype=float)
    if B.shape != (2, 2):
        raise PreconditionError("effective tensor must be 2x2 in the strain basis")
    if np.linalg.eigvalsh(0.5 * (B + B.T)).min() <= 0:
        raise PreconditionError("effective tensor must be positive definite")
    if abs(B[0, 1]) > 1e-8 * np.abs(B).max():
        raise PreconditionError(
            "off-diagonal effective tensors are not supported by this solver"
        )
    fxf, fyf = forcing
    f = VelocityField.from_function(
        grid,
        lambda x, y: (1.0 - lam) * fxf(x, y),
        lambda x, y: (1.0 - lam) * fyf(x, y),
    )
    mu = _AnisotropicViscosity(grid, B[0, 0], B[1, 1])
    if grid.periodic:
        raise PreconditionError("homogenized problem is posed on a no-slip box")
    u, p, _report = _solve_noslip(grid, mu, f.ux.copy(), f.uy.copy(), None, config)
    return u, p


def _tile_cell_faces(cell_field, grid):
    """Periodic cell face field tiled onto a no-slip macro grid."""
    nc = cell_field.grid.n
    n = grid.n
    reps = n // nc + 2
    ux = np.tile(cell_field.ux, (reps, reps))[: n + 1, :n]
    uy = np.tile(cell_field.uy, (reps, reps))[:n, : n + 1]
    return ux, uy


def _tile_cell_centers(values, grid):
    nc = values.shape[0]
    n = grid.n
    reps = n // nc + 1
    return np.tile(values, (reps, reps))[:n, :n]


def _centers_to_faces(grid, a):
    pad = np.pad(a, 1, mode="edge")
    ax = 0.5 * (pad[:-1, 1:-1] + pad[1:, 1:-1])
    ay = 0.5 * (pad[1:-1, :-1] + pad[1:-1, 1:])
    return ax, ay


def two_scale_expansion(u_bar, correctors, eps):
    """u_bar + eps * sum_E psi_E(./eps) (E : grad u_bar)."""
    grid = u_bar.grid
    _check_commensurate(grid, correctors, eps)
    gu = velocity_gradient(u_bar).values
    ux = u_bar.ux.copy()
    uy = u_bar.uy.copy()
    for E, psi in zip(correctors.basis, correctors.psi):
        dE = np.einsum("kl,ijkl->ij", E, gu)
        dEx, dEy = _centers_to_faces(grid, dE)
        px, py = _tile_cell_faces(psi, grid)
        ux = ux + eps * px * dEx
        uy = uy + eps * py * dEy
    return VelocityField(grid, ux, uy, allow_boundary=True)


def _check_commensurate(grid, correctors, eps):
    cell = correctors.grid
    period_cells = eps * cell.box_size / grid.h
    if abs(period_cells - round(period_cells)) > 1e-9 or round(period_cells) != cell.n:
        raise ValueError(
            "corrector cell grid is incommensurate with the macro grid; "
            f"eps*L/h = {period_cells:.6g} but the cell has {cell.n} cells"
        )


def two_scale_error(u_eps, p_eps, u_bar, p_bar, correctors, eps, b_bar=None,
                    chi=None):
    """Statement-level homogenization errors.

    Returns (H1 velocity error, fluid L2 pressure error after the optimal
    constant shift).
    """
    grid = u_eps.grid
    u2s = two_scale_expansion(u_bar, correctors, eps)
    diff = VelocityField(grid, u_eps.ux - u2s.ux, u_eps.uy - u2s.uy,
                         allow_boundary=True)
    l2 = diff.l2_norm()
    gd = velocity_gradient(diff).values
    h1 = float(np.sqrt(l2**2 + np.sum(gd**2) * grid.h**2))

    gu = velocity_gradient(u_bar).values
    model = p_bar.values.copy()
    if b_bar is not None:
        db = np.einsum("kl,ijkl->ij", 0.5 * (b_bar + b_bar.T), gu)
        model = model + db
    for E, sig in zip(correctors.basis, correctors.sigma):
        dE = np.einsum("kl,ijkl->ij", E, gu)
        model = model + _tile_cell_centers(sig.values, grid) * dE
    if chi is None:
        fluid = np.ones_like(model, dtype=bool)
    else:
        fluid = chi < 0.5
    resid = p_eps.values[fluid] - model[fluid]
    resid = resid - resid.mean()     # optimal constant shift
    p_err = float(np.sqrt(np.sum(resid**2)) * grid.h)
    return h1, p_err


def rate_fit(points):
    """OLS slope of log(error) vs log(eps) with a 95 percent band."""
    pts = [(float(e), float(v)) for e, v in points]
    if len(pts) < 3:
        raise ValueError("rate fit needs at least 3 points")
    if any(e <= 0 or v <= 0 for e, v in pts):
        raise ValueError("rate fit needs positive scales and errors")
    x = np.log([e for e, _ in pts])
    y = np.log([v for _, v in pts])
    A = np.column_stack([x, np.ones_like(x)])
    coef, res, _rank, _sv = np.linalg.lstsq(A, y, rcond=None)
    slope = float(coef[0])
    n = len(pts)
    if n > 2 and res.size:
        s2 = float(res[0]) / (n - 2)
    else:
        s2 = 0.0
    sx = np.sum((x - x.mean()) ** 2)
    band = 1.96 * np.sqrt(s2 / sx) if sx > 0 else 0.0
    return slope, float(band)


class RateReport:
    """Per-epsilon errors plus fitted slopes."""

    def __init__(self, rows, reference_slope):
        # rows: list of dicts with epsilon, h, err_H1, err_pressure
        self.rows = rows
        self.reference_slope = reference_slope
        self.velocity_slope, self.velocity_band = rate_fit(
            [(r["epsilon"], r["err_H1"]) for r in rows]
        )
        self.pressure_slope, self.pressure_band = rate_fit(
            [(r["epsilon"], r["err_pressure"]) for r in rows]
        )

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("epsilon,h,err_H1,err_pressure\n")
            for r in self.rows:
                fh.write(
                    f"{r['epsilon']:.10g},{r['h']:.10g},"
                    f"{r['err_H1']:.10e},{r['err_pressure']:.10e}\n"
                )

    def summary(self):
        return {
            "velocity_slope": self.velocity_slope,
            "velocity_band": self.velocity_band,
            "pressure_slope": self.pressure_slope,
            "pressure_band": self.pressure_band,
            "reference_slope": self.reference_slope,
            "points": len(self.rows),
        }


def compact_support_case(B_bar, lam):
    """Forcing whose homogenized solution vanishes to high order at the walls.

    Stream function sin^4(pi x) sin^4(pi y) gives a divergence-free target
    velocity; the forcing is -div(2 B D(u*)) / (1 - lam) with zero target
    pressure, so boundary layers are suppressed in the sweep.

    Returns (forcing, u_star) as pairs of callables.
    """
    B = np.asarray(B_bar, dtype=float)
    b11, b22 = B[0, 0], B[1, 1]

    def S(t):       # sin^4 and its first three derivatives
        s, c = np.sin(np.pi * t), np.cos(np.pi * t)
        return (
            s**4,
            4 * np.pi * s**3 * c,
            4 * np.pi**2 * s**2 * (3 * c**2 - s**2),
            4 * np.pi**3 * s * c * (6 * c**2 - 10 * s**2),
        )

    def fx(x, y):
        X = S(x)
        Y = S(y)
        return -(2 * b11 * X[2] * Y[1] + b22 * (X[0] * Y[3] - X[2] * Y[1])) / (1 - lam)

    def fy(x, y):
        X = S(x)
        Y = S(y)
        return -(b22 * (X[1] * Y[2] - X[3] * Y[0]) - 2 * b11 * X[1] * Y[2]) / (1 - lam)

    def ux(x, y):
        return S(x)[0] * S(y)[1]

    def uy(x, y):
        return -S(x)[1] * S(y)[0]

    return (fx, fy), (ux, uy)


def run_rate_study(case, correctors_by_eps, effective, progress=None):
    """Full sweep: solve both problems per eps and assemble the report.

    correctors_by_eps: callable eps -> CorrectorSet on the matching cell grid.
    effective: EffectiveTensors from a reference-resolution corrector set.
    """
    rows = []
    for eps in case.epsilon_list:
        grid = case.grid_for(eps)
        cs = correctors_by_eps(eps)
        u_eps, p_eps, chi, _rep = solve_heterogeneous(case, eps, grid)
        u_bar, p_bar = solve_homogenized(
            grid, effective.B_bar, effective.lam, case.forcing, case.config
        )
        h1, perr = two_scale_error(
            u_eps, p_eps, u_bar, p_bar, cs, eps, b_bar=effective.b_bar, chi=chi
        )
        rows.append(
            {"epsilon": eps, "h": grid.h, "err_H1": h1, "err_pressure": perr}
        )
        if progress is not None:
            progress(rows[-1])
    reference = 1.0 if case.compact_support else 0.5
    return RateReport(rows, reference)
