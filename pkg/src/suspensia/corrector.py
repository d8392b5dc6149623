"""Cell problems on the torus: correctors, extended fluxes, flux correctors.

The corrector pair (psi, Sigma) makes psi + Ex an admissible flow for the
suspension at imposed mean strain E.  Rigid inclusions are approximated by a
stiff viscosity; the stiffness residual inside the inclusions decays like
1/mu_stiff and is measurable with rigidity_residual below.
"""

import hashlib
import json
import os

import numpy as np

from .fields import (
    PressureField,
    StaggeredGrid,
    TensorField,
    VelocityField,
    divergence,
    load_field,
    save_field,
)
from .geometry import InclusionSet, load_geometry, rasterize_indicator, save_geometry
from .solver import (
    PreconditionError,
    SolverConfig,
    ViscosityField,
    _solve_periodic,
)


def trace_free_sym_basis(d):
    """Orthonormal (Frobenius) basis of trace-free symmetric d x d matrices."""
    if d != 2:
        raise ValueError("only dimension 2 is supported")
    s = 1.0 / np.sqrt(2.0)
    return [
        np.array([[s, 0.0], [0.0, -s]]),
        np.array([[0.0, s], [s, 0.0]]),
    ]


def _affine_strain_load(grid, mu, E):
    """Discrete div(2 mu E) for constant E, using the solver's own stencils.

    Diagonal stresses live at cell centers, the shear stress at corners with
    the harmonic-mean viscosity, so the corrector momentum equation closes
    exactly against the variable-coefficient operator.
    """
    h = grid.h
    txx = 2.0 * mu.mu_c * E[0, 0]
    tyy = 2.0 * mu.mu_c * E[1, 1]
    txy = 2.0 * mu.mu_corners() * E[0, 1]
    bx = (txx - np.roll(txx, 1, 0)) / h + (np.roll(txy, -1, 1) - txy) / h
    by = (tyy - np.roll(tyy, 1, 1)) / h + (np.roll(txy, -1, 0) - txy) / h
    return bx, by


def solve_corrector(grid, geometry, E, config=None):
    """Solve the periodic cell problem at imposed mean strain E.

    Returns (psi, sigma): mean-free velocity corrector and fluid-anchored
    pressure.  Only the symmetric part of E matters.
    """
    config = config or SolverConfig()
    if not grid.periodic:
        raise PreconditionError("corrector cell problems require a periodic grid")
    E = np.asarray(E, dtype=float)
    if E.shape != (2, 2):
        raise PreconditionError("strain direction must be a 2x2 matrix")
    scale = max(np.abs(E).max(), 1e-300)
    if abs(E[0, 0] + E[1, 1]) > 1e-12 * scale:
        raise PreconditionError("strain direction must be trace-free")
    Es = 0.5 * (E + E.T)
    chi = rasterize_indicator(geometry, grid)
    mu = ViscosityField(grid, chi, config.mu_stiff)
    if np.abs(Es).max() == 0.0:
        return VelocityField.zeros(grid), PressureField.zeros(grid)
    bx, by = _affine_strain_load(grid, mu, Es)
    # converge on the stress scale, not the (mu_stiff-inflated) load scale,
    # so that div J_E inherits the configured tolerance; 2|E| L lower-bounds
    # the flux norm through <J_E> : E >= 2|E|^2
    flux_floor = 2.0 * np.linalg.norm(Es) * grid.box_size
    target = config.rel_tolerance * flux_floor / grid.h
    psi, sigma, _report = _solve_periodic(grid, mu, bx, by, None, config,
                                          abs_tolerance=target)
    return psi, sigma


class FluxField(TensorField):
    """Extended flux with its native staggered components retained.

    The cell-centered values interpolate the shear component from corners;
    the staggered arrays are what the discrete divergence identity holds on.
    """

    def __init__(self, grid, jxx, jyy, jxy_corners):
        self.jxx = jxx
        self.jyy = jyy
        self.jxy = jxy_corners
        ctr = 0.25 * (
            jxy_corners
            + np.roll(jxy_corners, -1, 0)
            + np.roll(jxy_corners, -1, 1)
            + np.roll(np.roll(jxy_corners, -1, 0), -1, 1)
        )
        vals = np.empty((grid.n, grid.n, 2, 2))
        vals[..., 0, 0] = jxx
        vals[..., 1, 1] = jyy
        vals[..., 0, 1] = ctr
        vals[..., 1, 0] = ctr
        super().__init__(grid, vals)

    def divergence_faces(self):
        """Row-wise discrete divergence of the flux, sampled on faces."""
        h = self.grid.h
        dx = (self.jxx - np.roll(self.jxx, 1, 0)) / h + (
            np.roll(self.jxy, -1, 1) - self.jxy
        ) / h
        dy = (self.jyy - np.roll(self.jyy, 1, 1)) / h + (
            np.roll(self.jxy, -1, 0) - self.jxy
        ) / h
        return VelocityField(self.grid, dx, dy)


def extended_flux(psi, sigma, mu, E):
    """J = 2 mu (D(psi) + E) - Sigma Id on the staggered grid.

    Divergence-free to solver tolerance by the momentum equation; inside the
    inclusions the stiff-viscosity stress stands in for the rigid extension.
    """
    grid = psi.grid
    if not grid.periodic:
        raise PreconditionError("extended flux is defined on the periodic cell")
    h = grid.h
    E = 0.5 * (np.asarray(E, dtype=float) + np.asarray(E, dtype=float).T)
    ux, uy = psi.ux, psi.uy
    dxux = (np.roll(ux, -1, 0) - ux) / h
    dyuy = (np.roll(uy, -1, 1) - uy) / h
    jxx = 2.0 * mu.mu_c * (dxux + E[0, 0]) - sigma.values
    jyy = 2.0 * mu.mu_c * (dyuy + E[1, 1]) - sigma.values
    shear = (ux - np.roll(ux, 1, 1)) / h + (uy - np.roll(uy, 1, 0)) / h
    jxy = mu.mu_corners() * (shear + 2.0 * E[0, 1])
    return FluxField(grid, jxx, jyy, jxy)


class FluxCorrector:
    """Vector potential for the flux fluctuation, skew in its last two slots.

    In 2D each row i carries one scalar z_i = zeta[i,0,1]; the full rank-3
    array is expanded on demand so the skew symmetry is exact by storage.
    """

    def __init__(self, grid, z):
        if z.shape != (grid.n, grid.n, 2):
            raise ValueError("flux corrector expects two scalar components")
        self.grid = grid
        self.z = z

    @property
    def values(self):
        n = self.grid.n
        vals = np.zeros((n, n, 2, 2, 2))
        vals[..., 0, 1] = self.z
        vals[..., 1, 0] = -self.z
        return vals

    def component(self, i, j, k):
        if j == k:
            return np.zeros((self.grid.n, self.grid.n))
        sgn = 1.0 if (j, k) == (0, 1) else -1.0
        return sgn * self.z[..., i]

    def divergence(self, i):
        """Spectral div of row i; approximates J_i - <J_i> to O(h)."""
        kx, ky = _wavenumbers(self.grid)
        zh = np.fft.fft2(self.z[..., i])
        dx = np.real(np.fft.ifft2(1j * kx * zh))
        dy = np.real(np.fft.ifft2(1j * ky * zh))
        # (div zeta_i)_j = sum_k d_k zeta_{ijk}
        return np.stack([dy, -dx], axis=-1)

    def l2_norm(self):
        return float(np.sqrt(2.0 * np.sum(self.z**2)) * self.grid.h)


def _wavenumbers(grid):
    k = 2.0 * np.pi * np.fft.fftfreq(grid.n, d=grid.h)
    return k[:, None], k[None, :]


def flux_corrector(flux, mean_flux=None):
    """Coulomb-gauge potential zeta with -lap zeta_{ijk} = d_j J_ik - d_k J_ij.

    Solved spectrally on cell centers; the zero mode is dropped (zero-mean
    gauge), so the supplied mean flux only matters for the caller's records.
    """
    grid = flux.grid
    if not grid.periodic:
        raise PreconditionError("flux corrector requires a periodic grid")
    kx, ky = _wavenumbers(grid)
    k2 = kx**2 + ky**2
    inv = np.zeros_like(k2)
    inv[k2 > 0] = 1.0 / k2[k2 > 0]
    z = np.empty((grid.n, grid.n, 2))
    vals = flux.values
    for i in range(2):
        ji0 = np.fft.fft2(vals[..., i, 0])
        ji1 = np.fft.fft2(vals[..., i, 1])
        # z_i = zeta_{i,0,1}: -lap z = d_0 J_i1 - d_1 J_i0
        zh = (1j * kx * ji1 - 1j * ky * ji0) * inv
        zh[0, 0] = 0.0
        z[..., i] = np.real(np.fft.ifft2(zh))
    return FluxCorrector(grid, z)


def solve_theta(grid, indicator):
    """Indicator corrector theta = grad(gamma) with lap gamma = chi - mean.

    Uses the compatible five-point symbol, so the native face divergence of
    theta reproduces chi - lambda to round-off.
    """
    from .solver import _PeriodicOps

    if not grid.periodic:
        raise PreconditionError("theta corrector requires a periodic grid")
    chi = np.asarray(indicator, dtype=float)
    if chi.shape != (grid.n, grid.n):
        raise ValueError("indicator shape does not match grid")
    lam = float(chi.mean())
    ops = _PeriodicOps(grid)
    gamma = ops.solve_poisson(chi - lam)
    # face x_i sits between cells i-1 and i: backward difference
    gx = (gamma - np.roll(gamma, 1, 0)) / grid.h
    gy = (gamma - np.roll(gamma, 1, 1)) / grid.h
    theta = VelocityField(grid, gx, gy)
    return theta, PressureField(grid, gamma)


def rigidity_residual(psi, E, chi):
    """L2 norm of D(psi + Ex) over fully covered inclusion cells.

    Strains are measured at their native staggered locations; cells and
    corners touching the interface are excluded since the indicator is only
    resolved to one cell there.
    """
    grid = psi.grid
    h = grid.h
    E = 0.5 * (np.asarray(E, dtype=float) + np.asarray(E, dtype=float).T)
    inside = chi >= 1.0
    sxx = (np.roll(psi.ux, -1, 0) - psi.ux) / h + E[0, 0]
    syy = (np.roll(psi.uy, -1, 1) - psi.uy) / h + E[1, 1]
    sxy = 0.5 * (
        (psi.ux - np.roll(psi.ux, 1, 1)) / h + (psi.uy - np.roll(psi.uy, 1, 0)) / h
    ) + E[0, 1]
    corner_in = (
        inside
        & np.roll(inside, 1, 0)
        & np.roll(inside, 1, 1)
        & np.roll(np.roll(inside, 1, 0), 1, 1)
    )
    total = (
        np.sum(sxx[inside] ** 2)
        + np.sum(syy[inside] ** 2)
        + 2.0 * np.sum(sxy[corner_in] ** 2)
    )
    return float(np.sqrt(total) * h)


class CorrectorSet:
    """All cell-problem outputs for one geometry, immutable once built."""

    def __init__(self, grid, geometry, basis, psi, sigma, flux, zeta, theta,
                 gamma, lam, mean_flux, chi, config):
        self.grid = grid
        self.geometry = geometry
        self.basis = basis
        self.psi = psi
        self.sigma = sigma
        self.flux = flux
        self.zeta = zeta
        self.theta = theta
        self.gamma = gamma
        self.lam = lam
        self.mean_flux = mean_flux
        self.chi = chi
        self.config = config

    @classmethod
    def compute(cls, grid, geometry, config=None):
        config = config or SolverConfig()
        chi = rasterize_indicator(geometry, grid)
        mu = ViscosityField(grid, chi, config.mu_stiff)
        basis = trace_free_sym_basis(2)
        psi, sigma, flux, zeta, mean_flux = [], [], [], [], []
        for E in basis:
            ps, sg = solve_corrector(grid, geometry, E, config)
            J = extended_flux(ps, sg, mu, E)
            psi.append(ps)
            sigma.append(sg)
            flux.append(J)
            zeta.append(flux_corrector(J))
            mean_flux.append(J.mean())
        theta, gamma = solve_theta(grid, chi)
        return cls(grid, geometry, basis, psi, sigma, flux, zeta, theta,
                   gamma, float(chi.mean()), mean_flux, chi, config)

    def save(self, directory):
        os.makedirs(directory, exist_ok=True)
        save_geometry(os.path.join(directory, "geometry.json"), self.geometry)
        for i in range(len(self.basis)):
            save_field(os.path.join(directory, f"psi{i}.fld"),
                       np.stack([self.psi[i].ux, self.psi[i].uy], axis=-1))
            save_field(os.path.join(directory, f"sigma{i}.fld"), self.sigma[i].values)
            save_field(os.path.join(directory, f"flux{i}.fld"),
                       np.stack([self.flux[i].jxx, self.flux[i].jyy,
                                 self.flux[i].jxy], axis=-1))
            save_field(os.path.join(directory, f"zeta{i}.fld"), self.zeta[i].z)
        save_field(os.path.join(directory, "theta.fld"),
                   np.stack([self.theta.ux, self.theta.uy], axis=-1))
        save_field(os.path.join(directory, "gamma.fld"), self.gamma.values)
        save_field(os.path.join(directory, "chi.fld"), self.chi)
        manifest = {
            "grid": {"n": self.grid.n, "box_size": self.grid.box_size,
                     "boundary": self.grid.boundary},
            "geometry_hash": geometry_hash(self.geometry),
            "mu_stiff": self.config.mu_stiff,
            "rel_tolerance": self.config.rel_tolerance,
            "lambda": self.lam,
            "basis": [E.tolist() for E in self.basis],
            "mean_flux": [m.tolist() for m in self.mean_flux],
        }
        with open(os.path.join(directory, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=1, sort_keys=True)

    @classmethod
    def load(cls, directory):
        with open(os.path.join(directory, "manifest.json")) as fh:
            manifest = json.load(fh)
        g = manifest["grid"]
        grid = StaggeredGrid(g["n"], g["box_size"], g["boundary"])
        geometry = load_geometry(os.path.join(directory, "geometry.json"))
        if geometry_hash(geometry) != manifest["geometry_hash"]:
            raise ValueError("corrector set geometry does not match its manifest")
        config = SolverConfig(rel_tolerance=manifest["rel_tolerance"],
                              mu_stiff=manifest["mu_stiff"])
        basis = [np.asarray(E, dtype=float) for E in manifest["basis"]]
        psi, sigma, flux, zeta = [], [], [], []
        for i in range(len(basis)):
            uv = load_field(os.path.join(directory, f"psi{i}.fld"))
            psi.append(VelocityField(grid, uv[..., 0], uv[..., 1]))
            sigma.append(PressureField(grid, load_field(
                os.path.join(directory, f"sigma{i}.fld"))))
            jv = load_field(os.path.join(directory, f"flux{i}.fld"))
            flux.append(FluxField(grid, jv[..., 0], jv[..., 1], jv[..., 2]))
            zeta.append(FluxCorrector(grid, load_field(
                os.path.join(directory, f"zeta{i}.fld"))))
        tv = load_field(os.path.join(directory, "theta.fld"))
        theta = VelocityField(grid, tv[..., 0], tv[..., 1])
        gamma = PressureField(grid, load_field(os.path.join(directory, "gamma.fld")))
        chi = load_field(os.path.join(directory, "chi.fld"))
        mean_flux = [np.asarray(m, dtype=float) for m in manifest["mean_flux"]]
        return cls(grid, geometry, basis, psi, sigma, flux, zeta, theta,
                   gamma, manifest["lambda"], mean_flux, chi, config)


def geometry_hash(geometry):
    blob = json.dumps(geometry.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()
