"""Large-scale regularity probes: excess, minimal radius, Lipschitz ratios.

All quantities compare a flow gradient against the family of corrected
affine gradients grad(psi_E) + E over trace-free E, which is the correct
replacement for constants in the suspension's Schauder-type theory.
"""

import numpy as np

from .fields import TensorField, _ball_mask, velocity_gradient
from .geometry import clip_to_domain, rasterize_indicator
from .solver import SolverConfig, ViscosityField, solve_stokes


SKEW = np.array([[0.0, 1.0], [-1.0, 0.0]])


def _tile_centers(values, grid):
    nc = values.shape[0]
    n = grid.n
    if n % nc != 0:
        raise ValueError("corrector cell does not tile the probe grid")
    reps = n // nc
    tile_shape = (reps, reps) + (1,) * (values.ndim - 2)
    return np.tile(values, tile_shape)


def corrected_gradient_family(correctors, grid):
    """[(field, matrix)] spanning the affine family: corrected E's plus skew.

    The corrector cell is tiled onto `grid`; the skew constant needs no
    corrector since rigid rotations solve the cell problem exactly.
    """
    family = []
    for E, psi in zip(correctors.basis, correctors.psi):
        g = velocity_gradient(psi).values + E
        family.append((_tile_centers(g, grid), E))
    ones = np.ones((grid.n, grid.n, 1, 1))
    family.append((SKEW * ones, SKEW))
    return family


def excess(grad_u, correctors, center, radius):
    """inf over trace-free E of the ball average of |grad_u - grad(psi_E) - E|^2.

    Returns (value, minimizing matrix E0).
    """
    if isinstance(grad_u, TensorField):
        grid, h_vals = grad_u.grid, grad_u.values
    else:
        raise TypeError("excess expects a cell-centered TensorField")
    mask = _ball_mask(grid, center, radius)
    m = int(np.count_nonzero(mask))
    if m < 4:
        raise ValueError("degenerate ball: fewer than 4 cells")
    family = corrected_gradient_family(correctors, grid)
    basis_fields = [f[mask].reshape(m, 4) for f, _ in family]
    target = h_vals[mask].reshape(m, 4)
    A = np.stack([b.ravel() for b in basis_fields], axis=1)
    rhs = target.ravel()
    coef, _res, rank, _sv = np.linalg.lstsq(A, rhs, rcond=None)
    if rank < len(family):
        raise ValueError("degenerate ball: affine family is rank-deficient")
    resid = rhs - A @ coef
    value = float(np.mean(np.sum(resid.reshape(m, 4) ** 2, axis=1)))
    E0 = sum(c * mat for c, mat in zip(coef, [mat for _, mat in family]))
    return value, E0


def _extended_corrector_components(correctors):
    """(psi, zeta) stacked per cell center, all basis directions."""
    comps = []
    for psi, zeta in zip(correctors.psi, correctors.zeta):
        uc = psi.at_centers()
        comps.append(uc[..., 0])
        comps.append(uc[..., 1])
        comps.append(zeta.z[..., 0])
        comps.append(zeta.z[..., 1])
    return np.stack(comps, axis=-1)


class MinimalRadiusResult:
    def __init__(self, r_star, interval, censored, curve):
        self.r_star = r_star
        self.interval = interval
        self.censored = censored
        self.curve = curve      # rows (radius, sublinearity q, gamma)

    def gamma(self, R):
        vals = [g for r, _q, g in self.curve if r >= R]
        return max(vals) if vals else float("nan")


def minimal_radius(correctors, C0=16.0, x=None, radii=None):
    """Smallest dyadic R with l^-2 avg |(psi,zeta) - avg|^2 <= 1/C0 beyond it.

    Scans dyadic radii up to half the box; reports the conservative interval
    [l_viol, 2 l_viol] and the gamma_R growth-ratio curve alongside.
    """
    grid = correctors.grid
    if x is None:
        x = (grid.box_size / 2, grid.box_size / 2)
    if radii is None:
        radii = []
        r = 1.0
        while r <= grid.box_size / 2 + 1e-12:
            radii.append(r)
            r *= 2
    if not radii:
        raise ValueError("no radii to scan")
    w = _extended_corrector_components(correctors)
    curve = []
    for r in sorted(radii):
        mask = _ball_mask(grid, x, r)
        sel = w[mask]
        var = float(np.mean(np.sum((sel - sel.mean(axis=0)) ** 2, axis=1)))
        q = var / r**2
        gamma_l = np.sqrt(1.0 + var) / r
        curve.append((r, q, gamma_l))
    # gamma_R is a sup over L >= R: accumulate from the largest radius down
    out = []
    running = 0.0
    for r, q, g in reversed(curve):
        running = max(running, g)
        out.append((r, q, running))
    curve = list(reversed(out))
    violations = [r for r, q, _g in curve if q > 1.0 / C0]
    if not violations:
        r_star = curve[0][0]
        return MinimalRadiusResult(r_star, (r_star, r_star), False, curve)
    worst = max(violations)
    censored = worst >= curve[-1][0]
    return MinimalRadiusResult(2 * worst, (worst, 2 * worst), censored, curve)


def lipschitz_ratio(u, center, radii, R=None):
    """r -> ball-averaged |grad u|^2 over the same average at the top scale."""
    grid = u.grid
    g = velocity_gradient(u).values
    e2 = np.sum(g**2, axis=(-1, -2))
    if R is None:
        R = max(radii)
    top_mask = _ball_mask(grid, center, R)
    denom = float(e2[top_mask].mean())
    rows = []
    for r in sorted(radii):
        if r < 2 * grid.h:
            rows.append((r, np.nan))
            continue
        mask = _ball_mask(grid, center, r)
        rows.append((r, float(e2[mask].mean()) / denom if denom > 0 else 0.0))
    return rows


def nondegeneracy(correctors, center, radii):
    """(avg_{B_r} |grad psi_E + E|^2)^(1/2) / |E| per basis direction."""
    grid = correctors.grid
    out = {}
    for k, (E, psi) in enumerate(zip(correctors.basis, correctors.psi)):
        g = velocity_gradient(psi).values + E
        e2 = np.sum(g**2, axis=(-1, -2))
        norm_E = np.linalg.norm(E)
        rows = []
        for r in sorted(radii):
            mask = _ball_mask(grid, center, r)
            rows.append((r, float(np.sqrt(e2[mask].mean())) / norm_E))
        out[k] = rows
    return out


def free_problem(cell_geometry, periods, cell_resolution, boundary,
                 config=None):
    """Suspension flow with prescribed smooth boundary data, no body force.

    The periodic cell pattern is tiled `periods` times into a no-slip box;
    inclusions touching the wall are dropped, so interior balls see the
    infinite-medium microstructure.  Returns (u, p, chi, grid).
    """
    from .fields import NOSLIP, StaggeredGrid

    config = config or SolverConfig()
    box = periods * cell_geometry.box_size
    grid = StaggeredGrid(periods * cell_resolution, box, NOSLIP)
    geo = clip_to_domain(cell_geometry, box, 1.0)
    chi = rasterize_indicator(geo, grid)
    mu = ViscosityField(grid, chi, config.mu_stiff)
    u, p, _rep = solve_stokes(grid, mu, config=config, boundary=boundary)
    return u, p, chi, grid


class RegularityProbe:
    """Excess / Lipschitz / growth scan of one free solution."""

    def __init__(self, u, correctors, center, radii, C0=16.0, alpha=0.5):
        if not 0 < alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if list(radii) != sorted(radii):
            raise ValueError("radii must be increasing")
        self.center = center
        self.radii = list(radii)
        self.alpha = alpha
        self.C0 = C0
        grad = velocity_gradient(u)
        self.mr = minimal_radius(correctors, C0=C0)
        self.rows = []
        lips = dict(lipschitz_ratio(u, center, self.radii))
        gam = {r: g for r, _q, g in self.mr.curve}
        for r in self.radii:
            try:
                exc, _E0 = excess(grad, correctors, center, r)
            except ValueError:
                exc = np.nan
            self.rows.append((r, exc, lips.get(r, np.nan), gam.get(r, np.nan)))

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("r,excess,lipschitz_ratio,gamma_R\n")
            for r, e, l, g in self.rows:
                fh.write(f"{r:.10g},{e:.10e},{l:.10e},{g:.10e}\n")
            fh.write(f"# r_star,{self.mr.r_star:.10g},censored,{self.mr.censored}\n")
