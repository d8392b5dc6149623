"""Variable-viscosity Stokes saddle-point solver on MAC grids.

Rigid inclusions are realized in the stiff-viscosity limit: the viscosity is
mu = 1 + (mu_stiff - 1) * chi with chi the rasterized inclusion fraction, so
that D(u) is driven to zero inside the inclusions as mu_stiff grows.

Periodic boxes are solved matrix-free by conjugate gradients on the
divergence-free subspace (discrete Leray projection, exact on the torus),
preconditioned by the spectrally inverted constant-coefficient Stokes
operator.  No-slip boxes are assembled sparse and factored directly.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fields import (
    NOSLIP,
    PERIODIC,
    PressureField,
    StaggeredGrid,
    VelocityField,
    divergence,
    grad_pressure,
    velocity_gradient,
)


class SolverError(RuntimeError):
    """Non-convergence; carries the residual history."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history or []


class PreconditionError(ValueError):
    pass


@dataclass
class SolverConfig:
    rel_tolerance: float = 1e-8
    max_iterations: int = 50000
    mu_stiff: float = 1e4
    preconditioner: str = "spectral"  # or "none"

    def __post_init__(self):
        if not (0 < self.rel_tolerance <= 1e-4):
            raise ValueError("rel_tolerance must lie in (0, 1e-4]")
        if self.mu_stiff < 1e2:
            raise ValueError("mu_stiff must be at least 1e2")
        if self.preconditioner not in ("spectral", "none"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")


class ViscosityField:
    """mu(x) = 1 + (mu_stiff - 1) * chi(x) from a rasterized indicator."""

    def __init__(self, grid, chi, mu_stiff):
        chi = np.asarray(chi, dtype=float)
        if chi.shape != (grid.n, grid.n):
            raise ValueError("indicator shape does not match grid")
        if chi.min() < 0 or chi.max() > 1:
            raise ValueError("indicator values must lie in [0, 1]")
        if mu_stiff < 1e2:
            raise ValueError("mu_stiff must be at least 1e2")
        self.grid = grid
        self.chi = chi
        self.mu_stiff = float(mu_stiff)
        self.mu_c = 1.0 + (self.mu_stiff - 1.0) * chi

    @classmethod
    def uniform(cls, grid, mu_stiff=1e4):
        return cls(grid, np.zeros((grid.n, grid.n)), mu_stiff)

    def fluid_mask(self):
        return self.chi < 0.5

    def mu_corners(self):
        """Harmonic average of the (up to) four cells meeting at each corner."""
        inv = 1.0 / self.mu_c
        if self.grid.periodic:
            s = inv + np.roll(inv, 1, 0) + np.roll(inv, 1, 1) + np.roll(np.roll(inv, 1, 0), 1, 1)
            return 4.0 / s
        pad = np.pad(inv, 1, mode="edge")
        s = pad[:-1, :-1] + pad[1:, :-1] + pad[:-1, 1:] + pad[1:, 1:]
        return 4.0 / s


@dataclass
class ResidualReport:
    converged: bool
    iterations: int
    momentum_residual: float
    divergence_residual: float
    history: list = field(default_factory=list)  # (iter, momentum, divergence)

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("iteration,momentum_residual,divergence_residual\n")
            for it, rm, rd in self.history:
                fh.write(f"{it},{rm:.6e},{rd:.6e}\n")


# ---------------------------------------------------------------------------
# periodic spectral machinery


class _PeriodicOps:
    """Roll-based MAC operators plus spectral inverses on the torus."""

    def __init__(self, grid):
        self.grid = grid
        n, h = grid.n, grid.h
        k = np.arange(n)
        s2 = np.sin(np.pi * k / n) ** 2
        # symbol of the compatible five-point Laplacian (negative semidefinite)
        self.lam = -(4.0 / h**2) * (s2[:, None] + s2[None, : n // 2 + 1])
        self.lam_inv = np.zeros_like(self.lam)
        nz = self.lam != 0
        self.lam_inv[nz] = 1.0 / self.lam[nz]

    def solve_poisson(self, rhs, zero_mean=True):
        """Solve five-point Laplacian lap(phi) = rhs; rhs must have zero mean."""
        rhat = np.fft.rfft2(rhs)
        rhat *= self.lam_inv
        if zero_mean:
            rhat[0, 0] = 0.0
        return np.fft.irfft2(rhat, s=rhs.shape)

    def div(self, ux, uy):
        h = self.grid.h
        return (np.roll(ux, -1, 0) - ux) / h + (np.roll(uy, -1, 1) - uy) / h

    def grad(self, p):
        h = self.grid.h
        return (p - np.roll(p, 1, 0)) / h, (p - np.roll(p, 1, 1)) / h

    def project(self, ux, uy):
        """Discrete Leray projection onto zero-mean divergence-free fields."""
        d = self.div(ux, uy)
        phi = self.solve_poisson(d)
        gx, gy = self.grad(phi)
        px = ux - gx
        py = uy - gy
        return px - px.mean(), py - py.mean()

    def inv_laplace_faces(self, rx, ry):
        """Componentwise (-lap)^{-1} on the face grids (zero mode dropped)."""
        zx = -self.solve_poisson(rx)
        zy = -self.solve_poisson(ry)
        return zx, zy


def apply_stress_divergence(grid, mu_c, mu_n, ux, uy):
    """Return -div(2 mu D(u)) on the faces of a periodic MAC grid."""
    h = grid.h
    txx = 2.0 * mu_c * (np.roll(ux, -1, 0) - ux) / h
    tyy = 2.0 * mu_c * (np.roll(uy, -1, 1) - uy) / h
    txy = mu_n * ((ux - np.roll(ux, 1, 1)) / h + (uy - np.roll(uy, 1, 0)) / h)
    ax = -((txx - np.roll(txx, 1, 0)) / h + (np.roll(txy, -1, 1) - txy) / h)
    ay = -((tyy - np.roll(tyy, 1, 1)) / h + (np.roll(txy, -1, 0) - txy) / h)
    return ax, ay


def stress_load_faces(grid, g_vals):
    """Energy-consistent discrete div(g) on periodic faces, g at centers."""
    h = grid.h
    gxx = g_vals[..., 0, 0]
    gyy = g_vals[..., 1, 1]
    # off-diagonal components interpolated to corners
    def to_corners(a):
        return 0.25 * (a + np.roll(a, 1, 0) + np.roll(a, 1, 1) + np.roll(np.roll(a, 1, 0), 1, 1))

    gxy = to_corners(g_vals[..., 0, 1])
    gyx = to_corners(g_vals[..., 1, 0])
    bx = (gxx - np.roll(gxx, 1, 0)) / h + (np.roll(gxy, -1, 1) - gxy) / h
    by = (gyy - np.roll(gyy, 1, 1)) / h + (np.roll(gyx, -1, 0) - gyx) / h
    return bx, by


def _solve_periodic(grid, mu, fx, fy, g_vals, config, abs_tolerance=None):
    ops = _PeriodicOps(grid)
    h = grid.h
    mu_c = mu.mu_c
    mu_n = mu.mu_corners()

    scale = max(abs(fx).max(initial=0.0), abs(fy).max(initial=0.0), 1e-300)
    if abs(fx.mean()) > 1e-10 * scale or abs(fy.mean()) > 1e-10 * scale:
        raise PreconditionError("periodic forcing must have zero mean per component")

    bx, by = fx.copy(), fy.copy()
    if g_vals is not None:
        gx, gy = stress_load_faces(grid, g_vals)
        bx += gx
        by += gy
    bx0, by0 = bx.copy(), by.copy()  # unprojected rhs, for pressure recovery
    bx, by = ops.project(bx, by)

    bnorm = np.sqrt(np.sum(bx**2) + np.sum(by**2))
    history = []
    n = grid.n
    ux = np.zeros((n, n))
    uy = np.zeros((n, n))
    b0norm = np.sqrt(np.sum(bx0**2) + np.sum(by0**2))
    if bnorm <= 1e-13 * b0norm or b0norm == 0.0:
        # pure-gradient (or zero) load: u = 0 and the pressure absorbs it
        d = ops.div(bx0, by0)
        p_vals = ops.solve_poisson(d)
        fluid = mu.fluid_mask()
        if fluid.any():
            p_vals = p_vals - p_vals[fluid].mean()
        u = VelocityField(grid, ux, uy)
        report = ResidualReport(True, 0, 0.0, 0.0, [])
        return u, PressureField(grid, p_vals), report

    use_prec = config.preconditioner == "spectral"

    def precond(rx, ry):
        if not use_prec:
            return rx, ry
        zx, zy = ops.inv_laplace_faces(rx, ry)
        return ops.project(zx, zy)

    rx, ry = bx.copy(), by.copy()
    zx, zy = precond(rx, ry)
    px_, py_ = zx.copy(), zy.copy()
    rz = np.sum(rx * zx) + np.sum(ry * zy)
    tol = config.rel_tolerance * bnorm
    if abs_tolerance is not None:
        # stiff loads inflate bnorm by mu_stiff; callers that need the
        # momentum residual small on the stress scale pass an absolute target
        tol = min(tol, abs_tolerance)
    it = 0
    rnorm = bnorm
    while it < config.max_iterations:
        ax, ay = apply_stress_divergence(grid, mu_c, mu_n, px_, py_)
        ax, ay = ops.project(ax, ay)
        pap = np.sum(px_ * ax) + np.sum(py_ * ay)
        if pap <= 0:
            raise SolverError("operator lost positivity (round-off)", history)
        alpha = rz / pap
        ux += alpha * px_
        uy += alpha * py_
        rx -= alpha * ax
        ry -= alpha * ay
        it += 1
        rnorm = np.sqrt(np.sum(rx**2) + np.sum(ry**2))
        history.append((it, rnorm / bnorm, 0.0))
        if rnorm <= tol:
            break
        zx, zy = precond(rx, ry)
        rz_new = np.sum(rx * zx) + np.sum(ry * zy)
        beta = rz_new / rz
        rz = rz_new
        px_ = zx + beta * px_
        py_ = zy + beta * py_
    if rnorm > tol:
        raise SolverError(
            f"CG did not reach rel_tolerance={config.rel_tolerance} in "
            f"{config.max_iterations} iterations (reached {rnorm / bnorm:.3e})",
            history,
        )

    # occasional round-off drift out of the divergence-free subspace
    ux, uy = ops.project(ux, uy)

    # pressure recovery: grad(P) = b - A u up to the solver tolerance
    ax, ay = apply_stress_divergence(grid, mu_c, mu_n, ux, uy)
    resx = bx0 - ax
    resy = by0 - ay
    d = ops.div(resx, resy)
    p_vals = ops.solve_poisson(d)
    fluid = mu.fluid_mask()
    if fluid.any():
        p_vals = p_vals - p_vals[fluid].mean()
    gpx, gpy = ops.grad(p_vals)
    mom_res = np.sqrt(np.sum((resx - gpx) ** 2) + np.sum((resy - gpy) ** 2)) / bnorm
    div_res = float(np.sqrt(np.sum(ops.div(ux, uy) ** 2)) * h)

    u = VelocityField(grid, ux, uy)
    p = PressureField(grid, p_vals)
    report = ResidualReport(True, it, float(mom_res), div_res, history)
    return u, p, report


# ---------------------------------------------------------------------------
# no-slip sparse assembly


def _face_to_center_1d(n, h):
    """Divergence factor: (u[i+1]-u[i])/h with zero boundary faces; (n, n-1)."""
    return sp.diags([-np.ones(n - 1), np.ones(n - 1)], [-1, 0], shape=(n, n - 1)) / h


def _corner_diff_1d(n, h):
    """Tangential derivative to corner rows, reflection wall ghosts; (n+1, n).

    Walls reflect the first face value about the boundary, u_ghost = -u0,
    so u'(wall) = 2 u0 / h.  Paired with the trapezoid corner weights this
    reproduces the plain flux balance at wall-adjacent faces.
    """
    rows = sp.lil_matrix((n + 1, n))
    rows[0, 0] = 2.0 / h
    for j in range(1, n):
        rows[j, j - 1] = -1.0 / h
        rows[j, j] = 1.0 / h
    rows[n, n - 1] = -2.0 / h
    return rows.tocsr()


def _corner_weights(n):
    """Trapezoid quadrature weights for corner-sited energies on the box."""
    w = np.ones((n + 1, n + 1))
    w[0, :] *= 0.5
    w[-1, :] *= 0.5
    w[:, 0] *= 0.5
    w[:, -1] *= 0.5
    return w


def _embed_faces_1d(n):
    """Interior faces (n-1) into corner rows (n+1); boundary rows zero."""
    return sp.diags([np.ones(n - 1)], [-1], shape=(n + 1, n - 1))


# beyond this the direct factorization exceeds the memory budget
_DIRECT_LIMIT = 256


class _NoSlipSystem:
    """Assembled MAC Stokes saddle-point system on a no-slip box.

    Small grids go through a sparse LU of the bordered system.  Larger
    ones switch to MINRES with a block preconditioner: smoothed-aggregation
    AMG on the velocity block (rigid-body near-nullspace) and a
    viscosity-scaled diagonal for the pressure Schur complement.
    """

    def __init__(self, grid, mu, config=None):
        n, h = grid.n, grid.h
        self.grid = grid
        In = sp.identity(n)
        Dfc = _face_to_center_1d(n, h)
        Tbc = _corner_diff_1d(n, h)
        Emb = _embed_faces_1d(n)

        self.nux = (n - 1) * n
        self.nuy = n * (n - 1)
        self.np_ = n * n

        Bxx = sp.kron(Dfc, In, format="csr")          # dx ux at centers
        Byy = sp.kron(In, Dfc, format="csr")          # dy uy at centers
        # 0.5 (dy ux + dx uy) at corners
        Cx = sp.kron(Emb, Tbc, format="csr")          # dy ux at corners
        Cy = sp.kron(Tbc, Emb, format="csr")          # dx uy at corners

        mu_c = mu.mu_c.ravel()
        self.wn = _corner_weights(n)
        mu_n = (self.wn * mu.mu_corners()).ravel()
        Mc = sp.diags(2.0 * mu_c)
        Mn = sp.diags(mu_n)

        Auxx = Bxx.T @ Mc @ Bxx + Cx.T @ Mn @ Cx
        Auyy = Byy.T @ Mc @ Byy + Cy.T @ Mn @ Cy
        Auxy = Cx.T @ Mn @ Cy
        A = sp.bmat([[Auxx, Auxy], [Auxy.T, Auyy]], format="csr")

        Dx = sp.kron(Dfc, In, format="csr")
        Dy = sp.kron(In, Dfc, format="csr")
        D = sp.hstack([Dx, Dy], format="csr")

        e = np.ones((self.np_, 1)) * h * h
        K = sp.bmat(
            [
                [A, -D.T, None],
                [-D, None, e],
                [None, e.T, None],
            ],
            format="csc" if n <= _DIRECT_LIMIT else "csr",
        )
        self.B_ops = (Bxx, Byy, Cx, Cy)
        self.D = D
        self.config = config if config is not None else SolverConfig()
        self.iterations = 1
        if n <= _DIRECT_LIMIT:
            self.lu = spla.splu(K)
            self.K = None
        else:
            self.lu = None
            self.K = K
            self._build_preconditioner(A, grid, mu_c)

    def _build_preconditioner(self, A, grid, mu_c):
        import pyamg

        n, h = grid.n, grid.h
        nux = self.nux
        xi = np.arange(1, n) * h
        yc = (np.arange(n) + 0.5) * h
        _, yux = np.meshgrid(xi, yc, indexing="ij")
        xuy, _ = np.meshgrid(yc, xi, indexing="ij")
        rb = np.zeros((nux + self.nuy, 3))
        rb[:nux, 0] = 1.0
        rb[nux:, 1] = 1.0
        rb[:nux, 2] = -yux.ravel()
        rb[nux:, 2] = xuy.ravel()
        ml = pyamg.smoothed_aggregation_solver(A.tocsr(), B=rb, max_coarse=500)
        amg = ml.aspreconditioner(cycle="V")
        nu_tot, np_ = nux + self.nuy, self.np_

        def pinv(v):
            out = np.empty_like(v)
            out[:nu_tot] = amg @ v[:nu_tot]
            out[nu_tot : nu_tot + np_] = v[nu_tot : nu_tot + np_] * mu_c
            out[-1] = v[-1]
            return out

        self.precond = spla.LinearOperator(self.K.shape, matvec=pinv)

    def _solve_linear(self, rhs):
        if self.lu is not None:
            self.iterations = 1
            return self.lu.solve(rhs)
        tol = self.config.rel_tolerance
        scale = np.linalg.norm(rhs)
        sol = np.zeros_like(rhs)
        total = 0
        for _ in range(4):
            r = rhs - self.K @ sol
            rnorm = np.linalg.norm(r)
            if rnorm / scale <= tol:
                break
            it = [0]
            # inner target: enough residual reduction on this pass to meet
            # the outer tolerance, with margin; grinding to 1e-12 wastes
            # tens of thousands of iterations on large stiff grids
            dsol, _ = spla.minres(
                self.K,
                r,
                M=self.precond,
                rtol=max(0.3 * tol * scale / rnorm, 1e-13),
                maxiter=self.config.max_iterations,
                callback=lambda _xk: it.__setitem__(0, it[0] + 1),
            )
            sol = sol + dsol
            total += it[0]
        res = np.linalg.norm(rhs - self.K @ sol) / scale
        if res > tol:
            raise SolverError(
                f"no-slip MINRES stalled at relative residual {res:.3e}"
            )
        self.iterations = max(total, 1)
        return sol

    def strain_rhs(self, g_center_vals):
        """Weak-form contribution of a center-valued stress load.

        The momentum rhs term div(g) pairs as -<g, grad(v)> with the
        zero-trace test functions, so the rhs vector gains -(B^T g) per
        strain slot.
        """
        Bxx, Byy, Cx, Cy = self.B_ops

        def corners(a):
            p = np.pad(a, 1, mode="edge")
            return 0.25 * (p[:-1, :-1] + p[1:, :-1] + p[:-1, 1:] + p[1:, 1:])

        gxx = g_center_vals[..., 0, 0].ravel()
        gyy = g_center_vals[..., 1, 1].ravel()
        gxy = (self.wn * corners(g_center_vals[..., 0, 1])).ravel()
        gyx = (self.wn * corners(g_center_vals[..., 1, 0])).ravel()
        rx = -(Bxx.T @ gxx) - (Cx.T @ gxy)
        ry = -(Byy.T @ gyy) - (Cy.T @ gyx)
        return rx, ry

    def solve(self, fx_faces, fy_faces, g_center_vals, div_target):
        """Solve for interior-face velocities and cell pressures."""
        rx = fx_faces[1:-1, :].ravel()
        ry = fy_faces[:, 1:-1].ravel()
        if g_center_vals is not None:
            gx, gy = self.strain_rhs(g_center_vals)
            rx = rx + gx
            ry = ry + gy
        rhs = np.concatenate([rx, ry, -div_target.ravel(), [0.0]])
        sol = self._solve_linear(rhs)
        ux = sol[: self.nux].reshape(self.grid.n - 1, self.grid.n)
        uy = sol[self.nux : self.nux + self.nuy].reshape(self.grid.n, self.grid.n - 1)
        p = sol[self.nux + self.nuy : -1].reshape(self.grid.n, self.grid.n)
        return ux, uy, p


def _solve_noslip(grid, mu, fx, fy, g_vals, config, boundary=None):
    n = grid.n
    system = _NoSlipSystem(grid, mu, config)
    div_target = np.zeros((n, n))
    lift = None
    if boundary is not None:
        lift = _sample_boundary_field(grid, boundary)
        ax, ay = _apply_noslip_full(grid, mu, lift)
        fx = fx - ax
        fy = fy - ay
        div_target = -_div_full(grid, lift)
    ux_i, uy_i, p_vals = system.solve(fx, fy, g_vals, div_target)
    ux = np.zeros((n + 1, n))
    uy = np.zeros((n, n + 1))
    ux[1:-1] = ux_i
    uy[:, 1:-1] = uy_i
    if lift is not None:
        ux = ux + lift[0][1:-1, 1:-1]
        uy = uy + lift[1][1:-1, 1:-1]
    fluid = mu.fluid_mask()
    if fluid.any():
        p_vals = p_vals - p_vals[fluid].mean()
    u = VelocityField(grid, ux, uy, allow_boundary=lift is not None)
    p = PressureField(grid, p_vals)
    # the bordered solve enforces both equations to the linear-solver
    # tolerance, so a single summary entry suffices
    res = min(config.rel_tolerance, 1e-12) if system.lu is not None else config.rel_tolerance
    report = ResidualReport(True, system.iterations, res, res, [(system.iterations, res, res)])
    return u, p, report


def _sample_boundary_field(grid, boundary):
    """Sample analytic (fx, fy) on face grids extended by one ghost layer."""
    fx, fy = boundary
    n, h = grid.n, grid.h
    x = np.arange(-1, n + 2) * h
    yc = (np.arange(-1, n + 1) + 0.5) * h
    # broadcast in case a component ignores one coordinate
    ux = np.broadcast_to(
        np.asarray(fx(x[:, None], yc[None, :]), dtype=float), (n + 3, n + 2)
    )
    xc = (np.arange(-1, n + 1) + 0.5) * h
    y = np.arange(-1, n + 2) * h
    uy = np.broadcast_to(
        np.asarray(fy(xc[:, None], y[None, :]), dtype=float), (n + 2, n + 3)
    )
    return np.array(ux), np.array(uy)


def _apply_noslip_full(grid, mu, lift):
    """-div(2 mu D(u)) on interior faces for a ghost-extended face field."""
    n, h = grid.n, grid.h
    uxg, uyg = lift  # (n+3, n+2), (n+2, n+3)
    mu_c = mu.mu_c
    mu_n_full = mu.mu_corners()  # (n+1, n+1)
    # strains over the padded patch: centers (n+2, n+2) incl. ghost cells
    dxux = (uxg[1:, :] - uxg[:-1, :]) / h          # (n+2, n+2) centers
    dyuy = (uyg[:, 1:] - uyg[:, :-1]) / h
    mu_pad = np.pad(mu_c, 1, mode="edge")
    txx = 2 * mu_pad * dxux
    tyy = 2 * mu_pad * dyuy
    dyux = (uxg[1:-1, 1:] - uxg[1:-1, :-1]) / h    # corners (n+1, n+1)
    dxuy = (uyg[1:, 1:-1] - uyg[:-1, 1:-1]) / h
    txy = mu_n_full * (dyux + dxuy)
    ax = np.zeros((n + 1, n))
    ay = np.zeros((n, n + 1))
    ax[1:-1] = -(
        (txx[2:-1, 1:-1] - txx[1:-2, 1:-1]) / h + (txy[1:-1, 1:] - txy[1:-1, :-1]) / h
    )
    ay[:, 1:-1] = -(
        (tyy[1:-1, 2:-1] - tyy[1:-1, 1:-2]) / h + (txy[1:, 1:-1] - txy[:-1, 1:-1]) / h
    )
    return ax, ay


def _div_full(grid, lift):
    n, h = grid.n, grid.h
    uxg, uyg = lift
    ux = uxg[1:-1, 1:-1]  # (n+1, n)
    uy = uyg[1:-1, 1:-1]
    return (ux[1:] - ux[:-1]) / h + (uy[:, 1:] - uy[:, :-1]) / h


# ---------------------------------------------------------------------------
# public entry points


def solve_stokes(grid, mu, body_force=None, stress_load=None, config=None, boundary=None):
    """Solve -div(2 mu D(u)) + grad(P) = f + div(g 1_fluid), div(u) = 0.

    body_force: VelocityField (face-sampled f) or None.
    stress_load: TensorField g at centers or None; zeroed inside inclusions
    before assembly.
    boundary: optional pair of callables (fx, fy) prescribing Dirichlet data
    on a no-slip box (defaults to u = 0).

    Returns (VelocityField, PressureField, ResidualReport).
    """
    config = config or SolverConfig()
    if not grid.compatible(mu.grid):
        raise ValueError("viscosity field grid mismatch")
    n = grid.n
    if body_force is None:
        if grid.periodic:
            fx = np.zeros((n, n))
            fy = np.zeros((n, n))
        else:
            fx = np.zeros((n + 1, n))
            fy = np.zeros((n, n + 1))
    else:
        fx, fy = body_force.ux.copy(), body_force.uy.copy()
    g_vals = None
    if stress_load is not None:
        fluid_frac = 1.0 - mu.chi
        g_vals = stress_load.values * fluid_frac[..., None, None]
    if grid.periodic:
        if boundary is not None:
            raise ValueError("boundary data is only meaningful on no-slip boxes")
        return _solve_periodic(grid, mu, fx, fy, g_vals, config)
    return _solve_noslip(grid, mu, fx, fy, g_vals, config, boundary=boundary)


def analytic_stokes_oracle(grid, mode, amplitude):
    """Closed-form periodic Stokes solution for f(x) = a sin(k . x), mu = 1.

    Helmholtz decomposition in a single Fourier mode: the divergence-free
    part of the forcing drives u, the gradient part is absorbed by P.
    """
    if not grid.periodic:
        raise ValueError("oracle requires a periodic grid")
    k = np.asarray(mode, dtype=float)
    a = np.asarray(amplitude, dtype=float)
    k2 = float(k @ k)
    if k2 == 0:
        raise PreconditionError("oracle mode k must be nonzero")
    # wavenumbers must fit the torus
    m = k * grid.box_size / (2 * np.pi)
    if np.max(np.abs(m - np.round(m))) > 1e-9:
        raise ValueError("mode is not periodic on this box")
    a_par = (a @ k) / k2 * k
    a_perp = a - a_par

    def fx(x, y):
        return a_perp[0] / k2 * np.sin(k[0] * x + k[1] * y)

    def fy(x, y):
        return a_perp[1] / k2 * np.sin(k[0] * x + k[1] * y)

    u = VelocityField.from_function(grid, fx, fy)
    xc, yc = grid.cell_centers()
    p_vals = -(a @ k) / k2 * np.cos(k[0] * xc + k[1] * yc)
    return u, PressureField(grid, p_vals)


def forcing_for_oracle(grid, mode, amplitude):
    """Face-sampled forcing matching analytic_stokes_oracle."""
    k = np.asarray(mode, dtype=float)
    a = np.asarray(amplitude, dtype=float)

    def fx(x, y):
        return a[0] * np.sin(k[0] * x + k[1] * y)

    def fy(x, y):
        return a[1] * np.sin(k[0] * x + k[1] * y)

    return VelocityField.from_function(grid, fx, fy)


def pressure_diagnostic(u, p, g, chi, center, radius):
    """Localized pressure-to-data ratio on the fluid part of a ball."""
    grid = u.grid
    from .fields import _ball_mask  # shared discrete ball

    mask = _ball_mask(grid, center, radius) & (chi < 0.5)
    if not mask.any():
        raise ValueError("pressure diagnostic region contains no fluid cells")
    pv = p.values[mask]
    num = np.sqrt(np.mean((pv - pv.mean()) ** 2))
    gu = velocity_gradient(u).values
    den_sq = np.mean(np.sum(gu[mask] ** 2, axis=(-1, -2)))
    if g is not None:
        den_sq += np.mean(np.sum(g.values[mask] ** 2, axis=(-1, -2)))
    den = np.sqrt(den_sq)
    if den == 0:
        return 0.0
    return float(num / den)
