"""Staggered (MAC) grid fields and the discrete calculus shared by all solvers.

Layout conventions (2D, cell size h = L/N, cell (i,j) = [ih,(i+1)h) x [jh,(j+1)h)):

* pressure / scalar values live at cell centers, shape (N, N);
* x-velocity lives on vertical faces x = ih, shape (N, N) periodic or
  (N+1, N) on a no-slip box (boundary faces stored, pinned to zero);
* y-velocity lives on horizontal faces y = jh, shape (N, N) or (N, N+1);
* tensors at cell centers, shape (N, N, 2, 2).

Index 0 is the x direction throughout (row-major arrays, x slowest).
"""

import numpy as np

FIELD_MAGIC = b"SUSPFLD1"
_HEADER_BYTES = 32

PERIODIC = "periodic"
NOSLIP = "no-slip"


class StaggeredGrid:
    """Uniform MAC grid on the box [0, L)^2."""

    def __init__(self, n_cells, box_size, boundary=PERIODIC):
        n_cells = int(n_cells)
        if n_cells < 8:
            raise ValueError(f"grid needs at least 8 cells per side, got {n_cells}")
        if box_size <= 0:
            raise ValueError("box_size must be positive")
        if boundary not in (PERIODIC, NOSLIP):
            raise ValueError(f"unknown boundary type {boundary!r}")
        self.n = n_cells
        self.box_size = float(box_size)
        self.boundary = boundary
        self.h = self.box_size / n_cells

    @property
    def periodic(self):
        return self.boundary == PERIODIC

    def cell_centers(self):
        """Coordinates of cell centers as (x, y) arrays of shape (N, N)."""
        c = (np.arange(self.n) + 0.5) * self.h
        return np.meshgrid(c, c, indexing="ij")

    def xface_coords(self):
        nx = self.n if self.periodic else self.n + 1
        x = np.arange(nx) * self.h
        y = (np.arange(self.n) + 0.5) * self.h
        return np.meshgrid(x, y, indexing="ij")

    def yface_coords(self):
        ny = self.n if self.periodic else self.n + 1
        x = (np.arange(self.n) + 0.5) * self.h
        y = np.arange(ny) * self.h
        return np.meshgrid(x, y, indexing="ij")

    def compatible(self, other):
        return (
            self.n == other.n
            and self.boundary == other.boundary
            and abs(self.box_size - other.box_size) < 1e-12 * self.box_size
        )

    def __repr__(self):
        return f"StaggeredGrid(n={self.n}, L={self.box_size}, {self.boundary})"


def _check_finite(name, arr):
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")


def _freeze(arr):
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    arr.flags.writeable = False
    return arr


class VelocityField:
    """Face-centered vector field; immutable after construction."""

    def __init__(self, grid, ux, uy, allow_boundary=False):
        ux = np.asarray(ux, dtype=np.float64)
        uy = np.asarray(uy, dtype=np.float64)
        n = grid.n
        if grid.periodic:
            shapes = ((n, n), (n, n))
        else:
            shapes = ((n + 1, n), (n, n + 1))
        if ux.shape != shapes[0] or uy.shape != shapes[1]:
            raise ValueError(
                f"velocity component shapes {ux.shape}, {uy.shape} do not match "
                f"grid {grid!r} (expected {shapes})"
            )
        _check_finite("ux", ux)
        _check_finite("uy", uy)
        if not grid.periodic and not allow_boundary:
            bad = max(
                np.abs(ux[0]).max(), np.abs(ux[-1]).max(),
                np.abs(uy[:, 0]).max(), np.abs(uy[:, -1]).max(),
            )
            if bad != 0.0:
                raise ValueError("no-slip boundary faces must carry zero velocity")
        self.grid = grid
        self.allow_boundary = allow_boundary
        self.ux = _freeze(ux)
        self.uy = _freeze(uy)

    @classmethod
    def zeros(cls, grid):
        n = grid.n
        if grid.periodic:
            return cls(grid, np.zeros((n, n)), np.zeros((n, n)))
        return cls(grid, np.zeros((n + 1, n)), np.zeros((n, n + 1)))

    @classmethod
    def from_function(cls, grid, fx, fy, allow_boundary=False):
        """Sample closed-form component functions on the face grids."""
        xs, ys = grid.xface_coords()
        ux = fx(xs, ys)
        xs, ys = grid.yface_coords()
        uy = fy(xs, ys)
        if not grid.periodic and not allow_boundary:
            ux = np.array(ux)
            uy = np.array(uy)
            ux[0] = ux[-1] = 0.0
            uy[:, 0] = uy[:, -1] = 0.0
        return cls(grid, ux, uy, allow_boundary=allow_boundary)

    def at_centers(self):
        """Component-wise average of the two adjacent faces, shape (N, N, 2)."""
        if self.grid.periodic:
            cx = 0.5 * (self.ux + np.roll(self.ux, -1, axis=0))
            cy = 0.5 * (self.uy + np.roll(self.uy, -1, axis=1))
        else:
            cx = 0.5 * (self.ux[:-1] + self.ux[1:])
            cy = 0.5 * (self.uy[:, :-1] + self.uy[:, 1:])
        return np.stack([cx, cy], axis=-1)

    def __add__(self, other):
        self._require_same_grid(other)
        ab = self.allow_boundary or other.allow_boundary
        return VelocityField(self.grid, self.ux + other.ux, self.uy + other.uy, ab)

    def __sub__(self, other):
        self._require_same_grid(other)
        ab = self.allow_boundary or other.allow_boundary
        return VelocityField(self.grid, self.ux - other.ux, self.uy - other.uy, ab)

    def __mul__(self, a):
        return VelocityField(self.grid, a * self.ux, a * self.uy, self.allow_boundary)

    __rmul__ = __mul__

    def _require_same_grid(self, other):
        if not self.grid.compatible(other.grid):
            raise ValueError("velocity fields live on incompatible grids")

    def l2_norm(self):
        h = self.grid.h
        return np.sqrt((np.sum(self.ux**2) + np.sum(self.uy**2)) * h * h)


class PressureField:
    """Cell-centered scalar field."""

    def __init__(self, grid, values):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (grid.n, grid.n):
            raise ValueError(f"pressure shape {values.shape} does not match grid")
        _check_finite("pressure", values)
        self.grid = grid
        self.values = _freeze(values)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros((grid.n, grid.n)))

    def mean(self, weights=None):
        if weights is None:
            return float(self.values.mean())
        w = np.sum(weights)
        if w <= 0:
            raise ValueError("degenerate weight region for pressure mean")
        return float(np.sum(self.values * weights) / w)

    def shifted(self, c):
        return PressureField(self.grid, self.values - c)

    def l2_norm(self):
        return float(np.sqrt(np.sum(self.values**2)) * self.grid.h)


class TensorField:
    """Cell-centered 2x2 tensor field, values of shape (N, N, 2, 2)."""

    def __init__(self, grid, values):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (grid.n, grid.n, 2, 2):
            raise ValueError(f"tensor shape {values.shape} does not match grid")
        _check_finite("tensor", values)
        self.grid = grid
        self.values = _freeze(values)

    @classmethod
    def constant(cls, grid, mat):
        vals = np.broadcast_to(np.asarray(mat, dtype=float), (grid.n, grid.n, 2, 2))
        return cls(grid, np.array(vals))

    def mean(self):
        return self.values.mean(axis=(0, 1))

    def l2_norm(self):
        return float(np.sqrt(np.sum(self.values**2)) * self.grid.h)

    def __add__(self, other):
        return TensorField(self.grid, self.values + other.values)

    def __sub__(self, other):
        return TensorField(self.grid, self.values - other.values)

    def __mul__(self, a):
        return TensorField(self.grid, a * self.values)

    __rmul__ = __mul__


# ---------------------------------------------------------------------------
# discrete calculus


def divergence(u):
    """Native MAC divergence at cell centers; exact adjoint of the pressure
    gradient used by the solvers."""
    h = u.grid.h
    if u.grid.periodic:
        dux = (np.roll(u.ux, -1, axis=0) - u.ux) / h
        duy = (np.roll(u.uy, -1, axis=1) - u.uy) / h
    else:
        dux = (u.ux[1:] - u.ux[:-1]) / h
        duy = (u.uy[:, 1:] - u.uy[:, :-1]) / h
    return dux + duy


def grad_pressure(grid, p):
    """Discrete pressure gradient, centers -> faces (adjoint of -divergence)."""
    h = grid.h
    p = np.asarray(p)
    if grid.periodic:
        gx = (p - np.roll(p, 1, axis=0)) / h
        gy = (p - np.roll(p, 1, axis=1)) / h
    else:
        n = grid.n
        gx = np.zeros((n + 1, n))
        gy = np.zeros((n, n + 1))
        gx[1:-1] = (p[1:] - p[:-1]) / h
        gy[:, 1:-1] = (p[:, 1:] - p[:, :-1]) / h
    return gx, gy


def velocity_gradient(u):
    """Full gradient (grad u)_{ij} = d_j u_i interpolated to cell centers."""
    h = u.grid.h
    if u.grid.periodic:
        ux_l, ux_r = u.ux, np.roll(u.ux, -1, axis=0)
        uy_b, uy_t = u.uy, np.roll(u.uy, -1, axis=1)
        # d_y u_x at corners, then 4-point average to centers
        dyux_c = (u.ux - np.roll(u.ux, 1, axis=1)) / h
        dyux = 0.25 * (
            dyux_c
            + np.roll(dyux_c, -1, axis=0)
            + np.roll(dyux_c, -1, axis=1)
            + np.roll(np.roll(dyux_c, -1, axis=0), -1, axis=1)
        )
        dxuy_c = (u.uy - np.roll(u.uy, 1, axis=0)) / h
        dxuy = 0.25 * (
            dxuy_c
            + np.roll(dxuy_c, -1, axis=0)
            + np.roll(dxuy_c, -1, axis=1)
            + np.roll(np.roll(dxuy_c, -1, axis=0), -1, axis=1)
        )
    else:
        ux_l, ux_r = u.ux[:-1], u.ux[1:]
        uy_b, uy_t = u.uy[:, :-1], u.uy[:, 1:]
        n = u.grid.n
        # corner values with ghost reflection (zero tangential wall velocity)
        ux_pad = np.concatenate([-u.ux[:, :1], u.ux, -u.ux[:, -1:]], axis=1)
        dyux_c = (ux_pad[:, 1:] - ux_pad[:, :-1]) / h  # (N+1, N+1) corners
        dyux = 0.25 * (
            dyux_c[:-1, :-1] + dyux_c[1:, :-1] + dyux_c[:-1, 1:] + dyux_c[1:, 1:]
        )
        uy_pad = np.concatenate([-u.uy[:1], u.uy, -u.uy[-1:]], axis=0)
        dxuy_c = (uy_pad[1:] - uy_pad[:-1]) / h
        dxuy = 0.25 * (
            dxuy_c[:-1, :-1] + dxuy_c[1:, :-1] + dxuy_c[:-1, 1:] + dxuy_c[1:, 1:]
        )
    dxux = (ux_r - ux_l) / h
    dyuy = (uy_t - uy_b) / h
    vals = np.empty((u.grid.n, u.grid.n, 2, 2))
    vals[..., 0, 0] = dxux
    vals[..., 0, 1] = dyux
    vals[..., 1, 0] = dxuy
    vals[..., 1, 1] = dyuy
    return TensorField(u.grid, vals)


def sym_gradient(u):
    """Symmetrized gradient D(u)_{ij} = (d_j u_i + d_i u_j) / 2 at centers."""
    g = velocity_gradient(u).values
    return TensorField(u.grid, 0.5 * (g + np.swapaxes(g, -1, -2)))


def _ball_mask(grid, center, radius):
    xc, yc = grid.cell_centers()
    dx = xc - center[0]
    dy = yc - center[1]
    if grid.periodic:
        L = grid.box_size
        dx -= L * np.round(dx / L)
        dy -= L * np.round(dy / L)
    else:
        if (
            center[0] - radius < 0
            or center[1] - radius < 0
            or center[0] + radius > grid.box_size
            or center[1] + radius > grid.box_size
        ):
            raise ValueError("averaging ball leaves the non-periodic box")
    return dx * dx + dy * dy <= radius * radius


def local_average(grid, values, center, radius, quadratic=False):
    """Moving average over the discrete ball B_radius(center).

    `values` is a cell-centered array of shape (N, N) or (N, N, c); the mean
    is per-component.  With quadratic=True returns the scalar quadratic
    average (mean of |f|^2 over the ball) ** (1/2), the local [f]_2 quantity.
    """
    values = np.asarray(values)
    mask = _ball_mask(grid, center, radius)
    m = np.count_nonzero(mask)
    if m == 0:
        raise ValueError("averaging ball contains no cell centers")
    sel = values[mask]
    if quadratic:
        if sel.ndim == 1:
            return float(np.sqrt(np.mean(sel**2)))
        return float(np.sqrt(np.mean(np.sum(sel.reshape(m, -1) ** 2, axis=1))))
    return sel.mean(axis=0)


# ---------------------------------------------------------------------------
# binary field dump


def save_field(path, arr):
    """Dump an (nx, ny) or (nx, ny, c) float array; lossless round-trip."""
    arr = np.asarray(arr, dtype="<f8")
    if arr.ndim == 2:
        arr = arr[..., None]
    if arr.ndim != 3:
        raise ValueError("field dump expects a 2D array with optional components")
    nx, ny, nc = arr.shape
    header = FIELD_MAGIC + np.array([nx, ny, nc, 0, 0, 0], dtype="<u4").tobytes()
    assert len(header) == _HEADER_BYTES
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(arr).tobytes())


def load_field(path):
    with open(path, "rb") as fh:
        header = fh.read(_HEADER_BYTES)
        if header[:8] != FIELD_MAGIC:
            raise ValueError(f"{path}: not a field dump (bad magic)")
        nx, ny, nc = np.frombuffer(header[8:20], dtype="<u4")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != nx * ny * nc:
        raise ValueError(f"{path}: truncated field dump")
    arr = data.reshape(int(nx), int(ny), int(nc))
    return arr[..., 0] if nc == 1 else arr
