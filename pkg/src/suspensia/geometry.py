"""Rigid-inclusion configurations: generation, validation, rasterization.

All configurations live in a square box [0, L)^2, either periodic or as a
clipped subset of a bounded domain.  Shapes are centered at their inclusion
center and fit in the closed unit ball; the separation parameter delta
controls both the boundary regularity (interior/exterior ball condition)
and the pairwise hardcore gap between delta-fattened convex hulls.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .fields import StaggeredGrid


class GeometryError(ValueError):
    """Raised for infeasible or inconsistent inclusion configurations."""


@dataclass(frozen=True)
class Shape:
    """A single inclusion shape, centered at the origin.

    kind "disk": `radius` is the disk radius.
    kind "smooth-star": boundary rho(phi) = radius + sum_k a_k cos(k phi)
    + b_k sin(k phi) with coefficient list `star_coeffs` = [(k, a_k, b_k)].
    """

    kind: str = "disk"
    radius: float = 1.0
    star_coeffs: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in ("disk", "smooth-star"):
            raise GeometryError(f"unknown shape kind {self.kind!r}")
        if self.radius <= 0:
            raise GeometryError("shape radius must be positive")

    def boundary_radius(self, phi):
        rho = np.full_like(np.asarray(phi, dtype=float), self.radius)
        for k, a, b in self.star_coeffs:
            rho = rho + a * np.cos(k * phi) + b * np.sin(k * phi)
        return rho

    def max_radius(self):
        if self.kind == "disk":
            return self.radius
        phi = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
        return float(self.boundary_radius(phi).max())

    def min_radius(self):
        if self.kind == "disk":
            return self.radius
        phi = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
        return float(self.boundary_radius(phi).min())

    def area(self):
        if self.kind == "disk":
            return np.pi * self.radius**2
        phi = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
        rho = self.boundary_radius(phi)
        return float(0.5 * np.sum(rho**2) * (2 * np.pi / len(phi)))

    def contains(self, dx, dy):
        """Membership test for offsets (dx, dy) relative to the center."""
        if self.kind == "disk":
            return dx * dx + dy * dy <= self.radius**2
        rr = np.hypot(dx, dy)
        phi = np.arctan2(dy, dx)
        return rr <= self.boundary_radius(phi)

    def curvature_radius_bound(self, samples=2048):
        """Minimal boundary curvature radius, estimated on boundary samples.

        For a polar curve rho(phi) the curvature is
        (rho^2 + 2 rho'^2 - rho rho'') / (rho^2 + rho'^2)^(3/2); the
        interior/exterior ball conditions with radius delta require the
        curvature radius (its reciprocal) to stay >= delta.
        """
        if self.kind == "disk":
            return self.radius
        phi = np.linspace(0, 2 * np.pi, samples, endpoint=False)
        rho = self.boundary_radius(phi)
        d1 = np.zeros_like(rho)
        d2 = np.zeros_like(rho)
        for k, a, b in self.star_coeffs:
            d1 += -a * k * np.sin(k * phi) + b * k * np.cos(k * phi)
            d2 += -a * k * k * np.cos(k * phi) - b * k * k * np.sin(k * phi)
        kappa = (rho**2 + 2 * d1**2 - rho * d2) / (rho**2 + d1**2) ** 1.5
        kmax = np.abs(kappa).max()
        if kmax <= 0:
            return np.inf
        return float(1.0 / kmax)

    def check(self, delta):
        """Verify unit-ball containment and the delta ball conditions."""
        if self.max_radius() > 1.0 + 1e-12:
            raise GeometryError("shape does not fit in the unit ball")
        if self.kind == "disk":
            if self.radius < delta:
                raise GeometryError(
                    f"disk radius {self.radius} below ball-condition radius {delta}"
                )
        else:
            if self.min_radius() <= 0:
                raise GeometryError("smooth-star boundary crosses the origin")
            rc = self.curvature_radius_bound()
            if rc < delta:
                raise GeometryError(
                    f"smooth-star curvature radius {rc:.4g} below delta={delta}"
                )

    def to_dict(self):
        return {
            "kind": self.kind,
            "radius": self.radius,
            "star_coeffs": [list(c) for c in self.star_coeffs],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            kind=d["kind"],
            radius=d["radius"],
            star_coeffs=tuple(tuple(c) for c in d.get("star_coeffs", [])),
        )


@dataclass(frozen=True)
class InclusionSet:
    """Rigid inclusions in [0, box_size)^2 with hardcore separation delta."""

    centers: np.ndarray  # (n, 2)
    shapes: tuple  # of Shape
    delta: float
    box_size: float
    periodic: bool = True
    dimension: int = 2

    def __post_init__(self):
        centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        if centers.size == 0:
            centers = centers.reshape(0, 2)
        if centers.shape[1] != 2 or self.dimension != 2:
            raise GeometryError("only 2D inclusion sets are supported")
        if len(self.shapes) != len(centers):
            raise GeometryError("centers and shapes length mismatch")
        if self.delta <= 0:
            raise GeometryError("separation delta must be positive")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "shapes", tuple(self.shapes))

    def __len__(self):
        return len(self.centers)

    def volume_fraction(self):
        area = sum(s.area() for s in self.shapes)
        return area / self.box_size**2

    def pair_distance(self, i, j):
        d = self.centers[i] - self.centers[j]
        if self.periodic:
            d -= self.box_size * np.round(d / self.box_size)
        return float(np.hypot(*d))

    def to_dict(self):
        return {
            "box_size": self.box_size,
            "periodic": self.periodic,
            "delta": self.delta,
            "centers": [[float(x), float(y)] for x, y in self.centers],
            "shapes": [s.to_dict() for s in self.shapes],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            centers=np.asarray(d["centers"], dtype=float).reshape(-1, 2),
            shapes=tuple(Shape.from_dict(s) for s in d["shapes"]),
            delta=d["delta"],
            box_size=d["box_size"],
            periodic=d["periodic"],
        )


def save_geometry(path, incl):
    """Structured-text export with deterministic field ordering."""
    with open(path, "w") as fh:
        json.dump(incl.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_geometry(path):
    with open(path) as fh:
        return InclusionSet.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# generators


def gen_periodic_lattice(box_size, spacing, disk_radius, delta):
    """Square lattice of identical disks on a periodic box."""
    m = box_size / spacing
    if abs(m - round(m)) > 1e-9:
        raise GeometryError(f"spacing {spacing} does not divide box size {box_size}")
    m = int(round(m))
    gap = spacing - 2 * disk_radius
    if gap <= 2 * delta:
        raise GeometryError(
            f"lattice gap {gap:.4g} between neighboring disks does not exceed "
            f"the hardcore requirement 2*delta = {2 * delta:.4g}"
        )
    shape = Shape("disk", disk_radius)
    shape.check(delta)
    pts = (np.arange(m) + 0.5) * spacing
    xs, ys = np.meshgrid(pts, pts, indexing="ij")
    centers = np.column_stack([xs.ravel(), ys.ravel()])
    return InclusionSet(
        centers=centers,
        shapes=(shape,) * len(centers),
        delta=delta,
        box_size=float(box_size),
        periodic=True,
    )


def gen_matern_hardcore(box_size, intensity, disk_radius, delta, seed):
    """Matern type-II thinning of a Poisson process under periodic wrap.

    A parent Poisson cloud with iid uniform marks is thinned by removing any
    point with a lower-marked neighbor closer than the hard exclusion
    distance 2 * (disk_radius + delta).  Deterministic for a given seed.
    """
    if disk_radius > 1:
        raise GeometryError("disk radius must be at most 1 (unit-ball shapes)")
    if delta <= 0:
        raise GeometryError("delta must be positive")
    rng = np.random.default_rng(seed)
    n_parent = rng.poisson(intensity * box_size**2)
    pts = rng.uniform(0.0, box_size, size=(n_parent, 2))
    marks = rng.uniform(size=n_parent)
    excl = 2 * (disk_radius + delta)
    keep = np.ones(n_parent, dtype=bool)
    if n_parent > 1:
        d = pts[:, None, :] - pts[None, :, :]
        d -= box_size * np.round(d / box_size)
        dist = np.hypot(d[..., 0], d[..., 1])
        np.fill_diagonal(dist, np.inf)
        close = dist < excl
        lower = marks[None, :] < marks[:, None]
        keep = ~np.any(close & lower, axis=1)
    shape = Shape("disk", disk_radius)
    shape.check(delta)
    centers = pts[keep]
    order = np.lexsort((centers[:, 1], centers[:, 0]))
    centers = centers[order]
    return InclusionSet(
        centers=centers,
        shapes=(shape,) * len(centers),
        delta=delta,
        box_size=float(box_size),
        periodic=True,
    )


# ---------------------------------------------------------------------------
# validation


@dataclass
class HardcoreReport:
    violations: list  # (n, m, gap) with gap <= 0 meaning contact/overlap

    @property
    def passed(self):
        return not self.violations


def validate_hardcore(incl):
    """Check the pairwise hardcore condition on delta-fattened hulls.

    For non-disk shapes the circumscribed radius bounds the convex hull,
    which makes the check conservative.
    """
    violations = []
    n = len(incl)
    if n > 1:
        radii = np.array([s.max_radius() for s in incl.shapes])
        d = incl.centers[:, None, :] - incl.centers[None, :, :]
        if incl.periodic:
            d -= incl.box_size * np.round(d / incl.box_size)
        dist = np.hypot(d[..., 0], d[..., 1])
        required = radii[:, None] + radii[None, :] + 2 * incl.delta
        for i in range(n):
            for j in range(i + 1, n):
                gap = dist[i, j] - required[i, j]
                if gap <= 0:
                    violations.append((i, j, float(gap)))
    return HardcoreReport(violations=violations)


# ---------------------------------------------------------------------------
# rasterization and clipping

SUBSAMPLES = 8  # midpoint subsamples per cell and direction


def rasterize_indicator(incl, grid, subsamples=SUBSAMPLES):
    """Per-cell coverage fraction of the inclusion set, in [0, 1].

    Fixed-order midpoint subsampling (subsamples^2 points per cell); sharp
    and first-order accurate in h.
    """
    if not isinstance(grid, StaggeredGrid):
        raise TypeError("grid must be a StaggeredGrid")
    if abs(grid.box_size - incl.box_size) > 1e-12 * max(grid.box_size, 1.0):
        raise GeometryError(
            f"grid box {grid.box_size} does not match geometry box {incl.box_size}"
        )
    n, h = grid.n, grid.h
    counts = np.zeros((n, n), dtype=np.int64)
    sub = (np.arange(subsamples) + 0.5) / subsamples  # offsets within a cell
    for center, shape in zip(incl.centers, incl.shapes):
        R = shape.max_radius()
        lo = np.floor((center - R) / h).astype(int) - 1
        hi = np.ceil((center + R) / h).astype(int) + 1
        if not incl.periodic:
            lo = np.maximum(lo, 0)
            hi = np.minimum(hi, n)
        ci = np.arange(lo[0], hi[0])
        cj = np.arange(lo[1], hi[1])
        if len(ci) == 0 or len(cj) == 0:
            continue
        # subsample coordinates of the covered cell patch
        px = (ci[:, None] + sub[None, :]).ravel() * h  # (nci * s,)
        py = (cj[:, None] + sub[None, :]).ravel() * h
        inside = shape.contains(
            px[:, None] - center[0], py[None, :] - center[1]
        )
        # reduce subsamples back onto cells
        s = subsamples
        per_cell = inside.reshape(len(ci), s, len(cj), s).sum(axis=(1, 3))
        counts[np.ix_(ci % n, cj % n)] += per_cell
    return np.minimum(counts / float(subsamples**2), 1.0)


def clip_to_domain(incl, domain_size, eps):
    """Restrict the eps-rescaled inclusion set to the box [0, domain_size)^2.

    Keeps exactly the (periodically tiled) inclusions n whose eps-scaled
    delta-fattened hull lies strictly inside the domain, and rescales the
    retained inclusions by eps.
    """
    if eps <= 0:
        raise GeometryError("eps must be positive")
    centers = []
    shapes = []
    if incl.periodic and len(incl) > 0:
        reach = int(np.ceil(domain_size / (eps * incl.box_size))) + 1
        offs = np.arange(-1, reach + 1) * incl.box_size
        tiles = np.array([(ox, oy) for ox in offs for oy in offs])
    else:
        tiles = np.zeros((1, 2))
    for center, shape in zip(incl.centers, incl.shapes):
        guard = shape.max_radius() + incl.delta
        for off in tiles:
            c = (center + off) * eps
            r = guard * eps
            if (
                c[0] - r > 0
                and c[1] - r > 0
                and c[0] + r < domain_size
                and c[1] + r < domain_size
            ):
                centers.append(c)
                if shape.kind == "disk":
                    shapes.append(Shape("disk", shape.radius * eps))
                else:
                    shapes.append(
                        Shape(
                            "smooth-star",
                            shape.radius * eps,
                            tuple((k, a * eps, b * eps) for k, a, b in shape.star_coeffs),
                        )
                    )
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    return InclusionSet(
        centers=centers,
        shapes=tuple(shapes),
        delta=incl.delta * eps,
        box_size=float(domain_size),
        periodic=False,
    )
