"""Ensemble statistics: CLT variance scaling, corrector growth, r_* moments."""

from dataclasses import dataclass, field

import numpy as np

from .corrector import CorrectorSet
from .fields import StaggeredGrid, _ball_mask, velocity_gradient
from .geometry import gen_matern_hardcore
from .regularity import minimal_radius
from .solver import SolverConfig


@dataclass
class EnsembleSpec:
    intensity: float
    disk_radius: float
    delta: float
    L_list: list
    samples: int
    base_seed: int = 0
    cells_per_unit: int = 2
    config: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.samples < 16:
            raise ValueError("ensemble statistics need at least 16 samples")

    def seed_for(self, index):
        return self.base_seed + index

    def sample_geometry(self, box_size, index):
        return gen_matern_hardcore(
            box_size, self.intensity, self.disk_radius, self.delta,
            self.seed_for(index),
        )

    def grid_for(self, box_size):
        return StaggeredGrid(int(round(self.cells_per_unit * box_size)), box_size)


def _sample_corrector(spec, box_size, index, E):
    geo = spec.sample_geometry(box_size, index)
    grid = spec.grid_for(box_size)
    from .corrector import solve_corrector

    psi, _sigma = solve_corrector(grid, geo, E, spec.config)
    return psi, grid


def _ols_loglog(xs, ys):
    x = np.log(np.asarray(xs, dtype=float))
    y = np.log(np.asarray(ys, dtype=float))
    A = np.column_stack([x, np.ones_like(x)])
    coef, _res, _rank, _sv = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[0])


def variance_scaling(spec, E, n_boot=200):
    """Fitted exponent of Var[ball average of grad psi_E] against L.

    Per L the corrector is solved on a box of size 2L and averaged over the
    centered ball of radius L/2, keeping a periodization margin.  Returns
    (exponent, bootstrap band, per-L table, degenerate flag).
    """
    if len(spec.L_list) < 3:
        raise ValueError("variance scaling needs at least 3 box sizes")
    per_L = {}
    for L in spec.L_list:
        vals = []
        for idx in range(spec.samples):
            psi, grid = _sample_corrector(spec, 2 * L, idx, E)
            g = velocity_gradient(psi).values
            mask = _ball_mask(grid, (L, L), L / 2)
            vals.append(g[mask].mean(axis=0).ravel())
        per_L[L] = np.array(vals)     # (samples, 4)
    variances = {L: float(np.sum(np.var(v, axis=0, ddof=1))) for L, v in per_L.items()}
    if max(variances.values()) == 0.0:
        return None, None, variances, True
    Ls = sorted(variances)
    exponent = _ols_loglog(Ls, [variances[L] for L in Ls])
    rng = np.random.default_rng(spec.base_seed + 987654321)
    boots = []
    for _ in range(n_boot):
        resampled = []
        ok = True
        for L in Ls:
            pick = rng.integers(0, spec.samples, spec.samples)
            v = float(np.sum(np.var(per_L[L][pick], axis=0, ddof=1)))
            if v <= 0:
                ok = False
                break
            resampled.append(v)
        if ok:
            boots.append(_ols_loglog(Ls, resampled))
    band = (float(np.percentile(boots, 2.5)), float(np.percentile(boots, 97.5)))
    return exponent, band, variances, False


def corrector_growth(spec, E, radii=None, box_size=None):
    """Ensemble second moment of |psi_E| against radius, with a log fit.

    Each sample is re-anchored to vanish on the unit ball at the box center
    before pooling; the reference growth in 2D is linear in log(2 + r).
    """
    if box_size is None:
        box_size = 2 * max(spec.L_list)
    if radii is None:
        radii = []
        r = 1.0
        while r <= box_size / 4 + 1e-12:
            radii.append(r)
            r *= 2
    grid = spec.grid_for(box_size)
    center = (box_size / 2, box_size / 2)
    xc, yc = grid.cell_centers()
    dist = np.hypot(xc - center[0], yc - center[1])
    moments = np.zeros(len(radii))
    nonempty = False
    for idx in range(spec.samples):
        psi, grid = _sample_corrector(spec, box_size, idx, E)
        uc = psi.at_centers()
        anchor_mask = _ball_mask(grid, center, 1.0)
        uc = uc - uc[anchor_mask].mean(axis=0)
        mag2 = np.sum(uc**2, axis=-1)
        if mag2.max() > 0:
            nonempty = True
        for j, r in enumerate(radii):
            ring = (dist >= 0.5 * r) & (dist <= r)
            moments[j] += mag2[ring].mean()
    moments /= spec.samples
    x = np.log(2.0 + np.asarray(radii))
    if not nonempty:
        return radii, moments, 0.0, 0.0, 1.0
    A = np.column_stack([x, np.ones_like(x)])
    coef, res, _rank, _sv = np.linalg.lstsq(A, moments, rcond=None)
    ss_tot = float(np.sum((moments - moments.mean()) ** 2))
    ss_res = float(res[0]) if res.size else 0.0
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return radii, moments, float(coef[0]), float(coef[1]), r2


def rstar_moments(spec, C0=16.0, q_list=(1, 2, 4), box_size=None, n_boot=200):
    """Empirical moments of the minimal radius over the ensemble.

    Right-censored samples (threshold never met inside the box) enter at the
    box radius; their count is reported and a censoring fraction over 25
    percent flags the estimate unreliable.
    """
    if spec.samples < 32:
        raise ValueError("r_* moments need at least 32 samples")
    if box_size is None:
        box_size = 2 * max(spec.L_list)
    grid = spec.grid_for(box_size)
    values = []
    censored = 0
    for idx in range(spec.samples):
        geo = spec.sample_geometry(box_size, idx)
        cs = CorrectorSet.compute(grid, geo, spec.config)
        mr = minimal_radius(cs, C0=C0)
        values.append(mr.r_star)
        if mr.censored:
            censored += 1
    values = np.asarray(values, dtype=float)
    frac = censored / spec.samples
    rng = np.random.default_rng(spec.base_seed + 192837465)
    moments = {}
    for q in q_list:
        m = float(np.mean(values**q))
        boots = [
            float(np.mean(values[rng.integers(0, len(values), len(values))] ** q))
            for _ in range(n_boot)
        ]
        moments[q] = (m, (float(np.percentile(boots, 2.5)),
                          float(np.percentile(boots, 97.5))))
    return {
        "moments": moments,
        "censored": censored,
        "censoring_fraction": frac,
        "unreliable": frac > 0.25,
        "values": values.tolist(),
    }


class StatsReport:
    """Bundle of the three ensemble experiments with CSV output."""

    def __init__(self, spec, E, run_variance=True, run_growth=True,
                 run_rstar=True, C0=16.0):
        self.spec = spec
        self.E = np.asarray(E, dtype=float)
        self.variance = None
        self.growth = None
        self.rstar = None
        if run_variance:
            exp_, band, table, degenerate = variance_scaling(spec, E)
            self.variance = {
                "exponent": exp_,
                "band": band,
                "variances": table,
                "degenerate": degenerate,
            }
        if run_growth:
            radii, moments, slope, intercept, r2 = corrector_growth(spec, E)
            self.growth = {
                "radii": list(radii),
                "moments": moments.tolist(),
                "slope": slope,
                "intercept": intercept,
                "r_squared": r2,
            }
        if run_rstar:
            self.rstar = rstar_moments(spec, C0=C0)

    def to_csv(self, prefix):
        if self.variance is not None:
            with open(prefix + "_variance.csv", "w") as fh:
                fh.write("L,variance\n")
                for L in sorted(self.variance["variances"]):
                    fh.write(f"{L},{self.variance['variances'][L]:.10e}\n")
        if self.growth is not None:
            with open(prefix + "_growth.csv", "w") as fh:
                fh.write("r,second_moment\n")
                for r, m in zip(self.growth["radii"], self.growth["moments"]):
                    fh.write(f"{r},{m:.10e}\n")
        if self.rstar is not None:
            with open(prefix + "_rstar.csv", "w") as fh:
                fh.write("sample,r_star\n")
                for i, v in enumerate(self.rstar["values"]):
                    fh.write(f"{i},{v:.10g}\n")

    def to_dict(self):
        out = {"E": self.E.tolist(), "samples": self.spec.samples,
               "base_seed": self.spec.base_seed}
        if self.variance is not None:
            v = dict(self.variance)
            v["variances"] = {str(k): val for k, val in v["variances"].items()}
            out["variance"] = v
        if self.growth is not None:
            out["growth"] = self.growth
        if self.rstar is not None:
            r = dict(self.rstar)
            r["moments"] = {str(q): m for q, m in r["moments"].items()}
            out["rstar"] = r
        return out
