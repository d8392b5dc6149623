"""Two-scale convergence of flow past a shrinking lattice microstructure.

Solves the heterogeneous suspension problem at a few scale ratios eps,
compares against the homogenized flow corrected by the cell solution, and
fits the H1 error rate. With generic forcing the boundary layer limits the
rate to about eps^(1/2); switching to a forcing whose homogenized solution
vanishes to high order at the walls recovers the interior rate eps^1.

This keeps eps >= 1/16 so the script finishes in a couple of minutes; the
acceptance suite pushes the same sweep down to eps = 1/64.
"""

from suspensia.corrector import CorrectorSet
from suspensia.effective import EffectiveTensors
from suspensia.fields import StaggeredGrid
from suspensia.geometry import gen_periodic_lattice
from suspensia.homog import (
    HomogenizationCase,
    compact_support_case,
    default_forcing,
    run_rate_study,
)
from suspensia.solver import SolverConfig


def main():
    config = SolverConfig(mu_stiff=1e4)
    cell = gen_periodic_lattice(4.0, 4.0, 1.0, 0.25)
    cell_grid = StaggeredGrid(64, 4.0)
    print("solving cell problems...")
    cs = CorrectorSet.compute(cell_grid, cell, config)
    eff = EffectiveTensors(cs)
    print(f"effective tensor diag: {eff.B_bar[0, 0]:.4f}, "
          f"{eff.B_bar[1, 1]:.4f}, lambda {eff.lam:.4f}\n")

    eps_list = [1 / 4, 1 / 8, 1 / 16]

    def progress(row):
        print(f"  eps {row['epsilon']:.4g} (N={int(16 / row['epsilon'])}): "
              f"H1 {row['err_H1']:.3e}, pressure {row['err_pressure']:.3e}")

    print("== generic forcing (boundary layer limited) ==")
    case = HomogenizationCase(cell, default_forcing(), eps_list, config=config)
    rep = run_rate_study(case, lambda e: cs, eff, progress)
    print(f"fitted H1 slope {rep.velocity_slope:.3f} "
          f"(reference {rep.reference_slope})\n")

    print("== compact-support forcing (no boundary layer) ==")
    forcing, _ = compact_support_case(eff.B_bar, eff.lam)
    case2 = HomogenizationCase(cell, forcing, eps_list, compact_support=True,
                               config=config)
    rep2 = run_rate_study(case2, lambda e: cs, eff, progress)
    print(f"fitted H1 slope {rep2.velocity_slope:.3f} "
          f"(reference {rep2.reference_slope})")


if __name__ == "__main__":
    main()
