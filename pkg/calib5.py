"""Calibration for the rate-study redesign: denser scale separation."""
import sys

from suspensia.corrector import CorrectorSet
from suspensia.effective import EffectiveTensors
from suspensia.fields import StaggeredGrid
from suspensia.geometry import gen_periodic_lattice
from suspensia.homog import (HomogenizationCase, compact_support_case,
                             default_forcing, run_rate_study)
from suspensia.solver import SolverConfig

CFG = SolverConfig(mu_stiff=1e4, rel_tolerance=1e-7)


def progress(row):
    print(f"  eps {row['epsilon']:.4g}: H1 {row['err_H1']:.3e}, "
          f"P {row['err_pressure']:.3e}", file=sys.stderr, flush=True)


def main(which):
    if which == "plain2":
        geo = gen_periodic_lattice(2.0, 2.0, 0.5, 0.25)
        cs = CorrectorSet.compute(StaggeredGrid(32, 2.0), geo, CFG)
        eff = EffectiveTensors(cs)
        print("B diag:", eff.B_bar[0, 0], eff.B_bar[1, 1], file=sys.stderr)
        case = HomogenizationCase(geo, default_forcing(),
                                  [1 / 8, 1 / 16, 1 / 32], config=CFG)
        rep = run_rate_study(case, lambda e: cs, eff, progress)
        print("plain box-2 slope (3 pts):", rep.velocity_slope,
              file=sys.stderr)
    elif which == "compact1":
        geo = gen_periodic_lattice(1.0, 1.0, 0.25, 0.2)
        cs = CorrectorSet.compute(StaggeredGrid(16, 1.0), geo, CFG)
        eff = EffectiveTensors(cs)
        print("B diag:", eff.B_bar[0, 0], eff.B_bar[1, 1], file=sys.stderr)
        forcing, _ = compact_support_case(eff.B_bar, eff.lam)
        case = HomogenizationCase(geo, forcing, [1 / 8, 1 / 16, 1 / 32],
                                  compact_support=True, config=CFG)
        rep = run_rate_study(case, lambda e: cs, eff, progress)
        print("compact box-1 slope (3 pts):", rep.velocity_slope,
              file=sys.stderr)


if __name__ == "__main__":
    main(sys.argv[1])
