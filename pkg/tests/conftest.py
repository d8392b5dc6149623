import numpy as np
import pytest

from suspensia.geometry import InclusionSet, Shape, gen_periodic_lattice
from suspensia.solver import SolverConfig


@pytest.fixture
def lattice_cell():
    # one disk per 4x4 period, volume fraction pi/16
    return gen_periodic_lattice(4.0, 4.0, 1.0, 0.25)


@pytest.fixture
def fast_config():
    return SolverConfig(mu_stiff=1e3, rel_tolerance=1e-8)


def single_disk(box_size, radius, delta=0.25):
    return InclusionSet(
        centers=np.array([[box_size / 2, box_size / 2]]),
        shapes=(Shape("disk", radius),),
        delta=delta,
        box_size=box_size,
        periodic=True,
    )
