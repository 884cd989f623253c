import pytest

from elastic_avgdist.analysis import node_mass_refinement
from elastic_avgdist.datasets import disk_uniform
from elastic_avgdist.geometry import EnergyParams
from elastic_avgdist.optimizer import FitConfig

DISK_PARAMS = EnergyParams(0.1, 1e-3, 2.0)


@pytest.fixture(scope="session")
def disk_cloud():
    return disk_uniform(4000, seed=0)


@pytest.fixture(scope="session")
def disk_refinement(disk_cloud):
    """Disk fits at 16 and 128 nodes: list of (n_nodes, max interior mass, FitReport)."""
    return node_mass_refinement(disk_cloud, DISK_PARAMS, [16, 128], FitConfig())
