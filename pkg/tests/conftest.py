import numpy as np
import pytest

from cli.schemas.record import SweepRecord
from physics.geometry import BodySpec, build_pair, mesh_body
from physics.laplace_bem import assemble, solve_densities
from physics.pipeline import solve_pair

UNIT_SPHERE = BodySpec.sphere(1.0)
SPHERE_VOLUME = 4.0 * np.pi / 3.0


@pytest.fixture(scope="session")
def unit_sphere() -> BodySpec:
    return UNIT_SPHERE


@pytest.fixture(scope="session")
def sphere_pair():
    return build_pair(UNIT_SPHERE, UNIT_SPHERE, 0.5)


@pytest.fixture(scope="session")
def isolated_sphere():
    """Level-3 mesh of the unit sphere with its assembled system and density."""
    mesh = mesh_body(UNIT_SPHERE, level=3)
    system = assemble(mesh)
    return mesh, system, solve_densities(system, mesh)


@pytest.fixture(scope="session")
def coarse_sphere():
    mesh = mesh_body(UNIT_SPHERE, level=1)
    system = assemble(mesh)
    return mesh, system, solve_densities(system, mesh)


@pytest.fixture(scope="session")
def solved_spheres():
    """Two unit spheres at eps = 0.5, level 2."""
    return solve_pair(build_pair(UNIT_SPHERE, UNIT_SPHERE, 0.5), level=2, keep_system=True)


@pytest.fixture(scope="session")
def solved_close_spheres():
    """Two unit spheres at eps = 0.1, level 2."""
    return solve_pair(build_pair(UNIT_SPHERE, UNIT_SPHERE, 0.1), level=2)


def make_record(eps: float = 0.1, **overrides) -> SweepRecord:
    values = {
        "eps": eps,
        "m": 2,
        "lam": 1.0,
        "c11": 20.0,
        "c12": -15.0,
        "c21": -15.0,
        "c22": 20.0,
        "vol1": SPHERE_VOLUME,
        "vol2": SPHERE_VOLUME,
    }
    values.update(overrides)
    return SweepRecord(**values)
