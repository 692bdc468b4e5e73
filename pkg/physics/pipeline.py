import logging
from dataclasses import dataclass

from physics.capacitance import CapacitanceMatrix, capacitance_matrix
from physics.geometry import GapProfile, ResonatorPair, SurfaceMesh, gap_profile, mesh_pair
from physics.laplace_bem import DensitySolution, SingleLayerSystem, assemble, solve_densities

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PairSolution:
    pair: ResonatorPair
    profile: GapProfile
    mesh: SurfaceMesh
    system: SingleLayerSystem | None
    densities: DensitySolution
    capacitance: CapacitanceMatrix


def solve_pair(
    pair: ResonatorPair,
    level: int,
    grading: float | None = None,
    depth: int | None = None,
    workers: int | None = None,
    keep_system: bool = False,
) -> PairSolution:
    """Mesh, assemble, solve and extract the capacitance matrix of one configuration.

    The dense system is dropped after the solve unless ``keep_system`` is set.
    """
    mesh = mesh_pair(pair, level, grading=grading, depth=depth)
    system = assemble(mesh, workers=workers)
    densities = solve_densities(system, mesh)
    capacitance = capacitance_matrix(mesh, densities)
    logger.info(
        "eps=%.4e N=%d C11=%.6g C12=%.6g cond=%.3e",
        pair.eps,
        mesh.n_panels,
        capacitance.c[0, 0],
        capacitance.c[0, 1],
        densities.condition,
    )
    return PairSolution(
        pair=pair,
        profile=gap_profile(pair),
        mesh=mesh,
        system=system if keep_system else None,
        densities=densities,
        capacitance=capacitance,
    )
