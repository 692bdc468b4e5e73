"""Capacitance of two spheres from the image-charge recursion.

The upper sphere (radius a1) is centered at (0, 0, a1 + eps), the lower one
(radius a2) at (0, 0, -a2), matching the pair layout. For the problem with
potential 1 on sphere k a charge a_k is placed at its center and reflected
back and forth: the image of a charge q at axial position z in the sphere
(a, c) is -q * a / s at c + sign(z - c) * a**2 / s, with s = |z - c|.
Charges inside sphere i sum to C_ik / (4 pi).
"""

import logging
from dataclasses import dataclass

import numpy as np

from physics.capacitance import CapacitanceMatrix, capacitance_from_entries
from physics.config import settings
from physics.errors import GeometryError, OracleError
from physics.geometry import ResonatorPair
from physics.pipeline import solve_pair

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True)
class ImageChargeSystem:
    radii: tuple[float, float]
    centers: tuple[float, float]
    families: tuple[np.ndarray, np.ndarray]  # rows of (charge, axial position)
    tails: tuple[float, float]
    tol: float

    def total(self, family: int) -> float:
        """Sum of a charge family including its geometric tail."""
        charges = self.families[family]
        return float(np.sum(charges[:, 0]) + self.tails[family]) if len(charges) else 0.0


def _validate(a1: float, a2: float, eps: float, tol: float) -> None:
    if a1 <= 0 or a2 <= 0:
        raise OracleError(f"radii must be positive, got {a1}, {a2}")
    if eps <= 0:
        raise OracleError(f"gap must be positive, got {eps}")
    if not 1e-14 < tol < 1e-6:
        raise OracleError(f"tolerance must lie in (1e-14, 1e-6), got {tol}")


def _geometric_tail(charges: np.ndarray) -> float:
    if len(charges) < 2 or charges[-2, 0] == 0:
        return 0.0
    ratio = charges[-1, 0] / charges[-2, 0]
    if not 0 < ratio < 1:
        return 0.0
    return float(charges[-1, 0] * ratio / (1.0 - ratio))


def image_charges(
    a1: float,
    a2: float,
    eps: float,
    source: int,
    tol: float | None = None,
    max_terms: int | None = None,
) -> ImageChargeSystem:
    """Image series for unit potential on sphere `source` (0 upper, 1 lower) and zero on the other.

    Raises:
        OracleError: on invalid input, a reflection ratio >= 1 or no convergence.
    """
    tol = settings.ORACLE_TOL if tol is None else tol
    max_terms = settings.ORACLE_MAX_TERMS if max_terms is None else max_terms
    _validate(a1, a2, eps, tol)

    radii = (a1, a2)
    centers = (a1 + eps, -a2)
    families: tuple[list, list] = ([], [])
    q, z, k = radii[source], centers[source], source
    families[k].append((q, z))
    for _ in range(max_terms):
        other = 1 - k
        a, c = radii[other], centers[other]
        s = abs(z - c)
        ratio = a / s
        if ratio >= 1:
            raise OracleError(f"reflection ratio {ratio:.6g} >= 1: spheres overlap")
        q = -q * ratio
        z = c + np.sign(z - c) * a * a / s
        k = other
        families[k].append((q, z))
        if abs(q) < tol * a1:
            break
    else:
        raise OracleError(f"image series did not reach tol={tol} within {max_terms} terms")

    arrays = tuple(np.array(f, dtype=float).reshape(-1, 2) for f in families)
    return ImageChargeSystem(
        radii=radii,
        centers=centers,
        families=arrays,
        tails=(_geometric_tail(arrays[0]), _geometric_tail(arrays[1])),
        tol=tol,
    )


def two_sphere_capacitance(
    a1: float,
    a2: float,
    eps: float,
    tol: float | None = None,
    max_terms: int | None = None,
) -> CapacitanceMatrix:
    """Image-charge capacitance matrix with exact sphere volumes."""
    c = np.empty((2, 2))
    for j in range(2):
        system = image_charges(a1, a2, eps, j, tol=tol, max_terms=max_terms)
        c[0, j] = FOUR_PI * system.total(0)
        c[1, j] = FOUR_PI * system.total(1)
    volumes = (4.0 * np.pi * a1**3 / 3.0, 4.0 * np.pi * a2**3 / 3.0)
    return capacitance_from_entries(c, volumes)


@dataclass(frozen=True)
class OracleComparison:
    oracle: CapacitanceMatrix
    bem: CapacitanceMatrix
    deviations: np.ndarray

    @property
    def max_deviation(self) -> float:
        return float(self.deviations.max())


def compare(oracle: CapacitanceMatrix, bem: CapacitanceMatrix) -> OracleComparison:
    deviations = np.abs(bem.c - oracle.c) / np.abs(oracle.c)
    return OracleComparison(oracle=oracle, bem=bem, deviations=deviations)


def oracle_vs_bem(
    pair: ResonatorPair,
    mesh_level: int,
    tol: float | None = None,
    grading: float | None = None,
    depth: int | None = None,
) -> OracleComparison:
    """Relative deviation of each BEM entry from the oracle.

    Raises:
        GeometryError: if the pair is not two spheres.
    """
    if not pair.is_spheres:
        raise GeometryError("the image-charge oracle applies to two spheres only")
    oracle = two_sphere_capacitance(pair.upper.a, pair.lower.a, pair.eps, tol=tol)
    solution = solve_pair(pair, mesh_level, grading=grading, depth=depth)
    comparison = compare(oracle, solution.capacitance)
    logger.info("Oracle vs BEM at eps=%.4g level=%d: max deviation %.3e", pair.eps, mesh_level, comparison.max_deviation)
    return comparison
