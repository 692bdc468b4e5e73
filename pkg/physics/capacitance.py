"""Capacitance matrix C_ij = -int_{dD_i} psi_j and its eigenvalue reduction."""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from physics.errors import CapacitanceError, DomainError
from physics.geometry import SurfaceMesh, volume
from physics.laplace_bem import DensitySolution
from physics.materials import MaterialParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EigenReduction:
    lambda1: float
    lambda2: float
    r1: Optional[float]
    r2: Optional[float]
    sigma1: float
    sigma2: float
    c_star: float

    @property
    def lambdas(self) -> tuple[float, float]:
        return self.lambda1, self.lambda2


@dataclass(frozen=True)
class CapacitanceMatrix:
    c: np.ndarray
    volumes: tuple[float, float]
    reduction: EigenReduction
    flags: tuple[str, ...] = ()

    @property
    def c_bar(self) -> np.ndarray:
        return self.c / np.asarray(self.volumes)[:, None]

    @property
    def valid(self) -> bool:
        return "sign_violation" not in self.flags

    @property
    def symmetry_error(self) -> float:
        return float(abs(self.c[0, 1] - self.c[1, 0]) / abs(self.c[0, 1]))

    @property
    def row_sums(self) -> tuple[float, float]:
        return float(self.c[0, 0] + self.c[0, 1]), float(self.c[1, 0] + self.c[1, 1])


def eigen_reduction(c_bar: np.ndarray) -> EigenReduction:
    """Closed-form eigenvalues, eigenvector ratios, sigma_i and C_* of the rescaled matrix.

    lambda1 is the minus branch. With c_bar[1, 0] == 0 the bodies are
    decoupled and the ratios are None.

    Raises:
        CapacitanceError: on non-finite entries or complex eigenvalues.
    """
    c_bar = np.asarray(c_bar, dtype=float)
    if c_bar.shape != (2, 2) or not np.all(np.isfinite(c_bar)):
        raise CapacitanceError(f"rescaled capacitance must be a finite 2x2 matrix, got {c_bar!r}")
    b11, b12 = float(c_bar[0, 0]), float(c_bar[0, 1])
    b21, b22 = float(c_bar[1, 0]), float(c_bar[1, 1])

    trace = b11 + b22
    discriminant = (b11 - b22) ** 2 + 4.0 * b12 * b21
    if discriminant < 0:
        raise CapacitanceError(f"complex eigenvalues (discriminant {discriminant:.3e})")
    if trace == 0:
        raise CapacitanceError("C_* undefined for a traceless matrix")
    root = math.sqrt(discriminant)
    lambda1 = 0.5 * (trace - root)
    lambda2 = 0.5 * (trace + root)

    sigma1 = b11 + b12
    sigma2 = b22 + b21
    c_star = (b11 * sigma2 + b22 * sigma1) / trace

    if b21 == 0:
        r1 = r2 = None
    else:
        r1 = (lambda1 - b22) / b21
        r2 = (lambda2 - b22) / b21
    return EigenReduction(
        lambda1=lambda1, lambda2=lambda2, r1=r1, r2=r2, sigma1=sigma1, sigma2=sigma2, c_star=c_star
    )


def capacitance_from_entries(c: np.ndarray, volumes: tuple[float, float]) -> CapacitanceMatrix:
    c = np.asarray(c, dtype=float)
    if min(volumes) <= 0:
        raise CapacitanceError(f"volumes must be positive, got {volumes}")
    flags = []
    if c[0, 0] <= 0 or c[1, 1] <= 0 or c[0, 1] >= 0 or c[1, 0] >= 0:
        logger.warning("Capacitance sign violation: %s", c.tolist())
        flags.append("sign_violation")
    reduction = eigen_reduction(c / np.asarray(volumes)[:, None])
    if reduction.r1 is None:
        flags.append("decoupled")
    return CapacitanceMatrix(c=c, volumes=(float(volumes[0]), float(volumes[1])), reduction=reduction, flags=tuple(flags))


def capacitance_matrix(
    mesh: SurfaceMesh,
    densities: DensitySolution,
    volumes: tuple[float, float] | None = None,
) -> CapacitanceMatrix:
    """C_ij = -sum over panels p of body i of psi_j(p) * area(p).

    Volumes default to the mesh's divergence-theorem volumes.
    """
    if len(densities.tags) != 2:
        raise CapacitanceError("capacitance matrix needs a two-body solution")
    if volumes is None:
        volumes = (volume(mesh, 1), volume(mesh, 2))
    c = np.empty((2, 2))
    for i, tag in enumerate(densities.tags):
        mask = mesh.mask(tag)
        for j in range(2):
            c[i, j] = -np.sum(densities.columns[mask, j] * mesh.areas[mask])
    return capacitance_from_entries(c, volumes)


def isolated_capacitance(mesh: SurfaceMesh, densities: DensitySolution) -> float:
    """-int psi for a single-body solution."""
    return float(-np.sum(densities.columns[:, 0] * mesh.areas))


def frequency_from_eigen(lam: float, materials: MaterialParams) -> float:
    """Leading-order resonance sqrt(delta * v_b**2 * lam).

    Raises:
        CapacitanceError: if lam is not positive.
        DomainError: if delta is outside (0, 1).
    """
    if not lam > 0:
        raise CapacitanceError(f"eigenvalue must be positive, got {lam!r}")
    if not 0 < materials.delta < 1:
        raise DomainError(f"contrast delta must lie in (0, 1), got {materials.delta}")
    return math.sqrt(materials.delta * materials.v_b**2 * lam)


def wavenumbers(omegas, materials: MaterialParams) -> np.ndarray:
    """Interior wavenumbers k_b = omega / v_b."""
    return np.asarray(omegas, dtype=float) / materials.v_b


def lambda2_leading(reduction: EigenReduction, c_bar: np.ndarray) -> float:
    """Leading behaviour of lambda2: C_bar11 + C_bar22 - C_*."""
    return float(c_bar[0, 0] + c_bar[1, 1] - reduction.c_star)
