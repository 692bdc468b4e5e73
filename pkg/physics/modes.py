"""Leading-order eigenmodes u_n = S[phi_n] with phi_n = r_n * psi_1 + psi_2.

Also the Keller comparison function (x3 - h2) / d(x') of the gap and the
gradient blow-up measurements along eps-sweeps.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from physics.asymptotics import loglog_slope
from physics.capacitance import CapacitanceMatrix, frequency_from_eigen
from physics.config import settings
from physics.errors import CapacitanceError, DomainError, FitError
from physics.geometry import BodySpec, ResonatorPair, SurfaceMesh, build_pair
from physics.laplace_bem import DensitySolution, SingleLayerSystem, eval_gradient, eval_potential
from physics.materials import MaterialParams
from physics.pipeline import PairSolution, solve_pair

logger = logging.getLogger(__name__)

MIN_BLOWUP_POINTS = 4
MIN_BLOWUP_DECADES = 1.5


@dataclass(frozen=True)
class EigenMode:
    index: int
    density: np.ndarray
    ratio: float
    lam: float
    omega: Optional[float] = None

    @property
    def boundary_values(self) -> tuple[float, float]:
        """Leading-order values of u_n on dD_1 and dD_2."""
        return self.ratio, 1.0


def build_mode(
    n: int,
    densities: DensitySolution,
    capacitance: CapacitanceMatrix,
    materials: MaterialParams | None = None,
) -> EigenMode:
    """Mode density phi_n = r_n * psi_1 + psi_2 (the O(omega) correction is dropped).

    Raises:
        CapacitanceError: if n is not 1 or 2, or the bodies are decoupled.
    """
    if n not in (1, 2):
        raise CapacitanceError(f"mode index must be 1 or 2, got {n}")
    reduction = capacitance.reduction
    ratio = reduction.r1 if n == 1 else reduction.r2
    if ratio is None:
        raise CapacitanceError("C_bar21 = 0: mode densities undefined for decoupled bodies")
    lam = reduction.lambda1 if n == 1 else reduction.lambda2
    omega = frequency_from_eigen(lam, materials) if materials is not None else None
    return EigenMode(
        index=n,
        density=ratio * densities.psi1 + densities.psi2,
        ratio=ratio,
        lam=lam,
        omega=omega,
    )


def mode_boundary_values(mode: EigenMode, system: SingleLayerSystem) -> np.ndarray:
    """S[phi_n] at every panel centroid."""
    return system.matrix @ mode.density


# ── Gap sampling ───────────────────────────────────────────────


@dataclass(frozen=True)
class GapGrid:
    points: np.ndarray
    kinds: tuple[str, ...]
    radii: np.ndarray


def gap_grid(pair: ResonatorPair, n_axis: int = 9, ring_points: int = 16) -> GapGrid:
    """Axial points between the poles plus rings at |x'| in {eps^(1/m), 2 eps^(1/m), R0/2}.

    Ring points sit halfway between the two surfaces; rings outside
    |x'| < 2 R0 are dropped.
    """
    eps = pair.eps
    t = eps * np.arange(1, n_axis + 1) / (n_axis + 1)
    blocks = [np.stack([np.zeros(n_axis), np.zeros(n_axis), t], axis=1)]
    kinds = ["axis"] * n_axis
    radii = [np.zeros(n_axis)]

    pinch = eps ** (1.0 / pair.m)
    limit = min(2.0 * pair.r0, 0.95 * min(pair.upper.half_width, pair.lower.half_width))
    angles = 2.0 * np.pi * np.arange(ring_points) / ring_points
    for radius in (pinch, 2.0 * pinch, 0.5 * pair.r0):
        if radius >= limit:
            continue
        x1, x2 = radius * np.cos(angles), radius * np.sin(angles)
        x3 = 0.5 * (eps + pair.h1(x1, x2) + pair.h2(x1, x2))
        blocks.append(np.stack([x1, x2, x3], axis=1))
        kinds.extend(["ring"] * ring_points)
        radii.append(np.full(ring_points, radius))
    return GapGrid(points=np.vstack(blocks), kinds=tuple(kinds), radii=np.concatenate(radii))


def too_close(mesh: SurfaceMesh, points: np.ndarray, max_depth: int | None = None) -> np.ndarray:
    """Points nearer to the plane of their closest panel than the finest subdivision scale."""
    max_depth = settings.MAX_SUBDIVISION if max_depth is None else max_depth
    points = np.atleast_2d(points)
    dist = np.linalg.norm(points[:, None, :] - mesh.centroids[None, :, :], axis=2)
    nearest = np.argmin(dist, axis=1)
    clearance = np.abs(np.einsum("pk,pk->p", points - mesh.centroids[nearest], mesh.normals[nearest]))
    return clearance < mesh.diameters[nearest] * 2.0 ** (-max_depth)


@dataclass(frozen=True)
class GapScan:
    grid: GapGrid
    values: np.ndarray
    gradients: np.ndarray
    skipped: np.ndarray

    @property
    def magnitudes(self) -> np.ndarray:
        return np.linalg.norm(self.gradients, axis=1)

    @property
    def max_gradient(self) -> float:
        return float(np.nanmax(self.magnitudes))

    @property
    def argmax(self) -> np.ndarray:
        return self.grid.points[int(np.nanargmax(self.magnitudes))]


def scan_gap(pair: ResonatorPair, mesh: SurfaceMesh, density: np.ndarray, grid: GapGrid | None = None) -> GapScan:
    grid = gap_grid(pair) if grid is None else grid
    skipped = too_close(mesh, grid.points)
    if skipped.any():
        logger.warning("Skipping %d gap points closer than the near-field resolution", int(skipped.sum()))
    values = np.full(len(grid.points), np.nan)
    gradients = np.full((len(grid.points), 3), np.nan)
    kept = ~skipped
    if kept.any():
        values[kept] = eval_potential(mesh, density, grid.points[kept])
        gradients[kept] = eval_gradient(mesh, density, grid.points[kept])
    return GapScan(grid=grid, values=values, gradients=gradients, skipped=skipped)


# ── Keller comparison function ─────────────────────────────────


def keller_function(pair: ResonatorPair, x, zero_outside: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Value and gradient of (x3 - h2(x')) / d(x') on the gap region |x'| < 2 R0.

    Raises:
        DomainError: for points outside the gap unless `zero_outside`, which
            extends the function by zero.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    points = np.atleast_2d(x)
    x1, x2, x3 = points[:, 0], points[:, 1], points[:, 2]

    h1 = pair.h1(x1, x2)
    h2 = pair.h2(x1, x2)
    top = pair.eps + h1
    limit = min(2.0 * pair.r0, min(pair.upper.half_width, pair.lower.half_width))
    slack = 1e-12 * pair.scale
    with np.errstate(invalid="ignore"):
        inside = (np.hypot(x1, x2) < limit) & np.isfinite(top) & (x3 >= h2 - slack) & (x3 <= top + slack)
    if not zero_outside and not inside.all():
        k = int(np.flatnonzero(~inside)[0])
        raise DomainError(f"point {points[k].tolist()} lies outside the gap region")

    with np.errstate(invalid="ignore", divide="ignore"):
        d = top - h2
        height = x3 - h2
        value = height / d
        grad_h1 = pair.upper.contact_height_gradient(x1, x2)
        grad_h2 = -pair.lower.contact_height_gradient(x1, x2)
        lateral = (-grad_h2 * d[:, None] - height[:, None] * (grad_h1 - grad_h2)) / (d**2)[:, None]
        gradient = np.column_stack([lateral, 1.0 / d])

    value = np.where(inside, value, 0.0)
    gradient = np.where(inside[:, None], gradient, 0.0)
    return (value[0], gradient[0]) if single else (value, gradient)


@dataclass(frozen=True)
class KellerReport:
    eps: float
    deviations: np.ndarray
    skipped: int
    midline_scaled: float  # |grad v1(0', eps/2)| * eps
    keller_peak: float  # d/dx3 of the comparison function at x' = 0, i.e. 1/eps

    @property
    def max_deviation(self) -> float:
        return float(np.nanmax(self.deviations))


def keller_bound_check(
    pair: ResonatorPair,
    mesh: SurfaceMesh,
    psi1: np.ndarray,
    grid: GapGrid | None = None,
) -> KellerReport:
    """Max over the grid of |grad v1 - grad of the comparison function|, zero-extended outside the gap."""
    scan = scan_gap(pair, mesh, psi1, grid)
    _, keller_gradient = keller_function(pair, scan.grid.points, zero_outside=True)
    deviations = np.linalg.norm(scan.gradients - keller_gradient, axis=1)
    midline = eval_gradient(mesh, psi1, np.array([0.0, 0.0, 0.5 * pair.eps]))
    return KellerReport(
        eps=pair.eps,
        deviations=deviations,
        skipped=int(scan.skipped.sum()),
        midline_scaled=float(np.linalg.norm(midline) * pair.eps),
        keller_peak=1.0 / pair.eps,
    )


# ── Gradient blow-up ───────────────────────────────────────────


@dataclass(frozen=True)
class BlowupPoint:
    eps: float
    max_grad_u1: float
    max_grad_u2: float
    max_grad_sum: float  # |grad(v1 + v2)|
    max_grad_v1: float
    r1: float
    r2: float
    capacitance: CapacitanceMatrix
    condition: float
    trusted: bool

    @property
    def gradient_ratio(self) -> float:
        return self.max_grad_u1 / self.max_grad_u2


def blowup_point(solution: PairSolution, grid: GapGrid | None = None) -> BlowupPoint:
    """Max gradients of both modes over the gap grid, by superposition of the psi_1 and psi_2 fields."""
    reduction = solution.capacitance.reduction
    if reduction.r1 is None:
        raise CapacitanceError("C_bar21 = 0: mode densities undefined for decoupled bodies")
    grid = gap_grid(solution.pair) if grid is None else grid
    scan1 = scan_gap(solution.pair, solution.mesh, solution.densities.psi1, grid)
    scan2 = scan_gap(solution.pair, solution.mesh, solution.densities.psi2, grid)
    g1, g2 = scan1.gradients, scan2.gradients

    def peak(gradients: np.ndarray) -> float:
        return float(np.nanmax(np.linalg.norm(gradients, axis=1)))

    return BlowupPoint(
        eps=solution.pair.eps,
        max_grad_u1=peak(reduction.r1 * g1 + g2),
        max_grad_u2=peak(reduction.r2 * g1 + g2),
        max_grad_sum=peak(g1 + g2),
        max_grad_v1=peak(g1),
        r1=reduction.r1,
        r2=reduction.r2,
        capacitance=solution.capacitance,
        condition=solution.densities.condition,
        trusted=solution.densities.trusted,
    )


def blowup_scan(
    upper: BodySpec,
    lower: BodySpec,
    eps_values,
    level: int,
    grading: float | None = None,
    depth: int | None = None,
    workers: int | None = None,
) -> list[BlowupPoint]:
    """Solve every gap of the sweep and measure mode gradients; results keep the input order."""
    workers = settings.SWEEP_WORKERS if workers is None else workers

    def run(eps: float) -> BlowupPoint:
        pair = build_pair(upper, lower, float(eps))
        return blowup_point(solve_pair(pair, level, grading=grading, depth=depth))

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(run, eps_values))


@dataclass(frozen=True)
class BlowupReport:
    eps: np.ndarray
    max_grad_u1: np.ndarray
    max_grad_u2: np.ndarray
    slope_u2: float
    prefactor_u2: float
    slope_u1: float

    @property
    def ratios(self) -> np.ndarray:
        return self.max_grad_u1 / self.max_grad_u2

    @property
    def ratio_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.ratios) < 0))


def blowup_slopes(eps, max_grad_u1, max_grad_u2) -> BlowupReport:
    """Log-log slopes of the max gradients against 1/eps, ordered from the largest gap down.

    Raises:
        FitError: on fewer than four points or less than 1.5 decades of eps.
    """
    eps = np.asarray(eps, dtype=float)
    if len(eps) < MIN_BLOWUP_POINTS:
        raise FitError(f"need at least {MIN_BLOWUP_POINTS} sweep points, got {len(eps)}")
    decades = math.log10(eps.max() / eps.min())
    if decades < MIN_BLOWUP_DECADES:
        raise FitError(f"sweep spans {decades:.2f} decades of eps; need {MIN_BLOWUP_DECADES}")
    order = np.argsort(eps)[::-1]
    eps = eps[order]
    u1 = np.asarray(max_grad_u1, dtype=float)[order]
    u2 = np.asarray(max_grad_u2, dtype=float)[order]
    slope_u2, prefactor_u2 = loglog_slope(1.0 / eps, u2)
    slope_u1, _ = loglog_slope(1.0 / eps, u1)
    logger.info("Blow-up slopes vs 1/eps: u2 %.4f, u1 %.4f", slope_u2, slope_u1)
    return BlowupReport(
        eps=eps,
        max_grad_u1=u1,
        max_grad_u2=u2,
        slope_u2=slope_u2,
        prefactor_u2=prefactor_u2,
        slope_u1=slope_u1,
    )
