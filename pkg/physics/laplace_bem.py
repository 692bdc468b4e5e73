"""Laplace single-layer operator with kernel G(x, y) = -1 / (4 pi |x - y|).

Piecewise-constant densities, centroid collocation. Self terms are exact,
near pairs use adaptive subdivision, far pairs the centroid rule. Field
evaluation adds a band of 7-point panels between the near and far zones.
"""

import logging
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, get_lapack_funcs, lu_factor, lu_solve

from physics.config import settings
from physics.errors import DomainError, GeometryError, SolverError
from physics.geometry import ResonatorPair, SurfaceMesh
from physics.quadrature import analytic_gradient, analytic_potential, near_potential, rule_gradient, rule_potential

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * np.pi
DUMP_MAGIC = b"SLS0"
_EVAL_CHUNK = 256
# panels closer than this many near-field radii get the 7-point rule instead of a point charge
_RULE_BAND = 4.0


@dataclass(frozen=True)
class SingleLayerSystem:
    matrix: np.ndarray  # collocation A[i, j] = int_j G(c_i, y)
    galerkin: np.ndarray  # symmetrized diag(area) @ A
    areas: np.ndarray
    near_factor: float
    max_depth: int
    near_pairs: int
    self_rule: str = "analytic"

    @property
    def n(self) -> int:
        return len(self.areas)

    def asymmetry(self) -> float:
        """Relative Frobenius asymmetry of diag(area) @ A before averaging."""
        weighted = self.areas[:, None] * self.matrix
        return float(np.linalg.norm(weighted - weighted.T) / np.linalg.norm(weighted))


@dataclass(frozen=True)
class DensitySolution:
    columns: np.ndarray  # (N, bodies), column k solves S[psi] = 1 on body tags[k]
    tags: tuple[int, ...]
    residual: float
    collocation_residual: float
    condition: float
    trusted: bool
    method: str

    @property
    def psi1(self) -> np.ndarray:
        return self.columns[:, 0]

    @property
    def psi2(self) -> np.ndarray:
        if self.columns.shape[1] < 2:
            raise SolverError("single-body solution has no second density")
        return self.columns[:, 1]


# ── Assembly ───────────────────────────────────────────────────


def _assemble_rows(mesh: SurfaceMesh, rows: np.ndarray, near_factor: float, max_depth: int) -> tuple[np.ndarray, int]:
    centroids = mesh.centroids
    diff = centroids[rows, None, :] - centroids[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    local = np.arange(len(rows))

    near = dist < near_factor * np.maximum(mesh.diameters[rows, None], mesh.diameters[None, :])
    near[local, rows] = False

    with np.errstate(divide="ignore"):
        block = mesh.areas[None, :] / dist

    ri, cj = np.nonzero(near)
    if ri.size:
        cross_body = mesh.body_tag[rows[ri]] != mesh.body_tag[cj]
        touching = cross_body & (dist[ri, cj] <= 1e-12 * mesh.diameters[cj])
        if touching.any():
            k = np.flatnonzero(touching)[0]
            raise GeometryError(f"panels {rows[ri[k]]} and {cj[k]} of different bodies overlap")
        v0, v1, v2 = mesh.panel_vertices(cj)
        block[ri, cj] = near_potential(centroids[rows[ri]], v0, v1, v2, max_depth)

    v0, v1, v2 = mesh.panel_vertices(rows)
    block[local, rows] = analytic_potential(centroids[rows], v0, v1, v2)
    return -block / FOUR_PI, int(ri.size)


def assemble(
    mesh: SurfaceMesh,
    near_factor: float | None = None,
    max_depth: int | None = None,
    block_size: int | None = None,
    workers: int | None = None,
) -> SingleLayerSystem:
    """Dense collocation matrix of the single-layer operator, assembled by row blocks.

    Raises:
        GeometryError: if panels of different bodies touch.
    """
    near_factor = settings.NEAR_FIELD_FACTOR if near_factor is None else near_factor
    max_depth = settings.MAX_SUBDIVISION if max_depth is None else max_depth
    block_size = settings.ASSEMBLY_BLOCK if block_size is None else block_size
    workers = settings.ASSEMBLY_WORKERS if workers is None else workers

    n = mesh.n_panels
    started = time.monotonic()
    blocks = [np.arange(start, min(start + block_size, n)) for start in range(0, n, block_size)]
    matrix = np.empty((n, n))
    near_pairs = 0
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = pool.map(lambda rows: _assemble_rows(mesh, rows, near_factor, max_depth), blocks)
        for rows, (values, count) in zip(blocks, results, strict=True):
            matrix[rows] = values
            near_pairs += count

    weighted = mesh.areas[:, None] * matrix
    galerkin = 0.5 * (weighted + weighted.T)
    elapsed_ms = int((time.monotonic() - started) * 1000)
    logger.info("Assembled %dx%d single-layer matrix (%d near pairs) in %d ms", n, n, near_pairs, elapsed_ms)
    return SingleLayerSystem(
        matrix=matrix,
        galerkin=galerkin,
        areas=mesh.areas.copy(),
        near_factor=near_factor,
        max_depth=max_depth,
        near_pairs=near_pairs,
    )


# ── Solve ──────────────────────────────────────────────────────


def _rcond(routine: str, factor: np.ndarray, anorm: float) -> float:
    (lapack,) = get_lapack_funcs((routine,), (factor,))
    rcond, info = lapack(factor, anorm)
    if info != 0:
        raise SolverError(f"{routine} failed with info={info}")
    return float(rcond)


def solve_densities(
    system: SingleLayerSystem,
    mesh: SurfaceMesh,
    condition_limit: float | None = None,
) -> DensitySolution:
    """Solve S[psi_k] = indicator of body k for every body from one factorization.

    The symmetrized system is negative definite, so -B is factored by
    Cholesky; LU is the fallback when that fails.

    Raises:
        SolverError: if the factorization produces non-finite densities.
    """
    condition_limit = settings.CONDITION_LIMIT if condition_limit is None else condition_limit
    tags = tuple(mesh.tags)
    rhs = np.stack([(mesh.body_tag == tag).astype(float) for tag in tags], axis=1)
    weighted_rhs = system.areas[:, None] * rhs

    negative = -system.galerkin
    try:
        factor, lower = cho_factor(negative, lower=False, check_finite=False)
        columns = cho_solve((factor, lower), -weighted_rhs, check_finite=False)
        rcond = _rcond("pocon", factor, float(np.linalg.norm(negative, 1)))
        method = "cholesky"
    except LinAlgError:
        logger.warning("Cholesky factorization failed, falling back to LU")
        lu, piv = lu_factor(system.galerkin, check_finite=False)
        columns = lu_solve((lu, piv), weighted_rhs, check_finite=False)
        rcond = _rcond("gecon", lu, float(np.linalg.norm(system.galerkin, 1)))
        method = "lu"

    if not np.all(np.isfinite(columns)):
        raise SolverError("dense solve produced non-finite densities")

    condition = 1.0 / rcond if rcond > 0 else float("inf")
    trusted = condition <= condition_limit
    if not trusted:
        logger.warning("Condition estimate %.3e exceeds %.1e; solution untrusted", condition, condition_limit)

    residual = float(np.max(np.abs(system.galerkin @ columns - weighted_rhs)))
    collocation_residual = float(np.max(np.abs(system.matrix @ columns - rhs)))
    return DensitySolution(
        columns=columns,
        tags=tags,
        residual=residual,
        collocation_residual=collocation_residual,
        condition=condition,
        trusted=trusted,
        method=method,
    )


# ── Field evaluation ───────────────────────────────────────────


def _assert_exterior(mesh: SurfaceMesh, points: np.ndarray) -> None:
    """Convex-body test: a point is inside a body when it lies behind every panel plane."""
    for tag in mesh.tags:
        mask = mesh.mask(tag)
        centroids, normals = mesh.centroids[mask], mesh.normals[mask]
        for start in range(0, len(points), _EVAL_CHUNK):
            chunk = points[start : start + _EVAL_CHUNK]
            side = np.einsum("pnk,nk->pn", chunk[:, None, :] - centroids[None, :, :], normals)
            inside = np.all(side < 0.0, axis=1)
            if inside.any():
                k = start + int(np.flatnonzero(inside)[0])
                raise DomainError(f"point {points[k].tolist()} lies inside body {tag}")


def _field(
    mesh: SurfaceMesh,
    density: np.ndarray,
    points,
    gradient: bool,
    near_factor: float | None,
    max_depth: int | None,
) -> np.ndarray:
    near_factor = settings.NEAR_FIELD_FACTOR if near_factor is None else near_factor
    max_depth = settings.MAX_SUBDIVISION if max_depth is None else max_depth
    points = np.asarray(points, dtype=float)
    single = points.ndim == 1
    points = np.atleast_2d(points)
    _assert_exterior(mesh, points)

    density = np.asarray(density, dtype=float)
    charge = mesh.areas * density
    out = np.zeros((len(points), 3) if gradient else len(points))
    for start in range(0, len(points), _EVAL_CHUNK):
        chunk = points[start : start + _EVAL_CHUNK]
        diff = chunk[:, None, :] - mesh.centroids[None, :, :]
        dist = np.linalg.norm(diff, axis=2)
        near = dist < near_factor * mesh.diameters[None, :]
        band = ~near & (dist < _RULE_BAND * near_factor * mesh.diameters[None, :])
        point_charge = ~(near | band)
        with np.errstate(divide="ignore", invalid="ignore"):
            if gradient:
                far = np.where(point_charge, charge[None, :] / dist**3, 0.0)
                values = np.einsum("pn,pnk->pk", far, diff)
            else:
                values = np.sum(np.where(point_charge, charge[None, :] / dist, 0.0), axis=1)
        for mask, exact in ((near, True), (band, False)):
            pi, pj = np.nonzero(mask)
            if not pi.size:
                continue
            v0, v1, v2 = mesh.panel_vertices(pj)
            if gradient:
                kernel = analytic_gradient if exact else rule_gradient
                local = kernel(chunk[pi], v0, v1, v2) * density[pj, None]
            elif exact:
                local = near_potential(chunk[pi], v0, v1, v2, max_depth) * density[pj]
            else:
                local = rule_potential(chunk[pi], v0, v1, v2) * density[pj]
            np.add.at(values, pi, local)
        out[start : start + len(chunk)] = values

    # grad_x G = (x - y) / (4 pi |x - y|^3)
    out = out / FOUR_PI if gradient else -out / FOUR_PI
    return out[0] if single else out


def eval_potential(mesh: SurfaceMesh, density, x, near_factor: float | None = None, max_depth: int | None = None):
    """S[density](x) for one point (3,) or many (P, 3).

    Raises:
        DomainError: if a point lies inside a body.
    """
    return _field(mesh, density, x, False, near_factor, max_depth)


def eval_gradient(mesh: SurfaceMesh, density, x, near_factor: float | None = None):
    """Gradient of S[density] at exterior points, shape (3,) or (P, 3).

    Near panels are integrated in closed form at any distance from the boundary.
    """
    return _field(mesh, density, x, True, near_factor, None)


def flux_through_sphere(
    mesh: SurfaceMesh,
    density,
    radius: float,
    center=(0.0, 0.0, 0.0),
    n_polar: int = 24,
    n_azimuth: int = 48,
) -> float:
    """-(flux of grad S[density] through the sphere |x - center| = radius)."""
    nodes, weights = np.polynomial.legendre.leggauss(n_polar)
    phi = 2.0 * np.pi * np.arange(n_azimuth) / n_azimuth
    sin_t = np.sqrt(1.0 - nodes**2)
    directions = np.stack(
        [
            sin_t[:, None] * np.cos(phi)[None, :],
            sin_t[:, None] * np.sin(phi)[None, :],
            np.repeat(nodes[:, None], n_azimuth, axis=1),
        ],
        axis=-1,
    ).reshape(-1, 3)
    points = np.asarray(center, dtype=float) + radius * directions
    normal_derivative = np.einsum("pk,pk->p", eval_gradient(mesh, density, points), directions)
    quad_weights = np.repeat(weights, n_azimuth) * (2.0 * np.pi / n_azimuth) * radius**2
    return float(-np.sum(quad_weights * normal_derivative))


# ── Probe points ───────────────────────────────────────────────


@dataclass(frozen=True)
class ProbeSet:
    gap_midline: np.ndarray
    far_sphere: np.ndarray
    exterior: np.ndarray

    def all(self) -> np.ndarray:
        return np.vstack([self.gap_midline, self.far_sphere, self.exterior])


def probe_points(
    pair: ResonatorPair,
    seed: int | None = None,
    n_far: int = 32,
    n_exterior: int = 32,
    far_radius: float = 10.0,
) -> ProbeSet:
    """Fixed probe set: gap midline, sphere |x| = far_radius * a, seeded exterior points."""
    seed = settings.PROBE_SEED if seed is None else seed
    rng = np.random.default_rng(seed)
    scale = pair.scale

    t = pair.eps * np.array([0.25, 0.5, 0.75])
    midline = np.stack([np.zeros_like(t), np.zeros_like(t), t], axis=1)

    directions = rng.normal(size=(n_far, 3))
    directions /= np.linalg.norm(directions, axis=1)[:, None]
    far = far_radius * scale * directions

    candidates = rng.uniform(-3.0 * scale, 3.0 * scale, size=(8 * n_exterior, 3))
    candidates[:, 2] += pair.eps / 2.0
    outside = pair.body_at(candidates, margin=0.1) == 0
    exterior = candidates[outside][:n_exterior]
    return ProbeSet(gap_midline=midline, far_sphere=far, exterior=exterior)


# ── Matrix dump ────────────────────────────────────────────────


def dump_matrix(system: SingleLayerSystem, path: Path) -> Path:
    """Binary dump: magic "SLS0", u32 N, two reserved u32, then row-major float64."""
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(DUMP_MAGIC + struct.pack("<III", system.n, 0, 0))
        fh.write(np.ascontiguousarray(system.matrix, dtype="<f8").tobytes())
    return path


def load_matrix(path: Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:4] != DUMP_MAGIC:
        raise SolverError(f"{path} is not a single-layer matrix dump")
    (n, _, _) = struct.unpack("<III", data[4:16])
    matrix = np.frombuffer(data[16:], dtype="<f8")
    if matrix.size != n * n:
        raise SolverError(f"{path}: expected {n * n} entries, found {matrix.size}")
    return matrix.reshape(n, n).copy()
