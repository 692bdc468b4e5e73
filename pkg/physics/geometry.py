"""Two-resonator geometry.

Bodies are convex and touch their tangent plane at a single pole. The lower
body (tag 2) sits below {x3 = 0} with its pole at the origin; the upper body
(tag 1) is the mirror image of its local shape, lifted so that its pole is at
(0, 0, eps). All height functions are measured from the pole, so near the
axis the two boundaries are x3 = eps + h1(x') and x3 = h2(x').

Meshes are latitude-longitude triangulations whose polar angle is measured
from the contact pole, graded geometrically toward it.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, ValidationError, model_validator
from scipy.special import beta as beta_fn

from physics.config import settings
from physics.errors import GeometryError, MeshingError

logger = logging.getLogger(__name__)

DEGENERATE_AREA = 1e-14


class ShapeFamily(str, Enum):
    SPHERE = "sphere"
    SUPERELLIPSOID = "superellipsoid"
    ELLIPSOID = "ellipsoid"


# ── Shapes ─────────────────────────────────────────────────────


class BodySpec(BaseModel):
    shape_family: ShapeFamily = ShapeFamily.SPHERE
    a: float = Field(default=1.0, gt=0)
    m: int = Field(default=2, ge=2)
    axes: Optional[tuple[float, float, float]] = None

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def _check_family(self) -> "BodySpec":
        if self.shape_family == ShapeFamily.SPHERE and self.m != 2:
            raise ValueError("a sphere has convexity order m = 2")
        if self.shape_family == ShapeFamily.ELLIPSOID:
            if self.axes is None or min(self.axes) <= 0:
                raise ValueError("an ellipsoid needs three positive semiaxes")
            if self.m != 2:
                raise ValueError("an ellipsoid has convexity order m = 2")
        elif self.axes is not None:
            raise ValueError("semiaxes apply to ellipsoids only")
        return self

    @classmethod
    def sphere(cls, a: float = 1.0) -> "BodySpec":
        return cls(shape_family=ShapeFamily.SPHERE, a=a, m=2)

    @classmethod
    def superellipsoid(cls, a: float = 1.0, m: int = 4) -> "BodySpec":
        return cls(shape_family=ShapeFamily.SUPERELLIPSOID, a=a, m=m)

    @classmethod
    def ellipsoid(cls, a1: float, a2: float, a3: float) -> "BodySpec":
        return cls(shape_family=ShapeFamily.ELLIPSOID, a=min(a1, a2), m=2, axes=(a1, a2, a3))

    @property
    def is_ellipsoid(self) -> bool:
        return self.shape_family == ShapeFamily.ELLIPSOID

    @property
    def half_width(self) -> float:
        """Smallest radius of the footprint seen from the pole."""
        if self.is_ellipsoid:
            return min(self.axes[0], self.axes[1])
        return self.a

    @property
    def height(self) -> float:
        """Distance from the body center to its contact pole."""
        return self.axes[2] if self.is_ellipsoid else self.a

    @property
    def lambda_pair(self) -> tuple[float, float]:
        """Leading coefficients of the pole height along x1 and x2."""
        if self.is_ellipsoid:
            a1, a2, a3 = self.axes
            return a3 / (2.0 * a1**2), a3 / (2.0 * a2**2)
        lam = 1.0 / (self.m * self.a ** (self.m - 1))
        return lam, lam

    def contact_height(self, x1, x2) -> np.ndarray:
        """Height of the boundary above the tangent plane at the pole.

        NaN outside the footprint of the body.
        """
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        if self.is_ellipsoid:
            a1, a2, a3 = self.axes
            s2 = (x1 / a1) ** 2 + (x2 / a2) ** 2
            with np.errstate(invalid="ignore"):
                h = a3 * s2 / (1.0 + np.sqrt(1.0 - s2))
            return np.where(s2 <= 1.0, h, np.nan)
        t = (np.hypot(x1, x2) / self.a) ** self.m
        with np.errstate(invalid="ignore", divide="ignore"):
            h = -self.a * np.expm1(np.log1p(-t) / self.m)
        return np.where(t <= 1.0, h, np.nan)

    def contact_height_gradient(self, x1, x2) -> np.ndarray:
        """Gradient of `contact_height` in x', shape (..., 2)."""
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        if self.is_ellipsoid:
            a1, a2, a3 = self.axes
            s2 = (x1 / a1) ** 2 + (x2 / a2) ** 2
            with np.errstate(invalid="ignore", divide="ignore"):
                root = np.sqrt(1.0 - s2)
                g1 = a3 * x1 / (a1**2 * root)
                g2 = a3 * x2 / (a2**2 * root)
            inside = s2 < 1.0
            return np.stack([np.where(inside, g1, np.nan), np.where(inside, g2, np.nan)], axis=-1)
        m, a = self.m, self.a
        r = np.hypot(x1, x2)
        with np.errstate(invalid="ignore", divide="ignore"):
            factor = (a**m - r**m) ** (1.0 / m - 1.0) * r ** (m - 2)
        factor = np.where(r < a, factor, np.nan)
        return np.stack([factor * x1, factor * x2], axis=-1)

    def surface_points(self, phi: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """Boundary points in local coordinates, polar angle measured from the pole at +z."""
        phi = np.asarray(phi, dtype=float)
        theta = np.asarray(theta, dtype=float)
        sin_phi, cos_phi = np.sin(phi), np.cos(phi)
        if self.is_ellipsoid:
            a1, a2, a3 = self.axes
            return np.stack(
                np.broadcast_arrays(a1 * sin_phi * np.cos(theta), a2 * sin_phi * np.sin(theta), a3 * cos_phi),
                axis=-1,
            )
        m = self.m
        radius = self.a / (np.abs(sin_phi) ** m + np.abs(cos_phi) ** m) ** (1.0 / m)
        return np.stack(
            np.broadcast_arrays(radius * sin_phi * np.cos(theta), radius * sin_phi * np.sin(theta), radius * cos_phi),
            axis=-1,
        )

    def implicit(self, local: np.ndarray) -> np.ndarray:
        """Negative inside, zero on the boundary, positive outside (local coordinates)."""
        local = np.asarray(local, dtype=float)
        if self.is_ellipsoid:
            return np.sum((local / np.asarray(self.axes)) ** 2, axis=-1) - 1.0
        r = np.hypot(local[..., 0], local[..., 1]) / self.a
        z = np.abs(local[..., 2]) / self.a
        return r**self.m + z**self.m - 1.0

    def exact_volume(self) -> float:
        if self.is_ellipsoid:
            a1, a2, a3 = self.axes
            return 4.0 * np.pi * a1 * a2 * a3 / 3.0
        if self.shape_family == ShapeFamily.SPHERE:
            return 4.0 * np.pi * self.a**3 / 3.0
        m = self.m
        return float(2.0 * np.pi * self.a**3 * beta_fn(1.0 / m, 2.0 / m + 1.0) / m)


# ── Pair and gap profile ───────────────────────────────────────


class ResonatorPair(BaseModel):
    upper: BodySpec
    lower: BodySpec
    eps: float = Field(gt=0)

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def _check_orders(self) -> "ResonatorPair":
        if self.upper.m != self.lower.m:
            raise ValueError(
                f"gap profile undefined: convexity orders differ ({self.upper.m} vs {self.lower.m})"
            )
        return self

    @property
    def m(self) -> int:
        return self.upper.m

    @property
    def upper_center(self) -> np.ndarray:
        return np.array([0.0, 0.0, self.eps + self.upper.height])

    @property
    def lower_center(self) -> np.ndarray:
        return np.array([0.0, 0.0, -self.lower.height])

    @property
    def r0(self) -> float:
        return 0.5 * min(self.upper.half_width, self.lower.half_width)

    @property
    def is_spheres(self) -> bool:
        return self.upper.shape_family == ShapeFamily.SPHERE and self.lower.shape_family == ShapeFamily.SPHERE

    @property
    def scale(self) -> float:
        return max(self.upper.half_width, self.lower.half_width, self.upper.height, self.lower.height)

    def h1(self, x1, x2) -> np.ndarray:
        return self.upper.contact_height(x1, x2)

    def h2(self, x1, x2) -> np.ndarray:
        return -self.lower.contact_height(x1, x2)

    def gap_width(self, x1, x2) -> np.ndarray:
        """d(x') = eps + (h1 - h2)(x')."""
        return self.eps + self.h1(x1, x2) - self.h2(x1, x2)

    def to_local(self, points: np.ndarray, tag: int) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if tag == 1:
            local = points - self.upper_center
            return local * np.array([1.0, 1.0, -1.0])
        return points - self.lower_center

    def to_world(self, local: np.ndarray, tag: int) -> np.ndarray:
        if tag == 1:
            return local * np.array([1.0, 1.0, -1.0]) + self.upper_center
        return local + self.lower_center

    def body_at(self, points: np.ndarray, margin: float = 0.0) -> np.ndarray:
        """Tag of the body containing each point (0 for the exterior).

        With `margin` > 0 each body is inflated about its center by that
        relative amount before testing.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        tags = np.zeros(len(points), dtype=int)
        for tag, body in ((1, self.upper), (2, self.lower)):
            local = self.to_local(points, tag) / (1.0 + margin)
            tags[body.implicit(local) < 0.0] = tag
        return tags


class GapProfile(BaseModel):
    m: int = Field(ge=2)
    lam: float = Field(gt=0)
    lam_pair: Optional[tuple[float, float]] = None
    r0: float = Field(gt=0)

    model_config = {"frozen": True}

    @property
    def is_anisotropic(self) -> bool:
        return self.lam_pair is not None

    def leading(self, x1, x2) -> np.ndarray:
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        if self.lam_pair is not None:
            return self.lam_pair[0] * x1**2 + self.lam_pair[1] * x2**2
        return self.lam * np.hypot(x1, x2) ** self.m

    def pinch_radius(self, eps: float) -> float:
        """Radius where the profile term equals the gap, (eps / lam)^(1/m)."""
        return (eps / self.lam) ** (1.0 / self.m)


def build_pair(upper: BodySpec, lower: BodySpec, eps: float) -> ResonatorPair:
    """Place the lower pole at the origin and the upper pole at (0', eps).

    Raises:
        GeometryError: if eps is not positive or the convexity orders differ.
    """
    if not eps > 0:
        raise GeometryError(f"gap must be positive, got {eps!r}")
    try:
        return ResonatorPair(upper=upper, lower=lower, eps=eps)
    except ValidationError as err:
        raise GeometryError(str(err)) from err


def gap_profile(pair: ResonatorPair) -> GapProfile:
    lx = pair.upper.lambda_pair[0] + pair.lower.lambda_pair[0]
    ly = pair.upper.lambda_pair[1] + pair.lower.lambda_pair[1]
    if pair.upper.is_ellipsoid or pair.lower.is_ellipsoid:
        return GapProfile(m=2, lam=float(np.sqrt(lx * ly)), lam_pair=(lx, ly), r0=pair.r0)
    return GapProfile(m=pair.m, lam=lx, r0=pair.r0)


def gap_profile_samples(pair: ResonatorPair, radii, angle: float = 0.0) -> np.ndarray:
    """Ratio (h1 - h2)(x') / leading profile along the ray at `angle`."""
    radii = np.asarray(radii, dtype=float)
    x1, x2 = radii * np.cos(angle), radii * np.sin(angle)
    profile = gap_profile(pair)
    return (pair.h1(x1, x2) - pair.h2(x1, x2)) / profile.leading(x1, x2)


# ── Surface mesh ───────────────────────────────────────────────


@dataclass(frozen=True)
class SurfaceMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    body_tag: np.ndarray
    centroids: np.ndarray
    normals: np.ndarray
    areas: np.ndarray
    diameters: np.ndarray
    level: int
    grading: float | None = None

    @classmethod
    def from_arrays(
        cls,
        vertices: np.ndarray,
        triangles: np.ndarray,
        body_tag: np.ndarray,
        scale: float = 1.0,
        level: int = 0,
        grading: float | None = None,
    ) -> "SurfaceMesh":
        """Compute per-panel geometry.

        Raises:
            MeshingError: on a panel with area below 1e-14 * scale**2.
        """
        vertices = np.asarray(vertices, dtype=float)
        triangles = np.asarray(triangles, dtype=np.int64)
        v0, v1, v2 = (vertices[triangles[:, k]] for k in range(3))
        cross = np.cross(v1 - v0, v2 - v0)
        twice_area = np.linalg.norm(cross, axis=1)
        areas = 0.5 * twice_area
        bad = np.flatnonzero(areas < DEGENERATE_AREA * scale**2)
        if bad.size:
            raise MeshingError(f"degenerate panel {bad[0]} (area {areas[bad[0]]:.3e})", panel=int(bad[0]))
        edges = np.stack(
            [np.linalg.norm(v1 - v0, axis=1), np.linalg.norm(v2 - v1, axis=1), np.linalg.norm(v0 - v2, axis=1)],
            axis=1,
        )
        return cls(
            vertices=vertices,
            triangles=triangles,
            body_tag=np.asarray(body_tag, dtype=int),
            centroids=(v0 + v1 + v2) / 3.0,
            normals=cross / twice_area[:, None],
            areas=areas,
            diameters=edges.max(axis=1),
            level=level,
            grading=grading,
        )

    @property
    def n_panels(self) -> int:
        return len(self.triangles)

    @property
    def tags(self) -> list[int]:
        return sorted(int(t) for t in np.unique(self.body_tag))

    @property
    def min_diameter(self) -> float:
        return float(self.diameters.min())

    def mask(self, tag: int) -> np.ndarray:
        return self.body_tag == tag

    def panel_vertices(self, index=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        tri = self.triangles if index is None else self.triangles[index]
        return self.vertices[tri[..., 0]], self.vertices[tri[..., 1]], self.vertices[tri[..., 2]]


def _lat_count(level: int) -> int:
    return max(4, int(round(8 * np.sqrt(2.0) ** level)))


def latitude_nodes(level: int, h_min: float | None = None, grading: float = 1.6) -> np.ndarray:
    """Polar angles from the pole (0) to the antipode (pi).

    Without `h_min` the bands are uniform. Otherwise the first band has
    width `h_min` and widths grow by `grading` until they reach the
    uniform width.
    """
    n_lat = _lat_count(level)
    base = np.pi / n_lat
    if h_min is None or h_min >= base:
        return np.linspace(0.0, np.pi, n_lat + 1)
    widths = []
    w = h_min
    while w < base:
        widths.append(w)
        w *= grading
    graded = np.cumsum(widths)
    n_rest = max(1, int(round((np.pi - graded[-1]) / base)))
    rest = np.linspace(graded[-1], np.pi, n_rest + 1)
    return np.concatenate([[0.0], graded, rest[1:]])


def _lat_long(body: BodySpec, phis: np.ndarray, n_az: int) -> tuple[np.ndarray, np.ndarray]:
    rings = phis[1:-1]
    n_rings = len(rings)
    if n_rings < 1:
        raise MeshingError("latitude grid needs at least one interior ring")
    theta = 2.0 * np.pi * np.arange(n_az) / n_az
    ring_points = body.surface_points(rings[:, None], theta[None, :]).reshape(-1, 3)
    north = body.surface_points(np.array(0.0), np.array(0.0))
    south = body.surface_points(np.array(np.pi), np.array(0.0))
    vertices = np.vstack([north[None, :], ring_points, south[None, :]])
    # Pole vertices sit exactly on the axis.
    vertices[0, :2] = 0.0
    vertices[-1, :2] = 0.0

    j = np.arange(n_az)
    j1 = (j + 1) % n_az
    south_index = len(vertices) - 1

    def ring(k: int, cols: np.ndarray) -> np.ndarray:
        return 1 + k * n_az + cols

    faces = [np.stack([np.zeros(n_az, dtype=np.int64), ring(0, j), ring(0, j1)], axis=1)]
    for k in range(n_rings - 1):
        a, b = ring(k, j), ring(k, j1)
        c, d = ring(k + 1, j), ring(k + 1, j1)
        faces.append(np.stack([a, c, b], axis=1))
        faces.append(np.stack([b, c, d], axis=1))
    last = n_rings - 1
    faces.append(np.stack([ring(last, j), np.full(n_az, south_index), ring(last, j1)], axis=1))
    return vertices, np.vstack(faces).astype(np.int64)


def mesh_body(body: BodySpec, level: int, center=(0.0, 0.0, 0.0)) -> SurfaceMesh:
    """Uniform latitude-longitude mesh of a single body, tagged 1."""
    if level < 0:
        raise MeshingError(f"level must be >= 0, got {level}")
    n_lat = _lat_count(level)
    vertices, faces = _lat_long(body, latitude_nodes(level), 2 * n_lat)
    vertices = vertices + np.asarray(center, dtype=float)
    return SurfaceMesh.from_arrays(vertices, faces, np.ones(len(faces), dtype=int), scale=body.half_width, level=level)


def mesh_pair(
    pair: ResonatorPair,
    level: int,
    grading: float | None = None,
    depth: int | None = None,
) -> SurfaceMesh:
    """Graded mesh of both bodies, tag 1 for the upper body and 2 for the lower one.

    The first band around each contact pole has angular width
    max(eps / (4 a), (pi / n_lat) * grading**-depth).
    """
    grading = settings.GRADING if grading is None else grading
    depth = settings.GRADING_DEPTH if depth is None else depth
    if level < 0:
        raise MeshingError(f"level must be >= 0, got {level}")
    if not 1.0 < grading <= 3.0:
        raise MeshingError(f"grading ratio must lie in (1, 3], got {grading}")

    n_lat = _lat_count(level)
    n_az = 2 * n_lat
    base = np.pi / n_lat
    vertex_blocks, face_blocks, tag_blocks = [], [], []
    offset = 0
    for tag, body in ((1, pair.upper), (2, pair.lower)):
        h_min = max(pair.eps / (4.0 * body.half_width), base * grading ** (-depth))
        local, faces = _lat_long(body, latitude_nodes(level, h_min, grading), n_az)
        world = pair.to_world(local, tag)
        if tag == 1:
            # reflected in x3
            faces = faces[:, [0, 2, 1]]
        vertex_blocks.append(world)
        face_blocks.append(faces + offset)
        tag_blocks.append(np.full(len(faces), tag, dtype=int))
        offset += len(world)

    mesh = SurfaceMesh.from_arrays(
        np.vstack(vertex_blocks),
        np.vstack(face_blocks),
        np.concatenate(tag_blocks),
        scale=min(pair.upper.half_width, pair.lower.half_width),
        level=level,
        grading=grading,
    )
    logger.info(
        "Meshed pair eps=%.3e level=%d: %d panels, min diameter %.3e",
        pair.eps,
        level,
        mesh.n_panels,
        mesh.min_diameter,
    )
    return mesh


# ── Topology and volume ────────────────────────────────────────


def _body_triangles(mesh: SurfaceMesh, tag: int) -> np.ndarray:
    tri = mesh.triangles[mesh.mask(tag)]
    if len(tri) == 0:
        raise GeometryError(f"no panels tagged {tag}")
    return tri


def check_watertight(mesh: SurfaceMesh, tag: int) -> None:
    """Every edge shared by exactly two consistently oriented panels of the body.

    Raises:
        MeshingError: on an open or inconsistently oriented edge.
    """
    tri = _body_triangles(mesh, tag)
    directed = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    _, counts = np.unique(np.sort(directed, axis=1), axis=0, return_counts=True)
    if np.any(counts != 2):
        raise MeshingError(f"body {tag} is not watertight ({int(np.sum(counts != 2))} open edges)")
    _, directed_counts = np.unique(directed, axis=0, return_counts=True)
    if np.any(directed_counts != 1):
        raise MeshingError(f"body {tag} has inconsistently oriented panels")


def euler_characteristic(mesh: SurfaceMesh, tag: int) -> int:
    tri = _body_triangles(mesh, tag)
    n_vertices = len(np.unique(tri))
    edges = np.sort(np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]]), axis=1)
    n_edges = len(np.unique(edges, axis=0))
    return n_vertices - n_edges + len(tri)


def volume(mesh: SurfaceMesh, tag: int) -> float:
    """Divergence-theorem volume (1/3) * sum((c . n) * area) over the body's panels."""
    _body_triangles(mesh, tag)
    check_watertight(mesh, tag)
    mask = mesh.mask(tag)
    flux = np.einsum("ij,ij->i", mesh.centroids[mask], mesh.normals[mask])
    return float(np.sum(flux * mesh.areas[mask]) / 3.0)


def write_off(mesh: SurfaceMesh, path: Path) -> Path:
    path = Path(path)
    lines = ["OFF", f"{len(mesh.vertices)} {mesh.n_panels} 0"]
    lines.extend(f"{x:.17g} {y:.17g} {z:.17g}" for x, y, z in mesh.vertices)
    lines.extend(f"3 {i} {j} {k}" for i, j, k in mesh.triangles)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
