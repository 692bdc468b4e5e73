"""Panel integrals of the 1/r kernel over flat triangles.

All routines are vectorized over rows: row k integrates over triangle
(v0[k], v1[k], v2[k]) with target point x[k].
"""

from collections.abc import Callable

import numpy as np

# 7-point degree-5 rule (barycentric coordinates, weights sum to 1)
_A1, _B1 = 0.059715871789770, 0.470142064105115
_A2, _B2 = 0.797426985353087, 0.101286507323456
DUNAVANT7_POINTS = np.array(
    [
        [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        [_A1, _B1, _B1],
        [_B1, _A1, _B1],
        [_B1, _B1, _A1],
        [_A2, _B2, _B2],
        [_B2, _A2, _B2],
        [_B2, _B2, _A2],
    ]
)
DUNAVANT7_WEIGHTS = np.array(
    [0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3,
)


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", a, b)


def triangle_areas(v0: np.ndarray, v1: np.ndarray, v2: np.ndarray) -> np.ndarray:
    return 0.5 * np.linalg.norm(np.cross(v1 - v0, v2 - v0), axis=1)


def triangle_diameters(v0: np.ndarray, v1: np.ndarray, v2: np.ndarray) -> np.ndarray:
    return np.maximum.reduce(
        [np.linalg.norm(v1 - v0, axis=1), np.linalg.norm(v2 - v1, axis=1), np.linalg.norm(v0 - v2, axis=1)]
    )


def triangle_rule(v0: np.ndarray, v1: np.ndarray, v2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Physical nodes (P, 7, 3) and area-scaled weights (P, 7)."""
    bary = DUNAVANT7_POINTS
    nodes = bary[None, :, 0, None] * v0[:, None, :] + bary[None, :, 1, None] * v1[:, None, :]
    nodes = nodes + bary[None, :, 2, None] * v2[:, None, :]
    weights = DUNAVANT7_WEIGHTS[None, :] * triangle_areas(v0, v1, v2)[:, None]
    return nodes, weights


def rule_potential(x: np.ndarray, v0: np.ndarray, v1: np.ndarray, v2: np.ndarray) -> np.ndarray:
    nodes, weights = triangle_rule(v0, v1, v2)
    r = np.linalg.norm(x[:, None, :] - nodes, axis=2)
    return np.sum(weights / r, axis=1)


def rule_gradient(x: np.ndarray, v0: np.ndarray, v1: np.ndarray, v2: np.ndarray) -> np.ndarray:
    """Integral of (x - y) / |x - y|^3, shape (P, 3)."""
    nodes, weights = triangle_rule(v0, v1, v2)
    diff = x[:, None, :] - nodes
    r = np.linalg.norm(diff, axis=2)
    return np.sum((weights / r**3)[:, :, None] * diff, axis=1)


def _edge_terms(x: np.ndarray, v0: np.ndarray, v1: np.ndarray, v2: np.ndarray):
    """Plane normal, signed height w0 of x and per-edge (m_hat, t0, f, beta).

    m_hat is the in-plane outward edge normal, t0 the distance of the projection
    of x to the edge line, f = asinh(s+ / r0) - asinh(s- / r0) and beta the
    angle subtended by the edge. The betas sum to the solid angle of the panel.
    """
    cross = np.cross(v1 - v0, v2 - v0)
    normal = cross / np.linalg.norm(cross, axis=1)[:, None]
    w0 = _dot(x - v0, normal)
    abs_w0 = np.abs(w0)
    projected = x - w0[:, None] * normal

    terms = []
    for p_minus, p_plus in ((v0, v1), (v1, v2), (v2, v0)):
        edge = p_plus - p_minus
        length = np.linalg.norm(edge, axis=1)
        s_hat = edge / length[:, None]
        m_hat = np.cross(s_hat, normal)
        s_minus = _dot(p_minus - projected, s_hat)
        s_plus = _dot(p_plus - projected, s_hat)
        t0 = _dot(p_minus - projected, m_hat)
        r0_sq = t0**2 + w0**2
        r0 = np.sqrt(r0_sq)
        r_plus = np.linalg.norm(x - p_plus, axis=1)
        r_minus = np.linalg.norm(x - p_minus, axis=1)

        # x on the edge line: finite limit beyond the segment, zero on it
        on_line = r0 <= 1e-14 * length
        safe_r0 = np.where(on_line, 1.0, r0)
        beyond = on_line & (s_plus * s_minus > 0.0)
        safe_ratio = np.where(beyond, np.abs(s_plus) / np.where(beyond, np.abs(s_minus), 1.0), 1.0)
        f = np.where(
            on_line,
            np.where(beyond, np.sign(s_plus) * np.log(safe_ratio), 0.0),
            np.arcsinh(s_plus / safe_r0) - np.arcsinh(s_minus / safe_r0),
        )
        beta = np.arctan2(t0 * s_plus, r0_sq + abs_w0 * r_plus) - np.arctan2(t0 * s_minus, r0_sq + abs_w0 * r_minus)
        terms.append((m_hat, t0, f, beta))
    return normal, w0, terms


def analytic_potential(x: np.ndarray, v0: np.ndarray, v1: np.ndarray, v2: np.ndarray) -> np.ndarray:
    """Exact integral of 1/|x - y| over a flat triangle, on and off its plane.

    Sum over edges of t0 * f - |w0| * beta.
    """
    _, w0, terms = _edge_terms(x, v0, v1, v2)
    abs_w0 = np.abs(w0)
    return sum(t0 * f - abs_w0 * beta for _, t0, f, beta in terms)


def analytic_gradient(x: np.ndarray, v0: np.ndarray, v1: np.ndarray, v2: np.ndarray) -> np.ndarray:
    """Exact integral of (x - y) / |x - y|^3 over a flat triangle, shape (P, 3).

    Sum over edges of m_hat * f, plus sign(w0) times the solid angle along the
    normal. In the plane of the panel the normal part is the principal value 0.
    """
    normal, w0, terms = _edge_terms(x, v0, v1, v2)
    in_plane = sum(m_hat * f[:, None] for m_hat, _, f, _ in terms)
    solid_angle = sum(beta for _, _, _, beta in terms)
    return in_plane + (np.sign(w0) * solid_angle)[:, None] * normal


def split_triangles(
    owner: np.ndarray, v0: np.ndarray, v1: np.ndarray, v2: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Midpoint refinement into four children with the parent's orientation."""
    m01 = 0.5 * (v0 + v1)
    m12 = 0.5 * (v1 + v2)
    m20 = 0.5 * (v2 + v0)
    return (
        np.tile(owner, 4),
        np.concatenate([v0, m01, m20, m01]),
        np.concatenate([m01, v1, m12, m12]),
        np.concatenate([m20, m12, v2, m20]),
    )


Kernel = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def adaptive_integral(
    x: np.ndarray,
    v0: np.ndarray,
    v1: np.ndarray,
    v2: np.ndarray,
    max_depth: int,
    leaf: Kernel,
    at_cap: Kernel,
    value_shape: tuple[int, ...] = (),
) -> np.ndarray:
    """Recursive 4-way subdivision until a sub-panel's diameter is below its distance to x.

    Sub-panels still near the target at `max_depth` are integrated by `at_cap`.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    total = np.zeros((n,) + value_shape)
    owner = np.arange(n)
    for depth in range(max_depth + 1):
        if owner.size == 0:
            break
        centroid = (v0 + v1 + v2) / 3.0
        dist = np.linalg.norm(x[owner] - centroid, axis=1)
        resolved = dist > triangle_diameters(v0, v1, v2)
        if resolved.any():
            k = resolved
            np.add.at(total, owner[k], leaf(x[owner[k]], v0[k], v1[k], v2[k]))
        pending = ~resolved
        if depth == max_depth:
            if pending.any():
                k = pending
                np.add.at(total, owner[k], at_cap(x[owner[k]], v0[k], v1[k], v2[k]))
            break
        owner, v0, v1, v2 = split_triangles(owner[pending], v0[pending], v1[pending], v2[pending])
    return total


def near_potential(x: np.ndarray, v0: np.ndarray, v1: np.ndarray, v2: np.ndarray, max_depth: int) -> np.ndarray:
    return adaptive_integral(x, v0, v1, v2, max_depth, rule_potential, analytic_potential)
