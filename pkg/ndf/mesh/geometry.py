"""
Geometry utilities on triangle meshes: frames, barycentric gradients,
point-triangle distance, uniform sampling and component filtering.
"""
import logging
from typing import Tuple

import numpy as np

from ndf.errors import DegenerateFaceError, MeshError
from ndf.mesh.halfedge import (DEGENERATE_AREA, HalfedgeMesh, SurfacePoint,
                               SurfacePoints, face_components)

logger = logging.getLogger(__name__)


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum('ij,ij->i', a, b)


def closest_point_on_triangles(p: np.ndarray, a: np.ndarray, b: np.ndarray,
                               c: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Closest points of `p[i]` on triangles `(a[i], b[i], c[i])`.

    Voronoi-region classification (vertex, edge, interior) evaluated for
    all rows at once. Returns (points, barycentric weights).
    """
    ab, ac, ap = b - a, c - a, p - a
    bp, cp = p - b, p - c
    d1, d2 = _dot(ab, ap), _dot(ac, ap)
    d3, d4 = _dot(ab, bp), _dot(ac, bp)
    d5, d6 = _dot(ab, cp), _dot(ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    with np.errstate(divide='ignore', invalid='ignore'):
        denom = va + vb + vc
        v_in = np.where(denom != 0, vb / denom, 1.0 / 3.0)
        w_in = np.where(denom != 0, vc / denom, 1.0 / 3.0)
        bary = np.stack([1.0 - v_in - w_in, v_in, w_in], axis=1)

        # later assignments take precedence, so regions run in reverse order
        t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        m = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
        bary[m] = np.stack([np.zeros(m.sum()), 1 - t[m], t[m]], axis=1)

        t = d2 / (d2 - d6)
        m = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
        bary[m] = np.stack([1 - t[m], np.zeros(m.sum()), t[m]], axis=1)

        m = (d6 >= 0) & (d5 <= d6)
        bary[m] = [0.0, 0.0, 1.0]

        t = d1 / (d1 - d3)
        m = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
        bary[m] = np.stack([1 - t[m], t[m], np.zeros(m.sum())], axis=1)

        m = (d3 >= 0) & (d4 <= d3)
        bary[m] = [0.0, 1.0, 0.0]

        m = (d1 <= 0) & (d2 <= 0)
        bary[m] = [1.0, 0.0, 0.0]

    bary = np.clip(bary, 0.0, 1.0)
    bary /= bary.sum(axis=1, keepdims=True)
    points = bary[:, :1] * a + bary[:, 1:2] * b + bary[:, 2:] * c
    return points, bary


def face_frames(mesh: HalfedgeMesh, faces: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Orthonormal (normal, tangent1, tangent2) per face.

    tangent1 follows the face's first edge, tangent2 = normal x tangent1.
    """
    c = mesh.corners(faces)
    e1 = c[:, 1] - c[:, 0]
    cross = np.cross(e1, c[:, 2] - c[:, 0])
    area2 = np.linalg.norm(cross, axis=1)
    if np.any(area2 < 2 * DEGENERATE_AREA):
        bad = np.asarray(faces).reshape(-1)[np.flatnonzero(area2 < 2 * DEGENERATE_AREA)[0]]
        raise DegenerateFaceError(f"Face {int(bad)} is degenerate")
    n = cross / area2[:, None]
    t1 = e1 - _dot(e1, n)[:, None] * n
    t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
    t2 = np.cross(n, t1)
    return n, t1, t2


def frame_at(mesh: HalfedgeMesh, p: SurfacePoint) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    n, t1, t2 = face_frames(mesh, np.array([p.face]))
    return n[0], t1[0], t2[0]


def barycentric_gradients(mesh: HalfedgeMesh, faces: np.ndarray) -> np.ndarray:
    """(n, 3, 3) array; row k is the gradient of barycentric weight k on its face."""
    c = mesh.corners(faces)
    cross = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
    area2 = np.linalg.norm(cross, axis=1)
    n = cross / area2[:, None]
    grads = np.empty_like(c)
    for k in range(3):
        opposite = c[:, (k + 2) % 3] - c[:, (k + 1) % 3]
        grads[:, k] = np.cross(n, opposite) / area2[:, None]
    return grads


def sample_uniform(mesh: HalfedgeMesh, n: int, seed=None) -> SurfacePoints:
    """Area-weighted face choice, uniform barycentrics; deterministic per seed."""
    if n < 1:
        raise MeshError("Sample count must be at least 1")
    rng = np.random.default_rng(seed)
    areas = mesh.face_areas
    faces = rng.choice(mesh.n_faces, size=n, p=areas / areas.sum())
    r1, r2 = rng.random(n), rng.random(n)
    s = np.sqrt(r1)
    bary = np.stack([1.0 - s, s * (1.0 - r2), s * r2], axis=1)
    return SurfacePoints(faces, bary)


def largest_component(mesh: HalfedgeMesh) -> HalfedgeMesh:
    """Edge-connected component of largest area; ties go to the lowest face index."""
    if mesh.n_faces == 0:
        raise MeshError("Mesh is empty")
    n_comp, labels = face_components(mesh)
    if n_comp == 1:
        return mesh
    area = np.bincount(labels, weights=mesh.face_areas, minlength=n_comp)
    first_face = np.full(n_comp, mesh.n_faces)
    np.minimum.at(first_face, labels, np.arange(mesh.n_faces))
    best = np.lexsort((first_face, -area))[0]
    logger.info(f"Keeping component {best} of {n_comp} ({area[best]:.4g} of {area.sum():.4g} area)")
    return mesh.submesh(labels == best)


def odt_energy(vertices: np.ndarray, faces: np.ndarray) -> float:
    """Sum over edges of squared length times the summed area of its two triangles."""
    c = np.asarray(vertices)[np.asarray(faces)]
    e0, e1, e2 = c[:, 1] - c[:, 0], c[:, 2] - c[:, 1], c[:, 0] - c[:, 2]
    area = 0.5 * np.linalg.norm(np.cross(e0, -e2), axis=1)
    sq = _dot(e0, e0) + _dot(e1, e1) + _dot(e2, e2)
    return float((area * sq).sum())
