"""
Quadric error metric decimation by greedy edge collapse.
"""
import heapq
import logging
import warnings
from typing import List, Tuple

import numpy as np

from ndf.errors import DecimationWarning, UsageError
from ndf.mesh.editable import EditableMesh
from ndf.mesh.halfedge import HalfedgeMesh

logger = logging.getLogger(__name__)

SINGULAR_DET = 1e-12


def face_quadrics(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Area-weighted plane quadrics (F, 4, 4)."""
    c = vertices[faces]
    n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
    area2 = np.linalg.norm(n, axis=1)
    unit = n / np.where(area2 > 0, area2, 1.0)[:, None]
    plane = np.concatenate([unit, -np.einsum('ij,ij->i', unit, c[:, 0])[:, None]], axis=1)
    return 0.5 * area2[:, None, None] * plane[:, :, None] * plane[:, None, :]


def vertex_quadrics(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    kf = face_quadrics(vertices, faces)
    q = np.zeros((len(vertices), 4, 4))
    for k in range(3):
        np.add.at(q, faces[:, k], kf)
    return q


def optimal_placement(q: np.ndarray, a: np.ndarray, b: np.ndarray) -> Tuple[float, np.ndarray]:
    """(cost, position) minimizing v^T Q v; the midpoint when Q is singular."""
    A = q[:3, :3]
    if abs(np.linalg.det(A)) < SINGULAR_DET:
        x = 0.5 * (a + b)
    else:
        x = np.linalg.solve(A, -q[:3, 3])
    h = np.append(x, 1.0)
    return max(float(h @ q @ h), 0.0), x


class _Decimator:

    def __init__(self, mesh: HalfedgeMesh):
        self.em = EditableMesh.from_mesh(mesh)
        self.quadrics: List[np.ndarray] = list(vertex_quadrics(mesh.vertices, mesh.faces))
        self.version = [0] * mesh.n_vertices
        self.heap: list = []
        self.pushed = 0
        for u, v in mesh.edges:
            self._push(int(u), int(v))

    def _push(self, u: int, v: int) -> None:
        u, v = min(u, v), max(u, v)
        q = self.quadrics[u] + self.quadrics[v]
        cost, x = optimal_placement(q, self.em.position(u), self.em.position(v))
        self.pushed += 1
        heapq.heappush(self.heap, (cost, self.pushed, u, v, self.version[u], self.version[v], x))

    def run(self, target_faces: int) -> int:
        em = self.em
        collapses = 0
        while em.n_alive_faces > target_faces and self.heap:
            _, _, u, v, ver_u, ver_v, x = heapq.heappop(self.heap)
            if not (em.vertex_alive[u] and em.vertex_alive[v]):
                continue
            if ver_u != self.version[u] or ver_v != self.version[v] or not em.has_edge(u, v):
                continue
            if not em.can_collapse(u, v) or em.collapse_flips_normals(u, v, x):
                continue
            em.collapse(u, v)
            em.set_position(u, x)
            self.quadrics[u] = self.quadrics[u] + self.quadrics[v]
            self.version[u] += 1
            for w in em.neighbors(u):
                self._push(u, w)
            collapses += 1
        return collapses


def qem_decimate(mesh: HalfedgeMesh, target_faces: int) -> HalfedgeMesh:
    """Collapse edges in order of quadric cost until at most `target_faces` remain.

    Collapses that break the link condition, leave a valence-3 vertex
    pinched, or turn a face over are skipped. If the target cannot be
    reached, the best mesh found is returned with a DecimationWarning.
    """
    if target_faces < 4:
        raise UsageError("Target face count must be at least 4")
    if mesh.n_faces <= target_faces:
        return mesh
    decimator = _Decimator(mesh)
    collapses = decimator.run(target_faces)
    result = decimator.em.to_mesh()
    logger.info(f"Decimated {mesh.n_faces} -> {result.n_faces} faces ({collapses} collapses)")
    if result.n_faces > target_faces:
        warnings.warn(DecimationWarning(
            f"Stopped at {result.n_faces} faces, target was {target_faces}"))
    return result
