"""
Closed triangle mesh used as a signed distance function.

Distance comes from the BVH closest-point query; the sign from the
solid-angle winding number (inside where it exceeds 1/2).
"""
import logging

import numpy as np

from ndf.mesh.bvh import Bvh
from ndf.mesh.halfedge import HalfedgeMesh
from ndf.surfaces.base import Surface, as_points

logger = logging.getLogger(__name__)

FD_STEP = 1e-4
CHUNK_ENTRIES = 2_000_000


def triangle_winding_number(points: np.ndarray, corners: np.ndarray) -> np.ndarray:
    """Sum of signed solid angles / 4pi of triangles `corners` (F, 3, 3) seen from each point."""
    Q = as_points(points)
    out = np.empty(len(Q))
    chunk = max(1, CHUNK_ENTRIES // max(len(corners), 1))
    for s in range(0, len(Q), chunk):
        q = Q[s:s + chunk, None, None, :]
        abc = corners[None] - q
        a, b, c = abc[..., 0, :], abc[..., 1, :], abc[..., 2, :]
        la, lb, lc = (np.linalg.norm(v, axis=-1) for v in (a, b, c))
        det = np.einsum('...i,...i->...', a, np.cross(b, c))
        denom = (la * lb * lc + np.einsum('...i,...i->...', a, b) * lc
                 + np.einsum('...i,...i->...', a, c) * lb + np.einsum('...i,...i->...', b, c) * la)
        out[s:s + chunk] = 2.0 * np.arctan2(det, denom).sum(axis=1)
    return out / (4.0 * np.pi)


class MeshSdf(Surface):

    def __init__(self, mesh: HalfedgeMesh):
        self.mesh = mesh
        self.bvh = Bvh(mesh)
        self._corners = mesh.corners()
        self.fd_step = FD_STEP * mesh.diagonal

    @property
    def bbox(self) -> np.ndarray:
        return self.mesh.bbox

    def winding_number(self, p) -> np.ndarray:
        return triangle_winding_number(p, self._corners)

    def unsigned_distance(self, p) -> np.ndarray:
        _, _, dist = self.bvh.query(as_points(p))
        return dist

    def eval(self, p) -> np.ndarray:
        x = as_points(p)
        sign = np.where(self.winding_number(x) > 0.5, -1.0, 1.0)
        return sign * self.unsigned_distance(x)

    def grad(self, p) -> np.ndarray:
        """Central differences with a step of 1e-4 times the bounding-box diagonal."""
        x = as_points(p)
        h = self.fd_step
        offsets = np.concatenate([np.eye(3), -np.eye(3)]) * h
        stencil = (x[:, None, :] + offsets[None]).reshape(-1, 3)
        f = self.eval(stencil).reshape(len(x), 6)
        return (f[:, :3] - f[:, 3:]) / (2.0 * h)
