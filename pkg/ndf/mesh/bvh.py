"""
Axis-aligned bounding-box tree over triangles with batched closest-point queries.
"""
import logging
from typing import Tuple

import numpy as np
from sklearn.neighbors import KDTree

from ndf.mesh.geometry import closest_point_on_triangles
from ndf.mesh.halfedge import HalfedgeMesh, SurfacePoint, SurfacePoints

logger = logging.getLogger(__name__)

LEAF_SIZE = 8


class Bvh:
    """Median-split AABB tree. Nodes are stored as flat arrays; leaves own a
    contiguous slice of `order` (triangle ids)."""

    def __init__(self, mesh: HalfedgeMesh, leaf_size: int = LEAF_SIZE):
        self.mesh = mesh
        corners = mesh.corners()
        self._a, self._b, self._c = (np.ascontiguousarray(corners[:, k]) for k in range(3))
        tri_min, tri_max = corners.min(axis=1), corners.max(axis=1)
        centroids = corners.mean(axis=1)

        order = np.arange(mesh.n_faces)
        lo, hi, left, right, start, count = [], [], [], [], [], []
        stack = [(0, mesh.n_faces, -1, False)]
        while stack:
            s, e, parent, is_right = stack.pop()
            node = len(lo)
            idx = order[s:e]
            lo.append(tri_min[idx].min(axis=0))
            hi.append(tri_max[idx].max(axis=0))
            left.append(-1)
            right.append(-1)
            start.append(s)
            count.append(e - s)
            if parent >= 0:
                (right if is_right else left)[parent] = node
            if e - s <= leaf_size:
                continue
            extent = centroids[idx].max(axis=0) - centroids[idx].min(axis=0)
            axis = int(np.argmax(extent))
            mid = (e - s) // 2
            part = np.argpartition(centroids[idx, axis], mid, kind='introselect')
            order[s:e] = idx[part]
            stack.append((s + mid, e, node, True))
            stack.append((s, s + mid, node, False))

        self.order = order
        self.node_min = np.array(lo)
        self.node_max = np.array(hi)
        self.node_left = np.array(left, dtype=np.int64)
        self.node_right = np.array(right, dtype=np.int64)
        self.node_start = np.array(start, dtype=np.int64)
        self.node_count = np.array(count, dtype=np.int64)
        self._centroid_tree = KDTree(centroids)
        logger.debug(f"Built BVH with {len(lo)} nodes over {mesh.n_faces} triangles")

    @property
    def n_nodes(self) -> int:
        return len(self.node_min)

    def _triangle_query(self, q: np.ndarray, faces: np.ndarray):
        pts, bary = closest_point_on_triangles(q, self._a[faces], self._b[faces], self._c[faces])
        d2 = np.einsum('ij,ij->i', pts - q, pts - q)
        return d2, pts, bary

    def query(self, points: np.ndarray) -> Tuple[SurfacePoints, np.ndarray, np.ndarray]:
        """Closest surface points for an (n, 3) array of queries.

        Returns (surface points, closest positions, distances). Exact: nodes
        are pruned only when their box is strictly farther than the best
        triangle found so far. Ties keep the lowest face index.
        """
        Q = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        n = len(Q)
        seed_face = self._centroid_tree.query(Q, k=1, return_distance=False)[:, 0]
        best_d2, best_pt, best_bary = self._triangle_query(Q, seed_face)
        best_face = seed_face.astype(np.int64)

        fq = np.arange(n)
        fn = np.zeros(n, dtype=np.int64)
        while len(fq):
            d = np.maximum(self.node_min[fn] - Q[fq], 0) + np.maximum(Q[fq] - self.node_max[fn], 0)
            keep = np.einsum('ij,ij->i', d, d) <= best_d2[fq]
            fq, fn = fq[keep], fn[keep]
            leaf = self.node_left[fn] < 0

            lq, ln = fq[leaf], fn[leaf]
            if len(lq):
                counts = self.node_count[ln]
                rq = np.repeat(lq, counts)
                offsets = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
                faces = self.order[np.repeat(self.node_start[ln], counts) + offsets]
                d2, pts, bary = self._triangle_query(Q[rq], faces)
                # best candidate per query, ordered by (distance, face)
                sel = np.lexsort((faces, d2, rq))
                rq_s = rq[sel]
                first = sel[np.r_[True, rq_s[1:] != rq_s[:-1]]]
                cq, cd, cf = rq[first], d2[first], faces[first]
                better = (cd < best_d2[cq]) | ((cd == best_d2[cq]) & (cf < best_face[cq]))
                upd = first[better]
                uq = rq[upd]
                best_d2[uq] = d2[upd]
                best_face[uq] = faces[upd]
                best_pt[uq] = pts[upd]
                best_bary[uq] = bary[upd]

            iq, inode = fq[~leaf], fn[~leaf]
            fq = np.concatenate([iq, iq])
            fn = np.concatenate([self.node_left[inode], self.node_right[inode]])

        return SurfacePoints(best_face, best_bary), best_pt, np.sqrt(best_d2)


def closest_point(mesh: HalfedgeMesh, bvh: Bvh, q) -> Tuple[SurfacePoint, np.ndarray, float]:
    """Closest point on `mesh` to a single query point."""
    sp, pts, dist = bvh.query(np.asarray(q, dtype=np.float64).reshape(1, 3))
    return sp[0], pts[0], float(dist[0])


def brute_force_closest_point(mesh: HalfedgeMesh, q) -> Tuple[SurfacePoint, np.ndarray, float]:
    """Reference scan over every triangle."""
    c = mesh.corners()
    Q = np.broadcast_to(np.asarray(q, dtype=np.float64), (mesh.n_faces, 3))
    pts, bary = closest_point_on_triangles(Q, c[:, 0], c[:, 1], c[:, 2])
    d2 = np.einsum('ij,ij->i', pts - Q, pts - Q)
    f = int(np.argmin(d2))
    return SurfacePoint(f, bary[f]), pts[f], float(np.sqrt(d2[f]))
