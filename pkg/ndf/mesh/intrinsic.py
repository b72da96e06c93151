"""
Intrinsic triangulation: connectivity plus per-edge lengths, with
Delaunay edge flips that recompute lengths by unfolding the two adjacent
triangles into the plane.

Uses the same halfedge convention as HalfedgeMesh (h = 3f + k runs from
corner k to corner k+1) but stores twins and edge ids explicitly, so flips
may produce non-simplicial configurations (two edges between the same pair
of vertices) without breaking anything.
"""
import logging
from collections import deque
from typing import Optional

import numpy as np

from ndf.errors import MeshError
from ndf.mesh.halfedge import HalfedgeMesh

logger = logging.getLogger(__name__)

TRIANGLE_SLACK = 1e-12
DELAUNAY_TOL = 1e-9
FLIP_BUDGET_FACTOR = 50


def _next(h: int) -> int:
    return h - h % 3 + (h + 1) % 3


def corner_cotangents(lengths: np.ndarray) -> np.ndarray:
    """(F, 3) cotangent of the angle at each corner, from (F, 3) halfedge lengths.

    Corner k sits opposite halfedge (k + 1) % 3.
    """
    area = triangle_areas(lengths)
    sq = lengths ** 2
    # law of cosines: cot = (b^2 + c^2 - a^2) / (4 A), a opposite the corner
    cot = np.empty_like(lengths)
    cot[:, 0] = (sq[:, 0] + sq[:, 2] - sq[:, 1]) / (4.0 * area)
    cot[:, 1] = (sq[:, 0] + sq[:, 1] - sq[:, 2]) / (4.0 * area)
    cot[:, 2] = (sq[:, 1] + sq[:, 2] - sq[:, 0]) / (4.0 * area)
    return cot


def triangle_areas(lengths: np.ndarray) -> np.ndarray:
    """Heron's formula in the stable sorted form."""
    s = np.sort(lengths, axis=1)[:, ::-1]
    a, b, c = s[:, 0], s[:, 1], s[:, 2]
    prod = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c))
    return 0.25 * np.sqrt(np.maximum(prod, 0.0))


class IntrinsicTriangulation:

    def __init__(self, faces: np.ndarray, twin: np.ndarray, he_edge: np.ndarray, lengths: np.ndarray,
                 n_vertices: int):
        self.faces = np.array(faces, dtype=np.int64).reshape(-1, 3)
        self.twin = np.array(twin, dtype=np.int64)
        self.he_edge = np.array(he_edge, dtype=np.int64)
        self.lengths = np.array(lengths, dtype=np.float64)
        self.n_vertices = int(n_vertices)
        self.n_flips = 0
        self.n_unflippable = 0
        self.validate()

    @classmethod
    def from_mesh(cls, mesh: HalfedgeMesh, lengths: Optional[np.ndarray] = None) -> 'IntrinsicTriangulation':
        """Start from a mesh's connectivity with its chord lengths (or the given per-edge lengths)."""
        if lengths is None:
            lengths = mesh.edge_lengths
        return cls(mesh.faces, mesh.he_twin, mesh.he_edge, lengths, mesh.n_vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def n_edges(self) -> int:
        return len(self.lengths)

    def halfedge_lengths(self) -> np.ndarray:
        """(F, 3) length of halfedge 3f + k."""
        return self.lengths[self.he_edge].reshape(-1, 3)

    def validate(self) -> None:
        L = self.halfedge_lengths()
        if np.any(L <= 0) or not np.all(np.isfinite(L)):
            raise MeshError("Intrinsic lengths must be positive and finite")
        s = L.sum(axis=1, keepdims=True)
        slack = s - 2.0 * L
        if np.any(slack <= TRIANGLE_SLACK):
            f = int(np.flatnonzero((slack <= TRIANGLE_SLACK).any(axis=1))[0])
            raise MeshError(f"Face {f} violates the triangle inequality: {L[f].tolist()}")

    def face_areas(self) -> np.ndarray:
        return triangle_areas(self.halfedge_lengths())

    @property
    def total_area(self) -> float:
        return float(self.face_areas().sum())

    def edge_endpoints(self) -> np.ndarray:
        """(E, 2) vertex pair of every edge (from its first halfedge)."""
        tail = self.faces.reshape(-1)
        head = self.faces[:, [1, 2, 0]].reshape(-1)
        out = np.empty((self.n_edges, 2), dtype=np.int64)
        out[self.he_edge[::-1]] = np.stack([tail, head], axis=1)[::-1]
        return out

    def cotan_weights(self) -> np.ndarray:
        """(cot alpha + cot beta) / 2 per edge."""
        cot = corner_cotangents(self.halfedge_lengths()).reshape(-1)
        h = np.arange(3 * self.n_faces)
        opposite = cot[h - h % 3 + (h + 2) % 3]
        w = np.zeros(self.n_edges)
        np.add.at(w, self.he_edge, 0.5 * opposite)
        return w

    def non_delaunay_edges(self, tol: float = DELAUNAY_TOL) -> np.ndarray:
        return np.flatnonzero(2.0 * self.cotan_weights() < -tol)

    def is_delaunay(self, tol: float = DELAUNAY_TOL) -> bool:
        return len(self.non_delaunay_edges(tol)) == 0

    def copy(self) -> 'IntrinsicTriangulation':
        out = IntrinsicTriangulation(self.faces, self.twin, self.he_edge, self.lengths, self.n_vertices)
        out.n_flips = self.n_flips
        out.n_unflippable = self.n_unflippable
        return out

    def scaled(self, factor: float) -> 'IntrinsicTriangulation':
        out = self.copy()
        out.lengths = out.lengths * float(factor)
        return out

    # -- flips ------------------------------------------------------------

    def _edge_cot_sum(self, h: int) -> float:
        t = self.twin[h]
        total = 0.0
        for g in (h, t):
            a = self.lengths[self.he_edge[g]]
            b = self.lengths[self.he_edge[_next(g)]]
            c = self.lengths[self.he_edge[_next(_next(g))]]
            area = triangle_areas(np.array([[a, b, c]]))[0]
            total += (b * b + c * c - a * a) / (4.0 * area)
        return total

    def _flippable(self, h: int) -> bool:
        t = self.twin[h]
        f0, f1 = h // 3, t // 3
        if f0 == f1:
            return False
        ring = [self.twin[_next(h)], self.twin[_next(_next(h))], self.twin[_next(t)], self.twin[_next(_next(t))]]
        return all(g // 3 not in (f0, f1) for g in ring)

    def flipped_length(self, h: int) -> float:
        """Length of the opposite diagonal after flipping the edge of halfedge h."""
        t = self.twin[h]
        l_ij = self.lengths[self.he_edge[h]]
        l_jk = self.lengths[self.he_edge[_next(h)]]
        l_ki = self.lengths[self.he_edge[_next(_next(h))]]
        l_il = self.lengths[self.he_edge[_next(t)]]
        l_lj = self.lengths[self.he_edge[_next(_next(t))]]
        kx = (l_ij ** 2 + l_ki ** 2 - l_jk ** 2) / (2.0 * l_ij)
        ky = np.sqrt(max(l_ki ** 2 - kx ** 2, 0.0))
        lx = (l_ij ** 2 + l_il ** 2 - l_lj ** 2) / (2.0 * l_ij)
        ly = -np.sqrt(max(l_il ** 2 - lx ** 2, 0.0))
        return float(np.hypot(kx - lx, ky - ly))

    def flip(self, edge: int) -> bool:
        """Flip one edge in place; False when the local configuration does not allow it."""
        return self._flip_halfedge(int(np.flatnonzero(self.he_edge == edge)[0]))

    def _flip_halfedge(self, h: int) -> bool:
        if not self._flippable(h):
            return False
        new_length = self.flipped_length(h)
        t = self.twin[h]
        f0, f1 = h // 3, t // 3
        a1, a2 = _next(h), _next(_next(h))
        b1, b2 = _next(t), _next(_next(t))
        vi, vj, vk = self.faces.reshape(-1)[[h, a1, a2]]
        vl = self.faces.reshape(-1)[b2]
        outer = {'jk': (self.twin[a1], self.he_edge[a1]), 'ki': (self.twin[a2], self.he_edge[a2]),
                 'il': (self.twin[b1], self.he_edge[b1]), 'lj': (self.twin[b2], self.he_edge[b2])}

        # new f0 = (k, i, l), new f1 = (l, j, k); slot 2 of each holds the new diagonal
        self.faces[f0] = (vk, vi, vl)
        self.faces[f1] = (vl, vj, vk)
        layout = {3 * f0: 'ki', 3 * f0 + 1: 'il', 3 * f1: 'lj', 3 * f1 + 1: 'jk'}
        for slot, name in layout.items():
            tw, e = outer[name]
            self.twin[slot], self.twin[tw] = tw, slot
            self.he_edge[slot] = e
        self.twin[3 * f0 + 2], self.twin[3 * f1 + 2] = 3 * f1 + 2, 3 * f0 + 2
        edge = self.he_edge[h]
        self.he_edge[3 * f0 + 2] = self.he_edge[3 * f1 + 2] = edge
        self.lengths[edge] = new_length
        self.n_flips += 1
        return True

    def delaunay_flip(self, tol: float = DELAUNAY_TOL) -> int:
        """Flip non-Delaunay edges until none remain; returns the flip count.

        Edges whose neighbourhood does not allow a flip stay in place. Their
        number is kept in `n_unflippable` and reported as a warning.
        """
        budget = FLIP_BUDGET_FACTOR * max(self.n_edges, 1)
        first_he = np.empty(self.n_edges, dtype=np.int64)
        first_he[self.he_edge[::-1]] = np.arange(3 * self.n_faces)[::-1]
        queue = deque(int(e) for e in self.non_delaunay_edges(tol))
        queued = np.zeros(self.n_edges, dtype=bool)
        queued[list(queue)] = True
        flips = 0
        while queue:
            e = queue.popleft()
            queued[e] = False
            h = int(first_he[e])
            f0, f1 = h // 3, self.twin[h] // 3
            if self._edge_cot_sum(h) >= -tol or not self._flip_halfedge(h):
                continue
            flips += 1
            if flips > budget:
                raise MeshError(f"Intrinsic Delaunay flipping exceeded {budget} flips")
            for g in (3 * f0, 3 * f0 + 1, 3 * f0 + 2, 3 * f1, 3 * f1 + 1):
                ne = int(self.he_edge[g])
                first_he[ne] = g
                if ne != e and not queued[ne]:
                    queued[ne] = True
                    queue.append(ne)
        self.n_unflippable = len(self.non_delaunay_edges(tol))
        if self.n_unflippable:
            logger.warning(f"Intrinsic Delaunay: {self.n_unflippable} non-Delaunay edges could not be flipped")
        logger.debug(f"Intrinsic Delaunay: {flips} flips")
        return flips

    def __repr__(self) -> str:
        return f'<IntrinsicTriangulation V={self.n_vertices} E={self.n_edges} F={self.n_faces}>'
