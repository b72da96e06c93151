"""
Immutable manifold halfedge triangle mesh and surface-point types.

Halfedge `h = 3*f + k` runs from `faces[f, k]` to `faces[f, (k + 1) % 3]`,
so `next` and `face` are implicit in the index and only `twin` is stored.
"""
from __future__ import annotations

import copy
import logging
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from ndf.errors import DegenerateFaceError, MeshError, NonManifoldError

logger = logging.getLogger(__name__)

BARY_TOL = 1e-9
DEGENERATE_AREA = 1e-12


@dataclass(frozen=True)
class SurfacePoint:
    """A point on a mesh given as (face, barycentric weights)."""
    face: int
    bary: np.ndarray

    def __post_init__(self):
        bary = np.asarray(self.bary, dtype=np.float64).reshape(3)
        object.__setattr__(self, 'bary', bary)
        object.__setattr__(self, 'face', int(self.face))
        if np.any(bary < -BARY_TOL) or np.any(bary > 1 + BARY_TOL) or abs(bary.sum() - 1.0) > BARY_TOL:
            raise MeshError(f"Invalid barycentric coordinates {bary.tolist()}")


@dataclass(frozen=True)
class SurfacePoints:
    """A batch of surface points; the array form every batched query uses."""
    faces: np.ndarray
    bary: np.ndarray

    def __post_init__(self):
        faces = np.asarray(self.faces, dtype=np.int64).reshape(-1)
        bary = np.asarray(self.bary, dtype=np.float64).reshape(-1, 3)
        if len(faces) != len(bary):
            raise MeshError("faces and barycentric arrays differ in length")
        object.__setattr__(self, 'faces', faces)
        object.__setattr__(self, 'bary', bary)

    def __len__(self) -> int:
        return len(self.faces)

    def __getitem__(self, index: int) -> SurfacePoint:
        return SurfacePoint(self.faces[index], self.bary[index])

    def __iter__(self) -> Iterator[SurfacePoint]:
        for i in range(len(self)):
            yield self[i]

    def take(self, index) -> 'SurfacePoints':
        return SurfacePoints(self.faces[index], self.bary[index])

    def validate(self, mesh: Optional['HalfedgeMesh'] = None) -> None:
        b = self.bary
        if np.any(b < -BARY_TOL) or np.any(b > 1 + BARY_TOL) or np.any(np.abs(b.sum(axis=1) - 1.0) > BARY_TOL):
            raise MeshError("Invalid barycentric coordinates")
        if mesh is not None and len(self) and (self.faces.min() < 0 or self.faces.max() >= mesh.n_faces):
            raise MeshError("Surface point refers to a face outside the mesh")

    @classmethod
    def from_list(cls, points: Sequence[SurfacePoint]) -> 'SurfacePoints':
        if not points:
            return cls(np.zeros(0, dtype=np.int64), np.zeros((0, 3)))
        return cls(np.array([p.face for p in points]), np.stack([p.bary for p in points]))

    @classmethod
    def concatenate(cls, parts: Sequence['SurfacePoints']) -> 'SurfacePoints':
        return cls(np.concatenate([p.faces for p in parts]), np.concatenate([p.bary for p in parts]))


class HalfedgeMesh:
    """Closed, oriented, manifold triangle mesh.

    Construction validates: triangle-only faces with three distinct vertices,
    every edge shared by exactly two oppositely oriented halfedges, every
    vertex referenced and with a single-disk link. Optionally rejects faces
    with area below 1e-12.
    """

    def __init__(self, vertices, faces, check_area: bool = False):
        V = np.array(vertices, dtype=np.float64).reshape(-1, 3)
        F = np.array(faces, dtype=np.int64).reshape(-1, 3)
        self.vertices = V
        self.faces = F
        self._build(check_area)
        for arr in (self.vertices, self.faces, self.he_twin, self.he_edge, self.edges, self.vertex_halfedge):
            arr.setflags(write=False)

    def _build(self, check_area: bool) -> None:
        V, F = self.vertices, self.faces
        n_v, n_f = len(V), len(F)
        if n_f and (F.min() < 0 or F.max() >= n_v):
            raise MeshError("Face index out of range")
        if not np.all(np.isfinite(V)):
            raise MeshError("Non-finite vertex position")
        repeated = (F[:, 0] == F[:, 1]) | (F[:, 1] == F[:, 2]) | (F[:, 2] == F[:, 0])
        if np.any(repeated):
            raise DegenerateFaceError(f"Face {int(np.flatnonzero(repeated)[0])} repeats a vertex")
        if check_area and n_f:
            areas = self.face_areas
            bad = np.flatnonzero(areas < DEGENERATE_AREA)
            if len(bad):
                raise DegenerateFaceError(f"Face {int(bad[0])} has area {areas[bad[0]]:.3e}")

        tail = F.reshape(-1)
        head = F[:, [1, 2, 0]].reshape(-1)
        lo, hi = np.minimum(tail, head), np.maximum(tail, head)
        keys = lo * max(n_v, 1) + hi
        uniq, inverse, counts = np.unique(keys, return_inverse=True, return_counts=True)
        if np.any(counts > 2):
            e = int(np.flatnonzero(counts > 2)[0])
            raise NonManifoldError(
                f"Edge ({uniq[e] // n_v}, {uniq[e] % n_v}) has {counts[e]} incident faces")
        if np.any(counts < 2):
            e = int(np.flatnonzero(counts < 2)[0])
            raise NonManifoldError(
                f"Edge ({uniq[e] // n_v}, {uniq[e] % n_v}) is a boundary edge")

        order = np.argsort(inverse, kind='stable').reshape(-1, 2)
        a, b = order[:, 0], order[:, 1]
        if np.any(tail[a] == tail[b]):
            raise NonManifoldError("Inconsistent face orientation across an edge")
        twin = np.empty(3 * n_f, dtype=np.int64)
        twin[a], twin[b] = b, a
        self.he_twin = twin
        self.he_edge = inverse.astype(np.int64)
        self.edges = np.stack([uniq // max(n_v, 1), uniq % max(n_v, 1)], axis=1).astype(np.int64)

        # vertex fans are the orbits of h -> next(twin(h))
        used = np.zeros(n_v, dtype=bool)
        used[tail] = True
        if n_v and not used.all():
            raise NonManifoldError(f"Vertex {int(np.flatnonzero(~used)[0])} is not referenced by any face")
        if n_f:
            rotation = self.he_next[twin]
            graph = sparse.coo_matrix(
                (np.ones(3 * n_f), (np.arange(3 * n_f), rotation)), shape=(3 * n_f, 3 * n_f))
            n_fans, fan = connected_components(graph, directed=True, connection='weak')
            if n_fans != n_v:
                fans_per_vertex = np.bincount(
                    np.unique(np.stack([tail, fan], axis=1), axis=0)[:, 0], minlength=n_v)
                v = int(np.flatnonzero(fans_per_vertex > 1)[0])
                raise NonManifoldError(f"Vertex {v} link is not a single disk")

        vertex_he = np.full(n_v, -1, dtype=np.int64)
        vertex_he[tail[::-1]] = np.arange(3 * n_f)[::-1]
        self.vertex_halfedge = vertex_he

    # -- connectivity -----------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_halfedges(self) -> int:
        return 3 * self.n_faces

    @property
    def he_next(self) -> np.ndarray:
        h = np.arange(3 * self.n_faces)
        return h - h % 3 + (h + 1) % 3

    @property
    def he_vertex(self) -> np.ndarray:
        """Origin vertex of every halfedge."""
        return self.faces.reshape(-1)

    @property
    def he_face(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_faces), 3)

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_faces

    @property
    def n_components(self) -> int:
        return int(face_components(self)[0])

    @property
    def genus(self) -> int:
        return (2 * self.n_components - self.euler_characteristic) // 2

    def vertex_valence(self) -> np.ndarray:
        return np.bincount(self.edges.reshape(-1), minlength=self.n_vertices)

    def vertex_neighbors(self, v: int) -> List[int]:
        """One-ring of `v` in rotational order."""
        start = self.vertex_halfedge[v]
        ring, h = [], start
        while True:
            ring.append(int(self.faces.reshape(-1)[self.he_next[h]]))
            h = self.he_next[self.he_twin[h]]
            if h == start:
                return ring

    # -- geometry ---------------------------------------------------------

    def corners(self, faces: Optional[np.ndarray] = None) -> np.ndarray:
        """(n, 3, 3) corner positions of the given faces (all faces by default)."""
        idx = self.faces if faces is None else self.faces[faces]
        return self.vertices[idx]

    @property
    def face_areas(self) -> np.ndarray:
        c = self.corners()
        return 0.5 * np.linalg.norm(np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1)

    @property
    def face_normals(self) -> np.ndarray:
        c = self.corners()
        n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
        norm = np.linalg.norm(n, axis=1, keepdims=True)
        return n / np.where(norm > 0, norm, 1.0)

    @property
    def vertex_normals(self) -> np.ndarray:
        c = self.corners()
        n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
        acc = np.zeros_like(self.vertices)
        for k in range(3):
            np.add.at(acc, self.faces[:, k], n)
        return acc / np.linalg.norm(acc, axis=1, keepdims=True)

    @property
    def edge_lengths(self) -> np.ndarray:
        e = self.edges
        return np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1)

    @property
    def bbox(self) -> np.ndarray:
        return np.stack([self.vertices.min(axis=0), self.vertices.max(axis=0)])

    @property
    def diagonal(self) -> float:
        lo, hi = self.bbox
        return float(np.linalg.norm(hi - lo))

    @property
    def total_area(self) -> float:
        return float(self.face_areas.sum())

    @property
    def signed_volume(self) -> float:
        c = self.corners()
        return float(np.einsum('ij,ij->i', c[:, 0], np.cross(c[:, 1], c[:, 2])).sum() / 6.0)

    def embed(self, points: SurfacePoints) -> np.ndarray:
        """3D positions of surface points."""
        return np.einsum('nk,nkd->nd', points.bary, self.corners(points.faces))

    def vertex_points(self) -> SurfacePoints:
        """Every vertex expressed as a surface point on one incident face."""
        he = self.vertex_halfedge
        bary = np.zeros((self.n_vertices, 3))
        bary[np.arange(self.n_vertices), he % 3] = 1.0
        return SurfacePoints(he // 3, bary)

    # -- derived meshes ---------------------------------------------------

    def with_vertices(self, vertices) -> 'HalfedgeMesh':
        """Same connectivity, new positions; skips revalidation."""
        V = np.array(vertices, dtype=np.float64).reshape(self.vertices.shape)
        other = copy.copy(self)
        other.vertices = V
        V.setflags(write=False)
        return other

    def submesh(self, face_mask: np.ndarray) -> 'HalfedgeMesh':
        """Mesh made of the selected faces, vertices renumbered in original order."""
        faces = self.faces[face_mask]
        keep = np.zeros(self.n_vertices, dtype=bool)
        keep[faces.reshape(-1)] = True
        remap = np.cumsum(keep) - 1
        return HalfedgeMesh(self.vertices[keep], remap[faces])

    def __repr__(self) -> str:
        return f'<HalfedgeMesh V={self.n_vertices} E={self.n_edges} F={self.n_faces}>'


def face_components(mesh: HalfedgeMesh):
    """(count, per-face labels) of edge-connected face components."""
    n_f = mesh.n_faces
    if n_f == 0:
        return 0, np.zeros(0, dtype=np.int64)
    f = mesh.he_face
    g = mesh.he_face[mesh.he_twin]
    adjacency = sparse.coo_matrix((np.ones(len(f)), (f, g)), shape=(n_f, n_f))
    return connected_components(adjacency, directed=False)
