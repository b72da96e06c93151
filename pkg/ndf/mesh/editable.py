"""
Mutable triangle mesh for local edits (edge collapse, split, flip).

Faces live in a growable array with an alive mask; every vertex keeps the
set of faces around it. `compact()` returns plain arrays ready to build a
validated HalfedgeMesh.
"""
import logging
from typing import Dict, List, Optional, Set, Tuple

import numpy as np

from ndf.errors import NonManifoldError
from ndf.mesh.halfedge import HalfedgeMesh

logger = logging.getLogger(__name__)


class EditableMesh:

    def __init__(self, vertices: np.ndarray, faces: np.ndarray):
        vertices = np.asarray(vertices, dtype=np.float64)
        faces = np.asarray(faces, dtype=np.int64)
        self._pos = np.empty((max(2 * len(vertices), 16), 3))
        self._pos[:len(vertices)] = vertices
        self.n_vertex_slots = len(vertices)
        self.vertex_alive: List[bool] = [True] * len(vertices)
        self.faces: List[List[int]] = [list(map(int, f)) for f in faces]
        self.face_alive: List[bool] = [True] * len(faces)
        self.vertex_faces: List[Set[int]] = [set() for _ in range(len(vertices))]
        for fid, f in enumerate(self.faces):
            for v in f:
                self.vertex_faces[v].add(fid)
        self.n_alive_faces = len(faces)
        self.n_alive_vertices = len(vertices)

    @classmethod
    def from_mesh(cls, mesh: HalfedgeMesh) -> 'EditableMesh':
        return cls(mesh.vertices, mesh.faces)

    # -- queries ----------------------------------------------------------

    @property
    def positions(self) -> np.ndarray:
        return self._pos[:self.n_vertex_slots]

    def position(self, v: int) -> np.ndarray:
        return self._pos[v]

    def set_position(self, v: int, p) -> None:
        self._pos[v] = p

    def neighbors(self, v: int) -> Set[int]:
        out = set()
        for fid in self.vertex_faces[v]:
            out.update(self.faces[fid])
        out.discard(v)
        return out

    def valence(self, v: int) -> int:
        return len(self.vertex_faces[v])

    def edge_faces(self, u: int, v: int) -> Set[int]:
        return self.vertex_faces[u] & self.vertex_faces[v]

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.edge_faces(u, v))

    def oriented_face(self, u: int, v: int) -> Tuple[Optional[int], Optional[int]]:
        """(face, opposite vertex) of the face containing the directed edge u->v."""
        for fid in self.edge_faces(u, v):
            f = self.faces[fid]
            k = f.index(u)
            if f[(k + 1) % 3] == v:
                return fid, f[(k + 2) % 3]
        return None, None

    def edges(self) -> np.ndarray:
        """Unique undirected edges (u < v) of alive faces, sorted."""
        f = np.array([f for f, alive in zip(self.faces, self.face_alive) if alive], dtype=np.int64)
        if not len(f):
            return np.zeros((0, 2), dtype=np.int64)
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def face_normal(self, fid: int, override: Optional[Dict[int, np.ndarray]] = None) -> np.ndarray:
        """Unnormalized normal (twice the area vector)."""
        p = [override[v] if override and v in override else self._pos[v] for v in self.faces[fid]]
        return np.cross(p[1] - p[0], p[2] - p[0])

    def alive_faces(self) -> List[int]:
        return [fid for fid, alive in enumerate(self.face_alive) if alive]

    # -- edits ------------------------------------------------------------

    def add_vertex(self, p) -> int:
        if self.n_vertex_slots == len(self._pos):
            grown = np.empty((2 * len(self._pos), 3))
            grown[:self.n_vertex_slots] = self._pos[:self.n_vertex_slots]
            self._pos = grown
        v = self.n_vertex_slots
        self._pos[v] = p
        self.n_vertex_slots += 1
        self.vertex_alive.append(True)
        self.vertex_faces.append(set())
        self.n_alive_vertices += 1
        return v

    def add_face(self, a: int, b: int, c: int) -> int:
        fid = len(self.faces)
        self.faces.append([a, b, c])
        self.face_alive.append(True)
        for v in (a, b, c):
            self.vertex_faces[v].add(fid)
        self.n_alive_faces += 1
        return fid

    def remove_face(self, fid: int) -> None:
        for v in self.faces[fid]:
            self.vertex_faces[v].discard(fid)
        self.face_alive[fid] = False
        self.n_alive_faces -= 1

    def can_collapse(self, keep: int, remove: int) -> bool:
        """Link condition plus the guards that keep a closed surface manifold."""
        shared = self.edge_faces(keep, remove)
        if len(shared) != 2 or self.n_alive_vertices <= 4:
            return False
        opposite = {v for fid in shared for v in self.faces[fid]} - {keep, remove}
        if len(opposite) != 2:
            return False
        if self.neighbors(keep) & self.neighbors(remove) != opposite:
            return False
        return all(self.valence(o) > 3 for o in opposite)

    def collapse_flips_normals(self, keep: int, remove: int, target, min_cos: float = 0.0) -> bool:
        """True when moving both endpoints to `target` turns a surviving face over."""
        shared = self.edge_faces(keep, remove)
        override = {keep: np.asarray(target, dtype=np.float64), remove: np.asarray(target, dtype=np.float64)}
        for v in (keep, remove):
            for fid in self.vertex_faces[v] - shared:
                before = self.face_normal(fid)
                after = self.face_normal(fid, override)
                nb, na = np.linalg.norm(before), np.linalg.norm(after)
                if na == 0.0:
                    return True
                if nb > 0.0 and before @ after < min_cos * nb * na:
                    return True
        return False

    def collapse(self, keep: int, remove: int) -> None:
        """Merge `remove` into `keep`; the surviving vertex keeps its own position."""
        for fid in list(self.edge_faces(keep, remove)):
            self.remove_face(fid)
        for fid in list(self.vertex_faces[remove]):
            f = self.faces[fid]
            f[f.index(remove)] = keep
            self.vertex_faces[keep].add(fid)
        self.vertex_faces[remove] = set()
        self.vertex_alive[remove] = False
        self.n_alive_vertices -= 1

    def split(self, u: int, v: int, p) -> int:
        """Insert a vertex at `p` on edge (u, v); returns its index."""
        shared = list(self.edge_faces(u, v))
        if len(shared) != 2:
            raise NonManifoldError(f"Edge ({u}, {v}) has {len(shared)} faces")
        m = self.add_vertex(p)
        for fid in shared:
            f = self.faces[fid]
            k = f.index(u)
            a, b, c = (f[k], f[(k + 1) % 3], f[(k + 2) % 3])
            # a->b is the split edge in this face's orientation (either u->v or u<-v)
            if b != v:
                a, b, c = f[(k + 2) % 3], f[k], f[(k + 1) % 3]
            self.remove_face(fid)
            self.add_face(a, m, c)
            self.add_face(m, b, c)
        return m

    def can_flip(self, u: int, v: int) -> bool:
        f1, a = self.oriented_face(u, v)
        f2, b = self.oriented_face(v, u)
        if f1 is None or f2 is None or a == b:
            return False
        if len(self.edge_faces(u, v)) != 2 or self.has_edge(a, b):
            return False
        return self.valence(u) > 3 and self.valence(v) > 3

    def flip_faces(self, u: int, v: int) -> Tuple[Tuple[int, int, int], Tuple[int, int, int]]:
        """Vertex triples of the two faces a flip of (u, v) would create."""
        _, a = self.oriented_face(u, v)
        _, b = self.oriented_face(v, u)
        return (a, u, b), (b, v, a)

    def flip(self, u: int, v: int) -> Tuple[int, int]:
        f1, a = self.oriented_face(u, v)
        f2, b = self.oriented_face(v, u)
        self.remove_face(f1)
        self.remove_face(f2)
        return self.add_face(a, u, b), self.add_face(b, v, a)

    # -- export -----------------------------------------------------------

    def compact(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(vertices, faces, old index of every kept vertex)."""
        alive = np.array(self.vertex_alive[:self.n_vertex_slots], dtype=bool)
        used = np.zeros(self.n_vertex_slots, dtype=bool)
        faces = np.array([f for f, ok in zip(self.faces, self.face_alive) if ok], dtype=np.int64).reshape(-1, 3)
        used[faces.reshape(-1)] = True
        keep = alive & used
        remap = np.cumsum(keep) - 1
        return self.positions[keep].copy(), remap[faces], np.flatnonzero(keep)

    def to_mesh(self) -> HalfedgeMesh:
        vertices, faces, _ = self.compact()
        return HalfedgeMesh(vertices, faces)
