"""
Client-side mesh extraction from a displacement field.

Starting from the base mesh, each pass splits mapped edges longer than h,
collapses added vertices on edges shorter than h/4 and flips edges that
lower the ODT energy. Every vertex remembers where it came from on the
base mesh, so its mapped position is always g(origin). The final mesh gets
an intrinsic Delaunay triangulation for downstream Laplacian work.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from ndf.errors import MeshError, NdfError, UsageError
from ndf.mesh import Bvh, EditableMesh, HalfedgeMesh, IntrinsicTriangulation, SurfacePoints
from ndf.services.dispfield import DisplacementField
from ndf.utils.logging import log_stage

logger = logging.getLogger(__name__)

DEFAULT_ITERATIONS = 5
FLIP_SWEEPS = 10
COLLAPSE_RATIO = 0.25
MIN_FLIP_AREA = 1e-14
BARY_EPS = 1e-12

CORRESPONDENCE_COLUMNS = ['vertex', 'face', 'w1', 'w2', 'w3', 'added']


@dataclass(frozen=True)
class ExtractionParams:
    h: float
    iterations: int = DEFAULT_ITERATIONS
    flip_sweeps: int = FLIP_SWEEPS
    validate_each_pass: bool = False

    def __post_init__(self):
        if not self.h > 0:
            raise UsageError(f"Target edge length must be positive, got {self.h}")
        if self.iterations < 0 or self.flip_sweeps < 0:
            raise UsageError("Iteration counts must be non-negative")


class ExtractedMesh:
    """Mapped mesh with per-vertex base-mesh origins and an intrinsic triangulation.

    `mesh` keeps the extrinsic connectivity (used for closest-point
    transfer); `intrinsic` holds the Delaunay-flipped connectivity and edge
    lengths used by the Laplacian.
    """

    def __init__(self, mesh: HalfedgeMesh, origins: SurfacePoints, added: np.ndarray,
                 intrinsic: Optional[IntrinsicTriangulation] = None):
        if len(origins) != mesh.n_vertices or len(added) != mesh.n_vertices:
            raise MeshError("Per-vertex data does not match the vertex count")
        self.mesh = mesh
        self.origins = origins
        self.added = np.asarray(added, dtype=bool)
        self.intrinsic = intrinsic if intrinsic is not None else IntrinsicTriangulation.from_mesh(mesh)
        self._bvh: Optional[Bvh] = None

    @classmethod
    def from_mesh(cls, mesh: HalfedgeMesh) -> 'ExtractedMesh':
        """Wrap a plain mesh as its own base (e.g. a ground-truth mesh), intrinsically Delaunay."""
        intrinsic = IntrinsicTriangulation.from_mesh(mesh)
        intrinsic.delaunay_flip()
        return cls(mesh, mesh.vertex_points(), np.zeros(mesh.n_vertices, dtype=bool), intrinsic)

    @property
    def positions(self) -> np.ndarray:
        return self.mesh.vertices

    @property
    def n_vertices(self) -> int:
        return self.mesh.n_vertices

    @property
    def n_faces(self) -> int:
        return self.mesh.n_faces

    @property
    def bvh(self) -> Bvh:
        if self._bvh is None:
            self._bvh = Bvh(self.mesh)
        return self._bvh

    def denormalized(self, transform) -> 'ExtractedMesh':
        """Positions and intrinsic lengths mapped back to input units."""
        return ExtractedMesh(self.mesh.with_vertices(transform.inverse(self.positions)), self.origins,
                             self.added, self.intrinsic.scaled(1.0 / transform.scale))

    def correspondence(self) -> pd.DataFrame:
        return pd.DataFrame({
            'vertex': np.arange(self.n_vertices),
            'face': self.origins.faces,
            'w1': self.origins.bary[:, 0],
            'w2': self.origins.bary[:, 1],
            'w3': self.origins.bary[:, 2],
            'added': self.added.astype(int),
        }, columns=CORRESPONDENCE_COLUMNS)

    def __repr__(self) -> str:
        return (f'<ExtractedMesh V={self.n_vertices} F={self.n_faces} '
                f'added={int(self.added.sum())} intrinsic_flips={self.intrinsic.n_flips}>')


def write_correspondence(mesh: ExtractedMesh, path: str) -> None:
    mesh.correspondence().to_csv(path, index=False, float_format='%.17g')


def read_correspondence(path: str) -> pd.DataFrame:
    frame = pd.read_csv(path)
    missing = set(CORRESPONDENCE_COLUMNS) - set(frame.columns)
    if missing:
        raise UsageError(f"Correspondence file {path} lacks columns {sorted(missing)}")
    return frame


def _express_in_face(base: HalfedgeMesh, face: int, bary: np.ndarray, target: int) -> Optional[np.ndarray]:
    """Barycentrics of a point of `face` with respect to `target`, if it lies on their shared closure."""
    src, dst = base.faces[face], base.faces[target]
    out = np.zeros(3)
    for k in range(3):
        if bary[k] > BARY_EPS:
            hit = np.flatnonzero(dst == src[k])
            if not len(hit):
                return None
            out[hit[0]] += bary[k]
    return out / out.sum()


def _triangle_cross(P: np.ndarray, tri) -> np.ndarray:
    a, b, c = P[tri[0]], P[tri[1]], P[tri[2]]
    return np.cross(b - a, c - a)


def _odt_local(P: np.ndarray, tris) -> float:
    total = 0.0
    for tri in tris:
        a, b, c = P[tri[0]], P[tri[1]], P[tri[2]]
        area = 0.5 * np.linalg.norm(np.cross(b - a, c - a))
        total += area * ((b - a) @ (b - a) + (c - b) @ (c - b) + (a - c) @ (a - c))
    return total


class _Refiner:
    """Mutable extraction state: editable mapped mesh plus per-vertex origins."""

    def __init__(self, field: DisplacementField, start: Optional[ExtractedMesh] = None):
        self.field = field
        self.base = field.base
        if start is None:
            origins = self.base.vertex_points()
            positions = field.eval(origins)
            faces = self.base.faces
            added = np.zeros(self.base.n_vertices, dtype=bool)
        else:
            origins, positions, faces, added = start.origins, start.positions, start.mesh.faces, start.added
        self.mesh = EditableMesh(positions, faces)
        self.origin_faces: List[int] = [int(f) for f in origins.faces]
        self.origin_bary: List[np.ndarray] = [b.copy() for b in origins.bary]
        self.added: List[bool] = [bool(a) for a in added]
        self._base_bvh: Optional[Bvh] = None

    @property
    def base_bvh(self) -> Bvh:
        if self._base_bvh is None:
            self._base_bvh = Bvh(self.base)
        return self._base_bvh

    def _edge_lengths(self, edges: np.ndarray) -> np.ndarray:
        P = self.mesh.positions
        return np.linalg.norm(P[edges[:, 1]] - P[edges[:, 0]], axis=1)

    def midpoint_origins(self, edges: np.ndarray) -> SurfacePoints:
        """Base-mesh midpoints of the origin segments of the given vertex pairs."""
        faces = np.zeros(len(edges), dtype=np.int64)
        bary = np.zeros((len(edges), 3))
        fallback = []
        for i, (u, v) in enumerate(edges):
            fu, fv = self.origin_faces[u], self.origin_faces[v]
            bu, bv = self.origin_bary[u], self.origin_bary[v]
            if fu != fv:
                moved = _express_in_face(self.base, fu, bu, fv)
                if moved is not None:
                    fu, bu = fv, moved
                else:
                    moved = _express_in_face(self.base, fv, bv, fu)
                    if moved is not None:
                        fv, bv = fu, moved
            if fu == fv:
                faces[i], bary[i] = fu, 0.5 * (bu + bv)
            else:
                fallback.append(i)
        if fallback:
            pairs = edges[fallback]
            xu = self.base.embed(SurfacePoints(np.array(self.origin_faces)[pairs[:, 0]],
                                               np.array(self.origin_bary)[pairs[:, 0]]))
            xv = self.base.embed(SurfacePoints(np.array(self.origin_faces)[pairs[:, 1]],
                                               np.array(self.origin_bary)[pairs[:, 1]]))
            closest, _, _ = self.base_bvh.query(0.5 * (xu + xv))
            faces[fallback], bary[fallback] = closest.faces, closest.bary
        return SurfacePoints(faces, bary)

    def split_pass(self, h: float) -> int:
        edges = self.mesh.edges()
        if not len(edges):
            return 0
        lengths = self._edge_lengths(edges)
        order = np.argsort(-lengths, kind='stable')
        long = order[lengths[order] > h]
        if not len(long):
            return 0
        origins = self.midpoint_origins(edges[long])
        mapped = self.field.eval(origins)
        count = 0
        for i, (u, v) in enumerate(edges[long]):
            if not self.mesh.has_edge(u, v):
                continue
            self.mesh.split(int(u), int(v), mapped[i])
            self.origin_faces.append(int(origins.faces[i]))
            self.origin_bary.append(origins.bary[i].copy())
            self.added.append(True)
            count += 1
        return count

    def collapse_pass(self, h: float) -> int:
        edges = self.mesh.edges()
        if not len(edges):
            return 0
        limit = COLLAPSE_RATIO * h
        lengths = self._edge_lengths(edges)
        order = np.argsort(lengths, kind='stable')
        count = 0
        for u, v in edges[order[lengths[order] < limit]]:
            u, v = int(u), int(v)
            if not (self.mesh.vertex_alive[u] and self.mesh.vertex_alive[v]) or not self.mesh.has_edge(u, v):
                continue
            if np.linalg.norm(self.mesh.position(u) - self.mesh.position(v)) >= limit:
                continue
            if not self.added[u] and not self.added[v]:
                continue
            if self.added[u] and self.added[v]:
                keep, remove = min(u, v), max(u, v)
            elif self.added[u]:
                keep, remove = v, u
            else:
                keep, remove = u, v
            if not self.mesh.can_collapse(keep, remove):
                continue
            if self.mesh.collapse_flips_normals(keep, remove, self.mesh.position(keep)):
                continue
            self.mesh.collapse(keep, remove)
            count += 1
        return count

    def _flip_allowed(self, old, new) -> bool:
        P = self.mesh.positions
        reference = _triangle_cross(P, old[0]) + _triangle_cross(P, old[1])
        for tri in new:
            c = _triangle_cross(P, tri)
            if 0.5 * np.linalg.norm(c) <= MIN_FLIP_AREA or c @ reference <= 0.0:
                return False
        return True

    def flip_pass(self, sweeps: int) -> int:
        total = 0
        P = self.mesh.positions
        for _ in range(sweeps):
            flips = 0
            for u, v in self.mesh.edges():
                u, v = int(u), int(v)
                if not self.mesh.can_flip(u, v):
                    continue
                _, a = self.mesh.oriented_face(u, v)
                _, b = self.mesh.oriented_face(v, u)
                old = ((u, v, a), (v, u, b))
                new = self.mesh.flip_faces(u, v)
                if not self._flip_allowed(old, new):
                    continue
                before, after = _odt_local(P, old), _odt_local(P, new)
                if after < before - 1e-12 * before:
                    self.mesh.flip(u, v)
                    flips += 1
            total += flips
            if flips == 0:
                break
        return total

    def result(self) -> ExtractedMesh:
        V, F, kept = self.mesh.compact()
        try:
            mesh = HalfedgeMesh(V, F)
        except MeshError as e:
            raise MeshError(f"Extraction broke manifoldness: {e.message}") from e
        origins = SurfacePoints(np.array(self.origin_faces)[kept], np.array(self.origin_bary)[kept])
        return ExtractedMesh(mesh, origins, np.array(self.added)[kept])


def extract(field: DisplacementField, params: ExtractionParams,
            start: Optional[ExtractedMesh] = None) -> ExtractedMesh:
    """Refine the mapped base mesh (or `start`) toward edge length h, then make it intrinsically Delaunay."""
    with log_stage('extract'):
        refiner = _Refiner(field, start)
        for it in range(params.iterations):
            splits = refiner.split_pass(params.h)
            collapses = refiner.collapse_pass(params.h)
            flips = refiner.flip_pass(params.flip_sweeps)
            logger.info(f"pass {it}: split={splits} collapse={collapses} flip={flips} "
                        f"faces={refiner.mesh.n_alive_faces}")
            if params.validate_each_pass:
                refiner.result()
        return intrinsic_delaunay(refiner.result())


def intrinsic_delaunay(mesh: ExtractedMesh) -> ExtractedMesh:
    """Copy of `mesh` whose intrinsic triangulation has no Delaunay-violating edges.

    Edges that cannot be flipped are counted in `intrinsic.n_unflippable`.
    """
    intrinsic = mesh.intrinsic.copy()
    flips = intrinsic.delaunay_flip()
    logger.info(f"Intrinsic Delaunay flips: {flips}")
    return ExtractedMesh(mesh.mesh, mesh.origins, mesh.added, intrinsic)


def transfer_solution(mesh: ExtractedMesh, vertex_values, queries) -> np.ndarray:
    """Values at query points by closest point on the extrinsic mesh and barycentric blending."""
    values = np.asarray(vertex_values, dtype=np.float64)
    if mesh.n_faces == 0:
        raise MeshError("Cannot transfer onto an empty mesh")
    if len(values) != mesh.n_vertices:
        raise UsageError(f"Expected {mesh.n_vertices} vertex values, got {len(values)}")
    points, _, _ = mesh.bvh.query(np.asarray(queries, dtype=np.float64).reshape(-1, 3))
    corners = values[mesh.mesh.faces[points.faces]]
    if corners.ndim == 3:
        return np.einsum('nk,nkc->nc', points.bary, corners)
    return np.einsum('nk,nk->n', points.bary, corners)


def progressive_extract(field: DisplacementField, hs: Sequence[float],
                        iterations: int = DEFAULT_ITERATIONS) -> List[ExtractedMesh]:
    """Extract at each h in descending order, each level refining the previous one."""
    hs = [float(h) for h in hs]
    if any(b > a for a, b in zip(hs, hs[1:])):
        raise UsageError("Progressive extraction needs descending edge lengths")
    levels, start = [], None
    for h in hs:
        try:
            start = extract(field, ExtractionParams(h, iterations), start)
        except NdfError as e:
            e.payload = {**(e.payload or {}), 'h': h}
            raise
        levels.append(start)
    return levels


def long_edge_fraction(mesh: ExtractedMesh, h: float) -> float:
    """Share of extrinsic edges longer than h."""
    lengths = mesh.mesh.edge_lengths
    return float((lengths > h).mean()) if len(lengths) else 0.0
