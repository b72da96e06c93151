"""
Geometry processing on extracted meshes: intrinsic cotan Laplacian, lumped
mass, heat-method geodesics, smallest eigenpairs and ground-truth comparison.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import scipy.sparse as sp
from scipy.linalg import eigh
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, cg, eigsh, splu

from ndf.errors import DecompositionError, MeshError, UsageError
from ndf.mesh import HalfedgeMesh, IntrinsicTriangulation, corner_cotangents
from ndf.services.remesh import ExtractedMesh, transfer_solution
from ndf.utils.logging import log_stage

logger = logging.getLogger(__name__)

EIGEN_SHIFT = 1e-3
DEFAULT_EIGEN_K = 20
DENSE_EIGEN_LIMIT = 400
CG_TOL = 1e-10
CG_MAXITER = 20000
POISSON_REGULARIZATION = 1e-10
ROW_SUM_TOL = 1e-9
DEFAULT_SOURCES = ((1.0, 1.0, 1.0), (-1.0, -1.0, -1.0))

MeshLike = Union[ExtractedMesh, HalfedgeMesh, IntrinsicTriangulation]


class Factorization:
    """Direct LU of a sparse matrix, with conjugate gradients when LU fails."""

    def __init__(self, matrix, name: str = 'system'):
        self.matrix = sp.csc_matrix(matrix)
        self.name = name
        try:
            self._lu = splu(self.matrix)
        except (RuntimeError, ValueError) as e:
            logger.warning(f"Direct factorization of {name} failed ({e}); falling back to CG")
            self._lu = None

    @property
    def direct(self) -> bool:
        return self._lu is not None

    def _cg(self, b: np.ndarray) -> np.ndarray:
        x, info = cg(self.matrix, b, rtol=CG_TOL, maxiter=CG_MAXITER)
        if info != 0:
            raise DecompositionError(f"CG on {self.name} did not converge", payload={'info': int(info)})
        return x

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=np.float64)
        if self._lu is not None:
            x = self._lu.solve(b)
        elif b.ndim == 1:
            x = self._cg(b)
        else:
            x = np.stack([self._cg(col) for col in b.T], axis=1)
        if not np.all(np.isfinite(x)):
            raise DecompositionError(f"Solve with {self.name} produced non-finite values")
        return x


class SparseSymmetricSystem:
    """Symmetric sparse operator with a cached factorization of a shifted copy."""

    def __init__(self, matrix):
        self.matrix = sp.csr_matrix(matrix)
        if self.matrix.shape[0] != self.matrix.shape[1]:
            raise UsageError(f"Matrix must be square, got {self.matrix.shape}")
        if (self.matrix != self.matrix.T).nnz:
            raise DecompositionError("Matrix is not exactly symmetric")
        self._factors = {}

    @classmethod
    def from_entries(cls, rows, cols, values, dimension: int) -> 'SparseSymmetricSystem':
        return cls(sp.coo_matrix((values, (rows, cols)), shape=(dimension, dimension)))

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def entries(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        coo = self.matrix.tocoo()
        return coo.row, coo.col, coo.data

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).reshape(-1)

    def min_off_diagonal_weight(self) -> float:
        off = self.matrix - sp.diags(self.matrix.diagonal())
        return float(-off.max()) if off.nnz else 0.0

    def dot(self, x) -> np.ndarray:
        return self.matrix @ np.asarray(x, dtype=np.float64)

    def factorization(self, mass: Optional[np.ndarray] = None, shift: float = 0.0) -> Factorization:
        """Factorization of (shift * diag(mass) + self), cached per shift."""
        key = float(shift)
        if key not in self._factors:
            matrix = self.matrix
            if mass is not None and shift:
                matrix = matrix + shift * sp.diags(mass)
            self._factors[key] = Factorization(matrix, name=f'L+{shift:g}M')
        return self._factors[key]


def _intrinsic(mesh: MeshLike) -> IntrinsicTriangulation:
    if isinstance(mesh, IntrinsicTriangulation):
        return mesh
    if isinstance(mesh, ExtractedMesh):
        return mesh.intrinsic
    if isinstance(mesh, HalfedgeMesh):
        return ExtractedMesh.from_mesh(mesh).intrinsic
    raise UsageError(f"Unsupported mesh type {type(mesh).__name__}")


def lumped_mass(intrinsic: IntrinsicTriangulation) -> np.ndarray:
    """One third of the incident intrinsic triangle area per vertex."""
    M = np.zeros(intrinsic.n_vertices)
    np.add.at(M, intrinsic.faces.reshape(-1), np.repeat(intrinsic.face_areas() / 3.0, 3))
    return M


def cotan_laplacian(mesh: MeshLike) -> Tuple[SparseSymmetricSystem, np.ndarray]:
    """Positive semidefinite cotan Laplacian and lumped mass from intrinsic lengths."""
    intrinsic = _intrinsic(mesh)
    intrinsic.validate()
    n = intrinsic.n_vertices
    w = intrinsic.cotan_weights()
    ends = intrinsic.edge_endpoints()
    i, j = ends[:, 0], ends[:, 1]
    rows = np.concatenate([i, j, i, j])
    cols = np.concatenate([j, i, i, j])
    vals = np.concatenate([-w, -w, w, w])
    L = SparseSymmetricSystem.from_entries(rows, cols, vals, n)
    M = lumped_mass(intrinsic)
    if np.any(M <= 0):
        raise MeshError("Every vertex needs positive lumped mass")
    worst = float(np.abs(L.row_sums()).max()) if n else 0.0
    if worst > ROW_SUM_TOL * max(1.0, float(np.abs(w).max(initial=0.0))):
        logger.warning(f"Laplacian row sums deviate from zero by {worst:.3e}")
    return L, M


def local_layout(intrinsic: IntrinsicTriangulation) -> np.ndarray:
    """(F, 3, 2) planar corner positions that realize each face's intrinsic lengths."""
    Lh = intrinsic.halfedge_lengths()
    l01, l12, l20 = Lh[:, 0], Lh[:, 1], Lh[:, 2]
    x = (l01 ** 2 + l20 ** 2 - l12 ** 2) / (2.0 * l01)
    y = np.sqrt(np.maximum(l20 ** 2 - x ** 2, 0.0))
    P = np.zeros((intrinsic.n_faces, 3, 2))
    P[:, 1, 0] = l01
    P[:, 2, 0] = x
    P[:, 2, 1] = y
    return P


def face_gradients(intrinsic: IntrinsicTriangulation, values) -> np.ndarray:
    """(F, 2) gradient of the piecewise-linear function in each face's local layout."""
    values = np.asarray(values, dtype=np.float64)
    P = local_layout(intrinsic)
    area = intrinsic.face_areas()
    u = values[intrinsic.faces]
    grad = np.zeros((intrinsic.n_faces, 2))
    for k in range(3):
        e = P[:, (k + 2) % 3] - P[:, (k + 1) % 3]
        grad += u[:, k, None] * np.stack([-e[:, 1], e[:, 0]], axis=1)
    return grad / (2.0 * area[:, None])


def _integrated_divergence(intrinsic: IntrinsicTriangulation, X: np.ndarray) -> np.ndarray:
    P = local_layout(intrinsic)
    cot = corner_cotangents(intrinsic.halfedge_lengths())
    div = np.zeros(intrinsic.n_vertices)
    for c in range(3):
        j, k = (c + 1) % 3, (c + 2) % 3
        e_j = P[:, j] - P[:, c]
        e_k = P[:, k] - P[:, c]
        part = cot[:, k] * np.einsum('ij,ij->i', e_j, X) + cot[:, j] * np.einsum('ij,ij->i', e_k, X)
        np.add.at(div, intrinsic.faces[:, c], 0.5 * part)
    return div


def heat_geodesic(mesh: MeshLike, sources: Sequence[int], laplacian=None) -> np.ndarray:
    """Approximate geodesic distance to the source vertices by the heat method."""
    intrinsic = _intrinsic(mesh)
    sources = np.unique(np.asarray(sources, dtype=np.int64).reshape(-1))
    if not len(sources):
        raise UsageError("At least one source vertex is required")
    if sources.min() < 0 or sources.max() >= intrinsic.n_vertices:
        raise UsageError(f"Source vertex out of range [0, {intrinsic.n_vertices})")
    if len(sources) == intrinsic.n_vertices:
        return np.zeros(intrinsic.n_vertices)
    L, M = laplacian if laplacian is not None else cotan_laplacian(intrinsic)
    with log_stage('geodesic'):
        t = float(np.mean(intrinsic.lengths)) ** 2
        delta = np.zeros(intrinsic.n_vertices)
        delta[sources] = 1.0
        heat = Factorization(sp.diags(M) + t * L.matrix, name='M+tL')
        u = heat.solve(delta)

        grad = face_gradients(intrinsic, u)
        norm = np.linalg.norm(grad, axis=1)
        X = np.where(norm[:, None] > 0, -grad / np.where(norm > 0, norm, 1.0)[:, None], 0.0)
        div = _integrated_divergence(intrinsic, X)

        phi = L.factorization(M, POISSON_REGULARIZATION).solve(-div)
        phi = phi - phi[sources].min()
    logger.info(f"Geodesic distances from {len(sources)} sources, max={phi.max():.4f}")
    return phi


def smallest_eigenpairs(L: SparseSymmetricSystem, M: np.ndarray, k: int = DEFAULT_EIGEN_K,
                        shift: float = EIGEN_SHIFT) -> Tuple[np.ndarray, np.ndarray]:
    """k smallest eigenpairs of L u = lambda M u, ascending, M-orthonormal columns."""
    n = L.dimension
    if not 1 <= k < n:
        raise UsageError(f"Need 1 <= k < {n}, got k={k}")
    M = np.asarray(M, dtype=np.float64)
    if np.any(M <= 0):
        raise UsageError("Mass matrix must be positive")
    with log_stage('eigen'):
        if n <= DENSE_EIGEN_LIMIT:
            evals, evecs = eigh(L.matrix.toarray(), np.diag(M), subset_by_index=[0, k - 1])
        else:
            evals, evecs = _shift_invert(L, M, k, shift)
        order = np.argsort(evals)
        evals, evecs = evals[order], evecs[:, order]
        norms = np.sqrt(np.einsum('ij,i,ij->j', evecs, M, evecs))
        evecs = evecs / norms
        # deterministic sign: largest-magnitude entry positive
        pivot = np.abs(evecs).argmax(axis=0)
        evecs = evecs * np.sign(evecs[pivot, np.arange(k)])
    logger.info(f"Eigenvalues: {np.array2string(evals[:min(k, 6)], precision=4)}")
    return evals, evecs


def _shift_invert(L: SparseSymmetricSystem, M: np.ndarray, k: int, shift: float):
    try:
        return eigsh(L.matrix.tocsc(), k=k, M=sp.diags(M).tocsc(), sigma=-shift, which='LM')
    except ArpackNoConvergence as e:
        raise DecompositionError("Eigensolver did not converge", payload={'converged': len(e.eigenvalues)}) from e
    except (ArpackError, RuntimeError, ValueError) as e:
        raise DecompositionError(f"Eigensolver failed: {e}") from e


def closest_vertex(mesh: MeshLike, point) -> int:
    positions = mesh.positions if isinstance(mesh, ExtractedMesh) else mesh.vertices
    return int(np.argmin(np.linalg.norm(positions - np.asarray(point, dtype=np.float64).reshape(1, 3), axis=1)))


@dataclass
class TaskErrors:
    geodesic_l1: float
    eigenvalue_errors: np.ndarray

    @property
    def eigenvalue_error(self) -> float:
        return float(np.mean(self.eigenvalue_errors))

    def as_dict(self) -> dict:
        return {'geodesic_l1': self.geodesic_l1, 'eigen_error': self.eigenvalue_error}


def relative_eigen_errors(evals: np.ndarray, truth: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    """|lambda - lambda*| / |lambda*|, absolute where lambda* is (numerically) zero."""
    scale = np.where(np.abs(truth) > floor, np.abs(truth), 1.0)
    return np.abs(evals - truth) / scale


def evaluate_tasks(mesh: Union[ExtractedMesh, HalfedgeMesh], truth: Union[ExtractedMesh, HalfedgeMesh],
                   k: int = DEFAULT_EIGEN_K, sources=DEFAULT_SOURCES) -> TaskErrors:
    """Geodesic L1 and eigenvalue errors of `mesh` against a ground-truth mesh."""
    if isinstance(mesh, HalfedgeMesh):
        mesh = ExtractedMesh.from_mesh(mesh)
    if isinstance(truth, HalfedgeMesh):
        truth = ExtractedMesh.from_mesh(truth)
    k = min(k, mesh.n_vertices - 1, truth.n_vertices - 1)
    system, truth_system = cotan_laplacian(mesh), cotan_laplacian(truth)
    M_truth = truth_system[1]

    errors = []
    for point in sources:
        d = heat_geodesic(mesh, [closest_vertex(mesh, point)], system)
        d_truth = heat_geodesic(truth, [closest_vertex(truth, point)], truth_system)
        d_on_truth = transfer_solution(mesh, d, truth.positions)
        errors.append(float(M_truth @ np.abs(d_on_truth - d_truth) / M_truth.sum()))

    evals, _ = smallest_eigenpairs(*system, k=k)
    truth_evals, _ = smallest_eigenpairs(*truth_system, k=k)
    result = TaskErrors(float(np.mean(errors)), relative_eigen_errors(evals, truth_evals))
    logger.info(f"Task errors: geodesic_l1={result.geodesic_l1:.3e} eigen={result.eigenvalue_error:.3e}")
    return result


def write_vertex_values(path: str, values, column: str = 'value') -> None:
    values = np.asarray(values)
    pd.DataFrame({'vertex': np.arange(len(values)), column: values}).to_csv(path, index=False, float_format='%.17g')


def write_eigenvalues(path: str, evals) -> None:
    evals = np.asarray(evals)
    pd.DataFrame({'index': np.arange(len(evals)), 'eigenvalue': evals}).to_csv(path, index=False,
                                                                               float_format='%.17g')
