"""
Forward displacement field g(x) = x + MLP([PE(x), blended vertex features])
over a base mesh, the ambient inverse field, and the local-Jacobian queries
built on their tangent pushforward.
"""
import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ndf.errors import MeshError, SamplingError, UsageError
from ndf.kernel import (
    Mlp, MlpCache, encoding_jvp, encoding_vjp, encoding_width, kaiming_init, positional_encoding,
)
from ndf.mesh import HalfedgeMesh, SurfacePoint, SurfacePoints, barycentric_gradients, face_frames, sample_uniform

logger = logging.getLogger(__name__)

DEFAULT_LAYERS = 8
DEFAULT_FEATURE_DIM = 4
DEFAULT_HIDDEN = (64, 64)
DEGENERATE_CROSS = 1e-10

ENVELOPE_GROWTH = 1.2
MIN_ACCEPTANCE = 1e-3
MIN_PROPOSALS = 10_000
MAX_PROPOSAL_BATCH = 65_536

PointsLike = Union[SurfacePoint, SurfacePoints, Sequence[SurfacePoint]]


def as_surface_points(points: PointsLike) -> SurfacePoints:
    if isinstance(points, SurfacePoints):
        return points
    if isinstance(points, SurfacePoint):
        return SurfacePoints.from_list([points])
    return SurfacePoints.from_list(list(points))


@dataclass
class FieldGradients:
    """Gradients for [net parameters..., features], float64."""
    net: List[np.ndarray]
    features: np.ndarray

    def as_list(self) -> List[np.ndarray]:
        return list(self.net) + [self.features]

    def add(self, other: 'FieldGradients', scale: float = 1.0) -> 'FieldGradients':
        return FieldGradients([a + scale * b for a, b in zip(self.net, other.net)],
                              self.features + scale * other.features)

    def scaled(self, scale: float) -> 'FieldGradients':
        return FieldGradients([scale * g for g in self.net], scale * self.features)


@dataclass
class FieldPass:
    """Everything one forward evaluation produces, kept for backprop."""
    points: SurfacePoints
    x: np.ndarray
    vertex_ids: np.ndarray
    inputs: np.ndarray
    mapped: np.ndarray
    cache: MlpCache
    base_tangents: Optional[np.ndarray] = None   # (n, 3, m)
    bary_rates: Optional[np.ndarray] = None      # (n, 3, m) barycentric weight change per tangent
    input_tangents: Optional[np.ndarray] = None  # (n, in, m)
    pushed: Optional[np.ndarray] = None          # (n, 3, m)

    def __len__(self) -> int:
        return len(self.points)


class DisplacementField:
    """g_theta over a base mesh with learnable per-vertex features."""

    def __init__(self, base: HalfedgeMesh, net: Mlp, features: np.ndarray, layers: int = DEFAULT_LAYERS):
        features = np.array(features, dtype=net.dtype)
        if features.ndim != 2 or len(features) != base.n_vertices:
            raise UsageError(f"Feature table {features.shape} does not match {base.n_vertices} base vertices")
        if net.n_inputs != encoding_width(layers) + features.shape[1] or net.n_outputs != 3:
            raise UsageError(
                f"Network widths {net.widths} do not fit L={layers}, d={features.shape[1]}")
        self.base = base
        self.net = net
        self.features = features
        self.layers = int(layers)

    @classmethod
    def create(cls, base: HalfedgeMesh, layers: int = DEFAULT_LAYERS, feature_dim: int = DEFAULT_FEATURE_DIM,
               hidden: Sequence[int] = DEFAULT_HIDDEN, seed=None, dtype=np.float32) -> 'DisplacementField':
        """Kaiming-initialized network, zero features."""
        widths = (encoding_width(layers) + feature_dim, *hidden, 3)
        net = kaiming_init(Mlp(widths, dtype=dtype), seed)
        return cls(base, net, np.zeros((base.n_vertices, feature_dim)), layers)

    @classmethod
    def identity(cls, base: HalfedgeMesh, layers: int = DEFAULT_LAYERS, feature_dim: int = DEFAULT_FEATURE_DIM,
                 hidden: Sequence[int] = DEFAULT_HIDDEN, dtype=np.float32) -> 'DisplacementField':
        """All-zero network: g(x) = x exactly."""
        widths = (encoding_width(layers) + feature_dim, *hidden, 3)
        return cls(base, Mlp(widths, dtype=dtype), np.zeros((base.n_vertices, feature_dim)), layers)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def hidden(self) -> Tuple[int, ...]:
        return self.net.widths[1:-1]

    def parameters(self) -> List[np.ndarray]:
        return self.net.parameters() + [self.features]

    def set_parameters(self, params: Sequence[np.ndarray]) -> None:
        self.net.set_parameters(params[:-1])
        self.features = np.asarray(params[-1], dtype=self.net.dtype).reshape(self.features.shape)

    def copy(self) -> 'DisplacementField':
        return DisplacementField(self.base, self.net.copy(), self.features.copy(), self.layers)

    def zero_gradients(self) -> FieldGradients:
        return FieldGradients([np.zeros(p.shape) for p in self.net.parameters()],
                              np.zeros(self.features.shape))

    # -- evaluation -------------------------------------------------------

    def blend(self, points: PointsLike) -> np.ndarray:
        """Barycentric blend of the features at each point."""
        points = as_surface_points(points)
        rows = self.features.astype(np.float64)[self.base.faces[points.faces]]
        return np.einsum('nk,nkd->nd', points.bary, rows)

    def run(self, points: PointsLike, tangents: bool = False,
            frames: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> FieldPass:
        """Forward pass; with `tangents`, also push the base frame (or `frames`) forward."""
        points = as_surface_points(points)
        points.validate(self.base)
        x = self.base.embed(points)
        vertex_ids = self.base.faces[points.faces]
        X = np.concatenate([positional_encoding(x, self.layers), self.blend(points)], axis=1)
        Y, cache = self.net.forward_cached(X)
        fpass = FieldPass(points, x, vertex_ids, X, x + Y, cache)
        if tangents or frames is not None:
            if frames is None:
                _, t1, t2 = face_frames(self.base, points.faces)
            else:
                t1, t2 = (np.asarray(f, dtype=np.float64).reshape(-1, 3) for f in frames)
            self._push(fpass, np.stack([t1, t2], axis=2))
        return fpass

    def _push(self, fpass: FieldPass, T: np.ndarray) -> None:
        rates = np.einsum('nkj,njm->nkm', barycentric_gradients(self.base, fpass.points.faces), T)
        rows = self.features.astype(np.float64)[fpass.vertex_ids]
        dX = np.concatenate([encoding_jvp(fpass.x, T, self.layers),
                             np.einsum('nkd,nkm->ndm', rows, rates)], axis=1)
        fpass.base_tangents = T
        fpass.bary_rates = rates
        fpass.input_tangents = dX
        fpass.pushed = T + self.net.jvp(fpass.cache, dX)

    def eval(self, points: PointsLike) -> np.ndarray:
        """(n, 3) mapped positions."""
        return self.run(points).mapped

    def pushforward(self, points: PointsLike, tangents: np.ndarray) -> np.ndarray:
        """J_theta t for (n, 3, m) tangents lying in each point's face plane."""
        fpass = self.run(points)
        self._push(fpass, np.asarray(tangents, dtype=np.float64))
        return fpass.pushed

    def vertex_positions(self) -> np.ndarray:
        return self.eval(self.base.vertex_points())

    # -- local geometry ---------------------------------------------------

    def mapped_normal(self, points: PointsLike) -> Tuple[np.ndarray, np.ndarray]:
        """(unit normals, valid mask); degenerate pushforwards get a zero normal."""
        fpass = self.run(points, tangents=True)
        return mapped_normals(fpass.pushed)

    def local_jacobian(self, points: PointsLike, frames: Optional[Tuple[np.ndarray, np.ndarray]] = None,
                       mapped_frames: Optional[Tuple[np.ndarray, np.ndarray]] = None
                       ) -> Tuple[np.ndarray, np.ndarray]:
        """(n, 2, 2) J_f and a validity mask."""
        fpass = self.run(points, tangents=True, frames=frames)
        return local_jacobian_from_tangents(fpass.pushed, mapped_frames)

    def area_distortion(self, points: PointsLike) -> np.ndarray:
        """|det J_f| per point, 0 where the pushforward is degenerate."""
        J, valid = self.local_jacobian(points)
        return np.where(valid, np.abs(np.linalg.det(J)), 0.0)

    # -- gradients --------------------------------------------------------

    def backprop(self, fpass: FieldPass, d_mapped: Optional[np.ndarray] = None,
                 d_pushed: Optional[np.ndarray] = None) -> FieldGradients:
        """Gradients of a loss given its gradient on the mapped points and/or pushed tangents."""
        grads = self.zero_gradients()
        ew = encoding_width(self.layers)
        if d_mapped is not None:
            g, dX = self.net.backward(fpass.cache, d_mapped)
            grads.net = [a + b for a, b in zip(grads.net, g)]
            per_corner = fpass.points.bary[:, :, None] * dX[:, None, ew:]
            np.add.at(grads.features, fpass.vertex_ids, per_corner)
        if d_pushed is not None:
            if fpass.input_tangents is None:
                raise UsageError("Tangent gradients need a pass run with tangents")
            g, dT = self.net.tangent_backward(fpass.cache, fpass.input_tangents, d_pushed)
            grads.net = [a + b for a, b in zip(grads.net, g)]
            per_corner = np.einsum('nkm,ndm->nkd', fpass.bary_rates, dT[:, ew:, :])
            np.add.at(grads.features, fpass.vertex_ids, per_corner)
        return grads

    def __repr__(self) -> str:
        return (f'<DisplacementField V={self.base.n_vertices} d={self.feature_dim} '
                f'L={self.layers} widths={self.net.widths}>')


def mapped_normals(pushed: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    c = np.cross(pushed[:, :, 0], pushed[:, :, 1])
    norm = np.linalg.norm(c, axis=1)
    valid = norm >= DEGENERATE_CROSS
    normals = np.where(valid[:, None], c / np.where(valid, norm, 1.0)[:, None], 0.0)
    if not valid.all():
        logger.debug(f"{int((~valid).sum())} degenerate pushforwards skipped")
    return normals, valid


def local_jacobian_from_tangents(pushed: np.ndarray,
                                 mapped_frames: Optional[Tuple[np.ndarray, np.ndarray]] = None
                                 ) -> Tuple[np.ndarray, np.ndarray]:
    """J_f in the mapped frame t1 = a/|a|, t2 = n x t1 (or the given frames)."""
    a, b = pushed[:, :, 0], pushed[:, :, 1]
    normals, valid = mapped_normals(pushed)
    if mapped_frames is None:
        len_a = np.linalg.norm(a, axis=1)
        valid &= len_a > DEGENERATE_CROSS
        s1 = a / np.where(valid, len_a, 1.0)[:, None]
        s2 = np.cross(normals, s1)
    else:
        s1, s2 = (np.asarray(f, dtype=np.float64).reshape(-1, 3) for f in mapped_frames)
    J = np.empty((len(a), 2, 2))
    J[:, 0, 0] = np.einsum('ij,ij->i', s1, a)
    J[:, 0, 1] = np.einsum('ij,ij->i', s1, b)
    J[:, 1, 0] = np.einsum('ij,ij->i', s2, a)
    J[:, 1, 1] = np.einsum('ij,ij->i', s2, b)
    return J, valid


@dataclass
class InversePass:
    y: np.ndarray
    cache: MlpCache
    out: np.ndarray


class InverseField:
    """g_phi(y) = y + MLP(PE(y)) on ambient space."""

    def __init__(self, net: Mlp, layers: int = DEFAULT_LAYERS):
        if net.n_inputs != encoding_width(layers) or net.n_outputs != 3:
            raise UsageError(f"Network widths {net.widths} do not fit L={layers}")
        self.net = net
        self.layers = int(layers)

    @classmethod
    def create(cls, layers: int = DEFAULT_LAYERS, hidden: Sequence[int] = DEFAULT_HIDDEN,
               seed=None, dtype=np.float32) -> 'InverseField':
        return cls(kaiming_init(Mlp((encoding_width(layers), *hidden, 3), dtype=dtype), seed), layers)

    @classmethod
    def identity(cls, layers: int = DEFAULT_LAYERS, hidden: Sequence[int] = DEFAULT_HIDDEN,
                 dtype=np.float32) -> 'InverseField':
        return cls(Mlp((encoding_width(layers), *hidden, 3), dtype=dtype), layers)

    def parameters(self) -> List[np.ndarray]:
        return self.net.parameters()

    def set_parameters(self, params: Sequence[np.ndarray]) -> None:
        self.net.set_parameters(params)

    def copy(self) -> 'InverseField':
        return InverseField(self.net.copy(), self.layers)

    def run(self, y) -> InversePass:
        y = np.asarray(y, dtype=np.float64).reshape(-1, 3)
        out, cache = self.net.forward_cached(positional_encoding(y, self.layers))
        return InversePass(y, cache, y + out)

    def eval(self, y) -> np.ndarray:
        return self.run(y).out

    def backprop(self, ipass: InversePass, d_out: np.ndarray) -> Tuple[List[np.ndarray], np.ndarray]:
        """(parameter gradients, gradient with respect to the input points)."""
        grads, dX = self.net.backward(ipass.cache, d_out)
        return grads, d_out + encoding_vjp(ipass.y, dX, self.layers)


def rejection_sample(mesh: HalfedgeMesh, weight: Callable[[SurfacePoints], np.ndarray], n: int,
                     seed=None) -> SurfacePoints:
    """Surface points with density proportional to `weight`, by rejection from uniform proposals.

    The envelope is 1.2 x the largest weight seen so far in this call;
    acceptance probabilities are clamped to 1.
    """
    if n < 1:
        raise UsageError("Sample count must be at least 1")
    if mesh.n_faces == 0:
        raise MeshError("Mesh is empty")
    rng = np.random.default_rng(seed)
    batch = int(min(max(1024, 2 * n), MAX_PROPOSAL_BATCH))
    parts, have, accepted, proposed, bound = [], 0, 0, 0, 0.0
    while have < n:
        proposals = sample_uniform(mesh, batch, rng)
        w = np.abs(np.asarray(weight(proposals), dtype=np.float64))
        w = np.where(np.isfinite(w), w, 0.0)
        bound = max(bound, ENVELOPE_GROWTH * float(w.max()))
        u = rng.random(batch)
        keep = np.flatnonzero(u * bound < w) if bound > 0 else np.zeros(0, dtype=np.int64)
        proposed += batch
        accepted += len(keep)
        keep = keep[:n - have]
        parts.append(proposals.take(keep))
        have += len(keep)
        if have < n and proposed >= MIN_PROPOSALS and accepted < MIN_ACCEPTANCE * proposed:
            raise SamplingError(
                f"Rejection sampling accepted {accepted} of {proposed} proposals (envelope {bound:.3g})",
                payload={'accepted': accepted, 'proposed': proposed})
    logger.debug(f"Accepted {accepted}/{proposed} proposals, envelope {bound:.4g}")
    return SurfacePoints.concatenate(parts)


def sample_weighted(field: DisplacementField, n: int, seed=None) -> SurfacePoints:
    """Points on the base mesh distributed like uniform samples of the mapped surface."""
    return rejection_sample(field.base, field.area_distortion, n, seed)
