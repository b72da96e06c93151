"""
Training losses for the displacement field, each returned with the gradient
it sends back into the forward pass.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy.special import expit

from ndf.errors import ProjectionError
from ndf.mesh import SurfacePoint, SurfacePoints
from ndf.services.dispfield import DEGENERATE_CROSS, DisplacementField, FieldPass, InverseField, mapped_normals
from ndf.surfaces import ProjectionResult, Surface

logger = logging.getLogger(__name__)

SOFTPLUS_SHARPNESS = 10.0


@dataclass
class Anchor:
    """Pin the image of a base-mesh point to a target point on the surface."""
    point: SurfacePoint
    target: np.ndarray

    def __post_init__(self):
        self.target = np.asarray(self.target, dtype=np.float64).reshape(3)


@dataclass
class LossTerm:
    value: float
    count: int
    d_mapped: Optional[np.ndarray] = None
    d_pushed: Optional[np.ndarray] = None
    inverse_grads: Optional[List[np.ndarray]] = None
    fpass: Optional[FieldPass] = None
    projection: Optional[ProjectionResult] = None

    def __float__(self) -> float:
        return self.value


def softplus_chi(t) -> np.ndarray:
    """(1/10) ln(1 + exp(10 t)) in overflow-safe form."""
    t = np.asarray(t, dtype=np.float64)
    k = SOFTPLUS_SHARPNESS
    return np.maximum(t, 0.0) + np.log1p(np.exp(-k * np.abs(t))) / k


def conformal_penalty(J) -> np.ndarray:
    """chi(-det J / trace(J^T J)) per (2, 2) matrix; nan where the trace is zero."""
    J = np.asarray(J, dtype=np.float64).reshape(-1, 2, 2)
    det = np.linalg.det(J)
    trace = np.einsum('nij,nij->n', J, J)
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.where(trace > 0, softplus_chi(-det / trace), np.nan)


def loss_projection(fpass: FieldPass, surface: Surface) -> LossTerm:
    """Mean squared distance from mapped points to their projections.

    Projections are constants; non-converged samples are left out.
    """
    hint = mapped_normals(fpass.pushed)[0] if fpass.pushed is not None else None
    result = surface.project(fpass.mapped, hint)
    ok = result.converged
    count = int(ok.sum())
    if count == 0:
        raise ProjectionError(f"All {len(fpass)} projections failed", payload={'samples': len(fpass)})
    r = np.where(ok[:, None], fpass.mapped - result.points, 0.0)
    value = float(np.einsum('ij,ij->', r, r) / count)
    return LossTerm(value, count, d_mapped=2.0 * r / count, projection=result)


def loss_cycle(fpass: FieldPass, inverse: InverseField) -> LossTerm:
    """Mean ||g_phi(g_theta(x)) - x||^2."""
    ipass = inverse.run(fpass.mapped)
    r = ipass.out - fpass.x
    n = len(r)
    value = float(np.einsum('ij,ij->', r, r) / n)
    grads, d_mapped = inverse.backprop(ipass, 2.0 * r / n)
    return LossTerm(value, n, d_mapped=d_mapped, inverse_grads=grads)


def loss_anchor(field: DisplacementField, anchors: Sequence[Anchor]) -> LossTerm:
    """Mean ||g(p_i) - q_i||^2 over the anchors, on its own forward pass."""
    if not anchors:
        return LossTerm(0.0, 0)
    points = SurfacePoints.from_list([a.point for a in anchors])
    targets = np.stack([a.target for a in anchors])
    fpass = field.run(points)
    r = fpass.mapped - targets
    n = len(r)
    return LossTerm(float(np.einsum('ij,ij->', r, r) / n), n, d_mapped=2.0 * r / n, fpass=fpass)


def loss_normal(fpass: FieldPass, surface: Surface, projection: ProjectionResult) -> LossTerm:
    """Mean ||n_theta - n_surface(P)||^2 over converged, non-degenerate samples."""
    a, b = fpass.pushed[:, :, 0], fpass.pushed[:, :, 1]
    normals, valid = mapped_normals(fpass.pushed)
    valid &= projection.converged
    count = int(valid.sum())
    d_pushed = np.zeros_like(fpass.pushed)
    if count == 0:
        return LossTerm(0.0, 0, d_pushed=d_pushed)
    idx = np.flatnonzero(valid)
    target = surface.normal(projection.points[idx])
    r = normals[idx] - target
    value = float(np.einsum('ij,ij->', r, r) / count)

    c = np.cross(a[idx], b[idx])
    norm = np.linalg.norm(c, axis=1)
    dn = 2.0 * r / count
    n = normals[idx]
    g_c = (dn - np.einsum('ij,ij->i', n, dn)[:, None] * n) / norm[:, None]
    d_pushed[idx, :, 0] = np.cross(b[idx], g_c)
    d_pushed[idx, :, 1] = np.cross(g_c, a[idx])
    return LossTerm(value, count, d_pushed=d_pushed)


def loss_conformal(fpass: FieldPass) -> LossTerm:
    """Mean chi(-det J_f / trace(J_f^T J_f)) over samples with non-zero trace.

    With J_f taken in the mapped frame, det J_f = |a x b| and
    trace(J_f^T J_f) = |a|^2 + |b|^2 for the pushed tangents a, b.
    """
    a, b = fpass.pushed[:, :, 0], fpass.pushed[:, :, 1]
    c = np.cross(a, b)
    det = np.linalg.norm(c, axis=1)
    trace = np.einsum('ij,ij->i', a, a) + np.einsum('ij,ij->i', b, b)
    valid = trace > 0
    count = int(valid.sum())
    d_pushed = np.zeros_like(fpass.pushed)
    if count == 0:
        return LossTerm(0.0, 0, d_pushed=d_pushed)
    idx = np.flatnonzero(valid)
    det, trace, c = det[idx], trace[idx], c[idx]
    t = -det / trace
    value = float(softplus_chi(t).sum() / count)

    c_hat = np.where(det[:, None] > DEGENERATE_CROSS, c / np.maximum(det, DEGENERATE_CROSS)[:, None], 0.0)
    scale = expit(SOFTPLUS_SHARPNESS * t) / count
    ai, bi = a[idx], b[idx]
    d_a = -np.cross(bi, c_hat) / trace[:, None] + 2.0 * ai * (det / trace ** 2)[:, None]
    d_b = -np.cross(c_hat, ai) / trace[:, None] + 2.0 * bi * (det / trace ** 2)[:, None]
    d_pushed[idx, :, 0] = scale[:, None] * d_a
    d_pushed[idx, :, 1] = scale[:, None] * d_b
    return LossTerm(value, count, d_pushed=d_pushed)


def identity_loss(fpass: FieldPass) -> LossTerm:
    """Mean ||g(x) - x||^2, the pretraining target."""
    r = fpass.mapped - fpass.x
    n = len(r)
    return LossTerm(float(np.einsum('ij,ij->', r, r) / n), n, d_mapped=2.0 * r / n)

