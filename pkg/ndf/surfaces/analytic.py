"""
Closed-form signed distance functions.
"""
import logging
from typing import Optional

import numpy as np

from ndf.errors import SurfaceError
from ndf.surfaces.base import (PROJECTION_TOL, ProjectionResult, Surface, as_points,
                               newton_project)

logger = logging.getLogger(__name__)

POLISH_STEPS = 3


class AnalyticSdf(Surface):
    """Base for closed-form SDFs: exact gradient, one-step projection."""

    def project(self, p, normal_hint: Optional[np.ndarray] = None) -> ProjectionResult:
        x = as_points(p).copy()
        phi = self.eval(x)
        todo = np.abs(phi) > PROJECTION_TOL
        iterations = np.zeros(len(x), dtype=np.int64)
        if todo.any():
            xt = x[todo]
            xt = xt - phi[todo][:, None] * self.grad(xt)
            polish = newton_project(self, xt, max_iter=POLISH_STEPS)
            x[todo] = polish.points
            iterations[todo] = 1 + polish.iterations
        converged = np.abs(self.eval(x)) <= PROJECTION_TOL
        return ProjectionResult(x, converged, iterations)


class Sphere(AnalyticSdf):

    def __init__(self, radius: float = 1.0, center=(0.0, 0.0, 0.0)):
        if radius <= 0:
            raise SurfaceError("Sphere radius must be positive")
        self.radius = float(radius)
        self.center = np.asarray(center, dtype=np.float64)

    def eval(self, p) -> np.ndarray:
        return np.linalg.norm(as_points(p) - self.center, axis=1) - self.radius

    def grad(self, p) -> np.ndarray:
        d = as_points(p) - self.center
        norm = np.linalg.norm(d, axis=1, keepdims=True)
        # the center has no unique direction; +z is used
        return np.where(norm > 0, d / np.where(norm > 0, norm, 1.0), [0.0, 0.0, 1.0])

    @property
    def bbox(self) -> np.ndarray:
        return np.stack([self.center - self.radius, self.center + self.radius])


class Torus(AnalyticSdf):
    """Torus around the z axis with major radius R and tube radius r."""

    def __init__(self, major: float = 1.0, minor: float = 0.3, center=(0.0, 0.0, 0.0)):
        if not 0 < minor < major:
            raise SurfaceError("Torus needs 0 < minor < major")
        self.major = float(major)
        self.minor = float(minor)
        self.center = np.asarray(center, dtype=np.float64)

    def _q(self, p):
        d = as_points(p) - self.center
        rho = np.hypot(d[:, 0], d[:, 1])
        return d, rho, np.stack([rho - self.major, d[:, 2]], axis=1)

    def eval(self, p) -> np.ndarray:
        _, _, q = self._q(p)
        return np.linalg.norm(q, axis=1) - self.minor

    def grad(self, p) -> np.ndarray:
        d, rho, q = self._q(p)
        qn = np.linalg.norm(q, axis=1)
        qn = np.where(qn > 0, qn, 1.0)
        safe_rho = np.where(rho > 0, rho, 1.0)
        radial = np.stack([np.where(rho > 0, d[:, 0] / safe_rho, 1.0),
                           np.where(rho > 0, d[:, 1] / safe_rho, 0.0)], axis=1)
        g = np.empty_like(d)
        g[:, :2] = (q[:, 0] / qn)[:, None] * radial
        g[:, 2] = q[:, 1] / qn
        return g

    @property
    def bbox(self) -> np.ndarray:
        ext = np.array([self.major + self.minor, self.major + self.minor, self.minor])
        return np.stack([self.center - ext, self.center + ext])


class Box(AnalyticSdf):

    def __init__(self, half_extents=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0)):
        self.half_extents = np.asarray(half_extents, dtype=np.float64)
        if np.any(self.half_extents <= 0):
            raise SurfaceError("Box half extents must be positive")
        self.center = np.asarray(center, dtype=np.float64)

    def eval(self, p) -> np.ndarray:
        q = np.abs(as_points(p) - self.center) - self.half_extents
        return np.linalg.norm(np.maximum(q, 0.0), axis=1) + np.minimum(q.max(axis=1), 0.0)

    def grad(self, p) -> np.ndarray:
        d = as_points(p) - self.center
        sign = np.where(d < 0, -1.0, 1.0)
        q = np.abs(d) - self.half_extents
        outside = np.maximum(q, 0.0)
        norm = np.linalg.norm(outside, axis=1, keepdims=True)
        g = sign * outside / np.where(norm > 0, norm, 1.0)
        inside = norm[:, 0] == 0
        k = np.argmax(q[inside], axis=1)
        g_in = np.zeros((inside.sum(), 3))
        g_in[np.arange(len(k)), k] = sign[inside][np.arange(len(k)), k]
        g[inside] = g_in
        return g

    @property
    def bbox(self) -> np.ndarray:
        return np.stack([self.center - self.half_extents, self.center + self.half_extents])


class SmoothUnion(AnalyticSdf):
    """Polynomial smooth minimum of two SDFs with blend radius k."""

    def __init__(self, a: AnalyticSdf, b: AnalyticSdf, k: float = 0.1):
        if k <= 0:
            raise SurfaceError("Blend radius must be positive")
        self.a, self.b, self.k = a, b, float(k)

    def _parts(self, p):
        da, db = self.a.eval(p), self.b.eval(p)
        h = np.maximum(self.k - np.abs(da - db), 0.0)
        return da, db, h

    def eval(self, p) -> np.ndarray:
        da, db, h = self._parts(p)
        return np.minimum(da, db) - h * h * 0.25 / self.k

    def grad(self, p) -> np.ndarray:
        da, db, h = self._parts(p)
        s = np.sign(da - db)
        wa = np.where(da < db, 1.0, np.where(da == db, 0.5, 0.0)) + 0.5 * h * s / self.k
        wb = 1.0 - wa
        return wa[:, None] * self.a.grad(p) + wb[:, None] * self.b.grad(p)

    @property
    def bbox(self) -> np.ndarray:
        ba, bb = self.a.bbox, self.b.bbox
        return np.stack([np.minimum(ba[0], bb[0]) - self.k, np.maximum(ba[1], bb[1]) + self.k])


def make_analytic(name: str) -> AnalyticSdf:
    """Named shapes used by the command line."""
    shapes = {
        'sphere': lambda: Sphere(1.0),
        'torus': lambda: Torus(1.0, 0.3),
        'box': lambda: Box((0.8, 0.6, 0.5)),
    }
    if name not in shapes:
        raise SurfaceError(f"Unknown analytic shape: {name}")
    return shapes[name]()
