"""
Surface interface: implicit evaluation, gradients, winding numbers and the
projection operator onto the target shape.

All queries are batched: points are (n, 3) arrays, a single (3,) point is
accepted and treated as a batch of one.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ndf.errors import DomainError, RepresentationError

logger = logging.getLogger(__name__)

PROJECTION_TOL = 1e-6
NEWTON_MAX_ITER = 30
MAX_HALVINGS = 12
GRID_CHUNK = 65536


@dataclass
class ProjectionResult:
    points: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray

    def __len__(self) -> int:
        return len(self.points)

    @property
    def convergence_rate(self) -> float:
        return float(self.converged.mean()) if len(self) else 0.0


def as_points(p) -> np.ndarray:
    return np.asarray(p, dtype=np.float64).reshape(-1, 3)


class Surface:
    """Target surface. Subclasses override what their representation supports."""

    is_implicit = True

    def eval(self, p) -> np.ndarray:
        raise RepresentationError(f"{type(self).__name__} has no implicit function")

    def grad(self, p) -> np.ndarray:
        raise RepresentationError(f"{type(self).__name__} has no implicit function")

    def winding_number(self, p) -> np.ndarray:
        raise RepresentationError(f"{type(self).__name__} has no winding number")

    def normal(self, p) -> np.ndarray:
        """Unit outward normal at (or near) surface points."""
        g = self.grad(p)
        norm = np.linalg.norm(g, axis=1, keepdims=True)
        return g / np.where(norm > 0, norm, 1.0)

    def project(self, p, normal_hint: Optional[np.ndarray] = None) -> ProjectionResult:
        return newton_project(self, p)

    @property
    def bbox(self) -> np.ndarray:
        """(2, 3) array of lower and upper corners."""
        raise NotImplementedError

    def level_field(self, p) -> np.ndarray:
        """Scalar field whose zero level set is the surface, negative inside."""
        if self.is_implicit:
            return self.eval(p)
        return 0.5 - self.winding_number(p)

    def level_grid(self, origin: np.ndarray, spacing: float, shape) -> np.ndarray:
        """`level_field` sampled at origin + spacing * (i, j, k)."""
        nodes = grid_nodes(origin, spacing, shape)
        out = np.empty(len(nodes))
        for s in range(0, len(nodes), GRID_CHUNK):
            out[s:s + GRID_CHUNK] = self.level_field(nodes[s:s + GRID_CHUNK])
        return out.reshape(tuple(shape))


def grid_nodes(origin: np.ndarray, spacing: float, shape) -> np.ndarray:
    axes = [origin[a] + spacing * np.arange(shape[a]) for a in range(3)]
    return np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1).reshape(-1, 3)


def newton_project(surface: Surface, p, max_iter: int = NEWTON_MAX_ITER,
                   tol: float = PROJECTION_TOL) -> ProjectionResult:
    """Newton iteration p <- p - phi * grad / |grad|^2 with step halving.

    A step is accepted only if it lowers |phi|; otherwise it is halved up to
    MAX_HALVINGS times before the point is reported as non-converged. Points
    that leave the surface's domain are non-converged.
    """
    x = as_points(p).copy()
    n = len(x)
    converged = np.zeros(n, dtype=bool)
    failed = np.zeros(n, dtype=bool)
    iterations = np.zeros(n, dtype=np.int64)

    phi = _safe_eval(surface, x)
    failed |= ~np.isfinite(phi)
    converged |= ~failed & (np.abs(phi) <= tol)

    for _ in range(max_iter):
        active = np.flatnonzero(~converged & ~failed)
        if not len(active):
            break
        xa, fa = x[active], phi[active]
        g = _safe_grad(surface, xa)
        g2 = np.einsum('ij,ij->i', g, g)
        bad = ~np.isfinite(g2) | (g2 < 1e-24)
        step = np.where(bad, 0.0, fa / np.where(bad, 1.0, g2))[:, None] * g

        accepted = np.zeros(len(active), dtype=bool)
        new_x, new_phi = xa.copy(), fa.copy()
        scale = 1.0
        todo = np.flatnonzero(~bad)
        for _ in range(MAX_HALVINGS + 1):
            if not len(todo):
                break
            trial = xa[todo] - scale * step[todo]
            f = _safe_eval(surface, trial)
            ok = np.isfinite(f) & (np.abs(f) < np.abs(fa[todo]))
            sel = todo[ok]
            new_x[sel], new_phi[sel] = trial[ok], f[ok]
            accepted[sel] = True
            todo = todo[~ok]
            scale *= 0.5

        iterations[active] += 1
        x[active], phi[active] = new_x, new_phi
        failed[active[~accepted]] = True
        converged[active] |= accepted & (np.abs(new_phi) <= tol)

    return ProjectionResult(x, converged, iterations)


def _safe_eval(surface: Surface, x: np.ndarray) -> np.ndarray:
    try:
        return surface.eval(x)
    except DomainError:
        out = np.full(len(x), np.nan)
        inside = surface.contains(x) if hasattr(surface, 'contains') else np.zeros(len(x), dtype=bool)
        if inside.any():
            out[inside] = surface.eval(x[inside])
        return out


def _safe_grad(surface: Surface, x: np.ndarray) -> np.ndarray:
    try:
        return surface.grad(x)
    except DomainError:
        out = np.full((len(x), 3), np.nan)
        inside = surface.contains(x) if hasattr(surface, 'contains') else np.zeros(len(x), dtype=bool)
        if inside.any():
            out[inside] = surface.grad(x[inside])
        return out
