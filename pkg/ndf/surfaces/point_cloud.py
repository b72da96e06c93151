"""
Oriented point cloud: generalized winding number and ray projection onto
its 1/2 level set.
"""
import logging
from typing import Optional

import numpy as np
from scipy import ndimage
from sklearn.neighbors import KDTree

from ndf.errors import SurfaceError
from ndf.surfaces.base import (GRID_CHUNK, PROJECTION_TOL, ProjectionResult, Surface, as_points,
                               grid_nodes)

logger = logging.getLogger(__name__)

K_NEIGHBORS = 8
CHUNK_ENTRIES = 1_000_000
MARCH_GROWTH = 1.5
MAX_BISECTIONS = 60


class OrientedPointCloud(Surface):
    """Points with unit normals, indexed by a k-d tree.

    Every point carries the same area weight, estimated from the mean squared
    distance to the 8th neighbour (pi * r8^2 / 8 is the area per point of a
    locally uniform sample).
    """

    is_implicit = False

    def __init__(self, points: np.ndarray, normals: np.ndarray):
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        normals = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
        if len(points) <= K_NEIGHBORS or len(points) != len(normals):
            raise SurfaceError(f"Point cloud needs more than {K_NEIGHBORS} points with one normal each")
        length = np.linalg.norm(normals, axis=1)
        if np.any(length < 1e-12):
            raise SurfaceError("Point cloud has zero-length normals")
        self.points = points
        self.normals = normals / length[:, None]
        self.tree = KDTree(points)

        dist, _ = self.tree.query(points, k=K_NEIGHBORS + 1)
        self.spacing = float(dist[:, 1:].mean())
        self.area_weight = self.spacing ** 2
        lo, hi = points.min(axis=0), points.max(axis=0)
        self._bbox = np.stack([lo, hi])
        self.diagonal = float(np.linalg.norm(hi - lo))
        self._weighted_normals = self.area_weight * self.normals
        logger.info(f"Point cloud: {len(points)} points, spacing {self.spacing:.4g}")

    @property
    def bbox(self) -> np.ndarray:
        return self._bbox.copy()

    def winding_number(self, p) -> np.ndarray:
        """Exact sum of per-point dipole contributions a_i (p_i - q) . n_i / (4 pi |p_i - q|^3)."""
        Q = as_points(p).copy()
        dist, _ = self.tree.query(Q, k=1)
        # a query sitting on a sample point is nudged off it
        Q[dist[:, 0] < 1e-12 * self.diagonal] += 1e-9 * self.diagonal / np.sqrt(3.0)
        out = np.empty(len(Q))
        chunk = max(1, CHUNK_ENTRIES // len(self.points))
        for s in range(0, len(Q), chunk):
            d = self.points[None] - Q[s:s + chunk, None]
            r = np.linalg.norm(d, axis=2)
            out[s:s + chunk] = (np.einsum('qpi,pi->qp', d, self._weighted_normals) / r ** 3).sum(axis=1)
        return out / (4.0 * np.pi)

    def normal(self, p) -> np.ndarray:
        """Gaussian-weighted blend (width = mean spacing) of the 8 nearest normals."""
        Q = as_points(p)
        dist, idx = self.tree.query(Q, k=K_NEIGHBORS)
        w = np.exp(-(dist / self.spacing) ** 2)
        n = np.einsum('qk,qki->qi', w, self.normals[idx])
        norm = np.linalg.norm(n, axis=1, keepdims=True)
        return n / np.where(norm > 0, norm, 1.0)

    def project(self, p, normal_hint: Optional[np.ndarray] = None) -> ProjectionResult:
        """Move each point along its estimated normal line to where the winding number is 1/2.

        The line is searched in both directions with geometrically growing
        steps until the level is bracketed, then the bracket is bisected to
        width 1e-6. Unbracketed points are reported as non-converged.
        """
        X = as_points(p)
        n = len(X)
        direction = self.normal(X)
        if normal_hint is not None:
            hint = as_points(normal_hint)
            weak = np.linalg.norm(direction, axis=1) < 1e-8
            direction[weak] = hint[weak]
        f0 = self.winding_number(X) - 0.5
        direction[f0 < 0] *= -1.0

        lo = np.zeros(n)
        hi = np.zeros(n)
        bracketed = np.abs(f0) == 0.0
        iterations = np.zeros(n, dtype=np.int64)
        prev = np.zeros((n, 2))
        t = self.spacing
        while t <= 2.0 * self.diagonal and not bracketed.all():
            active = np.flatnonzero(~bracketed)
            iterations[active] += 1
            for side, sgn in enumerate((1.0, -1.0)):
                active = active[~bracketed[active]]
                if not len(active):
                    break
                f = self.winding_number(X[active] + sgn * t * direction[active]) - 0.5
                hit = np.sign(f) != np.sign(f0[active])
                a = active[hit]
                lo[a], hi[a] = sgn * prev[a, side], sgn * t
                bracketed[a] = True
                prev[active[~hit], side] = t
            t *= MARCH_GROWTH

        idx = np.flatnonzero(bracketed & (lo != hi))
        for _ in range(MAX_BISECTIONS):
            idx = idx[np.abs(hi[idx] - lo[idx]) > PROJECTION_TOL]
            if not len(idx):
                break
            iterations[idx] += 1
            mid = 0.5 * (lo[idx] + hi[idx])
            f = self.winding_number(X[idx] + mid[:, None] * direction[idx]) - 0.5
            same = np.sign(f) == np.sign(f0[idx])
            lo[idx[same]] = mid[same]
            hi[idx[~same]] = mid[~same]

        t_final = 0.5 * (lo + hi)
        points = X + t_final[:, None] * direction
        return ProjectionResult(points, bracketed, iterations)

    def level_grid(self, origin: np.ndarray, spacing: float, shape) -> np.ndarray:
        """Winding-number level field on a grid, summed exactly only near the samples.

        Nodes farther than a few cells from every sample are grouped into
        6-connected regions; one winding number per region decides whether
        the whole region is inside (-1/2) or outside (+1/2).
        """
        shape = tuple(int(s) for s in shape)
        nodes = grid_nodes(origin, spacing, shape)
        dist, _ = self.tree.query(nodes, k=1)
        near = dist[:, 0] <= max(3.0 * spacing, 2.0 * self.spacing)
        out = np.empty(len(nodes))
        near_idx = np.flatnonzero(near)
        for s in range(0, len(near_idx), GRID_CHUNK):
            chunk = near_idx[s:s + GRID_CHUNK]
            out[chunk] = 0.5 - self.winding_number(nodes[chunk])

        labels, n_regions = ndimage.label(~near.reshape(shape))
        labels = labels.reshape(-1)
        if n_regions:
            order = np.argsort(labels, kind='stable')
            starts = np.searchsorted(labels[order], np.arange(1, n_regions + 1))
            reps = order[starts]
            inside = self.winding_number(nodes[reps]) > 0.5
            region_value = np.where(inside, -0.5, 0.5)
            far = labels > 0
            out[far] = region_value[labels[far] - 1]
        logger.debug(f"Winding grid: {near.sum()} of {len(nodes)} nodes summed exactly")
        return out.reshape(shape)
