"""
Point sampling on the mapped surface: white noise by area-distortion
rejection, blue noise by dart throwing with mapped-space distances.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
from sklearn.neighbors import KDTree

from ndf.errors import UsageError
from ndf.mesh import Bvh, SurfacePoints, face_frames
from ndf.services.dispfield import DEGENERATE_CROSS, DisplacementField, sample_weighted
from ndf.utils.logging import log_stage

logger = logging.getLogger(__name__)

DARTS_PER_SAMPLE = 30
INITIAL_SEEDS = 32


@dataclass
class Samples:
    """Base-mesh points and their mapped positions."""
    points: SurfacePoints
    positions: np.ndarray

    def __len__(self) -> int:
        return len(self.positions)


def white_noise(field: DisplacementField, n: int, seed=None) -> Samples:
    """n points uniformly distributed by area on the mapped surface."""
    if n < 1:
        raise UsageError(f"Sample count must be positive, got {n}")
    with log_stage('sample'):
        points = sample_weighted(field, n, seed)
        positions = field.eval(points)
    logger.info(f"White noise: {n} samples")
    return Samples(points, positions)


class _HashGrid:
    """Accepted mapped positions bucketed in cells of side r / sqrt(3)."""

    def __init__(self, r: float):
        self.r = r
        self.cell = r / np.sqrt(3.0)
        self.buckets: Dict[Tuple[int, int, int], List[int]] = {}
        self.positions: List[np.ndarray] = []

    def _key(self, p: np.ndarray) -> Tuple[int, int, int]:
        return tuple(np.floor(p / self.cell).astype(np.int64))

    def fits(self, p: np.ndarray) -> bool:
        kx, ky, kz = self._key(p)
        for dx in range(-2, 3):
            for dy in range(-2, 3):
                for dz in range(-2, 3):
                    for idx in self.buckets.get((kx + dx, ky + dy, kz + dz), ()):
                        if np.linalg.norm(self.positions[idx] - p) < self.r:
                            return False
        return True

    def insert(self, p: np.ndarray) -> int:
        idx = len(self.positions)
        self.positions.append(p)
        self.buckets.setdefault(self._key(p), []).append(idx)
        return idx


def _annulus_proposals(field: DisplacementField, bvh: Bvh, center: SurfacePoints, r: float,
                       rng: np.random.Generator, k: int) -> SurfacePoints:
    """k base-mesh points whose first-order images land in the mapped annulus [r, 2r] around `center`."""
    _, t1, t2 = face_frames(field.base, center.faces)
    pushed = field.pushforward(center, np.stack([t1, t2], axis=2))[0]
    a, b = pushed[:, 0], pushed[:, 1]
    if np.linalg.norm(np.cross(a, b)) <= DEGENERATE_CROSS:
        return SurfacePoints(np.zeros(0, dtype=np.int64), np.zeros((0, 3)))
    # orthonormal basis of the mapped tangent plane
    e1 = a / np.linalg.norm(a)
    e2 = b - (b @ e1) * e1
    e2 /= np.linalg.norm(e2)
    theta = rng.uniform(0.0, 2.0 * np.pi, k)
    rho = r * np.sqrt(3.0 * rng.random(k) + 1.0)
    w = rho[:, None] * (np.cos(theta)[:, None] * e1 + np.sin(theta)[:, None] * e2)
    coeffs, *_ = np.linalg.lstsq(pushed, w.T, rcond=None)
    x = field.base.embed(center)[0]
    proposals = x + coeffs[0][:, None] * t1[0] + coeffs[1][:, None] * t2[0]
    points, _, _ = bvh.query(proposals)
    return points


def blue_noise(field: DisplacementField, r: float, seed=None, darts: int = DARTS_PER_SAMPLE) -> Samples:
    """Poisson-disk samples with pairwise mapped distance at least r."""
    if not r > 0:
        raise UsageError(f"Blue-noise radius must be positive, got {r}")
    rng = np.random.default_rng(seed)
    bvh = Bvh(field.base)
    grid = _HashGrid(r)
    accepted_faces: List[int] = []
    accepted_bary: List[np.ndarray] = []
    active: List[int] = []

    def accept(face: int, bary: np.ndarray, position: np.ndarray) -> bool:
        if not grid.fits(position):
            return False
        active.append(grid.insert(position))
        accepted_faces.append(int(face))
        accepted_bary.append(bary)
        return True

    with log_stage('sample'):
        seeds = sample_weighted(field, INITIAL_SEEDS, rng)
        for point, position in zip(seeds, field.eval(seeds)):
            accept(point.face, point.bary, position)
        while active:
            slot = int(rng.integers(len(active)))
            idx = active[slot]
            center = SurfacePoints(np.array([accepted_faces[idx]]), accepted_bary[idx][None, :])
            proposals = _annulus_proposals(field, bvh, center, r, rng, darts)
            placed = False
            if len(proposals):
                for point, position in zip(proposals, field.eval(proposals)):
                    if accept(point.face, point.bary, position):
                        placed = True
                        break
            if not placed:
                active[slot] = active[-1]
                active.pop()
    points = SurfacePoints(np.array(accepted_faces, dtype=np.int64), np.array(accepted_bary).reshape(-1, 3))
    logger.info(f"Blue noise: {len(points)} samples at r={r}")
    return Samples(points, np.array(grid.positions).reshape(-1, 3))


def min_pairwise_distance(positions: np.ndarray) -> float:
    positions = np.asarray(positions, dtype=np.float64)
    if len(positions) < 2:
        return float('inf')
    dist, _ = KDTree(positions).query(positions, k=2)
    return float(dist[:, 1].min())
