"""
Marching cubes over a regular grid, vectorized over cells.

Vertices are keyed by the grid edge they lie on, so the two cells sharing
an edge produce the same vertex (same interpolation endpoints, same bits).
"""
import logging
from typing import Optional, Tuple

import numpy as np

from ndf.basemesh._tables import CORNER_OFFSETS, EDGE_CORNERS, TRIANGLE_TABLE
from ndf.errors import EmptyLevelSetError, UsageError
from ndf.mesh.halfedge import HalfedgeMesh
from ndf.surfaces.base import Surface

logger = logging.getLogger(__name__)

MIN_RESOLUTION = 8
PADDING_CELLS = 2
T_CLAMP = 1e-4

_EDGE_AXIS = np.argmax(CORNER_OFFSETS[EDGE_CORNERS[:, 1]] != CORNER_OFFSETS[EDGE_CORNERS[:, 0]], axis=1)
_EDGE_LOWER = np.minimum(CORNER_OFFSETS[EDGE_CORNERS[:, 0]], CORNER_OFFSETS[EDGE_CORNERS[:, 1]])


def grid_layout(bbox: np.ndarray, resolution: int) -> Tuple[np.ndarray, float, Tuple[int, int, int]]:
    """Cubic cells; `resolution` nodes span the longest side plus padding."""
    if resolution < MIN_RESOLUTION:
        raise UsageError(f"Marching cubes resolution must be at least {MIN_RESOLUTION}")
    lo, hi = np.asarray(bbox, dtype=np.float64)
    extent = hi - lo
    spacing = float(extent.max()) / (resolution - 1 - 2 * PADDING_CELLS)
    counts = np.ceil(extent / spacing).astype(np.int64) + 1 + 2 * PADDING_CELLS
    origin = (lo + hi) / 2.0 - spacing * (counts - 1) / 2.0
    return origin, spacing, tuple(int(c) for c in counts)


def marching_cubes(surface: Surface, resolution: int = 128, iso: float = 0.0,
                   bbox: Optional[np.ndarray] = None) -> HalfedgeMesh:
    """Iso-surface of `surface.level_field` (SDF value, or 1/2 - winding number)."""
    origin, spacing, shape = grid_layout(surface.bbox if bbox is None else bbox, resolution)
    values = surface.level_grid(origin, spacing, shape)
    logger.info(f"Marching cubes on a {shape[0]}x{shape[1]}x{shape[2]} grid (spacing {spacing:.4g})")
    return marching_cubes_grid(values, origin, spacing, iso)


def marching_cubes_grid(values: np.ndarray, origin, spacing: float, iso: float = 0.0) -> HalfedgeMesh:
    values = np.asarray(values, dtype=np.float64)
    origin = np.asarray(origin, dtype=np.float64)
    nx, ny, nz = values.shape
    below = values < iso

    cases = np.zeros((nx - 1, ny - 1, nz - 1), dtype=np.int64)
    for k, (dx, dy, dz) in enumerate(CORNER_OFFSETS):
        cases |= below[dx:nx - 1 + dx, dy:ny - 1 + dy, dz:nz - 1 + dz].astype(np.int64) << k
    cells = np.argwhere((cases != 0) & (cases != 255))
    if not len(cells):
        raise EmptyLevelSetError("No sign change in the sampled field")

    tris = TRIANGLE_TABLE[cases[cells[:, 0], cells[:, 1], cells[:, 2]]].reshape(-1, 5, 3)
    cell_of_tri, slot = np.nonzero(tris[:, :, 0] >= 0)
    edges = tris[cell_of_tri, slot]                               # (T, 3) cell-edge ids
    lower = cells[cell_of_tri][:, None, :] + _EDGE_LOWER[edges]  # (T, 3, 3) grid node
    axis = _EDGE_AXIS[edges]
    n_nodes = nx * ny * nz
    node_id = (lower[..., 0] * ny + lower[..., 1]) * nz + lower[..., 2]
    keys = axis * n_nodes + node_id

    uniq, faces = np.unique(keys.reshape(-1), return_inverse=True)
    faces = faces.reshape(-1, 3)
    u_axis, u_node = uniq // n_nodes, uniq % n_nodes
    a = np.stack(np.unravel_index(u_node, (nx, ny, nz)), axis=1)
    b = a + np.eye(3, dtype=np.int64)[u_axis]
    va = values[a[:, 0], a[:, 1], a[:, 2]]
    vb = values[b[:, 0], b[:, 1], b[:, 2]]
    t = np.clip((iso - va) / (vb - va), T_CLAMP, 1.0 - T_CLAMP)
    vertices = origin + spacing * (a + t[:, None] * (b - a))

    mesh = HalfedgeMesh(vertices, faces)
    if mesh.signed_volume < 0:
        mesh = HalfedgeMesh(vertices, faces[:, [0, 2, 1]])
    logger.info(f"Marching cubes: V={mesh.n_vertices} F={mesh.n_faces}")
    return mesh
