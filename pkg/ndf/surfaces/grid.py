"""
Axis-aligned grid of signed distances with trilinear interpolation.

File layout (little-endian): three u32 dims (nx, ny, nz), six f32 bounds
(xmin, ymin, zmin, xmax, ymax, zmax), then nx*ny*nz f32 values in
row-major order (index [i, j, k], k fastest).
"""
import logging
import struct

import numpy as np

from ndf.errors import DomainError, SurfaceError
from ndf.surfaces.base import Surface, as_points

logger = logging.getLogger(__name__)

_HEADER = struct.Struct('<3I6f')


class GridSdf(Surface):

    def __init__(self, values: np.ndarray, bbox):
        values = np.asarray(values, dtype=np.float32)
        if values.ndim != 3 or min(values.shape) < 2:
            raise SurfaceError("Grid needs at least 2 samples per axis")
        bbox = np.asarray(bbox, dtype=np.float64).reshape(2, 3)
        if np.any(bbox[1] <= bbox[0]):
            raise SurfaceError("Grid bounds are empty")
        self.values = values
        self.values.setflags(write=False)
        self._bbox = bbox
        self.shape = np.array(values.shape)
        self.spacing = (bbox[1] - bbox[0]) / (self.shape - 1)

    @classmethod
    def from_function(cls, fn, bbox, resolution) -> 'GridSdf':
        """Sample `fn` (batched points -> values) on a regular grid."""
        bbox = np.asarray(bbox, dtype=np.float64).reshape(2, 3)
        res = np.broadcast_to(np.asarray(resolution, dtype=np.int64), (3,))
        axes = [np.linspace(bbox[0, a], bbox[1, a], res[a]) for a in range(3)]
        pts = np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1).reshape(-1, 3)
        return cls(np.asarray(fn(pts)).reshape(tuple(res)), bbox)

    @classmethod
    def load(cls, path: str) -> 'GridSdf':
        with open(path, 'rb') as f:
            data = f.read()
        if len(data) < _HEADER.size:
            raise SurfaceError(f"{path}: truncated grid header")
        header = _HEADER.unpack_from(data)
        dims, bounds = header[:3], header[3:]
        count = int(np.prod(dims))
        if len(data) < _HEADER.size + 4 * count:
            raise SurfaceError(f"{path}: expected {count} grid values")
        values = np.frombuffer(data, dtype='<f4', count=count, offset=_HEADER.size).reshape(dims)
        logger.info(f"Loaded grid {path}: dims={dims}")
        return cls(values, np.array(bounds).reshape(2, 3))

    def save(self, path: str) -> None:
        with open(path, 'wb') as f:
            f.write(_HEADER.pack(*map(int, self.shape), *self._bbox.reshape(-1).astype(np.float32)))
            f.write(self.values.astype('<f4').tobytes())

    @property
    def bbox(self) -> np.ndarray:
        return self._bbox.copy()

    def contains(self, p) -> np.ndarray:
        x = as_points(p)
        return np.all((x >= self._bbox[0]) & (x <= self._bbox[1]), axis=1)

    def _cell(self, p):
        x = as_points(p)
        if not np.all(self.contains(x)):
            raise DomainError("Point outside the grid bounds")
        u = (x - self._bbox[0]) / self.spacing
        i = np.clip(np.floor(u).astype(np.int64), 0, self.shape - 2)
        return i, u - i

    def _corners(self, i):
        v = self.values
        c = {}
        for dx in (0, 1):
            for dy in (0, 1):
                for dz in (0, 1):
                    c[dx, dy, dz] = v[i[:, 0] + dx, i[:, 1] + dy, i[:, 2] + dz].astype(np.float64)
        return c

    def eval(self, p) -> np.ndarray:
        i, t = self._cell(p)
        c = self._corners(i)
        tx, ty, tz = t[:, 0], t[:, 1], t[:, 2]
        c00 = c[0, 0, 0] * (1 - tx) + c[1, 0, 0] * tx
        c01 = c[0, 0, 1] * (1 - tx) + c[1, 0, 1] * tx
        c10 = c[0, 1, 0] * (1 - tx) + c[1, 1, 0] * tx
        c11 = c[0, 1, 1] * (1 - tx) + c[1, 1, 1] * tx
        c0 = c00 * (1 - ty) + c10 * ty
        c1 = c01 * (1 - ty) + c11 * ty
        return c0 * (1 - tz) + c1 * tz

    def grad(self, p) -> np.ndarray:
        """Exact derivative of the trilinear interpolant inside the cell."""
        i, t = self._cell(p)
        c = self._corners(i)
        tx, ty, tz = t[:, 0], t[:, 1], t[:, 2]
        wx = {0: 1 - tx, 1: tx}
        wy = {0: 1 - ty, 1: ty}
        wz = {0: 1 - tz, 1: tz}
        sign = {0: -1.0, 1: 1.0}
        g = np.zeros((len(t), 3))
        for (dx, dy, dz), v in c.items():
            g[:, 0] += sign[dx] * wy[dy] * wz[dz] * v
            g[:, 1] += wx[dx] * sign[dy] * wz[dz] * v
            g[:, 2] += wx[dx] * wy[dy] * sign[dz] * v
        return g / self.spacing
