"""
A surface seen through a uniform scale + translation.
"""
from typing import Optional

import numpy as np

from ndf.surfaces.base import ProjectionResult, Surface, as_points


class NormalizedSurface(Surface):
    """Wraps `surface` so that queries are in the frame y = scale * x + translation.

    Distances scale with the transform; gradients, normals and winding
    numbers are unchanged.
    """

    def __init__(self, surface: Surface, transform):
        self.surface = surface
        self.transform = transform
        self.is_implicit = surface.is_implicit

    def _to_input(self, p) -> np.ndarray:
        return self.transform.inverse(as_points(p))

    def eval(self, p) -> np.ndarray:
        return self.transform.scale * self.surface.eval(self._to_input(p))

    def grad(self, p) -> np.ndarray:
        return self.surface.grad(self._to_input(p))

    def winding_number(self, p) -> np.ndarray:
        return self.surface.winding_number(self._to_input(p))

    def normal(self, p) -> np.ndarray:
        return self.surface.normal(self._to_input(p))

    def project(self, p, normal_hint: Optional[np.ndarray] = None) -> ProjectionResult:
        result = self.surface.project(self._to_input(p), normal_hint)
        return ProjectionResult(self.transform.apply(result.points), result.converged, result.iterations)

    @property
    def bbox(self) -> np.ndarray:
        return self.transform.apply(self.surface.bbox)
