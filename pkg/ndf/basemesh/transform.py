"""
Uniform scale + translation that places a shape inside [-1.5, 1.5]^3.
"""
from dataclasses import dataclass, field

import numpy as np

from ndf.errors import MeshError

NORMALIZED_BOUND = 1.5


@dataclass(frozen=True)
class NormalizationTransform:
    """normalized = scale * input + translation"""
    scale: float = 1.0
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if not self.scale > 0:
            raise MeshError(f"Normalization scale must be positive, got {self.scale}")
        object.__setattr__(self, 'scale', float(self.scale))
        object.__setattr__(self, 'translation', np.asarray(self.translation, dtype=np.float64).reshape(3))

    @classmethod
    def fit(cls, vertices: np.ndarray, bound: float = NORMALIZED_BOUND) -> 'NormalizationTransform':
        """Center the bounding box and scale its largest half-extent to `bound`."""
        v = np.asarray(vertices, dtype=np.float64)
        lo, hi = v.min(axis=0), v.max(axis=0)
        half = float((hi - lo).max()) / 2.0
        if half <= 0:
            raise MeshError("Cannot normalize a shape with empty extent")
        scale = bound / half
        return cls(scale, -scale * (lo + hi) / 2.0)

    @classmethod
    def identity(cls) -> 'NormalizationTransform':
        return cls()

    def apply(self, points: np.ndarray) -> np.ndarray:
        return self.scale * np.asarray(points, dtype=np.float64) + self.translation

    def inverse(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.translation) / self.scale

    def apply_lengths(self, lengths: np.ndarray) -> np.ndarray:
        return self.scale * np.asarray(lengths, dtype=np.float64)

    def inverse_lengths(self, lengths: np.ndarray) -> np.ndarray:
        return np.asarray(lengths, dtype=np.float64) / self.scale

    def to_array(self) -> np.ndarray:
        """[scale, tx, ty, tz] as float64, the packaged form."""
        return np.concatenate([[self.scale], self.translation])

    @classmethod
    def from_array(cls, values) -> 'NormalizationTransform':
        values = np.asarray(values, dtype=np.float64).reshape(4)
        return cls(values[0], values[1:])

    def __eq__(self, other) -> bool:
        if not isinstance(other, NormalizationTransform):
            return NotImplemented
        return self.scale == other.scale and np.array_equal(self.translation, other.translation)

    def __hash__(self) -> int:
        return hash((self.scale, tuple(self.translation)))
