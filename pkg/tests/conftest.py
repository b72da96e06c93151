import numpy as np
import pytest

from config import TestingConfig
from ndf.basemesh import NormalizationTransform
from ndf.mesh import HalfedgeMesh
from ndf.services.dispfield import DisplacementField
from ndf.services.package import pack, write_package
from ndf.surfaces import OrientedPointCloud, ProjectionResult, Sphere, Surface

_T = (1.0 + np.sqrt(5.0)) / 2.0
_ICOSAHEDRON_VERTICES = [
    (-1, _T, 0), (1, _T, 0), (-1, -_T, 0), (1, -_T, 0),
    (0, -1, _T), (0, 1, _T), (0, -1, -_T), (0, 1, -_T),
    (_T, 0, -1), (_T, 0, 1), (-_T, 0, -1), (-_T, 0, 1),
]
_ICOSAHEDRON_FACES = [
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
]


def icosphere_arrays(subdivisions=2, radius=1.0):
    """Unit icosphere; positions are rounded to float32 like a packaged base mesh."""
    vertices = [np.array(v, dtype=np.float64) / np.linalg.norm(v) for v in _ICOSAHEDRON_VERTICES]
    faces = list(_ICOSAHEDRON_FACES)
    for _ in range(subdivisions):
        midpoints = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in midpoints:
                m = vertices[a] + vertices[b]
                vertices.append(m / np.linalg.norm(m))
                midpoints[key] = len(vertices) - 1
            return midpoints[key]

        refined = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            refined += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = refined
    V = (radius * np.array(vertices)).astype(np.float32).astype(np.float64)
    return V, np.array(faces, dtype=np.int64)


def torus_arrays(n=16, m=8, major=1.0, minor=0.3):
    theta = 2.0 * np.pi * np.arange(n) / n
    phi = 2.0 * np.pi * np.arange(m) / m
    V = np.array([((major + minor * np.cos(p)) * np.cos(t), (major + minor * np.cos(p)) * np.sin(t),
                   minor * np.sin(p)) for t in theta for p in phi])

    def vid(i, j):
        return (i % n) * m + (j % m)

    F = []
    for i in range(n):
        for j in range(m):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            F += [(a, b, c), (a, c, d)]
    return V, np.array(F, dtype=np.int64)


class NeverConverges(Surface):

    def project(self, p, normal_hint=None):
        p = np.asarray(p, dtype=np.float64).reshape(-1, 3)
        return ProjectionResult(p.copy(), np.zeros(len(p), dtype=bool), np.zeros(len(p), dtype=np.int64))


@pytest.fixture(scope='session')
def make_icosphere():
    def build(subdivisions=2, radius=1.0):
        return HalfedgeMesh(*icosphere_arrays(subdivisions, radius))
    return build


@pytest.fixture
def tetrahedron():
    V = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=np.float64)
    F = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
    return HalfedgeMesh(V, F)


@pytest.fixture
def icosphere():
    return HalfedgeMesh(*icosphere_arrays(2))


@pytest.fixture
def coarse_icosphere():
    return HalfedgeMesh(*icosphere_arrays(1))


@pytest.fixture
def torus_mesh():
    return HalfedgeMesh(*torus_arrays())


@pytest.fixture
def sphere():
    return Sphere(1.0)


@pytest.fixture
def sphere_cloud():
    rng = np.random.default_rng(11)
    p = rng.normal(size=(2000, 3))
    p /= np.linalg.norm(p, axis=1, keepdims=True)
    return OrientedPointCloud(p, p.copy())


@pytest.fixture
def identity_field(icosphere):
    return DisplacementField.identity(icosphere, layers=2, feature_dim=2, hidden=(8, 8))


@pytest.fixture
def tiny_field(icosphere):
    field = DisplacementField.create(icosphere, layers=2, feature_dim=2, hidden=(8, 8), seed=3)
    rng = np.random.default_rng(4)
    field.features = (0.01 * rng.normal(size=field.features.shape)).astype(np.float32)
    # shrink the displacement so the mapped mesh stays close to the base
    field.net.weights[-1] = (0.01 * field.net.weights[-1]).astype(np.float32)
    return field


@pytest.fixture
def testing_config():
    return TestingConfig


@pytest.fixture
def package_path(tmp_path, identity_field):
    path = tmp_path / 'identity.ndf'
    write_package(str(path), pack(identity_field, NormalizationTransform.identity()))
    return str(path)


@pytest.fixture
def unreachable_surface():
    return NeverConverges()
