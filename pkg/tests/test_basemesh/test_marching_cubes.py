import numpy as np
import pytest

from ndf.basemesh import grid_layout, marching_cubes
from ndf.basemesh._tables import EDGE_CORNERS, TRIANGLE_TABLE
from ndf.errors import EmptyLevelSetError, UsageError
from ndf.mesh import largest_component
from ndf.surfaces import Box, Torus


def test_sphere_is_closed_genus_zero(sphere):
    mesh = marching_cubes(sphere, 24)
    assert mesh.genus == 0
    assert mesh.n_components == 1
    assert np.allclose(np.linalg.norm(mesh.vertices, axis=1), 1.0, atol=0.02)
    assert mesh.signed_volume == pytest.approx(4.0 / 3.0 * np.pi, rel=0.05)


def test_torus_has_genus_one():
    mesh = marching_cubes(Torus(1.0, 0.3), 40)
    assert mesh.genus == 1


def test_box_faces_face_outward():
    mesh = marching_cubes(Box((0.8, 0.6, 0.5)), 24)
    assert mesh.genus == 0
    assert mesh.signed_volume > 0


def test_point_cloud_level_set(sphere_cloud):
    mesh = largest_component(marching_cubes(sphere_cloud, 20))
    assert mesh.genus == 0
    assert np.allclose(np.linalg.norm(mesh.vertices, axis=1), 1.0, atol=0.15)


def test_empty_level_set(sphere):
    with pytest.raises(EmptyLevelSetError):
        marching_cubes(sphere, 16, bbox=np.array([[2.0, 2.0, 2.0], [3.0, 3.0, 3.0]]))


def test_grid_layout_pads_the_box():
    origin, spacing, shape = grid_layout(np.array([[-1.0, -1.0, -0.5], [1.0, 1.0, 0.5]]), 20)
    assert shape[0] >= 20
    assert shape[2] < shape[0]
    assert np.all(origin < [-1.0, -1.0, -0.5])
    assert np.all(origin + spacing * (np.array(shape) - 1) > [1.0, 1.0, 0.5])
    with pytest.raises(UsageError):
        grid_layout(np.array([[0.0] * 3, [1.0] * 3]), 4)


@pytest.mark.parametrize('case', range(256))
def test_cases_use_exactly_the_crossing_edges(case):
    below = [(case >> k) & 1 for k in range(8)]
    crossing = {e for e, (a, b) in enumerate(EDGE_CORNERS) if below[a] != below[b]}
    row = TRIANGLE_TABLE[case]
    used = row[row >= 0]
    assert len(used) % 3 == 0
    assert set(used.tolist()) == crossing
