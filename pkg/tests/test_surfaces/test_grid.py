import numpy as np
import pytest

from ndf.errors import DomainError, SurfaceError
from ndf.surfaces import GridSdf


@pytest.fixture
def sphere_grid(sphere):
    return GridSdf.from_function(sphere.eval, [[-1.5] * 3, [1.5] * 3], 31)


def test_trilinear_matches_function_at_nodes(sphere_grid, sphere):
    p = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, -0.5, 1.0]])
    assert np.allclose(sphere_grid.eval(p), sphere.eval(p), atol=1e-6)


def test_interpolation_is_close_between_nodes(sphere_grid, sphere):
    rng = np.random.default_rng(1)
    p = rng.uniform(-1.2, 1.2, size=(200, 3))
    p = p[np.linalg.norm(p, axis=1) > 0.3]
    assert np.max(np.abs(sphere_grid.eval(p) - sphere.eval(p))) < 0.02


def test_gradient_of_interpolant(sphere_grid):
    g = sphere_grid.grad([[0.95, 0.02, 0.03]])
    assert g[0] @ [1.0, 0.0, 0.0] > 0.95


def test_outside_the_domain(sphere_grid):
    with pytest.raises(DomainError):
        sphere_grid.eval([[2.0, 0.0, 0.0]])
    assert not sphere_grid.contains([[2.0, 0.0, 0.0]])[0]


def test_projection_from_grid(sphere_grid):
    result = sphere_grid.project([[1.3, 0.1, 0.0], [0.0, -0.4, 0.2]])
    assert np.all(result.converged)
    assert np.allclose(np.linalg.norm(result.points, axis=1), 1.0, atol=0.02)


def test_save_and_load(tmp_path, sphere_grid):
    path = str(tmp_path / 'sphere.grid')
    sphere_grid.save(path)
    loaded = GridSdf.load(path)
    assert np.array_equal(loaded.values, sphere_grid.values)
    assert np.allclose(loaded.bbox, sphere_grid.bbox)


def test_truncated_file(tmp_path, sphere_grid):
    path = tmp_path / 'sphere.grid'
    sphere_grid.save(str(path))
    path.write_bytes(path.read_bytes()[:100])
    with pytest.raises(SurfaceError):
        GridSdf.load(str(path))


def test_bad_shapes():
    with pytest.raises(SurfaceError):
        GridSdf(np.zeros((1, 4, 4)), [[0, 0, 0], [1, 1, 1]])
    with pytest.raises(SurfaceError):
        GridSdf(np.zeros((4, 4, 4)), [[0, 0, 0], [0, 1, 1]])
