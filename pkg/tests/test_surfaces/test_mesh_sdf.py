import numpy as np
import pytest

from ndf.surfaces import MeshSdf


@pytest.fixture
def mesh_sdf(make_icosphere):
    return MeshSdf(make_icosphere(3))


def test_winding_number_of_closed_mesh(mesh_sdf):
    w = mesh_sdf.winding_number([[0.0, 0.0, 0.0], [0.3, 0.2, -0.1], [3.0, 0.0, 0.0]])
    assert np.allclose(w, [1.0, 1.0, 0.0], atol=1e-9)


def test_signed_distance(mesh_sdf):
    d = mesh_sdf.eval([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
    assert d[0] == pytest.approx(-1.0, abs=0.02)
    assert d[1] == pytest.approx(1.0, abs=0.02)


def test_gradient_points_outward(mesh_sdf):
    g = mesh_sdf.grad([[0.0, 1.5, 0.0]])
    assert g[0] @ [0.0, 1.0, 0.0] > 0.99


def test_projection(mesh_sdf):
    result = mesh_sdf.project([[1.4, 0.2, 0.1]])
    assert result.converged[0]
    assert abs(mesh_sdf.eval(result.points)[0]) < 1e-5
