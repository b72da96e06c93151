import numpy as np
import pytest

from ndf.basemesh import NormalizationTransform
from ndf.errors import RepresentationError, SurfaceError
from ndf.surfaces import Box, NormalizedSurface, SmoothUnion, Sphere, Torus, make_analytic


def test_sphere_values_and_normals(sphere):
    p = np.array([[2.0, 0.0, 0.0], [0.0, 0.5, 0.0]])
    assert np.allclose(sphere.eval(p), [1.0, -0.5])
    assert np.allclose(sphere.normal(p), [[1, 0, 0], [0, 1, 0]])


def test_sphere_projection_lands_on_surface(sphere):
    rng = np.random.default_rng(0)
    p = rng.uniform(-1.5, 1.5, size=(100, 3))
    result = sphere.project(p)
    assert result.convergence_rate == 1.0
    assert np.allclose(np.linalg.norm(result.points, axis=1), 1.0, atol=1e-6)


def test_torus_and_box():
    torus = Torus(1.0, 0.3)
    assert torus.eval([[1.3, 0.0, 0.0]])[0] == pytest.approx(0.0)
    assert torus.eval([[1.0, 0.0, 0.0]])[0] == pytest.approx(-0.3)
    assert np.allclose(torus.grad([[0.0, 1.5, 0.0]]), [[0, 1, 0]])
    box = Box((0.8, 0.6, 0.5))
    assert box.eval([[0.0, 0.0, 0.0]])[0] == pytest.approx(-0.5)
    assert box.eval([[1.8, 0.0, 0.0]])[0] == pytest.approx(1.0)
    assert np.allclose(box.grad([[0.0, 0.0, 0.4]]), [[0, 0, 1]])


def test_projection_onto_torus():
    torus = Torus(1.0, 0.3)
    result = torus.project([[1.6, 0.1, 0.2], [0.5, 0.5, 0.0]])
    assert np.all(result.converged)
    assert np.allclose(torus.eval(result.points), 0.0, atol=1e-6)


def test_smooth_union_covers_both():
    union = SmoothUnion(Sphere(0.5, (-0.4, 0, 0)), Sphere(0.5, (0.4, 0, 0)), k=0.1)
    assert union.eval([[-0.4, 0, 0]])[0] < 0
    assert union.eval([[0.4, 0, 0]])[0] < 0
    assert union.eval([[2.0, 0, 0]])[0] > 0


def test_invalid_parameters():
    with pytest.raises(SurfaceError):
        Sphere(-1.0)
    with pytest.raises(SurfaceError):
        Torus(0.3, 1.0)
    with pytest.raises(SurfaceError):
        make_analytic('teapot')
    assert isinstance(make_analytic('torus'), Torus)


def test_implicit_surfaces_have_no_winding_number(sphere):
    with pytest.raises(RepresentationError):
        sphere.winding_number([[0.0, 0.0, 0.0]])


def test_normalized_surface_scales_distances(sphere):
    transform = NormalizationTransform(2.0, [1.0, 0.0, 0.0])
    surface = NormalizedSurface(sphere, transform)
    p = np.array([[2.0, 0.0, 0.0]])
    assert surface.eval(transform.apply(p))[0] == pytest.approx(2.0)
    projected = surface.project(transform.apply(p)).points
    assert np.allclose(projected, [[3.0, 0.0, 0.0]])
    assert np.allclose(surface.bbox, [[-1.0, -2.0, -2.0], [3.0, 2.0, 2.0]])
