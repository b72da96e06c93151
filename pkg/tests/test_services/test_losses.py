from dataclasses import replace

import numpy as np
import pytest

from ndf.errors import ProjectionError
from ndf.mesh import SurfacePoint, SurfacePoints, sample_uniform
from ndf.services.dispfield import DisplacementField, InverseField
from ndf.services.losses import (Anchor, conformal_penalty, identity_loss, loss_anchor, loss_conformal, loss_cycle,
                                 loss_normal, loss_projection, softplus_chi)
from ndf.surfaces import Sphere


def _pushed_fd(loss_fn, fpass, index, eps=1e-6):
    up = fpass.pushed.copy()
    up[index] += eps
    down = fpass.pushed.copy()
    down[index] -= eps
    return (loss_fn(replace(fpass, pushed=up)).value - loss_fn(replace(fpass, pushed=down)).value) / (2 * eps)


def test_softplus_is_smooth_and_stable():
    assert softplus_chi(0.0) == pytest.approx(np.log(2.0) / 10.0)
    assert softplus_chi(1000.0) == pytest.approx(1000.0)
    assert softplus_chi(-1000.0) == pytest.approx(0.0)
    assert np.all(np.isfinite(softplus_chi(np.array([-1e6, 1e6]))))


def test_conformal_penalty_distinguishes_orientation():
    rotation = np.array([[0.0, -1.0], [1.0, 0.0]])
    reflection = np.diag([1.0, -1.0])
    good, bad = conformal_penalty(np.stack([rotation, reflection]))
    assert good < bad
    assert np.isnan(conformal_penalty(np.zeros((2, 2)))[0])


def test_identity_losses(identity_field, icosphere, sphere):
    fpass = identity_field.run(sample_uniform(icosphere, 200, seed=0), tangents=True)
    assert identity_loss(fpass).value == pytest.approx(0.0, abs=1e-12)
    assert loss_conformal(fpass).value == pytest.approx(np.log1p(np.exp(-5.0)) / 10.0, rel=1e-5)
    r = 1.0 - np.linalg.norm(fpass.x, axis=1)
    projection = loss_projection(fpass, sphere)
    assert projection.count == 200
    assert projection.value == pytest.approx(np.mean(r ** 2), rel=1e-4)


def test_projection_gradient_points_away_from_surface(identity_field, icosphere, sphere):
    fpass = identity_field.run(sample_uniform(icosphere, 50, seed=1), tangents=True)
    term = loss_projection(fpass, sphere)
    # flat triangles sit inside the unit sphere
    assert np.all(np.einsum('ij,ij->i', term.d_mapped, fpass.x) <= 1e-12)


def test_projection_without_converged_points_raises(identity_field, icosphere, unreachable_surface):
    fpass = identity_field.run(sample_uniform(icosphere, 10, seed=0))
    with pytest.raises(ProjectionError):
        loss_projection(fpass, unreachable_surface)


def test_cycle_loss_is_zero_for_identities(identity_field, icosphere):
    fpass = identity_field.run(sample_uniform(icosphere, 30, seed=0))
    term = loss_cycle(fpass, InverseField.identity(layers=2, hidden=(8,)))
    assert term.value == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(term.d_mapped, 0.0)


def test_anchor_loss(identity_field, icosphere):
    assert loss_anchor(identity_field, []).count == 0
    point = SurfacePoint(5, [0.2, 0.3, 0.5])
    target = icosphere.embed(SurfacePoints.from_list([point])) + [0.0, 0.0, 0.1]
    term = loss_anchor(identity_field, [Anchor(point, target[0])])
    assert term.value == pytest.approx(0.01, rel=1e-5)
    assert np.allclose(term.d_mapped, [[0.0, 0.0, -0.2]], atol=1e-6)


def test_conformal_gradient_matches_finite_differences(icosphere):
    rng = np.random.default_rng(0)
    fpass = _fake_pass(icosphere, rng)
    term = loss_conformal(fpass)
    for index in [(0, 0, 0), (3, 2, 1), (7, 1, 0)]:
        assert term.d_pushed[index] == pytest.approx(_pushed_fd(loss_conformal, fpass, index), rel=1e-4, abs=1e-9)


def test_normal_gradient_matches_finite_differences(icosphere):
    sphere = Sphere(1.0)
    rng = np.random.default_rng(1)
    fpass = _fake_pass(icosphere, rng)
    projection = sphere.project(fpass.mapped)

    def loss(p):
        return loss_normal(p, sphere, projection)

    term = loss(fpass)
    assert term.count == len(fpass)
    for index in [(0, 0, 0), (4, 2, 1), (9, 1, 1)]:
        assert term.d_pushed[index] == pytest.approx(_pushed_fd(loss, fpass, index), rel=1e-4, abs=1e-9)


def _fake_pass(icosphere, rng):
    field = DisplacementField.identity(icosphere, layers=2, feature_dim=2, hidden=(8,), dtype=np.float64)
    fpass = field.run(sample_uniform(icosphere, 10, seed=0), tangents=True)
    return replace(fpass, pushed=fpass.pushed + 0.3 * rng.normal(size=fpass.pushed.shape))
