import numpy as np
import pandas as pd
import pytest

from ndf.errors import ProjectionError, UsageError
from ndf.mesh import SurfacePoint, sample_uniform
from ndf.services.dispfield import DisplacementField, InverseField
from ndf.services.losses import Anchor
from ndf.services.training import (HISTORY_COLUMNS, TrainingConfig, evaluate_field, feature_dimension_sweep,
                                   final_losses, fit_identity, save_history, train, training_step)
from ndf.surfaces import Sphere


@pytest.fixture
def quick_config():
    return TrainingConfig(samples=256, epochs=30, init_epochs=50, init_samples=256, learning_rate=5e-3,
                          encoding_layers=2, feature_dim=2, hidden=(8, 8), log_every=0, seed=7)


def test_config_validation():
    with pytest.raises(UsageError):
        TrainingConfig(lambda_p=-1.0)
    with pytest.raises(UsageError):
        TrainingConfig(samples=0)
    with pytest.raises(UsageError):
        TrainingConfig(learning_rate=0.0)
    with pytest.raises(UsageError):
        TrainingConfig(resample_every=0)


def test_config_weights(sphere, sphere_cloud):
    assert TrainingConfig.for_surface(sphere).lambda_c == 1e2
    assert TrainingConfig.for_surface(sphere_cloud).lambda_c == 1e4
    config = TrainingConfig()
    assert config.anchor_weight == 0.0
    assert config.normal_weight == 0.0
    assert config.conformal_weight == 0.0
    anchored = config.replace(anchors=[Anchor(SurfacePoint(0, [1, 0, 0]), [0, 0, 1])])
    assert anchored.anchor_weight == pytest.approx(1e3)
    assert anchored.replace(lambda_a=5.0).anchor_weight == 5.0
    assert config.replace(normal_loss=True).normal_weight == 10.0


def test_identity_fit_reduces_displacement(icosphere, quick_config):
    field = DisplacementField.create(icosphere, layers=2, feature_dim=2, hidden=(8, 8), seed=3)
    inverse = InverseField.create(layers=2, hidden=(8, 8), seed=1)
    points = sample_uniform(field.base, 200, seed=0)
    before = np.mean(np.sum((field.eval(points) - field.base.embed(points)) ** 2, axis=1))
    loss_f, loss_i = fit_identity(field, inverse, quick_config, np.random.default_rng(0))
    assert loss_f < before
    assert np.isfinite(loss_i)


def test_training_step_reports_every_loss(identity_field, icosphere, sphere):
    config = TrainingConfig(conformal_loss=True, normal_loss=True, encoding_layers=2, hidden=(8, 8))
    inverse = InverseField.identity(layers=2, hidden=(8, 8))
    losses, grads, inverse_grads = training_step(identity_field, inverse, sphere,
                                                 sample_uniform(icosphere, 100, seed=0), config)
    assert set(losses) == set(HISTORY_COLUMNS) - {'epoch'}
    assert losses['convergence'] == 1.0
    assert losses['loss_f'] == pytest.approx(np.log1p(np.exp(-5.0)) / 10.0, rel=1e-5)
    assert losses['loss_total'] >= config.lambda_p * losses['loss_p']
    assert len(grads.as_list()) == len(identity_field.parameters())
    assert len(inverse_grads) == len(inverse.parameters())


def test_training_step_fails_when_projection_fails(identity_field, icosphere, unreachable_surface):
    inverse = InverseField.identity(layers=2, hidden=(8, 8))
    with pytest.raises(ProjectionError):
        training_step(identity_field, inverse, unreachable_surface, sample_uniform(icosphere, 20, seed=0),
                      TrainingConfig())


def test_train_fits_a_larger_sphere(coarse_icosphere, quick_config):
    field, inverse, history = train(Sphere(1.2), coarse_icosphere, quick_config)
    assert list(history.columns) == HISTORY_COLUMNS
    assert len(history) == quick_config.epochs
    assert history['loss_p'].iloc[-1] < history['loss_p'].iloc[0]
    assert history['convergence'].min() > 0.5
    result = evaluate_field(field, inverse, Sphere(1.2), n=500, seed=0)
    assert set(result) == {'loss_p', 'convergence', 'loss_c'}


def test_train_is_deterministic_per_seed(coarse_icosphere, quick_config):
    config = quick_config.replace(epochs=5, init_epochs=5)
    _, _, a = train(Sphere(1.0), coarse_icosphere, config)
    _, _, b = train(Sphere(1.0), coarse_icosphere, config)
    pd.testing.assert_frame_equal(a, b)


def test_final_losses_and_history_file(tmp_path):
    assert np.isnan(final_losses(pd.DataFrame(columns=HISTORY_COLUMNS))['loss_p'])
    history = pd.DataFrame([{c: float(i) for c in HISTORY_COLUMNS} for i in range(3)], columns=HISTORY_COLUMNS)
    assert final_losses(history)['loss_c'] == 2.0
    path = tmp_path / 'history.csv'
    save_history(history, str(path))
    assert list(pd.read_csv(path).columns) == HISTORY_COLUMNS


def test_feature_dimension_sweep(coarse_icosphere, quick_config):
    config = quick_config.replace(epochs=2, init_epochs=2)
    frame = feature_dimension_sweep(Sphere(1.0), coarse_icosphere, config, dims=(0, 2))
    assert list(frame['feature_dim']) == [0, 2]
    growth = frame['n_params'].iloc[1] - frame['n_params'].iloc[0]
    assert growth == 2 * coarse_icosphere.n_vertices + 2 * config.hidden[0]
