import numpy as np
import pandas as pd
import pytest

from ndf.errors import UsageError
from ndf.mesh import sample_uniform
from ndf.services.remesh import ExtractedMesh
from ndf.services.scalarfield import (TARGET_COLUMNS, ScalarNet, ScalarTargets, baseline_comparison,
                                      bce_with_logits, eigenfunction_targets, eval_scalar, read_targets,
                                      relative_l2_error, train_scalar, write_targets)

QUICK = {'epochs': 150, 'lr': 1e-2, 'feature_dim': 2, 'hidden': (8, 8), 'layers': 2, 'log_every': 0}


@pytest.fixture
def height_targets(icosphere):
    points = sample_uniform(icosphere, 300, seed=0)
    return ScalarTargets(points, np.zeros(300), icosphere.embed(points)[:, 2])


def test_targets_validation(icosphere):
    points = sample_uniform(icosphere, 3, seed=0)
    with pytest.raises(UsageError):
        ScalarTargets(points, [0, 0], [1.0, 2.0, 3.0])
    with pytest.raises(UsageError):
        ScalarTargets(points, [0, -1, 0], [1.0, 2.0, 3.0])
    assert ScalarTargets(points, [0, 2, 1], [1.0, 2.0, 3.0]).n_channels == 3


def test_targets_file(height_targets, tmp_path):
    path = tmp_path / 'targets.csv'
    write_targets(height_targets, str(path))
    loaded = read_targets(str(path))
    assert np.allclose(loaded.values, height_targets.values)
    assert np.array_equal(loaded.points.faces, height_targets.points.faces)
    pd.DataFrame({'face': [0], 'value': [1.0]}).to_csv(path, index=False)
    with pytest.raises(UsageError):
        read_targets(str(path))
    with pytest.raises(UsageError):
        read_targets(str(tmp_path / 'missing.csv'))
    assert list(height_targets.to_frame().columns) == TARGET_COLUMNS


def test_channel_coordinate(icosphere):
    snet = ScalarNet.create(icosphere, channels=3, feature_dim=2, hidden=(4,), layers=2, seed=0)
    assert np.allclose(snet.channel_coordinate([0, 1, 2]), [0.0, 0.5, 1.0])
    with pytest.raises(UsageError):
        snet.channel_coordinate([3])
    single = ScalarNet.create(icosphere, channels=1, feature_dim=2, hidden=(4,), layers=2, seed=0)
    assert np.allclose(single.channel_coordinate([0, 0]), 0.0)


def test_scalar_net_rejects_bad_shapes(icosphere):
    snet = ScalarNet.create(icosphere, feature_dim=2, hidden=(4,), layers=2, seed=0)
    with pytest.raises(UsageError):
        ScalarNet(icosphere, snet.net, np.zeros((icosphere.n_vertices, 3)), layers=2)
    with pytest.raises(UsageError):
        ScalarNet(icosphere, snet.net, snet.features, layers=2, mode='ordinal')
    with pytest.raises(UsageError):
        ScalarNet(icosphere, snet.net, snet.features, layers=2, channels=0)


def test_bce_is_stable():
    assert bce_with_logits(0.0, 1.0) == pytest.approx(np.log(2.0))
    assert np.isfinite(bce_with_logits(np.array([-800.0, 800.0]), np.array([1.0, 0.0]))).all()


def test_continuous_training_reduces_loss(identity_field, height_targets):
    snet = train_scalar(identity_field, height_targets, **QUICK)
    assert len(snet.history) == QUICK['epochs']
    assert snet.history['loss'].iloc[-1] < 0.5 * snet.history['loss'].iloc[0]
    prediction = snet.predict(height_targets.points)
    assert prediction.shape == (len(height_targets),)
    assert eval_scalar(snet, height_targets.points[0]) == pytest.approx(snet.forward(height_targets.points[0])[0])
    with pytest.raises(UsageError):
        eval_scalar(snet, height_targets.points[0], channel=1)


def test_binary_training(identity_field, height_targets):
    labels = ScalarTargets(height_targets.points, height_targets.channels, height_targets.values > 0)
    snet = train_scalar(identity_field, labels, mode='binary', **QUICK)
    p = snet.predict(labels.points)
    assert np.all((p >= 0) & (p <= 1))
    assert np.mean((p > 0.5) == (labels.values > 0.5)) > 0.8


def test_training_argument_errors(identity_field, height_targets):
    with pytest.raises(UsageError):
        train_scalar(identity_field, height_targets, mode='binary', **QUICK)
    with pytest.raises(UsageError):
        train_scalar(identity_field, height_targets, mode='softmax', **QUICK)
    with pytest.raises(UsageError):
        train_scalar(identity_field, height_targets.take(np.zeros(0, dtype=np.int64)), **QUICK)


def test_training_is_deterministic(identity_field, height_targets):
    a = train_scalar(identity_field, height_targets, **{**QUICK, 'epochs': 10})
    b = train_scalar(identity_field, height_targets, **{**QUICK, 'epochs': 10})
    assert np.array_equal(a.history['loss'], b.history['loss'])


def test_relative_l2_error():
    assert relative_l2_error([1.0, 1.0], [1.0, 2.0]) == pytest.approx(1.0 / np.sqrt(5.0))
    with pytest.raises(UsageError):
        relative_l2_error([1.0], [0.0])


def test_eigenfunction_targets(identity_field, icosphere):
    targets = eigenfunction_targets(identity_field, ExtractedMesh.from_mesh(icosphere), k=3,
                                    samples_per_channel=50, seed=0)
    assert len(targets) == 150
    assert targets.n_channels == 3
    assert np.array_equal(targets.points.faces[:50], targets.points.faces[50:100])
    assert np.std(targets.values) > 0


def test_baseline_comparison_reports_both_nets(identity_field, height_targets):
    train, test = height_targets.take(np.arange(200)), height_targets.take(np.arange(200, 300))
    result = baseline_comparison(identity_field, train, test, feature_dim=2,
                                 epochs=20, lr=1e-2, hidden=(8,), layers=2, log_every=0)
    assert set(result) == {'intrinsic', 'baseline', 'ratio'}
    assert result['intrinsic'] > 0
