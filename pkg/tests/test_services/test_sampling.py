import numpy as np
import pytest
from scipy.stats import chisquare

from ndf.errors import UsageError
from ndf.services.dispfield import DisplacementField
from ndf.services.sampling import blue_noise, min_pairwise_distance, white_noise


def test_white_noise_lies_on_the_mapped_surface(tiny_field):
    samples = white_noise(tiny_field, 200, seed=1)
    assert len(samples) == 200
    assert np.allclose(samples.positions, tiny_field.eval(samples.points))


def test_white_noise_is_deterministic(tiny_field):
    a = white_noise(tiny_field, 50, seed=4)
    b = white_noise(tiny_field, 50, seed=4)
    assert np.array_equal(a.positions, b.positions)


def test_sampling_arguments(identity_field):
    with pytest.raises(UsageError):
        white_noise(identity_field, 0)
    with pytest.raises(UsageError):
        blue_noise(identity_field, 0.0)


def test_blue_noise_keeps_its_radius(identity_field):
    samples = blue_noise(identity_field, 0.2, seed=0)
    assert len(samples) > 100
    assert min_pairwise_distance(samples.positions) >= 0.2
    assert np.allclose(samples.positions, identity_field.eval(samples.points))


def test_blue_noise_is_deterministic(identity_field):
    a = blue_noise(identity_field, 0.3, seed=5)
    b = blue_noise(identity_field, 0.3, seed=5)
    assert np.array_equal(a.positions, b.positions)


def test_min_pairwise_distance():
    assert min_pairwise_distance(np.zeros((1, 3))) == float('inf')
    assert min_pairwise_distance(np.array([[0, 0, 0], [0, 0, 2], [0, 3, 0]])) == pytest.approx(2.0)


@pytest.mark.slow
def test_white_noise_is_area_uniform(identity_field, icosphere):
    samples = white_noise(identity_field, 20000, seed=2)
    counts = np.bincount(samples.points.faces, minlength=icosphere.n_faces)
    expected = 20000 * icosphere.face_areas / icosphere.total_area
    assert chisquare(counts, expected).pvalue > 1e-3


SEEDS = range(20)


@pytest.fixture(scope='module')
def blue_noise_runs(make_icosphere):
    field = DisplacementField.identity(make_icosphere(4), layers=2, feature_dim=2, hidden=(8, 8))
    return {r: [blue_noise(field, r, seed=seed).positions for seed in SEEDS] for r in (0.1, 0.2)}


@pytest.mark.slow
@pytest.mark.parametrize('r', [0.1, 0.2])
@pytest.mark.parametrize('seed', SEEDS)
def test_blue_noise_radius_holds_for_every_seed(blue_noise_runs, r, seed):
    assert min_pairwise_distance(blue_noise_runs[r][seed]) >= r


@pytest.mark.slow
@pytest.mark.parametrize('r', [0.1, 0.2])
def test_blue_noise_count_is_stable_across_seeds(blue_noise_runs, r):
    counts = np.array([len(p) for p in blue_noise_runs[r]])
    assert np.all(np.abs(counts / counts.mean() - 1.0) <= 0.15)


@pytest.mark.slow
def test_doubling_the_radius_quarters_the_count(blue_noise_runs):
    fine = np.mean([len(p) for p in blue_noise_runs[0.1]])
    coarse = np.mean([len(p) for p in blue_noise_runs[0.2]])
    assert 0.75 * 4.0 <= fine / coarse <= 1.25 * 4.0
