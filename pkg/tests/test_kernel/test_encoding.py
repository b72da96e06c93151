import numpy as np
import pytest

from ndf.errors import UsageError
from ndf.kernel import encoding_jvp, encoding_vjp, encoding_width, positional_encoding


def test_layout():
    x = np.array([[0.25, 0.5, -0.5]])
    enc = positional_encoding(x, 2)
    assert enc.shape == (1, encoding_width(2)) == (1, 15)
    assert np.allclose(enc[0, :3], x[0])
    assert np.allclose(enc[0, 3:6], np.sin(np.pi * x[0]))
    assert np.allclose(enc[0, 6:9], np.cos(np.pi * x[0]))
    assert np.allclose(enc[0, 9:12], np.sin(2 * np.pi * x[0]))


def test_zero_layers_is_identity():
    x = np.random.default_rng(0).normal(size=(5, 3))
    assert np.array_equal(positional_encoding(x, 0), x)
    with pytest.raises(UsageError):
        positional_encoding(x, -1)


def test_jvp_matches_finite_differences():
    rng = np.random.default_rng(1)
    x = rng.uniform(-1, 1, size=(6, 3))
    t = rng.normal(size=(6, 3, 2))
    eps = 1e-6
    jvp = encoding_jvp(x, t, 3)
    for m in range(2):
        fd = (positional_encoding(x + eps * t[:, :, m], 3) - positional_encoding(x - eps * t[:, :, m], 3)) / (2 * eps)
        assert np.allclose(jvp[:, :, m], fd, atol=1e-6)


def test_vjp_is_adjoint_of_jvp():
    rng = np.random.default_rng(2)
    x = rng.uniform(-1, 1, size=(4, 3))
    t = rng.normal(size=(4, 3, 1))
    up = rng.normal(size=(4, encoding_width(4)))
    lhs = (encoding_jvp(x, t, 4)[:, :, 0] * up).sum()
    rhs = (encoding_vjp(x, up, 4) * t[:, :, 0]).sum()
    assert lhs == pytest.approx(rhs)
