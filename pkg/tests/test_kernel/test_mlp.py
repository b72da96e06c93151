import numpy as np
import pytest

from ndf.errors import NumericalError, UsageError
from ndf.kernel import Mlp, kaiming_init


@pytest.fixture
def net():
    return kaiming_init(Mlp((5, 7, 6, 3), dtype=np.float64), seed=0)


@pytest.fixture
def batch():
    return np.random.default_rng(1).normal(size=(4, 5))


def _numeric_grad(f, arr, eps=1e-6):
    out = np.zeros_like(arr)
    for idx in np.ndindex(arr.shape):
        old = arr[idx]
        arr[idx] = old + eps
        hi = f()
        arr[idx] = old - eps
        lo = f()
        arr[idx] = old
        out[idx] = (hi - lo) / (2 * eps)
    return out


def test_backward_matches_finite_differences(net, batch):
    up = np.random.default_rng(2).normal(size=(4, 3))
    _, cache = net.forward_cached(batch)
    grads, d_input = net.backward(cache, up)

    def loss():
        return float((net.forward(batch) * up).sum())

    for p, g in zip(net.parameters(), grads):
        assert np.allclose(g, _numeric_grad(loss, p), atol=1e-5)
    x = batch.copy()
    numeric = _numeric_grad(lambda: float((net.forward(x) * up).sum()), x)
    assert np.allclose(d_input, numeric, atol=1e-5)


def test_jvp_matches_input_jacobian(net, batch):
    tangents = np.random.default_rng(3).normal(size=(4, 5, 2))
    _, cache = net.forward_cached(batch)
    J = net.input_jacobian(batch)
    assert np.allclose(net.jvp(cache, tangents), np.einsum('noi,nim->nom', J, tangents))


def test_input_jacobian_matches_finite_differences(net, batch):
    J = net.input_jacobian(batch)
    x = batch.copy()
    numeric = _numeric_grad(lambda: float(net.forward(x)[1, 2]), x)
    assert np.allclose(J[1, 2], numeric[1], atol=1e-5)


def test_tangent_backward_matches_finite_differences(net, batch):
    rng = np.random.default_rng(4)
    tangents = rng.normal(size=(4, 5, 2))
    up = rng.normal(size=(4, 3, 2))
    _, cache = net.forward_cached(batch)
    grads, d_tangents = net.tangent_backward(cache, tangents, up)

    def loss():
        _, c = net.forward_cached(batch)
        return float((net.jvp(c, tangents) * up).sum())

    for p, g in zip(net.parameters(), grads):
        assert np.allclose(g, _numeric_grad(loss, p), atol=1e-5)
    assert np.allclose(d_tangents, np.einsum('noi,nom->nim', net.input_jacobian(batch), up))


def test_blob_layout(net):
    widths = (5, 7, 6, 3)
    assert Mlp.blob_size(widths) == 4 * (7 * 5 + 7 + 6 * 7 + 6 + 3 * 6 + 3)
    blob = net.to_blob()
    assert len(blob) == Mlp.blob_size(widths)
    restored = Mlp.from_blob(widths, blob)
    assert restored.n_params == net.n_params
    assert np.array_equal(restored.weights[0], net.weights[0].astype(np.float32))
    first = np.frombuffer(blob[:4], dtype='<f4')[0]
    assert first == np.float32(net.weights[0][0, 0])
    with pytest.raises(UsageError):
        Mlp.from_blob(widths, blob[:-4])


def test_shape_errors():
    with pytest.raises(UsageError):
        Mlp((3,))
    with pytest.raises(UsageError):
        Mlp((3, 2), weights=[np.zeros((3, 2))])
    with pytest.raises(UsageError):
        Mlp((3, 2)).forward(np.zeros((1, 4)))


def test_relu_masks_and_copy(net, batch):
    twin = net.copy()
    twin.weights[0][:] = 0.0
    assert np.allclose(twin.forward(batch), twin.biases[-1])
    assert not np.allclose(net.forward(batch), twin.forward(batch))


def test_check_finite(net):
    net.biases[0][0] = np.nan
    with pytest.raises(NumericalError):
        net.check_finite()


def test_kaiming_init_is_seeded():
    a = kaiming_init(Mlp((9, 16, 3)), seed=7)
    b = kaiming_init(Mlp((9, 16, 3)), seed=7)
    assert np.array_equal(a.weights[0], b.weights[0])
    assert a.weights[0].dtype == np.float32
    assert not np.any(a.biases[0])
