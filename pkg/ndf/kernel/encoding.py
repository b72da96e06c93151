"""
Periodic positional encoding [x, sin(2^k pi x), cos(2^k pi x) for k < L] and
its forward/reverse derivatives.
"""
import numpy as np

from ndf.errors import UsageError


def encoding_width(layers: int) -> int:
    return 3 + 6 * layers


def _frequencies(layers: int) -> np.ndarray:
    return np.pi * 2.0 ** np.arange(layers)


def positional_encoding(x, layers: int) -> np.ndarray:
    """(n, 3) -> (n, 3 + 6L); block k holds sin then cos of the three coordinates."""
    x = np.asarray(x, dtype=np.float64).reshape(-1, 3)
    if layers < 0:
        raise UsageError("Encoding layer count must be non-negative")
    w = _frequencies(layers)
    arg = x[:, None, :] * w[None, :, None]                 # (n, L, 3)
    blocks = np.concatenate([np.sin(arg), np.cos(arg)], axis=2)  # (n, L, 6)
    return np.concatenate([x, blocks.reshape(len(x), -1)], axis=1)


def encoding_jvp(x, tangents, layers: int) -> np.ndarray:
    """Directional derivatives of the encoding: (n, 3, m) tangents -> (n, 3 + 6L, m)."""
    x = np.asarray(x, dtype=np.float64).reshape(-1, 3)
    t = np.asarray(tangents, dtype=np.float64)
    w = _frequencies(layers)
    arg = x[:, None, :] * w[None, :, None]
    d_sin = (w[None, :, None] * np.cos(arg))[..., None] * t[:, None, :, :]   # (n, L, 3, m)
    d_cos = (-w[None, :, None] * np.sin(arg))[..., None] * t[:, None, :, :]
    blocks = np.concatenate([d_sin, d_cos], axis=2).reshape(len(x), 6 * layers, t.shape[2])
    return np.concatenate([t, blocks], axis=1)


def encoding_vjp(x, upstream, layers: int) -> np.ndarray:
    """Pull an (n, 3 + 6L) gradient back to (n, 3)."""
    x = np.asarray(x, dtype=np.float64).reshape(-1, 3)
    up = np.asarray(upstream, dtype=np.float64)
    n = len(x)
    w = _frequencies(layers)
    arg = x[:, None, :] * w[None, :, None]
    blocks = up[:, 3:].reshape(n, layers, 6)
    grad = up[:, :3].copy()
    grad += (blocks[:, :, :3] * w[None, :, None] * np.cos(arg)).sum(axis=1)
    grad -= (blocks[:, :, 3:] * w[None, :, None] * np.sin(arg)).sum(axis=1)
    return grad
