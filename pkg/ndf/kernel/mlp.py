"""
Small fully connected ReLU network on numpy.

Parameters are stored in `dtype` (float32 by default, the packaged form);
every pass computes in float64. Besides the usual forward/backward pair the
network propagates input tangents forward (`jvp`) and back-propagates
losses defined on those tangents (`tangent_backward`). Inside a linear
region the tangent map is linear in the parameters and does not depend on
the biases, which is what the latter relies on.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ndf.errors import NumericalError, UsageError

logger = logging.getLogger(__name__)

BLOB_DTYPE = np.dtype('<f4')


@dataclass
class MlpCache:
    """Activations of one forward pass: layer inputs and ReLU masks."""
    inputs: List[np.ndarray]
    masks: List[np.ndarray]


class Mlp:

    def __init__(self, widths: Sequence[int], weights: Optional[Sequence[np.ndarray]] = None,
                 biases: Optional[Sequence[np.ndarray]] = None, dtype=np.float32):
        self.widths = tuple(int(w) for w in widths)
        if len(self.widths) < 2 or min(self.widths) < 1:
            raise UsageError(f"Invalid layer widths {self.widths}")
        self.dtype = np.dtype(dtype)
        shapes = list(zip(self.widths[1:], self.widths[:-1]))
        if weights is None:
            weights = [np.zeros(s) for s in shapes]
        if biases is None:
            biases = [np.zeros(s[0]) for s in shapes]
        if len(weights) != len(shapes) or len(biases) != len(shapes):
            raise UsageError("Layer count does not match widths")
        self.weights = [np.array(w, dtype=self.dtype) for w in weights]
        self.biases = [np.array(b, dtype=self.dtype).reshape(-1) for b in biases]
        for W, b, (o, i) in zip(self.weights, self.biases, shapes):
            if W.shape != (o, i) or b.shape != (o,):
                raise UsageError(f"Layer shape {W.shape}/{b.shape} does not match widths {self.widths}")

    # -- parameters -------------------------------------------------------

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def n_inputs(self) -> int:
        return self.widths[0]

    @property
    def n_outputs(self) -> int:
        return self.widths[-1]

    def parameters(self) -> List[np.ndarray]:
        """[W0, b0, W1, b1, ...] (the blob order)."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def set_parameters(self, params: Sequence[np.ndarray]) -> None:
        for k in range(self.n_layers):
            self.weights[k] = np.asarray(params[2 * k], dtype=self.dtype).reshape(self.weights[k].shape)
            self.biases[k] = np.asarray(params[2 * k + 1], dtype=self.dtype).reshape(self.biases[k].shape)

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.parameters())

    def copy(self) -> 'Mlp':
        return Mlp(self.widths, [w.copy() for w in self.weights], [b.copy() for b in self.biases], self.dtype)

    def check_finite(self) -> None:
        if not all(np.all(np.isfinite(p)) for p in self.parameters()):
            raise NumericalError("Network has non-finite parameters")

    # -- passes -----------------------------------------------------------

    def _check_input(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None]
        if X.shape[1] != self.n_inputs:
            raise UsageError(f"Input width {X.shape[1]} does not match network input {self.n_inputs}")
        return X

    def forward(self, X) -> np.ndarray:
        return self.forward_cached(X)[0]

    def forward_cached(self, X) -> Tuple[np.ndarray, MlpCache]:
        a = self._check_input(X)
        inputs, masks = [], []
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(a)
            z = a @ W.astype(np.float64).T + b.astype(np.float64)
            if k < self.n_layers - 1:
                mask = z > 0
                masks.append(mask)
                a = np.where(mask, z, 0.0)
            else:
                a = z
        return a, MlpCache(inputs, masks)

    def backward(self, cache: MlpCache, upstream) -> Tuple[List[np.ndarray], np.ndarray]:
        """(parameter gradients in `parameters()` order, input gradient); ReLU'(0) = 0."""
        g = np.asarray(upstream, dtype=np.float64)
        grads: List[np.ndarray] = [None] * (2 * self.n_layers)
        for k in reversed(range(self.n_layers)):
            W = self.weights[k].astype(np.float64)
            grads[2 * k] = g.T @ cache.inputs[k]
            grads[2 * k + 1] = g.sum(axis=0)
            g = g @ W
            if k > 0:
                g = g * cache.masks[k - 1]
        return grads, g

    def jvp(self, cache: MlpCache, tangents) -> np.ndarray:
        """Push (n, in, m) input tangents to (n, out, m) output tangents."""
        u = np.asarray(tangents, dtype=np.float64)
        for k, W in enumerate(self.weights):
            u = np.einsum('oi,nim->nom', W.astype(np.float64), u)
            if k < self.n_layers - 1:
                u = u * cache.masks[k][:, :, None]
        return u

    def tangent_backward(self, cache: MlpCache, tangents, upstream) -> Tuple[List[np.ndarray], np.ndarray]:
        """Gradients of a loss on `jvp(cache, tangents)` given its (n, out, m) gradient.

        Returns (parameter gradients, gradient with respect to the input tangents).
        """
        u = np.asarray(tangents, dtype=np.float64)
        layer_tangents = []
        for k, W in enumerate(self.weights):
            layer_tangents.append(u)
            u = np.einsum('oi,nim->nom', W.astype(np.float64), u)
            if k < self.n_layers - 1:
                u = u * cache.masks[k][:, :, None]

        g = np.asarray(upstream, dtype=np.float64)
        grads: List[np.ndarray] = [None] * (2 * self.n_layers)
        for k in reversed(range(self.n_layers)):
            W = self.weights[k].astype(np.float64)
            grads[2 * k] = np.einsum('nom,nim->oi', g, layer_tangents[k])
            grads[2 * k + 1] = np.zeros(W.shape[0])
            g = np.einsum('nom,oi->nim', g, W)
            if k > 0:
                g = g * cache.masks[k - 1][:, :, None]
        return grads, g

    def input_jacobian(self, X) -> np.ndarray:
        """(n, out, in) Jacobian of the output with respect to the input."""
        X = self._check_input(X)
        _, cache = self.forward_cached(X)
        eye = np.broadcast_to(np.eye(self.n_inputs), (len(X), self.n_inputs, self.n_inputs))
        return self.jvp(cache, eye)

    # -- serialization ----------------------------------------------------

    @staticmethod
    def blob_size(widths: Sequence[int]) -> int:
        """Bytes of the parameter blob for the given widths."""
        widths = list(widths)
        return BLOB_DTYPE.itemsize * sum(o * i + o for i, o in zip(widths[:-1], widths[1:]))

    def to_blob(self) -> bytes:
        """Layer-major; per layer W row-major (out, in), then b; little-endian float32."""
        return b''.join(p.astype(BLOB_DTYPE).tobytes() for p in self.parameters())

    @classmethod
    def from_blob(cls, widths: Sequence[int], blob: bytes, dtype=np.float32) -> 'Mlp':
        widths = tuple(int(w) for w in widths)
        if len(blob) != cls.blob_size(widths):
            raise UsageError(f"Blob of {len(blob)} bytes does not match widths {widths}")
        flat = np.frombuffer(blob, dtype=BLOB_DTYPE)
        weights, biases, offset = [], [], 0
        for i, o in zip(widths[:-1], widths[1:]):
            weights.append(flat[offset:offset + o * i].reshape(o, i))
            offset += o * i
            biases.append(flat[offset:offset + o])
            offset += o
        return cls(widths, weights, biases, dtype)

    def __repr__(self) -> str:
        return f'<Mlp widths={self.widths} dtype={self.dtype}>'


def kaiming_init(net: Mlp, seed=None) -> Mlp:
    """New network with weights ~ N(0, 2 / fan_in) and zero biases."""
    rng = np.random.default_rng(seed)
    weights = [rng.normal(0.0, np.sqrt(2.0 / W.shape[1]), size=W.shape) for W in net.weights]
    biases = [np.zeros_like(b) for b in net.biases]
    return Mlp(net.widths, weights, biases, net.dtype)
