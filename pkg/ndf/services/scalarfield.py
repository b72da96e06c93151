"""
Small scalar networks over the base mesh that compress per-surface fields
(eigenfunctions, labels) using the same intrinsic encoding as the
displacement field, plus one normalized channel coordinate.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import expit

from ndf.errors import NumericalError, UsageError
from ndf.kernel import AdamState, Mlp, adam_step, encoding_width, kaiming_init, positional_encoding
from ndf.mesh import HalfedgeMesh, SurfacePoints, sample_uniform
from ndf.services.dispfield import DisplacementField, PointsLike, as_surface_points
from ndf.services.geomproc import cotan_laplacian, smallest_eigenpairs
from ndf.services.remesh import ExtractedMesh, transfer_solution
from ndf.utils.logging import log_stage

logger = logging.getLogger(__name__)

MODES = ('continuous', 'binary')
DEFAULT_SCALAR_LAYERS = 8
DEFAULT_SCALAR_FEATURE_DIM = 8
DEFAULT_SCALAR_HIDDEN = (32, 32)
DEFAULT_SCALAR_EPOCHS = 40000
DEFAULT_SAMPLES_PER_CHANNEL = 3276
MONITOR_WINDOW = 500

TARGET_COLUMNS = ['face', 'w1', 'w2', 'w3', 'channel', 'value']


@dataclass
class ScalarTargets:
    """Training data: base-mesh points, channel index and target value per row."""
    points: SurfacePoints
    channels: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.channels = np.asarray(self.channels, dtype=np.int64).reshape(-1)
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if not (len(self.points) == len(self.channels) == len(self.values)):
            raise UsageError("Target points, channels and values differ in length")
        if len(self.channels) and self.channels.min() < 0:
            raise UsageError("Channel indices must be non-negative")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def n_channels(self) -> int:
        return int(self.channels.max()) + 1 if len(self) else 0

    def take(self, index) -> 'ScalarTargets':
        return ScalarTargets(self.points.take(index), self.channels[index], self.values[index])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'face': self.points.faces, 'w1': self.points.bary[:, 0], 'w2': self.points.bary[:, 1],
            'w3': self.points.bary[:, 2], 'channel': self.channels, 'value': self.values,
        }, columns=TARGET_COLUMNS)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> 'ScalarTargets':
        missing = set(TARGET_COLUMNS) - set(frame.columns)
        if missing:
            raise UsageError(f"Target table lacks columns {sorted(missing)}")
        points = SurfacePoints(frame['face'].to_numpy(np.int64), frame[['w1', 'w2', 'w3']].to_numpy(np.float64))
        return cls(points, frame['channel'].to_numpy(), frame['value'].to_numpy())


def read_targets(path: str) -> ScalarTargets:
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError) as e:
        raise UsageError(f"Cannot read targets from {path}: {e}") from e
    return ScalarTargets.from_frame(frame)


def write_targets(targets: ScalarTargets, path: str) -> None:
    targets.to_frame().to_csv(path, index=False, float_format='%.17g')


class ScalarNet:
    """u_phi over the base mesh: MLP([PE(x), blended features, channel coordinate]) -> 1."""

    def __init__(self, base: HalfedgeMesh, net: Mlp, features: np.ndarray, layers: int = DEFAULT_SCALAR_LAYERS,
                 channels: int = 1, mode: str = 'continuous'):
        features = np.array(features, dtype=net.dtype)
        if features.ndim != 2 or len(features) != base.n_vertices:
            raise UsageError(f"Feature table {features.shape} does not match {base.n_vertices} base vertices")
        if channels < 1:
            raise UsageError(f"A scalar net needs at least one channel, got {channels}")
        if mode not in MODES:
            raise UsageError(f"Unknown scalar mode {mode!r}; expected one of {MODES}")
        if net.n_inputs != encoding_width(layers) + features.shape[1] + 1 or net.n_outputs != 1:
            raise UsageError(f"Network widths {net.widths} do not fit L={layers}, d={features.shape[1]}")
        self.base = base
        self.net = net
        self.features = features
        self.layers = int(layers)
        self.channels = int(channels)
        self.mode = mode
        self.history: Optional[pd.DataFrame] = None
        self.flagged_windows = 0

    @classmethod
    def create(cls, base: HalfedgeMesh, channels: int = 1, feature_dim: int = DEFAULT_SCALAR_FEATURE_DIM,
               hidden: Sequence[int] = DEFAULT_SCALAR_HIDDEN, layers: int = DEFAULT_SCALAR_LAYERS,
               mode: str = 'continuous', seed=None, dtype=np.float32) -> 'ScalarNet':
        widths = (encoding_width(layers) + feature_dim + 1, *hidden, 1)
        net = kaiming_init(Mlp(widths, dtype=dtype), seed)
        return cls(base, net, np.zeros((base.n_vertices, feature_dim)), layers, channels, mode)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def hidden(self) -> Tuple[int, ...]:
        return self.net.widths[1:-1]

    def parameters(self):
        return self.net.parameters() + [self.features]

    def set_parameters(self, params) -> None:
        self.net.set_parameters(params[:-1])
        self.features = np.asarray(params[-1], dtype=self.net.dtype).reshape(self.features.shape)

    def channel_coordinate(self, channels) -> np.ndarray:
        channels = np.asarray(channels, dtype=np.int64).reshape(-1)
        if len(channels) and (channels.min() < 0 or channels.max() >= self.channels):
            raise UsageError(f"Channel out of range [0, {self.channels})")
        if self.channels == 1:
            return np.zeros(len(channels))
        return channels / (self.channels - 1.0)

    def inputs(self, points: PointsLike, channels) -> np.ndarray:
        points = as_surface_points(points)
        points.validate(self.base)
        x = self.base.embed(points)
        rows = self.features.astype(np.float64)[self.base.faces[points.faces]]
        blend = np.einsum('nk,nkd->nd', points.bary, rows)
        chan = self.channel_coordinate(channels)
        if len(chan) == 1:
            chan = np.full(len(points), chan[0])
        return np.concatenate([positional_encoding(x, self.layers), blend, chan[:, None]], axis=1)

    def forward(self, points: PointsLike, channels=0) -> np.ndarray:
        """(n,) raw outputs (logits in binary mode)."""
        return self.net.forward(self.inputs(points, channels))[:, 0]

    def predict(self, points: PointsLike, channels=0) -> np.ndarray:
        """Field values; probabilities in binary mode."""
        out = self.forward(points, channels)
        return expit(out) if self.mode == 'binary' else out

    def __repr__(self) -> str:
        return (f'<ScalarNet mode={self.mode} channels={self.channels} d={self.feature_dim} '
                f'L={self.layers} widths={self.net.widths}>')


def eval_scalar(snet: ScalarNet, point: PointsLike, channel: int = 0) -> float:
    """Raw network output at one base-mesh point for one channel."""
    if not 0 <= int(channel) < snet.channels:
        raise UsageError(f"Channel {channel} out of range [0, {snet.channels})")
    return float(snet.forward(point, channel)[0])


def bce_with_logits(z, y) -> np.ndarray:
    """max(z, 0) - z y + log(1 + exp(-|z|)) per sample."""
    z = np.asarray(z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))


def scalar_loss(z: np.ndarray, y: np.ndarray, mode: str) -> Tuple[float, np.ndarray]:
    """Mean loss and its gradient with respect to the raw outputs."""
    n = len(z)
    if mode == 'binary':
        return float(bce_with_logits(z, y).mean()), (expit(z) - y) / n
    r = z - y
    return float(r @ r / n), 2.0 * r / n


def train_scalar(field: DisplacementField, targets: ScalarTargets, mode: str = 'continuous',
                 epochs: int = DEFAULT_SCALAR_EPOCHS, lr: float = 1e-3,
                 feature_dim: int = DEFAULT_SCALAR_FEATURE_DIM, hidden: Sequence[int] = DEFAULT_SCALAR_HIDDEN,
                 layers: int = DEFAULT_SCALAR_LAYERS, seed: int = 0, log_every: int = 1000) -> ScalarNet:
    """Full-batch Adam fit of a ScalarNet over the field's base mesh.

    The trained net carries its loss history in `history`.
    """
    if not len(targets):
        raise UsageError("No scalar targets given")
    if mode not in MODES:
        raise UsageError(f"Unknown scalar mode {mode!r}; expected one of {MODES}")
    if mode == 'binary' and not np.all(np.isin(targets.values, (0.0, 1.0))):
        raise UsageError("Binary targets must be 0 or 1")
    base = field.base
    targets.points.validate(base)

    snet = ScalarNet.create(base, targets.n_channels, feature_dim, hidden, layers, mode, seed)
    X = snet.inputs(targets.points, targets.channels)
    ew = encoding_width(layers)
    vertex_ids = base.faces[targets.points.faces]
    adam = AdamState.create(snet.parameters(), lr)
    losses = np.empty(epochs)
    flagged = 0
    with log_stage('scalar-train'):
        logger.info(f"Training {snet} on {len(targets)} targets for {epochs} epochs")
        for epoch in range(epochs):
            # feature columns change every step
            X[:, ew:ew + snet.feature_dim] = np.einsum(
                'nk,nkd->nd', targets.points.bary, snet.features.astype(np.float64)[vertex_ids])
            Y, cache = snet.net.forward_cached(X)
            loss, dz = scalar_loss(Y[:, 0], targets.values, mode)
            if not np.isfinite(loss):
                raise NumericalError(f"Non-finite scalar loss at epoch {epoch}", payload={'epoch': epoch})
            grads, dX = snet.net.backward(cache, dz[:, None])
            d_features = np.zeros(snet.features.shape)
            np.add.at(d_features, vertex_ids, targets.points.bary[:, :, None] * dX[:, None, ew:ew + snet.feature_dim])
            snet.set_parameters(adam_step(adam, snet.parameters(), grads + [d_features]))
            losses[epoch] = loss
            if epoch >= 2 * MONITOR_WINDOW and (epoch + 1) % MONITOR_WINDOW == 0:
                recent = losses[epoch + 1 - MONITOR_WINDOW:epoch + 1].mean()
                previous = losses[epoch + 1 - 2 * MONITOR_WINDOW:epoch + 1 - MONITOR_WINDOW].mean()
                if recent > previous:
                    flagged += 1
                    logger.warning(f"Scalar loss rose over epochs {epoch + 1 - MONITOR_WINDOW}-{epoch}: "
                                   f"{previous:.3e} -> {recent:.3e}")
            if log_every and (epoch % log_every == 0 or epoch == epochs - 1):
                logger.info(f"scalar epoch {epoch}: loss={loss:.3e}")
    snet.history = pd.DataFrame({'epoch': np.arange(epochs), 'loss': losses})
    snet.flagged_windows = flagged
    return snet


def relative_l2_error(predicted, truth) -> float:
    """||predicted - truth|| / ||truth||."""
    predicted = np.asarray(predicted, dtype=np.float64).reshape(-1)
    truth = np.asarray(truth, dtype=np.float64).reshape(-1)
    norm = np.linalg.norm(truth)
    if norm == 0:
        raise UsageError("Relative error against an all-zero reference")
    return float(np.linalg.norm(predicted - truth) / norm)


def eigenfunction_targets(field: DisplacementField, mesh: ExtractedMesh, k: int = 10,
                          samples_per_channel: int = DEFAULT_SAMPLES_PER_CHANNEL, seed=None) -> ScalarTargets:
    """First k non-constant eigenfunctions of `mesh`, sampled at g(x_i) for uniform x_i on the base mesh."""
    L, M = cotan_laplacian(mesh)
    _, evecs = smallest_eigenpairs(L, M, k + 1)
    points = sample_uniform(field.base, samples_per_channel, seed)
    mapped = field.eval(points)
    values = transfer_solution(mesh, evecs[:, 1:], mapped)
    n = len(points)
    channels = np.repeat(np.arange(k), n)
    return ScalarTargets(SurfacePoints.concatenate([points] * k), channels, values.T.reshape(-1))


def baseline_comparison(field: DisplacementField, train_targets: ScalarTargets, test_targets: ScalarTargets,
                        feature_dim: int = DEFAULT_SCALAR_FEATURE_DIM, **train_kwargs) -> dict:
    """Relative L2 test error with per-vertex features versus a positional-encoding-only net.

    Both nets share seeds, samples and epochs.
    """
    errors = {}
    for name, d in (('intrinsic', feature_dim), ('baseline', 0)):
        snet = train_scalar(field, train_targets, feature_dim=d, **train_kwargs)
        errors[name] = relative_l2_error(snet.predict(test_targets.points, test_targets.channels),
                                         test_targets.values)
        logger.info(f"{name} scalar net: relative L2 error {errors[name]:.4f}")
    errors['ratio'] = errors['baseline'] / errors['intrinsic'] if errors['intrinsic'] > 0 else float('inf')
    return errors

