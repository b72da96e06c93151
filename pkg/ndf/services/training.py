"""
Two-phase training of the forward and inverse displacement fields.

Phase one fits both networks to the identity. Phase two minimizes the
weighted projection + cycle objective (plus optional anchor, normal and
conformal terms) with full-batch Adam, resampling the base mesh in
proportion to mapped area every few epochs.
"""
import dataclasses
import logging
import time
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd

from ndf.basemesh import NORMALIZED_BOUND
from ndf.errors import NumericalError, ProjectionError, UsageError
from ndf.kernel import AdamState, adam_step
from ndf.mesh import HalfedgeMesh, sample_uniform
from ndf.services.dispfield import (
    DEFAULT_FEATURE_DIM, DEFAULT_HIDDEN, DEFAULT_LAYERS, DisplacementField, FieldGradients, InverseField,
    sample_weighted,
)
from ndf.services.losses import (
    Anchor, identity_loss, loss_anchor, loss_conformal, loss_cycle, loss_normal, loss_projection,
)
from ndf.surfaces import Surface
from ndf.utils.logging import log_stage

logger = logging.getLogger(__name__)

CLOUD_LAMBDA_C = 1e4
IMPLICIT_LAMBDA_C = 1e2
ANCHOR_RATIO = 0.1
OPTIONAL_LOSS_WEIGHT = 10.0

HISTORY_COLUMNS = ['epoch', 'loss_p', 'loss_c', 'loss_a', 'loss_n', 'loss_f', 'loss_total', 'convergence']


@dataclass
class TrainingConfig:
    lambda_c: float = IMPLICIT_LAMBDA_C
    lambda_p: float = 1e4
    lambda_a: Optional[float] = None
    lambda_n: float = OPTIONAL_LOSS_WEIGHT
    lambda_f: float = OPTIONAL_LOSS_WEIGHT
    normal_loss: bool = False
    conformal_loss: bool = False
    samples: int = 32768
    epochs: int = 10000
    init_epochs: int = 1000
    init_samples: int = 32768
    resample_every: int = 10
    learning_rate: float = 1e-3
    anchors: List[Anchor] = dataclasses.field(default_factory=list)
    seed: int = 0
    encoding_layers: int = DEFAULT_LAYERS
    feature_dim: int = DEFAULT_FEATURE_DIM
    hidden: Tuple[int, ...] = DEFAULT_HIDDEN
    log_every: int = 100
    max_failure_rate: float = 0.5

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        weights = [self.lambda_c, self.lambda_p, self.lambda_n, self.lambda_f]
        if self.lambda_a is not None:
            weights.append(self.lambda_a)
        if any(w < 0 for w in weights):
            raise UsageError("Loss weights must be non-negative")
        if self.samples < 1 or self.init_samples < 1:
            raise UsageError("Sample counts must be at least 1")
        if self.epochs < 0 or self.init_epochs < 0 or self.resample_every < 1:
            raise UsageError("Epoch counts must be non-negative and resample_every positive")
        if self.learning_rate <= 0:
            raise UsageError("Learning rate must be positive")
        if self.feature_dim < 0 or self.encoding_layers < 0:
            raise UsageError("Feature dimension and encoding layers must be non-negative")

    @classmethod
    def for_surface(cls, surface: Surface, **overrides) -> 'TrainingConfig':
        """Defaults tuned to the representation: clouds weigh the cycle term higher."""
        defaults = {'lambda_c': IMPLICIT_LAMBDA_C if surface.is_implicit else CLOUD_LAMBDA_C}
        defaults.update(overrides)
        return cls(**defaults)

    @property
    def anchor_weight(self) -> float:
        if self.lambda_a is not None:
            return self.lambda_a
        return ANCHOR_RATIO * self.lambda_p if self.anchors else 0.0

    @property
    def normal_weight(self) -> float:
        return self.lambda_n if self.normal_loss else 0.0

    @property
    def conformal_weight(self) -> float:
        return self.lambda_f if self.conformal_loss else 0.0

    def replace(self, **changes) -> 'TrainingConfig':
        return dataclasses.replace(self, **changes)


def _generators(seed: int):
    field_seed, inverse_seed, sample_seed = np.random.SeedSequence(seed).spawn(3)
    return field_seed, inverse_seed, np.random.default_rng(sample_seed)


def fit_identity(field: DisplacementField, inverse: InverseField, config: TrainingConfig,
                 rng: np.random.Generator) -> Tuple[float, float]:
    """Pretrain both networks toward the identity on fixed samples; returns final losses."""
    points = sample_uniform(field.base, config.init_samples, rng)
    n_ambient = config.init_samples // 2
    ambient = np.concatenate([
        field.base.embed(points.take(np.arange(config.init_samples - n_ambient))),
        rng.uniform(-NORMALIZED_BOUND, NORMALIZED_BOUND, size=(n_ambient, 3)),
    ])
    field_adam = AdamState.create(field.parameters(), config.learning_rate)
    inverse_adam = AdamState.create(inverse.parameters(), config.learning_rate)
    loss_f = loss_i = 0.0
    for epoch in range(config.init_epochs):
        fpass = field.run(points)
        term = identity_loss(fpass)
        grads = field.backprop(fpass, d_mapped=term.d_mapped)
        ipass = inverse.run(ambient)
        r = ipass.out - ipass.y
        loss_i = float(np.einsum('ij,ij->', r, r) / len(r))
        inv_grads, _ = inverse.backprop(ipass, 2.0 * r / len(r))
        loss_f = term.value
        if not (np.isfinite(loss_f) and np.isfinite(loss_i)):
            raise NumericalError(f"Non-finite identity loss at epoch {epoch}", payload={'epoch': epoch})
        field.set_parameters(adam_step(field_adam, field.parameters(), grads.as_list()))
        inverse.set_parameters(adam_step(inverse_adam, inverse.parameters(), inv_grads))
        if config.log_every and epoch % config.log_every == 0:
            logger.info(f"identity epoch {epoch}: forward={loss_f:.3e} inverse={loss_i:.3e}")
    logger.info(f"Identity fit done after {config.init_epochs} epochs: forward={loss_f:.3e} inverse={loss_i:.3e}")
    return loss_f, loss_i


def training_step(field: DisplacementField, inverse: InverseField, surface: Surface, points,
                  config: TrainingConfig) -> Tuple[dict, FieldGradients, List[np.ndarray]]:
    """Evaluate the weighted objective on `points`; returns (losses, field grads, inverse grads)."""
    needs_tangents = config.normal_weight > 0 or config.conformal_weight > 0 or not surface.is_implicit
    fpass = field.run(points, tangents=needs_tangents)

    proj = loss_projection(fpass, surface)
    convergence = proj.count / len(fpass)
    if 1.0 - convergence > config.max_failure_rate:
        raise ProjectionError(
            f"{len(fpass) - proj.count} of {len(fpass)} projections failed",
            payload={'convergence': convergence})
    cyc = loss_cycle(fpass, inverse)
    losses = {'loss_p': proj.value, 'loss_c': cyc.value, 'loss_a': 0.0, 'loss_n': 0.0, 'loss_f': 0.0}

    d_mapped = config.lambda_p * proj.d_mapped + config.lambda_c * cyc.d_mapped
    d_pushed = None
    if config.normal_weight > 0:
        term = loss_normal(fpass, surface, proj.projection)
        losses['loss_n'] = term.value
        d_pushed = config.normal_weight * term.d_pushed
    if config.conformal_weight > 0:
        term = loss_conformal(fpass)
        losses['loss_f'] = term.value
        d = config.conformal_weight * term.d_pushed
        d_pushed = d if d_pushed is None else d_pushed + d
    grads = field.backprop(fpass, d_mapped=d_mapped, d_pushed=d_pushed)

    if config.anchor_weight > 0 and config.anchors:
        term = loss_anchor(field, config.anchors)
        losses['loss_a'] = term.value
        grads = grads.add(field.backprop(term.fpass, d_mapped=term.d_mapped), config.anchor_weight)

    losses['loss_total'] = (config.lambda_p * losses['loss_p'] + config.lambda_c * losses['loss_c']
                            + config.anchor_weight * losses['loss_a'] + config.normal_weight * losses['loss_n']
                            + config.conformal_weight * losses['loss_f'])
    losses['convergence'] = convergence
    if not np.isfinite(losses['loss_total']):
        raise NumericalError("Non-finite training loss", payload={k: float(v) for k, v in losses.items()})
    inverse_grads = [config.lambda_c * g for g in cyc.inverse_grads]
    return losses, grads, inverse_grads


def train(surface: Surface, base: HalfedgeMesh, config: Optional[TrainingConfig] = None
          ) -> Tuple[DisplacementField, InverseField, pd.DataFrame]:
    """Train g_theta and g_phi on a normalized base mesh; returns (field, inverse, loss history)."""
    config = config or TrainingConfig.for_surface(surface)
    field_seed, inverse_seed, rng = _generators(config.seed)
    field = DisplacementField.create(base, config.encoding_layers, config.feature_dim, config.hidden, field_seed)
    inverse = InverseField.create(config.encoding_layers, config.hidden, inverse_seed)
    started = time.perf_counter()

    with log_stage('train'):
        logger.info(f"Training {field} on {type(surface).__name__} for {config.epochs} epochs")
        fit_identity(field, inverse, config, rng)

        field_adam = AdamState.create(field.parameters(), config.learning_rate)
        inverse_adam = AdamState.create(inverse.parameters(), config.learning_rate)
        rows = []
        points = None
        for epoch in range(config.epochs):
            if epoch % config.resample_every == 0:
                points = sample_weighted(field, config.samples, rng)
            try:
                losses, grads, inverse_grads = training_step(field, inverse, surface, points, config)
            except (ProjectionError, NumericalError) as e:
                e.payload = {**(e.payload or {}), 'epoch': epoch}
                raise
            rows.append({'epoch': epoch, **losses})
            field.set_parameters(adam_step(field_adam, field.parameters(), grads.as_list()))
            inverse.set_parameters(adam_step(inverse_adam, inverse.parameters(), inverse_grads))
            if config.log_every and (epoch % config.log_every == 0 or epoch == config.epochs - 1):
                logger.info(f"epoch {epoch}: L_P={losses['loss_p']:.3e} L_C={losses['loss_c']:.3e} "
                            f"total={losses['loss_total']:.3e} convergence={losses['convergence']:.3f}")

    history = pd.DataFrame(rows, columns=HISTORY_COLUMNS)
    logger.info(f"Training finished in {time.perf_counter() - started:.1f}s")
    return field, inverse, history


def final_losses(history: pd.DataFrame) -> dict:
    """Last recorded row of a loss history as a plain dict."""
    if history.empty:
        return {c: float('nan') for c in HISTORY_COLUMNS if c != 'epoch'}
    row = history.iloc[-1]
    return {c: float(row[c]) for c in HISTORY_COLUMNS if c != 'epoch'}


def save_history(history: pd.DataFrame, path: str) -> None:
    history.to_csv(path, index=False)


def feature_dimension_sweep(surface: Surface, base: HalfedgeMesh, config: TrainingConfig,
                            dims: Iterable[int] = (0, 4, 8)) -> pd.DataFrame:
    """Train once per feature dimension with the same seed; one row of final losses each."""
    rows = []
    for d in dims:
        field, _, history = train(surface, base, config.replace(feature_dim=int(d)))
        last = final_losses(history)
        rows.append({'feature_dim': int(d), 'n_params': sum(p.size for p in field.parameters()),
                     'loss_p': last['loss_p'], 'loss_c': last['loss_c']})
        logger.info(f"feature_dim={d}: L_P={last['loss_p']:.3e}")
    return pd.DataFrame(rows, columns=['feature_dim', 'n_params', 'loss_p', 'loss_c'])


def evaluate_field(field: DisplacementField, inverse: Optional[InverseField], surface: Surface,
                   n: int = 10000, seed=None) -> dict:
    """Losses of a trained field on fresh uniform samples, without updating it."""
    points = sample_uniform(field.base, n, seed)
    fpass = field.run(points, tangents=not surface.is_implicit)
    proj = loss_projection(fpass, surface)
    out = {'loss_p': proj.value, 'convergence': proj.count / n}
    if inverse is not None:
        out['loss_c'] = loss_cycle(fpass, inverse).value
    return out