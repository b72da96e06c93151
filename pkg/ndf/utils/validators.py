"""
Input validation using Marshmallow schemas.
"""
import json
from typing import Dict, Optional

from marshmallow import RAISE, Schema, ValidationError, fields, post_load, validate

from ndf.errors import UsageError
from ndf.mesh import SurfacePoint
from ndf.services.dispfield import DEFAULT_FEATURE_DIM, DEFAULT_HIDDEN, DEFAULT_LAYERS
from ndf.services.losses import Anchor
from ndf.services.training import TrainingConfig


def parse_vector(text: str, size: int = 3) -> list:
    """'x,y,z' -> [x, y, z]."""
    try:
        values = [float(v) for v in text.split(',')]
    except ValueError as e:
        raise UsageError(f"Cannot parse {text!r} as {size} comma-separated numbers") from e
    if len(values) != size:
        raise UsageError(f"Expected {size} comma-separated numbers, got {text!r}")
    return values


class AnchorSchema(Schema):
    class Meta:
        unknown = RAISE

    face = fields.Int(required=True, validate=validate.Range(min=0))
    bary = fields.List(fields.Float(), required=True, validate=validate.Length(equal=3))
    target = fields.List(fields.Float(), required=True, validate=validate.Length(equal=3))

    @post_load
    def make_anchor(self, data: Dict, **kwargs) -> Anchor:
        try:
            return Anchor(SurfacePoint(data['face'], data['bary']), data['target'])
        except Exception as e:
            raise ValidationError(str(e), field_name='bary') from e


class TrainingConfigSchema(Schema):
    class Meta:
        unknown = RAISE

    lambda_c = fields.Float(allow_none=True, validate=validate.Range(min=0))
    lambda_p = fields.Float(missing=1e4, validate=validate.Range(min=0))
    lambda_a = fields.Float(allow_none=True, missing=None, validate=validate.Range(min=0))
    lambda_n = fields.Float(missing=10.0, validate=validate.Range(min=0))
    lambda_f = fields.Float(missing=10.0, validate=validate.Range(min=0))
    normal_loss = fields.Bool(missing=False)
    conformal_loss = fields.Bool(missing=False)
    samples = fields.Int(missing=32768, validate=validate.Range(min=1))
    epochs = fields.Int(missing=10000, validate=validate.Range(min=0))
    init_epochs = fields.Int(missing=1000, validate=validate.Range(min=0))
    init_samples = fields.Int(missing=32768, validate=validate.Range(min=1))
    resample_every = fields.Int(missing=10, validate=validate.Range(min=1))
    learning_rate = fields.Float(missing=1e-3, validate=validate.Range(min=0, min_inclusive=False))
    anchors = fields.List(fields.Nested(AnchorSchema), missing=[])
    seed = fields.Int(missing=0)
    encoding_layers = fields.Int(missing=DEFAULT_LAYERS, validate=validate.Range(min=0, max=30))
    feature_dim = fields.Int(missing=DEFAULT_FEATURE_DIM, validate=validate.Range(min=0))
    hidden = fields.List(fields.Int(validate=validate.Range(min=1)), missing=list(DEFAULT_HIDDEN))
    log_every = fields.Int(missing=100, validate=validate.Range(min=0))
    max_failure_rate = fields.Float(missing=0.5, validate=validate.Range(min=0, max=1))

    @post_load
    def make_config(self, data: Dict, **kwargs) -> TrainingConfig:
        if data.get('lambda_c') is None:
            data.pop('lambda_c', None)
        surface = self.context.get('surface')
        if surface is not None:
            return TrainingConfig.for_surface(surface, **data)
        return TrainingConfig(**data)


def load_training_config(source, surface=None, defaults: Optional[Dict] = None, **overrides) -> TrainingConfig:
    """TrainingConfig from a JSON path or dict.

    Precedence: `overrides` (non-None) > file > `defaults` > surface-dependent defaults.
    """
    if isinstance(source, dict):
        raw = source
    elif source is None:
        raw = {}
    else:
        try:
            with open(source) as fh:
                raw = json.load(fh)
        except OSError as e:
            raise UsageError(f"Cannot read training config {source}: {e}") from e
        except json.JSONDecodeError as e:
            raise UsageError(f"Training config {source} is not valid JSON: {e}") from e
    raw = {**(defaults or {}), **raw, **{k: v for k, v in overrides.items() if v is not None}}
    try:
        config = TrainingConfigSchema(context={'surface': surface}).load(raw)
    except ValidationError as e:
        raise UsageError(f"Invalid training config: {e.messages}", payload={'errors': e.messages}) from e
    return config
