"""
ndfield: neural displacement fields that carry a coarse base mesh onto a
non-mesh surface, plus the client-side meshing and geometry tasks.
"""
import logging
from typing import Optional, Type

__version__ = '1.0.0'

logger = logging.getLogger(__name__)


def init_app(config_name: Optional[str] = None):
    """Resolve a config class by name and configure logging for the process."""
    from config import config, Config
    from ndf.utils.logging import configure_logging

    cfg: Type[Config] = config.get(config_name or 'default', config['default'])
    configure_logging(cfg)
    if cfg.SENTRY_DSN:
        import sentry_sdk
        sentry_sdk.init(dsn=cfg.SENTRY_DSN, environment=cfg.ENV)
    logger.debug(f"Initialized with {cfg.__name__}")
    return cfg
