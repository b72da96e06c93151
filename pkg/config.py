import os
from typing import Optional, Dict, Any, Tuple

from dotenv import load_dotenv

load_dotenv()


def _hidden(value: str) -> Tuple[int, ...]:
    return tuple(int(w) for w in value.split(',') if w.strip())


class Config:
    ENV: str = os.environ.get('NDF_ENV', 'production')
    DEBUG: bool = os.environ.get('NDF_DEBUG', '0') == '1'
    TESTING: bool = False

    # Logging
    LOG_LEVEL: str = os.environ.get('LOG_LEVEL', 'INFO')
    LOG_FORMAT: str = os.environ.get('LOG_FORMAT', 'json')  # 'json' or 'text'
    LOG_FILE: Optional[str] = os.environ.get('LOG_FILE')  # optional file path

    # Error tracking
    SENTRY_DSN: Optional[str] = os.environ.get('SENTRY_DSN')

    # Base mesh extraction
    NDF_RESOLUTION: int = int(os.environ.get('NDF_RESOLUTION', 128))
    NDF_TARGET_FACES: int = int(os.environ.get('NDF_TARGET_FACES', 2000))

    # Network shape
    NDF_ENCODING_LAYERS: int = int(os.environ.get('NDF_ENCODING_LAYERS', 8))
    NDF_FEATURE_DIM: int = int(os.environ.get('NDF_FEATURE_DIM', 4))
    NDF_HIDDEN: Tuple[int, ...] = _hidden(os.environ.get('NDF_HIDDEN', '64,64'))
    NDF_SCALAR_HIDDEN: Tuple[int, ...] = _hidden(os.environ.get('NDF_SCALAR_HIDDEN', '32,32'))

    # Randomness; every command derives its generators from this seed
    NDF_SEED: int = int(os.environ.get('NDF_SEED', 0))

    # Client side
    NDF_EXTRACT_ITERATIONS: int = int(os.environ.get('NDF_EXTRACT_ITERATIONS', 5))
    NDF_EIGEN_K: int = int(os.environ.get('NDF_EIGEN_K', 20))
    NDF_EIGEN_SHIFT: float = float(os.environ.get('NDF_EIGEN_SHIFT', 1e-3))
    NDF_GEODESIC_SOURCES: Tuple[Tuple[float, float, float], ...] = ((1.0, 1.0, 1.0), (-1.0, -1.0, -1.0))

    # Feature Flags
    FEATURE_FLAGS: Dict[str, bool] = {
        'debug_validation': os.environ.get('NDF_DEBUG_VALIDATION', '0') == '1',
    }

    @classmethod
    def get_feature_flag(cls, name: str) -> bool:
        return cls.FEATURE_FLAGS.get(name, False)


class DevelopmentConfig(Config):
    DEBUG: bool = True
    LOG_FORMAT: str = 'text'
    FEATURE_FLAGS: Dict[str, Any] = {**Config.FEATURE_FLAGS, 'debug_validation': True}


class TestingConfig(Config):
    TESTING: bool = True
    LOG_LEVEL: str = 'WARNING'
    LOG_FORMAT: str = 'text'
    LOG_FILE: Optional[str] = None
    SENTRY_DSN: Optional[str] = None
    NDF_RESOLUTION: int = 32
    NDF_TARGET_FACES: int = 200
    NDF_HIDDEN: Tuple[int, ...] = (16, 16)
    NDF_ENCODING_LAYERS: int = 2
    FEATURE_FLAGS: Dict[str, bool] = {**Config.FEATURE_FLAGS, 'debug_validation': True}


class ProductionConfig(Config):
    DEBUG: bool = False
    TESTING: bool = False
    # Production-specific overrides can go here


config = {
    'development': DevelopmentConfig,
    'testing': TestingConfig,
    'production': ProductionConfig,
    'default': DevelopmentConfig if os.environ.get('NDF_ENV') == 'development' else ProductionConfig,
}
