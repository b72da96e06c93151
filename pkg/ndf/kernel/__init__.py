from ndf.kernel.encoding import encoding_jvp, encoding_vjp, encoding_width, positional_encoding
from ndf.kernel.mlp import Mlp, MlpCache, kaiming_init
from ndf.kernel.adam import AdamState, adam_step

__all__ = [
    'encoding_jvp', 'encoding_vjp', 'encoding_width', 'positional_encoding',
    'Mlp', 'MlpCache', 'kaiming_init', 'AdamState', 'adam_step',
]
