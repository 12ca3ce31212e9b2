"""
Unfolding Package for Off-Grid Channel Estimation
Provides the parameterized SBL layer, its equivalence constructions and the action codec
"""

from .params import LayerParams
from .layer import unfolded_layer, plain_equivalent_params, refined_moments
from .two_step import two_iteration_params, two_iteration_alpha, verify_one_layer_two_iters
from .codec import CODEC_MODES, ParamCodec, encode_params, decode_params, split_diagonal_rank1
from .config import UnfoldingConfig

__all__ = [
    'LayerParams',
    'unfolded_layer',
    'plain_equivalent_params',
    'refined_moments',
    'two_iteration_params',
    'two_iteration_alpha',
    'verify_one_layer_two_iters',
    'CODEC_MODES',
    'ParamCodec',
    'encode_params',
    'decode_params',
    'split_diagonal_rank1',
    'UnfoldingConfig',
]

__version__ = '1.0.0'
