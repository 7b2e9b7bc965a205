"""Hyperbolic positional encoding (HyPE) for attention.

The hyperbolic bias ``-tau * sinh(mu * (j - i))`` is injected into softmax
attention by appending exponential columns to queries and keys, so no
L x L bias matrix has to be stored.
"""

from .attention import (AttentionConfig, attend_grid, attend_hype_concat, attend_multihead,
                        attend_vanilla, attend_with_bias, head_output)
from .encoding import (BiasMatrix, EtaPair, GridShape, HypeHeadParams, HypeOverflowError,
                       build_bias_alibi, build_bias_grid, build_bias_hype, build_eta_grid,
                       build_eta_pair, recommend_mu_schedule)
from .gradcheck import (ParamGradient, attention_param_grads, bias_param_grads,
                        finite_difference_param_grads)
from .instrument import count_pe_storage
from .tensor import NonFiniteError, ShapeError

__version__ = "0.1.0"
