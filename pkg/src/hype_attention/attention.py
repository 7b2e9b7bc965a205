"""Reference single- and multi-head attention with hyperbolic position biases.

Three routes compute the same softmax attention:

* ``attend_vanilla``      softmax(Q K^T / sqrt(d)) V
* ``attend_with_bias``    softmax(Q K^T / sqrt(d) + bias) V, bias stored as L x L
* ``attend_hype_concat``  softmax(Qhat Khat^T / sqrt(d)) V, bias carried by eta columns

All functions accept ``return_weights=True`` to also get the post-softmax
weight matrix.
"""

from __future__ import annotations

import contextvars
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .encoding import (BiasMatrix, GridShape, HypeHeadParams, build_bias_hype,
                       build_eta_grid, build_eta_pair)
from .tensor import (ShapeError, add, concat_cols, matmul, row_softmax, scale,
                     slice_cols, transpose, width_name)


@dataclass(frozen=True)
class AttentionConfig:
    L: int
    d: int
    n_heads: int
    heads: tuple
    causal: bool = False
    n_copies: int = 1
    width: str = "f64"

    def __post_init__(self):
        object.__setattr__(self, "heads", tuple(self.heads))
        if min(self.L, self.d, self.n_heads, self.n_copies) < 1:
            raise ValueError("L, d, n_heads and n_copies must all be >= 1")
        if len(self.heads) != self.n_heads:
            raise ShapeError(f"{len(self.heads)} head parameter sets for {self.n_heads} heads")
        if self.width not in ("f32", "f64"):
            raise ValueError(f"unknown width {self.width!r}")


def _check_qkv(Q, K, V):
    if Q.ndim != 2 or Q.shape != K.shape or V.shape[0] != K.shape[0]:
        raise ShapeError(f"incompatible Q {Q.shape}, K {K.shape}, V {V.shape}")
    if not (Q.dtype == K.dtype == V.dtype):
        raise ShapeError("Q, K, V must share one float width")


def causal_mask(logits: np.ndarray) -> np.ndarray:
    """Replace entries above the diagonal with the most negative finite value."""
    L = logits.shape[0]
    upper = np.triu(np.ones((L, L), dtype=bool), k=1)
    out = np.where(upper, np.finfo(logits.dtype).min, logits).astype(logits.dtype)
    out.setflags(write=False)
    return out


def _softmax_apply(logits, V, causal, return_weights):
    if causal:
        logits = causal_mask(logits)
    weights = row_softmax(logits)
    out = matmul(weights, V)
    return (out, weights) if return_weights else out


def attend_vanilla(Q, K, V, causal: bool = False, return_weights: bool = False):
    _check_qkv(Q, K, V)
    logits = scale(matmul(Q, transpose(K)), 1.0 / math.sqrt(Q.shape[1]))
    return _softmax_apply(logits, V, causal, return_weights)


def attend_with_bias(Q, K, V, bias, causal: bool = False, return_weights: bool = False):
    """Attention with an explicit additive L x L bias (``BiasMatrix`` or array)."""
    _check_qkv(Q, K, V)
    values = bias.values if isinstance(bias, BiasMatrix) else bias
    L = Q.shape[0]
    if values.shape != (L, L):
        raise ShapeError(f"bias of shape {values.shape} for sequence length {L}")
    logits = scale(matmul(Q, transpose(K)), 1.0 / math.sqrt(Q.shape[1]))
    logits = add(logits, values.astype(Q.dtype))
    return _softmax_apply(logits, V, causal, return_weights)


def _attend_augmented(Q, K, V, eta, causal, return_weights):
    q_hat = concat_cols(Q, eta.eta_q)
    k_hat = concat_cols(K, eta.eta_k)
    # scale by the un-augmented head dimension
    logits = scale(matmul(q_hat, transpose(k_hat)), 1.0 / math.sqrt(Q.shape[1]))
    return _softmax_apply(logits, V, causal, return_weights)


def attend_hype_concat(Q, K, V, params: HypeHeadParams, n_copies: int = 1,
                       causal: bool = False, return_weights: bool = False):
    """Attention with the hyperbolic bias injected through eta columns.

    No L x L bias is ever built; only the logit product every attention needs.
    """
    _check_qkv(Q, K, V)
    L, d = Q.shape
    eta = build_eta_pair(L, d, params, n_copies, width=width_name(Q.dtype))
    return _attend_augmented(Q, K, V, eta, causal, return_weights)


def attend_grid(Q, K, V, shape: GridShape, params_per_dim: Sequence[HypeHeadParams],
                causal: bool = False, n_copies: int = 1, return_weights: bool = False):
    _check_qkv(Q, K, V)
    L, d = Q.shape
    if shape.size != L:
        raise ShapeError(f"grid {shape.dims} holds {shape.size} tokens, not {L}")
    eta = build_eta_grid(shape, d, params_per_dim, n_copies, width=width_name(Q.dtype))
    return _attend_augmented(Q, K, V, eta, causal, return_weights)


def _project(X, w):
    if w.shape[0] != X.shape[1]:
        raise ShapeError(f"weight of shape {w.shape} for input width {X.shape[1]}")
    return matmul(X, w)


def attend_multihead(X, weights, config: AttentionConfig, path: str = "concat",
                     max_workers: int | None = None):
    """Multi-head HyPE attention; head outputs are concatenated along columns.

    ``weights`` holds one ``(W_q, W_k, W_v)`` triple of ``d_model x d``
    matrices per head. ``path="concat"`` runs every head through the eta
    route. ``path="explicit"`` builds L x L bias matrices instead, one per
    distinct ``(mu, tau)`` so heads with equal parameters share a mask.
    With ``max_workers`` the heads run on a thread pool; results are
    identical to the sequential run.
    """
    if len(weights) != config.n_heads:
        raise ShapeError(f"{len(weights)} weight triples for {config.n_heads} heads")
    if X.shape[0] != config.L:
        raise ShapeError(f"input has {X.shape[0]} rows, config says L={config.L}")
    for triple in weights:
        if len(triple) != 3 or any(w.shape[1] != config.d for w in triple):
            raise ShapeError(f"each head needs three d_model x {config.d} weights")

    if path == "explicit":
        masks = {}
        for p in config.heads:
            if p not in masks:
                masks[p] = build_bias_hype(config.L, p, width=config.width)

        def run(h):
            Wq, Wk, Wv = weights[h]
            Q, K, V = _project(X, Wq), _project(X, Wk), _project(X, Wv)
            return attend_with_bias(Q, K, V, masks[config.heads[h]], causal=config.causal)
    elif path == "concat":
        def run(h):
            Wq, Wk, Wv = weights[h]
            Q, K, V = _project(X, Wq), _project(X, Wk), _project(X, Wv)
            return attend_hype_concat(Q, K, V, config.heads[h], config.n_copies,
                                      causal=config.causal)
    else:
        raise ValueError(f"unknown path {path!r}")

    if max_workers and max_workers > 1:
        ctx = contextvars.copy_context()
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            outs = list(pool.map(lambda h: ctx.copy().run(run, h), range(config.n_heads)))
    else:
        outs = [run(h) for h in range(config.n_heads)]
    result = outs[0]
    for o in outs[1:]:
        result = concat_cols(result, o)
    return result


def head_output(multihead_out, h: int, d: int):
    """Columns of head ``h`` in a concatenated multi-head output."""
    return slice_cols(multihead_out, h * d, (h + 1) * d)
