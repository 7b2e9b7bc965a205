"""Gradients of attention output with respect to the HyPE slope and amplitude.

The scalar loss is ``sum(G * O)`` where ``O`` is the attention output and
``G`` an upstream cotangent (all ones by default, i.e. the plain sum of
outputs). Analytic gradients go through the softmax Jacobian; the
finite-difference oracle only evaluates the forward pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .attention import attend_with_bias, causal_mask
from .encoding import (HypeHeadParams, HypeOverflowError, build_bias_hype, build_eta_pair,
                       _offsets)
from .tensor import ShapeError, as_matrix


@dataclass(frozen=True)
class ParamGradient:
    d_mu: float
    d_tau: float
    loss_kind: str = "sum"


def bias_param_grads(L: int, params: HypeHeadParams):
    """Entrywise ``(d bias / d mu, d bias / d tau)`` as float64 L x L arrays."""
    x = _offsets(L)
    with np.errstate(over="ignore", invalid="ignore"):
        d_mu = -params.tau * x * np.cosh(params.mu * x) + 0.0
        d_tau = -np.sinh(params.mu * x) + 0.0
    if not (np.all(np.isfinite(d_mu)) and np.all(np.isfinite(d_tau))):
        raise HypeOverflowError(
            f"bias derivatives overflow f64 for mu={params.mu!r}, tau={params.tau!r}, L={L}")
    return d_mu, d_tau


def _as_f64(*arrays):
    return [np.asarray(a, dtype=np.float64) for a in arrays]


def _loss_setup(Q, K, V, cotangent):
    if Q.shape != K.shape or V.shape[0] != K.shape[0]:
        raise ShapeError(f"incompatible Q {Q.shape}, K {K.shape}, V {V.shape}")
    if cotangent is None:
        return np.ones(V.shape), "sum"
    G = np.asarray(cotangent, dtype=np.float64)
    if G.shape != V.shape:
        raise ShapeError(f"cotangent of shape {G.shape} for output {V.shape}")
    return G, "cotangent"


def _logit_cotangent(Q, K, V, bias, G, causal):
    """dLoss/dlogits for logits = Q K^T / sqrt(d) + bias."""
    logits = Q @ K.T / math.sqrt(Q.shape[1]) + bias
    if causal:
        logits = causal_mask(logits)
    logits = logits - logits.max(axis=1, keepdims=True)
    P = np.exp(logits)
    P /= P.sum(axis=1, keepdims=True)
    dP = G @ V.T
    return P * (dP - np.sum(P * dP, axis=1, keepdims=True))


def attention_param_grads(Q, K, V, params: HypeHeadParams, causal: bool = False,
                          cotangent=None, path: str = "explicit") -> ParamGradient:
    """Analytic dLoss/dmu and dLoss/dtau.

    ``path="explicit"`` differentiates the L x L bias entries;
    ``path="concat"`` differentiates the eta columns instead, so the logit
    derivative is assembled from ``d(eta_q) eta_k^T + eta_q d(eta_k)^T``.
    """
    Q, K, V = _as_f64(Q, K, V)
    G, kind = _loss_setup(Q, K, V, cotangent)
    L, d = Q.shape
    bias = build_bias_hype(L, params).values
    dS = _logit_cotangent(Q, K, V, bias, G, causal)

    if path == "explicit":
        dbias_mu, dbias_tau = bias_param_grads(L, params)
    elif path == "concat":
        eta = build_eta_pair(L, d, params)
        q, k = eta.eta_q.astype(np.float64), eta.eta_k.astype(np.float64)
        pos = np.arange(L, dtype=np.float64)[:, None]
        sign = np.array([1.0, -1.0])
        dq_mu = q * pos * sign
        dk_mu = -k * pos * sign
        # eta_q is linear in tau and eta_k does not depend on it
        q_unit = build_eta_pair(L, d, HypeHeadParams(params.mu, 1.0)).eta_q
        root_d = math.sqrt(d)
        dbias_mu = (dq_mu @ k.T + q @ dk_mu.T) / root_d
        dbias_tau = (q_unit @ k.T) / root_d
    else:
        raise ValueError(f"unknown path {path!r}")
    return ParamGradient(float(np.sum(dS * dbias_mu)), float(np.sum(dS * dbias_tau)), kind)


def attention_loss(Q, K, V, params: HypeHeadParams, causal: bool = False, cotangent=None) -> float:
    Q, K, V = _as_f64(Q, K, V)
    G, _ = _loss_setup(Q, K, V, cotangent)
    bias = build_bias_hype(Q.shape[0], params)
    out = attend_with_bias(as_matrix(Q), as_matrix(K), as_matrix(V), bias, causal=causal)
    return float(np.sum(G * out))


def fd_step(value: float) -> float:
    return np.finfo(np.float64).eps ** (1 / 3) * max(1.0, abs(value))


def finite_difference_param_grads(Q, K, V, params: HypeHeadParams, causal: bool = False,
                                  cotangent=None) -> ParamGradient:
    """Central-difference oracle for :func:`attention_param_grads`."""
    def loss(mu, tau):
        return attention_loss(Q, K, V, HypeHeadParams(mu, tau), causal, cotangent)

    mu, tau = params.mu, params.tau
    h = fd_step(mu)
    d_mu = (loss(mu + h, tau) - loss(mu - h, tau)) / (2 * h)
    h = fd_step(tau)
    d_tau = (loss(mu, tau + h) - loss(mu, tau - h)) / (2 * h)
    return ParamGradient(d_mu, d_tau, "sum" if cotangent is None else "cotangent")


def relative_gap(a: float, b: float) -> float:
    """``|a - b| / max(|a|, |b|)``, taken as 0 when both are exactly 0."""
    denom = max(abs(a), abs(b))
    return 0.0 if denom == 0.0 else abs(a - b) / denom
