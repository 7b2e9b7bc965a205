"""Error metrics used by the verification suites and the benchmark."""

from __future__ import annotations

import math

import numpy as np

from .encoding import HypeHeadParams, build_bias_hype, build_eta_pair
from .tensor import concat_cols, matmul, transpose, width_name


def max_rel_error(x, ref) -> float:
    """``max|x - ref| / max|ref|`` (plain max abs error when ``ref`` is all zero)."""
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    err = float(np.max(np.abs(x - ref), initial=0.0))
    denom = float(np.max(np.abs(ref), initial=0.0))
    return err / denom if denom > 0 else err


def equivalence_error(Q, K, params: HypeHeadParams, n_copies: int = 1) -> float:
    """Entrywise error of ``(Qhat Khat^T - Q K^T) / sqrt(d)`` against the explicit bias.

    Entry ``(i, l)`` is normalised by ``(|Qhat| |Khat|^T)[i, l] / sqrt(d)``,
    the magnitude of the terms summed to form that logit. A plain
    ``|err| / |bias|`` ratio is undefined on the zero diagonal and for
    ``mu = 0`` or ``tau = 0``, and is dominated by cancellation near it.
    """
    L, d = Q.shape
    width = width_name(Q.dtype)
    eta = build_eta_pair(L, d, params, n_copies, width=width)
    q_hat, k_hat = concat_cols(Q, eta.eta_q), concat_cols(K, eta.eta_k)
    root_d = math.sqrt(d)
    implied = (matmul(q_hat, transpose(k_hat)).astype(np.float64)
               - matmul(Q, transpose(K)).astype(np.float64)) / root_d
    bias = build_bias_hype(L, params, width=width).values.astype(np.float64)
    magnitude = (np.abs(q_hat).astype(np.float64) @ np.abs(k_hat).astype(np.float64).T) / root_d
    return float(np.max(np.abs(implied - bias) / np.maximum(magnitude, np.finfo(np.float64).tiny)))
