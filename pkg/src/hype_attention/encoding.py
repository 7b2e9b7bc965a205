"""Hyperbolic positional encoding: explicit biases and eta augmentations.

The explicit bias for a head with slope ``mu`` and amplitude ``tau`` is::

    bias[i, j] = -tau * sinh(mu * (j - i))

The same bias is obtained implicitly by appending two columns to the queries
and keys (``eta_q`` and ``eta_k``) so that::

    concat(Q, eta_q) @ concat(K, eta_k).T == Q @ K.T + sqrt(d) * bias

Column layout (0-based) of one eta copy, for token position ``p``::

    eta_q[p] = tau*sqrt(d)/2 * [ exp(+mu p),  exp(-mu p)]
    eta_k[p] =                 [+exp(-mu p), -exp(+mu p)]

Stacking ``n`` copies divides the ``eta_q`` amplitude by ``n`` so the
product, and hence the bias, does not depend on ``n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import instrument
from .tensor import NonFiniteError, ShapeError, resolve_dtype, width_name


class HypeOverflowError(NonFiniteError):
    """A bias or eta entry does not fit in the requested float width."""


@dataclass(frozen=True)
class HypeHeadParams:
    mu: float
    tau: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.tau)):
            raise ValueError(f"mu and tau must be finite, got mu={self.mu}, tau={self.tau}")


@dataclass(frozen=True)
class EtaPair:
    eta_q: np.ndarray
    eta_k: np.ndarray
    n_copies: int
    # a single HypeHeadParams, or one per grid dimension
    params: object

    @property
    def product(self) -> np.ndarray:
        """``eta_q @ eta_k.T`` computed in float64."""
        return self.eta_q.astype(np.float64) @ self.eta_k.astype(np.float64).T


@dataclass(frozen=True)
class BiasMatrix:
    kind: str  # "hype", "alibi" or "composite"
    values: np.ndarray
    provenance: dict = field(default_factory=dict)

    @property
    def L(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class GridShape:
    """Extents of a multi-dimensional token layout, flattened row-major."""

    dims: tuple
    order: str = "row-major"

    def __post_init__(self):
        dims = tuple(int(x) for x in self.dims)
        if not dims or any(x < 1 for x in dims):
            raise ValueError(f"grid extents must be positive, got {self.dims}")
        if self.order != "row-major":
            raise ValueError(f"unsupported flattening order {self.order!r}")
        object.__setattr__(self, "dims", dims)

    @property
    def size(self) -> int:
        return math.prod(self.dims)

    @property
    def ndim(self) -> int:
        return len(self.dims)

    def coords(self, flat_index: int) -> tuple:
        return tuple(int(c) for c in np.unravel_index(flat_index, self.dims))

    def flat_index(self, coords: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(coords), self.dims))

    def coord_table(self) -> np.ndarray:
        """``(size, ndim)`` integer array; row ``p`` holds the coordinates of token ``p``."""
        return np.stack(np.unravel_index(np.arange(self.size), self.dims), axis=1)


def _check_length(L):
    if int(L) != L or L < 1:
        raise ValueError(f"sequence length must be a positive integer, got {L}")


def _offsets(L: int) -> np.ndarray:
    pos = np.arange(L, dtype=np.float64)
    return pos[None, :] - pos[:, None]


def _sinh_bias(offsets: np.ndarray, params: HypeHeadParams) -> np.ndarray:
    """-tau * sinh(mu * offsets) in float64; inf where it overflows."""
    with np.errstate(over="ignore", invalid="ignore"):
        # + 0.0 turns the -0.0 diagonal into +0.0
        return -params.tau * np.sinh(params.mu * offsets) + 0.0


def _store(values: np.ndarray, dtype, what: str) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        out = values.astype(dtype)
    if not np.all(np.isfinite(out)):
        raise HypeOverflowError(f"{what} overflows {width_name(dtype)}")
    out.setflags(write=False)
    return out


def build_bias_hype(L: int, params: HypeHeadParams, width="f64") -> BiasMatrix:
    _check_length(L)
    dtype = resolve_dtype(width)
    values = _store(_sinh_bias(_offsets(L), params), dtype,
                    f"hyperbolic bias -tau*sinh(mu*(L-1)) with mu={params.mu!r}, "
                    f"tau={params.tau!r}, L={L}")
    instrument.record("bias", values)
    return BiasMatrix("hype", values, {"L": L, "mu": params.mu, "tau": params.tau})


def build_bias_alibi(L: int, m: float, width="f64", convention: str = "paper") -> BiasMatrix:
    """Linear comparator bias.

    ``convention="paper"`` gives the antisymmetric ramp ``-m*(j-i)`` that the
    hyperbolic bias linearizes to at ``tau=1``. ``convention="published"``
    gives the causal ALiBi ramp ``m*(j-i)`` on ``j <= i`` and 0 above the
    diagonal (meant to be used with a causal mask); it is matched by the
    hyperbolic bias at ``tau=-1``.
    """
    _check_length(L)
    dtype = resolve_dtype(width)
    offsets = _offsets(L)
    if convention == "paper":
        values = -m * offsets + 0.0
    elif convention == "published":
        values = np.where(offsets <= 0, m * offsets, 0.0) + 0.0
    else:
        raise ValueError(f"unknown ALiBi convention {convention!r}")
    values = _store(values, dtype, f"ALiBi bias with m={m!r}, L={L}")
    instrument.record("bias", values)
    return BiasMatrix("alibi", values, {"L": L, "m": m, "convention": convention})


def _eta_columns(positions: np.ndarray, d: int, params: HypeHeadParams, n_copies: int):
    """Float64 eta columns for the given positions; may contain inf."""
    amp = params.tau * math.sqrt(d) / (2 * n_copies)
    with np.errstate(over="ignore", invalid="ignore"):
        up = np.exp(params.mu * positions)
        down = np.exp(-params.mu * positions)
        q_pair = np.stack([amp * up, amp * down], axis=1)
        k_pair = np.stack([down, -up], axis=1)
    return np.tile(q_pair, (1, n_copies)), np.tile(k_pair, (1, n_copies))


def _check_eta_args(d, n_copies):
    if int(d) != d or d < 1:
        raise ValueError(f"head dimension must be a positive integer, got {d}")
    if int(n_copies) != n_copies or n_copies < 1:
        raise ValueError(f"n_copies must be a positive integer, got {n_copies}")


def build_eta_pair(L: int, d: int, params: HypeHeadParams, n_copies: int = 1,
                   width="f64") -> EtaPair:
    _check_length(L)
    _check_eta_args(d, n_copies)
    dtype = resolve_dtype(width)
    q, k = _eta_columns(np.arange(L, dtype=np.float64), d, params, n_copies)
    what = (f"eta column exp(|mu|*(L-1)) with mu={params.mu!r}, tau={params.tau!r}, "
            f"d={d}, L={L}")
    eta_q, eta_k = _store(q, dtype, what), _store(k, dtype, what)
    instrument.record("eta", eta_q)
    instrument.record("eta", eta_k)
    return EtaPair(eta_q, eta_k, n_copies, params)


def recommend_mu_schedule(n_heads: int, L_extra: int) -> list[HypeHeadParams]:
    """Geometric per-head slopes ``mu_h = 2**-h / (2 * L_extra)``, all below ``1/L_extra``."""
    if n_heads < 1 or L_extra < 1:
        raise ValueError("n_heads and L_extra must be >= 1")
    return [HypeHeadParams(mu=2.0 ** -h / (2 * L_extra), tau=1.0) for h in range(n_heads)]


def _check_grid(shape: GridShape, params_per_dim, L=None):
    if len(params_per_dim) != shape.ndim:
        raise ShapeError(f"{len(params_per_dim)} parameter sets for a {shape.ndim}-D grid")
    if L is not None and L != shape.size:
        raise ShapeError(f"grid {shape.dims} holds {shape.size} tokens, not {L}")


def build_bias_grid(shape: GridShape, params_per_dim: Sequence[HypeHeadParams], width="f64",
                    L: int | None = None) -> BiasMatrix:
    """Sum of per-dimension hyperbolic biases over a flattened grid."""
    _check_grid(shape, params_per_dim, L)
    dtype = resolve_dtype(width)
    coords = shape.coord_table().astype(np.float64)
    total = np.zeros((shape.size, shape.size))
    for axis, params in enumerate(params_per_dim):
        c = coords[:, axis]
        total = total + _sinh_bias(c[None, :] - c[:, None], params)
    values = _store(total + 0.0, dtype, f"grid bias for dims {shape.dims}")
    instrument.record("bias", values)
    return BiasMatrix("composite", values,
                      {"dims": shape.dims, "params": [(p.mu, p.tau) for p in params_per_dim]})


def build_eta_grid(shape: GridShape, d: int, params_per_dim: Sequence[HypeHeadParams],
                   n_copies: int = 1, width="f64") -> EtaPair:
    """Eta pair whose product reproduces :func:`build_bias_grid` times ``sqrt(d)``.

    Each grid axis contributes its own column pairs, built from that axis'
    coordinate of every token and placed at the same column positions in
    ``eta_q`` and ``eta_k``.
    """
    _check_grid(shape, params_per_dim)
    _check_eta_args(d, n_copies)
    dtype = resolve_dtype(width)
    coords = shape.coord_table().astype(np.float64)
    qs, ks = [], []
    for axis, params in enumerate(params_per_dim):
        q, k = _eta_columns(coords[:, axis], d, params, n_copies)
        qs.append(q)
        ks.append(k)
    what = f"grid eta columns for dims {shape.dims}"
    eta_q = _store(np.concatenate(qs, axis=1), dtype, what)
    eta_k = _store(np.concatenate(ks, axis=1), dtype, what)
    instrument.record("eta", eta_q)
    instrument.record("eta", eta_k)
    return EtaPair(eta_q, eta_k, n_copies, tuple(params_per_dim))
