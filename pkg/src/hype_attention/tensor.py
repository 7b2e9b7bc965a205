"""Minimal dense-matrix kernel.

A "matrix" here is a read-only, C-contiguous 2-D ``numpy.ndarray`` of dtype
float32 or float64. Every function returns a fresh read-only array and
refuses to hand back non-finite values.
"""

from __future__ import annotations

import numpy as np

WIDTHS = {"f32": np.float32, "f64": np.float64}


class ShapeError(ValueError):
    """Operand shapes are incompatible."""


class NonFiniteError(OverflowError):
    """An operation produced NaN or Inf."""


def resolve_dtype(width) -> np.dtype:
    """Map ``"f32"``/``"f64"`` (or a numpy dtype) to a numpy dtype."""
    if isinstance(width, str):
        try:
            return np.dtype(WIDTHS[width])
        except KeyError:
            raise ValueError(f"unknown float width {width!r}; expected f32 or f64") from None
    dtype = np.dtype(width)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"unsupported dtype {dtype}")
    return dtype


def width_name(dtype) -> str:
    return "f32" if np.dtype(dtype) == np.float32 else "f64"


def _freeze(a: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise NonFiniteError(f"{what} produced non-finite values")
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def as_matrix(data, width="f64") -> np.ndarray:
    dtype = resolve_dtype(width)
    with np.errstate(over="ignore"):
        a = np.array(data, dtype=dtype, copy=True)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {a.shape}")
    return _freeze(a, "as_matrix")


def _same_width(a, b):
    if a.dtype != b.dtype:
        raise ShapeError(f"float width mismatch: {a.dtype} vs {b.dtype}")


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product, accumulated in float64 and stored at the operand width."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    _same_width(a, b)
    with np.errstate(over="ignore", invalid="ignore"):
        out = (a.astype(np.float64) @ b.astype(np.float64)).astype(a.dtype)
    return _freeze(out, "matmul")


def transpose(a: np.ndarray) -> np.ndarray:
    return _freeze(a.T.copy(), "transpose")


def row_softmax(a: np.ndarray) -> np.ndarray:
    """Softmax along each row with per-row max subtraction."""
    if not np.all(np.isfinite(a)):
        raise NonFiniteError("row_softmax input is not finite")
    shifted = a - a.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return _freeze(e / e.sum(axis=1, keepdims=True), "row_softmax")


def concat_cols(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[0] != b.shape[0]:
        raise ShapeError(f"row counts differ: {a.shape[0]} vs {b.shape[0]}")
    _same_width(a, b)
    return _freeze(np.concatenate([a, b], axis=1), "concat_cols")


def slice_cols(a: np.ndarray, start: int, stop: int) -> np.ndarray:
    return _freeze(a[:, start:stop].copy(), "slice_cols")


def add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape:
        raise ShapeError(f"cannot add {a.shape} and {b.shape}")
    _same_width(a, b)
    with np.errstate(over="ignore", invalid="ignore"):
        return _freeze(a + b, "add")


def scale(a: np.ndarray, c: float) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        return _freeze((a * c).astype(a.dtype), "scale")


def random_fill(rows: int, cols: int, seed: int, distribution: str = "normal",
                width="f64") -> np.ndarray:
    """Seeded random matrix.

    Draws come from ``numpy.random.default_rng(seed)`` (PCG64) in float64
    and are then cast to the requested width, so a given seed yields the
    same values on every platform.

    ``distribution`` is ``"normal"`` (standard normal) or ``"uniform"``
    (uniform on [-1, 1]).
    """
    rng = np.random.default_rng(seed)
    if distribution == "normal":
        values = rng.standard_normal((rows, cols))
    elif distribution == "uniform":
        values = rng.uniform(-1.0, 1.0, (rows, cols))
    else:
        raise ValueError(f"unknown distribution {distribution!r}")
    return as_matrix(values, width)
