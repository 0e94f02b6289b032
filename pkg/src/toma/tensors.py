"""Dense token containers and the similarity / softmax / attention primitives.

Scalars are stored as float32; every reduction (dot products, softmax sums,
norms) runs in float64 and results are cast back to float32 at operation
boundaries. `deterministic_mode` swaps the BLAS matrix product for a
fixed-reduction-order einsum so repeated runs are bit-identical.
"""

from __future__ import annotations

import contextlib
import contextvars
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError

NORM_EPS = 1e-12

_DETERMINISTIC = contextvars.ContextVar("toma_deterministic", default=False)


@contextlib.contextmanager
def deterministic_mode(enabled: bool = True):
    """Force fixed-order reductions in matrix products within the block."""
    token = _DETERMINISTIC.set(bool(enabled))
    try:
        yield
    finally:
        _DETERMINISTIC.reset(token)


def is_deterministic() -> bool:
    return _DETERMINISTIC.get()


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with float64 accumulation.

    Under deterministic_mode the product is evaluated by einsum without
    optimization, which sums the contraction axis in a fixed order.
    """
    a64 = np.asarray(a, dtype=np.float64)
    b64 = np.asarray(b, dtype=np.float64)
    if is_deterministic():
        return np.einsum("ij,jk->ik", a64, b64, optimize=False)
    return a64 @ b64


@dataclass
class TokenMatrix:
    """N x d matrix of token embeddings, optionally tied to an (H, W) grid."""

    data: np.ndarray
    grid: tuple[int, int] | None = None

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 2:
            raise DataError("token matrix must be 2-D (tokens x dim)")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DataError("token matrix must have at least one row and column")
        if not np.isfinite(arr).all():
            raise DataError("non-finite embedding")
        if self.grid is not None:
            h, w = (int(v) for v in self.grid)
            if h < 1 or w < 1 or h * w != arr.shape[0]:
                raise DataError(
                    f"grid {h}x{w} does not match token count {arr.shape[0]}"
                )
            self.grid = (h, w)
        self.data = arr

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]


@dataclass
class SimilarityMatrix:
    """N x N cosine-similarity matrix; validation enforces the cosine contract."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DataError("similarity matrix must be square")
        if arr.shape[0] < 1:
            raise DataError("similarity matrix must be non-empty")
        if not np.isfinite(arr).all():
            raise DataError("non-finite similarity")
        if np.abs(arr - arr.T).max(initial=0.0) > 1e-6:
            raise DataError("similarity matrix must be symmetric")
        if arr.max() > 1 + 1e-6 or arr.min() < -1 - 1e-6:
            raise DataError("similarity entries must lie in [-1, 1]")
        diag = np.diagonal(arr)
        # diagonal is 1 for normalized tokens, 0 for zero-norm tokens
        ok = (np.abs(diag - 1.0) <= 1e-6) | (np.abs(diag) <= 1e-6)
        if not ok.all():
            raise DataError("similarity diagonal must be 1 (or 0 for zero-norm tokens)")
        self.data = arr

    @property
    def n(self) -> int:
        return self.data.shape[0]


def l2_normalize_rows(x: TokenMatrix, eps: float = NORM_EPS) -> TokenMatrix:
    """Scale each row to unit L2 norm; rows with norm < eps become all-zeros."""
    if eps <= 0:
        raise DataError("eps must be positive")
    norms = np.linalg.norm(x.data.astype(np.float64), axis=1, keepdims=True)
    out = np.divide(
        x.data.astype(np.float64),
        norms,
        out=np.zeros_like(x.data, dtype=np.float64),
        where=norms >= eps,
    )
    return TokenMatrix(out.astype(np.float32), grid=x.grid)


def cosine_similarity(x: TokenMatrix) -> SimilarityMatrix:
    """S_ij = cos(x_i, x_j); zero-norm tokens are 0 against everything, themselves included."""
    xh = l2_normalize_rows(x).data
    s = matmul(xh, xh.T)
    s = (s + s.T) / 2.0  # symmetrize away product rounding
    return SimilarityMatrix(s.astype(np.float32))


def softmax_columns(logits: np.ndarray) -> np.ndarray:
    """Column-wise stable softmax; returns float64, each column summing to 1."""
    arr = np.asarray(logits, dtype=np.float64)
    if arr.ndim != 2:
        raise DataError("softmax_columns expects a 2-D matrix")
    if not np.isfinite(arr).all():
        raise DataError("non-finite logits")
    shifted = arr - arr.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=0, keepdims=True)


def sdpa(
    q: TokenMatrix,
    k: TokenMatrix,
    v: TokenMatrix,
    tau: float = 1.0,
    scale_by_sqrt_d: bool = True,
    softmax_axis: str = "rows",
) -> TokenMatrix:
    """softmax(QK^T / (tau * sqrt(d) if scaled else tau)) V along the chosen axis."""
    if tau <= 0:
        raise DataError("temperature must be positive")
    if softmax_axis not in ("rows", "columns"):
        raise DataError("softmax_axis must be 'rows' or 'columns'")
    if q.d != k.d:
        raise DataError("query/key embedding dims differ")
    if k.n != v.n:
        raise DataError("key/value token counts differ")
    scale = tau * math.sqrt(q.d) if scale_by_sqrt_d else tau
    logits = matmul(q.data, k.data.T) / scale
    if softmax_axis == "rows":
        attn = softmax_columns(logits.T).T
    else:
        attn = softmax_columns(logits)
    out = matmul(attn, v.data)
    return TokenMatrix(out.astype(np.float32), grid=q.grid)
