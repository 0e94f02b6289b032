"""Restore full token resolution after the core transform.

The default unmerge is the transpose of the merge matrix; its licence is the
near-orthonormality of the merge rows, measured here as the deviation of the
Gram matrix from identity. The exact least-squares unmerge solves the D x D
Gram system instead of factorizing anything N-sized, with a small ridge
escalation before declaring the weights rank-deficient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import DataError, NumericalError
from .merge import MergeWeights
from .tensors import TokenMatrix, matmul

RIDGE_LADDER = (1e-8, 1e-6, 1e-4)


@dataclass
class OrthoDiagnostics:
    """How far the merge rows are from orthonormal: gram = matrix @ matrix.T."""

    gram: np.ndarray
    eps_fro: float
    eps_max: float
    row_norms: np.ndarray


def _check_merged(w: MergeWeights, x_prime: TokenMatrix) -> None:
    if x_prime.n != w.n_dest:
        raise DataError("merged rows must match destination count")


def _gram(w: MergeWeights) -> np.ndarray:
    a = w.matrix.astype(np.float64)
    g = matmul(a, a.T)
    return (g + g.T) / 2.0


def unmerge_transpose(w: MergeWeights, x_prime: TokenMatrix) -> TokenMatrix:
    """N x d reconstruction via the transpose of the merge matrix."""
    _check_merged(w, x_prime)
    out = matmul(w.matrix.T, x_prime.data)
    return TokenMatrix(out.astype(np.float32))


def unmerge_pinv(w: MergeWeights, x_prime: TokenMatrix, ridge: float = 0.0) -> TokenMatrix:
    """Least-squares reconstruction matrix.T @ (gram + ridge I)^-1 @ x_prime.

    With ridge 0 and full-row-rank weights this is the Moore-Penrose action.
    If the Cholesky factorization fails, the ridge escalates through a short
    ladder scaled by trace(gram)/D before giving up.
    """
    _check_merged(w, x_prime)
    if ridge < 0:
        raise DataError("ridge must be non-negative")
    g = _gram(w)
    n_dest = g.shape[0]
    scale = float(np.trace(g)) / n_dest
    ladder = [float(ridge)] + [f * scale for f in RIDGE_LADDER if f * scale > ridge]
    eye = np.eye(n_dest)
    for lam in ladder:
        try:
            factor = cho_factor(g + lam * eye, lower=True)
        except LinAlgError:
            continue
        solved = cho_solve(factor, x_prime.data.astype(np.float64))
        out = matmul(w.matrix.T, solved)
        return TokenMatrix(out.astype(np.float32))
    raise NumericalError("rank-deficient merge weights")


def ortho_diagnostics(w: MergeWeights) -> OrthoDiagnostics:
    """Gram matrix, its Frobenius/max deviation from identity, and row norms."""
    g = _gram(w)
    defect = g - np.eye(g.shape[0])
    return OrthoDiagnostics(
        gram=g,
        eps_fro=float(np.linalg.norm(defect, "fro")),
        eps_max=float(np.abs(defect).max()),
        row_norms=np.sqrt(np.clip(np.diagonal(g), 0.0, None)),
    )
