"""Merge-weight construction and the merge projection.

Soft weights come from a column-wise softmax of destination-vs-token logits:
each source token decomposes over destinations with total mass 1. Row
normalization of those scores yields the row-stochastic merge matrix, so each
merged token is a convex combination of sources. The hard one-hot scheme
(nearest destination, uniform averaging) is the same machinery with one-hot
score columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .select import DestinationSet
from .tensors import SimilarityMatrix, TokenMatrix, l2_normalize_rows, matmul, softmax_columns


@dataclass(frozen=True)
class MergeConfig:
    """Knobs shared by the merge-weight builders and the pipelines."""

    tau: float = 0.1
    scale_by_sqrt_d: bool = True
    cosine_logits: bool = True

    def __post_init__(self):
        if self.tau <= 0:
            raise DataError("temperature must be positive")


@dataclass
class MergeWeights:
    """Column-stochastic scores and the row-stochastic merge matrix built from them."""

    scores: np.ndarray
    matrix: np.ndarray
    dest: DestinationSet
    tau: float

    def __post_init__(self):
        scores = np.ascontiguousarray(self.scores, dtype=np.float32)
        mat = np.ascontiguousarray(self.matrix, dtype=np.float32)
        if scores.ndim != 2 or scores.shape != mat.shape:
            raise DataError("scores and matrix must share a D x N shape")
        n_dest, n = scores.shape
        if len(self.dest) != n_dest:
            raise DataError("destination count does not match weight rows")
        if not (math.isfinite(self.tau) and self.tau >= 0):
            raise DataError("temperature must be finite and non-negative")
        if not (np.isfinite(scores).all() and np.isfinite(mat).all()):
            raise DataError("non-finite merge weights")
        if scores.min() < 0 or mat.min() < 0:
            raise DataError("merge weights must be non-negative")
        col_sums = scores.sum(axis=0, dtype=np.float64)
        if np.abs(col_sums - 1.0).max() > 1e-5:
            raise DataError("score columns must sum to 1")
        row_sums = mat.sum(axis=1, dtype=np.float64)
        if np.abs(row_sums - 1.0).max() > 1e-5:
            raise DataError("merge matrix rows must sum to 1")
        score_rows = scores.sum(axis=1, dtype=np.float64, keepdims=True)
        if (score_rows == 0).any():
            raise DataError("merge weights row has zero mass")
        if np.abs(mat - scores / score_rows).max() > 1e-5:
            raise DataError("matrix must be the row-normalized scores")
        self.scores = scores
        self.matrix = mat

    @property
    def n_dest(self) -> int:
        return self.scores.shape[0]

    @property
    def n(self) -> int:
        return self.scores.shape[1]

    @classmethod
    def from_scores(cls, scores: np.ndarray, dest: DestinationSet, tau: float) -> "MergeWeights":
        scores64 = np.asarray(scores, dtype=np.float64)
        row_sums = scores64.sum(axis=1, keepdims=True)
        if (row_sums == 0).any():
            raise DataError("merge weights row has zero mass")
        matrix = scores64 / row_sums
        return cls(scores64.astype(np.float32), matrix.astype(np.float32), dest, tau)


@dataclass
class HardAssignment:
    """Map of every source token to a destination slot, with optional per-token weights."""

    group_of: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        groups = np.asarray(self.group_of, dtype=np.intp).ravel()
        if groups.size < 1:
            raise DataError("assignment must cover at least one token")
        if groups.min() < 0:
            raise DataError("group ids must be non-negative")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64).ravel()
            if w.size != groups.size:
                raise DataError("weights length must match token count")
            if not np.isfinite(w).all() or w.min() < 0:
                raise DataError("weights must be finite and non-negative")
            self.weights = w
        self.group_of = groups

    def merge_matrix(self, n_dest: int) -> np.ndarray:
        """Row k holds weight_i / Z_k over the tokens assigned to slot k (float64)."""
        n = self.group_of.size
        if self.group_of.max() >= n_dest:
            raise DataError("group id exceeds destination count")
        w = np.ones(n, dtype=np.float64) if self.weights is None else self.weights
        mat = np.zeros((n_dest, n), dtype=np.float64)
        mat[self.group_of, np.arange(n)] = w
        totals = mat.sum(axis=1, keepdims=True)
        if (totals == 0).any():
            raise DataError("empty merge group")
        return mat / totals


def _check_dest_for(n: int, dest: DestinationSet) -> np.ndarray:
    if len(dest) == 0:
        raise DataError("empty destination set")
    if dest.indices.max() >= n:
        raise DataError("destination index out of range")
    return dest.indices


def attention_merge_weights(
    x: TokenMatrix,
    dest: DestinationSet,
    tau: float = 0.1,
    scale_by_sqrt_d: bool = True,
    cosine_logits: bool = True,
    dest_rows: np.ndarray | None = None,
) -> MergeWeights:
    """Column-softmax attention scores of destinations against all tokens.

    Logits default to cosine form (L2-normalized embeddings); raw dot products
    are available with cosine_logits=False. dest_rows overrides the gathered
    destination embeddings, which lets a reuse schedule keep queries frozen
    at the step where destinations were last recomputed.
    """
    idx = _check_dest_for(x.n, dest)
    if tau <= 0:
        raise DataError("temperature must be positive")
    base = l2_normalize_rows(x).data if cosine_logits else x.data
    if dest_rows is None:
        queries = base[idx]
    else:
        queries = np.ascontiguousarray(dest_rows, dtype=np.float32)
        if queries.shape != (len(dest), x.d):
            raise DataError("dest_rows shape must be (n_dest, d)")
        if cosine_logits:
            queries = l2_normalize_rows(TokenMatrix(queries)).data
    scale = tau * math.sqrt(x.d) if scale_by_sqrt_d else tau
    logits = matmul(queries, base.T) / scale
    return MergeWeights.from_scores(softmax_columns(logits), dest, tau)


def hard_assignment(s: SimilarityMatrix, dest: DestinationSet) -> HardAssignment:
    """Assign each token to its most-similar destination slot, lowest slot on ties."""
    idx = _check_dest_for(s.n, dest)
    group_of = np.argmax(s.data[:, idx], axis=1).astype(np.intp)
    group_of[idx] = np.arange(len(dest), dtype=np.intp)  # destinations own themselves
    return HardAssignment(group_of)


def hard_merge_weights(s: SimilarityMatrix, dest: DestinationSet) -> MergeWeights:
    """One-hot score columns from the hard assignment; rows average each group uniformly."""
    assign = hard_assignment(s, dest)
    scores = np.zeros((len(dest), s.n), dtype=np.float64)
    scores[assign.group_of, np.arange(s.n)] = 1.0
    return MergeWeights.from_scores(scores, dest, tau=0.0)


def apply_merge(w: MergeWeights, x: TokenMatrix) -> TokenMatrix:
    """Project tokens down to destinations: matrix product (D x N) (N x d)."""
    if w.n != x.n:
        raise DataError("merge matrix columns must match token count")
    out = matmul(w.matrix, x.data)
    return TokenMatrix(out.astype(np.float32))
