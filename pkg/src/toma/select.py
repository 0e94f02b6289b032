"""Facility-location destination selection.

The objective f(D) = sum_i max_{j in D} S_ij is monotone submodular, so the
cached greedy here carries the classic (1 - 1/e) guarantee on non-negative
instances. The cache is a single vector holding, for every token, the best
similarity to any selected destination; marginal gains are clamped sums of
improvements over that vector. A brute-force enumerator serves as the oracle
for small instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import DataError
from .tensors import SimilarityMatrix

ORACLE_MAX_TOKENS = 20
ORACLE_MAX_SUBSETS = 2_000_000


@dataclass
class DestinationSet:
    """Selected destination indices in selection order, plus the budget."""

    indices: np.ndarray
    budget: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.intp).ravel()
        if self.budget < 1:
            raise DataError("budget must be at least 1")
        if idx.size > self.budget:
            raise DataError("more indices than budget")
        if idx.size and idx.min() < 0:
            raise DataError("destination index out of range")
        if np.unique(idx).size != idx.size:
            raise DataError("destination indices must be distinct")
        self.indices = idx
        self.budget = int(self.budget)

    def __len__(self) -> int:
        return int(self.indices.size)

    def as_set(self) -> frozenset:
        return frozenset(int(i) for i in self.indices)


@dataclass
class GreedyState:
    """Greedy bookkeeping: best similarity to the selected set, per token.

    best_sim[j] equals max over selected k of S_jk exactly; it is never
    clamped at zero, so negative similarities flow through unchanged.
    """

    best_sim: np.ndarray
    selected: np.ndarray

    @classmethod
    def empty(cls, n: int) -> "GreedyState":
        if n < 1:
            raise DataError("state needs at least one token")
        return cls(np.zeros(n, dtype=np.float32), np.zeros(n, dtype=bool))

    @classmethod
    def from_indices(cls, s: SimilarityMatrix, indices) -> "GreedyState":
        state = cls.empty(s.n)
        for v in np.asarray(indices, dtype=np.intp).ravel():
            state.add(s, int(v))
        return state

    @property
    def count(self) -> int:
        return int(self.selected.sum())

    @property
    def is_empty(self) -> bool:
        return not self.selected.any()

    def add(self, s: SimilarityMatrix, v: int) -> None:
        _check_token(s, v)
        if self.selected[v]:
            raise DataError("token already selected")
        if self.is_empty:
            self.best_sim = s.data[v].copy()
        else:
            np.maximum(self.best_sim, s.data[v], out=self.best_sim)
        self.selected[v] = True


def _check_token(s: SimilarityMatrix, v: int) -> None:
    if not 0 <= v < s.n:
        raise DataError("token index out of range")


def _check_dest(s: SimilarityMatrix, dest: DestinationSet) -> np.ndarray:
    if len(dest) == 0:
        raise DataError("empty destination set")
    if dest.indices.max() >= s.n:
        raise DataError("destination index out of range")
    return dest.indices


def facility_location_value(s: SimilarityMatrix, dest: DestinationSet) -> float:
    """sum_i max_{j in dest} S_ij."""
    idx = _check_dest(s, dest)
    return float(s.data[:, idx].max(axis=1).sum(dtype=np.float64))


def marginal_gain(s: SimilarityMatrix, state: GreedyState, v: int) -> float:
    """Gain of adding v: sum_j max(0, S_vj - best_sim_j); row sum when the set is empty."""
    _check_token(s, v)
    if state.selected[v]:
        raise DataError("token already selected")
    row = s.data[v].astype(np.float64)
    if state.is_empty:
        return float(row.sum())
    diff = row - state.best_sim.astype(np.float64)
    return float(np.clip(diff, 0.0, None).sum())


def greedy_select(s: SimilarityMatrix, budget: int) -> DestinationSet:
    """Cached greedy maximization of the facility-location objective.

    First pick maximizes the row sum; each later pick maximizes the cached
    marginal gain over unselected tokens. Ties break to the lowest index.
    Selected tokens are excluded from the candidate set rather than zeroed,
    so the similarity matrix stays valid for later value queries.
    """
    n = s.n
    if not 1 <= budget <= n:
        raise DataError("budget out of range")
    state = GreedyState.empty(n)
    row_sums = s.data.sum(axis=1, dtype=np.float64)
    first = int(np.argmax(row_sums))
    state.add(s, first)
    chosen = [first]
    for _ in range(budget - 1):
        candidates = np.flatnonzero(~state.selected)
        diffs = s.data[candidates] - state.best_sim[None, :]
        gains = np.maximum(diffs, 0.0).sum(axis=1, dtype=np.float64)
        pick = int(candidates[np.argmax(gains)])
        state.add(s, pick)
        chosen.append(pick)
    return DestinationSet(np.array(chosen, dtype=np.intp), budget)


def brute_force_select(s: SimilarityMatrix, budget: int) -> DestinationSet:
    """Exact maximizer by subset enumeration; ties resolve lexicographically."""
    n = s.n
    if not 1 <= budget <= n:
        raise DataError("budget out of range")
    if n > ORACLE_MAX_TOKENS or math.comb(n, budget) > ORACLE_MAX_SUBSETS:
        raise DataError("instance too large for oracle")
    data = s.data.astype(np.float64)
    best_value = -math.inf
    best_subset = None
    for subset in combinations(range(n), budget):
        value = data[:, subset].max(axis=1).sum()
        if value > best_value:
            best_value = value
            best_subset = subset
    return DestinationSet(np.array(best_subset, dtype=np.intp), budget)
