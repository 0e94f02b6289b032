"""Cross-step reuse of destinations and merge weights.

Destinations are recomputed every dest_every steps and merge weights every
weights_every steps (weights at least as often as destinations). Between
recomputes, cached destination indices are kept and their embeddings
re-gathered from the current step by default; cached weight matrices are
applied to the current tokens directly. The log records what each step
recomputed, per-step metrics, and phase timings.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DataError
from .locality import (
    PartitionLayout,
    gather_regions,
    merge_concat,
    merge_weights_for,
    select_destinations,
    select_destinations_with_value,
    unmerge_scatter,
)
from .merge import MergeConfig, MergeWeights
from .select import DestinationSet
from .tensors import TokenMatrix
from .unmerge import ortho_diagnostics

RECOMPUTE_KINDS = ("destinations", "weights")


@dataclass(frozen=True)
class ReuseSchedule:
    """Recompute cadence: weights refresh at least as often as destinations."""

    dest_every: int
    weights_every: int
    total_steps: int
    share_across_layers: bool = True

    def __post_init__(self):
        if not 1 <= self.weights_every <= self.dest_every <= self.total_steps:
            raise DataError(
                "schedule must satisfy 1 <= weights_every <= dest_every <= total_steps"
            )


def should_recompute(sched: ReuseSchedule, step: int, what: str) -> bool:
    """True when the step index hits the recompute cadence; step 0 always does."""
    if what not in RECOMPUTE_KINDS:
        raise DataError(f"unknown recompute kind {what!r}")
    if not 0 <= step < sched.total_steps:
        raise DataError("step outside the schedule")
    every = sched.dest_every if what == "destinations" else sched.weights_every
    return step % every == 0


def destination_overlap(a: DestinationSet, b: DestinationSet) -> float:
    """|a intersect b| / budget, in [0, 1]."""
    if a.budget != b.budget:
        raise DataError("budget mismatch")
    return len(a.as_set() & b.as_set()) / a.budget


@dataclass
class ReuseCache:
    """One layer-group's cached selection state; weights always match dests."""

    dests: list[DestinationSet] | None = None
    weights: list[MergeWeights] | None = None
    frozen_rows: list[np.ndarray] | None = None
    dest_step: int = -1
    weights_step: int = -1


@dataclass(frozen=True)
class StepRecord:
    step: int
    recomputed_destinations: bool
    recomputed_weights: bool
    fl_value: float | None = None
    eps_fro: float | None = None
    timings: dict | None = None


@dataclass
class ReuseLog:
    records: list[StepRecord] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"steps": [asdict(r) for r in self.records]}


def _check_states(states: list[TokenMatrix]) -> None:
    if not states:
        raise DataError("no step states given")
    first = states[0]
    for s in states[1:]:
        if (s.n, s.d, s.grid) != (first.n, first.d, first.grid):
            raise DataError("step matrices must share token count, dim, and grid")


def stepwise_pipeline(
    states: list[TokenMatrix],
    layout: PartitionLayout,
    cfg: MergeConfig | None = None,
    sched: ReuseSchedule | None = None,
    core=None,
    unmerge_method: str = "transpose",
    freeze_dest_embeddings: bool = False,
) -> tuple[list[TokenMatrix], ReuseLog]:
    """Run the local pipeline across steps, reusing cached state per schedule.

    freeze_dest_embeddings keeps the destination query rows captured at the
    last destination recompute instead of re-gathering them from the current
    step when weights are rebuilt mid-window.
    """
    _check_states(states)
    cfg = cfg or MergeConfig()
    sched = sched or ReuseSchedule(1, 1, len(states))
    if len(states) > sched.total_steps:
        raise DataError("more states than scheduled steps")

    cache = ReuseCache()
    outputs: list[TokenMatrix] = []
    log = ReuseLog()
    for step, x in enumerate(states):
        redo_dests = should_recompute(sched, step, "destinations")
        redo_weights = should_recompute(sched, step, "weights")
        fl_value = None
        eps_mean = None

        t0 = time.perf_counter()
        if redo_dests:
            cache.dests, fl_value = select_destinations_with_value(x, layout)
            cache.dest_step = step
            if freeze_dest_embeddings:
                parts = gather_regions(x, layout)
                cache.frozen_rows = [
                    parts[r].data[d.indices].copy()
                    for r, d in enumerate(cache.dests)
                ]
        t1 = time.perf_counter()
        if redo_dests or redo_weights:
            rows = None
            if freeze_dest_embeddings and not redo_dests:
                rows = cache.frozen_rows
            cache.weights = merge_weights_for(x, layout, cache.dests, cfg, dest_rows=rows)
            cache.weights_step = step
            eps_mean = float(
                np.mean([ortho_diagnostics(w).eps_fro for w in cache.weights])
            )
        merged = merge_concat(x, layout, cache.weights)
        t2 = time.perf_counter()
        if core is not None:
            y = np.asarray(core(merged.data), dtype=np.float32)
            if y.shape != merged.data.shape:
                raise DataError("core transform changed the merged shape")
            merged = TokenMatrix(y)
        t3 = time.perf_counter()
        outputs.append(unmerge_scatter(merged, layout, cache.weights, unmerge_method))
        t4 = time.perf_counter()

        log.records.append(
            StepRecord(
                step=step,
                recomputed_destinations=redo_dests,
                recomputed_weights=redo_dests or redo_weights,
                fl_value=fl_value,
                eps_fro=eps_mean,
                timings={
                    "select": t1 - t0,
                    "merge": t2 - t1,
                    "unmerge": t4 - t3,
                    "total": t4 - t0,
                },
            )
        )
    return outputs, log


def selection_overlap_by_gap(
    states: list[TokenMatrix],
    layout: PartitionLayout,
    interval: int,
) -> dict[int, float]:
    """Mean overlap between each step's fresh selection and its interval start.

    Selections are recomputed at every step (regardless of any schedule), the
    step axis is cut into windows of the given interval, and overlaps are
    averaged per gap-from-window-start across regions and windows.
    """
    _check_states(states)
    if interval < 1:
        raise DataError("interval must be at least 1")
    selections = [select_destinations(x, layout) for x in states]
    sums: dict[int, float] = {}
    counts: dict[int, int] = {}
    for step, sels in enumerate(selections):
        start = step - (step % interval)
        base = selections[start]
        overlap = float(
            np.mean([destination_overlap(a, b) for a, b in zip(sels, base)])
        )
        gap = step - start
        sums[gap] = sums.get(gap, 0.0) + overlap
        counts[gap] = counts.get(gap, 0) + 1
    return {gap: sums[gap] / counts[gap] for gap in sorted(sums)}
