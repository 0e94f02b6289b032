"""Report builders behind the CLI: pipeline runs, micro-benchmarks, cost sheets.

Each builder returns a plain dict ready for json.dumps, stamped with a fixed
schema version. Timing uses the monotonic clock and reports medians with the
interquartile range; the repetition count is always included so a consumer
can judge how settled the numbers are.
"""

from __future__ import annotations

import time
from contextlib import nullcontext

import numpy as np

from .costmodel import CostParams, as_ratio, cost_report
from .errors import DataError, NumericalError
from .locality import UNMERGE_METHODS, make_layout
from .merge import MergeConfig, apply_merge, attention_merge_weights
from .reuse import ReuseSchedule, selection_overlap_by_gap, stepwise_pipeline
from .select import greedy_select
from .tensors import TokenMatrix, cosine_similarity, deterministic_mode
from .unmerge import unmerge_transpose

SCHEMA_VERSION = 1


def _median_iqr(samples) -> dict:
    arr = np.asarray(samples, dtype=np.float64)
    q1, med, q3 = np.percentile(arr, [25.0, 50.0, 75.0])
    return {"median": float(med), "iqr": float(q3 - q1)}


def _rel_mse(outputs: list[TokenMatrix], states: list[TokenMatrix]) -> float:
    """Mean over steps of mean((out - in)^2) / mean(in^2), in float64."""
    per = []
    for out, x in zip(outputs, states):
        a = out.data.astype(np.float64)
        b = x.data.astype(np.float64)
        num = float(np.mean((a - b) ** 2))
        den = float(np.mean(b * b))
        per.append(0.0 if num == 0.0 else num / den)
    return float(np.mean(per))


def _destination_budget(ratio, n: int) -> int:
    d_total = int(round(ratio * n))
    if d_total < 1:
        raise DataError("merge ratio leaves no destinations")
    return d_total


def run_report(
    states: list[TokenMatrix],
    ratio,
    tau: float = 0.1,
    layout_kind: str = "global",
    regions: int = 1,
    dest_every: int = 1,
    weights_every: int = 1,
    unmerge_method: str = "transpose",
    deterministic: bool = False,
    compare_unmerge: bool = False,
    scale_by_sqrt_d: bool = True,
    cosine_logits: bool = True,
    freeze_dest_embeddings: bool = False,
) -> dict:
    """Run the stepwise pipeline (identity core) and collect the full report."""
    if not states:
        raise DataError("no step states given")
    if unmerge_method not in UNMERGE_METHODS:
        raise DataError(f"unknown unmerge method {unmerge_method!r}")
    r = as_ratio(ratio)
    if not 0 < r <= 1:
        raise DataError("merge ratio must lie in (0, 1]")
    n, d = states[0].n, states[0].d
    d_total = _destination_budget(r, n)
    layout = make_layout(layout_kind, n, d_total, grid=states[0].grid, regions=regions)
    sched = ReuseSchedule(dest_every, weights_every, len(states))
    cfg = MergeConfig(tau=tau, scale_by_sqrt_d=scale_by_sqrt_d, cosine_logits=cosine_logits)

    guard = deterministic_mode() if deterministic else nullcontext()
    with guard:
        outputs, log = stepwise_pipeline(
            states, layout, cfg, sched,
            unmerge_method=unmerge_method,
            freeze_dest_embeddings=freeze_dest_embeddings,
        )
        metrics = {"round_trip_rel_mse": _rel_mse(outputs, states)}
        if compare_unmerge:
            other = "pinv" if unmerge_method == "transpose" else "transpose"
            alt_outputs, _ = stepwise_pipeline(
                states, layout, cfg, sched,
                unmerge_method=other,
                freeze_dest_embeddings=freeze_dest_embeddings,
            )
            both = {unmerge_method: metrics["round_trip_rel_mse"],
                    other: _rel_mse(alt_outputs, states)}
            metrics["round_trip_rel_mse_transpose"] = both["transpose"]
            metrics["round_trip_rel_mse_pinv"] = both["pinv"]
            metrics["unmerge_mse_gap"] = abs(both["transpose"] - both["pinv"])
        fl_values = [rec.fl_value for rec in log.records if rec.fl_value is not None]
        eps_values = [rec.eps_fro for rec in log.records if rec.eps_fro is not None]
        metrics["facility_location_value"] = float(np.mean(fl_values))
        metrics["eps_fro"] = float(np.mean(eps_values))
        if len(states) > 1:
            overlap = selection_overlap_by_gap(states, layout, sched.dest_every)
        else:
            overlap = {0: 1.0}
        metrics["mean_overlap_by_gap"] = {str(k): v for k, v in overlap.items()}

    if not all(np.isfinite(v) for v in metrics.values() if isinstance(v, float)):
        raise NumericalError("non-finite metric in run report")

    phases = ("select", "merge", "unmerge", "total")
    timings = {p: _median_iqr([rec.timings[p] for rec in log.records]) for p in phases}
    timings["reps"] = len(states)
    timings["clock"] = "perf_counter"

    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "run",
        "config": {
            "tau": tau,
            "ratio": float(r),
            "ratio_exact": str(r),
            "layout": layout_kind,
            "regions": regions,
            "schedule": {
                "total_steps": len(states),
                "dest_every": dest_every,
                "weights_every": weights_every,
            },
            "unmerge": unmerge_method,
            "compare_unmerge": compare_unmerge,
            "deterministic": deterministic,
            "scale_by_sqrt_d": scale_by_sqrt_d,
            "cosine_logits": cosine_logits,
            "freeze_dest_embeddings": freeze_dest_embeddings,
            "n": n,
            "dim": d,
            "seed": None,
        },
        "metrics": metrics,
        "timings": timings,
        "cost_model": cost_report(CostParams(n=n, d=d, r=r, tiles=regions)).as_dict(),
        "reuse_log": log.as_dict(),
    }


def _time_op(fn, reps: int, warmup: int) -> dict:
    for _ in range(warmup):
        fn()
    samples = np.empty(reps, dtype=np.float64)
    for i in range(reps):
        t0 = time.perf_counter_ns()
        fn()
        samples[i] = (time.perf_counter_ns() - t0) * 1e-9
    return _median_iqr(samples)


def bench_report(n: int, dim: int, ratios, reps: int = 1000, warmup: int = 50,
                 seed: int = 0) -> dict:
    """Time apply_merge and unmerge_transpose in isolation, per ratio."""
    if n < 1 or dim < 1:
        raise DataError("n and dim must be at least 1")
    if reps < 1 or warmup < 0:
        raise DataError("reps must be >= 1 and warmup >= 0")
    parsed = [as_ratio(v) for v in ratios]
    if not parsed:
        raise DataError("at least one ratio required")
    for r in parsed:
        if not 0 < r <= 1:
            raise DataError("merge ratio must lie in (0, 1]")

    rng = np.random.default_rng(seed)
    tokens = TokenMatrix(rng.standard_normal((n, dim)).astype(np.float32))
    sim = cosine_similarity(tokens)
    rows = []
    for r in parsed:
        d_total = _destination_budget(r, n)
        dest = greedy_select(sim, d_total)
        weights = attention_merge_weights(tokens, dest)
        merged = apply_merge(weights, tokens)
        rows.append({
            "ratio": float(r),
            "ratio_exact": str(r),
            "destinations": d_total,
            "merge_seconds": _time_op(lambda: apply_merge(weights, tokens), reps, warmup),
            "unmerge_seconds": _time_op(lambda: unmerge_transpose(weights, merged), reps, warmup),
        })
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "bench",
        "config": {
            "n": n,
            "dim": dim,
            "ratios": [float(r) for r in parsed],
            "reps": reps,
            "warmup": warmup,
            "seed": seed,
        },
        "timings": {"rows": rows, "reps": reps, "clock": "perf_counter_ns"},
    }


def flops_report(n: int, dim: int, ratio, tiles: int = 1, with_adds: bool = False) -> dict:
    """Cost sheet for one shape, as the CLI emits it."""
    rep = cost_report(CostParams(n=n, d=dim, r=as_ratio(ratio), tiles=tiles))
    out = {"schema_version": SCHEMA_VERSION, "kind": "flops"}
    out.update(rep.as_dict(with_adds=with_adds))
    return out
