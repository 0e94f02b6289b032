"""Tile/stripe partitioning of token grids and the region-local merge pipeline.

Regions are exact: stripes must divide the grid rows, tiles must factor the
grid on both axes. Each region runs its own selection and merging with a
fresh greedy state (no cross-region competition); the caller's core transform
sees one concatenated D_total x d matrix, after which every region unmerges
and scatters back to its original slots.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, LayoutError
from .merge import MergeConfig, MergeWeights, apply_merge, attention_merge_weights
from .select import DestinationSet, facility_location_value, greedy_select
from .tensors import TokenMatrix, cosine_similarity
from .unmerge import unmerge_pinv, unmerge_transpose

LAYOUT_KINDS = ("global", "stripe", "tile")
UNMERGE_METHODS = ("transpose", "pinv")


@dataclass
class PartitionLayout:
    """Bijective map between flat token indices and (region, slot) pairs."""

    kind: str
    regions: int
    grid: tuple[int, int] | None
    region_of: np.ndarray
    local_index: np.ndarray
    n_loc: np.ndarray
    d_loc: np.ndarray
    _members: tuple[np.ndarray, ...] = field(repr=False, default=())

    @property
    def n(self) -> int:
        return int(self.region_of.size)

    @property
    def d_total(self) -> int:
        return int(self.d_loc.sum())

    def members(self, r: int) -> np.ndarray:
        """Flat indices of region r in slot order."""
        return self._members[r]


def _divisors(v: int) -> list[int]:
    return [k for k in range(1, v + 1) if v % k == 0]


def _tile_factor(h: int, w: int, regions: int) -> tuple[int, int]:
    """Pick the most-square (gh, gw) with gh*gw = regions, gh | h, gw | w."""
    pairs = [
        (gh, gw)
        for gh in _divisors(h)
        for gw in _divisors(w)
        if gh * gw == regions
    ]
    if not pairs:
        valid = sorted({gh * gw for gh in _divisors(h) for gw in _divisors(w)})
        raise LayoutError(
            f"layout indivisible: cannot cut {regions} tiles from a {h}x{w} grid",
            valid_regions=tuple(valid),
        )
    # most-square tiles: gh/gw closest to h/w in log ratio, tie to larger gh
    def skew(pair):
        gh, gw = pair
        return abs(np.log((gh * w) / (gw * h)))

    return min(pairs, key=lambda p: (skew(p), -p[0]))


def make_layout(
    kind: str,
    n: int,
    d_total: int,
    grid: tuple[int, int] | None = None,
    regions: int = 1,
) -> PartitionLayout:
    """Build a validated layout; raises LayoutError with valid counts when indivisible."""
    if kind not in LAYOUT_KINDS:
        raise DataError(f"unknown layout kind {kind!r}")
    if n < 1:
        raise DataError("layout needs at least one token")
    if not 1 <= d_total <= n:
        raise DataError("destination budget out of range")
    if regions < 1:
        raise DataError("region count must be at least 1")
    if d_total < regions:
        raise DataError("budget must cover every region (d_total >= regions)")
    if grid is not None:
        h, w = (int(v) for v in grid)
        if h < 1 or w < 1 or h * w != n:
            raise DataError(f"grid {h}x{w} does not match token count {n}")
        grid = (h, w)

    if kind == "global":
        if regions != 1:
            raise LayoutError(
                "layout indivisible: global layout has exactly one region",
                valid_regions=(1,),
            )
        members = [np.arange(n, dtype=np.intp)]
    elif kind == "stripe":
        if grid is None:
            raise DataError("stripe layout requires a grid")
        h, w = grid
        if h % regions != 0:
            raise LayoutError(
                f"layout indivisible: {regions} stripes do not divide {h} grid rows",
                valid_regions=tuple(_divisors(h)),
            )
        rows_per = h // regions
        members = [
            np.arange(r * rows_per * w, (r + 1) * rows_per * w, dtype=np.intp)
            for r in range(regions)
        ]
    else:
        if grid is None:
            raise DataError("tile layout requires a grid")
        h, w = grid
        gh, gw = _tile_factor(h, w, regions)
        th, tw = h // gh, w // gw
        members = []
        for a in range(gh):
            for b in range(gw):
                ys = np.arange(a * th, (a + 1) * th, dtype=np.intp)
                xs = np.arange(b * tw, (b + 1) * tw, dtype=np.intp)
                members.append((ys[:, None] * w + xs[None, :]).ravel())

    region_of = np.empty(n, dtype=np.intp)
    local_index = np.empty(n, dtype=np.intp)
    for r, m in enumerate(members):
        region_of[m] = r
        local_index[m] = np.arange(m.size, dtype=np.intp)
    n_loc = np.array([m.size for m in members], dtype=np.intp)
    base, rem = divmod(d_total, regions)
    d_loc = base + (np.arange(regions) < rem).astype(np.intp)
    return PartitionLayout(
        kind=kind,
        regions=regions,
        grid=grid,
        region_of=region_of,
        local_index=local_index,
        n_loc=n_loc,
        d_loc=d_loc,
        _members=tuple(members),
    )


def _check_layout_input(x: TokenMatrix, layout: PartitionLayout) -> None:
    if x.n != layout.n:
        raise DataError("token count does not match layout")
    if x.grid is not None and layout.grid is not None and x.grid != layout.grid:
        raise DataError("token grid does not match layout grid")


def gather_regions(x: TokenMatrix, layout: PartitionLayout) -> list[TokenMatrix]:
    """Split x into per-region matrices, slot order within each region."""
    _check_layout_input(x, layout)
    return [TokenMatrix(x.data[layout.members(r)]) for r in range(layout.regions)]


def scatter_regions(parts: list[TokenMatrix], layout: PartitionLayout) -> TokenMatrix:
    """Exact inverse of gather_regions."""
    if len(parts) != layout.regions:
        raise DataError("part count does not match layout regions")
    dims = {p.d for p in parts}
    if len(dims) != 1:
        raise DataError("regions disagree on embedding dim")
    out = np.empty((layout.n, dims.pop()), dtype=np.float32)
    for r, part in enumerate(parts):
        if part.n != int(layout.n_loc[r]):
            raise DataError("region size does not match layout")
        out[layout.members(r)] = part.data
    return TokenMatrix(out, grid=layout.grid)


def select_destinations(x: TokenMatrix, layout: PartitionLayout) -> list[DestinationSet]:
    """Greedy facility-location selection independently per region."""
    dests, _ = select_destinations_with_value(x, layout)
    return dests


def select_destinations_with_value(
    x: TokenMatrix, layout: PartitionLayout
) -> tuple[list[DestinationSet], float]:
    """Per-region selection plus the summed facility-location value."""
    parts = gather_regions(x, layout)
    dests: list[DestinationSet] = []
    total = 0.0
    for r, part in enumerate(parts):
        sim = cosine_similarity(part)
        dest = greedy_select(sim, int(layout.d_loc[r]))
        dests.append(dest)
        total += facility_location_value(sim, dest)
    return dests, total


def merge_weights_for(
    x: TokenMatrix,
    layout: PartitionLayout,
    dests: list[DestinationSet],
    cfg: MergeConfig,
    dest_rows: list[np.ndarray] | None = None,
) -> list[MergeWeights]:
    """Attention merge weights per region; dest_rows optionally freezes queries."""
    if len(dests) != layout.regions:
        raise DataError("destination list does not match layout regions")
    parts = gather_regions(x, layout)
    rows = dest_rows if dest_rows is not None else [None] * layout.regions
    return [
        attention_merge_weights(
            part,
            dests[r],
            tau=cfg.tau,
            scale_by_sqrt_d=cfg.scale_by_sqrt_d,
            cosine_logits=cfg.cosine_logits,
            dest_rows=rows[r],
        )
        for r, part in enumerate(parts)
    ]


def merge_concat(
    x: TokenMatrix, layout: PartitionLayout, weights: list[MergeWeights]
) -> TokenMatrix:
    """Merge every region and stack the results into one D_total x d matrix."""
    parts = gather_regions(x, layout)
    merged = [apply_merge(w, part) for w, part in zip(weights, parts)]
    return TokenMatrix(np.concatenate([m.data for m in merged], axis=0))


def unmerge_scatter(
    merged: TokenMatrix,
    layout: PartitionLayout,
    weights: list[MergeWeights],
    unmerge_method: str = "transpose",
) -> TokenMatrix:
    """Split the merged matrix by region budgets, unmerge each, scatter to slots."""
    if unmerge_method not in UNMERGE_METHODS:
        raise DataError(f"unknown unmerge method {unmerge_method!r}")
    if merged.n != layout.d_total:
        raise DataError("merged rows do not match the layout's total budget")
    blocks = np.split(merged.data, np.cumsum(layout.d_loc)[:-1])
    restore = unmerge_transpose if unmerge_method == "transpose" else unmerge_pinv
    parts = [restore(w, TokenMatrix(block)) for w, block in zip(weights, blocks)]
    return scatter_regions(parts, layout)


def local_pipeline(
    x: TokenMatrix,
    layout: PartitionLayout,
    cfg: MergeConfig | None = None,
    core=None,
    unmerge_method: str = "transpose",
) -> TokenMatrix:
    """Select, merge, run the core transform once, unmerge, and reassemble.

    core is any callable mapping a (D_total, d) float array to an array of the
    same shape; None means identity.
    """
    cfg = cfg or MergeConfig()
    dests = select_destinations(x, layout)
    weights = merge_weights_for(x, layout, dests, cfg)
    merged = merge_concat(x, layout, weights)
    if core is not None:
        y = np.asarray(core(merged.data), dtype=np.float32)
        if y.shape != merged.data.shape:
            raise DataError("core transform changed the merged shape")
        merged = TokenMatrix(y)
    return unmerge_scatter(merged, layout, weights, unmerge_method)
