"""Analytic multiplication counts for merged attention.

All quantities are exact rationals (fractions of arbitrary-width ints), so
counts are exact integers whenever the formulas are integral and ratios like
8/3 compare exactly. The keep ratio r means D/N, the fraction of tokens kept.

Per transformer block, counting scalar multiplications:
    c_base    = 4 d^2 N + 2 d N^2          attention at full resolution
    c_attn    = 4 d^2 rN + 2 d r^2 N^2     attention on the merged tokens
    c_sub     = N^2 d                      similarity for destination selection
    c_proj    = c_merge = c_unmerge = r N^2 d
    c_total   = c_attn + c_sub + c_proj + c_merge + c_unmerge
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import DataError

_TILING_NOTE = (
    "Tiling with k regions divides each overhead term by k: the weight-style "
    "terms cost (N/k)(D/k)d per region and there are k regions, summing to "
    "N*D*d/k. A 1/k^2 reduction would require counting a single region only; "
    "this model reports the 1/k sum."
)
_PRACTICAL_NOTE = (
    "speedup_practical counts every overhead term at full price, so it can "
    "fall below 1 at moderate keep ratios even where measured wall-clock "
    "improves; the ratio is reported exactly as the formulas give it."
)


def as_ratio(value) -> Fraction:
    """Exact Fraction from int/str/Fraction; floats go through their decimal repr."""
    if isinstance(value, bool):
        raise DataError("ratio must be a number")
    if isinstance(value, Fraction):
        frac = value
    elif isinstance(value, int):
        frac = Fraction(value)
    elif isinstance(value, float):
        frac = Fraction(str(value))
    elif isinstance(value, str):
        try:
            frac = Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise DataError(f"cannot parse ratio {value!r}") from exc
    else:
        raise DataError("ratio must be a number")
    return frac


@dataclass(frozen=True)
class CostParams:
    """Shape of one attention block: sequence length, dim, keep ratio, tile count."""

    n: int
    d: int
    r: Fraction
    tiles: int = 1

    def __post_init__(self):
        object.__setattr__(self, "r", as_ratio(self.r))
        if self.n < 1 or self.d < 1 or self.tiles < 1:
            raise DataError("n, d, and tiles must be at least 1")
        if not 0 < self.r <= 1:
            raise DataError("keep ratio must lie in (0, 1]")
        if self.r * self.n < 1:
            raise DataError("keep ratio keeps less than one token")


def _num(value: Fraction):
    """Fraction to JSON scalar: int when integral, float otherwise."""
    if value.denominator == 1:
        return int(value)
    return float(value)


@dataclass(frozen=True)
class FlopReport:
    """Evaluated cost terms (multiplication counts) and speedup ratios."""

    params: CostParams
    c_base: Fraction
    c_attn: Fraction
    c_sub: Fraction
    c_proj: Fraction
    c_merge: Fraction
    c_unmerge: Fraction
    c_lin: Fraction
    c_total: Fraction
    speedup_ideal: Fraction
    speedup_practical: Fraction
    analytic_bound: Fraction
    tiled_c_sub: Fraction
    tiled_c_proj: Fraction
    tiled_c_merge: Fraction
    tiled_c_unmerge: Fraction
    tiled_c_total: Fraction
    tiled_speedup_practical: Fraction
    notes: tuple[str, ...]

    def as_dict(self, with_adds: bool = False) -> dict:
        counts = {
            "c_base": self.c_base,
            "c_attn": self.c_attn,
            "c_sub": self.c_sub,
            "c_proj": self.c_proj,
            "c_merge": self.c_merge,
            "c_unmerge": self.c_unmerge,
            "c_lin": self.c_lin,
            "c_total": self.c_total,
            "tiled_c_sub": self.tiled_c_sub,
            "tiled_c_proj": self.tiled_c_proj,
            "tiled_c_merge": self.tiled_c_merge,
            "tiled_c_unmerge": self.tiled_c_unmerge,
            "tiled_c_total": self.tiled_c_total,
        }
        out = {
            "unit": "multiplications",
            "params": {
                "n": self.params.n,
                "d": self.params.d,
                "r": float(self.params.r),
                "r_exact": str(self.params.r),
                "tiles": self.params.tiles,
            },
            **{k: _num(v) for k, v in counts.items()},
            "speedup_ideal": float(self.speedup_ideal),
            "speedup_practical": float(self.speedup_practical),
            "tiled_speedup_practical": float(self.tiled_speedup_practical),
            "analytic_bound": float(self.analytic_bound),
            "notes": list(self.notes),
        }
        if with_adds:
            out["with_adds"] = {
                "unit": "flops (multiply + add, 2x multiplications)",
                **{k: _num(2 * v) for k, v in counts.items()},
            }
        return out


def analytic_bound(r) -> Fraction:
    """Large-N speedup limit 2 / (2 r^2 + 1)."""
    ratio = as_ratio(r)
    if not 0 < ratio <= 1:
        raise DataError("keep ratio must lie in (0, 1]")
    return Fraction(2) / (2 * ratio**2 + 1)


def cost_report(params: CostParams) -> FlopReport:
    """Evaluate every cost term and speedup ratio for the given shape."""
    n = Fraction(params.n)
    d = Fraction(params.d)
    r = params.r
    k = Fraction(params.tiles)

    c_base = 4 * d**2 * n + 2 * d * n**2
    c_attn = 4 * d**2 * r * n + 2 * d * r**2 * n**2
    c_sub = n**2 * d
    c_proj = r * n**2 * d
    c_merge = c_proj
    c_unmerge = c_proj
    c_lin = c_proj + c_merge + c_unmerge
    c_total = c_attn + c_sub + c_lin
    tiled_c_sub = c_sub / k
    tiled_c_proj = c_proj / k
    tiled_c_merge = c_merge / k
    tiled_c_unmerge = c_unmerge / k
    tiled_c_total = c_attn + tiled_c_sub + tiled_c_proj + tiled_c_merge + tiled_c_unmerge
    return FlopReport(
        params=params,
        c_base=c_base,
        c_attn=c_attn,
        c_sub=c_sub,
        c_proj=c_proj,
        c_merge=c_merge,
        c_unmerge=c_unmerge,
        c_lin=c_lin,
        c_total=c_total,
        speedup_ideal=c_base / c_attn,
        speedup_practical=c_base / c_total,
        analytic_bound=analytic_bound(r),
        tiled_c_sub=tiled_c_sub,
        tiled_c_proj=tiled_c_proj,
        tiled_c_merge=tiled_c_merge,
        tiled_c_unmerge=tiled_c_unmerge,
        tiled_c_total=tiled_c_total,
        tiled_speedup_practical=c_base / tiled_c_total,
        notes=(_TILING_NOTE, _PRACTICAL_NOTE),
    )


@dataclass(frozen=True)
class LimitCheck:
    """speedup_practical next to its large-N approximation over a length grid."""

    n_grid: tuple[int, ...]
    practical: tuple[Fraction, ...]
    approximation: tuple[Fraction, ...]
    gaps: tuple[Fraction, ...]

    def as_dict(self) -> dict:
        return {
            "n_grid": list(self.n_grid),
            "speedup_practical": [float(v) for v in self.practical],
            "approximation": [float(v) for v in self.approximation],
            "abs_gap": [float(v) for v in self.gaps],
        }


def speedup_limit_check(d: int, r, n_grid) -> LimitCheck:
    """Evaluate practical speedup and (2 + 4d/N) / (2r^2 + 1 + 3r) over n_grid.

    The grid must be strictly ascending with every entry at least d; the
    absolute gap between the two sequences shrinks as N grows.
    """
    ratio = as_ratio(r)
    grid = [int(v) for v in n_grid]
    if not grid:
        raise DataError("n_grid must be non-empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise DataError("n_grid must be strictly ascending")
    if any(v < d for v in grid):
        raise DataError("every n_grid entry must be at least d")
    denom = 2 * ratio**2 + 1 + 3 * ratio
    practical = []
    approximation = []
    for n in grid:
        report = cost_report(CostParams(n=n, d=d, r=ratio))
        practical.append(report.speedup_practical)
        approximation.append((2 + Fraction(4 * d, n)) / denom)
    gaps = tuple(abs(p - a) for p, a in zip(practical, approximation))
    return LimitCheck(
        n_grid=tuple(grid),
        practical=tuple(practical),
        approximation=tuple(approximation),
        gaps=gaps,
    )
