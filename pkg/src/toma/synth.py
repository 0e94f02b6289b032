"""Spatially-correlated synthetic token fields with slow temporal drift.

A field is per-channel Gaussian white noise on the (H, W) grid, blurred with
a reflect-padded Gaussian kernel and re-standardized per channel, so tokens
near each other on the grid correlate while the marginal stays unit-variance.
Drift is AR(1): x_{t+1} = sqrt(1 - delta^2) x_t + delta * fresh field,
re-standardized per channel so every emitted step is exactly unit-variance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import DataError
from .tensors import TokenMatrix

_STD_FLOOR = 1e-12


@dataclass(frozen=True)
class SynthConfig:
    grid: tuple[int, int]
    d: int
    smooth_sigma: float = 0.0
    drift: float = 0.0
    steps: int = 1
    seed: int = 0

    def __post_init__(self):
        h, w = (int(v) for v in self.grid)
        if h < 1 or w < 1:
            raise DataError("grid sides must be at least 1")
        object.__setattr__(self, "grid", (h, w))
        if self.d < 1 or self.steps < 1:
            raise DataError("dim and steps must be at least 1")
        if not np.isfinite(self.smooth_sigma) or self.smooth_sigma < 0:
            raise DataError("smooth_sigma must be finite and non-negative")
        if not 0.0 <= self.drift <= 1.0:
            raise DataError("drift must lie in [0, 1]")

    @property
    def n(self) -> int:
        return self.grid[0] * self.grid[1]


def _standardize(field: np.ndarray) -> np.ndarray:
    """Zero mean, unit variance per channel (column) of an (N, d) field."""
    mean = field.mean(axis=0, keepdims=True)
    std = field.std(axis=0, keepdims=True)
    std = np.where(std < _STD_FLOOR, 1.0, std)
    return (field - mean) / std


def _smooth_field(rng: np.random.Generator, cfg: SynthConfig) -> np.ndarray:
    """One (N, d) float64 field: blurred white noise, unit variance per channel."""
    h, w = cfg.grid
    field = rng.standard_normal((cfg.d, h, w))
    if cfg.smooth_sigma > 0:
        field = gaussian_filter(field, sigma=(0, cfg.smooth_sigma, cfg.smooth_sigma), mode="reflect")
    flat = field.reshape(cfg.d, h * w)
    return np.ascontiguousarray(_standardize(flat.T))


def generate_field(cfg: SynthConfig) -> TokenMatrix:
    """Deterministic-by-seed smooth field as a TokenMatrix with the grid attached."""
    rng = np.random.default_rng(cfg.seed)
    return TokenMatrix(_smooth_field(rng, cfg).astype(np.float32), grid=cfg.grid)


def drift_sequence(cfg: SynthConfig) -> list[TokenMatrix]:
    """cfg.steps fields starting at generate_field(cfg), drifting by AR(1) mixing."""
    rng = np.random.default_rng(cfg.seed)
    state = _smooth_field(rng, cfg)
    keep = float(np.sqrt(1.0 - cfg.drift**2))
    out = [TokenMatrix(state.astype(np.float32), grid=cfg.grid)]
    for _ in range(cfg.steps - 1):
        if cfg.drift > 0:
            # the AR mix keeps the population variance, not the sample one;
            # re-standardizing pins every emitted step to unit variance exactly
            state = _standardize(keep * state + cfg.drift * _smooth_field(rng, cfg))
        out.append(TokenMatrix(state.astype(np.float32), grid=cfg.grid))
    return out
