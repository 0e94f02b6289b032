import numpy as np
import pytest

import toma


@pytest.fixture(scope="session")
def smooth_fields():
    """Thirty smooth 32x32, 16-channel fields; the round-trip comparison corpus."""
    out = []
    for seed in range(30):
        cfg = toma.SynthConfig(grid=(32, 32), d=16, smooth_sigma=2.0, seed=seed)
        out.append(toma.generate_field(cfg))
    return out


@pytest.fixture(scope="session")
def drift_corpus():
    """Thirty drifting 8-step sequences on a 16x16 grid."""
    seqs = []
    for seed in range(30):
        cfg = toma.SynthConfig(grid=(16, 16), d=16, smooth_sigma=2.0,
                               drift=0.15, steps=8, seed=seed)
        seqs.append(toma.drift_sequence(cfg))
    return seqs


@pytest.fixture()
def make_tokens():
    def make(seed, n, d, grid=None):
        rng = np.random.default_rng(seed)
        return toma.TokenMatrix(rng.standard_normal((n, d)).astype(np.float32), grid=grid)

    return make
