"""Shared fixtures and synthetic-image helpers."""

import numpy as np
import pytest

from rhoraw.bayer import BayerPattern, BayerRaw, RawMeta

FOUR_PATTERNS = [
    BayerPattern.RGGB,
    BayerPattern.BGGR,
    BayerPattern.GRBG,
    BayerPattern.GBRG,
]
ALL_PATTERNS = FOUR_PATTERNS + [BayerPattern.RYYB]


def make_meta(pattern=BayerPattern.RGGB, bit_depth=12, black_lev=64, saturation_lev=None):
    if saturation_lev is None:
        saturation_lev = (1 << bit_depth) - 1
    return RawMeta(
        pattern=pattern,
        bit_depth=bit_depth,
        black_lev=black_lev,
        saturation_lev=saturation_lev,
    )


def random_raw(rng, width=32, height=32, meta=None):
    meta = meta or make_meta()
    samples = rng.integers(
        meta.black_lev, meta.saturation_lev + 1, size=(height, width), dtype=np.uint16
    )
    return BayerRaw(meta=meta, samples=samples)


@pytest.fixture
def rng():
    return np.random.default_rng(42)
