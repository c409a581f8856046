"""Embedded property suite: fast invariant checks runnable from the CLI.

The sigmoid table used by the PMF check is read from this module's
SIGMOID_TABLE attribute so tests can inject a corrupted copy and verify
the check fails loudly.
"""

from __future__ import annotations

import numpy as np

from .bayer import BayerPattern, NormalizedRaw, demosaic, mosaic
from .isp import bt709_gamma, bt709_gamma_inverse
from .ric import kernels
from .ric._sigmoid_table import SIGMOID_Q16
from .ric.lut import LADDER_IM_Q8, OMEGA_Q16, PROB_TOTAL, isig_from_sigma
from .ric.pyramid import build_pyramid

SIGMOID_TABLE = SIGMOID_Q16  # test hook


def _check_pyramid_rule(rng):
    planes = rng.integers(0, 4096, size=(4, 32, 32)).astype(np.int64)
    levels = build_pyramid(planes)
    for i in range(1, 5):
        if not np.array_equal(levels[i - 1], levels[i][:, ::2, ::2]):
            return False, f"upper-left rule broken between levels {i - 1} and {i}"
    return True, "5 levels satisfy the upper-left rule"


def _check_pmf_normalization(rng):
    table = np.ascontiguousarray(SIGMOID_TABLE)
    n_hi = 252
    cdf = np.empty(n_hi + 1, dtype=np.int64)
    for trial in range(16):
        mu = int(rng.integers(-500, 66000))
        isig = isig_from_sigma(float(rng.uniform(1e-3, 300.0)))
        u = int(rng.choice([0, 2, 16, 64]))
        kernels.build_hi_cdf(cdf, n_hi, 4, mu, isig, u, OMEGA_Q16, LADDER_IM_Q8, table)
        if cdf[0] != 0 or cdf[n_hi] != PROB_TOTAL:
            return False, f"CDF endpoints wrong in trial {trial}"
        if np.any(np.diff(cdf) < 1):
            return False, f"CDF not strictly monotone in trial {trial}"
    # Spot-check the table against the analytic logistic curve.
    idx = np.array([0, 256, 1024, 2048, 4096])
    expected = np.round(65536.0 / (1.0 + np.exp(-idx / 256.0)))
    if np.max(np.abs(table[idx] - expected)) > 1:
        return False, "sigmoid table deviates from the logistic curve"
    return True, "quantized CDFs normalized, strictly monotone, table sane"


def _check_gamma_round_trip(rng):
    grid = np.linspace(0.0, 1.0, 4096)
    err = np.max(np.abs(bt709_gamma_inverse(bt709_gamma(grid)) - grid))
    if err >= 1e-6:
        return False, f"gamma round-trip error {err:.2e}"
    return True, f"gamma round-trip max error {err:.2e}"


def _mosaic_identity(rng):
    from .bayer import RawMeta

    for pattern in BayerPattern:
        meta = RawMeta(pattern=pattern, bit_depth=12, black_lev=64, saturation_lev=4095)
        x = NormalizedRaw(meta=meta, samples=rng.random((16, 16)))
        back = mosaic(demosaic(x), meta)
        if not np.array_equal(back.samples, x.samples):
            return False, f"mosaic(demosaic) not identity for {pattern.value}"
    return True, "mosaic(demosaic(x)) == x for all patterns"


def run_selftest(seed: int = 0) -> dict:
    """Run the embedded checks; returns a deterministic report dict."""
    rng = np.random.default_rng(seed)
    checks = [
        ("pyramid_upper_left_rule", _check_pyramid_rule),
        ("pmf_normalization", _check_pmf_normalization),
        ("gamma_round_trip", _check_gamma_round_trip),
        ("mosaic_identity", _mosaic_identity),
    ]
    results = []
    for name, fn in checks:
        try:
            passed, detail = fn(rng)
        except Exception as exc:  # a crash is a loud failure, not a pass
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        results.append({"name": name, "passed": bool(passed), "detail": detail})
    return {"seed": seed, "passed": all(r["passed"] for r in results), "checks": results}
