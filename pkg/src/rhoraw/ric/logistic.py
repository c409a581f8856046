"""Reference discretized logistic-mixture model (float, normalized domain).

This is the model the coder realizes in fixed point: symbols live on the
integer alphabet [0, s] with s = saturation_lev - black_lev, parameters in
the normalized [0, 1] domain, and the bin mass of symbol x is

    sigmoid((x/s - mu + 1/(2s)) / sigma) - sigmoid((x/s - mu - 1/(2s)) / sigma)

with the two boundary symbols absorbing the tails so the PMF sums to 1
exactly.  Channels are chained g_r -> g_b -> r -> b through the shifted
means mu~ (cross-channel lambda terms).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidMetadataError

SIGMA_MIN = 1e-3
CHANNELS = ("g_r", "g_b", "r", "b")
# Channels whose decoded values each channel's mean may depend on.
CHANNEL_DEPS = {"g_r": (), "g_b": ("g_r",), "r": ("g_r", "g_b"), "b": ("g_r", "g_b", "r")}


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


def logistic_pmf(sym, mu: float, sigma: float, span: int):
    """Discretized logistic bin mass with tails folded into 0 and span."""
    if sigma < SIGMA_MIN:
        raise InvalidMetadataError(f"sigma {sigma} below minimum {SIGMA_MIN}")
    sym = np.asarray(sym)
    if np.any(sym < 0) or np.any(sym > span):
        raise ValueError(f"symbol outside [0, {span}]")
    x = sym / span
    half = 1.0 / (2.0 * span)
    upper = sigmoid((x - mu + half) / sigma)
    lower = sigmoid((x - mu - half) / sigma)
    upper = np.where(sym == span, 1.0, upper)
    lower = np.where(sym == 0, 0.0, lower)
    return upper - lower


@dataclass(frozen=True)
class LogisticMixture:
    """K-component mixture per channel with cross-channel mean shifts.

    weights/means/scales are (4, K) arrays indexed by CHANNELS order; the
    lambda vectors are length K.  span is the integer alphabet top.
    """

    span: int
    weights: np.ndarray
    means: np.ndarray
    scales: np.ndarray
    lam_alpha: np.ndarray = None
    lam_beta: np.ndarray = None
    lam_gamma: np.ndarray = None
    lam_delta: np.ndarray = None
    lam_epsilon: np.ndarray = None
    lam_zeta: np.ndarray = None

    def __post_init__(self):
        k = np.asarray(self.weights).shape[-1]
        for name in ("weights", "means", "scales"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (4, k):
                raise InvalidMetadataError(f"{name} must be (4, K), got {arr.shape}")
            object.__setattr__(self, name, arr)
        if np.any(self.scales < SIGMA_MIN):
            raise InvalidMetadataError(f"scales must be >= {SIGMA_MIN}")
        if np.max(np.abs(self.weights.sum(axis=1) - 1.0)) > 1e-9:
            raise InvalidMetadataError("component weights must sum to 1 per channel")
        for name in ("lam_alpha", "lam_beta", "lam_gamma", "lam_delta",
                     "lam_epsilon", "lam_zeta"):
            lam = getattr(self, name)
            lam = np.zeros(k) if lam is None else np.asarray(lam, dtype=np.float64)
            if lam.shape != (k,):
                raise InvalidMetadataError(f"{name} must have length K")
            object.__setattr__(self, name, lam)

    @property
    def n_components(self) -> int:
        return self.weights.shape[1]


def shifted_means(mixture: LogisticMixture, channel: str, decoded: dict) -> np.ndarray:
    """The mu~ chain building cross-channel dependency (normalized units).

    g_b shares the g_r component means (shifted by lambda_alpha * g_r); the
    r and b channels shift their own means by the previously decoded
    channels.  Raises if a required channel is missing from `decoded`.
    """
    missing = [dep for dep in CHANNEL_DEPS[channel] if dep not in decoded]
    if missing:
        raise InvalidMetadataError(
            f"channel {channel!r} requires decoded {missing} (order g_r, g_b, r, b)"
        )
    ch = CHANNELS.index(channel)
    if channel == "g_r":
        return mixture.means[0]
    if channel == "g_b":
        return mixture.means[0] + mixture.lam_alpha * decoded["g_r"]
    if channel == "r":
        return (
            mixture.means[2]
            + mixture.lam_beta * decoded["g_r"]
            + mixture.lam_gamma * decoded["g_b"]
        )
    return (
        mixture.means[3]
        + mixture.lam_delta * decoded["g_r"]
        + mixture.lam_epsilon * decoded["g_b"]
        + mixture.lam_zeta * decoded["r"]
    )


def mixture_pmf(sym, mixture: LogisticMixture, channel: str, decoded: dict | None = None):
    """PMF of one channel's symbol given previously decoded channel values.

    `decoded` maps channel name -> normalized value (v / span).
    """
    decoded = decoded or {}
    ch = CHANNELS.index(channel)
    mu = shifted_means(mixture, channel, decoded)
    sym = np.asarray(sym)
    out = np.zeros(sym.shape if sym.shape else (), dtype=np.float64)
    for k in range(mixture.n_components):
        out = out + mixture.weights[ch, k] * logistic_pmf(
            sym, float(mu[k]), float(mixture.scales[ch, k]), mixture.span
        )
    return out
