"""Per-image linear context model driving the mixture parameters.

For every (scale, group position, channel) class the model holds Q16
coefficients mapping the causal context to the predicted mean:

    mu = bias + a_parent * parent_prediction + sum_c a_c * decoded_channel_c

where parent_prediction is the bilinear upsample of the previous pyramid
level and decoded_channel_c are the already-coded channels of the current
scale at the same pixel (the cross-channel dependency chain
g_r -> g_b -> r -> b).  The residual scale and a uniform-blend weight
complete the class.  Coefficients are fitted per image, quantized, and
shipped in the bitstream header, so the decoder evaluates the identical
integer predictor.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..errors import FileFormatError
from .lut import (
    OMEGA_Q16,
    UBLEND_DENOM,
    isig_from_sigma,
    lo_bits_for_span,
    hi_alphabet_size,
)
from .pyramid import GROUP_POSITIONS, N_SCALES, parent_feature_q2

# Channel coding order inside a scale, as indices into the (r, g_r, g_b, b)
# plane stack: g_r first, then g_b, r, b.
MPU_ORDER = (1, 2, 0, 3)
N_CHANNELS = 4
N_POSITIONS = len(GROUP_POSITIONS)
N_FEATURES = 5  # bias, parent, up to three prior channels

MU_SHIFT = 14  # Q16 coeffs x Q2 features -> Q4 mean
STATIC_SIGMA = 2.0
STATIC_UBLEND = 4
UBLEND_CANDIDATES = (0, 1, 2, 4, 8, 16, 32, 48, 60, 64)
RIDGE_WEIGHT = 2.0  # sqrt of the ridge strength toward the parent predictor

_CLASS_STRUCT = struct.Struct("<5qiB")


@dataclass
class ContextModel:
    """Quantized linear predictors for all 48 coding classes."""

    span: int
    coeffs: np.ndarray  # (scales, positions, channels, N_FEATURES) int64, Q16
    isig: np.ndarray  # (scales, positions, channels) int64
    ublend: np.ndarray  # (scales, positions, channels) uint8

    @property
    def shape(self):
        return (N_SCALES, N_POSITIONS, N_CHANNELS)

    def serialize(self) -> bytes:
        chunks = []
        for s in range(N_SCALES):
            for p in range(N_POSITIONS):
                for c in range(N_CHANNELS):
                    chunks.append(
                        _CLASS_STRUCT.pack(
                            *(int(x) for x in self.coeffs[s, p, c]),
                            int(self.isig[s, p, c]),
                            int(self.ublend[s, p, c]),
                        )
                    )
        return b"".join(chunks)

    @classmethod
    def deserialize(cls, data: bytes, span: int) -> "ContextModel":
        expected = _CLASS_STRUCT.size * N_SCALES * N_POSITIONS * N_CHANNELS
        if len(data) != expected:
            raise FileFormatError(
                f"context block is {len(data)} bytes, expected {expected}"
            )
        coeffs = np.zeros((N_SCALES, N_POSITIONS, N_CHANNELS, N_FEATURES), np.int64)
        isig = np.zeros((N_SCALES, N_POSITIONS, N_CHANNELS), np.int64)
        ublend = np.zeros((N_SCALES, N_POSITIONS, N_CHANNELS), np.uint8)
        offset = 0
        for s in range(N_SCALES):
            for p in range(N_POSITIONS):
                for c in range(N_CHANNELS):
                    fields = _CLASS_STRUCT.unpack_from(data, offset)
                    offset += _CLASS_STRUCT.size
                    coeffs[s, p, c] = fields[:N_FEATURES]
                    isig[s, p, c] = fields[N_FEATURES]
                    ublend[s, p, c] = fields[N_FEATURES + 1]
        return cls(span=span, coeffs=coeffs, isig=isig, ublend=ublend)


def _mu_clamp(span: int):
    lo = -(span + 1) * 32
    hi = (span + 1) * 48
    return lo, hi


def class_features_q2(child_planes, parent_plane, channel_idx, pos):
    """Q2 feature columns for one class: bias, parent, prior channels.

    child_planes is the (4, H, W) stack of the current scale with earlier
    channels already final; prior channels are every channel that precedes
    channel_idx in the MPU order.
    """
    dy, dx = pos
    parent_q2 = parent_feature_q2(parent_plane, pos)
    rank = MPU_ORDER.index(channel_idx)
    cols = [np.full(parent_q2.size, 4, np.int64), parent_q2.ravel().astype(np.int64)]
    for prior_rank in range(rank):
        prior_plane = child_planes[MPU_ORDER[prior_rank]]
        cols.append(4 * prior_plane[dy::2, dx::2].ravel().astype(np.int64))
    while len(cols) < N_FEATURES:
        cols.append(np.zeros(parent_q2.size, np.int64))
    return np.stack(cols, axis=1)


def predict_mu_fp(model: ContextModel, scale_idx, pos_idx, channel_idx, features_q2):
    """Integer Q4 mean prediction for a whole pass (vectorized)."""
    a = model.coeffs[scale_idx, pos_idx, channel_idx]
    mu = (features_q2 @ a) >> MU_SHIFT
    lo, hi = _mu_clamp(model.span)
    return np.clip(mu, lo, hi)


def static_context(span: int) -> ContextModel:
    """Profile with no fitting: predict the parent, generic scale."""
    coeffs = np.zeros((N_SCALES, N_POSITIONS, N_CHANNELS, N_FEATURES), np.int64)
    coeffs[..., 1] = 1 << 16  # mu = parent prediction
    isig = np.full((N_SCALES, N_POSITIONS, N_CHANNELS), isig_from_sigma(STATIC_SIGMA), np.int64)
    ublend = np.full((N_SCALES, N_POSITIONS, N_CHANNELS), STATIC_UBLEND, np.uint8)
    return ContextModel(span=span, coeffs=coeffs, isig=isig, ublend=ublend)


def _fit_ublend(residuals, sigma, n_hi, lo_bits):
    """Pick the uniform-blend weight minimizing the hi-part model cost.

    The hi bin containing each residual has width 2^lo_bits symbols; its
    float mixture mass is enough to rank the candidate blends.
    """
    scales = sigma * np.array([0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0])
    weights = OMEGA_Q16 / 65536.0
    half_width = (1 << lo_bits) / 2.0
    r = residuals[:, None]
    upper = 1.0 / (1.0 + np.exp(-np.clip((r + half_width) / scales, -30, 30)))
    lower = 1.0 / (1.0 + np.exp(-np.clip((r - half_width) / scales, -30, 30)))
    pm = np.maximum((upper - lower) @ weights, 1e-30)
    pu = 1.0 / n_hi
    best_u, best_cost = 0, np.inf
    for u in UBLEND_CANDIDATES:
        p = ((UBLEND_DENOM - u) * pm + u * pu) / UBLEND_DENOM
        cost = float(-np.log2(np.maximum(p, 1e-30)).sum())
        if cost < best_cost - 1e-9:
            best_cost, best_u = cost, u
    return best_u


def fit_context(pyramid, span: int, cross_channel: bool = True) -> ContextModel:
    """Least-squares fit of the linear predictors on the encoder's pyramid.

    Deterministic: refitting the same input reproduces the same quantized
    coefficients.  With cross_channel=False the prior-channel columns are
    dropped (the lambda terms disabled), which is the ablation baseline.
    """
    coeffs = np.zeros((N_SCALES, N_POSITIONS, N_CHANNELS, N_FEATURES), np.int64)
    isig = np.zeros((N_SCALES, N_POSITIONS, N_CHANNELS), np.int64)
    ublend = np.zeros((N_SCALES, N_POSITIONS, N_CHANNELS), np.uint8)
    lo_bits = lo_bits_for_span(span)
    n_hi = hi_alphabet_size(span, lo_bits)
    model = ContextModel(span=span, coeffs=coeffs, isig=isig, ublend=ublend)

    for scale_idx in range(N_SCALES):
        parent_level = pyramid[scale_idx]
        child_level = pyramid[scale_idx + 1]
        for pos_idx, pos in enumerate(GROUP_POSITIONS):
            dy, dx = pos
            for rank, channel_idx in enumerate(MPU_ORDER):
                feats = class_features_q2(child_level, parent_level[channel_idx], channel_idx, pos)
                target = child_level[channel_idx][dy::2, dx::2].ravel().astype(np.float64)
                n_used = 2 + (rank if cross_channel else 0)
                cols = feats[:, :n_used].astype(np.float64) / 4.0  # natural units
                # Ridge toward the parent predictor keeps the coarse-scale
                # classes (1..64 samples) from producing wild coefficients.
                prior = np.zeros(n_used)
                prior[1] = 1.0
                aug_cols = np.vstack([cols, RIDGE_WEIGHT * np.eye(n_used)])
                aug_target = np.concatenate([target, RIDGE_WEIGHT * prior])
                sol, *_ = np.linalg.lstsq(aug_cols, aug_target, rcond=None)
                a_q = np.zeros(N_FEATURES, np.int64)
                a_q[:n_used] = np.round(sol * (1 << 16)).astype(np.int64)
                coeffs[scale_idx, pos_idx, channel_idx] = a_q
                mu_fp = predict_mu_fp(model, scale_idx, pos_idx, channel_idx, feats)
                residuals = target - mu_fp.astype(np.float64) / 16.0
                med = np.median(residuals)
                mad = np.median(np.abs(residuals - med))
                sigma = max(mad / np.log(3.0), 1e-3)
                isig[scale_idx, pos_idx, channel_idx] = isig_from_sigma(sigma)
                ublend[scale_idx, pos_idx, channel_idx] = _fit_ublend(
                    residuals, sigma, n_hi, lo_bits
                )
    return model
