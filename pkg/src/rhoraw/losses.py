"""Loss algebra and discriminator feature extractors for simRAW evaluation.

These are the standalone numerics an external trainer needs: the cycle
reconstruction loss, the latent-variance loss that pushes simRAW samples
apart, least-squares adversarial losses on scalar discriminator scores, and
the two histogram features the discriminators consume (2-D log-chroma and
1-D grayscale).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bayer import RgbImage
from .errors import DegeneratePairError, ShapeError

LATENT_GAP_EPS = 1e-6
GREEN_EPS = 1e-6
CHROMA_BINS = 64
CHROMA_RANGE = (-4.0, 4.0)
GRAY_BINS = 64


@dataclass(frozen=True)
class YuvImage:
    """BT.601 luma plus zero-centered chroma (Cb/Cr scaling, in [-0.5, 0.5])."""

    y: np.ndarray
    u: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class ChromaHistogram2D:
    """Normalized 64x64 histogram over (log R/G, log B/G) in [-4, 4]^2."""

    bins: np.ndarray  # (64, 64), sums to 1 when any pixel counted
    excluded: int  # pixels with G <= eps, counted separately


@dataclass(frozen=True)
class GrayHistogram1D:
    """Normalized 64-bin luma histogram over [0, 1]."""

    bins: np.ndarray


def yuv_from_rgb(image: RgbImage) -> YuvImage:
    r, g, b = image.pixels[..., 0], image.pixels[..., 1], image.pixels[..., 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    u = (b - y) / 1.772
    v = (r - y) / 1.402
    return YuvImage(y=y, u=u, v=v)


def cycle_loss(y_rec: RgbImage, y: RgbImage) -> float:
    """Mean absolute difference over all channel-pixels.

    The mean (rather than a sum) keeps the value resolution-independent;
    constant scaling does not move any argmin.
    """
    if y_rec.pixels.shape != y.pixels.shape:
        raise ShapeError(
            f"shape mismatch: {y_rec.pixels.shape} vs {y.pixels.shape}"
        )
    return float(np.mean(np.abs(y_rec.pixels - y.pixels)))


def var_loss(
    x1: YuvImage,
    x2: YuvImage,
    theta1: float,
    phi1: float,
    theta2: float,
    phi2: float,
) -> float:
    """Negative chroma/luma separation per unit latent gap; always <= 0.

    Distances are RMS over pixels: the chroma term uses the per-pixel
    Euclidean (u, v) difference, the luma term the plain y difference.
    """
    theta_gap = abs(theta1 - theta2)
    phi_gap = abs(phi1 - phi2)
    if theta_gap <= LATENT_GAP_EPS or phi_gap <= LATENT_GAP_EPS:
        raise DegeneratePairError(
            f"latent gaps ({theta_gap:.3g}, {phi_gap:.3g}) below {LATENT_GAP_EPS}"
        )
    chroma_rms = float(np.sqrt(np.mean((x1.u - x2.u) ** 2 + (x1.v - x2.v) ** 2)))
    luma_rms = float(np.sqrt(np.mean((x1.y - x2.y) ** 2)))
    return -chroma_rms / theta_gap - luma_rms / phi_gap


def adv_losses(d_real: float, d_fake: float) -> tuple:
    """Least-squares GAN losses on scalar scores: (generator, discriminator)."""
    if not (np.isfinite(d_real) and np.isfinite(d_fake)):
        raise ValueError("discriminator scores must be finite")
    loss_g = (1.0 - d_fake) ** 2
    loss_d = (1.0 - d_real) ** 2 + d_fake**2
    return float(loss_g), float(loss_d)


def _bin_indices(values: np.ndarray, lo: float, hi: float, nbins: int) -> np.ndarray:
    # Lower-inclusive edges; values at/above the top edge land in the last bin.
    scaled = np.floor((values - lo) / (hi - lo) * nbins)
    return np.clip(scaled, 0, nbins - 1).astype(np.intp)


def chroma_hist(image: RgbImage) -> ChromaHistogram2D:
    """2-D log-chroma histogram; intensity-invariant by construction."""
    r = image.pixels[..., 0].ravel()
    g = image.pixels[..., 1].ravel()
    b = image.pixels[..., 2].ravel()
    keep = g > GREEN_EPS
    excluded = int(np.count_nonzero(~keep))
    bins = np.zeros((CHROMA_BINS, CHROMA_BINS))
    if np.any(keep):
        with np.errstate(divide="ignore"):
            log_rg = np.log(r[keep] / g[keep])
            log_bg = np.log(b[keep] / g[keep])
        lo, hi = CHROMA_RANGE
        iu = _bin_indices(np.nan_to_num(log_rg, nan=lo, neginf=lo, posinf=hi), lo, hi, CHROMA_BINS)
        iv = _bin_indices(np.nan_to_num(log_bg, nan=lo, neginf=lo, posinf=hi), lo, hi, CHROMA_BINS)
        np.add.at(bins, (iu, iv), 1.0)
        bins /= bins.sum()
    return ChromaHistogram2D(bins=bins, excluded=excluded)


def gray_hist(image: RgbImage) -> GrayHistogram1D:
    """1-D luma histogram over [0, 1]."""
    luma = (0.299 * image.pixels[..., 0]
            + 0.587 * image.pixels[..., 1]
            + 0.114 * image.pixels[..., 2]).ravel()
    idx = _bin_indices(luma, 0.0, 1.0, GRAY_BINS)
    bins = np.bincount(idx, minlength=GRAY_BINS).astype(np.float64)
    total = bins.sum()
    if total > 0:
        bins /= total
    return GrayHistogram1D(bins=bins)
