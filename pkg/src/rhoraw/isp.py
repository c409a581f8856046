"""Unrolled forward ISP: demosaic -> AWB -> brightness -> color matrix -> gamma.

Every stage takes explicit, serializable parameters.  Channel gains go
through a highlight-preserving transform S(x, g): per pixel with BT.601 luma
p and inflection t = 0.9,

    a = (max(p - t, 0) / (1 - t))^2
    effective gain = a * max(g, 1) + (1 - a) * g

so S(x, 1) == x, upscaling gains apply unchanged, and dimming gains fade out
near white instead of darkening saturated pixels.  Values are clamped to
[0, 1] after every stage.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bayer import NormalizedRaw, RgbImage, demosaic
from .errors import EstimationError, InvalidMetadataError

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])  # BT.601
HIGHLIGHT_INFLECTION = 0.9


@dataclass(frozen=True)
class AwbPresets:
    """White-balance gain presets, one (r_gain, b_gain) pair per illuminant."""

    gains: np.ndarray  # (N, 2)

    def __post_init__(self):
        gains = np.atleast_2d(np.asarray(self.gains, dtype=np.float64))
        object.__setattr__(self, "gains", gains)
        n = gains.shape[0]
        if gains.ndim != 2 or gains.shape[1] != 2 or not 1 <= n <= 16:
            raise InvalidMetadataError(f"need 1..16 (r, b) preset pairs, got {gains.shape}")
        if np.any(gains <= 0.25) or np.any(gains >= 4.0):
            raise InvalidMetadataError("preset gains must lie in (0.25, 4.0)")

    def __len__(self):
        return self.gains.shape[0]


@dataclass(frozen=True)
class AwbWeights:
    """Simplex weights over the AWB presets."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64).ravel()
        object.__setattr__(self, "w", w)
        if np.any(w < -1e-12) or abs(w.sum() - 1.0) > 1e-9:
            raise InvalidMetadataError("AWB weights must be nonnegative and sum to 1")


@dataclass(frozen=True)
class CcmPresets:
    """Daylight/night color correction matrices; rows sum to 1."""

    day: np.ndarray
    night: np.ndarray

    def __post_init__(self):
        for name in ("day", "night"):
            m = np.asarray(getattr(self, name), dtype=np.float64)
            object.__setattr__(self, name, m)
            if m.shape != (3, 3):
                raise InvalidMetadataError(f"CCM {name} must be 3x3, got {m.shape}")
            if np.max(np.abs(m.sum(axis=1) - 1.0)) > 1e-6:
                raise InvalidMetadataError(f"CCM {name} rows must sum to 1")
            if abs(np.linalg.det(m)) <= 1e-6:
                raise InvalidMetadataError(f"CCM {name} is singular")


@dataclass(frozen=True)
class IspParams:
    """Complete forward-ISP parameter set."""

    awb: AwbPresets
    awb_weights: AwbWeights
    ccm: CcmPresets
    cc_weights: tuple = (0.5, 0.5)
    brightness_alpha: float = 0.3
    brightness_beta: float = 1.0
    raw_gain: float = 0.0
    gamma: str = "bt709"

    def __post_init__(self):
        if len(self.awb_weights.w) != len(self.awb):
            raise InvalidMetadataError("AWB weight count must match preset count")
        wd, wn = self.cc_weights
        if wd < 0 or wn < 0 or abs(wd + wn - 1.0) > 1e-9:
            raise InvalidMetadataError("cc_weights must be nonnegative and sum to 1")
        if not 0.0 < self.brightness_alpha < 1.0:
            raise InvalidMetadataError("brightness alpha must lie in (0, 1)")
        if self.brightness_beta <= self.brightness_alpha:
            raise InvalidMetadataError("brightness beta must exceed alpha")
        if self.gamma not in ("bt709", "none"):
            raise InvalidMetadataError(f"unknown gamma variant {self.gamma!r}")


def neutral_isp_params() -> IspParams:
    """Identity AWB/CC parameters; useful for cycle tests."""
    return IspParams(
        awb=AwbPresets(gains=np.array([[1.0, 1.0]])),
        awb_weights=AwbWeights(w=np.array([1.0])),
        ccm=CcmPresets(day=np.eye(3), night=np.eye(3)),
    )


def default_isp_params() -> IspParams:
    """A plausible mid-range camera parameterization."""
    day = np.array([[1.06, -0.04, -0.02], [-0.06, 1.12, -0.06], [0.0, -0.10, 1.10]])
    night = np.array([[1.10, -0.06, -0.04], [-0.04, 1.08, -0.04], [-0.02, -0.12, 1.14]])
    return IspParams(
        awb=AwbPresets(gains=np.array([[2.0, 1.5], [1.7, 1.8], [1.3, 2.1]])),
        awb_weights=AwbWeights(w=np.full(3, 1.0 / 3.0)),
        ccm=CcmPresets(day=day, night=night),
    )


def luma_bt601(pixels: np.ndarray) -> np.ndarray:
    return pixels @ LUMA_WEIGHTS


def highlight_safe_scale(pixels: np.ndarray, gains) -> np.ndarray:
    """Apply S(x, g) with a scalar gain or per-channel [r, g, b] gains."""
    gains = np.broadcast_to(np.asarray(gains, dtype=np.float64), (3,))
    p = luma_bt601(pixels)
    a = (np.maximum(p - HIGHLIGHT_INFLECTION, 0.0) / (1.0 - HIGHLIGHT_INFLECTION)) ** 2
    eff = a[..., None] * np.maximum(gains, 1.0) + (1.0 - a)[..., None] * gains
    return pixels * eff


def box_downsample(pixels: np.ndarray, target: int = 128) -> np.ndarray:
    """Area-average an (H, W, C) or (H, W) image down to at most target^2."""
    h, w = pixels.shape[:2]
    out = pixels.astype(np.float64)
    if h > target:
        edges = (np.arange(target + 1) * h) // target
        sums = np.add.reduceat(out, edges[:-1], axis=0)
        out = sums / np.diff(edges).reshape(-1, *([1] * (out.ndim - 1)))
    if w > target:
        edges = (np.arange(target + 1) * w) // target
        sums = np.add.reduceat(out, edges[:-1], axis=1)
        out = sums / np.diff(edges).reshape(1, -1, *([1] * (out.ndim - 2)))
    return out


def awb_gains(presets: AwbPresets, weights: AwbWeights) -> tuple:
    """Mix gain presets: (r_gain, b_gain) = (sum w_i r_i, sum w_i b_i)."""
    r_gain, b_gain = weights.w @ presets.gains
    return float(r_gain), float(b_gain)


def awb_apply(y: RgbImage, presets: AwbPresets, weights: AwbWeights) -> RgbImage:
    """Highlight-preserving white balance with mixed preset gains."""
    r_gain, b_gain = awb_gains(presets, weights)
    out = highlight_safe_scale(y.pixels, [r_gain, 1.0, b_gain])
    return RgbImage(pixels=np.clip(out, 0.0, 1.0))


def _cross2(u: np.ndarray, v: np.ndarray) -> float:
    return float(u[0] * v[1] - u[1] * v[0])


def _convex_hull(points: np.ndarray) -> np.ndarray:
    """Indices of the convex hull (CCW), via the monotone chain."""
    order = np.lexsort((points[:, 1], points[:, 0]))

    def half(indices):
        chain = []
        for i in indices:
            while len(chain) >= 2:
                o, a = points[chain[-2]], points[chain[-1]]
                if _cross2(a - o, points[i] - o) <= 0:
                    chain.pop()
                else:
                    break
            chain.append(i)
        return chain

    lower = half(order)
    upper = half(order[::-1])
    hull = lower[:-1] + upper[:-1]
    return np.array(hull if hull else [order[0]])


def _segment_projection(a: np.ndarray, b: np.ndarray, p: np.ndarray):
    d = b - a
    denom = float(d @ d)
    t = 0.0 if denom == 0.0 else float(np.clip((p - a) @ d / denom, 0.0, 1.0))
    return a + t * d, t


def simplex_weights_for_target(presets: AwbPresets, target) -> AwbWeights:
    """Simplex weights whose mixed gains are the hull point closest to target.

    Deterministic: an exact preset match wins outright, then the lowest-index
    single/pair/triple of presets able to represent the projected point.
    """
    pts = presets.gains
    target = np.asarray(target, dtype=np.float64)
    n = len(presets)
    tol = 1e-9

    def one_hot(i):
        w = np.zeros(n)
        w[i] = 1.0
        return AwbWeights(w=w)

    for i in range(n):
        if np.linalg.norm(pts[i] - target) < tol:
            return one_hot(i)

    hull = _convex_hull(pts)
    if len(hull) >= 3:
        inside = True
        for i in range(len(hull)):
            a, b = pts[hull[i]], pts[hull[(i + 1) % len(hull)]]
            if _cross2(b - a, target - a) < -tol:
                inside = False
                break
    else:
        inside = False

    if inside:
        point = target
    else:
        best, best_d = pts[hull[0]], np.inf
        for i in range(len(hull)):
            a, b = pts[hull[i]], pts[hull[(i + 1) % len(hull)]]
            proj, _ = _segment_projection(a, b, target)
            d = float(np.linalg.norm(proj - target))
            if d < best_d - tol:
                best, best_d = proj, d
        point = best

    for i in range(n):
        if np.linalg.norm(pts[i] - point) < tol:
            return one_hot(i)
    for i in range(n):
        for j in range(i + 1, n):
            proj, t = _segment_projection(pts[i], pts[j], point)
            if np.linalg.norm(proj - point) < tol:
                w = np.zeros(n)
                w[i], w[j] = 1.0 - t, t
                return AwbWeights(w=w)
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                m = np.column_stack([pts[i] - pts[k], pts[j] - pts[k]])
                if abs(np.linalg.det(m)) < 1e-12:
                    continue
                ab = np.linalg.solve(m, point - pts[k])
                coords = np.array([ab[0], ab[1], 1.0 - ab.sum()])
                if np.all(coords >= -1e-9):
                    coords = np.clip(coords, 0.0, None)
                    coords /= coords.sum()
                    w = np.zeros(n)
                    w[[i, j, k]] = coords
                    return AwbWeights(w=w)
    raise EstimationError("could not express hull point as a preset combination")


def awb_estimate_grayworld(y: RgbImage, presets: AwbPresets) -> AwbWeights:
    """Gray-world target gains projected onto the preset hull.

    Estimation runs on a 128x128 box-downsampled proxy; gains that would make
    the channel means equal are g* = (mean G / mean R, mean G / mean B).
    """
    proxy = box_downsample(y.pixels)
    means = proxy.reshape(-1, 3).mean(axis=0)
    if np.any(means <= 0.0):
        raise EstimationError("gray-world estimate needs a nonzero mean per channel")
    target = np.array([means[1] / means[0], means[1] / means[2]])
    return simplex_weights_for_target(presets, target)


def brightness_gain(raw_gain: float, alpha: float = 0.3, beta: float = 1.0) -> float:
    """Range-limited global gain beta + alpha * tanh(raw_gain)."""
    return float(beta + alpha * np.tanh(raw_gain))


def brightness_apply(y: RgbImage, params: IspParams) -> RgbImage:
    gain = brightness_gain(params.raw_gain, params.brightness_alpha, params.brightness_beta)
    out = highlight_safe_scale(y.pixels, gain)
    return RgbImage(pixels=np.clip(out, 0.0, 1.0))


def brightness_estimate(
    y: RgbImage, target_luma: float = 0.5, alpha: float = 0.3, beta: float = 1.0
) -> float:
    """raw_gain whose tanh-limited gain moves mean luma toward the target."""
    proxy = box_downsample(y.pixels)
    mean_luma = float(luma_bt601(proxy).mean())
    if mean_luma <= 0.0:
        raise EstimationError("brightness estimate needs positive mean luma")
    t = np.clip((target_luma / mean_luma - beta) / alpha, -0.999, 0.999)
    return float(np.arctanh(t))


def mixed_ccm(presets: CcmPresets, w_day: float, w_night: float) -> np.ndarray:
    return w_day * presets.day + w_night * presets.night


def cc_apply(y: RgbImage, presets: CcmPresets, w_day: float, w_night: float) -> RgbImage:
    """Apply the mixed color correction matrix per pixel, then clamp."""
    m = mixed_ccm(presets, w_day, w_night)
    out = y.pixels @ m.T
    return RgbImage(pixels=np.clip(out, 0.0, 1.0))


def bt709_gamma(arr: np.ndarray) -> np.ndarray:
    """Opto-electronic transfer: 4.5 L below 0.018, else 1.099 L^0.45 - 0.099."""
    arr = np.asarray(arr, dtype=np.float64)
    lo = arr <= 0.018
    out = np.empty_like(arr)
    out[lo] = 4.5 * arr[lo]
    out[~lo] = 1.099 * np.power(arr[~lo], 0.45) - 0.099
    return out


def bt709_gamma_inverse(arr: np.ndarray) -> np.ndarray:
    """Exact algebraic inverse of :func:`bt709_gamma`."""
    arr = np.asarray(arr, dtype=np.float64)
    lo = arr <= 0.081
    out = np.empty_like(arr)
    out[lo] = arr[lo] / 4.5
    out[~lo] = np.power((arr[~lo] + 0.099) / 1.099, 1.0 / 0.45)
    return out


def gamma_apply(y: RgbImage) -> RgbImage:
    return RgbImage(pixels=np.clip(bt709_gamma(y.pixels), 0.0, 1.0))


def gamma_invert(y: RgbImage) -> RgbImage:
    return RgbImage(pixels=np.clip(bt709_gamma_inverse(y.pixels), 0.0, 1.0))


def isp_forward(x: NormalizedRaw, params: IspParams) -> RgbImage:
    """Full pipeline: demosaic, AWB, brightness, color matrix, gamma."""
    y = demosaic(x)
    y = awb_apply(y, params.awb, params.awb_weights)
    y = brightness_apply(y, params)
    y = cc_apply(y, params.ccm, *params.cc_weights)
    if params.gamma == "bt709":
        y = gamma_apply(y)
    return y


def isp_params_to_dict(params: IspParams) -> dict:
    return {
        "awb": {
            "presets": params.awb.gains.tolist(),
            "weights": params.awb_weights.w.tolist(),
        },
        "brightness": {
            "alpha": params.brightness_alpha,
            "beta": params.brightness_beta,
            "raw_gain": params.raw_gain,
        },
        "cc": {
            "ccm_day": params.ccm.day.tolist(),
            "ccm_night": params.ccm.night.tolist(),
            "weights": list(params.cc_weights),
        },
        "gamma": params.gamma,
    }


def isp_params_from_dict(data: dict) -> IspParams:
    awb = data.get("awb", {})
    brightness = data.get("brightness", {})
    cc = data.get("cc", {})
    base = default_isp_params()
    presets = AwbPresets(gains=np.asarray(awb["presets"])) if "presets" in awb else base.awb
    if "weights" in awb:
        weights = AwbWeights(w=np.asarray(awb["weights"]))
    else:
        weights = AwbWeights(w=np.full(len(presets), 1.0 / len(presets)))
    ccm = (
        CcmPresets(day=np.asarray(cc["ccm_day"]), night=np.asarray(cc["ccm_night"]))
        if "ccm_day" in cc
        else base.ccm
    )
    return IspParams(
        awb=presets,
        awb_weights=weights,
        ccm=ccm,
        cc_weights=tuple(cc.get("weights", (0.5, 0.5))),
        brightness_alpha=brightness.get("alpha", 0.3),
        brightness_beta=brightness.get("beta", 1.0),
        raw_gain=brightness.get("raw_gain", 0.0),
        gamma=data.get("gamma", "bt709"),
    )


def load_isp_params(path) -> IspParams:
    return isp_params_from_dict(json.loads(Path(path).read_text()))


def save_isp_params(path, params: IspParams) -> None:
    Path(path).write_text(json.dumps(isp_params_to_dict(params), indent=2))
