"""Bayer mosaic containers, linearization, demosaicing and plane stacking.

All images are numpy arrays: mosaics are (H, W), RGB images are (H, W, 3),
plane stacks are (4, H/2, W/2) in the fixed channel order (r, g_r, g_b, b).
Every operation here is a pure function; inputs are never modified.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.ndimage import convolve

from .errors import InvalidMetadataError, ShapeError

PLANE_ORDER = ("r", "g_r", "g_b", "b")


class BayerPattern(Enum):
    RGGB = "RGGB"
    BGGR = "BGGR"
    GRBG = "GRBG"
    GBRG = "GBRG"
    RYYB = "RYYB"

    @property
    def code(self) -> int:
        return _PATTERN_CODES[self]

    @classmethod
    def from_code(cls, code: int) -> "BayerPattern":
        for pattern, c in _PATTERN_CODES.items():
            if c == code:
                return pattern
        raise InvalidMetadataError(f"unknown Bayer pattern code {code}")

    @classmethod
    def parse(cls, name: str) -> "BayerPattern":
        try:
            return cls(name.upper())
        except ValueError:
            raise InvalidMetadataError(f"unknown Bayer pattern {name!r}") from None


_PATTERN_CODES = {
    BayerPattern.RGGB: 0,
    BayerPattern.BGGR: 1,
    BayerPattern.GRBG: 2,
    BayerPattern.GBRG: 3,
    BayerPattern.RYYB: 4,
}

# (row offset, col offset) of each channel role within the 2x2 tile.
# g_r is the green sample sharing a row with red, g_b the one sharing a row
# with blue.  RYYB is handled positionally: Y samples take the green slots.
_SITE_OFFSETS = {
    BayerPattern.RGGB: {"r": (0, 0), "g_r": (0, 1), "g_b": (1, 0), "b": (1, 1)},
    BayerPattern.BGGR: {"r": (1, 1), "g_r": (1, 0), "g_b": (0, 1), "b": (0, 0)},
    BayerPattern.GRBG: {"r": (0, 1), "g_r": (0, 0), "g_b": (1, 1), "b": (1, 0)},
    BayerPattern.GBRG: {"r": (1, 0), "g_r": (1, 1), "g_b": (0, 0), "b": (0, 1)},
    BayerPattern.RYYB: {"r": (0, 0), "g_r": (0, 1), "g_b": (1, 0), "b": (1, 1)},
}


def site_offsets(pattern: BayerPattern) -> dict:
    """Channel role -> (dy, dx) position inside the 2x2 tile."""
    return dict(_SITE_OFFSETS[pattern])


@dataclass(frozen=True)
class RawMeta:
    """Acquisition metadata attached to every RAW container."""

    pattern: BayerPattern
    bit_depth: int
    black_lev: int
    saturation_lev: int

    def __post_init__(self):
        if not 8 <= self.bit_depth <= 16:
            raise InvalidMetadataError(f"bit depth {self.bit_depth} outside 8..16")
        limit = (1 << self.bit_depth) - 1
        if not 0 <= self.black_lev < self.saturation_lev <= limit:
            raise InvalidMetadataError(
                f"need 0 <= black ({self.black_lev}) < saturation "
                f"({self.saturation_lev}) <= {limit}"
            )

    @property
    def span(self) -> int:
        return self.saturation_lev - self.black_lev


@dataclass(frozen=True)
class BayerRaw:
    """Integer Bayer mosaic plus its acquisition metadata."""

    meta: RawMeta
    samples: np.ndarray  # (H, W) uint16, row-major

    def __post_init__(self):
        samples = np.ascontiguousarray(self.samples, dtype=np.uint16)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 2:
            raise ShapeError(f"mosaic must be 2-D, got shape {samples.shape}")
        h, w = samples.shape
        if h % 2 or w % 2 or h == 0 or w == 0:
            raise ShapeError(f"mosaic dimensions must be even and nonzero, got {w}x{h}")
        limit = (1 << self.meta.bit_depth) - 1
        if samples.max(initial=0) > limit:
            raise InvalidMetadataError(
                f"sample exceeds 2^{self.meta.bit_depth}-1 = {limit}"
            )

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def height(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True)
class NormalizedRaw:
    """Bayer mosaic linearized to [0, 1] floats; metadata kept for round trips."""

    meta: RawMeta
    samples: np.ndarray  # (H, W) float64 in [0, 1]

    def __post_init__(self):
        samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 2 or samples.shape[0] % 2 or samples.shape[1] % 2:
            raise ShapeError(f"mosaic must be 2-D with even dims, got {samples.shape}")
        if samples.size and (samples.min() < 0.0 or samples.max() > 1.0):
            raise ValueError("normalized samples must lie in [0, 1]")

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def height(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True)
class PlaneStack:
    """Four half-resolution planes in the fixed order (r, g_r, g_b, b)."""

    planes: np.ndarray  # (4, H/2, W/2)

    def __post_init__(self):
        planes = np.ascontiguousarray(self.planes)
        object.__setattr__(self, "planes", planes)
        if planes.ndim != 3 or planes.shape[0] != 4:
            raise ShapeError(f"plane stack must be (4, h, w), got {planes.shape}")

    @property
    def plane_width(self) -> int:
        return self.planes.shape[2]

    @property
    def plane_height(self) -> int:
        return self.planes.shape[1]


@dataclass(frozen=True)
class RgbImage:
    """Full-resolution RGB image, channels last, values in [0, 1]."""

    pixels: np.ndarray  # (H, W, 3) float64

    def __post_init__(self):
        pixels = np.ascontiguousarray(self.pixels, dtype=np.float64)
        object.__setattr__(self, "pixels", pixels)
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise ShapeError(f"RGB image must be (H, W, 3), got {pixels.shape}")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def normalize(raw: BayerRaw) -> NormalizedRaw:
    """Linearize integer samples to [0, 1]: (x - black) / (saturation - black)."""
    meta = raw.meta
    x = (raw.samples.astype(np.float64) - meta.black_lev) / meta.span
    np.clip(x, 0.0, 1.0, out=x)
    return NormalizedRaw(meta=meta, samples=x)


def denormalize(x: NormalizedRaw) -> BayerRaw:
    """Exact right inverse of :func:`normalize` on representable values.

    Rounds half away from zero so results do not depend on parity.
    """
    meta = x.meta
    scaled = np.floor(x.samples * meta.span + 0.5) + meta.black_lev
    return BayerRaw(meta=meta, samples=scaled.astype(np.uint16))


def _channel_masks(pattern: BayerPattern, shape) -> dict:
    offsets = _SITE_OFFSETS[pattern]
    masks = {}
    for role in PLANE_ORDER:
        dy, dx = offsets[role]
        m = np.zeros(shape, dtype=np.float64)
        m[dy::2, dx::2] = 1.0
        masks[role] = m
    return masks


_G_KERNEL = np.array([[0, 1, 0], [1, 4, 1], [0, 1, 0]], dtype=np.float64)
_RB_KERNEL = np.array([[1, 2, 1], [2, 4, 2], [1, 2, 1]], dtype=np.float64)


def _interp_same_color(masked: np.ndarray, mask: np.ndarray, kernel: np.ndarray):
    # Edge replication: out-of-bounds taps land on border cells; taps whose
    # mask is zero contribute nothing, so colors never mix and border pixels
    # renormalize over the neighbors that exist.
    num = convolve(masked, kernel, mode="nearest")
    den = convolve(mask, kernel, mode="nearest")
    return num / den


def demosaic(x: NormalizedRaw) -> RgbImage:
    """Bilinear demosaic: upsample each color from its own mosaic sites.

    Known sites are reproduced exactly; missing samples are averages of the
    nearest same-color neighbors (edge replication at borders).  RYYB is
    demosaiced positionally, with the Y samples standing in for green.
    """
    mosaic_arr = x.samples
    masks = _channel_masks(x.meta.pattern, mosaic_arr.shape)

    g_mask = masks["g_r"] + masks["g_b"]
    r = _interp_same_color(mosaic_arr * masks["r"], masks["r"], _RB_KERNEL)
    g = _interp_same_color(mosaic_arr * g_mask, g_mask, _G_KERNEL)
    b = _interp_same_color(mosaic_arr * masks["b"], masks["b"], _RB_KERNEL)

    # Write the measured samples back so known sites are bit-exact (the
    # interpolation reproduces them only up to float rounding).
    offsets = _SITE_OFFSETS[x.meta.pattern]
    for role, plane in (("r", r), ("g_r", g), ("g_b", g), ("b", b)):
        dy, dx = offsets[role]
        plane[dy::2, dx::2] = mosaic_arr[dy::2, dx::2]
    return RgbImage(pixels=np.stack([r, g, b], axis=-1))


def mosaic(y: RgbImage, meta: RawMeta) -> NormalizedRaw:
    """Subsample each channel at its Bayer sites; clamps to [0, 1]."""
    if y.height % 2 or y.width % 2:
        raise ShapeError(f"RGB dimensions must be even, got {y.width}x{y.height}")
    offsets = _SITE_OFFSETS[meta.pattern]
    channel_of = {"r": 0, "g_r": 1, "g_b": 1, "b": 2}
    out = np.empty((y.height, y.width), dtype=np.float64)
    for role in PLANE_ORDER:
        dy, dx = offsets[role]
        out[dy::2, dx::2] = y.pixels[dy::2, dx::2, channel_of[role]]
    np.clip(out, 0.0, 1.0, out=out)
    return NormalizedRaw(meta=meta, samples=out)


def split_planes(mosaic_arr: np.ndarray, pattern: BayerPattern) -> np.ndarray:
    """Rearrange a mosaic into 4 half-size planes (r, g_r, g_b, b); any dtype."""
    if mosaic_arr.shape[0] % 2 or mosaic_arr.shape[1] % 2:
        raise ShapeError(f"mosaic dimensions must be even, got {mosaic_arr.shape}")
    offsets = _SITE_OFFSETS[pattern]
    planes = [mosaic_arr[offsets[role][0]::2, offsets[role][1]::2] for role in PLANE_ORDER]
    return np.ascontiguousarray(np.stack(planes, axis=0))


def merge_planes(planes: np.ndarray, pattern: BayerPattern) -> np.ndarray:
    """Exact inverse of :func:`split_planes`."""
    offsets = _SITE_OFFSETS[pattern]
    h, w = planes.shape[1] * 2, planes.shape[2] * 2
    out = np.empty((h, w), dtype=planes.dtype)
    for idx, role in enumerate(PLANE_ORDER):
        dy, dx = offsets[role]
        out[dy::2, dx::2] = planes[idx]
    return out


def stack(x: NormalizedRaw) -> PlaneStack:
    """Rearrange a normalized mosaic into the 4-channel plane stack."""
    return PlaneStack(planes=split_planes(x.samples, x.meta.pattern))


def unstack(s: PlaneStack, meta: RawMeta) -> NormalizedRaw:
    """Interleave a plane stack back into a mosaic; bit-exact inverse of stack."""
    return NormalizedRaw(meta=meta, samples=merge_planes(s.planes, meta.pattern))
