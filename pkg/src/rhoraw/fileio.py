"""Container file I/O: the .braw RAW container and 16-bit binary PPM.

.braw layout (little-endian):

    offset  size  field
    0       4     magic "BRAW"
    4       1     version (= 1)
    5       1     pattern code (0 RGGB, 1 BGGR, 2 GRBG, 3 GBRG, 4 RYYB)
    6       1     bit depth (8..16)
    7       1     reserved (= 0)
    8       4     width  (u32)
    12      4     height (u32)
    16      2     black level (u16)
    18      2     saturation level (u16)
    20      -     payload: width*height u16 samples, row-major

PPM output is binary P6 with maxval 65535 (big-endian sample bytes, per the
PPM specification).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .bayer import BayerPattern, BayerRaw, RawMeta, RgbImage
from .errors import FileFormatError

BRAW_MAGIC = b"BRAW"
BRAW_VERSION = 1
_BRAW_HEADER = struct.Struct("<4sBBBBIIHH")


def write_braw(path, raw: BayerRaw) -> None:
    meta = raw.meta
    header = _BRAW_HEADER.pack(
        BRAW_MAGIC,
        BRAW_VERSION,
        meta.pattern.code,
        meta.bit_depth,
        0,
        raw.width,
        raw.height,
        meta.black_lev,
        meta.saturation_lev,
    )
    payload = raw.samples.astype("<u2").tobytes()
    Path(path).write_bytes(header + payload)


def read_braw(path) -> BayerRaw:
    data = Path(path).read_bytes()
    if len(data) < _BRAW_HEADER.size:
        raise FileFormatError(f"{path}: too short for a .braw header")
    magic, version, pattern_code, bit_depth, _res, width, height, black, sat = (
        _BRAW_HEADER.unpack_from(data)
    )
    if magic != BRAW_MAGIC:
        raise FileFormatError(f"{path}: bad magic {magic!r}")
    if version != BRAW_VERSION:
        raise FileFormatError(f"{path}: unsupported version {version}")
    expected = _BRAW_HEADER.size + 2 * width * height
    if len(data) != expected:
        raise FileFormatError(
            f"{path}: payload size mismatch (got {len(data)} bytes, want {expected})"
        )
    samples = np.frombuffer(data, dtype="<u2", offset=_BRAW_HEADER.size)
    samples = samples.reshape(height, width).astype(np.uint16)
    meta = RawMeta(
        pattern=BayerPattern.from_code(pattern_code),
        bit_depth=bit_depth,
        black_lev=black,
        saturation_lev=sat,
    )
    return BayerRaw(meta=meta, samples=samples)


def write_ppm(path, image: RgbImage) -> None:
    arr = np.clip(image.pixels, 0.0, 1.0)
    data = np.floor(arr * 65535.0 + 0.5).astype(">u2")
    header = f"P6\n{image.width} {image.height}\n65535\n".encode("ascii")
    Path(path).write_bytes(header + data.tobytes())


def _ppm_tokens(data: bytes):
    """Yield whitespace-separated header tokens, skipping # comments."""
    pos = 0
    while True:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FileFormatError("unexpected end of PPM header")
        yield data[start:pos].decode("ascii"), pos


def read_ppm(path) -> RgbImage:
    data = Path(path).read_bytes()
    tokens = _ppm_tokens(data)
    magic, _ = next(tokens)
    if magic != "P6":
        raise FileFormatError(f"{path}: not a binary PPM (magic {magic!r})")
    try:
        width, _ = next(tokens)
        height, _ = next(tokens)
        maxval, end = next(tokens)
        width, height, maxval = int(width), int(height), int(maxval)
    except (StopIteration, ValueError) as exc:
        raise FileFormatError(f"{path}: malformed PPM header") from exc
    if maxval not in (255, 65535):
        raise FileFormatError(f"{path}: unsupported maxval {maxval}")
    offset = end + 1  # single whitespace byte after maxval
    dtype = ">u2" if maxval == 65535 else np.uint8
    count = width * height * 3
    pixels = np.frombuffer(data, dtype=dtype, offset=offset, count=count)
    if pixels.size != count:
        raise FileFormatError(f"{path}: truncated PPM payload")
    pixels = pixels.reshape(height, width, 3).astype(np.float64) / maxval
    return RgbImage(pixels=pixels)
