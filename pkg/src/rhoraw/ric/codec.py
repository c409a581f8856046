"""Lossless RAW codec: .ric bitstream assembly, encode/decode, entropy loss.

.ric layout (little-endian):

    0    4   magic "RIC1"
    4    1   version (= 1)
    5    1   profile (0 static, 1 fitted)
    6    1   pattern code
    7    1   bit depth
    8    4   original width (u32)
    12   4   original height (u32)
    16   2   black level (u16)         -- exactly one 16-bit field
    18   2   saturation level (u16)
    20   2   padded plane width (u16)
    22   2   padded plane height (u16)
    24   4   context block length (u32)
    28   -   context block (quantized predictor coefficients)
    ..   40  section table: 5 x (offset u32, payload length u32)
    ..   -   sections 0..4, each payload followed by its CRC32 (u32)

Section 0 is the base level x_0 under the adaptive order-0 model; sections
1..4 each hold one dyadic refinement.  The per-scale offsets let a reader
drop any suffix of the file and still decode every complete scale.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from ..bayer import BayerPattern, BayerRaw, PlaneStack, RawMeta, merge_planes, split_planes
from ..errors import (
    BadMagicError,
    ChecksumError,
    CorruptInputError,
    FileFormatError,
    ShapeError,
    TruncatedStreamError,
)
from . import kernels
from ._sigmoid_table import SIGMOID_Q16
from .context import (
    MPU_ORDER,
    ContextModel,
    class_features_q2,
    fit_context,
    predict_mu_fp,
    static_context,
)
from .lut import LADDER_IM_Q8, OMEGA_Q16, lo_bits_for_span
from .pyramid import GROUP_POSITIONS, N_SCALES, build_pyramid, pad_plane_size, pad_planes

RIC_MAGIC = b"RIC1"
RIC_VERSION = 1
PROFILES = {"static": 0, "fitted": 1}
_HEADER = struct.Struct("<4sBBBBIIHHHHI")
_SECTION_ENTRY = struct.Struct("<II")


@dataclass
class EncodeStats:
    """Rate accounting for one encoded image."""

    payload_bytes: int  # all section payloads, without CRCs
    total_bytes: int  # whole file
    model_bits: float  # sum of -log2(coded mass) over every coded symbol
    coded_pixels: int  # padded pixel count (4 * plane area)
    original_pixels: int

    @property
    def bpp(self) -> float:
        return 8.0 * self.total_bytes / self.original_pixels

    @property
    def payload_bits(self) -> int:
        return 8 * self.payload_bytes


def _mpu_symbol_stream(level: np.ndarray) -> np.ndarray:
    """Base-level symbols in coding order (MPU channel order, raster)."""
    return np.concatenate([level[c].ravel() for c in MPU_ORDER])


def _encode_scale(pyramid, scale_idx, model, span, lo_bits, table, bits_out):
    """Range-code one refinement scale; returns the section payload."""
    parent_level = pyramid[scale_idx]
    child_level = pyramid[scale_idx + 1]
    n_positions = child_level.shape[1] * child_level.shape[2]
    buf = np.zeros(8 * n_positions + 4096, dtype=np.uint8)
    st = np.zeros(3, dtype=np.int64)
    kernels.rc_enc_init(st)
    for pos_idx, pos in enumerate(GROUP_POSITIONS):
        dy, dx = pos
        for channel_idx in MPU_ORDER:
            feats = class_features_q2(child_level, parent_level[channel_idx], channel_idx, pos)
            mu_fp = predict_mu_fp(model, scale_idx, pos_idx, channel_idx, feats)
            syms = np.ascontiguousarray(
                child_level[channel_idx][dy::2, dx::2].ravel().astype(np.int64)
            )
            kernels.encode_pass(
                syms,
                np.ascontiguousarray(mu_fp),
                int(model.isig[scale_idx, pos_idx, channel_idx]),
                int(model.ublend[scale_idx, pos_idx, channel_idx]),
                span,
                lo_bits,
                st,
                buf,
                OMEGA_Q16,
                LADDER_IM_Q8,
                table,
                bits_out,
            )
    size = kernels.rc_enc_flush(st, buf)
    return buf[:size].tobytes()


def _decode_scale(parent_level, scale_idx, model, span, lo_bits, payload, table):
    """Inverse of :func:`_encode_scale`: returns the child level planes."""
    h, w = parent_level.shape[1] * 2, parent_level.shape[2] * 2
    child_level = np.empty((4, h, w), dtype=np.int64)
    child_level[:, ::2, ::2] = parent_level
    buf = np.frombuffer(payload + b"\x00" * 8, dtype=np.uint8)
    st = np.zeros(4, dtype=np.int64)
    kernels.rc_dec_init(st, buf, 0)
    for pos_idx, pos in enumerate(GROUP_POSITIONS):
        dy, dx = pos
        for channel_idx in MPU_ORDER:
            feats = class_features_q2(child_level, parent_level[channel_idx], channel_idx, pos)
            mu_fp = predict_mu_fp(model, scale_idx, pos_idx, channel_idx, feats)
            out = np.empty(mu_fp.size, dtype=np.int64)
            kernels.decode_pass(
                out,
                np.ascontiguousarray(mu_fp),
                int(model.isig[scale_idx, pos_idx, channel_idx]),
                int(model.ublend[scale_idx, pos_idx, channel_idx]),
                span,
                lo_bits,
                st,
                buf,
                OMEGA_Q16,
                LADDER_IM_Q8,
                table,
            )
            child_level[channel_idx][dy::2, dx::2] = out.reshape(h // 2, w // 2)
    return child_level


def symbol_pyramid(raw: BayerRaw):
    """Alphabet symbols (samples - black_lev) as a padded plane pyramid."""
    meta = raw.meta
    syms = raw.samples.astype(np.int64) - meta.black_lev
    if syms.min() < 0 or syms.max() > meta.span:
        raise CorruptInputError(
            "sample outside [black_lev, saturation_lev]; alphabet overflow"
        )
    return build_pyramid(pad_planes(split_planes(syms, meta.pattern)))


def encode(raw: BayerRaw, profile: str = "fitted", table=None):
    """Compress a BayerRaw losslessly; returns (bytes, EncodeStats)."""
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}")
    table = SIGMOID_Q16 if table is None else table
    meta = raw.meta
    span = meta.span
    pyramid = symbol_pyramid(raw)
    planes = pyramid[-1]
    if planes.shape[1] > 0xFFFF or planes.shape[2] > 0xFFFF:
        raise ShapeError("image too large: padded plane dims must fit in 16 bits")
    lo_bits = lo_bits_for_span(span)

    if profile == "fitted":
        model = fit_context(pyramid, span)
    else:
        model = static_context(span)

    bits_out = np.zeros(1, dtype=np.float64)

    # Section 0: adaptive order-0 base level.
    base_syms = np.ascontiguousarray(_mpu_symbol_stream(pyramid[0]))
    buf = np.zeros(8 * base_syms.size + 4096, dtype=np.uint8)
    st = np.zeros(3, dtype=np.int64)
    kernels.rc_enc_init(st)
    kernels.encode_order0(base_syms, span, lo_bits, st, buf, bits_out)
    sections = [buf[: kernels.rc_enc_flush(st, buf)].tobytes()]

    for scale_idx in range(N_SCALES):
        sections.append(
            _encode_scale(pyramid, scale_idx, model, span, lo_bits, table, bits_out)
        )

    ctx_block = model.serialize()
    header = _HEADER.pack(
        RIC_MAGIC,
        RIC_VERSION,
        PROFILES[profile],
        meta.pattern.code,
        meta.bit_depth,
        raw.width,
        raw.height,
        meta.black_lev,
        meta.saturation_lev,
        int(planes.shape[2]),
        int(planes.shape[1]),
        len(ctx_block),
    )
    table_offset = len(header) + len(ctx_block)
    data_start = table_offset + 5 * _SECTION_ENTRY.size
    entries = []
    offset = data_start
    for payload in sections:
        entries.append(_SECTION_ENTRY.pack(offset, len(payload)))
        offset += len(payload) + 4  # payload + crc32
    blob = bytearray()
    blob += header
    blob += ctx_block
    blob += b"".join(entries)
    for payload in sections:
        blob += payload
        blob += struct.pack("<I", zlib.crc32(payload))
    data = bytes(blob)

    stats = EncodeStats(
        payload_bytes=sum(len(s) for s in sections),
        total_bytes=len(data),
        model_bits=float(bits_out[0]),
        coded_pixels=4 * planes.shape[1] * planes.shape[2],
        original_pixels=raw.width * raw.height,
    )
    return data, stats


@dataclass
class RicHeader:
    profile: str
    meta: RawMeta
    width: int
    height: int
    plane_width: int
    plane_height: int
    model: ContextModel
    sections: list  # (offset, length) pairs


def parse_header(data: bytes) -> RicHeader:
    if len(data) < _HEADER.size or data[:4] != RIC_MAGIC:
        raise BadMagicError("not a RIC1 stream")
    (_, version, profile_code, pattern_code, bit_depth, width, height,
     black, sat, pw, ph, ctx_len) = _HEADER.unpack_from(data)
    if version != RIC_VERSION:
        raise BadMagicError(f"unsupported version {version}")
    profile = {v: k for k, v in PROFILES.items()}.get(profile_code)
    if profile is None:
        raise FileFormatError(f"unknown profile code {profile_code}")
    meta = RawMeta(
        pattern=BayerPattern.from_code(pattern_code),
        bit_depth=bit_depth,
        black_lev=black,
        saturation_lev=sat,
    )
    if width == 0 or height == 0 or width % 2 or height % 2:
        raise FileFormatError(f"bad image dimensions {width}x{height}")
    if pw != pad_plane_size(width // 2) or ph != pad_plane_size(height // 2):
        raise FileFormatError("padded plane dimensions inconsistent with image size")
    ctx_start = _HEADER.size
    table_start = ctx_start + ctx_len
    if len(data) < table_start + 5 * _SECTION_ENTRY.size:
        raise TruncatedStreamError(0, "header truncated")
    model = ContextModel.deserialize(data[ctx_start:table_start], meta.span)
    sections = [
        _SECTION_ENTRY.unpack_from(data, table_start + i * _SECTION_ENTRY.size)
        for i in range(5)
    ]
    return RicHeader(
        profile=profile,
        meta=meta,
        width=width,
        height=height,
        plane_width=pw,
        plane_height=ph,
        model=model,
        sections=sections,
    )


def _section_payload(data: bytes, header: RicHeader, scale: int) -> bytes:
    offset, length = header.sections[scale]
    if len(data) < offset + length + 4:
        raise TruncatedStreamError(scale)
    payload = data[offset : offset + length]
    (crc,) = struct.unpack_from("<I", data, offset + length)
    if zlib.crc32(payload) != crc:
        raise ChecksumError(scale)
    return payload


def available_scales(data: bytes, header: RicHeader) -> int:
    """Number of complete scales present (0..5), for truncated streams."""
    count = 0
    for scale in range(5):
        offset, length = header.sections[scale]
        if len(data) < offset + length + 4:
            break
        count += 1
    return count


def decode(data: bytes, max_scale: int = 4, table=None):
    """Decode to a BayerRaw (max_scale=4) or a PlaneStack preview.

    Previews live in the padded plane domain (exactly the encoder's
    pyramid level); the full decode crops padding and restores black_lev.
    """
    if not 0 <= max_scale <= 4:
        raise ValueError("max_scale must be in 0..4")
    table = SIGMOID_Q16 if table is None else table
    header = parse_header(data)
    meta = header.meta
    span = meta.span
    lo_bits = lo_bits_for_span(span)

    payload = _section_payload(data, header, 0)
    base_h, base_w = header.plane_height >> N_SCALES, header.plane_width >> N_SCALES
    base_syms = np.empty(4 * base_h * base_w, dtype=np.int64)
    buf = np.frombuffer(payload + b"\x00" * 8, dtype=np.uint8)
    st = np.zeros(4, dtype=np.int64)
    kernels.rc_dec_init(st, buf, 0)
    kernels.decode_order0(base_syms, span, lo_bits, st, buf)
    level = np.empty((4, base_h, base_w), dtype=np.int64)
    per_plane = base_h * base_w
    for rank, channel_idx in enumerate(MPU_ORDER):
        level[channel_idx] = base_syms[rank * per_plane : (rank + 1) * per_plane].reshape(
            base_h, base_w
        )

    for scale in range(1, max_scale + 1):
        payload = _section_payload(data, header, scale)
        level = _decode_scale(level, scale - 1, header.model, span, lo_bits, payload, table)

    if max_scale < 4:
        return PlaneStack(planes=level.astype(np.uint16))

    half_h, half_w = header.height // 2, header.width // 2
    planes = level[:, :half_h, :half_w]
    mosaic_syms = merge_planes(planes, meta.pattern)
    samples = (mosaic_syms + meta.black_lev).astype(np.uint16)
    return BayerRaw(meta=meta, samples=samples)


def entropy_loss(pyramid, model: ContextModel, table=None) -> float:
    """Model cross-entropy in bits per (padded) full-resolution pixel.

    Runs the same coding passes as :func:`encode` into scratch buffers, so
    the accounting is exactly the distribution the range coder uses
    (including CDF quantization and the adaptive base model).
    """
    table = SIGMOID_Q16 if table is None else table
    span = model.span
    lo_bits = lo_bits_for_span(span)
    bits_out = np.zeros(1, dtype=np.float64)

    base_syms = np.ascontiguousarray(_mpu_symbol_stream(pyramid[0]))
    buf = np.zeros(8 * base_syms.size + 4096, dtype=np.uint8)
    st = np.zeros(3, dtype=np.int64)
    kernels.rc_enc_init(st)
    kernels.encode_order0(base_syms, span, lo_bits, st, buf, bits_out)
    for scale_idx in range(N_SCALES):
        _encode_scale(pyramid, scale_idx, model, span, lo_bits, table, bits_out)

    full = pyramid[-1]
    return float(bits_out[0]) / (4 * full.shape[1] * full.shape[2])
