"""Tests for the .braw container and PPM I/O."""

import struct

import numpy as np
import pytest

from rhoraw.bayer import RgbImage
from rhoraw.errors import FileFormatError
from rhoraw.fileio import read_braw, read_ppm, write_braw, write_ppm

from conftest import ALL_PATTERNS, make_meta, random_raw


class TestBraw:
    @pytest.mark.parametrize("pattern", ALL_PATTERNS)
    def test_round_trip(self, tmp_path, rng, pattern):
        raw = random_raw(rng, 12, 8, make_meta(pattern=pattern))
        path = tmp_path / "img.braw"
        write_braw(path, raw)
        back = read_braw(path)
        assert back.meta == raw.meta
        np.testing.assert_array_equal(back.samples, raw.samples)

    def test_header_layout(self, tmp_path, rng):
        raw = random_raw(rng, 6, 4, make_meta(bit_depth=14, black_lev=256, saturation_lev=16000))
        path = tmp_path / "img.braw"
        write_braw(path, raw)
        data = path.read_bytes()
        assert data[:4] == b"BRAW"
        version, pattern, bit_depth, reserved = data[4:8]
        assert (version, pattern, bit_depth, reserved) == (1, 0, 14, 0)
        width, height = struct.unpack_from("<II", data, 8)
        assert (width, height) == (6, 4)
        black, sat = struct.unpack_from("<HH", data, 16)
        assert (black, sat) == (256, 16000)
        assert len(data) == 20 + 2 * 6 * 4

    def test_bad_magic(self, tmp_path, rng):
        raw = random_raw(rng, 4, 4)
        path = tmp_path / "img.braw"
        write_braw(path, raw)
        data = bytearray(path.read_bytes())
        data[:4] = b"XRAW"
        path.write_bytes(bytes(data))
        with pytest.raises(FileFormatError, match="magic"):
            read_braw(path)

    def test_truncated_payload(self, tmp_path, rng):
        raw = random_raw(rng, 4, 4)
        path = tmp_path / "img.braw"
        write_braw(path, raw)
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(FileFormatError, match="size"):
            read_braw(path)


class TestPpm:
    def test_round_trip_16bit(self, tmp_path, rng):
        img = RgbImage(pixels=rng.random((5, 7, 3)))
        path = tmp_path / "img.ppm"
        write_ppm(path, img)
        back = read_ppm(path)
        np.testing.assert_allclose(back.pixels, img.pixels, atol=0.5 / 65535)

    def test_big_endian_maxval(self, tmp_path):
        img = RgbImage(pixels=np.full((2, 2, 3), 1.0))
        path = tmp_path / "white.ppm"
        write_ppm(path, img)
        data = path.read_bytes()
        assert data.startswith(b"P6\n2 2\n65535\n")
        assert data[-2:] == b"\xff\xff"

    def test_reads_comments_and_8bit(self, tmp_path):
        payload = bytes([255, 0, 0] * 4)
        path = tmp_path / "c.ppm"
        path.write_bytes(b"P6\n# a comment\n2 2\n255\n" + payload)
        img = read_ppm(path)
        np.testing.assert_allclose(img.pixels[..., 0], 1.0)
        np.testing.assert_allclose(img.pixels[..., 1:], 0.0)

    def test_rejects_bad_magic(self, tmp_path):
        path = tmp_path / "x.ppm"
        path.write_bytes(b"P5\n2 2\n255\n" + bytes(4))
        with pytest.raises(FileFormatError):
            read_ppm(path)
