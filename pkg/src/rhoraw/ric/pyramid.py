"""Dyadic plane pyramid with the upper-left anchoring rule.

Level i-1 is level i subsampled by 2 in each direction, so
x_{i-1}[p, q] == x_i[2p, 2q] exactly and the decoder can fill every
anchor pixel by copying its parent.  Five levels (x_0 .. x_4) require
plane dimensions divisible by 16; callers pad first (symmetric
reflection) and record the original size.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError

N_SCALES = 4  # refinements x_0 -> x_4
PAD_MULTIPLE = 1 << N_SCALES

# Coded positions inside each 2x2 group, in coding order; (0, 0) is the
# anchor copied from the parent level.
GROUP_POSITIONS = ((0, 1), (1, 0), (1, 1))


def pad_plane_size(n: int) -> int:
    return ((n + PAD_MULTIPLE - 1) // PAD_MULTIPLE) * PAD_MULTIPLE


def pad_planes(planes: np.ndarray) -> np.ndarray:
    """Symmetric-pad (4, h, w) planes up to multiples of 16 per axis."""
    _, h, w = planes.shape
    ph, pw = pad_plane_size(h), pad_plane_size(w)
    if (ph, pw) == (h, w):
        return planes
    return np.pad(planes, ((0, 0), (0, ph - h), (0, pw - w)), mode="symmetric")


def build_pyramid(planes: np.ndarray) -> list:
    """Levels [x_0, ..., x_4] of a (4, H, W) stack; x_4 is the input.

    Pure subsampling, so the upper-left rule holds exactly by construction.
    """
    _, h, w = planes.shape
    if h % PAD_MULTIPLE or w % PAD_MULTIPLE:
        raise ShapeError(
            f"plane dims must be divisible by {PAD_MULTIPLE}, got {w}x{h}"
        )
    levels = [np.ascontiguousarray(planes)]
    for _ in range(N_SCALES):
        levels.append(np.ascontiguousarray(levels[-1][:, ::2, ::2]))
    return levels[::-1]


def parent_feature_q2(parent: np.ndarray, pos: tuple) -> np.ndarray:
    """Bilinear parent prediction at one group position, in Q2 integers.

    For a parent plane g, the child at (2p + dy, 2q + dx) is predicted by
    the average of the 2 or 4 parent neighbors the position sits between
    (edge-replicated), held as value * 4 to stay integer-exact.
    """
    g = parent.astype(np.int64)
    right = g[:, np.minimum(np.arange(1, g.shape[1] + 1), g.shape[1] - 1)]
    down = g[np.minimum(np.arange(1, g.shape[0] + 1), g.shape[0] - 1), :]
    down_right = down[:, np.minimum(np.arange(1, g.shape[1] + 1), g.shape[1] - 1)]
    dy, dx = pos
    if (dy, dx) == (0, 1):
        return 2 * (g + right)
    if (dy, dx) == (1, 0):
        return 2 * (g + down)
    if (dy, dx) == (1, 1):
        return g + right + down + down_right
    raise ValueError(f"not a coded group position: {pos}")
