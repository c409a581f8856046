"""rhoraw: RAW-domain imaging toolkit.

Subpackages cover the RAW container and Bayer operations (:mod:`rhoraw.bayer`,
:mod:`rhoraw.fileio`), the unrolled forward ISP (:mod:`rhoraw.isp`), the
inverse ISP with sampled illumination priors (:mod:`rhoraw.invisp`), training
loss algebra (:mod:`rhoraw.losses`), RAW pixel-distribution analyses
(:mod:`rhoraw.rawstats`), and the progressive lossless codec
(:mod:`rhoraw.ric`).
"""

from .bayer import (
    BayerPattern,
    BayerRaw,
    NormalizedRaw,
    PlaneStack,
    RawMeta,
    RgbImage,
    demosaic,
    denormalize,
    mosaic,
    normalize,
    stack,
    unstack,
)
from .errors import RhoRawError

__version__ = "0.1.0"

__all__ = [
    "BayerPattern",
    "BayerRaw",
    "NormalizedRaw",
    "PlaneStack",
    "RawMeta",
    "RgbImage",
    "RhoRawError",
    "demosaic",
    "denormalize",
    "mosaic",
    "normalize",
    "stack",
    "unstack",
    "__version__",
]
