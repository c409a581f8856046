"""Progressive lossless RAW image codec."""

from .codec import (
    EncodeStats,
    available_scales,
    decode,
    encode,
    entropy_loss,
    parse_header,
    symbol_pyramid,
)
from .context import ContextModel, fit_context, static_context
from .logistic import LogisticMixture, logistic_pmf, mixture_pmf
from .pyramid import build_pyramid, pad_planes

__all__ = [
    "EncodeStats",
    "ContextModel",
    "LogisticMixture",
    "available_scales",
    "build_pyramid",
    "decode",
    "encode",
    "entropy_loss",
    "fit_context",
    "logistic_pmf",
    "mixture_pmf",
    "pad_planes",
    "parse_header",
    "static_context",
    "symbol_pyramid",
]
