"""Coordinate space contraction and the clip/quantize/dequantize pipeline."""

from dataclasses import dataclass

import numpy as np


def contract(x):
    """Sign-preserving logarithmic contraction: sign(x) * ln(1 + |x|)."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.log1p(np.abs(x))


def expand(x_log):
    """Inverse of contract: sign(x) * (exp(|x|) - 1). Raises on overflow."""
    x_log = np.asarray(x_log, dtype=np.float64)
    with np.errstate(over="raise"):
        try:
            out = np.sign(x_log) * np.expm1(np.abs(x_log))
        except FloatingPointError:
            raise ValueError("expand overflow: input magnitude too large") from None
    if not np.all(np.isfinite(out)):
        raise ValueError("expand overflow: input magnitude too large")
    return out


def quantize(values, clip_min, clip_max, levels):
    """Clamp to [clip_min, clip_max] and round to one of ``levels`` indices.

    The affine position in the clip range is rounded half-away-from-zero,
    so index = floor(v' * (levels - 1) + 0.5) with v' in [0, 1].
    """
    if levels < 2:
        raise ValueError("levels must be >= 2")
    if not clip_min < clip_max:
        raise ValueError("clip_min must be below clip_max")
    values = np.clip(np.asarray(values, dtype=np.float64), clip_min, clip_max)
    unit = (values - clip_min) / (clip_max - clip_min)
    return np.floor(unit * (levels - 1) + 0.5).astype(np.int64)


def dequantize(indices, clip_min, clip_max, levels):
    """Map indices in [0, levels-1] back to the clip range."""
    if levels < 2:
        raise ValueError("levels must be >= 2")
    if not clip_min < clip_max:
        raise ValueError("clip_min must be below clip_max")
    indices = np.asarray(indices)
    if indices.size and (indices.min() < 0 or indices.max() > levels - 1):
        raise ValueError(f"index out of range [0, {levels - 1}]")
    return clip_min + indices.astype(np.float64) / (levels - 1) * (clip_max - clip_min)


@dataclass(frozen=True)
class AttributeQuant:
    """Quantization contract for one attribute plane group.

    ``clip_min``/``clip_max`` of None means the range is taken from the
    data (per channel) and recorded in the bundle manifest. ``space``
    names the domain the values are quantized in.
    """

    levels: int
    clip_min: float | None = None
    clip_max: float | None = None
    space: str = "raw"
    codec: str = "png"

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError("levels must be >= 2")
        if (self.clip_min is None) != (self.clip_max is None):
            raise ValueError("clip_min and clip_max must be set together")
        if self.clip_min is not None and not self.clip_min < self.clip_max:
            raise ValueError("clip_min must be below clip_max")

    @property
    def bit_depth(self):
        return 16 if self.levels > 256 else 8

    @property
    def data_driven(self):
        return self.clip_min is None


def default_quant_spec(codec="png"):
    """Per-attribute quantization defaults.

    Fixed clip ranges cover roughly the 1st-99th percentile of trained
    scenes; positions (contracted) and log-scales use data-driven ranges.
    """
    return {
        "position": AttributeQuant(2 ** 14, space="contracted", codec=codec),
        "sh_dc": AttributeQuant(2 ** 8, -2.0, 4.0, codec=codec),
        "sh_rest": AttributeQuant(2 ** 5, -1.0, 1.0, codec=codec),
        "opacity": AttributeQuant(2 ** 6, -6.0, 12.0, codec=codec),
        "scale": AttributeQuant(2 ** 6, space="log", codec=codec),
        "rotation": AttributeQuant(2 ** 6, -1.0, 2.0, codec=codec),
    }
