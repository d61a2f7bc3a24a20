"""Signed fixed-point formats and quantized DCNN inference."""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfig, ShapeMismatch
from .network import NetworkSpec, WeightStore, run_layer

MULTIPLIER_BITS = 18
_QFORMAT = re.compile(r"^Q(\d+)\.(\d+)$")


@dataclass(frozen=True)
class FixedPointFormat:
    """Two's-complement fixed point with ``total_bits`` bits, ``frac_bits`` of them fractional."""

    total_bits: int
    frac_bits: int

    def __post_init__(self):
        if not 2 <= self.total_bits <= 32:
            raise InvalidConfig(f"total_bits must be in [2, 32], got {self.total_bits}")
        if not 0 <= self.frac_bits < self.total_bits:
            raise InvalidConfig(
                f"frac_bits must be in [0, {self.total_bits}), got {self.frac_bits}")

    @classmethod
    def parse(cls, text: str) -> "FixedPointFormat":
        m = _QFORMAT.match(text.strip())
        if not m:
            raise InvalidConfig(f"expected a format like 'Q12.8', got {text!r}")
        return cls(int(m.group(1)), int(m.group(2)))

    @classmethod
    def default(cls, total_bits: int) -> "FixedPointFormat":
        # 4 integer bits including sign; formats of 4 bits or fewer are pure integer
        return cls(total_bits, max(0, total_bits - 4))

    def __str__(self):
        return f"Q{self.total_bits}.{self.frac_bits}"

    @property
    def step(self) -> float:
        return 2.0 ** -self.frac_bits

    @property
    def code_min(self) -> int:
        return -(1 << (self.total_bits - 1))

    @property
    def code_max(self) -> int:
        return (1 << (self.total_bits - 1)) - 1

    @property
    def min_value(self) -> float:
        return self.code_min * self.step

    @property
    def max_value(self) -> float:
        return self.code_max * self.step

    @property
    def exceeds_multiplier(self) -> bool:
        """Wider than one DSP multiplier input."""
        return self.total_bits > MULTIPLIER_BITS


@dataclass
class QuantTensor:
    codes: np.ndarray
    fmt: FixedPointFormat
    saturated: int = 0

    @property
    def dims(self) -> tuple[int, ...]:
        return self.codes.shape

    def values(self) -> np.ndarray:
        return self.codes * self.fmt.step


def quantize_array(x, fmt: FixedPointFormat) -> QuantTensor:
    """Round half to even, then saturate into the code range."""
    scaled = np.rint(np.asarray(x, dtype=np.float64) * 2.0 ** fmt.frac_bits)
    saturated = int(np.count_nonzero((scaled < fmt.code_min) | (scaled > fmt.code_max)))
    codes = np.clip(scaled, fmt.code_min, fmt.code_max).astype(np.int64)
    return QuantTensor(codes, fmt, saturated)


def quantize(x: float, fmt: FixedPointFormat) -> int:
    return int(quantize_array(x, fmt).codes)


def dequantize(code, fmt: FixedPointFormat):
    values = np.asarray(code, dtype=np.float64) * fmt.step
    return float(values) if values.ndim == 0 else values


def requantize(x, fmt: FixedPointFormat) -> tuple[np.ndarray, int]:
    """Snap real values onto the format grid; returns (values, saturation count)."""
    q = quantize_array(x, fmt)
    return q.values(), q.saturated


def quantized_infer(net: NetworkSpec, weights: WeightStore, z, fmt: FixedPointFormat,
                    return_stats: bool = False):
    """Forward pass with every parameter and inter-layer activation held in ``fmt``.

    Products and the accumulation for one output element run in float64; the
    result is requantized once when the layer writes it.
    """
    z = np.asarray(z, dtype=np.float64).reshape(-1)
    if z.size != net.latent_dim:
        raise ShapeMismatch(f"latent has {z.size} entries, network expects {net.latent_dim}")
    weights.validate(net)
    stats = {"weights_saturated": 0, "activations_saturated": 0}

    qweights = WeightStore()
    for name, t in weights.tensors.items():
        qweights.tensors[name], sat = requantize(t, fmt)
        stats["weights_saturated"] += sat

    x, sat = requantize(z.reshape(net.input_dims), fmt)
    stats["activations_saturated"] += sat
    for idx, layer in enumerate(net.layers):
        x, sat = requantize(run_layer(layer, idx, qweights, x), fmt)
        stats["activations_saturated"] += sat
    if return_stats:
        return x, stats
    return x
