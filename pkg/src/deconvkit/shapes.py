"""Layer/tile configuration and the shape arithmetic of transposed convolution."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidConfig, InvalidTile, NonPositiveOutput


def output_extent(i: int, k: int, s: int, p: int) -> int:
    """Spatial extent produced by a transposed convolution along one axis."""
    o = s * (i - 1) + k - 2 * p
    if o < 1:
        raise NonPositiveOutput(
            f"output extent {o} < 1 for input={i}, k={k}, s={s}, p={p}")
    return o


@dataclass(frozen=True)
class LayerConfig:
    """One deconvolution layer: input volume, kernel, stride and padding."""

    i_c: int
    i_h: int
    i_w: int
    o_c: int
    k: int
    s: int = 1
    p: int = 0

    def __post_init__(self):
        for name in ("i_c", "i_h", "i_w", "o_c", "k", "s"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise InvalidConfig(f"{name} must be an integer >= 1, got {v!r}")
        if not isinstance(self.p, int) or self.p < 0:
            raise InvalidConfig(f"p must be an integer >= 0, got {self.p!r}")
        if self.p >= self.k:
            raise InvalidConfig(f"padding p={self.p} must be smaller than k={self.k}")
        # raises NonPositiveOutput
        output_extent(self.i_h, self.k, self.s, self.p)
        output_extent(self.i_w, self.k, self.s, self.p)

    @property
    def o_h(self) -> int:
        return output_extent(self.i_h, self.k, self.s, self.p)

    @property
    def o_w(self) -> int:
        return output_extent(self.i_w, self.k, self.s, self.p)

    @property
    def input_dims(self) -> tuple[int, int, int]:
        return (self.i_c, self.i_h, self.i_w)

    @property
    def output_dims(self) -> tuple[int, int, int]:
        return (self.o_c, self.o_h, self.o_w)

    @property
    def kernel_dims(self) -> tuple[int, int, int, int]:
        return (self.o_c, self.i_c, self.k, self.k)

    @property
    def stride_aligned(self) -> bool:
        """True when both output extents are multiples of the stride."""
        return self.o_h % self.s == 0 and self.o_w % self.s == 0

    def total_ops(self) -> int:
        """Multiply and add count of the full scatter, border work included."""
        return 2 * self.i_c * self.o_c * self.i_h * self.i_w * self.k ** 2

    def to_dict(self) -> dict:
        return {"i_c": self.i_c, "i_h": self.i_h, "i_w": self.i_w, "o_c": self.o_c,
                "k": self.k, "s": self.s, "p": self.p}

    @classmethod
    def from_dict(cls, d: dict) -> "LayerConfig":
        try:
            return cls(**{f: d[f] for f in ("i_c", "i_h", "i_w", "o_c", "k", "s", "p")})
        except KeyError as e:
            raise InvalidConfig(f"layer description lacks field {e}") from None


@dataclass(frozen=True, order=True)
class TileConfig:
    """Output tile (t_oh x t_ow x t_oc) plus the input-channel block t_ic."""

    t_oh: int
    t_ow: int
    t_oc: int
    t_ic: int

    def __post_init__(self):
        for name in ("t_oh", "t_ow", "t_oc", "t_ic"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise InvalidTile(f"{name} must be an integer >= 1, got {v!r}")

    @classmethod
    def full(cls, layer: LayerConfig) -> "TileConfig":
        return cls(layer.o_h, layer.o_w, layer.o_c, layer.i_c)

    def within(self, layer: LayerConfig) -> bool:
        return (self.t_oh <= layer.o_h and self.t_ow <= layer.o_w
                and self.t_oc <= layer.o_c and self.t_ic <= layer.i_c)

    def validate(self, layer: LayerConfig) -> None:
        if not self.within(layer):
            raise InvalidTile(
                f"tile {self.as_tuple()} exceeds layer bounds "
                f"(o_h={layer.o_h}, o_w={layer.o_w}, o_c={layer.o_c}, i_c={layer.i_c})")

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.t_oh, self.t_ow, self.t_oc, self.t_ic)


def output_shape(layer: LayerConfig) -> tuple[int, int]:
    return layer.o_h, layer.o_w


def tile_output_extent(t_ih: int, s: int, k: int) -> int:
    """Output rows produced by deconvolving t_ih input rows in isolation (no padding)."""
    return s * (t_ih - 1) + k


def input_tile_extent(t_oh: int, s: int, k: int) -> int:
    """Input rows an on-chip buffer must hold to serve a t_oh-row output tile."""
    return -(-(t_oh + k) // s)


def overlap_excess(layer: LayerConfig, t_ih: int) -> int:
    """Rows by which independently deconvolved input tiles overrun the true output.

    Positive values are the overlap that a scatter-tiled implementation would
    have to sum across tiles. Negative values occur only when k < s, where
    neighbouring tiles leave gaps instead of overlapping.
    """
    if not 1 <= t_ih <= layer.i_h:
        raise InvalidTile(f"t_ih={t_ih} outside [1, {layer.i_h}]")
    n_tiles = math.ceil(layer.i_h / t_ih)
    return n_tiles * tile_output_extent(t_ih, layer.s, layer.k) - layer.o_h
