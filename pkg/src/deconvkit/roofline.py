"""Roofline design-space exploration over output/input tiling factors."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import IndivisibleTiling, InvalidConfig, NoFeasibleDesign
from .quant import MULTIPLIER_BITS
from .shapes import LayerConfig, TileConfig, input_tile_extent

MODES = ("paper_exact", "generalized")


@dataclass(frozen=True)
class PlatformConfig:
    dsp_count: int
    bram_bits: int
    bandwidth: float  # elements per cycle
    pd: int = 10
    ii: int = 2
    bitwidth: int = 12

    def __post_init__(self):
        for name in ("dsp_count", "bram_bits", "bandwidth", "pd", "ii", "bitwidth"):
            if not getattr(self, name) > 0:
                raise InvalidConfig(f"platform {name} must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "PlatformConfig":
        known = ("dsp_count", "bram_bits", "bandwidth", "pd", "ii", "bitwidth")
        unknown = set(d) - set(known)
        if unknown:
            raise InvalidConfig(f"unknown platform fields {sorted(unknown)}")
        try:
            return cls(**{k: d[k] for k in known if k in d})
        except TypeError as e:
            raise InvalidConfig(str(e)) from None

    def to_dict(self) -> dict:
        return {"dsp_count": self.dsp_count, "bram_bits": self.bram_bits,
                "bandwidth": self.bandwidth, "pd": self.pd, "ii": self.ii,
                "bitwidth": self.bitwidth}


@dataclass(frozen=True)
class BufferSizes:
    b_in: int
    b_w: int
    b_out: int

    @property
    def total(self) -> int:
        return self.b_in + self.b_w + self.b_out


@dataclass(frozen=True)
class TripCounts:
    a_out: int
    a_in: int
    a_w: int


@dataclass(frozen=True)
class Feasibility:
    dsp_ok: bool
    bram_ok: bool
    bounds_ok: bool
    reasons: tuple[str, ...] = ()

    @property
    def feasible(self) -> bool:
        return self.dsp_ok and self.bram_ok and self.bounds_ok


@dataclass(frozen=True)
class DesignPoint:
    tile: TileConfig
    buffers: BufferSizes
    trips: TripCounts
    ctc: float
    cr: float
    attainable: float
    flags: Feasibility

    @property
    def feasible(self) -> bool:
        return self.flags.feasible


def buffer_sizes(layer: LayerConfig, tile: TileConfig) -> BufferSizes:
    """On-chip buffer elements; input rows/cols are ceil((t + k) / s)."""
    b_in = (tile.t_ic * input_tile_extent(tile.t_oh, layer.s, layer.k)
            * input_tile_extent(tile.t_ow, layer.s, layer.k))
    b_w = tile.t_oc * tile.t_ic * layer.k ** 2
    b_out = tile.t_oc * tile.t_oh * tile.t_ow
    return BufferSizes(b_in, b_w, b_out)


def is_divisible(layer: LayerConfig, tile: TileConfig) -> bool:
    """Tilings the closed-form trip counts cover without ceilings."""
    return (layer.o_c % tile.t_oc == 0 and layer.o_h % tile.t_oh == 0
            and tile.t_ow == layer.o_w)


def trip_counts(layer: LayerConfig, tile: TileConfig, mode: str = "generalized") -> TripCounts:
    if mode == "paper_exact":
        if not is_divisible(layer, tile):
            raise IndivisibleTiling(
                f"tile {tile.as_tuple()} needs t_oc | o_c, t_oh | o_h and t_ow = o_w")
        # the row tile spans the full output width, so no o_w / t_ow factor
        a_out = (layer.o_c // tile.t_oc) * (layer.o_h // tile.t_oh)
    elif mode == "generalized":
        a_out = (math.ceil(layer.o_c / tile.t_oc) * math.ceil(layer.o_h / tile.t_oh)
                 * math.ceil(layer.o_w / tile.t_ow))
    else:
        raise ValueError(f"mode must be one of {MODES}")
    a_in = math.ceil(layer.i_c / tile.t_ic) * a_out
    return TripCounts(a_out, a_in, a_in)


def transfers(layer: LayerConfig, tile: TileConfig, mode: str = "generalized") -> int:
    b = buffer_sizes(layer, tile)
    a = trip_counts(layer, tile, mode)
    return a.a_in * b.b_in + a.a_w * b.b_w + a.a_out * b.b_out


def cycles(layer: LayerConfig, tile: TileConfig, platform: PlatformConfig,
           mode: str = "generalized") -> int:
    a = trip_counts(layer, tile, mode)
    return a.a_in * layer.k ** 2 * tile.t_oh * (platform.pd + platform.ii * (tile.t_ow - 1))


def ctc(layer: LayerConfig, tile: TileConfig, mode: str = "generalized") -> float:
    """Operations per element moved to or from external memory."""
    return layer.total_ops() / transfers(layer, tile, mode)


def comp_roof(layer: LayerConfig, tile: TileConfig, platform: PlatformConfig,
              mode: str = "generalized") -> float:
    """Operations per cycle of the pipelined compute engine alone."""
    return layer.total_ops() / cycles(layer, tile, platform, mode)


def check_constraints(layer: LayerConfig, tile: TileConfig, platform: PlatformConfig,
                      mode: str = "generalized") -> Feasibility:
    reasons = []
    dsp_ok = True
    if tile.t_oc * tile.t_ic > platform.dsp_count:
        dsp_ok = False
        reasons.append("dsp-count")
    if platform.bitwidth > MULTIPLIER_BITS:
        dsp_ok = False
        reasons.append("multiplier-width")
    bram_ok = buffer_sizes(layer, tile).total * platform.bitwidth <= platform.bram_bits
    if not bram_ok:
        reasons.append("bram")
    bounds_ok = tile.within(layer)
    if not bounds_ok:
        reasons.append("bounds")
    elif mode == "paper_exact" and not is_divisible(layer, tile):
        bounds_ok = False
        reasons.append("indivisible")
    return Feasibility(dsp_ok, bram_ok, bounds_ok, tuple(reasons))


def evaluate(layer: LayerConfig, tile: TileConfig, platform: PlatformConfig,
             mode: str = "generalized") -> DesignPoint:
    flags = check_constraints(layer, tile, platform, mode)
    # indivisible tiles in paper_exact mode are flagged, and scored with the ceiling counts
    count_mode = mode if mode == "generalized" or is_divisible(layer, tile) else "generalized"
    trips = trip_counts(layer, tile, count_mode)
    c = ctc(layer, tile, count_mode)
    r = comp_roof(layer, tile, platform, count_mode)
    return DesignPoint(tile, buffer_sizes(layer, tile), trips, c, r,
                       min(r, c * platform.bandwidth), flags)


def enumerate_designs(layer: LayerConfig, platform: PlatformConfig,
                      mode: str = "generalized") -> list[DesignPoint]:
    """Every tile in the integer grid bounded by the layer, in lexicographic order."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    return [
        evaluate(layer, TileConfig(t_oh, t_ow, t_oc, t_ic), platform, mode)
        for t_oh in range(1, layer.o_h + 1)
        for t_ow in range(1, layer.o_w + 1)
        for t_oc in range(1, layer.o_c + 1)
        for t_ic in range(1, layer.i_c + 1)
    ]


def _rank_key(pt: DesignPoint):
    return (-pt.attainable, -pt.ctc, pt.buffers.total, pt.tile.as_tuple())


def select_best(points) -> DesignPoint:
    """Highest attainable throughput; ties by ctc, then smaller buffers, then tile."""
    feasible = [pt for pt in points if pt.feasible]
    if not feasible:
        raise NoFeasibleDesign("no design point satisfies the DSP, BRAM and bounds limits")
    return min(feasible, key=_rank_key)
