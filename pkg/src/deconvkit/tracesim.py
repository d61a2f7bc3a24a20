"""Loop-level trace of the tiled accelerator: external transfers and cycles.

The simulator walks the visit schedule and the per-visit loop nest directly,
so its counts are an independent check on the closed-form roofline terms.
Loop bounds are static per tile, as in synthesized hardware: an edge tile that
hangs over the feature map still moves full buffers and spends full cycles.
"""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass, field

from . import roofline
from .deconv import build_schedule
from .fuzz import random_tile
from .shapes import LayerConfig, TileConfig


@dataclass
class TraceReport:
    loads_in: int = 0
    loads_w: int = 0
    stores_out: int = 0
    tile_visits: int = 0
    cycles: int = 0
    visit_log: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=False)


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def _footprint(o0: int, t: int, o_limit: int, k: int, s: int, p: int, n_in: int) -> int:
    """Distinct input rows gathered by output rows [o0, o0 + t) of one tile."""
    hi_o = min(o0 + t, o_limit) - 1
    lo = max(0, _ceil_div(o0 + p - k + 1, s))
    hi = min(n_in - 1, (hi_o + p) // s)
    return max(0, hi - lo + 1)


def simulate(layer: LayerConfig, tile: TileConfig, platform: roofline.PlatformConfig,
             log_limit: int = 0) -> TraceReport:
    """Count element transfers and cycles for one layer under one tiling."""
    sched = build_schedule(layer, tile)
    k, s, p = layer.k, layer.s, layer.p
    # on-chip arrays as declared by the kernel: in[t_ic][rows][cols], w[t_oc][t_ic][k][k]
    in_rows = _ceil_div(tile.t_oh + k, s)
    in_cols = _ceil_div(tile.t_ow + k, s)
    in_block = tile.t_ic * in_rows * in_cols
    w_block = tile.t_oc * tile.t_ic * k * k
    out_block = tile.t_oc * tile.t_oh * tile.t_ow
    last_ic0 = ((layer.i_c - 1) // tile.t_ic) * tile.t_ic

    rep = TraceReport()
    for v in sched:
        rows = _footprint(v.o_h0, tile.t_oh, layer.o_h, k, s, p, layer.i_h)
        cols = _footprint(v.o_w0, tile.t_ow, layer.o_w, k, s, p, layer.i_w)
        if rows > in_rows or cols > in_cols:
            raise RuntimeError(f"visit {v} gathers {rows}x{cols} inputs, buffer holds "
                               f"{in_rows}x{in_cols}")
        rep.tile_visits += 1
        rep.loads_in += in_block
        rep.loads_w += w_block
        visit_cycles = 0
        for _kh in range(k):
            for _kw in range(k):
                for _row in range(tile.t_oh):
                    # one pipelined pass over the tile row
                    visit_cycles += platform.pd + platform.ii * (tile.t_ow - 1)
        rep.cycles += visit_cycles
        stored = 0
        if v.i_c0 == last_ic0:
            stored = out_block
            rep.stores_out += out_block
        if len(rep.visit_log) < log_limit:
            rep.visit_log.append({"o_c0": v.o_c0, "o_h0": v.o_h0, "o_w0": v.o_w0,
                                  "i_c0": v.i_c0, "in_rows": rows, "in_cols": cols,
                                  "cycles": visit_cycles, "stored": stored})
    return rep


def divisors(n: int) -> list[int]:
    return [d for d in range(1, n + 1) if n % d == 0]


def random_divisible_tile(layer: LayerConfig, rng: random.Random) -> TileConfig:
    return TileConfig(rng.choice(divisors(layer.o_h)), layer.o_w,
                      rng.choice(divisors(layer.o_c)), rng.randint(1, layer.i_c))


def _rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b) if b else abs(a - b)


def cross_validate(layer: LayerConfig, platform: roofline.PlatformConfig, sample: int,
                   seed: int = 0, mode: str = "generalized", perturb: float = 0.0) -> dict:
    """Max relative gap between analytic and simulated (ctc, cr) over random tiles.

    In ``paper_exact`` mode only divisible tilings are drawn. ``perturb`` scales
    the analytic ctc and exists only as a negative control.
    """
    if sample < 1:
        raise ValueError("sample must be >= 1")
    rng = random.Random(seed)
    ops = layer.total_ops()
    worst = {"deviation": 0.0, "tile": None}
    count_mismatches = 0
    for _ in range(sample):
        tile = (random_divisible_tile(layer, rng) if mode == "paper_exact"
                else random_tile(layer, rng))
        rep = simulate(layer, tile, platform)
        trips = roofline.trip_counts(layer, tile, mode)
        bufs = roofline.buffer_sizes(layer, tile)
        if (rep.loads_in, rep.loads_w, rep.stores_out, rep.tile_visits) != (
                trips.a_in * bufs.b_in, trips.a_w * bufs.b_w, trips.a_out * bufs.b_out,
                trips.a_in):
            count_mismatches += 1
        sim_ctc = ops / (rep.loads_in + rep.loads_w + rep.stores_out)
        sim_cr = ops / rep.cycles
        ana_ctc = roofline.ctc(layer, tile, mode) * (1.0 + perturb)
        ana_cr = roofline.comp_roof(layer, tile, platform, mode)
        dev = max(_rel(ana_ctc, sim_ctc), _rel(ana_cr, sim_cr))
        if dev > worst["deviation"] or worst["tile"] is None:
            worst = {"deviation": dev, "tile": list(tile.as_tuple())}
    return {"mode": mode, "layer": layer.to_dict(), "samples": sample, "seed": seed,
            "max_deviation": worst["deviation"], "worst_tile": worst["tile"],
            "count_mismatches": count_mismatches}
