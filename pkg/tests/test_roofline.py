import random

import pytest
from hypothesis import given, settings, strategies as st

from deconvkit.errors import IndivisibleTiling, NoFeasibleDesign
from deconvkit.fuzz import random_layer, random_tile
from deconvkit.roofline import (BufferSizes, PlatformConfig, buffer_sizes, check_constraints,
                                comp_roof, ctc, cycles, enumerate_designs, evaluate,
                                select_best, trip_counts)
from deconvkit.shapes import LayerConfig, TileConfig
from oracles import best_from_rows

DSE_LAYER = LayerConfig(10, 2, 2, 64, k=4, s=2, p=1)
HAND = LayerConfig(1, 2, 2, 1, k=2, s=2, p=0)
AMPLE = PlatformConfig(dsp_count=220, bram_bits=10 ** 9, bandwidth=1.0, pd=10, ii=2, bitwidth=12)


def test_buffer_sizes():
    assert buffer_sizes(DSE_LAYER, TileConfig(4, 4, 1, 1)).b_in == 16
    unit = LayerConfig(1, 3, 3, 1, k=1, s=1, p=0)
    assert buffer_sizes(unit, TileConfig(1, 1, 1, 1)) == BufferSizes(4, 1, 1)
    assert buffer_sizes(HAND, TileConfig.full(HAND)) == BufferSizes(9, 4, 16)


def test_trip_counts():
    t = trip_counts(DSE_LAYER, TileConfig.full(DSE_LAYER), "paper_exact")
    assert (t.a_out, t.a_in, t.a_w) == (1, 1, 1)
    t = trip_counts(DSE_LAYER, TileConfig(4, 4, 16, 5), "paper_exact")
    assert (t.a_out, t.a_in, t.a_w) == (4, 8, 8)
    g = trip_counts(DSE_LAYER, TileConfig(4, 3, 64, 10), "generalized")
    assert g.a_out == 2
    with pytest.raises(IndivisibleTiling):
        trip_counts(DSE_LAYER, TileConfig(4, 3, 64, 10), "paper_exact")
    with pytest.raises(IndivisibleTiling):
        trip_counts(DSE_LAYER, TileConfig(3, 4, 64, 10), "paper_exact")


def test_hand_ctc_and_cycles():
    tile = TileConfig.full(HAND)
    assert ctc(HAND, tile) == 32 / 29
    assert cycles(HAND, tile, AMPLE) == 256
    assert comp_roof(HAND, tile, AMPLE) == 0.125


def test_ctc_has_no_bitwidth_term():
    tile = TileConfig(2, 4, 8, 5)
    p12 = evaluate(DSE_LAYER, tile, AMPLE)
    p24 = evaluate(DSE_LAYER, tile, PlatformConfig(220, 10 ** 9, 1.0, bitwidth=24))
    assert p12.ctc == p24.ctc


def test_halving_input_block():
    a, b = TileConfig(4, 4, 8, 10), TileConfig(4, 4, 8, 5)
    assert trip_counts(DSE_LAYER, b).a_in == 2 * trip_counts(DSE_LAYER, a).a_in
    assert comp_roof(DSE_LAYER, b, AMPLE) == comp_roof(DSE_LAYER, a, AMPLE) / 2
    # buffer halves as trips double: transfers of in/w unchanged, ctc never improves
    assert ctc(DSE_LAYER, b) <= ctc(DSE_LAYER, a)


def test_single_column_tile_costs_pd_per_row():
    tile = TileConfig(1, 1, 1, 1)
    assert cycles(HAND, tile, AMPLE) == trip_counts(HAND, tile).a_in * 4 * AMPLE.pd


def test_constraints():
    ok = check_constraints(DSE_LAYER, TileConfig(4, 4, 22, 10), AMPLE)
    assert ok.dsp_ok and ok.feasible
    over = check_constraints(DSE_LAYER, TileConfig(4, 4, 23, 10), AMPLE)
    assert not over.dsp_ok and "dsp-count" in over.reasons
    wide = check_constraints(DSE_LAYER, TileConfig(1, 1, 1, 1),
                             PlatformConfig(220, 10 ** 9, 1.0, bitwidth=20))
    assert not wide.dsp_ok and wide.reasons == ("multiplier-width",)
    tight = check_constraints(DSE_LAYER, TileConfig(4, 4, 1, 1), PlatformConfig(220, 100, 1.0))
    assert not tight.bram_ok and "bram" in tight.reasons
    assert not check_constraints(DSE_LAYER, TileConfig(5, 4, 1, 1), AMPLE).bounds_ok
    assert not check_constraints(DSE_LAYER, TileConfig(3, 4, 1, 1), AMPLE, "paper_exact").bounds_ok


def test_enumerate_dse_layer_grid():
    pts = enumerate_designs(DSE_LAYER, AMPLE)
    assert len(pts) == 4 * 4 * 64 * 10
    assert [p.tile for p in pts] == sorted(p.tile for p in pts)
    for p in pts:
        assert p.attainable == min(p.cr, p.ctc * AMPLE.bandwidth)
        assert p.attainable <= p.cr and p.attainable <= p.ctc * AMPLE.bandwidth
    assert len(enumerate_designs(DSE_LAYER, AMPLE, "paper_exact")) == 10240


def test_enumerate_unit_layer():
    unit = LayerConfig(1, 1, 1, 1, k=1, s=1, p=0)
    (pt,) = enumerate_designs(unit, AMPLE)
    assert pt.tile == TileConfig(1, 1, 1, 1)
    assert pt.attainable == min(pt.cr, pt.ctc)


def test_select_best_rules():
    pts = enumerate_designs(DSE_LAYER, AMPLE)
    assert select_best([pts[0]]) is pts[0]
    a = evaluate(DSE_LAYER, TileConfig(2, 4, 8, 5), AMPLE)
    b = evaluate(DSE_LAYER, TileConfig(4, 4, 8, 5), AMPLE)
    hi = a.__class__(a.tile, a.buffers, a.trips, 5.0, 1.0, 1.0, a.flags)
    lo = b.__class__(b.tile, b.buffers, b.trips, 3.0, 1.0, 1.0, b.flags)
    assert select_best([lo, hi]) is hi
    with pytest.raises(NoFeasibleDesign):
        select_best(enumerate_designs(DSE_LAYER, PlatformConfig(220, 1, 1.0)))


def test_select_best_matches_bruteforce_and_permutation():
    pts = enumerate_designs(DSE_LAYER, AMPLE)
    rows = [dict(t_oh=p.tile.t_oh, t_ow=p.tile.t_ow, t_oc=p.tile.t_oc, t_ic=p.tile.t_ic,
                 b_in=p.buffers.b_in, b_w=p.buffers.b_w, b_out=p.buffers.b_out,
                 ctc=p.ctc, attainable=p.attainable, dsp_ok=p.flags.dsp_ok,
                 bram_ok=p.flags.bram_ok, bounds_ok=p.flags.bounds_ok) for p in pts]
    best = select_best(pts)
    brute = best_from_rows(rows)
    assert best.tile.as_tuple() == (brute["t_oh"], brute["t_ow"], brute["t_oc"], brute["t_ic"])
    shuffled = pts[:]
    random.Random(0).shuffle(shuffled)
    assert select_best(shuffled) == best


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_modes_agree_on_divisible_tiles(seed):
    rng = random.Random(seed)
    lay = random_layer(rng, max_dim=6, max_channels=6, stride_aligned=False)
    tile = random_tile(lay, rng)
    tile = TileConfig(next(d for d in range(tile.t_oh, 0, -1) if lay.o_h % d == 0), lay.o_w,
                      next(d for d in range(tile.t_oc, 0, -1) if lay.o_c % d == 0), tile.t_ic)
    assert trip_counts(lay, tile, "paper_exact") == trip_counts(lay, tile, "generalized")


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_halving_input_channel_tile_never_lowers_ctc(seed):
    # a_in * b_in scales with the smallest multiple of t_ic covering i_c
    rng = random.Random(seed)
    lay = random_layer(rng, max_dim=5, max_channels=12, stride_aligned=False)
    tile = random_tile(lay, rng)
    if tile.t_ic % 2:
        tile = TileConfig(tile.t_oh, tile.t_ow, tile.t_oc, max(2, tile.t_ic - 1))
    if tile.t_ic > lay.i_c:
        return
    half = TileConfig(tile.t_oh, tile.t_ow, tile.t_oc, tile.t_ic // 2)
    before, after = ctc(lay, tile), ctc(lay, half)
    if lay.i_c % tile.t_ic == 0:
        assert after == pytest.approx(before, rel=1e-15)
    else:
        assert after >= before * (1 - 1e-15)


def test_halving_input_channel_tile_on_example_layer():
    full = TileConfig(4, 4, 16, 10)
    half = TileConfig(4, 4, 16, 5)
    t_full, t_half = trip_counts(DSE_LAYER, full), trip_counts(DSE_LAYER, half)
    assert (t_half.a_in, t_half.a_w) == (2 * t_full.a_in, 2 * t_full.a_w)
    b = buffer_sizes(DSE_LAYER, full)
    ops = DSE_LAYER.total_ops()
    fixed = ops / (t_half.a_in * b.b_in + t_half.a_w * b.b_w + t_half.a_out * b.b_out)
    assert fixed < ctc(DSE_LAYER, full)
    # with the buffers resized as well the transfer count is unchanged
    assert ctc(DSE_LAYER, half) == ctc(DSE_LAYER, full)
