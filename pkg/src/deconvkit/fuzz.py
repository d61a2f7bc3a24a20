"""Seeded random layers/tiles and the scatter-vs-gather equivalence fuzzer."""

from __future__ import annotations

import random

import numpy as np

from .deconv import deconv_reference, deconv_reverse
from .errors import InvalidConfig
from .shapes import LayerConfig, TileConfig


def random_layer(rng: random.Random, max_dim: int = 8, max_channels: int = 4,
                 max_stride: int = 3, max_k: int = 5, stride_aligned: bool = True) -> LayerConfig:
    """Rejection-sample an admissible layer with input extents <= max_dim."""
    while True:
        k = rng.randint(1, max_k)
        try:
            layer = LayerConfig(
                i_c=rng.randint(1, max_channels), i_h=rng.randint(1, max_dim),
                i_w=rng.randint(1, max_dim), o_c=rng.randint(1, max_channels),
                k=k, s=rng.randint(1, max_stride), p=rng.randint(0, k - 1))
        except InvalidConfig:
            continue
        if stride_aligned and not layer.stride_aligned:
            continue
        return layer


def random_tile(layer: LayerConfig, rng: random.Random) -> TileConfig:
    return TileConfig(rng.randint(1, layer.o_h), rng.randint(1, layer.o_w),
                      rng.randint(1, layer.o_c), rng.randint(1, layer.i_c))


def random_case(rng: random.Random, max_dim: int = 8, max_channels: int = 4, lo: int = -8,
                hi: int = 8):
    layer = random_layer(rng, max_dim, max_channels)
    tile = random_tile(layer, rng)
    nprng = np.random.default_rng(rng.getrandbits(63))
    x = nprng.integers(lo, hi + 1, size=layer.input_dims).astype(np.float64)
    w = nprng.integers(lo, hi + 1, size=layer.kernel_dims).astype(np.float64)
    return layer, tile, x, w


def run_equivalence(trials: int, seed: int = 0, max_dim: int = 8, max_channels: int = 4,
                    indexing: str = "output-space") -> dict:
    """Compare the tiled gather against the scatter reference on random integer cases.

    Stops at the first mismatch and returns it as a serializable counterexample.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = random.Random(seed)
    for t in range(trials):
        layer, tile, x, w = random_case(rng, max_dim, max_channels)
        ref = deconv_reference(x, w, layer)
        got = deconv_reverse(x, w, layer, tile, indexing=indexing)
        if not np.array_equal(ref, got):
            bad = np.argwhere(ref != got)[0].tolist()
            return {
                "trials": trials, "seed": seed, "passed": t, "ok": False,
                "counterexample": {
                    "trial": t, "layer": layer.to_dict(), "tile": list(tile.as_tuple()),
                    "input": x.astype(int).tolist(), "kernel": w.astype(int).tolist(),
                    "first_mismatch": {"index": bad, "reference": float(ref[tuple(bad)]),
                                       "reverse": float(got[tuple(bad)])},
                },
            }
    return {"trials": trials, "seed": seed, "passed": trials, "ok": True}
