"""Scatter (CPU-style) and gather (reverse looping) transposed convolution.

``deconv_reference`` stamps every input pixel times the kernel into the
output and trims the padded border afterwards. ``deconv_reverse`` walks the
output space tile by tile, and for every kernel offset visits only the output
coordinates that receive a contribution (stride hole skipping), so no
overlapping partial sums ever cross a tile boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import InvalidConfig, NonIntegerIndex, ShapeMismatch
from .shapes import LayerConfig, TileConfig

INDEXING_MODES = ("output-space", "untrimmed")


def _check_operands(x: np.ndarray, kernel: np.ndarray, layer: LayerConfig):
    x = np.asarray(x, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    if x.shape != layer.input_dims:
        raise ShapeMismatch(f"input dims {x.shape} != {layer.input_dims}")
    if kernel.shape != layer.kernel_dims:
        raise ShapeMismatch(f"kernel dims {kernel.shape} != {layer.kernel_dims}")
    return x, kernel


def deconv_reference(x, kernel, layer: LayerConfig) -> np.ndarray:
    """Scatter every input pixel times the kernel, then drop the padded border.

    ``x`` is ``[i_c, i_h, i_w]``, ``kernel`` is ``[o_c, i_c, k, k]``; the
    result is ``[o_c, o_h, o_w]`` in float64.
    """
    x, kernel = _check_operands(x, kernel, layer)
    s, k, p = layer.s, layer.k, layer.p
    full_h = s * (layer.i_h - 1) + k
    full_w = s * (layer.i_w - 1) + k
    full = np.zeros((layer.o_c, full_h, full_w))
    # fixed order: channel contraction, then k_h, then k_w
    for kh in range(k):
        for kw in range(k):
            stamp = np.tensordot(kernel[:, :, kh, kw], x, axes=(1, 0))
            full[:, kh:kh + s * layer.i_h:s, kw:kw + s * layer.i_w:s] += stamp
    return full[:, p:p + layer.o_h, p:p + layer.o_w].copy()


def stride_offset(k: int, p: int, s: int) -> int:
    """First output phase f in [0, s) at which kernel index ``k`` contributes.

    Python's ``%`` is already Euclidean for a positive modulus, which matters
    because ``p - k`` is negative for most kernel indices.
    """
    return (s - ((p - k) % s)) % s


def input_index(o: int, k: int, p: int, s: int) -> int:
    num = o + p - k
    if num % s:
        raise NonIntegerIndex(f"(o + p - k) = {num} is not a multiple of s = {s}")
    return num // s


@dataclass(frozen=True)
class Visit:
    """One accelerator visit: an output tile origin and an input-channel block."""

    o_c0: int
    o_h0: int
    o_w0: int
    i_c0: int


@dataclass(frozen=True)
class TiledSchedule:
    layer: LayerConfig
    tile: TileConfig
    visits: tuple[Visit, ...]

    def __len__(self):
        return len(self.visits)

    def __iter__(self):
        return iter(self.visits)

    def n_input_blocks(self) -> int:
        return math.ceil(self.layer.i_c / self.tile.t_ic)

    def output_tiles(self) -> list[tuple[int, int, int]]:
        """Distinct output tile origins in visit order."""
        seen = []
        for v in self.visits:
            origin = (v.o_c0, v.o_h0, v.o_w0)
            if not seen or seen[-1] != origin:
                seen.append(origin)
        return seen


def build_schedule(layer: LayerConfig, tile: TileConfig) -> TiledSchedule:
    """Visit order: output-channel blocks, output rows, output columns, input blocks."""
    tile.validate(layer)
    visits = tuple(
        Visit(oc0, oh0, ow0, ic0)
        for oc0 in range(0, layer.o_c, tile.t_oc)
        for oh0 in range(0, layer.o_h, tile.t_oh)
        for ow0 in range(0, layer.o_w, tile.t_ow)
        for ic0 in range(0, layer.i_c, tile.t_ic)
    )
    return TiledSchedule(layer, tile, visits)


def _phase_coords(origin: int, extent: int, limit: int, tile_len: int,
                  k: int, p: int, s: int, n_in: int, indexing: str):
    """Output coordinates of one tile axis hit by kernel index ``k``, with their inputs.

    The loop runs ceil(tile_len / s) times from the first coordinate congruent
    to the stride offset, mirroring the o_h' loop of the hardware nest.
    """
    f = stride_offset(k, p, s)
    steps = np.arange(-(-tile_len // s))
    if indexing == "output-space":
        # o = s*o' + f in trimmed output coordinates, i = (o + p - k) / s.
        # Written relative to the tile origin so tiles need not start on a stride multiple.
        o = origin + (f - origin) % s + s * steps
        i = (o + p - k) // s
    else:
        # Literal hardware listing: o = s*o' + p + f and i = (o - k) / s. That pair is
        # consistent only in untrimmed coordinates (o_untrimmed = o_trimmed + p);
        # applied to the trimmed output it shifts every write by p. Kept as a
        # negative control for the equivalence checker.
        o = origin + (p + f - origin) % s + s * steps
        i = (o - k) // s
    keep = (o < min(origin + extent, limit)) & (i >= 0) & (i < n_in)
    return o[keep], i[keep]


def iter_gathers(layer: LayerConfig, tile: TileConfig, indexing: str = "output-space"
                 ) -> Iterator[tuple[Visit, int, int, np.ndarray, np.ndarray, np.ndarray, np.ndarray]]:
    """Yield ``(visit, k_h, k_w, o_rows, o_cols, i_rows, i_cols)`` for the reverse loop nest.

    Only stride-aligned output coordinates are produced, and inputs outside the
    feature map (the trimmed border) are skipped.
    """
    if indexing not in INDEXING_MODES:
        raise ValueError(f"indexing must be one of {INDEXING_MODES}")
    sched = build_schedule(layer, tile)
    k, s, p = layer.k, layer.s, layer.p
    for v in sched:
        for kh in range(k):
            rows, irows = _phase_coords(v.o_h0, tile.t_oh, layer.o_h, tile.t_oh,
                                        kh, p, s, layer.i_h, indexing)
            for kw in range(k):
                cols, icols = _phase_coords(v.o_w0, tile.t_ow, layer.o_w, tile.t_ow,
                                            kw, p, s, layer.i_w, indexing)
                yield v, kh, kw, rows, cols, irows, icols


def deconv_reverse(x, kernel, layer: LayerConfig, tile: TileConfig,
                   indexing: str = "output-space") -> np.ndarray:
    """Tiled gather deconvolution; equals ``deconv_reference`` on exact arithmetic.

    Each output tile is accumulated in a local buffer over its input-channel
    blocks and written back once; tiles never add into each other's regions.
    """
    x, kernel = _check_operands(x, kernel, layer)
    tile.validate(layer)
    if not layer.stride_aligned:
        raise InvalidConfig(
            f"output extents ({layer.o_h}, {layer.o_w}) are not multiples of stride {layer.s}")
    out = np.zeros(layer.output_dims)
    n_ic_blocks = math.ceil(layer.i_c / tile.t_ic)
    buf = None
    for v, kh, kw, rows, cols, irows, icols in iter_gathers(layer, tile, indexing):
        oc = slice(v.o_c0, min(v.o_c0 + tile.t_oc, layer.o_c))
        ic = slice(v.i_c0, min(v.i_c0 + tile.t_ic, layer.i_c))
        hs = slice(v.o_h0, min(v.o_h0 + tile.t_oh, layer.o_h))
        ws = slice(v.o_w0, min(v.o_w0 + tile.t_ow, layer.o_w))
        if v.i_c0 == 0 and kh == 0 and kw == 0:
            buf = np.zeros((oc.stop - oc.start, hs.stop - hs.start, ws.stop - ws.start))
        if rows.size and cols.size:
            patch = x[ic][:, irows[:, None], icols[None, :]]
            buf[:, (rows - v.o_h0)[:, None], (cols - v.o_w0)[None, :]] += np.tensordot(
                kernel[oc, ic, kh, kw], patch, axes=(1, 0))
        last_block = v.i_c0 // tile.t_ic == n_ic_blocks - 1
        if last_block and kh == layer.k - 1 and kw == layer.k - 1:
            out[oc, hs, ws] = buf
    return out
