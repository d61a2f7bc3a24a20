import pytest
from hypothesis import given, strategies as st

from deconvkit.errors import InvalidConfig, InvalidTile, NonPositiveOutput
from deconvkit.shapes import (LayerConfig, TileConfig, output_extent, output_shape,
                              overlap_excess, tile_output_extent)


def layer(i_h=2, s=2, k=4, p=1, i_c=1, o_c=1, i_w=None):
    return LayerConfig(i_c, i_h, i_h if i_w is None else i_w, o_c, k, s, p)


@pytest.mark.parametrize("i_h,s,k,p,expected", [
    (2, 2, 4, 1, 4),  # 10x2x2 -> 64x4x4 layer
    (7, 1, 1, 0, 7),
    (4, 2, 4, 1, 8),
])
def test_output_shape(i_h, s, k, p, expected):
    assert output_shape(layer(i_h, s, k, p)) == (expected, expected)


def test_non_positive_output():
    with pytest.raises(NonPositiveOutput):
        output_extent(1, 2, 1, 1)
    with pytest.raises(NonPositiveOutput):
        LayerConfig(1, 1, 1, 1, k=2, s=1, p=1)


@pytest.mark.parametrize("kwargs", [
    dict(i_c=0, i_h=1, i_w=1, o_c=1, k=1), dict(i_c=1, i_h=1, i_w=1, o_c=1, k=2, p=2),
    dict(i_c=1, i_h=1, i_w=1, o_c=1, k=1, s=0), dict(i_c=1, i_h=1, i_w=1, o_c=1, k=1, p=-1),
])
def test_layer_rejects_bad_fields(kwargs):
    with pytest.raises(InvalidConfig):
        LayerConfig(**kwargs)


def test_tile_bounds():
    lay = LayerConfig(10, 2, 2, 64, 4, 2, 1)
    TileConfig(4, 4, 64, 10).validate(lay)
    with pytest.raises(InvalidTile):
        TileConfig(5, 4, 64, 10).validate(lay)
    with pytest.raises(InvalidTile):
        TileConfig(0, 1, 1, 1)
    assert TileConfig.full(lay).as_tuple() == (4, 4, 64, 10)


@pytest.mark.parametrize("t_ih,s,k,expected", [(1, 2, 4, 4), (2, 2, 4, 6), (3, 1, 1, 3)])
def test_tile_output_extent(t_ih, s, k, expected):
    assert tile_output_extent(t_ih, s, k) == expected


def test_overlap_excess_examples():
    assert overlap_excess(layer(2, 2, 4, 1), 1) == 4
    assert overlap_excess(layer(4, 2, 4, 1), 2) == 4
    assert overlap_excess(layer(4, 2, 4, 1), 4) == 2


layers = st.builds(
    lambda i_h, s, k, p: (i_h, s, k, p % k),
    st.integers(1, 12), st.integers(1, 4), st.integers(1, 7), st.integers(0, 6),
).filter(lambda t: t[1] * (t[0] - 1) + t[2] - 2 * t[3] >= 1)


@given(layers, st.data())
def test_overlap_excess_nonnegative_when_kernel_covers_stride(t, data):
    i_h, s, k, p = t
    lay = layer(i_h, s, k, p)
    t_ih = data.draw(st.integers(1, i_h))
    if k >= s:
        assert overlap_excess(lay, t_ih) >= 0
    assert overlap_excess(lay, i_h) == 2 * p


@given(layers)
def test_output_shape_monotone(t):
    i_h, s, k, p = t
    o = output_extent(i_h, k, s, p)
    assert output_extent(i_h + 1, k, s, p) > o
    assert output_extent(i_h, k + 1, s, p) > o
    if p >= 1:
        assert output_extent(i_h, k, s, p - 1) > o


@given(st.integers(1, 30), st.integers(1, 30))
def test_identity_shape(h, w):
    lay = LayerConfig(3, h, w, 5, k=1, s=1, p=0)
    assert output_shape(lay) == (h, w)
