import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from deconvkit.errors import DegenerateSamples, DegenerateVariance, DimMismatch, TooFewSamples
from deconvkit.network import random_weights, toy_network
from deconvkit.quant import FixedPointFormat
from deconvkit.stats import (argmax_rows, bitwidth_sweep, full_precision_training, kernel_matrix,
                             median_heuristic, mmd2_unbiased, normal_cdf, rbf_kernel, rmmd_pvalue)
from oracles import mmd2_loops


def test_rbf_values():
    assert rbf_kernel([1.0, 2.0], [1.0, 2.0], 0.7) == 1.0
    assert rbf_kernel([0.0], [1.0], 1.0) == pytest.approx(0.6065306597126334, abs=1e-12)
    assert rbf_kernel([0.0], [1e3], 1.0) == 0.0
    assert rbf_kernel([0.0], [40.0], 10.0) > 0
    with pytest.raises(DimMismatch):
        rbf_kernel([0.0], [1.0, 2.0], 1.0)


def test_normal_cdf():
    assert normal_cdf(0.0) == 0.5
    assert normal_cdf(1.959963984540054) == pytest.approx(0.975, abs=1e-12)
    assert normal_cdf(-8.0) == pytest.approx(6.22096057427178e-16, rel=1e-9)


def test_median_heuristic():
    assert median_heuristic([[0.0], [1.0], [2.0]]) == 1.0
    assert median_heuristic([[0.0], [3.0]]) == 3.0
    # more than half the pairs coincide: fall back to the smallest nonzero distance
    assert median_heuristic([[0.0], [0.0], [0.0], [0.0], [2.0]]) == 2.0
    with pytest.raises(DegenerateSamples):
        median_heuristic([[1.0, 1.0]] * 4)


def test_mmd_examples():
    assert mmd2_unbiased([[5.0, 1.0]] * 2, [[5.0, 1.0]] * 2, 1.3) == 0.0
    assert mmd2_unbiased([[0.0], [1.0]], [[0.0], [1.0]], 1.0) == pytest.approx(
        math.exp(-0.5) - 1, abs=1e-12)
    with pytest.raises(TooFewSamples):
        mmd2_unbiased([[0.0]], [[0.0], [1.0]], 1.0)
    with pytest.raises(DimMismatch):
        mmd2_unbiased([[0.0], [1.0]], [[0.0, 1.0], [1.0, 1.0]], 1.0)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (4, 2), elements=st.floats(-3, 3)),
       arrays(np.float64, (3, 2), elements=st.floats(-3, 3)),
       st.floats(0.2, 4.0))
def test_mmd_matches_loops(X, Y, sigma):
    assert mmd2_unbiased(X, Y, sigma) == pytest.approx(mmd2_loops(X, Y, sigma), abs=1e-12)


def test_mmd_same_distribution_large_sample():
    rng = np.random.default_rng(0)
    X, Y = rng.normal(size=(500, 3)), rng.normal(size=(500, 3))
    assert abs(mmd2_unbiased(X, Y, median_heuristic(np.vstack([X, Y])))) < 0.02


def test_mmd_null_mean():
    vals = []
    for t in range(200):
        rng = np.random.default_rng(1000 + t)
        X, Y = rng.normal(size=(100, 4)), rng.normal(size=(100, 4))
        vals.append(mmd2_unbiased(X, Y, 2.0))
    assert abs(np.mean(vals)) < 0.02


def test_kernel_matrix_psd():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(12, 3))
    K = kernel_matrix(X, X, 1.1)
    np.testing.assert_array_equal(K, K.T)
    np.linalg.cholesky(K + 1e-10 * np.eye(len(K)))


def test_rmmd_identical_candidates():
    rng = np.random.default_rng(2)
    X, Y = rng.normal(size=(30, 2)), rng.normal(size=(25, 2))
    res = rmmd_pvalue(X, Y, Y.copy(), n_bootstrap=50)
    assert res.p == 0.5
    assert res.mmd_xy == res.mmd_xz


def test_rmmd_swap_antisymmetry():
    rng = np.random.default_rng(3)
    X, Y, Z = rng.normal(size=(40, 3)), rng.normal(0.3, 1, (35, 3)), rng.normal(size=(30, 3))
    a = rmmd_pvalue(X, Y, Z, n_bootstrap=60, seed=5)
    b = rmmd_pvalue(X, Z, Y, n_bootstrap=60, seed=5)
    assert a.p + b.p == pytest.approx(1.0, abs=1e-9)
    assert (a.var_xy, a.var_xz, a.cov_xyxz) == (b.var_xz, b.var_xy, b.cov_xyxz)
    assert a.p < 0.5  # Y is shifted away from X


def test_rmmd_detects_far_candidate():
    rng = np.random.default_rng(4)
    X, Y, Z = rng.normal(size=(200, 2)), rng.normal(size=(200, 2)), rng.normal(5, 1, (200, 2))
    res = rmmd_pvalue(X, Y, Z, seed=1)
    assert res.p > 0.99
    assert res.mmd_xy < res.mmd_xz


def test_rmmd_degenerate_variance():
    X = np.array([[0.0], [0.0], [0.0]])
    Y = np.array([[1.0], [1.0]])
    Z = np.array([[2.0], [2.0]])
    with pytest.raises(DegenerateVariance):
        rmmd_pvalue(X, Y, Z, sigma=1.0, n_bootstrap=20)


def test_rmmd_reproducible():
    rng = np.random.default_rng(5)
    X, Y, Z = (rng.normal(size=(20, 2)) for _ in range(3))
    assert rmmd_pvalue(X, Y, Z, seed=3) == rmmd_pvalue(X, Y, Z, seed=3)


@pytest.fixture(scope="module")
def toy():
    net = toy_network()
    w = random_weights(net, seed=1)
    return net, w, full_precision_training(net, w, 60, seed=1000)


def test_sweep_high_precision_is_coin_flip(toy):
    net, w, X = toy
    rows = bitwidth_sweep(net, w, X, [FixedPointFormat(32, 26)], 60, 7, {32: (1.0, 1.0)},
                          n_bootstrap=100)
    assert abs(rows[0].p - 0.5) < 0.05


def test_sweep_cost_columns_and_argmax(toy):
    net, w, X = toy
    cost = {6: (2.0, 3.0), 12: (4.0, 0.5)}
    rows = bitwidth_sweep(net, w, X, [6, 12], 40, 7, cost, n_bootstrap=50)
    for r in rows:
        assert r.p_per_cost == r.p / cost[r.bits][0]
        assert r.p_times_merit == r.p * cost[r.bits][1]
    const = bitwidth_sweep(net, w, X, [6, 12], 40, 7, {6: (1.0, 1.0), 12: (1.0, 1.0)},
                           n_bootstrap=50)
    best = argmax_rows(const)
    assert best["p_per_cost"] == best["p"] == best["p_times_merit"]
    single = bitwidth_sweep(net, w, X, [10], 40, 7, {10: (3.0, 2.0)}, n_bootstrap=50)
    assert set(argmax_rows(single).values()) == {single[0]}
    with pytest.raises(KeyError):
        bitwidth_sweep(net, w, X, [8], 40, 7, {6: (1.0, 1.0)})
