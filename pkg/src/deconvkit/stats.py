"""Kernel two-sample statistics: RBF kernel, unbiased MMD^2 and the relative MMD test."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .errors import DegenerateSamples, DegenerateVariance, DimMismatch, TooFewSamples
from .network import LatentSampler, NetworkSpec, WeightStore, infer, sample
from .quant import FixedPointFormat, quantized_infer

VARIANCE_FLOOR = 1e-12
DEFAULT_BOOTSTRAP = 200


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def as_sample_set(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise DimMismatch(f"sample set must be 2-D (n x d), got shape {a.shape}")
    return a


def rbf_kernel(x, y, sigma: float) -> float:
    """exp(-||x - y||^2 / (2 sigma^2))."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if x.shape != y.shape:
        raise DimMismatch(f"rows differ in shape: {x.shape} vs {y.shape}")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    d2 = float(np.sum((x - y) ** 2))
    return math.exp(-d2 / (2.0 * sigma ** 2))


def kernel_matrix(X, Y, sigma: float) -> np.ndarray:
    X, Y = as_sample_set(X), as_sample_set(Y)
    if X.shape[1] != Y.shape[1]:
        raise DimMismatch(f"column counts differ: {X.shape[1]} vs {Y.shape[1]}")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return np.exp(-cdist(X, Y, "sqeuclidean") / (2.0 * sigma ** 2))


def median_heuristic(pooled) -> float:
    """Median pairwise distance; smallest nonzero distance if the median is 0."""
    pooled = as_sample_set(pooled)
    if pooled.shape[0] < 2:
        raise TooFewSamples("median heuristic needs at least 2 rows")
    dists = pdist(pooled)
    med = float(np.median(dists))
    if med > 0:
        return med
    nonzero = dists[dists > 0]
    if nonzero.size == 0:
        raise DegenerateSamples("all samples are identical")
    return float(nonzero.min())


def _mmd2_blocks(kxx: np.ndarray, kyy: np.ndarray, kxy: np.ndarray) -> float:
    m, n = kxx.shape[0], kyy.shape[0]
    sxx = (kxx.sum() - np.trace(kxx)) / (m * (m - 1))
    syy = (kyy.sum() - np.trace(kyy)) / (n * (n - 1))
    return float(sxx + syy - 2.0 * kxy.sum() / (m * n))


def _check_sets(*sets):
    sets = [as_sample_set(s) for s in sets]
    d = sets[0].shape[1]
    for s in sets:
        if s.shape[1] != d:
            raise DimMismatch(f"column counts differ: {[t.shape[1] for t in sets]}")
        if s.shape[0] < 2:
            raise TooFewSamples("every sample set needs at least 2 rows")
    return sets


def mmd2_unbiased(X, Y, sigma: float) -> float:
    """Unbiased MMD^2 between two sample sets; may be negative."""
    X, Y = _check_sets(X, Y)
    return _mmd2_blocks(kernel_matrix(X, X, sigma), kernel_matrix(Y, Y, sigma),
                        kernel_matrix(X, Y, sigma))


@dataclass(frozen=True)
class RmmdResult:
    mmd_xy: float
    mmd_xz: float
    var_xy: float
    var_xz: float
    cov_xyxz: float
    p: float
    sigma: float

    def to_dict(self) -> dict:
        return asdict(self)


def _bootstrap_pairs(K, ix, iy_pos, iz_pos):
    kxx = K[np.ix_(ix, ix)]
    xy = _mmd2_blocks(kxx, K[np.ix_(iy_pos, iy_pos)], K[np.ix_(ix, iy_pos)])
    xz = _mmd2_blocks(kxx, K[np.ix_(iz_pos, iz_pos)], K[np.ix_(ix, iz_pos)])
    return xy, xz


def rmmd_pvalue(X, Y, Z, sigma: float | None = None, n_bootstrap: int = DEFAULT_BOOTSTRAP,
                seed: int = 0) -> RmmdResult:
    """Relative MMD test: is Y closer to the reference X than Z is?

    Returns p = Phi(-(MMD2(X,Y) - MMD2(X,Z)) / sd), so p > 0.5 iff Y is closer.
    The variance terms are bootstrap estimates; X rows are resampled once per
    replicate and shared by both statistics so the covariance is meaningful.
    Y and Z resamples are drawn from two independent uniform streams, and each
    replicate is evaluated under both stream assignments and averaged, which
    makes swapping Y and Z give exactly 1 - p.
    """
    X, Y, Z = _check_sets(X, Y, Z)
    if n_bootstrap < 2:
        raise ValueError("n_bootstrap must be >= 2")
    m, n, r = X.shape[0], Y.shape[0], Z.shape[0]
    pooled = np.vstack([X, Y, Z])
    if sigma is None:
        sigma = median_heuristic(pooled)
    K = kernel_matrix(pooled, pooled, sigma)
    ix_all = np.arange(m)
    iy_all = m + np.arange(n)
    iz_all = m + n + np.arange(r)
    mmd_xy, mmd_xz = _bootstrap_pairs(K, ix_all, iy_all, iz_all)

    rng = np.random.default_rng(seed)
    length = max(n, r)
    reps = np.empty((2, n_bootstrap, 2))
    for b in range(n_bootstrap):
        ix = rng.integers(0, m, size=m)
        u1 = rng.random(length)
        u2 = rng.random(length)
        for a, (uy, uz) in enumerate(((u1, u2), (u2, u1))):
            iy = m + np.floor(uy[:n] * n).astype(np.int64)
            iz = m + n + np.floor(uz[:r] * r).astype(np.int64)
            reps[a, b] = _bootstrap_pairs(K, ix, iy, iz)

    def moments(rep):
        a, c = rep[:, 0], rep[:, 1]
        da, dc = a - a.mean(), c - c.mean()
        return (float(np.dot(da, da) / (len(a) - 1)), float(np.dot(dc, dc) / (len(c) - 1)),
                float(np.dot(da, dc) / (len(a) - 1)))

    m0, m1 = moments(reps[0]), moments(reps[1])
    var_xy = 0.5 * (m0[0] + m1[0])
    var_xz = 0.5 * (m0[1] + m1[1])
    cov = 0.5 * (m0[2] + m1[2])
    # var_xy + var_xz is summed before subtracting so swapping Y and Z is bit-exact
    denom = (var_xy + var_xz) - 2.0 * cov
    diff = mmd_xy - mmd_xz
    if denom < VARIANCE_FLOOR:
        if diff == 0.0:
            p = 0.5
        else:
            raise DegenerateVariance(
                f"variance of the MMD difference ({denom:.3g}) is below {VARIANCE_FLOOR}")
    else:
        p = normal_cdf(-diff / math.sqrt(denom))
    return RmmdResult(mmd_xy, mmd_xz, var_xy, var_xz, cov, p, float(sigma))


@dataclass(frozen=True)
class SweepRow:
    bits: int
    frac_bits: int
    p: float
    p_per_cost: float
    p_times_merit: float


def bitwidth_sweep(net: NetworkSpec, weights: WeightStore, training, formats, n: int,
                   seed: int, cost: dict[int, tuple[float, float]],
                   n_bootstrap: int = DEFAULT_BOOTSTRAP) -> list[SweepRow]:
    """Score each fixed-point format by RMMD against the full-precision generator.

    ``cost`` maps a bitwidth to ``(cost_a, merit_b)``, e.g. measured power and
    minimum slack; rows report p / cost_a and p * merit_b.
    """
    formats = [f if isinstance(f, FixedPointFormat) else FixedPointFormat.default(int(f))
               for f in formats]
    if not formats:
        raise ValueError("formats must be non-empty")
    missing = sorted({f.total_bits for f in formats if f.total_bits not in cost})
    if missing:
        raise KeyError(f"cost table lacks bitwidths {missing}")
    X = as_sample_set(training)
    Z = sample(net, weights, LatentSampler(net.latent_dim, seed), n)
    rows = []
    for fmt in formats:
        Y = sample(net, weights, LatentSampler(net.latent_dim, seed), n,
                   forward=lambda z, fmt=fmt: quantized_infer(net, weights, z, fmt))
        res = rmmd_pvalue(X, Y, Z, sigma=median_heuristic(np.vstack([X, Y, Z])),
                          n_bootstrap=n_bootstrap, seed=seed)
        cost_a, merit_b = cost[fmt.total_bits]
        rows.append(SweepRow(fmt.total_bits, fmt.frac_bits, res.p, res.p / cost_a,
                             res.p * merit_b))
    return rows


def argmax_rows(rows: list[SweepRow]) -> dict[str, SweepRow]:
    """Best row under each figure of merit; ties go to the earliest row."""
    return {
        "p": max(rows, key=lambda r: r.p),
        "p_per_cost": max(rows, key=lambda r: r.p_per_cost),
        "p_times_merit": max(rows, key=lambda r: r.p_times_merit),
    }


def full_precision_training(net: NetworkSpec, weights: WeightStore, n: int, seed: int):
    """Reference sample set from the full-precision generator under a separate seed."""
    return sample(net, weights, LatentSampler(net.latent_dim, seed), n,
                  forward=lambda z: infer(net, weights, z))
