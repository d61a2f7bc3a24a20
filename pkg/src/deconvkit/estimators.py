"""scikit-learn adapters for the transform-shaped pieces: generation and quantization."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .network import NetworkSpec, WeightStore, infer
from .quant import FixedPointFormat, quantized_infer, requantize


class DCNNGenerator(TransformerMixin, BaseEstimator):
    """Map latent rows to flattened generator outputs.

    ``fmt`` (a ``"Qb.f"`` string or None) switches to fixed-point inference.
    ``fit`` only validates the network against its weights; nothing is learned.
    """

    def __init__(self, network: NetworkSpec = None, weights: WeightStore = None, fmt=None):
        self.network = network
        self.weights = weights
        self.fmt = fmt

    def fit(self, X=None, y=None):
        if self.network is None or self.weights is None:
            raise ValueError("DCNNGenerator needs both network and weights")
        self.weights.validate(self.network)
        self.fmt_ = (None if self.fmt is None else
                     self.fmt if isinstance(self.fmt, FixedPointFormat)
                     else FixedPointFormat.parse(self.fmt))
        self.n_features_in_ = self.network.latent_dim
        self.output_dims_ = self.network.output_dims
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        Z = check_array(X, dtype=np.float64)
        if Z.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} latent features, got {Z.shape[1]}")
        if self.fmt_ is None:
            rows = [infer(self.network, self.weights, z) for z in Z]
        else:
            rows = [quantized_infer(self.network, self.weights, z, self.fmt_) for z in Z]
        return np.stack([r.reshape(-1) for r in rows])


class FixedPointQuantizer(TransformerMixin, BaseEstimator):
    """Snap features onto a signed fixed-point grid (round half to even, saturate)."""

    def __init__(self, total_bits: int = 12, frac_bits: int | None = None):
        self.total_bits = total_bits
        self.frac_bits = frac_bits

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.fmt_ = (FixedPointFormat.default(self.total_bits) if self.frac_bits is None
                     else FixedPointFormat(self.total_bits, self.frac_bits))
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "fmt_")
        values, self.saturated_ = requantize(check_array(X, dtype=np.float64), self.fmt_)
        return values
