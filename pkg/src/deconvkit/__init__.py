"""Software model of a deconvolution accelerator: algorithms, quantization, statistics, roofline."""

__version__ = "0.1.0"

from .deconv import build_schedule, deconv_reference, deconv_reverse, input_index, stride_offset
from .errors import DeconvKitError
from .network import NetworkSpec, WeightStore, LatentSampler, infer, sample
from .quant import FixedPointFormat, quantized_infer
from .roofline import PlatformConfig, enumerate_designs, select_best
from .shapes import LayerConfig, TileConfig, output_shape
from .stats import mmd2_unbiased, rmmd_pvalue
from .tracesim import simulate

__all__ = [
    "DeconvKitError", "FixedPointFormat", "LatentSampler", "LayerConfig", "NetworkSpec",
    "PlatformConfig", "TileConfig", "WeightStore", "build_schedule", "deconv_reference",
    "deconv_reverse", "enumerate_designs", "infer", "input_index", "mmd2_unbiased",
    "output_shape", "quantized_infer", "rmmd_pvalue", "sample", "select_best", "simulate",
    "stride_offset",
]
