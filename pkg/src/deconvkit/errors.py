"""Exception hierarchy shared across the toolkit."""

from __future__ import annotations



class DeconvKitError(Exception):
    """Base class for every error raised by deconvkit."""


class InvalidConfig(DeconvKitError, ValueError):
    pass


class NonPositiveOutput(InvalidConfig):
    pass


class InvalidTile(InvalidConfig):
    pass


class ShapeMismatch(DeconvKitError, ValueError):
    def __init__(self, message: str, layer_index: int | None = None):
        super().__init__(message)
        self.layer_index = layer_index


class NonIntegerIndex(DeconvKitError, ArithmeticError):
    pass


class MissingWeight(DeconvKitError, KeyError):
    pass


class DimMismatch(ShapeMismatch):
    pass


class TooFewSamples(DeconvKitError, ValueError):
    pass


class DegenerateSamples(DeconvKitError, ValueError):
    pass


class DegenerateVariance(DeconvKitError, ArithmeticError):
    pass


class IndivisibleTiling(InvalidConfig):
    pass


class NoFeasibleDesign(DeconvKitError, LookupError):
    pass
