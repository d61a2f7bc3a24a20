"""DCNN description, weight storage and full-precision generative inference."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Union

import numpy as np

from .deconv import deconv_reference
from .errors import InvalidConfig, MissingWeight, ShapeMismatch
from .shapes import LayerConfig

ACTIVATIONS = ("relu", "tanh")
WEIGHTS_MAGIC = b"DCNW"
WEIGHTS_VERSION = 1


@dataclass(frozen=True)
class FullyConnected:
    in_dim: int
    c: int
    h: int
    w: int

    @property
    def out_dim(self) -> int:
        return self.c * self.h * self.w


@dataclass(frozen=True)
class Deconv:
    layer: LayerConfig


@dataclass(frozen=True)
class Activation:
    kind: str

    def __post_init__(self):
        if self.kind not in ACTIVATIONS:
            raise InvalidConfig(f"unknown activation {self.kind!r}")


@dataclass(frozen=True)
class ChannelAffine:
    """Inference-time batch norm folded into per-channel scale and shift."""

    channels: int


Layer = Union[FullyConnected, Deconv, Activation, ChannelAffine]


def _required_params(layer) -> dict[str, tuple[int, ...]]:
    if isinstance(layer, FullyConnected):
        return {"weight": (layer.out_dim, layer.in_dim)}
    if isinstance(layer, Deconv):
        return {"weight": layer.layer.kernel_dims}
    if isinstance(layer, ChannelAffine):
        return {"scale": (layer.channels,), "shift": (layer.channels,)}
    return {}


def _optional_params(layer) -> dict[str, tuple[int, ...]]:
    if isinstance(layer, FullyConnected):
        return {"bias": (layer.out_dim,)}
    if isinstance(layer, Deconv):
        return {"bias": (layer.layer.o_c,)}
    return {}


@dataclass(frozen=True)
class NetworkSpec:
    """Ordered layer list. ``input_dims`` defaults to what the first layer consumes."""

    layers: tuple
    input_dims: tuple[int, ...] | None = None

    def __post_init__(self):
        if not self.layers:
            raise InvalidConfig("network has no layers")
        object.__setattr__(self, "layers", tuple(self.layers))
        dims = self._first_input_dims()
        object.__setattr__(self, "input_dims", dims)
        self.shape_chain()

    def _first_input_dims(self) -> tuple[int, ...]:
        first = self.layers[0]
        if isinstance(first, FullyConnected):
            natural = (first.in_dim,)
        elif isinstance(first, Deconv):
            natural = first.layer.input_dims
        else:
            natural = None
        if self.input_dims is None:
            if natural is None:
                raise InvalidConfig("input_dims is required when the first layer is "
                                    f"{type(first).__name__}")
            return natural
        dims = tuple(int(d) for d in self.input_dims)
        if natural is not None and dims != natural:
            raise ShapeMismatch(f"input_dims {dims} disagree with first layer {natural}", 0)
        return dims

    @property
    def latent_dim(self) -> int:
        return int(np.prod(self.input_dims))

    def shape_chain(self) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
        """Per-layer (in dims, out dims); raises ShapeMismatch(msg, index) on a break."""
        chain = []
        dims = self.input_dims
        for idx, layer in enumerate(self.layers):
            if isinstance(layer, FullyConnected):
                if int(np.prod(dims)) != layer.in_dim:
                    raise ShapeMismatch(
                        f"layer {idx}: fully-connected expects {layer.in_dim} inputs, got {dims}", idx)
                out = (layer.c, layer.h, layer.w)
            elif isinstance(layer, Deconv):
                if dims != layer.layer.input_dims:
                    raise ShapeMismatch(
                        f"layer {idx}: deconv expects {layer.layer.input_dims}, got {dims}", idx)
                out = layer.layer.output_dims
            elif isinstance(layer, ChannelAffine):
                if len(dims) != 3 or dims[0] != layer.channels:
                    raise ShapeMismatch(
                        f"layer {idx}: affine over {layer.channels} channels, got {dims}", idx)
                out = dims
            else:
                out = dims
            chain.append((dims, out))
            dims = out
        return chain

    @property
    def output_dims(self) -> tuple[int, ...]:
        return self.shape_chain()[-1][1]

    def to_dict(self) -> dict:
        layers = []
        for layer in self.layers:
            if isinstance(layer, FullyConnected):
                layers.append({"type": "fully_connected", "in_dim": layer.in_dim,
                               "out_dim": layer.out_dim, "c": layer.c, "h": layer.h, "w": layer.w})
            elif isinstance(layer, Deconv):
                layers.append({"type": "deconv", **layer.layer.to_dict()})
            elif isinstance(layer, Activation):
                layers.append({"type": "activation", "kind": layer.kind})
            else:
                layers.append({"type": "channel_affine", "channels": layer.channels})
        d = {"layers": layers}
        if not isinstance(self.layers[0], (FullyConnected, Deconv)):
            d["input_dims"] = list(self.input_dims)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        if "layers" not in d or not isinstance(d["layers"], list):
            raise InvalidConfig('network description needs a "layers" array')
        layers = []
        for idx, entry in enumerate(d["layers"]):
            kind = entry.get("type")
            try:
                if kind == "fully_connected":
                    fc = FullyConnected(entry["in_dim"], entry["c"], entry["h"], entry["w"])
                    if "out_dim" in entry and entry["out_dim"] != fc.out_dim:
                        raise ShapeMismatch(f"layer {idx}: out_dim != c*h*w", idx)
                    layers.append(fc)
                elif kind == "deconv":
                    layers.append(Deconv(LayerConfig.from_dict(entry)))
                elif kind == "activation":
                    layers.append(Activation(entry["kind"]))
                elif kind == "channel_affine":
                    layers.append(ChannelAffine(entry["channels"]))
                else:
                    raise InvalidConfig(f"layer {idx}: unknown type {kind!r}")
            except KeyError as e:
                raise InvalidConfig(f"layer {idx}: missing field {e}") from None
        return cls(tuple(layers), d.get("input_dims"))

    @classmethod
    def load(cls, path) -> "NetworkSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")


@dataclass
class WeightStore:
    """Named parameter tensors, keyed ``"<layer index>.<role>"``."""

    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.tensors[name]
        except KeyError:
            raise MissingWeight(name) from None

    def __setitem__(self, name: str, value) -> None:
        self.tensors[name] = np.asarray(value, dtype=np.float64)

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def get(self, idx: int, role: str):
        return self.tensors.get(f"{idx}.{role}")

    def validate(self, net: NetworkSpec) -> None:
        for idx, layer in enumerate(net.layers):
            for role, dims in _required_params(layer).items():
                t = self[f"{idx}.{role}"]
                if t.shape != dims:
                    raise ShapeMismatch(f"{idx}.{role} has dims {t.shape}, expected {dims}", idx)
            for role, dims in _optional_params(layer).items():
                t = self.get(idx, role)
                if t is not None and t.shape != dims:
                    raise ShapeMismatch(f"{idx}.{role} has dims {t.shape}, expected {dims}", idx)

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "WeightStore":
        return WeightStore({k: fn(v) for k, v in self.tensors.items()})

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(WEIGHTS_MAGIC)
            fh.write(struct.pack("<I", WEIGHTS_VERSION))
            for name in sorted(self.tensors):
                arr = np.ascontiguousarray(self.tensors[name], dtype="<f8")
                raw = name.encode("utf-8")
                fh.write(struct.pack("<I", len(raw)))
                fh.write(raw)
                fh.write(struct.pack("<I", arr.ndim))
                fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
                fh.write(arr.tobytes())

    @classmethod
    def load(cls, path) -> "WeightStore":
        data = Path(path).read_bytes()
        if data[:4] != WEIGHTS_MAGIC:
            raise InvalidConfig(f"{path}: not a weights file (bad magic)")
        (version,) = struct.unpack_from("<I", data, 4)
        if version != WEIGHTS_VERSION:
            raise InvalidConfig(f"{path}: unsupported weights version {version}")
        pos = 8
        store = cls()
        try:
            while pos < len(data):
                (n,) = struct.unpack_from("<I", data, pos)
                name = data[pos + 4:pos + 4 + n].decode("utf-8")
                pos += 4 + n
                (rank,) = struct.unpack_from("<I", data, pos)
                dims = struct.unpack_from(f"<{rank}I", data, pos + 4)
                pos += 4 + 4 * rank
                count = int(np.prod(dims))
                if pos + 8 * count > len(data):
                    raise struct.error("truncated tensor data")
                arr = np.frombuffer(data, dtype="<f8", count=count, offset=pos)
                store.tensors[name] = arr.reshape(dims).astype(np.float64)
                pos += 8 * count
        except (struct.error, UnicodeDecodeError) as e:
            raise InvalidConfig(f"{path}: corrupt weights file ({e})") from None
        return store


class LatentSampler:
    """Seeded stream of latent vectors, uniform on [-1, 1] per component."""

    def __init__(self, dim: int, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self._rng = np.random.default_rng(seed)

    def draw(self, n: int) -> np.ndarray:
        return self._rng.uniform(-1.0, 1.0, size=(n, self.dim))


def apply_activation(kind: str, x: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return np.maximum(x, 0.0)
    return np.tanh(x)


def run_layer(layer, idx: int, weights: WeightStore, x: np.ndarray) -> np.ndarray:
    if isinstance(layer, FullyConnected):
        y = weights[f"{idx}.weight"] @ x.reshape(-1)
        bias = weights.get(idx, "bias")
        if bias is not None:
            y = y + bias
        return y.reshape(layer.c, layer.h, layer.w)
    if isinstance(layer, Deconv):
        y = deconv_reference(x, weights[f"{idx}.weight"], layer.layer)
        bias = weights.get(idx, "bias")
        if bias is not None:
            y = y + bias[:, None, None]
        return y
    if isinstance(layer, ChannelAffine):
        return x * weights[f"{idx}.scale"][:, None, None] + weights[f"{idx}.shift"][:, None, None]
    return apply_activation(layer.kind, x)


def infer(net: NetworkSpec, weights: WeightStore, z) -> np.ndarray:
    """Full-precision forward pass of one latent vector."""
    z = np.asarray(z, dtype=np.float64).reshape(-1)
    if z.size != net.latent_dim:
        raise ShapeMismatch(f"latent has {z.size} entries, network expects {net.latent_dim}")
    weights.validate(net)
    x = z.reshape(net.input_dims)
    for idx, layer in enumerate(net.layers):
        x = run_layer(layer, idx, weights, x)
    return x


def sample(net: NetworkSpec, weights: WeightStore, sampler: LatentSampler, n: int,
           forward=None) -> np.ndarray:
    """Draw ``n`` latents and return the flattened outputs as an ``n x d`` matrix."""
    if n < 1:
        raise ValueError("n must be >= 1")
    forward = forward or (lambda z: infer(net, weights, z))
    zs = sampler.draw(n)
    return np.stack([np.asarray(forward(z)).reshape(-1) for z in zs])


def random_weights(net: NetworkSpec, seed: int = 0, scale: float = 1.0) -> WeightStore:
    """Seeded He-style random parameters for every parameterized layer."""
    rng = np.random.default_rng(seed)
    store = WeightStore()
    for idx, layer in enumerate(net.layers):
        if isinstance(layer, FullyConnected):
            fan_in = layer.in_dim
        elif isinstance(layer, Deconv):
            fan_in = layer.layer.i_c * layer.layer.k ** 2 / layer.layer.s ** 2
        elif isinstance(layer, ChannelAffine):
            store[f"{idx}.scale"] = rng.uniform(0.5, 1.5, layer.channels)
            store[f"{idx}.shift"] = rng.normal(0.0, 0.1, layer.channels)
            continue
        else:
            continue
        dims = _required_params(layer)["weight"]
        store[f"{idx}.weight"] = rng.normal(0.0, scale * np.sqrt(2.0 / fan_in), dims)
        store[f"{idx}.bias"] = rng.normal(0.0, 0.05, _optional_params(layer)["bias"])
    return store


def toy_network() -> NetworkSpec:
    """Small generator used for tests and the bitwidth sweep: latent 8 -> 1x8x8."""
    return NetworkSpec((
        FullyConnected(8, 8, 2, 2),
        Activation("relu"),
        Deconv(LayerConfig(8, 2, 2, 4, k=4, s=2, p=1)),
        ChannelAffine(4),
        Activation("relu"),
        Deconv(LayerConfig(4, 4, 4, 1, k=4, s=2, p=1)),
        Activation("tanh"),
    ))


def dcgan_network(latent: int = 100) -> NetworkSpec:
    """DCGAN-shaped generator: latent -> 1024x4x4 -> 512x8x8 -> ... -> 3x64x64."""
    layers = [FullyConnected(latent, 1024, 4, 4), ChannelAffine(1024), Activation("relu")]
    chans = [1024, 512, 256, 128, 3]
    h = 4
    for i, (ci, co) in enumerate(zip(chans, chans[1:])):
        layers.append(Deconv(LayerConfig(ci, h, h, co, k=4, s=2, p=1)))
        h *= 2
        if i < 3:
            layers += [ChannelAffine(co), Activation("relu")]
        else:
            layers.append(Activation("tanh"))
    return NetworkSpec(tuple(layers))
