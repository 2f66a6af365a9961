"""Sequential composition of uncertainty-aware layers from a declarative spec.

A NetworkSpec is an input shape plus an ordered layer list; the whole shape
chain is checked eagerly at construction/load time so forward passes on
conforming inputs can never hit a shape error.  Weights are supplied
externally (JSON); nothing here trains.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .linear import ConvParams, LinearParams, ua_avg_pool2d, ua_conv2d, ua_linear
from .nonlinear import DEFAULT_SIGMOID_LAMBDA, ua_relu_tensor, ua_sigmoid_tensor
from .tensors import (
    FilterGeometry,
    MomentTensor,
    ShapeMismatchError,
    UnknownLayerError,
    ValidationError,
)

__all__ = ["LAYER_KINDS", "LayerSpec", "NetworkSpec", "load_network", "forward", "forward_trace"]

LAYER_KINDS = ("avg_pool2d", "conv2d", "linear", "relu", "sigmoid", "flatten")


@dataclass(frozen=True, eq=False)
class LayerSpec:
    """One layer of a sequential network.

    kind       one of LAYER_KINDS
    geometry   pooling geometry (avg_pool2d only)
    params     ConvParams for conv2d, LinearParams for linear
    lam        sigmoid squash coefficient (sigmoid only)
    """

    kind: str
    geometry: FilterGeometry | None = None
    params: ConvParams | LinearParams | None = None
    lam: float | None = None

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise UnknownLayerError(f"unknown layer kind {self.kind!r}")
        if self.kind == "avg_pool2d" and self.geometry is None:
            raise ValidationError("avg_pool2d layer requires geometry")
        if self.kind == "conv2d" and not isinstance(self.params, ConvParams):
            raise ValidationError("conv2d layer requires ConvParams")
        if self.kind == "linear" and not isinstance(self.params, LinearParams):
            raise ValidationError("linear layer requires LinearParams")
        if self.kind == "sigmoid" and self.lam is not None and not (self.lam > 0):
            raise ValidationError(f"sigmoid lambda must be > 0, got {self.lam}")
        if self.kind in ("relu", "flatten") and (
            self.geometry is not None or self.params is not None
        ):
            raise ValidationError(f"{self.kind} layer carries no geometry or parameters")


def _require_spatial(shape: tuple[int, ...], n: int, kind: str) -> None:
    if len(shape) != 4:
        raise ShapeMismatchError(f"{kind} expects a 4D (b, c, h, w) input, got {shape}")
    if shape[2] != shape[3]:
        raise ShapeMismatchError(f"{kind} supports square maps only, got {shape}")
    if shape[2] != n:
        raise ShapeMismatchError(
            f"{kind} geometry expects spatial size {n}, input has {shape[2]}"
        )


def layer_output_shape(layer: LayerSpec, shape: tuple[int, ...]) -> tuple[int, ...]:
    """Shape produced by `layer` on an input of `shape`; raises ShapeMismatchError
    if the layer cannot accept it."""
    if layer.kind == "avg_pool2d":
        _require_spatial(shape, layer.geometry.n, "avg_pool2d")
        d = layer.geometry.d
        return (shape[0], shape[1], d, d)
    if layer.kind == "conv2d":
        params = layer.params
        _require_spatial(shape, params.geometry.n, "conv2d")
        if shape[1] != params.in_channels:
            raise ShapeMismatchError(
                f"conv2d expects {params.in_channels} input channels, input has {shape[1]}"
            )
        d = params.geometry.d
        return (shape[0], params.out_channels, d, d)
    if layer.kind == "linear":
        if len(shape) != 2:
            raise ShapeMismatchError(f"linear expects a 2D (batch, features) input, got {shape}")
        if shape[1] != layer.params.in_features:
            raise ShapeMismatchError(
                f"linear expects {layer.params.in_features} features, input has {shape[1]}"
            )
        return (shape[0], layer.params.out_features)
    if layer.kind == "flatten":
        if len(shape) < 2:
            raise ShapeMismatchError(f"flatten expects at least 2 dimensions, got {shape}")
        return (shape[0], int(np.prod(shape[1:])))
    return shape  # relu / sigmoid are shape-preserving


@dataclass(frozen=True, eq=False)
class NetworkSpec:
    """Validated sequential network: the shape chain is checked on construction."""

    input_shape: tuple[int, ...]
    layers: tuple[LayerSpec, ...]
    output_shape: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        shape = tuple(int(v) for v in self.input_shape)
        if not shape or any(v < 1 for v in shape):
            raise ValidationError(f"input_shape must be positive integers, got {shape}")
        layers = tuple(self.layers)
        object.__setattr__(self, "input_shape", shape)
        object.__setattr__(self, "layers", layers)
        for i, layer in enumerate(layers):
            try:
                shape = layer_output_shape(layer, shape)
            except ValidationError as exc:
                raise ShapeMismatchError(
                    f"shape-chain mismatch at layer {i} ({layer.kind}): {exc}"
                ) from None
        object.__setattr__(self, "output_shape", shape)


def apply_layer(layer: LayerSpec, t: MomentTensor) -> MomentTensor:
    if layer.kind == "avg_pool2d":
        return ua_avg_pool2d(t, layer.geometry)
    if layer.kind == "conv2d":
        return ua_conv2d(t, layer.params)
    if layer.kind == "linear":
        return ua_linear(t, layer.params)
    if layer.kind == "relu":
        return ua_relu_tensor(t)
    if layer.kind == "sigmoid":
        lam = layer.lam if layer.lam is not None else DEFAULT_SIGMOID_LAMBDA
        return ua_sigmoid_tensor(t, lam)
    if layer.kind == "flatten":
        b = t.shape[0]
        return MomentTensor(t.means.reshape(b, -1), t.variances.reshape(b, -1))
    raise UnknownLayerError(f"unknown layer kind {layer.kind!r}")


def _check_input(net: NetworkSpec, t: MomentTensor) -> None:
    if t.shape != net.input_shape:
        raise ShapeMismatchError(
            f"input shape {t.shape} does not match network input_shape {net.input_shape}"
        )


def forward(net: NetworkSpec, t: MomentTensor) -> MomentTensor:
    """Fold the layer list left to right over `t`."""
    _check_input(net, t)
    for i, layer in enumerate(net.layers):
        try:
            t = apply_layer(layer, t)
        except ValidationError as exc:
            raise ValidationError(f"layer {i} ({layer.kind}): {exc}") from None
    return t


def forward_trace(net: NetworkSpec, t: MomentTensor) -> list[MomentTensor]:
    """Like forward, but returns the intermediate tensor after every layer."""
    _check_input(net, t)
    trace: list[MomentTensor] = []
    for i, layer in enumerate(net.layers):
        try:
            t = apply_layer(layer, t)
        except ValidationError as exc:
            raise ValidationError(f"layer {i} ({layer.kind}): {exc}") from None
        trace.append(t)
    return trace


def _field(entry: dict, index: int, kind: str, name: str):
    if name not in entry:
        raise ValidationError(f"layer {index} ({kind}): missing field '{name}'")
    return entry[name]


def _int_field(entry: dict, index: int, kind: str, name: str, minimum: int = 1) -> int:
    value = _field(entry, index, kind, name)
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise ValidationError(
            f"layer {index} ({kind}): field '{name}' must be an integer >= {minimum}, got {value!r}"
        )
    return value


def _chain_geometry(index: int, kind: str, n: int, k: int, s: int, p: int) -> FilterGeometry:
    try:
        return FilterGeometry(n=n, k=k, s=s, p=p)
    except ValidationError as exc:
        raise ShapeMismatchError(
            f"shape-chain mismatch at layer {index} ({kind}): {exc}"
        ) from None


def _build_layer(entry: dict, index: int, shape: tuple[int, ...]) -> LayerSpec:
    if not isinstance(entry, dict):
        raise ValidationError(f"layer {index}: expected a JSON object, got {entry!r}")
    kind = entry.get("kind")
    if kind not in LAYER_KINDS:
        raise UnknownLayerError(f"layer {index}: unknown layer kind {kind!r}")

    if kind == "avg_pool2d":
        k = _int_field(entry, index, kind, "k")
        s = _int_field(entry, index, kind, "s")
        p = _int_field(entry, index, kind, "p", minimum=0)
        if len(shape) != 4 or shape[2] != shape[3]:
            raise ShapeMismatchError(
                f"avg_pool2d needs a square 4D input, chain has {shape}"
            )
        geometry = _chain_geometry(index, kind, shape[2], k, s, p)
        return LayerSpec(kind, geometry=geometry)

    if kind == "conv2d":
        c = _int_field(entry, index, kind, "in_channels")
        f = _int_field(entry, index, kind, "out_channels")
        k = _int_field(entry, index, kind, "k")
        s = _int_field(entry, index, kind, "s")
        p = _int_field(entry, index, kind, "p", minimum=0)
        weights = _field(entry, index, kind, "weights")
        bias = _field(entry, index, kind, "bias")
        if len(weights) != f * c * k * k:
            raise ShapeMismatchError(
                f"layer {index} (conv2d): {len(weights)} weights, expected {f * c * k * k}"
            )
        if len(bias) != f:
            raise ShapeMismatchError(
                f"layer {index} (conv2d): {len(bias)} bias entries, expected {f}"
            )
        if len(shape) != 4 or shape[2] != shape[3]:
            raise ShapeMismatchError(f"conv2d needs a square 4D input, chain has {shape}")
        geometry = _chain_geometry(index, kind, shape[2], k, s, p)
        params = ConvParams(
            np.asarray(weights, dtype=np.float64).reshape(f, c, k, k),
            np.asarray(bias, dtype=np.float64),
            geometry,
        )
        return LayerSpec(kind, params=params)

    if kind == "linear":
        i_feat = _int_field(entry, index, kind, "in_features")
        o_feat = _int_field(entry, index, kind, "out_features")
        weights = _field(entry, index, kind, "weights")
        bias = _field(entry, index, kind, "bias")
        if len(weights) != o_feat * i_feat:
            raise ShapeMismatchError(
                f"layer {index} (linear): {len(weights)} weights, expected {o_feat * i_feat}"
            )
        if len(bias) != o_feat:
            raise ShapeMismatchError(
                f"layer {index} (linear): {len(bias)} bias entries, expected {o_feat}"
            )
        params = LinearParams(
            np.asarray(weights, dtype=np.float64).reshape(o_feat, i_feat),
            np.asarray(bias, dtype=np.float64),
        )
        return LayerSpec(kind, params=params)

    if kind == "sigmoid":
        lam = entry.get("lambda")
        if lam is not None:
            if not isinstance(lam, (int, float)) or isinstance(lam, bool) or not (
                lam > 0 and math.isfinite(lam)
            ):
                raise ValidationError(
                    f"layer {index} (sigmoid): 'lambda' must be a finite number > 0, got {lam!r}"
                )
            lam = float(lam)
        return LayerSpec(kind, lam=lam)

    return LayerSpec(kind)  # relu / flatten


def load_network(document: str) -> NetworkSpec:
    """Parse and validate a network document.

    Raises json.JSONDecodeError on malformed JSON, UnknownLayerError on an
    unsupported kind, and ShapeMismatchError naming the first offending layer
    when the shape chain breaks.
    """
    doc = json.loads(document)
    if not isinstance(doc, dict):
        raise ValidationError("network document must be a JSON object")
    if "input_shape" not in doc or "layers" not in doc:
        raise ValidationError("network document requires 'input_shape' and 'layers'")
    raw_shape = doc["input_shape"]
    if not isinstance(raw_shape, list) or not raw_shape or not all(
        isinstance(v, int) and not isinstance(v, bool) and v >= 1 for v in raw_shape
    ):
        raise ValidationError(f"input_shape must be a list of positive integers, got {raw_shape!r}")
    if not isinstance(doc["layers"], list):
        raise ValidationError("'layers' must be a list")

    shape = tuple(raw_shape)
    layers: list[LayerSpec] = []
    for i, entry in enumerate(doc["layers"]):
        layer = _build_layer(entry, i, shape)
        try:
            shape = layer_output_shape(layer, shape)
        except ValidationError as exc:
            raise ShapeMismatchError(
                f"shape-chain mismatch at layer {i} ({layer.kind}): {exc}"
            ) from None
        layers.append(layer)
    return NetworkSpec(tuple(raw_shape), tuple(layers))
