"""Exact moment propagation through the linear layers.

For any affine map y = w.x + b of independent Gaussian inputs, the output
mean is the same map applied to the input means and the output variance is
the zero-bias map with element-wise squared weights applied to the input
variances.  Average pooling, 2D convolution and the fully-connected layer
are all instances of this rule, so each is implemented as a pair of plain
deterministic passes.
"""

from dataclasses import dataclass

import numpy as np

from .tensors import (
    FilterGeometry,
    MomentTensor,
    NonFiniteError,
    ShapeMismatchError,
    floor_variances,
)

__all__ = [
    "ConvParams",
    "LinearParams",
    "avg_pool2d_plain",
    "conv2d_plain",
    "linear_plain",
    "ua_avg_pool2d",
    "ua_conv2d",
    "ua_linear",
]


@dataclass(frozen=True, eq=False)
class ConvParams:
    """Weights (out_channels, in_channels, k, k), bias (out_channels,) and geometry.

    Only W and b are stored; the squared-weight kernel used for the variance
    pass is recomputed at call time, so the learnable parameter count stays
    out_channels*in_channels*k^2 + out_channels.
    """

    weights: np.ndarray
    bias: np.ndarray
    geometry: FilterGeometry

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        b = np.array(self.bias, dtype=np.float64)
        if w.ndim != 4 or w.shape[2] != w.shape[3]:
            raise ShapeMismatchError(
                f"conv weights must have shape (out, in, k, k), got {w.shape}"
            )
        if w.shape[2] != self.geometry.k:
            raise ShapeMismatchError(
                f"kernel size {w.shape[2]} does not match geometry k={self.geometry.k}"
            )
        if b.shape != (w.shape[0],):
            raise ShapeMismatchError(
                f"bias shape {b.shape} does not match out_channels {w.shape[0]}"
            )
        if not np.all(np.isfinite(w)) or not np.all(np.isfinite(b)):
            raise NonFiniteError("non-finite convolution parameter")
        w.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    @property
    def param_count(self) -> int:
        return self.weights.size + self.bias.size


@dataclass(frozen=True, eq=False)
class LinearParams:
    """Weights (out_features, in_features) and bias (out_features,)."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        b = np.array(self.bias, dtype=np.float64)
        if w.ndim != 2:
            raise ShapeMismatchError(
                f"linear weights must have shape (out, in), got {w.shape}"
            )
        if b.shape != (w.shape[0],):
            raise ShapeMismatchError(
                f"bias shape {b.shape} does not match out_features {w.shape[0]}"
            )
        if not np.all(np.isfinite(w)) or not np.all(np.isfinite(b)):
            raise NonFiniteError("non-finite linear parameter")
        w.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def out_features(self) -> int:
        return self.weights.shape[0]

    @property
    def in_features(self) -> int:
        return self.weights.shape[1]

    @property
    def param_count(self) -> int:
        return self.weights.size + self.bias.size


def _check_spatial(x: np.ndarray, n: int, what: str) -> None:
    if x.ndim != 4:
        raise ShapeMismatchError(f"{what} expects a (batch, channels, h, w) map, got shape {x.shape}")
    if x.shape[2] != x.shape[3]:
        raise ShapeMismatchError(f"{what} supports square maps only, got shape {x.shape}")
    if x.shape[2] != n:
        raise ShapeMismatchError(
            f"{what}: input spatial size {x.shape[2]} does not match geometry n={n}"
        )


def _pad2d(x: np.ndarray, p: int) -> np.ndarray:
    if p == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))


def conv2d_plain(
    x: np.ndarray, weights: np.ndarray, bias: np.ndarray | None, s: int, p: int
) -> np.ndarray:
    """Standard 2D cross-correlation of a (B, C, n, n) batch with (F, C, k, k)
    weights, zero padding p, stride s.  Padding contributes deterministic zeros.
    """
    k = weights.shape[2]
    d = (x.shape[2] - k + 2 * p) // s + 1
    xp = _pad2d(x, p)
    out = np.zeros((x.shape[0], weights.shape[0], d, d))
    span = s * (d - 1) + 1
    for di in range(k):
        for dj in range(k):
            window = xp[:, :, di : di + span : s, dj : dj + span : s]
            out += np.einsum("bcuv,fc->bfuv", window, weights[:, :, di, dj])
    if bias is not None:
        out += bias[None, :, None, None]
    return out


def avg_pool2d_plain(x: np.ndarray, k: int, s: int, p: int) -> np.ndarray:
    """Standard average pooling; padded zeros are counted in the k^2 divisor."""
    d = (x.shape[2] - k + 2 * p) // s + 1
    xp = _pad2d(x, p)
    out = np.zeros((x.shape[0], x.shape[1], d, d))
    span = s * (d - 1) + 1
    for di in range(k):
        for dj in range(k):
            out += xp[:, :, di : di + span : s, dj : dj + span : s]
    return out / float(k * k)


def linear_plain(x: np.ndarray, weights: np.ndarray, bias: np.ndarray | None) -> np.ndarray:
    out = x @ weights.T
    if bias is not None:
        out = out + bias
    return out


def ua_avg_pool2d(t: MomentTensor, geometry: FilterGeometry) -> MomentTensor:
    """Average pooling on moments: means get a plain average pool, variances get
    a plain average pool scaled by a further 1/k^2, i.e. (1/k^4) Sum sigma^2
    per receptive field.
    """
    _check_spatial(t.means, geometry.n, "ua_avg_pool2d")
    k, s, p = geometry.k, geometry.s, geometry.p
    means = avg_pool2d_plain(t.means, k, s, p)
    variances = avg_pool2d_plain(t.variances, k, s, p) / float(k * k)
    return MomentTensor(means, floor_variances(variances))


def ua_conv2d(t: MomentTensor, params: ConvParams) -> MomentTensor:
    """Dual convolution: the means map is convolved with W and bias b, the
    variances map with the element-wise square W^2 and zero bias.  Receptive
    fields sum both contributions over input channels.
    """
    _check_spatial(t.means, params.geometry.n, "ua_conv2d")
    if t.means.shape[1] != params.in_channels:
        raise ShapeMismatchError(
            f"ua_conv2d: input has {t.means.shape[1]} channels, "
            f"parameters expect {params.in_channels}"
        )
    s, p = params.geometry.s, params.geometry.p
    means = conv2d_plain(t.means, params.weights, params.bias, s, p)
    variances = conv2d_plain(t.variances, params.weights * params.weights, None, s, p)
    return MomentTensor(means, floor_variances(variances))


def ua_linear(t: MomentTensor, params: LinearParams) -> MomentTensor:
    """Fully-connected moments: means = M W^T + b, variances = V (W^2)^T."""
    if t.means.ndim != 2:
        raise ShapeMismatchError(
            f"ua_linear expects a (batch, features) tensor, got shape {t.shape}"
        )
    if t.means.shape[1] != params.in_features:
        raise ShapeMismatchError(
            f"ua_linear: input has {t.means.shape[1]} features, "
            f"parameters expect {params.in_features}"
        )
    means = linear_plain(t.means, params.weights, params.bias)
    variances = linear_plain(t.variances, params.weights * params.weights, None)
    return MomentTensor(means, floor_variances(variances))
