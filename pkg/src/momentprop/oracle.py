"""Monte-Carlo and Gauss-Hermite reference oracles.

sample_forward draws element-wise Gaussian inputs, pushes each draw through
the *deterministic* layer semantics (plain pooling/convolution/linear,
max(0, .), logistic) and reports empirical output moments with standard
errors.  It is the ground truth the analytic moment formulas are tested
against, so it never calls the moment-propagation code paths.

Sampling is chunked with a fixed chunk policy and a single explicitly seeded
PCG64 generator, which makes every estimate bit-reproducible for a given
(seed, n, layer, input).
"""

import math
from dataclasses import dataclass

import numpy as np

from .linear import avg_pool2d_plain, conv2d_plain, linear_plain
from .network import LayerSpec, NetworkSpec, layer_output_shape
from .nonlinear import sigmoid
from .tensors import MomentTensor, UnknownLayerError, ValidationError

__all__ = [
    "MC_ABS_FLOOR",
    "McEstimate",
    "deterministic_layer",
    "deterministic_forward",
    "sample_forward",
    "gauss_hermite_expectation",
]

# Draws per chunk are capped at ~32 MB of float64; the cap is a constant so the
# chunk partition (and hence the estimate) is a pure function of (seed, n, input).
_CHUNK_ELEMS = 1 << 22

# Absolute floor added to K-sigma Monte-Carlo bands.  At deep-tail inputs
# (e.g. a rectifier fed mu = -5, sigma = 1) the positive-sample count at
# n = 1e6 is Poisson with rate < 1, the empirical standard errors collapse to
# zero, and a pure K*SE band becomes an exact-equality test against noise.
# The floor is negligible against every O(0.01..10) quantity being compared.
MC_ABS_FLOOR = 1e-5


@dataclass(frozen=True, eq=False)
class McEstimate:
    """Empirical per-element moments of a sampled forward pass.

    means/variances are the sample mean and unbiased sample variance;
    se_mean = sigma_hat/sqrt(n) and se_var = sigma_hat^2 * sqrt(2/(n-1))
    (normal-theory standard errors).
    """

    means: np.ndarray
    variances: np.ndarray
    se_mean: np.ndarray
    se_var: np.ndarray
    samples: int
    seed: int

    def to_json_dict(self) -> dict:
        return {
            "shape": list(self.means.shape),
            "means": [float(v) for v in self.means.ravel()],
            "variances": [float(v) for v in self.variances.ravel()],
            "se_mean": [float(v) for v in self.se_mean.ravel()],
            "se_var": [float(v) for v in self.se_var.ravel()],
            "samples": self.samples,
            "seed": self.seed,
        }


def deterministic_layer(layer: LayerSpec, x: np.ndarray) -> np.ndarray:
    """Plain (uncertainty-free) semantics of one layer applied to a value tensor."""
    if layer.kind == "avg_pool2d":
        g = layer.geometry
        return avg_pool2d_plain(x, g.k, g.s, g.p)
    if layer.kind == "conv2d":
        p = layer.params
        return conv2d_plain(x, p.weights, p.bias, p.geometry.s, p.geometry.p)
    if layer.kind == "linear":
        return linear_plain(x, layer.params.weights, layer.params.bias)
    if layer.kind == "relu":
        return np.maximum(x, 0.0)
    if layer.kind == "sigmoid":
        return sigmoid(x)
    if layer.kind == "flatten":
        return x.reshape(x.shape[0], -1)
    raise UnknownLayerError(f"unknown layer kind {layer.kind!r}")


def deterministic_forward(net: NetworkSpec, x: np.ndarray) -> np.ndarray:
    """Plain forward pass of a whole network on a value tensor."""
    for layer in net.layers:
        x = deterministic_layer(layer, x)
    return x


def _affine_stage(layer: LayerSpec, in_shape: tuple[int, ...]):
    """Materialize an affine layer as y = x @ M + c over flattened tensors.

    Columns are probed with basis vectors through the plain layer op, which is
    exact for the affine kinds and turns the per-sample work into one GEMM.
    """
    out_shape = layer_output_shape(layer, in_shape)
    size = int(np.prod(in_shape))
    zero = np.zeros(in_shape)
    c = deterministic_layer(layer, zero).ravel().copy()
    m = np.empty((size, c.size))
    probe = np.zeros(in_shape)
    flat = probe.reshape(-1)
    for j in range(size):
        flat[j] = 1.0
        m[j] = deterministic_layer(layer, probe).ravel() - c
        flat[j] = 0.0
    return (lambda x: x @ m + c), out_shape


def _build_stages(target: LayerSpec | NetworkSpec, in_shape: tuple[int, ...]):
    """Compose flat (n, in_size) -> (n, out_size) sample maps for a layer or network."""
    if isinstance(target, NetworkSpec):
        if in_shape != target.input_shape:
            raise ValidationError(
                f"input shape {in_shape} does not match network input_shape {target.input_shape}"
            )
        layers = target.layers
    elif isinstance(target, LayerSpec):
        layers = (target,)
    else:
        raise ValidationError(f"expected LayerSpec or NetworkSpec, got {type(target).__name__}")

    stages = []
    shape = in_shape
    for layer in layers:
        if layer.kind in ("avg_pool2d", "conv2d", "linear"):
            stage, shape = _affine_stage(layer, shape)
        elif layer.kind == "relu":
            shape = layer_output_shape(layer, shape)
            stage = lambda x: np.maximum(x, 0.0)
        elif layer.kind == "sigmoid":
            shape = layer_output_shape(layer, shape)
            stage = sigmoid
        elif layer.kind == "flatten":
            shape = layer_output_shape(layer, shape)
            stage = lambda x: x
        else:
            raise UnknownLayerError(f"unknown layer kind {layer.kind!r}")
        stages.append(stage)

    def run(x: np.ndarray) -> np.ndarray:
        for stage in stages:
            x = stage(x)
        return x

    return run, shape


def sample_forward(
    target: LayerSpec | NetworkSpec,
    input_tensor: MomentTensor,
    n: int,
    seed: int,
) -> McEstimate:
    """Estimate output moments of `target` by pushing n Gaussian draws of
    `input_tensor` through the deterministic layer semantics.

    Accumulation is done on deviations from the deterministic image of the
    input means, so zero-variance inputs yield exactly zero empirical variance
    and zero standard errors.
    """
    if not isinstance(n, int) or isinstance(n, bool) or n < 2:
        raise ValidationError(f"sample count must be an integer >= 2, got {n!r}")
    run, out_shape = _build_stages(target, input_tensor.shape)

    mu = input_tensor.means.ravel()
    sd = np.sqrt(input_tensor.variances.ravel())
    center = run(mu[None, :])[0]

    chunk = max(1, min(n, _CHUNK_ELEMS // max(1, mu.size)))
    rng = np.random.default_rng(seed)
    s1 = np.zeros(center.size)
    s2 = np.zeros(center.size)
    done = 0
    while done < n:
        m = min(chunk, n - done)
        x = rng.standard_normal((m, mu.size))
        x *= sd
        x += mu
        dev = run(x)
        dev -= center
        s1 += dev.sum(axis=0)
        s2 += np.einsum("ij,ij->j", dev, dev)
        done += m

    means = center + s1 / n
    variances = np.maximum((s2 - s1 * s1 / n) / (n - 1), 0.0)
    se_mean = np.sqrt(variances / n)
    se_var = variances * math.sqrt(2.0 / (n - 1))
    return McEstimate(
        means=means.reshape(out_shape),
        variances=variances.reshape(out_shape),
        se_mean=se_mean.reshape(out_shape),
        se_var=se_var.reshape(out_shape),
        samples=n,
        seed=seed,
    )


def gauss_hermite_expectation(f, mu: float, var: float, order: int) -> float:
    """E[f(x)] for x ~ N(mu, var) by Gauss-Hermite quadrature with the change
    of variables x = mu + sqrt(2*var)*t; returns f(mu) when var = 0.

    Exact (up to round-off) for polynomials of degree <= 2*order - 1; for
    smooth non-polynomial integrands the error decays rapidly with order, but
    integrands with kinks converge only algebraically.
    """
    if not isinstance(order, int) or isinstance(order, bool) or order < 1:
        raise ValidationError(f"order must be an integer >= 1, got {order!r}")
    if not (var >= 0.0 and math.isfinite(var) and math.isfinite(mu)):
        raise ValidationError(f"invalid Gaussian moments mu={mu}, var={var}")
    if var == 0.0:
        value = float(f(mu))
        if not math.isfinite(value):
            raise ValidationError(f"non-finite function evaluation at {mu}")
        return value

    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        nodes, weights = np.polynomial.hermite.hermgauss(order)
    if not (np.all(np.isfinite(nodes)) and np.all(np.isfinite(weights))):
        raise ValidationError(f"quadrature order {order} overflows float64 weights")
    x = mu + math.sqrt(2.0 * var) * nodes
    try:
        y = np.asarray(f(x), dtype=np.float64)
        if y.shape != x.shape:
            raise TypeError
    except (TypeError, ValueError):  # f is a scalar-only map
        y = np.array([float(f(v)) for v in x])
    if not np.all(np.isfinite(y)):
        raise ValidationError("non-finite function evaluation in quadrature")
    return float(np.sum(weights * y) / math.sqrt(math.pi))
