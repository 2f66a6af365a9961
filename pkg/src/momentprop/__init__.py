"""Forward propagation of element-wise Gaussian uncertainty through CNN
building blocks: average pooling, 2D convolution, fully-connected, rectifier,
logistic, and expected binary cross-entropy, with Monte-Carlo and quadrature
reference oracles."""

from .tensors import (
    ValidationError,
    ShapeMismatchError,
    NegativeVarianceError,
    NonFiniteError,
    UnknownLayerError,
    output_dim,
    FilterGeometry,
    MomentTensor,
    make_moment_tensor,
    floor_variances,
    clamp_variances,
)
from .linear import (
    ConvParams,
    LinearParams,
    avg_pool2d_plain,
    conv2d_plain,
    linear_plain,
    ua_avg_pool2d,
    ua_conv2d,
    ua_linear,
)
from .nonlinear import (
    DEFAULT_SIGMOID_LAMBDA,
    GaussianScalar,
    SigmoidApproxConfig,
    erf,
    sigmoid,
    relu_moments,
    sigmoid_moments,
    ua_relu,
    ua_sigmoid,
    ua_relu_tensor,
    ua_sigmoid_tensor,
)
from .loss import BceInput, LossMoments, bce_loss, ua_bce_loss, ua_bce_loss_batch
from .network import (
    LAYER_KINDS,
    LayerSpec,
    NetworkSpec,
    load_network,
    forward,
    forward_trace,
)
from .oracle import (
    MC_ABS_FLOOR,
    McEstimate,
    deterministic_layer,
    deterministic_forward,
    sample_forward,
    gauss_hermite_expectation,
)

__version__ = "0.1.0"

__all__ = [
    "ValidationError",
    "ShapeMismatchError",
    "NegativeVarianceError",
    "NonFiniteError",
    "UnknownLayerError",
    "output_dim",
    "FilterGeometry",
    "MomentTensor",
    "make_moment_tensor",
    "floor_variances",
    "clamp_variances",
    "ConvParams",
    "LinearParams",
    "avg_pool2d_plain",
    "conv2d_plain",
    "linear_plain",
    "ua_avg_pool2d",
    "ua_conv2d",
    "ua_linear",
    "DEFAULT_SIGMOID_LAMBDA",
    "GaussianScalar",
    "SigmoidApproxConfig",
    "erf",
    "sigmoid",
    "relu_moments",
    "sigmoid_moments",
    "ua_relu",
    "ua_sigmoid",
    "ua_relu_tensor",
    "ua_sigmoid_tensor",
    "BceInput",
    "LossMoments",
    "bce_loss",
    "ua_bce_loss",
    "ua_bce_loss_batch",
    "LAYER_KINDS",
    "LayerSpec",
    "NetworkSpec",
    "load_network",
    "forward",
    "forward_trace",
    "MC_ABS_FLOOR",
    "McEstimate",
    "deterministic_layer",
    "deterministic_forward",
    "sample_forward",
    "gauss_hermite_expectation",
    "__version__",
]
