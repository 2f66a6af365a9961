"""Shared builders for the test suite."""

import numpy as np

from momentprop import MomentTensor


def random_moment_tensor(rng, shape, mu_scale=1.5, var_lo=0.1, var_hi=2.0):
    means = rng.normal(0.0, mu_scale, shape)
    variances = rng.uniform(var_lo, var_hi, shape)
    return MomentTensor(means, variances)


def lenet_dict(rng, scale=0.1):
    """LeNet-style chain: conv(1->4, k5) -> relu -> avg_pool(2,2) -> flatten
    -> linear(576->10) -> sigmoid, on a 28x28 single-channel input."""
    return {
        "input_shape": [1, 1, 28, 28],
        "layers": [
            {
                "kind": "conv2d",
                "in_channels": 1,
                "out_channels": 4,
                "k": 5,
                "s": 1,
                "p": 0,
                "weights": (rng.standard_normal(4 * 1 * 5 * 5) * scale).tolist(),
                "bias": (rng.standard_normal(4) * scale).tolist(),
            },
            {"kind": "relu"},
            {"kind": "avg_pool2d", "k": 2, "s": 2, "p": 0},
            {"kind": "flatten"},
            {
                "kind": "linear",
                "in_features": 576,
                "out_features": 10,
                "weights": (rng.standard_normal(10 * 576) * scale).tolist(),
                "bias": (rng.standard_normal(10) * scale).tolist(),
            },
            {"kind": "sigmoid", "lambda": 0.3040},
        ],
    }


def small_net_dict(rng, scale=0.4):
    """Small mixed network for CLI and oracle tests: conv(1->2, k3) -> relu ->
    avg_pool(2,2) -> flatten -> linear(8->3) -> sigmoid on a 6x6 input."""
    return {
        "input_shape": [1, 1, 6, 6],
        "layers": [
            {
                "kind": "conv2d",
                "in_channels": 1,
                "out_channels": 2,
                "k": 3,
                "s": 1,
                "p": 0,
                "weights": (rng.standard_normal(2 * 1 * 3 * 3) * scale).tolist(),
                "bias": (rng.standard_normal(2) * scale).tolist(),
            },
            {"kind": "relu"},
            {"kind": "avg_pool2d", "k": 2, "s": 2, "p": 0},
            {"kind": "flatten"},
            {
                "kind": "linear",
                "in_features": 8,
                "out_features": 3,
                "weights": (rng.standard_normal(3 * 8) * scale).tolist(),
                "bias": (rng.standard_normal(3) * scale).tolist(),
            },
            {"kind": "sigmoid"},
        ],
    }


def linear_net_dict(rng, scale=0.4):
    """Linear-only chain (conv -> avg_pool -> flatten -> linear) on a 6x6 input.

    Every layer output is exactly Gaussian, so normal-theory standard errors
    are exact and a K-sigma oracle comparison is statistically sound at any
    sample count.  Rectifier outputs at deep-negative means have heavy
    kurtosis, which makes K*se_var bands unreliable there; pass-case oracle
    runs therefore use this net.
    """
    return {
        "input_shape": [1, 1, 6, 6],
        "layers": [
            {
                "kind": "conv2d",
                "in_channels": 1,
                "out_channels": 2,
                "k": 3,
                "s": 1,
                "p": 1,
                "weights": (rng.standard_normal(2 * 1 * 3 * 3) * scale).tolist(),
                "bias": (rng.standard_normal(2) * scale).tolist(),
            },
            {"kind": "avg_pool2d", "k": 2, "s": 2, "p": 0},
            {"kind": "flatten"},
            {
                "kind": "linear",
                "in_features": 18,
                "out_features": 4,
                "weights": (rng.standard_normal(4 * 18) * scale).tolist(),
                "bias": (rng.standard_normal(4) * scale).tolist(),
            },
        ],
    }


def tensor_json(rng, shape, zero_variance=False):
    t = random_moment_tensor(rng, shape)
    if zero_variance:
        t = MomentTensor(t.means, np.zeros(shape))
    return t.to_json(), t
