"""Expected binary cross-entropy under a Gaussian pre-sigmoid score.

The pointwise loss for score x and label y is -log s(x) + x(1 - y), which is
softplus(-x) for y = 1 and softplus(x) for y = 0.  Under x ~ N(mu, var) the
second-order expansion of the log-sigmoid gives

    E[loss] = loss(mu) + 0.5 * s(mu) * (1 - s(mu)) * var,

so uncertainty always adds a non-negative Jensen gap on top of the loss at
the mean.  The gap form avoids the cancellation the raw three-term expression
suffers at large |mu|.
"""

import math
from dataclasses import dataclass

import numpy as np

from .nonlinear import GaussianScalar, sigmoid
from .tensors import MomentTensor, NonFiniteError, ValidationError

__all__ = ["BceInput", "LossMoments", "bce_loss", "ua_bce_loss", "ua_bce_loss_batch"]


@dataclass(frozen=True)
class BceInput:
    """A Gaussian score paired with a binary truth label."""

    score: GaussianScalar
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValidationError(f"label must be 0 or 1, got {self.label!r}")


@dataclass(frozen=True)
class LossMoments:
    """Expected loss under the Gaussian score, plus the zero-variance reference."""

    expected_loss: float
    loss_at_mean: float

    def __post_init__(self):
        for name, v in (("expected_loss", self.expected_loss), ("loss_at_mean", self.loss_at_mean)):
            if not math.isfinite(v):
                raise NonFiniteError(f"non-finite {name}: {v}")
            if v < 0.0:
                raise ValidationError(f"{name} must be >= 0, got {v}")
        if self.expected_loss < self.loss_at_mean:
            raise ValidationError(
                f"expected_loss {self.expected_loss} below loss_at_mean {self.loss_at_mean}"
            )


def _signed_scores(scores: np.ndarray, labels: np.ndarray) -> np.ndarray:
    # loss = softplus(-x) for y=1 and softplus(x) for y=0; flipping the sign
    # up front makes bce(x, 1) and bce(-x, 0) literally the same computation.
    return np.where(labels == 1, -scores, scores)


def bce_loss(score: float, label: int) -> float:
    """Pointwise binary cross-entropy -log s(x) + x(1 - y), evaluated in
    log-sum-exp form; saturates without overflow for large |x|."""
    if label not in (0, 1):
        raise ValidationError(f"label must be 0 or 1, got {label!r}")
    if not math.isfinite(score):
        raise NonFiniteError(f"non-finite score {score}")
    return float(np.logaddexp(0.0, -score if label == 1 else score))


def _jensen_gap(mu, var):
    p = sigmoid(np.asarray(mu, dtype=np.float64))
    return 0.5 * p * (1.0 - p) * np.asarray(var, dtype=np.float64)


def ua_bce_loss(inp: BceInput) -> LossMoments:
    """Expected BCE of a Gaussian score: loss at the mean plus the Jensen gap
    0.5*s(mu)*(1-s(mu))*var."""
    at_mean = bce_loss(inp.score.mu, inp.label)
    gap = float(_jensen_gap(inp.score.mu, inp.score.var))
    return LossMoments(at_mean + gap, at_mean)


def ua_bce_loss_batch(scores: MomentTensor, labels) -> LossMoments:
    """Batch form: arithmetic mean of the per-sample expected losses (and of
    the per-sample losses at the mean) over every element of `scores`."""
    y = np.asarray(labels)
    if y.shape != scores.shape:
        raise ValidationError(
            f"labels shape {y.shape} does not match scores shape {scores.shape}"
        )
    if not np.all((y == 0) | (y == 1)):
        raise ValidationError("labels must be 0 or 1")
    at_mean = np.logaddexp(0.0, _signed_scores(scores.means, y))
    gap = _jensen_gap(scores.means, scores.variances)
    return LossMoments(float(np.mean(at_mean + gap)), float(np.mean(at_mean)))
