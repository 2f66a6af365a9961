"""Core value types: element-wise Gaussian moment tensors and filter geometry.

A MomentTensor carries one mean and one variance per element and is the
currency every layer consumes and produces.  All arithmetic is float64;
instances are immutable (the backing arrays are locked) and safe to share
between threads.
"""

import json
from dataclasses import dataclass, field

import numpy as np

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
]


class ValidationError(ValueError):
    """A domain invariant was violated."""


class ShapeMismatchError(ValidationError):
    """Array shapes or layer geometry do not line up."""


class NegativeVarianceError(ValidationError):
    """A variance entry is negative."""


class NonFiniteError(ValidationError):
    """A NaN or infinity appeared where finite data is required."""


class UnknownLayerError(ValidationError):
    """A layer kind outside the supported set was requested."""


def output_dim(n: int, k: int, s: int, p: int) -> int:
    """Output size of a k-wide filter swept with stride s over an n-wide map
    padded by p on each side: floor((n - k + 2p) / s) + 1.
    """
    if n < 1 or k < 1 or s < 1 or p < 0:
        raise ValidationError(f"invalid filter geometry: n={n}, k={k}, s={s}, p={p}")
    if n - k + 2 * p < 0:
        raise ShapeMismatchError(
            f"kernel larger than padded input: n={n}, k={k}, p={p}"
        )
    return (n - k + 2 * p) // s + 1


@dataclass(frozen=True)
class FilterGeometry:
    """Square filtering geometry; the output size d is derived, never stored independently."""

    n: int
    k: int
    s: int = 1
    p: int = 0
    d: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "d", output_dim(self.n, self.k, self.s, self.p))


def _frozen_array(values, name: str) -> np.ndarray:
    try:
        arr = np.array(values, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name} is not a numeric array: {exc}") from None
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class MomentTensor:
    """Paired mean and variance arrays of identical shape.

    Construction validates the full invariant set: equal shapes, finite
    entries, non-negative variances.  Use :func:`floor_variances` to clean up
    round-off negatives before constructing.
    """

    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        means = _frozen_array(self.means, "means")
        variances = _frozen_array(self.variances, "variances")
        if means.shape != variances.shape:
            raise ShapeMismatchError(
                f"shape mismatch: means {means.shape} vs variances {variances.shape}"
            )
        if not np.all(np.isfinite(means)) or not np.all(np.isfinite(variances)):
            raise NonFiniteError("non-finite entry in means or variances")
        if np.any(variances < 0.0):
            raise NegativeVarianceError(
                f"negative variance: min entry {variances.min()}"
            )
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.means.shape

    @property
    def size(self) -> int:
        return self.means.size

    def to_json_dict(self) -> dict:
        return {
            "shape": list(self.shape),
            "means": [float(v) for v in self.means.ravel()],
            "variances": [float(v) for v in self.variances.ravel()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)

    @classmethod
    def from_json_dict(cls, doc: dict) -> "MomentTensor":
        if not isinstance(doc, dict):
            raise ValidationError("moment tensor document must be a JSON object")
        for key in ("shape", "means", "variances"):
            if key not in doc:
                raise ValidationError(f"moment tensor document missing field '{key}'")
        shape = doc["shape"]
        if not isinstance(shape, list) or not all(
            isinstance(v, int) and v > 0 for v in shape
        ):
            raise ValidationError(f"invalid shape {shape!r}: expected positive integers")
        expected = int(np.prod(shape)) if shape else 1
        means, variances = doc["means"], doc["variances"]
        if len(means) != expected or len(variances) != expected:
            raise ShapeMismatchError(
                f"shape mismatch: shape {shape} implies {expected} entries, "
                f"got {len(means)} means and {len(variances)} variances"
            )
        return cls(
            np.asarray(means, dtype=np.float64).reshape(shape),
            np.asarray(variances, dtype=np.float64).reshape(shape),
        )

    @classmethod
    def from_json(cls, text: str) -> "MomentTensor":
        return cls.from_json_dict(json.loads(text))


def make_moment_tensor(means, variances) -> MomentTensor:
    """Validating constructor; rejects shape mismatch, negative variance and
    non-finite entries, each with a distinct error type."""
    return MomentTensor(means, variances)


def floor_variances(variances, floor: float = 0.0) -> np.ndarray:
    """Replace every variance entry below `floor` by `floor` (array level,
    usable before validation to absorb -epsilon round-off)."""
    if not (floor >= 0.0) or not np.isfinite(floor):
        raise ValidationError(f"variance floor must be finite and >= 0, got {floor}")
    return np.maximum(np.asarray(variances, dtype=np.float64), floor)


def clamp_variances(t: MomentTensor, floor: float = 0.0) -> MomentTensor:
    """Return a copy of `t` with variances floored at `floor`; means untouched."""
    return MomentTensor(t.means, floor_variances(t.variances, floor))
