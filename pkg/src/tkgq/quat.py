"""Batched quaternion arithmetic over structure-of-arrays components.

A batch of n quaternion embeddings of dimension d is stored as four real
arrays of identical shape [n, d]: the scalar part ``a`` and the three
imaginary parts ``b``, ``c``, ``d`` (coefficients of i, j, k). Keeping the
components in separate contiguous arrays lets every term of the Hamilton
product run as a flat multiply-add over aligned data, and lets callers
feed single components straight into BLAS.

All functions are pure: inputs are never mutated and results are freshly
allocated. Results follow the input dtype (float64 unless the caller opted
into float32 tables).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

__all__ = [
    "QuaternionBatch",
    "hamilton_product",
    "inner_product",
    "conjugate",
    "normalize",
    "elementwise_sine",
    "add",
    "scale",
    "magnitude",
]


@dataclass(frozen=True)
class QuaternionBatch:
    """Four aligned real component arrays (a + b i + c j + d k)."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    def __post_init__(self) -> None:
        arrays = tuple(np.asarray(x) for x in (self.a, self.b, self.c, self.d))
        if any(x.shape != arrays[0].shape for x in arrays[1:]):
            raise ShapeError(
                "component arrays must share one shape, got "
                + ", ".join(str(x.shape) for x in arrays)
            )
        for name, arr in zip("abcd", arrays):
            object.__setattr__(self, name, arr)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.a.shape

    @property
    def dtype(self) -> np.dtype:
        return self.a.dtype

    def components(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return (self.a, self.b, self.c, self.d)

    def gather(self, rows: np.ndarray) -> "QuaternionBatch":
        """Select rows (first axis) by index, copying into a new batch."""
        return QuaternionBatch(self.a[rows], self.b[rows], self.c[rows], self.d[rows])

    def copy(self) -> "QuaternionBatch":
        return QuaternionBatch(self.a.copy(), self.b.copy(), self.c.copy(), self.d.copy())

    def astype(self, dtype) -> "QuaternionBatch":
        if self.dtype == np.dtype(dtype):
            return self
        return QuaternionBatch(*(x.astype(dtype) for x in self.components()))

    @classmethod
    def zeros(cls, shape, dtype=np.float64) -> "QuaternionBatch":
        return cls(*(np.zeros(shape, dtype=dtype) for _ in range(4)))

    @classmethod
    def identity(cls, shape, dtype=np.float64) -> "QuaternionBatch":
        """Batch of multiplicative identities (1, 0, 0, 0)."""
        return cls(
            np.ones(shape, dtype=dtype),
            np.zeros(shape, dtype=dtype),
            np.zeros(shape, dtype=dtype),
            np.zeros(shape, dtype=dtype),
        )


def _check_same_shape(x: QuaternionBatch, y: QuaternionBatch, op: str) -> None:
    if x.shape != y.shape:
        raise ShapeError(f"{op}: operand shapes differ, {x.shape} vs {y.shape}")


def hamilton_product(x: QuaternionBatch, y: QuaternionBatch) -> QuaternionBatch:
    """Hamilton product x ⊗ y, elementwise over the batch.

    For x = (a1, b1, c1, d1) and y = (a2, b2, c2, d2):

        real: a1 a2 - b1 b2 - c1 c2 - d1 d2
        i:    a1 b2 + b1 a2 + c1 d2 - d1 c2
        j:    a1 c2 - b1 d2 + c1 a2 + d1 b2
        k:    a1 d2 + b1 c2 - c1 b2 + d1 a2

    Non-commutative: hamilton_product(x, y) != hamilton_product(y, x) in
    general (i j = k but j i = -k).
    """
    _check_same_shape(x, y, "hamilton_product")
    return QuaternionBatch(
        x.a * y.a - x.b * y.b - x.c * y.c - x.d * y.d,
        x.a * y.b + x.b * y.a + x.c * y.d - x.d * y.c,
        x.a * y.c - x.b * y.d + x.c * y.a + x.d * y.b,
        x.a * y.d + x.b * y.c - x.c * y.b + x.d * y.a,
    )


def inner_product(x: QuaternionBatch, y: QuaternionBatch) -> np.ndarray:
    """Quaternion dot product summed over the last (dimension) axis.

    Returns a real array of shape x.shape[:-1]; for [n, d] components this
    is the length-n vector of per-row scores a1·a2 + b1·b2 + c1·c2 + d1·d2.
    """
    _check_same_shape(x, y, "inner_product")
    return (x.a * y.a + x.b * y.b + x.c * y.c + x.d * y.d).sum(axis=-1)


def conjugate(x: QuaternionBatch) -> QuaternionBatch:
    """Negate the imaginary components: (a, -b, -c, -d)."""
    return QuaternionBatch(x.a, -x.b, -x.c, -x.d)


def magnitude(x: QuaternionBatch) -> np.ndarray:
    """Entrywise quaternion norm sqrt(a^2 + b^2 + c^2 + d^2), same shape as a component."""
    return np.sqrt(x.a * x.a + x.b * x.b + x.c * x.c + x.d * x.d)


def normalize(x: QuaternionBatch) -> QuaternionBatch:
    """Project every entry onto the unit sphere.

    Zero-norm entries map to the identity (1, 0, 0, 0) instead of NaN so a
    degenerate rotor still acts as a valid (identity) rotation.
    """
    n = magnitude(x)
    zero = n == 0
    safe = np.where(zero, 1.0, n)
    one = np.asarray(1.0, dtype=x.dtype)
    nil = np.asarray(0.0, dtype=x.dtype)
    return QuaternionBatch(
        np.where(zero, one, x.a / safe),
        np.where(zero, nil, x.b / safe),
        np.where(zero, nil, x.c / safe),
        np.where(zero, nil, x.d / safe),
    )


def elementwise_sine(x: QuaternionBatch) -> QuaternionBatch:
    """sin applied independently to every entry of all four components."""
    return QuaternionBatch(np.sin(x.a), np.sin(x.b), np.sin(x.c), np.sin(x.d))


def add(x: QuaternionBatch, y: QuaternionBatch) -> QuaternionBatch:
    """Componentwise sum."""
    _check_same_shape(x, y, "add")
    return QuaternionBatch(x.a + y.a, x.b + y.b, x.c + y.c, x.d + y.d)


def scale(x: QuaternionBatch, s: float) -> QuaternionBatch:
    """Scalar multiple of every component."""
    return QuaternionBatch(x.a * s, x.b * s, x.c * s, x.d * s)
