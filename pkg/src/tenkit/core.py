"""Dense d-way tensors and the elementary multilinear operations.

Storage convention: entries are linearized first-index-fastest, so the
1-based multi-index (i_1, ..., i_d) lives at flat position
``i_1 + n_1 (i_2 - 1) + n_1 n_2 (i_3 - 1) + ...`` (minus one for 0-based
storage).  ``vectorize`` returns that flat array verbatim, and every other
module relies on this ordering.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "DimensionError",
    "DenseTensor",
    "Rank1Tensor",
    "check_shape",
    "linear_index",
    "multi_index",
    "inner_product",
    "frobenius_norm",
    "mode_k_product",
    "multi_mode_product",
    "matricize",
    "fold",
    "vectorize",
    "kronecker_power",
    "kronecker_product",
    "outer",
    "OpCounter",
]

_MAX_ELEMENTS = sys.maxsize // 8


class DimensionError(ValueError):
    """Raised for incompatible shapes, modes or indices."""


class OpCounter:
    """Tally of multiply-add operations charged by instrumented kernels.

    Charges may carry a tag; ``tags`` keeps the per-tag subtotals.
    """

    def __init__(self):
        self.count = 0
        self.tags: dict = {}

    def add(self, n: int, tag: str | None = None) -> None:
        self.count += int(n)
        if tag is not None:
            self.tags[tag] = self.tags.get(tag, 0) + int(n)

    def matvec(self, rows: int, cols: int, tag: str | None = None) -> None:
        self.add(int(rows) * int(cols), tag)

    def reset(self) -> int:
        n, self.count = self.count, 0
        self.tags = {}
        return n


def check_shape(dims: Iterable[int]) -> tuple[int, ...]:
    dims = tuple(int(n) for n in dims)
    if len(dims) < 1:
        raise DimensionError("tensor order must be at least 1")
    if any(n < 1 for n in dims):
        raise DimensionError(f"all dimensions must be positive, got {dims}")
    if math.prod(dims) > _MAX_ELEMENTS:
        raise DimensionError(f"shape {dims} exceeds the addressable element count")
    return dims


def linear_index(index: Sequence[int], shape: Sequence[int]) -> int:
    """0-based flat position of a 1-based multi-index."""
    if len(index) != len(shape):
        raise DimensionError(f"index {tuple(index)} has wrong length for shape {tuple(shape)}")
    pos, stride = 0, 1
    for i, n in zip(index, shape):
        if not 1 <= i <= n:
            raise DimensionError(f"index {tuple(index)} out of range for shape {tuple(shape)}")
        pos += (int(i) - 1) * stride
        stride *= n
    return pos


def multi_index(pos: int, shape: Sequence[int]) -> tuple[int, ...]:
    """Inverse of :func:`linear_index`."""
    idx = []
    for n in shape:
        idx.append(pos % n + 1)
        pos //= n
    return tuple(idx)


class DenseTensor:
    """Immutable dense tensor of 64-bit floats.

    Parameters
    ----------
    array : array_like
        Either a d-dimensional array whose axes are the tensor modes, or a
        flat array when ``shape`` is given (interpreted in first-index-fastest
        order).
    shape : sequence of int, optional
        Tensor dimensions ``(n_1, ..., n_d)``.
    """

    __slots__ = ("_array",)

    def __init__(self, array, shape: Sequence[int] | None = None):
        arr = np.asarray(array, dtype=np.float64)
        if shape is not None:
            dims = check_shape(shape)
            if arr.size != math.prod(dims):
                raise DimensionError(
                    f"data length {arr.size} does not match shape {dims}"
                )
            arr = arr.reshape(dims, order="F")
        else:
            if arr.ndim == 0:
                arr = arr.reshape(1)
            check_shape(arr.shape)
        if not np.all(np.isfinite(arr)):
            raise ValueError("tensor entries must be finite")
        arr = np.array(arr, dtype=np.float64, order="F", copy=True)
        arr.setflags(write=False)
        self._array = arr

    @classmethod
    def zeros(cls, shape: Sequence[int]) -> "DenseTensor":
        return cls(np.zeros(check_shape(shape)))

    @classmethod
    def from_function(cls, fn, shape: Sequence[int]) -> "DenseTensor":
        """Build a tensor from ``fn(i_1, ..., i_d)`` with 1-based indices."""
        dims = check_shape(shape)
        grids = np.meshgrid(*[np.arange(1, n + 1) for n in dims], indexing="ij")
        return cls(np.vectorize(fn, otypes=[float])(*grids))

    @property
    def shape(self) -> tuple[int, ...]:
        return self._array.shape

    @property
    def order(self) -> int:
        return self._array.ndim

    @property
    def size(self) -> int:
        return self._array.size

    @property
    def array(self) -> np.ndarray:
        """Read-only d-dimensional view, axis k = mode k+1."""
        return self._array

    @property
    def data(self) -> np.ndarray:
        """Flat data in linearization order (a read-only view)."""
        return self._array.reshape(-1, order="F")

    def get(self, index: Sequence[int]) -> float:
        """Entry at a 1-based multi-index."""
        linear_index(index, self.shape)
        return float(self._array[tuple(int(i) - 1 for i in index)])

    def __getitem__(self, index):
        return self.get(index)

    def __add__(self, other: "DenseTensor") -> "DenseTensor":
        _same_shape(self, other)
        return DenseTensor(self._array + other._array)

    def __sub__(self, other: "DenseTensor") -> "DenseTensor":
        _same_shape(self, other)
        return DenseTensor(self._array - other._array)

    def __mul__(self, scalar: float) -> "DenseTensor":
        return DenseTensor(self._array * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "DenseTensor":
        return DenseTensor(-self._array)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DenseTensor):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self._array, other._array)

    __hash__ = None

    def __repr__(self) -> str:
        return f"DenseTensor(shape={self.shape})"

    def norm(self) -> float:
        return frobenius_norm(self)


def _same_shape(a: DenseTensor, b: DenseTensor) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")


@dataclass(frozen=True)
class Rank1Tensor:
    """Weighted outer product ``weight * u1 o u2 o ... o ud``."""

    vectors: tuple
    weight: float = 1.0

    def __post_init__(self):
        vecs = tuple(np.asarray(v, dtype=np.float64).ravel() for v in self.vectors)
        if not vecs:
            raise DimensionError("a rank-1 tensor needs at least one vector")
        if any(v.size == 0 for v in vecs):
            raise DimensionError("rank-1 vectors must be non-empty")
        object.__setattr__(self, "vectors", vecs)
        object.__setattr__(self, "weight", float(self.weight))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(v.size for v in self.vectors)

    @property
    def order(self) -> int:
        return len(self.vectors)

    def densify(self) -> DenseTensor:
        out = self.vectors[0]
        for v in self.vectors[1:]:
            out = np.multiply.outer(out, v)
        return DenseTensor(self.weight * out)

    def entry(self, index: Sequence[int]) -> float:
        linear_index(index, self.shape)
        val = self.weight
        for v, i in zip(self.vectors, index):
            val *= v[i - 1]
        return float(val)


def outer(*vectors, weight: float = 1.0) -> Rank1Tensor:
    return Rank1Tensor(tuple(vectors), weight)


def inner_product(a: DenseTensor, b: DenseTensor) -> float:
    """Sum of entrywise products of two equally shaped tensors.

    A :class:`Rank1Tensor` argument is contracted mode by mode instead of
    being densified.
    """
    if isinstance(b, Rank1Tensor) and isinstance(a, DenseTensor):
        a, b = b, a
    if isinstance(a, Rank1Tensor):
        if isinstance(b, Rank1Tensor):
            if a.shape != b.shape:
                raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
            return a.weight * b.weight * math.prod(
                float(u @ v) for u, v in zip(a.vectors, b.vectors)
            )
        if a.shape != b.shape:
            raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
        t = b.array
        # contract the last mode first so the remaining axes stay leading
        for v in reversed(a.vectors):
            t = t @ v
        return a.weight * float(t)
    _same_shape(a, b)
    return float(np.dot(a.data, b.data))


def frobenius_norm(a: DenseTensor) -> float:
    return math.sqrt(max(inner_product(a, a), 0.0))


def _check_mode(k: int, d: int) -> int:
    if not 1 <= k <= d:
        raise DimensionError(f"mode {k} out of range for order {d}")
    return k - 1


def mode_k_product(a: DenseTensor, k: int, u) -> DenseTensor:
    """k-mode product ``A x_k U`` for a ``p_k x n_k`` matrix ``U`` (1-based k)."""
    ax = _check_mode(k, a.order)
    u = np.atleast_2d(np.asarray(u, dtype=np.float64))
    if u.shape[1] != a.shape[ax]:
        raise DimensionError(
            f"matrix has {u.shape[1]} columns, mode {k} has size {a.shape[ax]}"
        )
    out = np.tensordot(u, a.array, axes=([1], [ax]))
    return DenseTensor(np.moveaxis(out, 0, ax))


def multi_mode_product(a: DenseTensor, matrices: Sequence) -> DenseTensor:
    """``[[A; U1, ..., Ud]]``; ``None`` entries skip a mode."""
    if len(matrices) != a.order:
        raise DimensionError(f"need {a.order} matrices, got {len(matrices)}")
    out = a
    for k, u in enumerate(matrices, start=1):
        if u is not None:
            out = mode_k_product(out, k, u)
    return out


def matricize(a: DenseTensor, n: int) -> np.ndarray:
    """Mode-n unfolding.

    Rows follow ``i_n``; columns run over the remaining indices in ascending
    mode order with the earliest mode varying fastest.
    """
    ax = _check_mode(n, a.order)
    moved = np.moveaxis(a.array, ax, 0)
    return moved.reshape(a.shape[ax], -1, order="F").copy()


def fold(matrix, n: int, shape: Sequence[int]) -> DenseTensor:
    """Inverse of :func:`matricize`."""
    dims = check_shape(shape)
    ax = _check_mode(n, len(dims))
    matrix = np.asarray(matrix, dtype=np.float64)
    rest = dims[:ax] + dims[ax + 1 :]
    if matrix.shape != (dims[ax], math.prod(rest)):
        raise DimensionError(f"matrix shape {matrix.shape} does not fit {dims} mode {n}")
    moved = matrix.reshape((dims[ax],) + rest, order="F")
    return DenseTensor(np.moveaxis(moved, 0, ax))


def vectorize(a: DenseTensor) -> np.ndarray:
    return a.data.copy()


def kronecker_product(x, y) -> np.ndarray:
    """Standard Kronecker product of two vectors or matrices."""
    return np.kron(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64))


def kronecker_power(x, d: int) -> np.ndarray:
    """``x (x) x (x) ... (x) x`` with ``d`` factors."""
    d = int(d)
    if d < 1:
        raise ValueError("Kronecker power needs d >= 1")
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size > 1 and d * math.log(x.size) > math.log(_MAX_ELEMENTS):
        raise OverflowError(f"{x.size}^{d} entries exceed the addressable size")
    out = x
    for _ in range(d - 1):
        out = np.kron(out, x)
    return out
