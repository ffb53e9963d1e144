"""New random inputs from lower-level surrogates.

A surrogate ``y(xi)`` defines a new scalar random variable.  Its orthonormal
polynomials and Gauss rule come from the discrete Stieltjes procedure on
the quadrature-discretized measure: the grid values of ``y`` with the grid
weights.  Every expectation is a weighted inner product of tensor trains,
so the grid tensor is never formed after compression.

Internally the trains carry a factor ``sqrt(w_1^{i1} ... w_d^{id})``; plain
inner products of scaled trains are then expectations, and TT rounding
works in the norm that matters for them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..core import DenseTensor
from ..decomp import TTModel, tt_add, tt_hadamard, tt_inner, tt_round, tt_scale, tt_svd
from .gpc import GpcExpansion
from .quadrature import QuadratureGrid, golub_welsch


class StieltjesBreakdown(ArithmeticError):
    def __init__(self, degree: int, beta: float):
        super().__init__(
            f"Stieltjes recurrence broke down at degree {degree}: beta = {beta:.3e} is not positive; "
            f"the discretized measure supports fewer than {degree + 1} distinct points"
        )
        self.degree = degree


class CompressionError(ArithmeticError):
    pass


@dataclass
class RecurrenceBasis:
    """Orthonormal polynomials from recurrence tables (alpha_k, beta_k)."""

    alpha: np.ndarray
    beta: np.ndarray

    def evaluate(self, x, degree: int) -> np.ndarray:
        if degree >= self.alpha.size:
            raise ValueError(f"recurrence tables only reach degree {self.alpha.size - 1}")
        x = np.asarray(x, dtype=np.float64)
        out = np.empty(x.shape + (degree + 1,))
        out[..., 0] = 1.0 / math.sqrt(self.beta[0])
        if degree >= 1:
            out[..., 1] = (x - self.alpha[0]) * out[..., 0] / math.sqrt(self.beta[1])
        for k in range(1, degree):
            out[..., k + 1] = (
                (x - self.alpha[k]) * out[..., k] - math.sqrt(self.beta[k]) * out[..., k - 1]
            ) / math.sqrt(self.beta[k + 1])
        return out


@dataclass
class HierarchicalRule:
    alpha: np.ndarray
    beta: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    tt_ranks: tuple
    compression_error: float
    degenerate: bool = False
    meta: dict = field(default_factory=dict)

    def basis(self) -> RecurrenceBasis:
        return RecurrenceBasis(self.alpha, self.beta)

    def to_json(self) -> dict:
        return {
            "alpha": [float(v) for v in self.alpha],
            "beta": [float(v) for v in self.beta],
            "nodes": [float(v) for v in self.nodes],
            "weights": [float(v) for v in self.weights],
            "tt_ranks": list(self.tt_ranks),
            "compression_error": self.compression_error,
            "degenerate": self.degenerate,
        }


def dense_tt_builder(surrogate: GpcExpansion, grid: QuadratureGrid, eps: float) -> tuple[TTModel, float]:
    """Grid values of the surrogate, compressed by TT-SVD.

    Returns the train and its measured relative error.  This is the
    desk-scale builder; a cross-approximation builder with the same
    signature can replace it.
    """
    y = surrogate.grid_values(grid)
    tt = tt_svd(y, eps)
    ny = float(np.linalg.norm(y.data))
    err = float(np.linalg.norm(tt.full_array().ravel() - y.array.ravel(order="C"))) / ny if ny else 0.0
    return tt, err


def sqrt_weight_train(grid: QuadratureGrid) -> TTModel:
    return TTModel(tuple(np.sqrt(w)[None, :, None] for w in grid.weights))


def expectation(t: TTModel, grid: QuadratureGrid) -> float:
    """``E[g] = <G, W>`` for an unscaled train ``G`` of grid values."""
    s = sqrt_weight_train(grid)
    return tt_inner(tt_hadamard(t, s), s)


def tt_moments(y: TTModel, grid: QuadratureGrid, max_order: int, eps: float = 1e-13) -> np.ndarray:
    """``E[y^s]`` for s = 0..max_order from weighted TT contractions.

    ``E[y^s] = <y^a sqrt(W), y^b sqrt(W)>`` with ``a + b = s``, so only
    powers up to ``ceil(max_order / 2)`` are formed (and rounded).
    """
    powers = [sqrt_weight_train(grid)]
    for _ in range((max_order + 1) // 2):
        powers.append(tt_round(tt_hadamard(y, powers[-1]), eps))
    out = np.empty(max_order + 1)
    for s in range(max_order + 1):
        a = (s + 1) // 2
        out[s] = tt_inner(powers[a], powers[s - a])
    return out


def hierarchical_basis(
    surrogate: GpcExpansion,
    grid: QuadratureGrid,
    n_new: int,
    eps_tt: float = 1e-12,
    builder: Callable | None = None,
    breakdown_tol: float = 1e-12,
) -> HierarchicalRule:
    """Orthonormal basis and ``n_new``-point Gauss rule for ``y = surrogate(xi)``.

    Parameters
    ----------
    surrogate : GpcExpansion
        Lower-level model over the grid's parameters.
    grid : QuadratureGrid
        Discretization of the parameter measure.
    n_new : int
        Size of the emitted rule.
    eps_tt : float
        Relative accuracy for TT compression and rounding.
    builder : callable, optional
        ``builder(surrogate, grid, eps) -> (TTModel, rel_error)``; defaults
        to full-grid evaluation plus TT-SVD.

    Raises
    ------
    CompressionError
        If the builder misses ``eps_tt``.
    StieltjesBreakdown
        If a recurrence coefficient beta at degree >= 2 is not positive.
        A vanishing beta at degree 1 means ``y`` is constant; the rule then
        has one node at that constant.
    """
    if n_new < 1:
        raise ValueError("n_new must be >= 1")
    builder = builder or dense_tt_builder
    y, err = builder(surrogate, grid, eps_tt)
    if err > eps_tt * (1 + 1e-6) + 1e-15:
        raise CompressionError(f"TT compression error {err:.3e} exceeds eps_tt = {eps_tt:.3e}")
    p_prev = None
    p = sqrt_weight_train(grid)
    alpha = np.zeros(n_new)
    beta = np.zeros(n_new)
    beta[0] = tt_inner(p, p)
    p = tt_scale(p, 1.0 / math.sqrt(beta[0]))
    for k in range(n_new):
        q = tt_round(tt_hadamard(y, p), eps_tt)
        alpha[k] = tt_inner(q, p)
        if k == n_new - 1:
            break
        r = tt_add(q, tt_scale(p, -alpha[k]))
        if p_prev is not None:
            r = tt_add(r, tt_scale(p_prev, -math.sqrt(beta[k])))
        r = tt_round(r, eps_tt)
        b = tt_inner(r, r)
        qq = tt_inner(q, q)
        if b <= (breakdown_tol**2) * qq:
            if k == 0:
                return HierarchicalRule(
                    alpha[:1], beta[:1], np.array([alpha[0]]), np.array([beta[0]]),
                    y.ranks, err, degenerate=True,
                )
            raise StieltjesBreakdown(k + 1, b)
        beta[k + 1] = b
        p_prev, p = p, tt_scale(r, 1.0 / math.sqrt(b))
    nodes, weights = golub_welsch(alpha, beta)
    return HierarchicalRule(alpha, beta, nodes, weights, y.ranks, err)
