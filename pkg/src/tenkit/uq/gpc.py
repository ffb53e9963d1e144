"""Truncated polynomial-chaos expansions over independent parameters."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ..core import DenseTensor, DimensionError, Rank1Tensor, inner_product
from .quadrature import OrthoBasis, ParamSpec, QuadratureGrid


def total_degree_indices(d: int, p: int) -> np.ndarray:
    """All multi-indices with ``|alpha| <= p``.

    Graded order: by total degree, then reverse lexicographic, so for d = 2
    the sequence starts (0,0), (1,0), (0,1), (2,0), (1,1), (0,2).
    """
    if d < 1 or p < 0:
        raise ValueError("need d >= 1 and p >= 0")
    out = []
    for deg in range(p + 1):
        level = [a for a in itertools.product(range(deg, -1, -1), repeat=d) if sum(a) == deg]
        out.extend(sorted(level, reverse=True))
    return np.array(out, dtype=np.int64).reshape(-1, d)


@dataclass
class GpcExpansion:
    """``y(xi) ~ sum_alpha c_alpha Psi_alpha(xi)`` with orthonormal ``Psi``."""

    kinds: tuple
    order: int
    indices: np.ndarray
    coeffs: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.kinds = tuple(self.kinds)
        self.indices = np.asarray(self.indices, dtype=np.int64).reshape(-1, len(self.kinds))
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64).ravel()
        if self.coeffs.size != self.indices.shape[0]:
            raise DimensionError("one coefficient per multi-index")
        if np.any(self.indices.sum(axis=1) > self.order):
            raise ValueError("multi-index exceeds the order cap")

    @property
    def d(self) -> int:
        return len(self.kinds)

    def bases(self) -> list[OrthoBasis]:
        return [OrthoBasis(k) for k in self.kinds]

    def basis_matrix(self, xi) -> np.ndarray:
        """``Psi_alpha(xi_j)`` for points ``xi`` of shape (N, d): (N, m)."""
        xi = np.atleast_2d(np.asarray(xi, dtype=np.float64))
        if xi.shape[1] != self.d:
            raise DimensionError(f"points must have {self.d} coordinates")
        out = np.ones((xi.shape[0], self.indices.shape[0]))
        for k, b in enumerate(self.bases()):
            tab = b.evaluate(xi[:, k], self.order)
            out *= tab[:, self.indices[:, k]]
        return out

    def evaluate(self, xi) -> np.ndarray:
        return self.basis_matrix(xi) @ self.coeffs

    def mean(self) -> float:
        zero = np.all(self.indices == 0, axis=1)
        return float(self.coeffs[zero].sum())

    def variance(self) -> float:
        zero = np.all(self.indices == 0, axis=1)
        return float(np.sum(self.coeffs[~zero] ** 2))

    def coefficient(self, alpha) -> float:
        hit = np.all(self.indices == np.asarray(alpha), axis=1)
        return float(self.coeffs[hit].sum())

    def grid_values(self, grid: QuadratureGrid) -> DenseTensor:
        """Surrogate values on every grid point, as a dense tensor."""
        if tuple(grid.spec.kinds) != self.kinds:
            raise DimensionError("grid and expansion use different parameter sets")
        tabs = [b.evaluate(x, self.order) for b, x in zip(self.bases(), grid.nodes)]
        out = np.zeros(grid.shape)
        for c, a in zip(self.coeffs, self.indices):
            if c == 0:
                continue
            term = tabs[0][:, a[0]]
            for k in range(1, self.d):
                term = np.multiply.outer(term, tabs[k][:, a[k]])
            out += c * term.reshape(grid.shape)
        return DenseTensor(out)

    def to_json(self) -> dict:
        return {
            "kinds": list(self.kinds),
            "order": self.order,
            "indices": self.indices.tolist(),
            "coeffs": [float(c) for c in self.coeffs],
            "mean": self.mean(),
            "variance": self.variance(),
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, obj) -> "GpcExpansion":
        return cls(tuple(obj["kinds"]), int(obj["order"]), obj["indices"], obj["coeffs"], obj.get("meta", {}))


def gpc_eval(exp: GpcExpansion, xi) -> float | np.ndarray:
    xi = np.asarray(xi, dtype=np.float64)
    vals = exp.evaluate(xi)
    return float(vals[0]) if xi.ndim == 1 else vals


def gpc_moments(exp: GpcExpansion) -> tuple[float, float]:
    """Mean ``c_0`` and variance ``sum_{alpha != 0} c_alpha^2``."""
    return exp.mean(), exp.variance()


def weight_tensor(grid: QuadratureGrid, alpha, bases=None) -> Rank1Tensor:
    """Rank-1 tensor with mode-k vector ``w_k^i psi_{alpha_k}(xi_k^i)``.

    ``<Y, W_alpha>`` is then the quadrature estimate of ``E[Psi_alpha y]``.
    """
    alpha = [int(a) for a in alpha]
    if len(alpha) != grid.spec.d:
        raise DimensionError("multi-index length must equal the parameter count")
    bases = bases or grid.spec.bases()
    vecs = []
    for b, x, w, a in zip(bases, grid.nodes, grid.weights, alpha):
        vecs.append(w * b.evaluate(x, a)[:, a])
    return Rank1Tensor(tuple(vecs))


def weight_tensors(grid: QuadratureGrid, indices) -> list[Rank1Tensor]:
    bases = grid.spec.bases()
    return [weight_tensor(grid, a, bases) for a in indices]


def project_coefficients(y: DenseTensor, grid: QuadratureGrid, p: int, meta=None) -> GpcExpansion:
    """``c_alpha = <Y, W_alpha>`` for every ``|alpha| <= p``, mode by mode."""
    idx = total_degree_indices(grid.spec.d, p)
    coeffs = np.array([inner_product(w, y) for w in weight_tensors(grid, idx)])
    return GpcExpansion(grid.spec.kinds, p, idx, coeffs, dict(meta or {}))


def gram_matrix(kinds, p: int, n_quad: int | None = None) -> np.ndarray:
    """``E[Psi_a Psi_b]`` for ``|a|, |b| <= p`` under a per-dimension Gauss rule.

    ``n_quad = p + 1`` nodes integrate degree ``2p`` exactly in each variable.
    """
    from .quadrature import build_quadrature

    d = len(kinds)
    n = n_quad or p + 1
    grid = build_quadrature(ParamSpec(tuple(kinds), (n,) * d))
    idx = total_degree_indices(d, p)
    g = np.ones((idx.shape[0], idx.shape[0]))
    for k, b in enumerate(grid.spec.bases()):
        tab = b.evaluate(grid.nodes[k], p)
        m = tab.T @ (grid.weights[k][:, None] * tab)
        g *= m[np.ix_(idx[:, k], idx[:, k])]
    return g
