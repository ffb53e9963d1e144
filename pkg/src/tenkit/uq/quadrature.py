"""Orthonormal polynomial bases and Gauss rules via Golub-Welsch.

All rules are for probability measures, so weights sum to one.  The
symmetric tridiagonal eigenproblem is solved here by the implicit-shift
QL iteration rather than a general dense solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import DimensionError, Rank1Tensor

GAUSSIAN = "gaussian"
UNIFORM = "uniform"
DISTRIBUTIONS = (GAUSSIAN, UNIFORM)


class UnsupportedDistribution(ValueError):
    pass


class EigenConvergenceError(ArithmeticError):
    pass


def tridiag_eig(diag, off, max_sweeps: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and eigenvectors of a symmetric tridiagonal matrix.

    Implicit-shift QL (Wilkinson shift) with the rotations accumulated into
    the identity.  ``off[i]`` couples rows ``i`` and ``i + 1``.  Eigenvalues
    come back ascending with eigenvectors as matching columns.
    """
    d = np.array(diag, dtype=np.float64)
    n = d.size
    e = np.zeros(n)
    e[: n - 1] = np.asarray(off, dtype=np.float64)[: n - 1]
    z = np.eye(n)
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= np.finfo(float).eps * dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > max_sweeps:
                raise EigenConvergenceError(f"QL iteration stalled at index {l}")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = m - 1
            underflow = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                zi = z[:, i].copy()
                z[:, i] = c * zi - s * z[:, i + 1]
                z[:, i + 1] = s * zi + c * z[:, i + 1]
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    order = np.argsort(d, kind="stable")
    return d[order], z[:, order]


def golub_welsch(alpha, beta) -> tuple[np.ndarray, np.ndarray]:
    """Gauss nodes and weights from recurrence coefficients.

    ``alpha[k]``, ``beta[k]`` for k = 0..n-1, with ``beta[0]`` the total
    mass of the measure and ``beta[k] > 0`` for k >= 1.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    n = alpha.size
    if n < 1 or beta.size < n:
        raise ValueError("need n alphas and n betas")
    if np.any(beta[1:n] <= 0):
        raise ValueError("recurrence betas must be positive")
    nodes, vecs = tridiag_eig(alpha, np.sqrt(beta[1:n]))
    # The eigenvector for node x is proportional to (psi_0(x), ..., psi_{n-1}(x)),
    # so its squared normalized first component is 1 / sum_k psi_k(x)^2.
    # Evaluating that through the recurrence keeps tail weights accurate in
    # relative terms, where the QL eigenvector entries are only accurate
    # to machine epsilon in absolute terms.
    psi = _orthonormal_table(nodes, alpha, beta, n - 1)
    weights = beta[0] / np.sum(psi**2, axis=1)
    return nodes, weights


def _orthonormal_table(x, alpha, beta, degree):
    out = np.empty((x.size, degree + 1))
    out[:, 0] = 1.0
    if degree >= 1:
        out[:, 1] = (x - alpha[0]) / math.sqrt(beta[1])
    for k in range(1, degree):
        out[:, k + 1] = ((x - alpha[k]) * out[:, k] - math.sqrt(beta[k]) * out[:, k - 1]) / math.sqrt(
            beta[k + 1]
        )
    return out


class OrthoBasis:
    """Orthonormal polynomials for a supported probability measure.

    Recurrence: ``sqrt(b_{k+1}) psi_{k+1} = (x - a_k) psi_k - sqrt(b_k) psi_{k-1}``
    with ``psi_0 = 1``.  Gaussian uses probabilists' Hermite (``a = 0``,
    ``b_k = k``); uniform on [-1, 1] uses Legendre (``a = 0``,
    ``b_k = k^2 / (4k^2 - 1)``).
    """

    def __init__(self, kind: str):
        if kind not in DISTRIBUTIONS:
            raise UnsupportedDistribution(f"unsupported distribution {kind!r}; use one of {DISTRIBUTIONS}")
        self.kind = kind

    def __repr__(self) -> str:
        return f"OrthoBasis({self.kind!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, OrthoBasis) and other.kind == self.kind

    def __hash__(self):
        return hash(self.kind)

    def recurrence(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        k = np.arange(n, dtype=np.float64)
        alpha = np.zeros(n)
        if self.kind == GAUSSIAN:
            beta = k.copy()
        else:
            beta = k**2 / (4.0 * k**2 - 1.0)
        beta[0] = 1.0
        return alpha, beta

    def evaluate(self, x, degree: int) -> np.ndarray:
        """``psi_0..psi_degree`` at ``x``: shape ``x.shape + (degree + 1,)``."""
        x = np.asarray(x, dtype=np.float64)
        alpha, beta = self.recurrence(degree + 2)
        out = np.empty(x.shape + (degree + 1,))
        out[..., 0] = 1.0
        if degree >= 1:
            out[..., 1] = (x - alpha[0]) / math.sqrt(beta[1])
        for k in range(1, degree):
            out[..., k + 1] = (
                (x - alpha[k]) * out[..., k] - math.sqrt(beta[k]) * out[..., k - 1]
            ) / math.sqrt(beta[k + 1])
        return out

    def gauss(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        if n < 1:
            raise ValueError("quadrature size must be >= 1")
        return golub_welsch(*self.recurrence(n))

    def abs_moment(self, k: int) -> float:
        """Analytic ``E[|x|^k]``, the natural scale for odd-moment errors."""
        if self.kind == GAUSSIAN:
            return 2 ** (k / 2) * math.gamma((k + 1) / 2) / math.sqrt(math.pi)
        return 1.0 / (k + 1)

    def moment(self, k: int) -> float:
        """Analytic ``E[x^k]`` of the measure."""
        if k % 2:
            return 0.0
        if self.kind == GAUSSIAN:
            return float(math.prod(range(k - 1, 0, -2))) if k else 1.0
        return 1.0 / (k + 1)


@dataclass(frozen=True)
class ParamSpec:
    """Independent parameters: a distribution tag and a rule size per dimension."""

    kinds: tuple
    sizes: tuple

    def __post_init__(self):
        kinds = tuple(str(k) for k in self.kinds)
        sizes = tuple(int(n) for n in self.sizes)
        if len(kinds) < 1:
            raise ValueError("need at least one parameter")
        if len(kinds) != len(sizes):
            raise DimensionError("one rule size per parameter")
        for k in kinds:
            if k not in DISTRIBUTIONS:
                raise UnsupportedDistribution(f"unsupported distribution {k!r}; use one of {DISTRIBUTIONS}")
        if any(n < 1 for n in sizes):
            raise ValueError("rule sizes must be >= 1")
        object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "sizes", sizes)

    @classmethod
    def uniform_spec(cls, d: int, n: int, kind: str = GAUSSIAN) -> "ParamSpec":
        return cls((kind,) * d, (n,) * d)

    @property
    def d(self) -> int:
        return len(self.kinds)

    @property
    def grid_size(self) -> int:
        return math.prod(self.sizes)

    def bases(self) -> list[OrthoBasis]:
        return [OrthoBasis(k) for k in self.kinds]

    def to_json(self) -> dict:
        return {"kinds": list(self.kinds), "sizes": list(self.sizes)}

    @classmethod
    def from_json(cls, obj) -> "ParamSpec":
        return cls(tuple(obj["kinds"]), tuple(obj["sizes"]))


@dataclass(frozen=True)
class QuadratureGrid:
    """Tensor-product Gauss grid: per-dimension nodes and weights."""

    spec: ParamSpec
    nodes: tuple
    weights: tuple

    @property
    def shape(self) -> tuple[int, ...]:
        return self.spec.sizes

    def weight_rank1(self) -> Rank1Tensor:
        """The weight tensor with entries ``w_1^{i1} ... w_d^{id}``."""
        return Rank1Tensor(tuple(self.weights))

    def points(self, idx0: np.ndarray) -> np.ndarray:
        """Parameter points for 0-based grid index rows."""
        idx0 = np.atleast_2d(idx0)
        return np.column_stack([self.nodes[k][idx0[:, k]] for k in range(self.spec.d)])

    def all_points(self) -> np.ndarray:
        """Every grid point, first index fastest: shape ``(N, d)``."""
        grids = np.meshgrid(*self.nodes, indexing="ij")
        return np.column_stack([g.reshape(-1, order="F") for g in grids])


def build_quadrature(spec: ParamSpec) -> QuadratureGrid:
    nodes, weights = [], []
    for basis, n in zip(spec.bases(), spec.sizes):
        x, w = basis.gauss(n)
        nodes.append(x)
        weights.append(w)
    return QuadratureGrid(spec, tuple(nodes), tuple(weights))
