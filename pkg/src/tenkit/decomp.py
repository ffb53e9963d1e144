"""Tensor decompositions: CP (ALS), Tucker/HOSVD, tensor train, TTr1.

All models are immutable once built and densify back to a
:class:`~tenkit.core.DenseTensor` with the same linearization as
:mod:`tenkit.core`.  Factored inner products never densify.
"""

from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from . import io as tio
from .core import (
    DenseTensor,
    DimensionError,
    OpCounter,
    Rank1Tensor,
    check_shape,
    linear_index,
    matricize,
    multi_mode_product,
)

log = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-10


class ConvergenceWarning(UserWarning):
    pass


# --------------------------------------------------------------------------
# helpers


def canonical_sign(u: np.ndarray) -> np.ndarray:
    """Per-column signs making each column's largest-magnitude entry positive."""
    u = np.atleast_2d(u)
    if u.size == 0:
        return np.ones(u.shape[1])
    idx = np.argmax(np.abs(u), axis=0)
    s = np.sign(u[idx, np.arange(u.shape[1])])
    s[s == 0] = 1.0
    return s


def svd_canonical(m: np.ndarray):
    """Economy SVD with deterministic singular-vector signs."""
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    sg = canonical_sign(u)
    return u * sg, s, vt * sg[:, None]


def numerical_rank(s: np.ndarray, shape) -> int:
    if s.size == 0 or s[0] == 0:
        return 0
    tol = s[0] * max(shape) * np.finfo(float).eps
    return int(np.sum(s > tol))


def khatri_rao(mats: Sequence[np.ndarray]) -> np.ndarray:
    """Column-wise Kronecker product; the first matrix varies slowest."""
    out = mats[0]
    for m in mats[1:]:
        r = out.shape[1]
        out = (out[:, None, :] * m[None, :, :]).reshape(-1, r)
    return out


def multilinear_rank(a: DenseTensor) -> tuple[int, ...]:
    ranks = []
    for k in range(1, a.order + 1):
        m = matricize(a, k)
        s = np.linalg.svd(m, compute_uv=False)
        ranks.append(numerical_rank(s, m.shape))
    return tuple(ranks)


def _as_dense(a) -> DenseTensor:
    if isinstance(a, DenseTensor):
        return a
    return DenseTensor(np.asarray(a, dtype=np.float64))


def _rel_err(a: DenseTensor, approx: np.ndarray, norm_a: float) -> float:
    err = float(np.linalg.norm((a.array - approx).ravel()))
    return err / norm_a if norm_a > 0 else err


# --------------------------------------------------------------------------
# models


@dataclass(frozen=True)
class CPModel:
    """``sum_i weights[i] * U1[:, i] o ... o Ud[:, i]`` with unit-norm columns."""

    weights: np.ndarray
    factors: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        fs = tuple(np.asarray(f, dtype=np.float64).reshape(f.shape[0], -1) for f in self.factors)
        if not fs:
            raise DimensionError("CP model needs at least one factor")
        for f in fs:
            if f.shape[1] != w.size:
                raise DimensionError("factor column counts must equal the number of weights")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "factors", fs)

    @property
    def rank(self) -> int:
        return self.weights.size

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)

    @property
    def order(self) -> int:
        return len(self.factors)

    def full_array(self) -> np.ndarray:
        t = self.factors[0] * self.weights
        for f in self.factors[1:]:
            t = t[..., None, :] * f
        return t.sum(axis=-1)

    def densify(self) -> DenseTensor:
        return DenseTensor(self.full_array())

    def entry(self, index: Sequence[int]) -> float:
        linear_index(index, self.shape)
        prod = self.weights.copy()
        for f, i in zip(self.factors, index):
            prod = prod * f[i - 1]
        return float(prod.sum())

    def entries(self, idx0: np.ndarray) -> np.ndarray:
        """Entries at 0-based index rows ``idx0`` of shape (s, d)."""
        prod = np.tile(self.weights, (idx0.shape[0], 1))
        for k, f in enumerate(self.factors):
            prod *= f[idx0[:, k]]
        return prod.sum(axis=1)

    def term(self, i: int) -> Rank1Tensor:
        return Rank1Tensor(tuple(f[:, i] for f in self.factors), self.weights[i])


def normalize_cp(weights, factors, sort: bool = True) -> CPModel:
    """Canonical form: unit columns, non-negative weights, descending order.

    Columns of modes 2..d get a positive largest-magnitude entry; mode 1
    absorbs any remaining sign.
    """
    w = np.array(weights, dtype=np.float64).ravel()
    fs = [np.array(f, dtype=np.float64) for f in factors]
    for k, f in enumerate(fs):
        nrm = np.linalg.norm(f, axis=0)
        zero = nrm == 0
        nrm[zero] = 1.0
        f /= nrm
        w *= np.where(zero, 0.0, nrm)
        if zero.any():
            f[:, zero] = 0.0
            f[0, zero] = 1.0
    for f in fs[1:]:
        sg = canonical_sign(f)
        f *= sg
        w *= sg
    neg = w < 0
    fs[0][:, neg] *= -1
    w[neg] *= -1
    if sort:
        order = np.argsort(-w, kind="stable")
        w = w[order]
        fs = [f[:, order] for f in fs]
    return CPModel(w, tuple(fs))


@dataclass(frozen=True)
class TuckerModel:
    core: DenseTensor
    factors: tuple
    hosvd: bool = False

    def __post_init__(self):
        fs = tuple(np.asarray(f, dtype=np.float64) for f in self.factors)
        if len(fs) != self.core.order:
            raise DimensionError("one factor per core mode required")
        for f, r in zip(fs, self.core.shape):
            if f.ndim != 2 or f.shape[1] != r:
                raise DimensionError("factor columns must match core dimensions")
        object.__setattr__(self, "factors", fs)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)

    @property
    def ranks(self) -> tuple[int, ...]:
        return self.core.shape

    def densify(self) -> DenseTensor:
        return multi_mode_product(self.core, self.factors)

    def entry(self, index: Sequence[int]) -> float:
        linear_index(index, self.shape)
        t = self.core.array
        for f, i in zip(reversed(self.factors), reversed(index)):
            t = t @ f[i - 1]
        return float(t)


@dataclass(frozen=True)
class TTModel:
    """Tensor train with cores of shape ``(r_{k-1}, n_k, r_k)``."""

    cores: tuple

    def __post_init__(self):
        cs = tuple(np.asarray(c, dtype=np.float64) for c in self.cores)
        if not cs:
            raise DimensionError("TT model needs at least one core")
        if cs[0].shape[0] != 1 or cs[-1].shape[2] != 1:
            raise DimensionError("boundary TT ranks must be 1")
        for a, b in zip(cs, cs[1:]):
            if a.shape[2] != b.shape[0]:
                raise DimensionError("adjacent TT cores have incompatible ranks")
        object.__setattr__(self, "cores", cs)

    @property
    def ranks(self) -> tuple[int, ...]:
        return (1,) + tuple(c.shape[2] for c in self.cores)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(c.shape[1] for c in self.cores)

    @property
    def order(self) -> int:
        return len(self.cores)

    def full_array(self) -> np.ndarray:
        t = self.cores[0].reshape(self.cores[0].shape[1], -1)
        dims = [self.cores[0].shape[1]]
        for c in self.cores[1:]:
            r0, n, r1 = c.shape
            t = (t @ c.reshape(r0, n * r1)).reshape(-1, r1)
            dims.append(n)
        # rows are (i_1, ..., i_d) with i_d fastest, i.e. C order over the axes
        return t.reshape(dims)

    def densify(self) -> DenseTensor:
        return DenseTensor(self.full_array())

    def entry(self, index: Sequence[int]) -> float:
        linear_index(index, self.shape)
        v = np.ones((1,))
        for c, i in zip(self.cores, index):
            v = v @ c[:, i - 1, :]
        return float(v[0])

    def norm(self) -> float:
        return math.sqrt(max(tt_inner(self, self), 0.0))


@dataclass(frozen=True)
class TTr1Model:
    """Orthogonal rank-1 expansion; ``terms`` keep the procedure's order."""

    weights: np.ndarray
    vectors: tuple  # d matrices, column i = vector of term i

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.float64).ravel())
        object.__setattr__(self, "vectors", tuple(np.asarray(v, dtype=np.float64) for v in self.vectors))

    @property
    def nterms(self) -> int:
        return self.weights.size

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(v.shape[0] for v in self.vectors)

    def as_cp(self) -> CPModel:
        return CPModel(self.weights, self.vectors)

    def densify(self) -> DenseTensor:
        return self.as_cp().densify()

    def truncate(self, k: int) -> "TTr1Model":
        """Keep the ``k`` terms with the largest weights (order preserved)."""
        keep = np.sort(np.argsort(-self.weights, kind="stable")[:k])
        return TTr1Model(self.weights[keep], tuple(v[:, keep] for v in self.vectors))

    def truncation_error(self, k: int) -> float:
        s = np.sort(self.weights)[::-1]
        return float(np.sqrt(np.sum(s[k:] ** 2)))


@dataclass(frozen=True)
class SymmetricCPModel:
    """``sum_i lambdas[i] * w_i o v_i o ... o v_i``.

    With ``first`` unset every mode uses ``v`` (full symmetry); otherwise
    mode 1 uses ``first`` and modes 2..order share ``v`` (partial symmetry).
    """

    lambdas: np.ndarray
    v: np.ndarray
    order: int
    first: np.ndarray | None = None

    @property
    def rank(self) -> int:
        return self.lambdas.size

    @property
    def shape(self) -> tuple[int, ...]:
        n1 = self.v.shape[0] if self.first is None else self.first.shape[0]
        return (n1,) + (self.v.shape[0],) * (self.order - 1)

    def factors(self) -> tuple:
        f1 = self.v if self.first is None else self.first
        return (f1,) + (self.v,) * (self.order - 1)

    def as_cp(self) -> CPModel:
        """Equivalent CP model; negative weights flip mode-1 columns."""
        fs = [f.copy() for f in self.factors()]
        lam = self.lambdas.copy()
        neg = lam < 0
        fs[0][:, neg] *= -1
        lam[neg] *= -1
        return CPModel(lam, tuple(fs))

    def densify(self) -> DenseTensor:
        return self.as_cp().densify()


@dataclass
class FitReport:
    residual: float
    iterations: int
    converged: bool
    trajectory: list = field(default_factory=list)
    regularized: bool = False
    restarts: int = 1
    monotone: bool = True
    target_met: bool | None = None


# --------------------------------------------------------------------------
# CP-ALS


def _hosvd_init(a: DenseTensor, r: int):
    fs = []
    for k in range(1, a.order + 1):
        u, _, _ = svd_canonical(matricize(a, k))
        fs.append(u[:, :r].copy())
    return fs


def _random_init(shape, r, rng):
    return [rng.standard_normal((n, r)) for n in shape]


def _als_run(a: DenseTensor, r: int, init, max_iters: int, tol: float):
    d = a.order
    norm_a = float(np.linalg.norm(a.data))
    fs = [np.array(f, dtype=np.float64) for f in init]
    unfold = [matricize(a, k + 1) for k in range(d)]
    w = np.ones(r)
    regularized = False
    traj = []
    prev = math.inf
    converged = False
    it = 0
    if d == 1:
        u = a.data / norm_a if norm_a > 0 else np.eye(a.shape[0], 1)[:, 0]
        fs = [np.tile(u[:, None], (1, r))]
        w = np.zeros(r)
        w[0] = norm_a
        return w, fs, [0.0], 0, True, False
    for it in range(1, max_iters + 1):
        for k in range(d):
            others = [fs[j] for j in reversed(range(d)) if j != k]
            z = khatri_rao(others)
            gram = np.ones((r, r))
            for j in range(d):
                if j != k:
                    gram *= fs[j].T @ fs[j]
            rhs = unfold[k] @ z
            lam_max = float(np.linalg.eigvalsh(gram)[-1]) if r > 1 else float(gram[0, 0])
            cond = np.linalg.cond(gram) if lam_max > 0 else math.inf
            if not np.isfinite(cond) or cond > 1e12:
                gram = gram + (1e-12 * max(lam_max, 1e-300)) * np.eye(r)
                regularized = True
            try:
                sol = np.linalg.solve(gram, rhs.T).T
            except np.linalg.LinAlgError:
                sol = rhs @ np.linalg.pinv(gram)
                regularized = True
            nrm = np.linalg.norm(sol, axis=0)
            nrm[nrm == 0] = 1.0
            fs[k] = sol / nrm
            w = nrm if k == d - 1 else w
        approx = CPModel(w, tuple(fs)).full_array()
        res = _rel_err(a, approx, norm_a)
        traj.append(res)
        if abs(prev - res) < tol or res < 1e-15:
            converged = True
            break
        prev = res
    return w, fs, traj, it, converged, regularized


def cpd_als(
    a: DenseTensor,
    r: int,
    max_iters: int = 500,
    tol: float = 1e-12,
    restarts: int = 1,
    seed: int = 0,
    init: str = "auto",
) -> tuple[CPModel, FitReport]:
    """Rank-``r`` CP approximation by alternating least squares.

    Parameters
    ----------
    a : DenseTensor
        Tensor to decompose.
    r : int
        Number of rank-1 terms.
    max_iters : int
        Sweep limit per start.
    tol : float
        Stop once the relative residual changes by less than this between
        sweeps.
    restarts : int
        Number of starts; the first uses leading HOSVD singular vectors when
        ``r`` does not exceed the smallest mode size, the rest are seeded
        Gaussian draws.  The best fit is kept.
    seed : int
        Seed for the random starts.
    init : {"auto", "random"}
        ``"random"`` skips the HOSVD start.

    Returns
    -------
    model : CPModel
        Canonicalized model (unit columns, non-negative descending weights).
    report : FitReport
        Relative residual, per-sweep trajectory and convergence flags.
    """
    a = _as_dense(a)
    if r < 1:
        raise ValueError("rank must be >= 1")
    rng = np.random.default_rng(seed)
    norm_a = float(np.linalg.norm(a.data))
    if norm_a == 0:
        fs = [np.eye(n, r) if n >= r else np.zeros((n, r)) for n in a.shape]
        model = normalize_cp(np.zeros(r), fs)
        return model, FitReport(0.0, 0, True, [0.0])
    best = None
    for s in range(max(1, restarts)):
        if s == 0 and init == "auto" and r <= min(a.shape):
            start = _hosvd_init(a, r)
        else:
            start = _random_init(a.shape, r, rng)
        w, fs, traj, it, conv, reg = _als_run(a, r, start, max_iters, tol)
        res = traj[-1] if traj else math.inf
        if best is None or res < best[0]:
            best = (res, w, fs, traj, it, conv, reg)
    res, w, fs, traj, it, conv, reg = best
    model = normalize_cp(w, fs)
    res = _rel_err(a, model.full_array(), norm_a)
    mono = all(b <= x * (1 + 1e-9) + 1e-14 for x, b in zip(traj, traj[1:]))
    if not conv:
        warnings.warn(f"CP-ALS did not converge in {max_iters} sweeps (rank {r})", ConvergenceWarning)
    return model, FitReport(res, it, conv, list(traj), reg, max(1, restarts), mono)


def cpd_fit_incremental(
    a: DenseTensor,
    target_rel_err: float,
    r_max: int,
    **cfg,
) -> tuple[CPModel, FitReport]:
    """Smallest rank up to ``r_max`` whose ALS fit reaches the target error."""
    if not 0 < target_rel_err < 1:
        raise ValueError("target_rel_err must lie in (0, 1)")
    a = _as_dense(a)
    best = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        for r in range(1, int(r_max) + 1):
            model, rep = cpd_als(a, r, **cfg)
            if best is None or rep.residual < best[1].residual:
                best = (model, rep)
            if rep.residual <= target_rel_err:
                rep.target_met = True
                return model, rep
    best[1].target_met = False
    return best


# --------------------------------------------------------------------------
# symmetric CP


def is_symmetric(a: DenseTensor, tol: float = SYMMETRY_TOL) -> bool:
    arr = a.array
    if len(set(arr.shape)) != 1:
        return False
    return all(
        float(np.max(np.abs(arr - np.transpose(arr, p)))) <= tol
        for p in itertools.permutations(range(arr.ndim))
    )


def symmetrize(arr: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Average ``arr`` over all permutations of the given axes."""
    axes = list(axes)
    perms = list(itertools.permutations(axes))
    out = np.zeros_like(arr)
    for p in perms:
        order = list(range(arr.ndim))
        for src, dst in zip(axes, p):
            order[src] = dst
        out += np.transpose(arr, order)
    return out / len(perms)


def _sym_unpack(x, n1, n, r, partial):
    lam = x[:r]
    off = r
    first = None
    if partial:
        first = x[off : off + n1 * r].reshape(n1, r)
        off += n1 * r
    v = x[off : off + n * r].reshape(n, r)
    return lam, first, v


def _sym_full(lam, first, v, order):
    f1 = v if first is None else first
    t = f1 * lam
    for _ in range(order - 1):
        t = t[..., None, :] * v
    return t


def _slot_derivative(mats, s):
    """d(sum_i prod_t M_t[:, i]) / d M_s[j, i] as a (N, n_s * r) matrix."""
    letters = "abcdefghkmnopq"[: len(mats)]
    ops, subs = [], []
    for t, m in enumerate(mats):
        if t == s:
            ops.append(np.eye(m.shape[0]))
            subs.append(letters[t] + "j")
        else:
            ops.append(m)
            subs.append(letters[t] + "i")
    ops.append(np.ones(mats[0].shape[1]))
    subs.append("i")
    expr = ",".join(subs) + "->" + letters + "ji"
    t = np.einsum(expr, *ops)
    return t.reshape(-1, mats[s].shape[0] * mats[s].shape[1])


def _sym_fit(arr, r, partial, x0, max_nfev):
    order = arr.ndim
    n1, n = arr.shape[0], arr.shape[-1]
    target = arr.ravel()

    def resid(x):
        lam, first, v = _sym_unpack(x, n1, n, r, partial)
        return _sym_full(lam, first, v, order).sum(-1).ravel() - target

    def jac(x):
        lam, first, v = _sym_unpack(x, n1, n, r, partial)
        mats = [v if first is None else first] + [v] * (order - 1)
        cols = [_sym_full(np.ones(r), first, v, order).reshape(-1, r)]
        shared = range(1, order) if partial else range(order)
        if partial:
            cols.append(_slot_derivative(mats, 0) * np.tile(lam, n1))
        cols.append(sum(_slot_derivative(mats, s) for s in shared) * np.tile(lam, n))
        return np.hstack(cols)

    sol = least_squares(resid, x0, jac=jac, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev)
    return sol.x


def _sym_fit_model(a: DenseTensor, r: int, partial: bool, restarts: int, seed: int, max_nfev: int):
    arr = np.array(a.array)
    order = arr.ndim
    n1, n = arr.shape[0], arr.shape[-1]
    norm_a = float(np.linalg.norm(arr))
    rng = np.random.default_rng(seed)
    if norm_a == 0:
        v = np.eye(n, r) if n >= r else np.zeros((n, r))
        first = None if not partial else (np.eye(n1, r) if n1 >= r else np.zeros((n1, r)))
        return SymmetricCPModel(np.zeros(r), v, order, first), FitReport(0.0, 0, True, [0.0])
    best = None
    for s in range(max(1, restarts)):
        if s == 0:
            u, _, _ = svd_canonical(matricize(a, order))
            v0 = u[:, :r] if u.shape[1] >= r else np.hstack([u, rng.standard_normal((n, r - u.shape[1]))])
            if partial:
                u1, _, _ = svd_canonical(matricize(a, 1))
                f0 = u1[:, :r] if u1.shape[1] >= r else np.hstack([u1, rng.standard_normal((n1, r - u1.shape[1]))])
            else:
                f0 = None
        else:
            v0 = rng.standard_normal((n, r))
            f0 = rng.standard_normal((n1, r)) if partial else None
        # least-squares weights for the starting directions
        basis = _sym_full(np.ones(r), f0, v0, order).reshape(-1, r)
        lam0 = np.linalg.lstsq(basis, arr.ravel(), rcond=None)[0]
        x0 = np.concatenate([lam0] + ([f0.ravel()] if partial else []) + [v0.ravel()])
        x = _sym_fit(arr, r, partial, x0, max_nfev)
        lam, first, v = _sym_unpack(x, n1, n, r, partial)
        res = float(np.linalg.norm(_sym_full(lam, first, v, order).sum(-1) - arr)) / norm_a
        if best is None or res < best[0]:
            best = (res, lam.copy(), None if first is None else first.copy(), v.copy())
        if res < 1e-13:
            break
    res, lam, first, v = best
    # canonical scaling: unit vectors, sign rules, descending |lambda|
    nv = np.linalg.norm(v, axis=0)
    nv[nv == 0] = 1.0
    v = v / nv
    if partial:
        lam = lam * nv ** (order - 1)
        nf = np.linalg.norm(first, axis=0)
        nf[nf == 0] = 1.0
        first = first / nf
        lam = lam * nf
        sg = canonical_sign(v)
        v = v * sg
        lam = lam * sg ** (order - 1)
        neg = lam < 0
        first[:, neg] *= -1
        lam = np.abs(lam)
    else:
        lam = lam * nv**order
        if order % 2 == 1:
            sg = np.where(lam < 0, -1.0, 1.0)
            v = v * sg
            lam = lam * sg
        else:
            v = v * canonical_sign(v)
    idx = np.argsort(-np.abs(lam), kind="stable")
    model = SymmetricCPModel(lam[idx], v[:, idx], order, None if first is None else first[:, idx])
    res = _rel_err(a, model.as_cp().full_array(), norm_a)
    return model, FitReport(res, 0, True, [res], restarts=max(1, restarts))


def cpd_symmetric(
    a: DenseTensor, r: int, restarts: int = 3, seed: int = 0, max_nfev: int = 2000
) -> tuple[SymmetricCPModel, FitReport]:
    """Fit ``A = sum_i lambda_i v_i o v_i o ... o v_i`` to a symmetric tensor.

    Every term shares one vector across all modes, which makes each block
    nonlinear, so the fit runs Levenberg-Marquardt over ``(lambda, V)``
    jointly instead of alternating.
    """
    a = _as_dense(a)
    if not is_symmetric(a):
        raise ValueError("cpd_symmetric requires a cubical symmetric tensor (tol 1e-10)")
    return _sym_fit_model(a, r, False, restarts, seed, max_nfev)


def cpd_partial_symmetric(
    a: DenseTensor, r: int, restarts: int = 3, seed: int = 0, max_nfev: int = 2000
) -> tuple[SymmetricCPModel, FitReport]:
    """Fit with modes 2..d sharing one factor and a free first-mode factor."""
    a = _as_dense(a)
    if a.order < 2 or len(set(a.shape[1:])) != 1:
        raise DimensionError("modes 2..d must have equal size")
    return _sym_fit_model(a, r, True, restarts, seed, max_nfev)


# --------------------------------------------------------------------------
# Tucker


def hosvd(a: DenseTensor) -> TuckerModel:
    """Full-rank higher-order SVD (exact reconstruction)."""
    a = _as_dense(a)
    fs = [svd_canonical(matricize(a, k))[0] for k in range(1, a.order + 1)]
    core = multi_mode_product(a, [f.T for f in fs])
    return TuckerModel(core, tuple(fs), hosvd=True)


def tucker_truncate(a: DenseTensor, ranks: Sequence[int]) -> tuple[TuckerModel, float]:
    """Truncated HOSVD; returns the model and ``||A - approx||_F``."""
    a = _as_dense(a)
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != a.order or any(not 1 <= r <= n for r, n in zip(ranks, a.shape)):
        raise ValueError(f"invalid Tucker ranks {ranks} for shape {a.shape}")
    fs = []
    for k, r in enumerate(ranks, start=1):
        u = svd_canonical(matricize(a, k))[0]
        if u.shape[1] < r:
            u = np.hstack([u, _complete_basis(u, r - u.shape[1])])
        fs.append(u[:, :r])
    core = multi_mode_product(a, [f.T for f in fs])
    model = TuckerModel(core, tuple(fs))
    err = float(np.linalg.norm(a.data - model.densify().data))
    return model, err


def _complete_basis(u: np.ndarray, extra: int) -> np.ndarray:
    q, _ = np.linalg.qr(np.hstack([u, np.eye(u.shape[0])]))
    return q[:, u.shape[1] : u.shape[1] + extra]


# --------------------------------------------------------------------------
# tensor train


def _truncation_rank(s: np.ndarray, delta: float, shape) -> int:
    r = max(numerical_rank(s, shape), 1)
    if delta > 0:
        tail = np.sqrt(np.cumsum((s**2)[::-1]))[::-1]  # tail[j] = ||s[j:]||
        ok = np.nonzero(tail <= delta)[0]
        if ok.size:
            r = min(r, max(int(ok[0]), 1))
    return r


def tt_svd(a: DenseTensor, eps: float = 0.0) -> TTModel:
    """TT-SVD with a relative Frobenius error budget ``eps``.

    Each of the d-1 truncations may discard ``eps*||A||_F/sqrt(d-1)``.
    """
    if eps < 0:
        raise ValueError("eps must be non-negative")
    a = _as_dense(a)
    d = a.order
    dims = a.shape
    norm_a = float(np.linalg.norm(a.data))
    delta = eps * norm_a / math.sqrt(d - 1) if d > 1 else 0.0
    # C-order flattening of the array makes mode 1 the slowest row index
    c = np.array(a.array).reshape(dims[0], -1)
    cores = []
    r_prev = 1
    for k in range(d - 1):
        c = c.reshape(r_prev * dims[k], -1)
        u, s, vt = svd_canonical(c)
        r = _truncation_rank(s, delta, c.shape)
        cores.append(u[:, :r].reshape(r_prev, dims[k], r))
        c = s[:r, None] * vt[:r]
        r_prev = r
    cores.append(c.reshape(r_prev, dims[-1], 1))
    return TTModel(tuple(cores))


def tt_round(t: TTModel, eps: float = 0.0) -> TTModel:
    """Recompress a TT to relative accuracy ``eps`` (orthogonalize, then truncate)."""
    cores = [c.copy() for c in t.cores]
    d = len(cores)
    if d == 1:
        return TTModel(tuple(cores))
    # right-to-left orthogonalization
    for k in range(d - 1, 0, -1):
        r0, n, r1 = cores[k].shape
        q, rr = np.linalg.qr(cores[k].reshape(r0, n * r1).T)
        cores[k] = q.T.reshape(-1, n, r1)
        cores[k - 1] = np.tensordot(cores[k - 1], rr.T, axes=([2], [0]))
    nrm = float(np.linalg.norm(cores[0]))
    delta = eps * nrm / math.sqrt(d - 1)
    for k in range(d - 1):
        r0, n, r1 = cores[k].shape
        u, s, vt = svd_canonical(cores[k].reshape(r0 * n, r1))
        r = _truncation_rank(s, delta, (r0 * n, r1)) if nrm > 0 else 1
        cores[k] = u[:, :r].reshape(r0, n, r)
        cores[k + 1] = np.tensordot(s[:r, None] * vt[:r], cores[k + 1], axes=([1], [0]))
    return TTModel(tuple(cores))


def tt_add(t1: TTModel, t2: TTModel) -> TTModel:
    if t1.shape != t2.shape:
        raise DimensionError(f"shape mismatch: {t1.shape} vs {t2.shape}")
    d = t1.order
    if d == 1:
        return TTModel((t1.cores[0] + t2.cores[0],))
    cores = []
    for k, (a, b) in enumerate(zip(t1.cores, t2.cores)):
        n = a.shape[1]
        if k == 0:
            cores.append(np.concatenate([a, b], axis=2))
        elif k == d - 1:
            cores.append(np.concatenate([a, b], axis=0))
        else:
            c = np.zeros((a.shape[0] + b.shape[0], n, a.shape[2] + b.shape[2]))
            c[: a.shape[0], :, : a.shape[2]] = a
            c[a.shape[0] :, :, a.shape[2] :] = b
            cores.append(c)
    return TTModel(tuple(cores))


def tt_scale(t: TTModel, alpha: float) -> TTModel:
    cores = list(t.cores)
    cores[0] = cores[0] * float(alpha)
    return TTModel(tuple(cores))


def tt_hadamard(t1: TTModel, t2: TTModel) -> TTModel:
    """Entrywise product; ranks multiply."""
    if t1.shape != t2.shape:
        raise DimensionError(f"shape mismatch: {t1.shape} vs {t2.shape}")
    cores = []
    for a, b in zip(t1.cores, t2.cores):
        ra0, n, ra1 = a.shape
        rb0, _, rb1 = b.shape
        c = np.einsum("inj,knl->iknjl", a, b).reshape(ra0 * rb0, n, ra1 * rb1)
        cores.append(c)
    return TTModel(tuple(cores))


def tt_constant(shape: Sequence[int], value: float = 1.0) -> TTModel:
    cores = [np.ones((1, n, 1)) for n in check_shape(shape)]
    cores[0] = cores[0] * float(value)
    return TTModel(tuple(cores))


def tt_inner(t1: TTModel, t2: TTModel, counter: OpCounter | None = None) -> float:
    """``<T1, T2>`` by sweeping the cores left to right."""
    if t1.shape != t2.shape:
        raise DimensionError(f"shape mismatch: {t1.shape} vs {t2.shape}")
    m = np.ones((1, 1))
    for a, b in zip(t1.cores, t2.cores):
        # m[i, k] * a[i, n, j] * b[k, n, l] -> new m[j, l]
        if counter is not None:
            counter.add(m.size * a.shape[1] * a.shape[2] + m.shape[1] * a.shape[1] * a.shape[2] * b.shape[2])
        tmp = np.tensordot(m, a, axes=([0], [0]))  # (k, n, j)
        m = np.tensordot(tmp, b, axes=([0, 1], [0, 1]))  # (j, l)
    return float(m[0, 0])


def tt_weighted_inner(t1: TTModel, t2: TTModel, weights: Sequence[np.ndarray]) -> float:
    """``sum_i w_1[i_1] ... w_d[i_d] T1[i] T2[i]`` without densifying."""
    if t1.shape != t2.shape:
        raise DimensionError(f"shape mismatch: {t1.shape} vs {t2.shape}")
    m = np.ones((1, 1))
    for a, b, w in zip(t1.cores, t2.cores, weights):
        aw = a * np.asarray(w)[None, :, None]
        tmp = np.tensordot(m, aw, axes=([0], [0]))
        m = np.tensordot(tmp, b, axes=([0, 1], [0, 1]))
    return float(m[0, 0])


# --------------------------------------------------------------------------
# TTr1


def ttr1_svd(a: DenseTensor) -> TTr1Model:
    """Orthogonal rank-1 expansion by recursive reshaping and SVDs.

    Branches whose accumulated weight falls below ``1e-14 * ||A||_F`` are
    pruned.
    """
    a = _as_dense(a)
    dims = a.shape
    d = len(dims)
    norm_a = float(np.linalg.norm(a.data))
    floor = 1e-14 * norm_a
    weights: list = []
    vecs: list = [[] for _ in range(d)]
    if norm_a == 0:
        return TTr1Model(np.zeros(1), tuple(np.eye(n, 1) for n in dims))
    if d == 1:
        return TTr1Model(np.array([norm_a]), (a.data[:, None] / norm_a,))

    def recurse(block: np.ndarray, k: int, weight: float, prefix: list):
        # block: tensor over modes k..d-1 (C-order, mode k slowest)
        m = block.reshape(dims[k], -1)
        u, s, vt = svd_canonical(m)
        for j in range(s.size):
            wj = weight * s[j]
            if wj <= floor:
                continue
            if k == d - 2:
                weights.append(wj)
                for kk, v in enumerate(prefix + [u[:, j], vt[j]]):
                    vecs[kk].append(v)
            else:
                recurse(vt[j], k + 1, wj, prefix + [u[:, j]])

    recurse(np.array(a.array), 0, 1.0, [])
    return TTr1Model(np.array(weights), tuple(np.array(v).T for v in vecs))


# --------------------------------------------------------------------------
# storage and factored inner products


def parameter_count(model) -> int:
    """Stored numbers, using the Table-I style conventions.

    CP: sum_k n_k r (weights absorbed).  Tucker: prod r_k + sum_k n_k r_k.
    TT: sum_k r_{k-1} n_k r_k.  TTr1: terms * (sum_k n_k + 1).
    """
    if isinstance(model, CPModel):
        return sum(n * model.rank for n in model.shape)
    if isinstance(model, TuckerModel):
        return math.prod(model.ranks) + sum(n * r for n, r in zip(model.shape, model.ranks))
    if isinstance(model, TTModel):
        return sum(c.size for c in model.cores)
    if isinstance(model, TTr1Model):
        return model.nterms * (sum(model.shape) + 1)
    if isinstance(model, SymmetricCPModel):
        return parameter_count(model.as_cp())
    raise TypeError(f"unsupported model {type(model).__name__}")


def table1_count(kind: str, n: int, d: int, r: int) -> int:
    """Closed-form storage for cubical, uniform-rank models."""
    if kind == "cp":
        return n * d * r
    if kind == "tucker":
        return r**d + n * d * r
    if kind == "tt":
        return n * (d - 2) * r * r + 2 * n * r
    raise ValueError(kind)


def factored_inner_rank1(model, w: Rank1Tensor, counter: OpCounter | None = None) -> float:
    """``<model, w>`` for a rank-1 ``w`` without forming either tensor."""
    if tuple(model.shape) != w.shape:
        raise DimensionError(f"shape mismatch: {tuple(model.shape)} vs {w.shape}")
    if isinstance(model, SymmetricCPModel):
        model = model.as_cp()
    if isinstance(model, (CPModel, TTr1Model)):
        cp = model.as_cp() if isinstance(model, TTr1Model) else model
        prod = cp.weights * w.weight
        for f, v in zip(cp.factors, w.vectors):
            prod = prod * (v @ f)
            if counter is not None:
                counter.matvec(*f.shape)
        return float(prod.sum())
    if isinstance(model, TuckerModel):
        t = model.core.array
        for f, v in zip(reversed(model.factors), reversed(w.vectors)):
            p = v @ f
            t = t @ p
            if counter is not None:
                counter.matvec(*f.shape)
                counter.add(t.size * p.size)
        return w.weight * float(t)
    if isinstance(model, TTModel):
        v = np.ones((1,))
        for c, x in zip(model.cores, w.vectors):
            mat = np.tensordot(x, c, axes=([0], [1]))  # (r0, r1)
            v = v @ mat
            if counter is not None:
                counter.add(c.size + mat.size)
        return w.weight * float(v[0])
    raise TypeError(f"unsupported model {type(model).__name__}")


# --------------------------------------------------------------------------
# persistence: JSON manifest + .ten blocks


def save_model(model, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest: dict = {"shape": list(model.shape)}
    blocks: dict = {}
    if isinstance(model, CPModel):
        manifest.update(kind="cp", ranks=[model.rank], weights=[float(x) for x in model.weights])
        blocks = {f"factor{k + 1}": f for k, f in enumerate(model.factors)}
    elif isinstance(model, TuckerModel):
        manifest.update(kind="tucker", ranks=list(model.ranks), hosvd=model.hosvd)
        tio.write_ten(directory / "core.ten", model.core)
        manifest["core"] = "core.ten"
        blocks = {f"factor{k + 1}": f for k, f in enumerate(model.factors)}
    elif isinstance(model, TTModel):
        manifest.update(kind="tt", ranks=list(model.ranks))
        for k, c in enumerate(model.cores):
            tio.write_ten(directory / f"core{k + 1}.ten", DenseTensor(c))
        manifest["cores"] = [f"core{k + 1}.ten" for k in range(model.order)]
    elif isinstance(model, TTr1Model):
        manifest.update(kind="ttr1", ranks=[model.nterms], weights=[float(x) for x in model.weights])
        blocks = {f"factor{k + 1}": f for k, f in enumerate(model.vectors)}
    elif isinstance(model, SymmetricCPModel):
        manifest.update(kind="cp-sym", ranks=[model.rank], weights=[float(x) for x in model.lambdas], order=model.order)
        blocks = {"v": model.v}
        if model.first is not None:
            blocks["first"] = model.first
    else:
        raise TypeError(f"unsupported model {type(model).__name__}")
    for name, mat in blocks.items():
        tio.write_matrix_ten(directory / f"{name}.ten", mat)
    if blocks:
        manifest["factors"] = [f"{name}.ten" for name in blocks]
    tio.write_json(directory / "model.json", manifest)


def load_model(directory):
    directory = Path(directory)
    m = tio.read_json(directory / "model.json")
    kind = m["kind"]
    blocks = [tio.read_matrix_ten(directory / f) for f in m.get("factors", [])]
    if kind == "cp":
        return CPModel(np.array(m["weights"]), tuple(blocks))
    if kind == "tucker":
        return TuckerModel(tio.read_ten(directory / m["core"]), tuple(blocks), m.get("hosvd", False))
    if kind == "tt":
        return TTModel(tuple(np.array(tio.read_ten(directory / f).array) for f in m["cores"]))
    if kind == "ttr1":
        return TTr1Model(np.array(m["weights"]), tuple(blocks))
    if kind == "cp-sym":
        first = blocks[1] if len(blocks) > 1 else None
        return SymmetricCPModel(np.array(m["weights"]), blocks[0], m["order"], first)
    raise tio.FormatError(f"unknown model kind {kind!r}")
