"""Tensor completion from a subset of observed entries.

Three solvers:

* :func:`complete_fixed_rank` -- CP-parameterized least squares on the
  observed entries, solved by alternating minimization over the factors.
* :func:`complete_lr_sparse` -- the same fit plus an l1 penalty on the
  coefficients ``<X, W_k>`` against rank-1 transforms ``W_k``.
* :func:`complete_nuclear` -- convex sum-of-nuclear-norms completion by ADMM
  with singular value thresholding; dense iterate, order <= 4.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .core import DenseTensor, DimensionError, Rank1Tensor, check_shape, fold, matricize
from .decomp import CPModel, TTModel, TuckerModel, factored_inner_rank1, normalize_cp
from .io import atomic_write_text, fmt_float

log = logging.getLogger(__name__)

NUCLEAR_MAX_ORDER = 4
NUCLEAR_MAX_SIZE = 10**6


class CompletionError(RuntimeError):
    """Numerical failure; ``trajectory`` holds the objective values so far."""

    def __init__(self, msg, trajectory=None):
        super().__init__(msg)
        self.trajectory = list(trajectory or [])


class UnsupportedScaleError(ValueError):
    pass


class UnderdeterminedWarning(UserWarning):
    pass


class SampleSet:
    """Observed entries: distinct 1-based multi-indices with their values."""

    def __init__(self, shape: Sequence[int], indices, values):
        self.shape = check_shape(shape)
        idx = np.asarray(indices, dtype=np.int64)
        if idx.ndim == 1 and len(self.shape) == 1:
            idx = idx[:, None]
        vals = np.asarray(values, dtype=np.float64).ravel()
        if idx.size == 0 or vals.size == 0:
            raise ValueError("a sample set needs at least one observed entry")
        if idx.ndim != 2 or idx.shape[1] != len(self.shape):
            raise DimensionError(f"indices must have {len(self.shape)} columns")
        if idx.shape[0] != vals.size:
            raise DimensionError("one value per index required")
        if np.any(idx < 1) or np.any(idx > np.array(self.shape)):
            raise DimensionError("sample index out of range")
        if not np.all(np.isfinite(vals)):
            raise ValueError("sample values must be finite")
        lin = _linear(idx - 1, self.shape)
        if np.unique(lin).size != lin.size:
            raise ValueError("duplicate sample indices")
        self.indices = idx
        self.values = vals
        self.indices.setflags(write=False)
        self.values.setflags(write=False)

    def __len__(self) -> int:
        return self.values.size

    @property
    def idx0(self) -> np.ndarray:
        return self.indices - 1

    @property
    def linear(self) -> np.ndarray:
        """0-based first-index-fastest positions."""
        return _linear(self.idx0, self.shape)

    def permuted(self, perm) -> "SampleSet":
        perm = np.asarray(perm)
        return SampleSet(self.shape, self.indices[perm], self.values[perm])

    def split(self, holdout: float, seed: int = 0) -> tuple["SampleSet", "SampleSet"]:
        rng = np.random.default_rng(seed)
        perm = rng.permutation(len(self))
        k = max(1, int(round(holdout * len(self))))
        if k >= len(self):
            raise ValueError("holdout leaves no training samples")
        return self.permuted(perm[k:]), self.permuted(perm[:k])

    def to_csv(self) -> str:
        buf = io.StringIO()
        d = len(self.shape)
        buf.write(",".join([f"i{k + 1}" for k in range(d)] + ["value"]) + "\n")
        for row, v in zip(self.indices, self.values):
            buf.write(",".join([str(int(i)) for i in row] + [fmt_float(v)]) + "\n")
        return buf.getvalue()

    def write_csv(self, path) -> None:
        atomic_write_text(path, self.to_csv())

    @classmethod
    def read_csv(cls, path, shape: Sequence[int]) -> "SampleSet":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if rows and not _is_number(rows[0][0]):
            rows = rows[1:]
        d = len(shape)
        idx = [[int(x) for x in row[:d]] for row in rows if row]
        vals = [float(row[d]) for row in rows if row]
        return cls(shape, idx, vals)


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def _linear(idx0: np.ndarray, shape) -> np.ndarray:
    strides = np.cumprod((1,) + tuple(shape[:-1]))
    return idx0 @ strides


def project_omega(a: DenseTensor, omega) -> SampleSet:
    """Observed entries of ``a`` at the 1-based indices ``omega``."""
    idx = np.asarray(omega, dtype=np.int64)
    if idx.ndim == 1:
        idx = idx[None, :] if a.order > 1 else idx[:, None]
    if idx.size == 0:
        raise ValueError("empty observation set")
    if idx.shape[1] != a.order or np.any(idx < 1) or np.any(idx > np.array(a.shape)):
        raise DimensionError("invalid sample index")
    vals = a.data[_linear(idx - 1, a.shape)]
    return SampleSet(a.shape, idx, vals)


def sample_uniform(shape: Sequence[int], count: int, seed: int = 0) -> np.ndarray:
    """``count`` distinct 1-based indices drawn uniformly without replacement."""
    shape = check_shape(shape)
    total = math.prod(shape)
    if not 1 <= count <= total:
        raise ValueError(f"cannot draw {count} distinct indices from {total}")
    rng = np.random.default_rng(seed)
    lin = np.sort(rng.choice(total, size=count, replace=False))
    return _unlinear(lin, shape) + 1


def _unlinear(lin: np.ndarray, shape) -> np.ndarray:
    out = np.empty((lin.size, len(shape)), dtype=np.int64)
    rem = np.array(lin, dtype=np.int64)
    for k, n in enumerate(shape):
        out[:, k] = rem % n
        rem //= n
    return out


def model_entries(model, idx0: np.ndarray) -> np.ndarray:
    """Entries of a dense or factored model at 0-based index rows."""
    if isinstance(model, CPModel):
        return model.entries(idx0)
    if isinstance(model, DenseTensor):
        return model.data[_linear(idx0, model.shape)]
    if isinstance(model, TTModel):
        out = np.ones((idx0.shape[0], 1))
        for k, c in enumerate(model.cores):
            out = np.einsum("si,sij->sj", out, c[:, idx0[:, k], :].transpose(1, 0, 2))
        return out[:, 0]
    if isinstance(model, TuckerModel):
        return np.array([model.entry(tuple(i + 1)) for i in idx0])
    raise TypeError(f"unsupported model {type(model).__name__}")


def residual_omega(model, samples: SampleSet) -> float:
    """``||P_Omega(X - A)||_F`` from the sampled entries only."""
    if tuple(model.shape) != samples.shape:
        raise DimensionError("model and samples have different shapes")
    diff = model_entries(model, samples.idx0) - samples.values
    return float(np.linalg.norm(diff))


# --------------------------------------------------------------------------
# shared ALS machinery


@dataclass
class CompletionReport:
    observed_residual: float
    iterations: int
    converged: bool
    trajectory: list = field(default_factory=list)
    full_error: float | None = None
    monotone: bool = True
    objective: list = field(default_factory=list)
    sparsity: int | None = None
    z_tol: float | None = None
    accepted_steps: int | None = None
    raw_objective: list = field(default_factory=list)


def _init_factors(shape, r, rng, scale):
    d = len(shape)
    s = scale ** (1.0 / d) if scale > 0 else 1.0
    return [rng.standard_normal((n, r)) * s / math.sqrt(r) ** (1.0 / d) for n in shape]


def _design(fs, idx0, k):
    """Products of the other factors' rows for each sample: (s, r)."""
    z = np.ones((idx0.shape[0], fs[0].shape[1]))
    for j, f in enumerate(fs):
        if j != k:
            z *= f[idx0[:, j]]
    return z


def _row_normal_eqs(z, vals, rows, n):
    r = z.shape[1]
    gram = np.zeros((n, r, r))
    np.add.at(gram, rows, z[:, :, None] * z[:, None, :])
    rhs = np.zeros((n, r))
    np.add.at(rhs, rows, z * vals[:, None])
    return gram, rhs


def _solve_rows(gram, rhs, old):
    """Row-wise least squares; unobserved rows keep their old values."""
    out = old.copy()
    r = gram.shape[1]
    for i in range(gram.shape[0]):
        g = gram[i]
        tr = np.trace(g)
        if tr == 0:
            continue
        try:
            c = cho_factor(g + (1e-13 * tr / r) * np.eye(r), check_finite=False)
            out[i] = cho_solve(c, rhs[i], check_finite=False)
        except np.linalg.LinAlgError:
            out[i] = np.linalg.lstsq(g, rhs[i], rcond=None)[0]
    return out


def _balance(fs):
    """Equalize column scales across modes (leaves the tensor unchanged)."""
    d = len(fs)
    nrm = np.array([np.linalg.norm(f, axis=0) for f in fs])
    nrm[nrm == 0] = 1.0
    geo = np.exp(np.mean(np.log(nrm), axis=0))
    return [f * (geo / n) for f, n in zip(fs, nrm)]


def _cp_from_factors(fs) -> CPModel:
    return normalize_cp(np.ones(fs[0].shape[1]), fs)


def _check_identifiable(samples, r):
    need = r * sum(samples.shape)
    if len(samples) < need:
        warnings.warn(
            f"{len(samples)} samples is below the r*sum(n_k) = {need} identifiability floor",
            UnderdeterminedWarning,
        )


SPECTRAL_MAX_SIZE = 10**7


def _rng_factors(samples, r, seed, init):
    if isinstance(init, str):
        if init == "spectral":
            return _spectral_factors(samples, r, seed)
        if init != "random":
            raise ValueError(f"unknown init {init!r}")
    elif init is not None:
        return [np.array(f, dtype=np.float64) for f in init]
    rng = np.random.default_rng(seed)
    scale = float(np.sqrt(np.mean(samples.values**2)))
    return _init_factors(samples.shape, r, rng, scale)


def _spectral_factors(samples, r, seed):
    """Leading singular vectors of the rescaled zero-filled unfoldings.

    Falls back to a random start when the dense array would be too large.
    Columns beyond the unfolding rank get seeded random values.
    """
    shape = samples.shape
    if math.prod(shape) > SPECTRAL_MAX_SIZE:
        return _rng_factors(samples, r, seed, "random")
    rng = np.random.default_rng(seed)
    x = np.zeros(math.prod(shape))
    x[samples.linear] = samples.values * (x.size / len(samples))
    t = DenseTensor(x, shape)
    fs = []
    for k, n in enumerate(shape):
        u, s, _ = np.linalg.svd(matricize(t, k + 1), full_matrices=False)
        f = rng.standard_normal((n, r)) / math.sqrt(n)
        q = min(r, u.shape[1])
        f[:, :q] = u[:, :q]
        fs.append(f)
    # one core-weight guess so the first sweep starts at the right scale
    fs[0] = fs[0] * (float(np.linalg.norm(x)) / math.sqrt(r))
    return fs


def _full_error(model: CPModel, truth) -> float:
    t = truth if isinstance(truth, DenseTensor) else DenseTensor(truth)
    nt = float(np.linalg.norm(t.data))
    diff = float(np.linalg.norm(model.full_array() - t.array))
    return diff / nt if nt > 0 else diff


def complete_fixed_rank(
    samples: SampleSet,
    r: int,
    max_iters: int = 500,
    tol: float = 1e-8,
    seed: int = 0,
    restarts: int = 1,
    init="spectral",
    truth: DenseTensor | None = None,
) -> tuple[CPModel, CompletionReport]:
    """Fit a rank-``r`` CP tensor to the observed entries.

    Each sweep solves, for every mode and every row of that mode's factor,
    the exact least-squares problem over the samples touching that row, so
    ``||P_Omega(X - A)||_F`` never increases.  Stops when its relative
    change drops below ``tol`` or after ``max_iters`` sweeps.

    Parameters
    ----------
    samples : SampleSet
    r : int
        CP rank of the fitted tensor.
    restarts : int
        Independent seeded starts; the lowest observed residual wins.
    init : {"spectral", "random"} or list of ndarray
        Start of the first run: singular vectors of the zero-filled
        unfoldings, a seeded Gaussian, or explicit factors.  Later restarts
        are always random.
    truth : DenseTensor, optional
        When given, the report carries the full relative error.
    """
    _check_identifiable(samples, r)
    best = None
    for s in range(max(1, restarts)):
        fs = _rng_factors(samples, r, seed + s, init if s == 0 else "random")
        fs, traj, it, conv = _als_complete(samples, fs, max_iters, tol)
        if best is None or traj[-1] < best[1][-1]:
            best = (fs, traj, it, conv)
    fs, traj, it, conv = best
    model = _cp_from_factors(fs)
    rep = CompletionReport(
        observed_residual=residual_omega(model, samples),
        iterations=it,
        converged=conv,
        trajectory=traj,
        monotone=_is_monotone(traj),
    )
    if truth is not None:
        rep.full_error = _full_error(model, truth)
    return model, rep


def _is_monotone(traj, slack=1e-12) -> bool:
    return all(b <= a + slack * max(1.0, abs(a)) for a, b in zip(traj, traj[1:]))


def _als_complete(samples, fs, max_iters, tol):
    idx0 = samples.idx0
    vals = samples.values
    d = len(samples.shape)
    scale = max(float(np.linalg.norm(vals)), 1e-300)
    traj = [float(np.linalg.norm(_predict(fs, idx0) - vals))]
    conv = False
    it = 0
    for it in range(1, max_iters + 1):
        for k in range(d):
            z = _design(fs, idx0, k)
            gram, rhs = _row_normal_eqs(z, vals, idx0[:, k], samples.shape[k])
            fs[k] = _solve_rows(gram, rhs, fs[k])
        fs = _balance(fs)
        res = float(np.linalg.norm(_predict(fs, idx0) - vals))
        if not np.isfinite(res):
            raise CompletionError(f"non-finite residual at sweep {it}", traj)
        traj.append(res)
        prev = traj[-2]
        if res <= 1e-13 * scale or abs(prev - res) <= tol * max(prev, 1e-300):
            conv = True
            break
    return fs, traj, it, conv


def _predict(fs, idx0):
    z = np.ones((idx0.shape[0], fs[0].shape[1]))
    for j, f in enumerate(fs):
        z *= f[idx0[:, j]]
    return z.sum(axis=1)


# --------------------------------------------------------------------------
# low rank + sparse


@dataclass
class LrSparseProblem:
    samples: SampleSet
    transforms: list
    lam: float
    rank: int

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        for w in self.transforms:
            if not isinstance(w, Rank1Tensor):
                raise TypeError("transforms must be Rank1Tensor values")
            if w.shape != self.samples.shape:
                raise DimensionError(f"transform shape {w.shape} != {self.samples.shape}")
        if self.rank < 1:
            raise ValueError("rank must be >= 1")


def _transform_stack(transforms, d):
    """Per mode, the (m, n_k) matrix of transform vectors; plus weights."""
    mats = [np.array([w.vectors[k] for w in transforms]) for k in range(d)]
    wts = np.array([w.weight for w in transforms])
    return mats, wts


def coefficients(fs_or_model, transforms) -> np.ndarray:
    """``z_k = <X, W_k>`` for a CP tensor, contracted factor by factor."""
    if isinstance(fs_or_model, CPModel):
        return np.array([factored_inner_rank1(fs_or_model, w) for w in transforms])
    fs = fs_or_model
    mats, wts = _transform_stack(transforms, len(fs))
    prod = np.ones((len(transforms), fs[0].shape[1]))
    for m, f in zip(mats, fs):
        prod *= m @ f
    return wts * prod.sum(axis=1)


def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def _lr_objective(fs, samples, transforms, lam):
    res = _predict(fs, samples.idx0) - samples.values
    z = coefficients(fs, transforms) if lam > 0 else np.zeros(0)
    return 0.5 * float(res @ res) + lam * float(np.abs(z).sum())


def complete_lr_sparse(
    problem: LrSparseProblem,
    max_iters: int = 500,
    tol: float = 1e-8,
    seed: int = 0,
    init="spectral",
    rho: float | None = None,
    restarts: int = 1,
    z_tol: float | None = None,
    truth: DenseTensor | None = None,
) -> tuple[CPModel, np.ndarray, CompletionReport]:
    """Low-rank plus transform-sparse completion.

    Minimizes ``0.5 ||P_Omega(X - A)||^2 + lam * sum_k |<X, W_k>|`` over
    rank-``r`` CP tensors.  The coefficients get an auxiliary copy ``z``;
    each iteration updates every factor by an exact least-squares solve of
    the augmented Lagrangian, soft-thresholds ``z`` and takes a dual step
    (``rho`` adapts by residual balancing).  The returned factors are the
    best iterate under the true objective, so the recorded objective
    trajectory is non-increasing; ``raw_objective`` in the report holds
    the unsafeguarded values.  With ``restarts > 1`` further runs start
    from seeded random factors and the lowest final objective wins.  With
    ``lam = 0`` this runs exactly the :func:`complete_fixed_rank` iteration.

    Returns the CP model, the coefficients ``z_k = <X, W_k>`` (factored
    contractions) and a report whose ``sparsity`` counts
    ``|z_k| > z_tol``; ``z_tol`` defaults to
    ``1e-6 * max(max|z|, rms of observed values)``.
    """
    samples = problem.samples
    lam = float(problem.lam)
    r = problem.rank
    d = len(samples.shape)
    idx0, vals = samples.idx0, samples.values
    if lam == 0:
        _check_identifiable(samples, r)
        best = None
        for s in range(max(1, restarts)):
            fs = _rng_factors(samples, r, seed + s, init if s == 0 else "random")
            run = _als_complete(samples, fs, max_iters, tol)
            if best is None or run[1][-1] < best[1][-1]:
                best = run
        fs, traj, it, conv = best
        obj = [0.5 * t * t for t in traj]
        raw = obj
        accepted = it
    else:
        best = None
        for s in range(max(1, restarts)):
            run = _lr_sparse_sweeps(
                problem, seed + s, init if s == 0 else "random", max_iters, tol, rho
            )
            if best is None or run[2][-1] < best[2][-1]:
                best = run
        fs, traj, obj, it, conv, accepted, raw = best
    model = _cp_from_factors(fs)
    zc = coefficients(model, problem.transforms)
    if z_tol is None:
        scale = max(float(np.max(np.abs(zc))) if zc.size else 0.0, float(np.sqrt(np.mean(vals**2))))
        z_tol = 1e-6 * scale
    rep = CompletionReport(
        observed_residual=residual_omega(model, samples),
        iterations=it,
        converged=conv,
        trajectory=traj,
        monotone=_is_monotone(obj),
        objective=obj,
        sparsity=int(np.sum(np.abs(zc) > z_tol)),
        z_tol=z_tol,
        accepted_steps=accepted,
        raw_objective=raw,
    )
    if truth is not None:
        rep.full_error = _full_error(model, truth)
    return model, zc, rep


def _lr_sparse_sweeps(problem, seed, init, max_iters, tol, rho):
    """Split ADMM on ``z = c(X)`` with a best-iterate safeguard.

    Per iteration: each factor solves the smooth least-squares problem
    ``0.5||P(X - A)||^2 + rho/2 ||c(X) - z + y||^2`` exactly; then
    ``z = soft(c(X) + y, lam/rho)`` and ``y += c(X) - z``.  The reported
    iterate only moves when the true objective does not increase, so the
    objective trajectory is non-increasing.
    """
    samples = problem.samples
    lam = float(problem.lam)
    r = problem.rank
    d = len(samples.shape)
    m = len(problem.transforms)
    _check_identifiable(samples, r)
    fs = _rng_factors(samples, r, seed, init)
    idx0, vals = samples.idx0, samples.values
    mats, wts = _transform_stack(problem.transforms, d)
    if rho is None:
        rho = 1.0
    zc = coefficients(fs, problem.transforms)
    zaux = soft_threshold(zc, lam / rho)
    y = np.zeros(m)
    best = list(fs)
    cur = _lr_objective(fs, samples, problem.transforms, lam)
    obj = [cur]
    raw = [cur]
    traj = [float(np.linalg.norm(_predict(fs, idx0) - vals))]
    conv = False
    accepted = 0
    it = 0
    scale = max(float(np.linalg.norm(vals)), 1e-300)
    for it in range(1, max_iters + 1):
        fs_prev = [f.copy() for f in fs]
        for k in range(d):
            n_k = samples.shape[k]
            z = _design(fs, idx0, k)
            gram, rhs = _row_normal_eqs(z, vals, idx0[:, k], n_k)
            h = np.zeros((n_k * r, n_k * r))
            for i in range(n_k):
                h[i * r : (i + 1) * r, i * r : (i + 1) * r] = gram[i]
            q = np.ones((m, r))
            for j, (mat, f) in enumerate(zip(mats, fs)):
                if j != k:
                    q *= mat @ f
            q *= wts[:, None]
            g = (mats[k][:, :, None] * q[:, None, :]).reshape(m, -1)
            lhs = h + rho * (g.T @ g)
            lhs += 1e-13 * max(np.trace(lhs) / lhs.shape[0], 1e-300) * np.eye(lhs.shape[0])
            b = rhs.ravel() + rho * g.T @ (zaux - y)
            try:
                u = cho_solve(cho_factor(lhs, check_finite=False), b, check_finite=False)
            except np.linalg.LinAlgError:
                # collapsed factors leave the block singular; take the minimum-norm step
                u = np.linalg.lstsq(lhs, b, rcond=None)[0]
            fs[k] = u.reshape(n_k, r)
        fs = _balance(fs)
        zc = coefficients(fs, problem.transforms)
        z_old = zaux
        zaux = soft_threshold(zc + y, lam / rho)
        y += zc - zaux
        new = _lr_objective(fs, samples, problem.transforms, lam)
        if not np.isfinite(new):
            raise CompletionError(f"non-finite objective at iteration {it}", obj)
        raw.append(new)
        if new <= cur:
            best, cur = list(fs), new
            accepted += 1
        obj.append(cur)
        traj.append(float(np.linalg.norm(_predict(best, idx0) - vals)))
        primal = float(np.linalg.norm(zc - zaux))
        dual = rho * float(np.linalg.norm(zaux - z_old))
        step = max(float(np.linalg.norm(f - p)) / max(float(np.linalg.norm(f)), 1e-300)
                   for f, p in zip(fs, fs_prev))
        zs = max(float(np.linalg.norm(zc)), 1e-300)
        # residual balancing; y is the scaled multiplier so it rescales with rho
        if primal > 10 * dual and rho < 1e10:
            rho *= 2.0
            y /= 2.0
        elif dual > 10 * primal and rho > 1e-10:
            rho /= 2.0
            y *= 2.0
        if primal <= tol * zs and dual <= tol * zs and (step <= tol or new <= 1e-28 * scale**2):
            conv = True
            break
    return best, traj, obj, it, conv, accepted, raw


def select_lambda(
    samples: SampleSet,
    transforms,
    rank: int,
    lambdas=None,
    holdout: float = 0.2,
    seed: int = 0,
    **cfg,
) -> tuple[float, list]:
    """Pick lambda from a log grid by held-out sample error.

    Returns the best lambda and ``(lambda, holdout_rmse)`` pairs.
    """
    if lambdas is None:
        scale = float(np.sqrt(np.mean(samples.values**2)))
        lambdas = scale * np.logspace(-8, 0, 9)
    train, test = samples.split(holdout, seed)
    scores = []
    for lam in lambdas:
        prob = LrSparseProblem(train, list(transforms), float(lam), rank)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UnderdeterminedWarning)
            model, _, _ = complete_lr_sparse(prob, seed=seed, **cfg)
        err = residual_omega(model, test) / math.sqrt(len(test))
        scores.append((float(lam), err))
    best = min(scores, key=lambda t: t[1])[0]
    return best, scores


# --------------------------------------------------------------------------
# nuclear norm


def svt(m: np.ndarray, tau: float) -> tuple[np.ndarray, float]:
    """Singular value thresholding; also returns the nuclear norm of the result."""
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    s = np.maximum(s - tau, 0.0)
    keep = s > 0
    return (u[:, keep] * s[keep]) @ vt[keep], float(s.sum())


def nuclear_objective(x: DenseTensor, weights) -> float:
    return float(
        sum(a * np.linalg.svd(matricize(x, k + 1), compute_uv=False).sum() for k, a in enumerate(weights))
    )


def complete_nuclear(
    samples: SampleSet,
    weights=None,
    rho: float | None = None,
    rho_growth: float = 1.05,
    rho_max: float = 1e8,
    max_iters: int = 3000,
    tol: float = 1e-10,
    seed: int | None = None,
    truth: DenseTensor | None = None,
) -> tuple[DenseTensor, CompletionReport]:
    """Minimize ``sum_k alpha_k ||X_(k)||_*`` subject to ``P_Omega(X) = P_Omega(A)``.

    ADMM with one auxiliary copy per mode unfolding.  The observed entries
    are re-imposed after every X update, so the iterate is always feasible.
    ``seed=None`` starts the unobserved entries at zero, otherwise at seeded
    Gaussian values.
    """
    shape = samples.shape
    d = len(shape)
    if d > NUCLEAR_MAX_ORDER or math.prod(shape) > NUCLEAR_MAX_SIZE:
        raise UnsupportedScaleError(
            "nuclear-norm completion keeps a dense iterate, whose cost grows "
            f"exponentially with the order; limit is order {NUCLEAR_MAX_ORDER} and "
            f"{NUCLEAR_MAX_SIZE} entries, got shape {shape}"
        )
    alpha = np.full(d, 1.0 / d) if weights is None else np.asarray(weights, dtype=np.float64)
    if alpha.size != d or np.any(alpha < 0) or abs(alpha.sum() - 1) > 1e-12:
        raise ValueError("mode weights must be non-negative and sum to 1")
    lin = samples.linear
    vals = samples.values
    x = np.zeros(math.prod(shape))
    scale = float(np.sqrt(np.mean(vals**2)))
    if seed is not None:
        x = np.random.default_rng(seed).standard_normal(x.size) * scale
    x[lin] = vals
    if rho is None:
        rho = 1e-3 / max(scale, 1e-300)
    ys = [np.zeros(x.size) for _ in range(d)]
    traj = [0.0]
    conv = False
    it = 0
    xt = DenseTensor(x, shape)
    for it in range(1, max_iters + 1):
        ms = []
        for k in range(d):
            t = DenseTensor(x + ys[k] / rho, shape)
            mk, _ = svt(matricize(t, k + 1), alpha[k] / rho)
            ms.append(fold(mk, k + 1, shape).data)
        x_new = sum(m - y / rho for m, y in zip(ms, ys)) / d
        x_new[lin] = vals
        for k in range(d):
            ys[k] += rho * (x_new - ms[k])
        change = float(np.linalg.norm(x_new - x)) / max(float(np.linalg.norm(x_new)), 1e-300)
        gap = max(float(np.linalg.norm(x_new - m)) for m in ms) / max(float(np.linalg.norm(x_new)), 1e-300)
        x = x_new
        traj.append(float(np.linalg.norm(x[lin] - vals)))
        rho = min(rho * rho_growth, rho_max)
        if change < tol and gap < tol:
            conv = True
            break
    xt = DenseTensor(x, shape)
    rep = CompletionReport(
        observed_residual=traj[-1],
        iterations=it,
        converged=conv,
        trajectory=traj,
        monotone=_is_monotone(traj),
        objective=[nuclear_objective(xt, alpha)],
    )
    if truth is not None:
        nt = float(np.linalg.norm(truth.data))
        rep.full_error = float(np.linalg.norm(xt.data - truth.data)) / nt
    return xt, rep
