"""Tensor-structured reduction of polynomial ODE systems.

Full model::

    dx/dt = A x + B (x (x) x) + C (x (x) x (x) x) + D (u (x) x) + E u

with ``(x)`` the Kronecker product (``np.kron`` ordering).  Reshaping the
columns of ``B`` (first index fastest) gives an n x n x n tensor whose
contraction with ``x`` on modes 2 and 3 reproduces ``B (x (x) x)``; ``C``
and ``D`` are handled the same way, ``D`` becoming n x n x m with the
input on the last mode.  Each tensor is replaced by a CP model, the CP
factors are projected with an orthonormal basis ``V``, and the reduced
right-hand side is evaluated factor by factor without forming any
Kronecker power.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .core import DenseTensor, DimensionError, OpCounter
from .decomp import (
    ConvergenceWarning,
    CPModel,
    SymmetricCPModel,
    cpd_als,
    cpd_fit_incremental,
    cpd_partial_symmetric,
    svd_canonical,
    symmetrize,
    ttr1_svd,
)
from .io import read_json, read_matrix_ten, write_json, write_matrix_ten

log = logging.getLogger(__name__)

GALERKIN_TOL = 1e-10
NEWTON_TOL = 1e-10
NEWTON_MAX_ITERS = 50
NEWTON_HALVINGS = 10


class StepFailure(RuntimeError):
    pass


class DivergenceError(RuntimeError):
    pass


class FitWarning(UserWarning):
    pass


def _charge(counter, n, tag):
    if counter is not None:
        counter.add(n, tag)


# --------------------------------------------------------------------------
# dense system


class PolynomialSystem:
    """Dense cubic polynomial system.

    Parameters
    ----------
    A : (n, n) array
    B : (n, n^2) array, optional
    C : (n, n^3) array, optional
    D : (n, n m) array, optional
    E : (n, m) array, optional
        Missing blocks are absent terms (no storage, no cost).
    """

    def __init__(self, A, B=None, C=None, D=None, E=None):
        self.A = np.array(A, dtype=np.float64)
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise DimensionError("A must be square")
        self.n = n
        m = 0
        if E is not None:
            E = np.array(E, dtype=np.float64).reshape(n, -1)
            m = E.shape[1]
        if D is not None:
            D = np.array(D, dtype=np.float64)
            if D.shape[0] != n or D.shape[1] % n:
                raise DimensionError(f"D must be n x (n m), got {D.shape}")
            if E is not None and D.shape[1] != n * m:
                raise DimensionError("D and E disagree on the input count")
            m = D.shape[1] // n
        self.m = m
        self.B = None if B is None else np.array(B, dtype=np.float64)
        self.C = None if C is None else np.array(C, dtype=np.float64)
        self.D = D
        self.E = E
        if self.B is not None and self.B.shape != (n, n * n):
            raise DimensionError(f"B must be {n} x {n * n}, got {self.B.shape}")
        if self.C is not None and self.C.shape != (n, n**3):
            raise DimensionError(f"C must be {n} x {n**3}, got {self.C.shape}")

    def _u(self, u):
        if self.m == 0:
            return np.zeros(0)
        u = np.zeros(self.m) if u is None else np.asarray(u, dtype=np.float64).ravel()
        if u.size != self.m:
            raise DimensionError(f"input must have {self.m} entries")
        return u

    def rhs(self, x, u=None, counter: OpCounter | None = None) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        n = self.n
        u = self._u(u)
        out = self.A @ x
        _charge(counter, n * n, "linear")
        if self.B is not None or self.C is not None:
            x2 = np.kron(x, x)
            _charge(counter, n * n, "nonlinear")
            if self.B is not None:
                out = out + self.B @ x2
                _charge(counter, n * n * n, "nonlinear")
            if self.C is not None:
                x3 = np.kron(x2, x)
                out = out + self.C @ x3
                _charge(counter, n**3 + n**4, "nonlinear")
        if self.D is not None:
            out = out + self.D @ np.kron(u, x)
            _charge(counter, self.m * n + n * n * self.m, "input")
        if self.E is not None:
            out = out + self.E @ u
            _charge(counter, n * self.m, "input")
        return out

    def jacobian(self, x, u=None, counter: OpCounter | None = None) -> np.ndarray:
        """Kronecker-expanded Jacobian ``d rhs / d x``."""
        x = np.asarray(x, dtype=np.float64)
        n = self.n
        u = self._u(u)
        jac = self.A.copy()
        _charge(counter, n * n, "linear")
        if self.B is not None:
            t = self.B.reshape(n, n, n, order="F")
            jac += np.einsum("ijk,k->ij", t, x) + np.einsum("ijk,j->ik", t, x)
            _charge(counter, 2 * n**3, "nonlinear")
        if self.C is not None:
            t = self.C.reshape(n, n, n, n, order="F")
            jac += (
                np.einsum("ijkl,k,l->ij", t, x, x)
                + np.einsum("ijkl,j,l->ik", t, x, x)
                + np.einsum("ijkl,j,k->il", t, x, x)
            )
            _charge(counter, 3 * (n**4 + n**3), "nonlinear")
        if self.D is not None:
            t = self.D.reshape(n, n, self.m, order="F")
            jac += np.einsum("ija,a->ij", t, u)
            _charge(counter, n * n * self.m, "input")
        return jac

    def storage(self) -> int:
        return sum(int(b.size) for b in (self.A, self.B, self.C, self.D, self.E) if b is not None)

    def blocks(self) -> dict:
        return {k: v for k, v in zip("ABCDE", (self.A, self.B, self.C, self.D, self.E)) if v is not None}


# --------------------------------------------------------------------------
# factored tensors


@dataclass
class FactoredTensor:
    """CP tensor split into output, state and input modes.

    ``apply(x, u) = out @ (w * prod_j state_j^T x * inp^T u)``.  When
    ``shared`` is set all state modes use one factor matrix, so
    ``state_j^T x`` is computed once.
    """

    weights: np.ndarray
    out: np.ndarray
    state: tuple
    inp: np.ndarray | None = None
    shared: bool = False
    fit_error: float = 0.0
    method: str = ""

    @property
    def rank(self) -> int:
        return self.weights.size

    @property
    def degree(self) -> int:
        return len(self.state)

    @classmethod
    def from_cp(cls, model: CPModel, n_state: int, has_input: bool, **kw) -> "FactoredTensor":
        fs = model.factors
        inp = fs[-1] if has_input else None
        return cls(model.weights.copy(), fs[0], tuple(fs[1 : 1 + n_state]), inp, **kw)

    @classmethod
    def from_symmetric(cls, model: SymmetricCPModel, **kw) -> "FactoredTensor":
        return cls(model.lambdas.copy(), model.first, (model.v,) * (model.order - 1), None, shared=True, **kw)

    def _coeffs(self, x, u, counter, skip=None):
        r = self.rank
        c = self.weights.copy()
        n = self.state[0].shape[0]
        if self.shared:
            s = self.state[0].T @ x
            _charge(counter, n * r, "nonlinear")
            k = self.degree - (0 if skip is None else 1)
            c = c * s**k
            _charge(counter, k * r, "nonlinear")
        else:
            for j, f in enumerate(self.state):
                if j == skip:
                    continue
                c = c * (f.T @ x)
                _charge(counter, n * r + r, "nonlinear")
        if self.inp is not None:
            c = c * (self.inp.T @ u)
            _charge(counter, self.inp.shape[0] * r + r, "input")
        return c

    def apply(self, x, u=None, counter=None) -> np.ndarray:
        c = self._coeffs(x, u, counter)
        tag = "input" if self.inp is not None else "nonlinear"
        _charge(counter, self.out.shape[0] * self.rank, tag)
        return self.out @ c

    def jacobian(self, x, u=None, counter=None) -> np.ndarray:
        """Product rule over the state modes: ``sum_j out diag(c_j) state_j^T``."""
        tag = "input" if self.inp is not None else "nonlinear"
        q_out, r = self.out.shape
        n = self.state[0].shape[0]
        jac = np.zeros((q_out, n))
        if self.shared:
            s = self.state[0].T @ x
            k = self.degree
            c = self.weights * k * s ** (k - 1)
            if self.inp is not None:
                c = c * (self.inp.T @ u)
            jac = (self.out * c) @ self.state[0].T
            _charge(counter, n * r + k * r + q_out * n * r, tag)
            return jac
        for j in range(self.degree):
            c = self._coeffs(x, u, counter, skip=j)
            jac += (self.out * c) @ self.state[j].T
            _charge(counter, q_out * r + q_out * n * r, tag)
        return jac

    def project(self, v: np.ndarray) -> "FactoredTensor":
        """Output and state factors multiplied by ``V^T``; input factor kept."""
        st = tuple(v.T @ f for f in self.state)
        if self.shared:
            st = (st[0],) * len(st)
        return FactoredTensor(self.weights.copy(), v.T @ self.out, st,
                              None if self.inp is None else self.inp.copy(), self.shared,
                              self.fit_error, self.method)

    def matrix(self) -> np.ndarray:
        """Flattened coefficient matrix (``B``, ``C`` or ``D`` layout)."""
        t = self.out * self.weights
        for f in self.state + ((self.inp,) if self.inp is not None else ()):
            t = t[..., None, :] * f
        arr = t.sum(axis=-1)
        return arr.reshape(arr.shape[0], -1, order="F")

    def storage(self) -> int:
        """Stored numbers: weights plus each distinct factor matrix."""
        mats = [self.out] + (list(self.state[:1]) if self.shared else list(self.state))
        if self.inp is not None:
            mats.append(self.inp)
        return self.rank + sum(int(m.size) for m in mats)


def _zero_factored(n_out, n, n_state, m=None) -> FactoredTensor:
    e = lambda k: np.eye(k, 1)
    return FactoredTensor(np.zeros(1), e(n_out), tuple(e(n) for _ in range(n_state)),
                          None if m is None else e(m), fit_error=0.0, method="zero")


class _FactoredModel:
    """Shared rhs/Jacobian for models whose nonlinear terms are factored."""

    A: np.ndarray
    E: np.ndarray | None
    terms: tuple
    m: int

    def _u(self, u):
        if self.m == 0:
            return np.zeros(0)
        u = np.zeros(self.m) if u is None else np.asarray(u, dtype=np.float64).ravel()
        if u.size != self.m:
            raise DimensionError(f"input must have {self.m} entries")
        return u

    def rhs(self, x, u=None, counter: OpCounter | None = None) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        u = self._u(u)
        out = self.A @ x
        _charge(counter, self.A.size, "linear")
        for t in self.terms:
            out = out + t.apply(x, u, counter)
        if self.E is not None:
            out = out + self.E @ u
            _charge(counter, self.E.size, "input")
        return out

    def jacobian(self, x, u=None, counter: OpCounter | None = None) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        u = self._u(u)
        jac = self.A.copy()
        _charge(counter, self.A.size, "linear")
        for t in self.terms:
            jac += t.jacobian(x, u, counter)
        return jac


class TensorizedSystem(_FactoredModel):
    """Full-size system with CP-factored ``B``, ``C`` and ``D`` tensors."""

    def __init__(self, A, E, Bt: FactoredTensor | None, Ct: FactoredTensor | None,
                 Dt: FactoredTensor | None, m: int, symmetric: bool = False):
        self.A = np.asarray(A, dtype=np.float64)
        self.n = self.A.shape[0]
        self.E = E
        self.Bt, self.Ct, self.Dt = Bt, Ct, Dt
        self.m = m
        self.symmetric = symmetric
        self.terms = tuple(t for t in (Bt, Ct, Dt) if t is not None)

    @property
    def ranks(self) -> dict:
        return {k: t.rank for k, t in zip("BCD", (self.Bt, self.Ct, self.Dt)) if t is not None}

    @property
    def fit_errors(self) -> dict:
        return {k: t.fit_error for k, t in zip("BCD", (self.Bt, self.Ct, self.Dt)) if t is not None}

    def to_dense(self) -> PolynomialSystem:
        """Dense system with the CP-approximated coefficient matrices."""
        return PolynomialSystem(
            self.A,
            None if self.Bt is None else self.Bt.matrix(),
            None if self.Ct is None else self.Ct.matrix(),
            None if self.Dt is None else self.Dt.matrix(),
            self.E,
        )


def _fit_tensor(arr: np.ndarray, rank, eps, r_max, seed, n_state, has_input, symmetric):
    """CP model of one coefficient tensor, as a FactoredTensor."""
    t = DenseTensor(arr)
    norm = float(np.linalg.norm(arr))
    n_out = arr.shape[0]
    if norm == 0:
        return _zero_factored(n_out, arr.shape[1], n_state, arr.shape[-1] if has_input else None)
    if symmetric:
        sym = symmetrize(arr, tuple(range(1, 1 + n_state)))
        ts = DenseTensor(sym)
        if rank is not None:
            model, rep = cpd_partial_symmetric(ts, rank, seed=seed)
        else:
            model = rep = None
            for r in range(1, r_max + 1):
                mdl, rp = cpd_partial_symmetric(ts, r, seed=seed)
                if model is None or rp.residual < rep.residual:
                    model, rep = mdl, rp
                if rp.residual <= eps:
                    break
        err = float(np.linalg.norm(model.as_cp().full_array() - arr)) / norm
        return FactoredTensor.from_symmetric(model, fit_error=err, method="partial_symmetric")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        if rank is not None:
            model, rep = cpd_als(t, rank, seed=seed)
            return FactoredTensor.from_cp(model, n_state, has_input, fit_error=rep.residual, method="als")
        model, rep = cpd_fit_incremental(t, eps, r_max, seed=seed)
    if rep.residual <= eps:
        return FactoredTensor.from_cp(model, n_state, has_input, fit_error=rep.residual, method="als")
    # exact orthogonal rank-1 expansion, truncated to the error target
    tt = ttr1_svd(t)
    k = next(k for k in range(1, tt.nterms + 1) if tt.truncation_error(k) <= eps * norm)
    cp = tt.truncate(k).as_cp()
    err = float(np.linalg.norm(cp.full_array() - arr)) / norm
    if err >= rep.residual:
        return FactoredTensor.from_cp(model, n_state, has_input, fit_error=rep.residual, method="als")
    return FactoredTensor.from_cp(cp, n_state, has_input, fit_error=err, method="ttr1")


def tensorize(
    sys: PolynomialSystem,
    ranks: dict | None = None,
    eps: float = 1e-8,
    r_max: int | None = None,
    symmetric: bool = False,
    seed: int = 0,
) -> TensorizedSystem:
    """Reshape ``B``, ``C``, ``D`` into tensors and CP-compress them.

    Parameters
    ----------
    ranks : dict, optional
        Fixed CP ranks keyed by ``"B"``, ``"C"``, ``"D"``; missing keys use
        the error target.
    eps : float
        Relative fit target.  Without a fixed rank, ranks ``1..r_max`` are
        tried with ALS; if none meets ``eps`` the tensor falls back to its
        exact orthogonal rank-1 expansion, truncated to ``eps``.
    symmetric : bool
        Symmetrize ``B`` and ``C`` over their state modes and fit with a
        shared state factor.
    """
    ranks = dict(ranks or {})
    n, m = sys.n, sys.m
    r_max = r_max or n
    out = {}
    for key, mat, n_state, has_input in (("B", sys.B, 2, False), ("C", sys.C, 3, False), ("D", sys.D, 1, True)):
        if mat is None:
            out[key] = None
            continue
        shape = (n,) + (n,) * n_state + ((m,) if has_input else ())
        arr = mat.reshape(shape, order="F")
        ft = _fit_tensor(arr, ranks.get(key), eps, r_max, seed, n_state, has_input,
                         symmetric and not has_input)
        if ft.fit_error > eps and ranks.get(key) is None:
            warnings.warn(f"{key}: CP fit error {ft.fit_error:.3e} exceeds eps = {eps:.1e}", FitWarning)
        out[key] = ft
    return TensorizedSystem(sys.A, sys.E, out["B"], out["C"], out["D"], m, symmetric)


def tensorized_from_factors(A, E=None, B=None, C=None, D=None, m=0) -> TensorizedSystem:
    """Assemble a tensorized system directly from factored tensors."""
    return TensorizedSystem(A, E, B, C, D, m, symmetric=any(t is not None and t.shared for t in (B, C)))


# --------------------------------------------------------------------------
# projection and reduction


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray  # (steps + 1, n)
    newton_iterations: list = field(default_factory=list)


def _step_inputs(u, t, m):
    if m == 0:
        return np.zeros(0)
    if u is None:
        return np.zeros(m)
    return np.asarray(u(t), dtype=np.float64).ravel()


def simulate(model, x0, t_span, dt: float, integrator: str = "rk4", u: Callable | None = None) -> Trajectory:
    """Fixed-step integration; the state is recorded at every step.

    ``implicit_euler`` solves each step by damped Newton with the model's
    analytic Jacobian (absolute residual tolerance 1e-10, up to 10 step
    halvings, 50 iterations).
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if dt <= 0 or not t1 > t0:
        raise ValueError("need dt > 0 and a non-empty horizon")
    steps = int(round((t1 - t0) / dt))
    if steps < 1 or abs(steps * dt - (t1 - t0)) > 1e-9 * max(1.0, abs(t1 - t0)):
        raise ValueError("the horizon must be a whole number of steps")
    x = np.array(x0, dtype=np.float64).ravel()
    m = getattr(model, "m", 0)
    ts = t0 + dt * np.arange(steps + 1)
    out = np.empty((steps + 1, x.size))
    out[0] = x
    newton = []
    for k in range(steps):
        t = ts[k]
        if integrator == "rk4":
            ua = _step_inputs(u, t, m)
            um = _step_inputs(u, t + dt / 2, m)
            ub = _step_inputs(u, t + dt, m)
            k1 = model.rhs(x, ua)
            k2 = model.rhs(x + dt / 2 * k1, um)
            k3 = model.rhs(x + dt / 2 * k2, um)
            k4 = model.rhs(x + dt * k3, ub)
            x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        elif integrator == "implicit_euler":
            x, its = _implicit_euler_step(model, x, ts[k + 1], dt, _step_inputs(u, ts[k + 1], m))
            newton.append(its)
        else:
            raise ValueError(f"unknown integrator {integrator!r}")
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"state became non-finite at t = {ts[k + 1]:.6g}")
        out[k + 1] = x
    return Trajectory(ts, out, newton)


def _implicit_euler_step(model, x_old, t_new, dt, u):
    n = x_old.size
    z = x_old.copy()
    g = z - x_old - dt * model.rhs(z, u)
    gn = float(np.linalg.norm(g))
    for it in range(1, NEWTON_MAX_ITERS + 1):
        if gn <= NEWTON_TOL:
            return z, it - 1
        jac = np.eye(n) - dt * model.jacobian(z, u)
        try:
            delta = np.linalg.solve(jac, -g)
        except np.linalg.LinAlgError as exc:
            raise StepFailure(f"singular Newton matrix at t = {t_new:.6g}") from exc
        step = 1.0
        for _ in range(NEWTON_HALVINGS + 1):
            z_try = z + step * delta
            g_try = z_try - x_old - dt * model.rhs(z_try, u)
            gn_try = float(np.linalg.norm(g_try))
            if np.isfinite(gn_try) and gn_try < gn:
                break
            step /= 2
        else:
            raise StepFailure(f"Newton line search failed at t = {t_new:.6g}")
        z, g, gn = z_try, g_try, gn_try
    if gn <= NEWTON_TOL:
        return z, NEWTON_MAX_ITERS
    raise StepFailure(
        f"Newton did not converge in {NEWTON_MAX_ITERS} iterations at t = {t_new:.6g} (residual {gn:.3e})"
    )


def build_projection(
    model,
    q: int,
    x0,
    t_span,
    dt: float,
    u: Callable | None = None,
    integrator: str = "rk4",
) -> np.ndarray:
    """POD basis: leading left singular vectors of training snapshots.

    If the snapshots have numerical rank below ``q`` the basis is cut to
    that rank with a warning.
    """
    n = model.A.shape[0]
    if not 1 <= q <= n:
        raise ValueError(f"q must lie in [1, {n}]")
    traj = simulate(model, x0, t_span, dt, integrator, u)
    snaps = traj.x.T
    uu, s, _ = svd_canonical(snaps)
    tol = (s[0] if s.size else 0.0) * max(snaps.shape) * np.finfo(float).eps
    rank = int(np.sum(s > tol))
    if rank < q:
        warnings.warn(f"snapshot rank {rank} is below q = {q}; using q = {rank}")
        q = max(rank, 1)
    return uu[:, :q].copy()


class ReducedSystem(_FactoredModel):
    """Galerkin-reduced model with projected CP factors."""

    def __init__(self, source: TensorizedSystem, v: np.ndarray, check: bool = True):
        v = np.asarray(v, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != source.n or v.shape[1] > source.n:
            raise DimensionError(f"V must be {source.n} x q with q <= {source.n}")
        orth = float(np.max(np.abs(v.T @ v - np.eye(v.shape[1]))))
        if orth > 1e-10:
            raise ValueError(f"V is not orthonormal (max |V^T V - I| = {orth:.2e})")
        self.source = source
        self.V = v
        self.q = v.shape[1]
        self.m = source.m
        self.A = v.T @ source.A @ v
        self.E = None if source.E is None else v.T @ source.E
        self.Bt = None if source.Bt is None else source.Bt.project(v)
        self.Ct = None if source.Ct is None else source.Ct.project(v)
        self.Dt = None if source.Dt is None else source.Dt.project(v)
        self.terms = tuple(t for t in (self.Bt, self.Ct, self.Dt) if t is not None)
        self.galerkin_error = self.galerkin_check() if check else None
        if check and self.galerkin_error > GALERKIN_TOL:
            raise ArithmeticError(f"Galerkin consistency violated: {self.galerkin_error:.3e}")

    def galerkin_check(self, points: int = 5, seed: int = 0) -> float:
        """Max relative gap between the reduced rhs and ``V^T rhs(V x, u)``."""
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(points):
            xh = rng.standard_normal(self.q)
            u = rng.standard_normal(self.m)
            a = self.rhs(xh, u)
            b = self.V.T @ self.source.rhs(self.V @ xh, u)
            worst = max(worst, float(np.linalg.norm(a - b)) / max(float(np.linalg.norm(b)), 1e-300))
        return worst

    def storage(self) -> int:
        return sum(t.storage() for t in self.terms)

    def to_dense(self) -> PolynomialSystem:
        """The same reduced model with dense Kronecker-form coefficients."""
        return PolynomialSystem(
            self.A,
            None if self.Bt is None else self.Bt.matrix(),
            None if self.Ct is None else self.Ct.matrix(),
            None if self.Dt is None else self.Dt.matrix(),
            self.E,
        )

    def lift(self, xh) -> np.ndarray:
        return np.asarray(xh) @ self.V.T


def reduce(tsys: TensorizedSystem, v) -> ReducedSystem:
    return ReducedSystem(tsys, v)


# --------------------------------------------------------------------------
# complexity accounting


TABLE_FORMULAS = {
    # method: (rhs, jacobian, storage) as functions of q, d, r
    "dense": (lambda q, d, r: q ** (d + 1), lambda q, d, r: q ** (d + 2), lambda q, d, r: q ** (d + 1)),
    "tensor": (lambda q, d, r: q * d * r, lambda q, d, r: q * q * d * r, lambda q, d, r: q * d * r),
    "symmetric": (lambda q, d, r: q * r, lambda q, d, r: q * q * r, lambda q, d, r: q * r),
}

# calibrated once against the instrumented kernels
FACTORED_RHS_CONST = 2.0
SYMMETRIC_RHS_CONST = 4.0
DENSE_RHS_CONST = 1.0


def complexity_report(model, x, u=None) -> dict:
    """Instrumented operation counts of one rhs and one Jacobian evaluation."""
    rc, jc = OpCounter(), OpCounter()
    model.rhs(x, u, rc)
    model.jacobian(x, u, jc)
    return {
        "rhs_total": rc.count,
        "rhs_nonlinear": rc.tags.get("nonlinear", 0),
        "rhs_linear": rc.tags.get("linear", 0),
        "rhs_input": rc.tags.get("input", 0),
        "jac_total": jc.count,
        "jac_nonlinear": jc.tags.get("nonlinear", 0),
        "storage": model.storage(),
    }


def random_factored_system(n: int, r: int, m: int = 1, seed: int = 0, cubic: bool = True,
                           symmetric: bool = False) -> TensorizedSystem:
    """Stable test system with rank-``r`` CP nonlinearities."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n)) / math.sqrt(n)
    A = -(a @ a.T) - np.eye(n)

    def fac(n_state, inp):
        st = rng.standard_normal((n, r)) / math.sqrt(n)
        state = (st,) * n_state if symmetric else tuple(rng.standard_normal((n, r)) / math.sqrt(n)
                                                         for _ in range(n_state))
        return FactoredTensor(rng.standard_normal(r) * 0.1, rng.standard_normal((n, r)) / math.sqrt(n),
                              state, None if not inp else rng.standard_normal((m, r)),
                              shared=symmetric and n_state > 1, method="random")

    B = fac(2, False)
    C = fac(3, False) if cubic else None
    D = fac(1, True) if m else None
    E = rng.standard_normal((n, m)) if m else None
    return TensorizedSystem(A, E, B, C, D, m, symmetric)


def complexity_bench(qs: Sequence[int] = (5, 10, 20), r: int = 4, n: int | None = None, seed: int = 0,
                     symmetric: bool = False) -> dict:
    """Counts for factored and dense reduced models across reduced sizes.

    The dense model holds ``V^T C (V (x) V (x) V)`` etc. explicitly, so its
    cubic term costs ``q^4``; the factored model pays ``O(q r)`` per state
    mode.  Log-log slopes are fitted on the nonlinear-term counts, which
    carry the asymptotic separation; the shared ``q x q`` linear term is
    reported separately.
    """
    n = n or max(qs) * 2
    tsys = random_factored_system(n, r, seed=seed, symmetric=symmetric)
    rng = np.random.default_rng(seed + 1)
    rows = []
    for q in qs:
        v, _ = np.linalg.qr(rng.standard_normal((n, q)))
        red = ReducedSystem(tsys, v)
        dense = red.to_dense()
        xh = rng.standard_normal(q)
        u = rng.standard_normal(tsys.m)
        fc = complexity_report(red, xh, u)
        dc = complexity_report(dense, xh, u)
        rows.append({"q": q, "r": r, "factored": fc, "dense": dc})
    lq = np.log([row["q"] for row in rows])

    def slope(key, field_):
        y = np.log([row[key][field_] for row in rows])
        return float(np.polyfit(lq, y, 1)[0])

    return {
        "rows": rows,
        "slope_factored_rhs": slope("factored", "rhs_nonlinear"),
        "slope_dense_rhs": slope("dense", "rhs_nonlinear"),
        "slope_factored_jac": slope("factored", "jac_nonlinear"),
        "slope_dense_jac": slope("dense", "jac_nonlinear"),
        "n": n,
        "symmetric": symmetric,
    }


# --------------------------------------------------------------------------
# persistence


def save_system(sys: PolynomialSystem, directory) -> Path:
    """Manifest JSON plus one ``.ten`` file per block."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    blocks = {}
    for key, mat in sys.blocks().items():
        name = f"{key}.ten"
        write_matrix_ten(d / name, mat)
        blocks[key] = name
    path = d / "system.json"
    write_json(path, {"n": sys.n, "m": sys.m, "blocks": blocks})
    return path


def load_system(manifest) -> PolynomialSystem:
    manifest = Path(manifest)
    obj = read_json(manifest)
    base = manifest.parent
    mats = {k: read_matrix_ten(base / v) for k, v in obj["blocks"].items()}
    if "A" not in mats:
        raise ValueError("system manifest must name an A block")
    sys = PolynomialSystem(mats["A"], mats.get("B"), mats.get("C"), mats.get("D"), mats.get("E"))
    if "n" in obj and int(obj["n"]) != sys.n:
        raise DimensionError("manifest n disagrees with the A block")
    return sys


def save_tensorized(tsys: TensorizedSystem, directory) -> Path:
    """One ``.ten`` file per factor matrix plus a ``tensorized.json`` manifest."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    terms = {}
    write_matrix_ten(d / "A.ten", tsys.A)
    if tsys.E is not None:
        write_matrix_ten(d / "E.ten", tsys.E)
    for key, t in (("B", tsys.Bt), ("C", tsys.Ct), ("D", tsys.Dt)):
        if t is None:
            continue
        files = {"weights": f"{key}_weights.ten", "out": f"{key}_out.ten"}
        write_matrix_ten(d / files["weights"], t.weights[None, :])
        write_matrix_ten(d / files["out"], t.out)
        states = t.state[:1] if t.shared else t.state
        files["state"] = []
        for j, f in enumerate(states):
            name = f"{key}_state{j + 1}.ten"
            write_matrix_ten(d / name, f)
            files["state"].append(name)
        if t.inp is not None:
            files["input"] = f"{key}_input.ten"
            write_matrix_ten(d / files["input"], t.inp)
        terms[key] = {"files": files, "degree": t.degree, "shared": t.shared, "rank": t.rank,
                      "fit_error": t.fit_error, "method": t.method}
    path = d / "tensorized.json"
    write_json(path, {"n": tsys.n, "m": tsys.m, "symmetric": tsys.symmetric, "A": "A.ten",
                      "E": "E.ten" if tsys.E is not None else None, "terms": terms})
    return path


def load_tensorized(path) -> TensorizedSystem:
    path = Path(path)
    if path.is_dir():
        path = path / "tensorized.json"
    obj = read_json(path)
    base = path.parent
    A = read_matrix_ten(base / obj["A"])
    E = read_matrix_ten(base / obj["E"]) if obj.get("E") else None
    out = {}
    for key, info in obj["terms"].items():
        f = info["files"]
        states = tuple(read_matrix_ten(base / s) for s in f["state"])
        if info["shared"]:
            states = states * info["degree"]
        out[key] = FactoredTensor(read_matrix_ten(base / f["weights"]).ravel(), read_matrix_ten(base / f["out"]),
                                  states, read_matrix_ten(base / f["input"]) if "input" in f else None,
                                  info["shared"], float(info["fit_error"]), info["method"])
    return TensorizedSystem(A, E, out.get("B"), out.get("C"), out.get("D"), int(obj["m"]), bool(obj["symmetric"]))
