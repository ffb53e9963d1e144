"""Sample oracles: deterministic maps from a parameter point to a scalar.

Builtins are synthetic stand-ins for circuit simulations.  External
oracles run as a subprocess that reads one whitespace-separated point per
line on stdin and writes one value per line on stdout.
"""

from __future__ import annotations

import math
import shlex
import subprocess
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

from ..io import fmt_float


class OracleError(RuntimeError):
    pass


class SampleOracle:
    """Wraps ``fn(xi) -> float``.

    Parameters
    ----------
    fn : callable
        Point-wise map; must be deterministic.
    d : int
        Number of parameters the oracle expects.
    concurrency_safe : bool
        When true, :meth:`evaluate_many` fans points out to a thread pool.
        Results are keyed by input position either way.
    batch : callable, optional
        Vectorized ``(N, d) -> (N,)`` evaluation used in preference to ``fn``.
    """

    def __init__(self, fn: Callable, d: int, concurrency_safe: bool = False, name: str = "oracle",
                 batch: Callable | None = None, workers: int = 4):
        self.fn = fn
        self.d = int(d)
        self.concurrency_safe = concurrency_safe
        self.name = name
        self.batch = batch
        self.workers = workers
        self.calls = 0

    def __call__(self, xi) -> float:
        xi = np.asarray(xi, dtype=np.float64)
        if xi.shape != (self.d,):
            raise OracleError(f"{self.name}: expected a point with {self.d} coordinates")
        self.calls += 1
        return float(self.fn(xi))

    def evaluate_many(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if pts.shape[1] != self.d:
            raise OracleError(f"{self.name}: points must have {self.d} coordinates")
        if self.batch is not None:
            self.calls += pts.shape[0]
            out = np.asarray(self.batch(pts), dtype=np.float64).ravel()
        elif self.concurrency_safe and pts.shape[0] > 1:
            self.calls += pts.shape[0]
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                out = np.array(list(pool.map(lambda x: float(self.fn(x)), pts)))
        else:
            out = np.array([self(x) for x in pts])
        if out.size != pts.shape[0]:
            raise OracleError(f"{self.name}: returned {out.size} values for {pts.shape[0]} points")
        if not np.all(np.isfinite(out)):
            bad = int(np.flatnonzero(~np.isfinite(out))[0])
            raise OracleError(f"{self.name}: non-finite value at point {pts[bad].tolist()}")
        return out


class ExecOracle(SampleOracle):
    """Subprocess oracle; all points of one batch go through one process."""

    def __init__(self, command: str, d: int, timeout: float = 600.0):
        super().__init__(None, d, concurrency_safe=False, name=f"exec:{command}")
        self.argv = shlex.split(command)
        self.timeout = timeout

    def __call__(self, xi) -> float:
        return float(self.evaluate_many(np.asarray(xi, dtype=np.float64)[None, :])[0])

    def evaluate_many(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if pts.shape[1] != self.d:
            raise OracleError(f"{self.name}: points must have {self.d} coordinates")
        payload = "".join(" ".join(fmt_float(v) for v in row) + "\n" for row in pts)
        try:
            proc = subprocess.run(self.argv, input=payload, capture_output=True, text=True,
                                  timeout=self.timeout, check=False)
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise OracleError(f"{self.name}: {exc}") from exc
        if proc.returncode != 0:
            raise OracleError(f"{self.name}: exit status {proc.returncode}: {proc.stderr.strip()[:500]}")
        lines = [ln for ln in proc.stdout.splitlines() if ln.strip()]
        if len(lines) != pts.shape[0]:
            raise OracleError(f"{self.name}: got {len(lines)} values for {pts.shape[0]} points")
        try:
            out = np.array([float(ln) for ln in lines])
        except ValueError as exc:
            raise OracleError(f"{self.name}: unparsable output: {exc}") from exc
        if not np.all(np.isfinite(out)):
            raise OracleError(f"{self.name}: non-finite value in output")
        self.calls += pts.shape[0]
        return out


# -- builtins ---------------------------------------------------------------

SQRT2 = math.sqrt(2.0)


def sparse2_terms(d: int) -> list[tuple[tuple, float]]:
    """Nonzero gPC coefficients of the builtin sparse degree-2 oracle.

    Terms are (multi-index, coefficient) with orthonormal Hermite factors;
    terms touching parameters beyond ``d`` are dropped.
    """
    spec = [
        ({}, 1.0),
        ({0: 1}, 0.5),
        ({2: 1}, -0.8),
        ({0: 1, 1: 1}, 0.3),
        ({3: 2}, 0.4),
        ({4: 1, 5: 1}, 0.2),
    ]
    out = []
    for term, c in spec:
        if all(k < d for k in term):
            alpha = tuple(term.get(k, 0) for k in range(d))
            out.append((alpha, c))
    return out


def _hermite_orthonormal(x, deg):
    if deg == 0:
        return np.ones_like(x)
    if deg == 1:
        return x
    if deg == 2:
        return (x * x - 1.0) / SQRT2
    raise ValueError("builtin oracle uses degree <= 2")


def _sparse2(d):
    terms = sparse2_terms(d)

    def batch(pts):
        out = np.zeros(pts.shape[0])
        for alpha, c in terms:
            t = np.full(pts.shape[0], c)
            for k, a in enumerate(alpha):
                if a:
                    t *= _hermite_orthonormal(pts[:, k], a)
            out += t
        return out

    return SampleOracle(lambda x: batch(x[None, :])[0], d, True, "builtin:sparse2", batch)


def quadform_params(d: int, seed: int = 7) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric zero-diagonal Q and vector b of the builtin quadratic form."""
    rng = np.random.default_rng(seed)
    q = rng.standard_normal((d, d)) / math.sqrt(d)
    q = 0.5 * (q + q.T)
    np.fill_diagonal(q, 0.0)
    b = rng.standard_normal(d) / math.sqrt(d)
    return q, b


def _quadform(d):
    q, b = quadform_params(d)

    def batch(pts):
        return np.einsum("ni,ij,nj->n", pts, q, pts) + pts @ b

    return SampleOracle(lambda x: batch(x[None, :])[0], d, True, "builtin:quadform", batch)


def _ring(d):
    # smooth non-polynomial stand-in for an oscillator frequency
    wts = 0.08 / (1.0 + np.arange(d))

    def batch(pts):
        s = pts @ wts
        return 1.0 / (1.0 + 0.5 * np.tanh(s) + 0.05 * s**2)

    return SampleOracle(lambda x: batch(x[None, :])[0], d, True, "builtin:ring", batch)


def _linear(d):
    def batch(pts):
        return pts.sum(axis=1)

    return SampleOracle(lambda x: batch(x[None, :])[0], d, True, "builtin:linear", batch)


def _constant(d):
    def batch(pts):
        return np.full(pts.shape[0], 3.0)

    return SampleOracle(lambda x: 3.0, d, True, "builtin:constant", batch)


BUILTINS = {
    "sparse2": _sparse2,
    "poly6": _sparse2,
    "quadform": _quadform,
    "ring": _ring,
    "linear": _linear,
    "constant": _constant,
}


def make_oracle(ref: str, d: int) -> SampleOracle:
    """Resolve ``builtin:<name>`` or ``exec:<command>``."""
    if ref.startswith("builtin:"):
        name = ref.split(":", 1)[1]
        if name not in BUILTINS:
            raise ValueError(f"unknown builtin oracle {name!r}; choose from {sorted(BUILTINS)}")
        return BUILTINS[name](d)
    if ref.startswith("exec:"):
        return ExecOracle(ref.split(":", 1)[1], d)
    raise ValueError("oracle must be builtin:<name> or exec:<path>")
