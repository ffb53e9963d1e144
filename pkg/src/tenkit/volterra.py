"""Third-order Volterra responses: direct triple sum and CP-factored FFT path.

``y3[k] = sum_{m1,m2,m3=1..M} h3[m1,m2,m3] u[k-m1] u[k-m2] u[k-m3]`` for
``k = 1..K``, with ``u[j] = 0`` for ``j < 1``.  Arrays are stored 0-based:
``h3[m1-1, m2-1, m3-1]``, ``u[j-1]`` and ``y3[k-1]``.

With ``h3 = sum_r s_r a_r o b_r o c_r`` the triple sum splits into
``y3 = sum_r s_r (a_r * u)(b_r * u)(c_r * u)`` where ``*`` is a causal
convolution delayed by one sample, so each rank term costs three FFTs.
"""

from __future__ import annotations

import math
import os
import platform
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.fft import next_fast_len

from .core import DenseTensor, DimensionError
from .decomp import ConvergenceWarning, CPModel, cpd_als, ttr1_svd
from .io import read_json, read_ten, write_json, write_ten


@dataclass(frozen=True)
class VolterraKernel3:
    h3: np.ndarray  # (M, M, M), entry [m1-1, m2-1, m3-1]
    dt: float = 1.0

    def __post_init__(self):
        h = np.asarray(self.h3.array if isinstance(self.h3, DenseTensor) else self.h3, dtype=np.float64)
        if h.ndim != 3 or len(set(h.shape)) != 1 or h.shape[0] < 1:
            raise DimensionError(f"kernel must be M x M x M, got {h.shape}")
        if not np.all(np.isfinite(h)):
            raise ValueError("kernel has non-finite entries")
        object.__setattr__(self, "h3", h)

    @property
    def memory(self) -> int:
        return self.h3.shape[0]


@dataclass(frozen=True)
class FactoredKernel3:
    model: CPModel
    fit_error: float
    method: str = "als"

    @property
    def rank(self) -> int:
        return self.model.rank

    @property
    def memory(self) -> int:
        return self.model.shape[0]


def _check_input(u) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64).ravel()
    if u.size < 1:
        raise ValueError("input sequence must have K >= 1 samples")
    return u


def direct_response(kernel: VolterraKernel3, u) -> np.ndarray:
    """Triple-sum evaluation, ``O(K M^3)``."""
    u = _check_input(u)
    h = kernel.h3
    mm = kernel.memory
    k_len = u.size
    # padded[j] = u[j - mm] in 1-based time, zeros before the first sample
    padded = np.concatenate([np.zeros(mm), u])
    flat = h.reshape(mm * mm, mm)
    y = np.empty(k_len)
    for k in range(1, k_len + 1):
        # window[m-1] = u[k-m], m = 1..M
        window = padded[k - 1 : k - 1 + mm][::-1]
        y[k - 1] = window @ ((flat @ window).reshape(mm, mm) @ window)
    return y


def direct_convolve(a, u) -> np.ndarray:
    """Full linear convolution by explicit sums (reference)."""
    a = np.asarray(a, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    out = np.zeros(a.size + u.size - 1)
    for i, ai in enumerate(a):
        out[i : i + u.size] += ai * u
    return out


def fft_convolve(a, u) -> np.ndarray:
    """Full linear convolution along axis 0 via zero-padded real FFTs.

    ``a`` may be (M,) or (M, R); each column is convolved with ``u``.
    """
    a = np.asarray(a, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64).ravel()
    n_out = a.shape[0] + u.size - 1
    nfft = next_fast_len(n_out, real=True)
    fu = np.fft.rfft(u, nfft)
    fa = np.fft.rfft(a, nfft, axis=0)
    if a.ndim == 2:
        fu = fu[:, None]
    return np.fft.irfft(fa * fu, nfft, axis=0)[:n_out]


def _delayed_conv(f: np.ndarray, u: np.ndarray) -> np.ndarray:
    """``s[k] = sum_m f[m] u[k-m]`` for k = 1..K (1-based lags)."""
    full = fft_convolve(f, u)
    out = np.zeros((u.size,) + f.shape[1:])
    out[1:] = full[: u.size - 1]
    return out


def factored_response(fk: FactoredKernel3, u) -> np.ndarray:
    """Response of a CP-factored kernel, ``O(R K log K)``."""
    u = _check_input(u)
    a, b, c = fk.model.factors
    sa = _delayed_conv(a, u)
    sb = _delayed_conv(b, u)
    sc = _delayed_conv(c, u)
    return (sa * sb * sc) @ fk.model.weights


def factorize_kernel(kernel: VolterraKernel3, rank: int, method: str = "auto", seed: int = 0,
                     max_iters: int = 500) -> FactoredKernel3:
    """Rank-``rank`` CP model of the kernel.

    ``als`` runs CP-ALS; ``ttr1`` keeps the largest terms of the orthogonal
    rank-1 expansion (exact once ``rank`` reaches its term count, at most
    ``M^2``); ``auto`` runs both and keeps the lower fit error.
    """
    if rank < 1:
        raise ValueError("rank must be >= 1")
    if method not in ("als", "ttr1", "auto"):
        raise ValueError(f"unknown method {method!r}")
    h = kernel.h3
    norm = float(np.linalg.norm(h))
    cands = []
    if method in ("ttr1", "auto"):
        t = ttr1_svd(DenseTensor(h))
        k = min(rank, t.nterms)
        cp = t.truncate(k).as_cp()
        err = t.truncation_error(k) / norm if norm else 0.0
        cands.append((err, cp, "ttr1"))
    if method in ("als", "auto") and rank < kernel.memory**2:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            cp, rep = cpd_als(DenseTensor(h), rank, max_iters=max_iters, seed=seed)
        cands.append((rep.residual, cp, "als"))
    if not cands:
        return factorize_kernel(kernel, rank, "ttr1", seed)
    err, cp, used = min(cands, key=lambda c: c[0])
    # recorded error measured on the densified model
    err = float(np.linalg.norm(cp.full_array() - h)) / norm if norm else 0.0
    return FactoredKernel3(cp, err, used)


def lowpass_kernel(m: int, tau: float | None = None, width: float | None = None, seed: int = 0) -> VolterraKernel3:
    """Synthetic decaying, smooth, non-separable kernel."""
    tau = tau or m / 4.0
    width = width or m / 8.0
    idx = np.arange(1, m + 1, dtype=np.float64)
    m1, m2, m3 = np.meshgrid(idx, idx, idx, indexing="ij")
    decay = np.exp(-(m1 + m2 + m3) / tau)
    coupling = 1.0 / (1.0 + ((m1 - m2) ** 2 + (m2 - m3) ** 2 + (m1 - m3) ** 2) / width**2)
    ripple = np.cos(2 * math.pi * (m1 + m2 + m3) / (m + 1))
    return VolterraKernel3(decay * coupling * (1.0 + 0.3 * ripple))


def machine_fingerprint() -> dict:
    return {
        "platform": platform.platform(),
        "machine": platform.machine(),
        "processor": platform.processor(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "cpus": os.cpu_count(),
    }


def _median_time(fn, repeats: int) -> float:
    fn()  # warm cache
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def tradeoff_report(kernel: VolterraKernel3, u, ranks, method: str = "auto", seed: int = 0,
                    repeats: int = 5) -> list[dict]:
    """Per-rank kernel fit error, response error and timings.

    Timings are medians of ``repeats`` wall-clock runs after one warm-up.
    """
    ranks = [int(r) for r in ranks]
    if not ranks:
        raise ValueError("ranks must be non-empty")
    repeats = max(5, int(repeats))
    u = _check_input(u)
    y_ref = direct_response(kernel, u)
    t_direct = _median_time(lambda: direct_response(kernel, u), repeats)
    ny = float(np.linalg.norm(y_ref))
    rows = []
    for r in ranks:
        fk = factorize_kernel(kernel, r, method, seed)
        y = factored_response(fk, u)
        t_fact = _median_time(lambda: factored_response(fk, u), repeats)
        rows.append({
            "rank": r,
            "kernel_fit_error": fk.fit_error,
            "response_rel_error": float(np.linalg.norm(y - y_ref)) / ny if ny else 0.0,
            "direct_time": t_direct,
            "factored_time": t_fact,
            "speedup": t_direct / t_fact if t_fact > 0 else math.inf,
            "method": fk.method,
        })
    return rows


TRADEOFF_COLUMNS = ("rank", "kernel_fit_error", "response_rel_error", "direct_time", "factored_time", "speedup")
TIMING_FIELDS = ("direct_time", "factored_time", "speedup")


def save_kernel(kernel: VolterraKernel3, path) -> None:
    """``.ten`` samples plus a JSON sidecar holding ``dt``."""
    path = Path(path)
    write_ten(path, DenseTensor(kernel.h3))
    write_json(path.with_suffix(".json"), {"memory": kernel.memory, "dt": kernel.dt})


def load_kernel(path) -> VolterraKernel3:
    path = Path(path)
    h = read_ten(path).array
    meta = path.with_suffix(".json")
    dt = float(read_json(meta).get("dt", 1.0)) if meta.exists() else 1.0
    return VolterraKernel3(h, dt)
