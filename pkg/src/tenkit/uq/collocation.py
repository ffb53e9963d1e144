"""Stochastic collocation: full tensor grid and tensor-recovery variants."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..completion import (
    LrSparseProblem,
    SampleSet,
    UnderdeterminedWarning,
    complete_lr_sparse,
    residual_omega,
    sample_uniform,
)
from ..core import DenseTensor
from .gpc import GpcExpansion, project_coefficients, total_degree_indices, weight_tensors
from .quadrature import ParamSpec, build_quadrature

FULL_GRID_BUDGET = 10**6


class BudgetExceeded(RuntimeError):
    pass


def grid_count_message(spec: ParamSpec, budget: int = FULL_GRID_BUDGET) -> str:
    total = spec.grid_size
    sizes = set(spec.sizes)
    if len(sizes) == 1:
        expr = f"{spec.sizes[0]}^{spec.d}"
    else:
        expr = " x ".join(str(n) for n in spec.sizes)
    mant, exp = f"{float(total):.1e}".split("e")
    return (
        f"full tensor-product collocation needs {expr} = {total} ≈ {mant}e{int(exp)} total samples, "
        f"above the oracle budget of {budget}; use tensor-recovery collocation instead"
    )


def _evaluate_grid(oracle, grid, idx0=None) -> np.ndarray:
    pts = grid.all_points() if idx0 is None else grid.points(idx0)
    return oracle.evaluate_many(pts)


def collocate_full(oracle, spec: ParamSpec, p: int, budget: int = FULL_GRID_BUDGET) -> GpcExpansion:
    """Evaluate the oracle on the whole Gauss grid and project every coefficient."""
    if spec.grid_size > budget:
        raise BudgetExceeded(grid_count_message(spec, budget))
    grid = build_quadrature(spec)
    y = DenseTensor(_evaluate_grid(oracle, grid), spec.sizes)
    return project_coefficients(y, grid, p, {"method": "full", "samples": spec.grid_size})


@dataclass
class RecoveryDiagnostics:
    samples: int
    objective: list
    observed_residual: float
    holdout_rel_error: float | None
    sparsity: int
    z_tol: float
    iterations: int
    converged: bool
    monotone: bool
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "samples": self.samples,
            "objective": [float(v) for v in self.objective],
            "observed_residual": self.observed_residual,
            "holdout_rel_error": self.holdout_rel_error,
            "sparsity": self.sparsity,
            "z_tol": self.z_tol,
            "iterations": self.iterations,
            "converged": self.converged,
            "monotone": self.monotone,
            **self.extra,
        }


def collocate_tensor_recovery(
    oracle,
    spec: ParamSpec,
    p: int,
    budget: int,
    rank: int = 6,
    lam: float | None = None,
    holdout: float = 0.0,
    seed: int = 0,
    restarts: int = 8,
    min_budget: int | None = None,
    **solver_cfg,
) -> tuple[GpcExpansion, RecoveryDiagnostics]:
    """gPC coefficients from a few grid samples by low-rank + sparse completion.

    Draws ``budget`` distinct grid indices uniformly (seeded) and queries the
    oracle only there.  A fraction ``holdout`` of them is kept out of the
    fit and used to report the relative error of the recovered tensor.  The
    transforms are the quadrature weight tensors ``W_alpha``, so the
    returned coefficients are ``c_alpha = <X, W_alpha>``.

    ``lam`` defaults to ``1e-6`` times the rms of the sampled values.  The
    completion runs ``restarts`` seeded starts and keeps the one with the
    lowest objective, since single alternating runs can stall in
    degenerate configurations.
    """
    total = spec.grid_size
    floor = min_budget if min_budget is not None else rank * sum(spec.sizes) // 2
    if budget < max(floor, 1):
        raise ValueError(f"budget {budget} is below the floor of {floor} samples")
    if budget > total:
        raise ValueError(f"budget {budget} exceeds the {total} grid points")
    grid = build_quadrature(spec)
    idx1 = sample_uniform(spec.sizes, budget, seed)
    vals = _evaluate_grid(oracle, grid, idx1 - 1)
    samples = SampleSet(spec.sizes, idx1, vals)
    test = None
    if holdout > 0:
        samples, test = samples.split(holdout, seed)
    mi = total_degree_indices(spec.d, p)
    transforms = weight_tensors(grid, mi)
    if lam is None:
        lam = 1e-6 * float(np.sqrt(np.mean(samples.values**2)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UnderdeterminedWarning)
        model, z, rep = complete_lr_sparse(
            LrSparseProblem(samples, transforms, lam, rank), seed=seed, restarts=restarts, **solver_cfg
        )
    hold = None
    if test is not None:
        hold = residual_omega(model, test) / max(float(np.linalg.norm(test.values)), 1e-300)
    exp = GpcExpansion(spec.kinds, p, mi, z, {"method": "tensor_recovery", "samples": budget,
                                              "rank": rank, "lambda": lam})
    diag = RecoveryDiagnostics(
        samples=budget,
        objective=rep.objective,
        observed_residual=rep.observed_residual,
        holdout_rel_error=hold,
        sparsity=rep.sparsity,
        z_tol=rep.z_tol,
        iterations=rep.iterations,
        converged=rep.converged,
        monotone=rep.monotone,
        extra={"grid_points": total, "oracle_calls": budget, "sample_indices": idx1.tolist()},
    )
    if not rep.converged:
        warnings.warn(f"tensor recovery stopped after {rep.iterations} iterations without converging")
    return exp, diag


def sample_parameters(spec: ParamSpec, count: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    cols = []
    for kind in spec.kinds:
        if kind == "gaussian":
            cols.append(rng.standard_normal(count))
        else:
            cols.append(rng.uniform(-1.0, 1.0, count))
    return np.column_stack(cols)


def ks_distance(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic."""
    return float(stats.ks_2samp(a, b).statistic)


def density_comparison(exp: GpcExpansion, oracle, spec: ParamSpec, count: int = 10**5,
                       seed: int = 0, bins: int = 60) -> dict:
    """Monte Carlo densities of the surrogate and the oracle on shared points."""
    xi = sample_parameters(spec, count, seed)
    ys = exp.evaluate(xi)
    yo = oracle.evaluate_many(xi)
    lo = float(min(ys.min(), yo.min()))
    hi = float(max(ys.max(), yo.max()))
    if hi <= lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    hs, _ = np.histogram(ys, edges, density=True)
    ho, _ = np.histogram(yo, edges, density=True)
    return {
        "ks": ks_distance(ys, yo),
        "edges": edges,
        "surrogate_density": hs,
        "oracle_density": ho,
        "surrogate_mean": float(ys.mean()),
        "oracle_mean": float(yo.mean()),
    }
