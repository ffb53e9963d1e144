"""Acceptance suite: ten end-to-end checks with fixed seeds and tolerances.

Each ``criterion_k`` returns a :class:`CriterionResult`; the runtime limit is
part of the pass condition.  ``tenkit selftest`` and the test suite both call
:func:`run_all`.
"""

from __future__ import annotations

import math
import tempfile
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .completion import complete_fixed_rank, complete_nuclear, project_omega, sample_uniform
from .core import DenseTensor, matricize, vectorize
from .decomp import (
    ConvergenceWarning,
    CPModel,
    TTModel,
    TuckerModel,
    cpd_als,
    hosvd,
    parameter_count,
    table1_count,
    tt_svd,
    ttr1_svd,
)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    elapsed: float
    limit: float | None

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        lim = f" (limit {self.limit:g} s)" if self.limit else ""
        return f"[{tag}] criterion {self.number}: {self.name}: {self.detail} [{self.elapsed:.1f} s{lim}]"


def _timed(number, name, limit, fn) -> CriterionResult:
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ok, detail = fn()
    el = time.perf_counter() - t0
    if limit is not None and el > limit:
        ok = False
        detail += f"; runtime {el:.1f} s over the limit"
    return CriterionResult(number, name, bool(ok), detail, el, limit)


# -- planted instances shared with the tests ----------------------------------


def planted_cp(shape, r: int, seed: int) -> DenseTensor:
    rng = np.random.default_rng(seed)
    fs = [rng.standard_normal((n, r)) for n in shape]
    return CPModel(np.ones(r), tuple(fs)).densify()


def planted_tucker(n: int, r: int, d: int, seed: int) -> DenseTensor:
    rng = np.random.default_rng(seed)
    us = [np.linalg.qr(rng.standard_normal((n, r)))[0] for _ in range(d)]
    core = DenseTensor(rng.standard_normal((r,) * d))
    return TuckerModel(core, tuple(us)).densify()


def well_conditioned_cp(shape, r: int, seed: int) -> CPModel:
    """Orthonormal factor columns and weights in [1, 2]."""
    rng = np.random.default_rng(seed)
    fs = [np.linalg.qr(rng.standard_normal((n, r)))[0] for n in shape]
    return CPModel(1.0 + rng.random(r), tuple(fs))


# -- criteria -----------------------------------------------------------------


def criterion_1() -> CriterionResult:
    def run():
        a = DenseTensor(np.arange(1, 25), (3, 4, 2))
        m1 = np.array([[1, 4, 7, 10, 13, 16, 19, 22], [2, 5, 8, 11, 14, 17, 20, 23], [3, 6, 9, 12, 15, 18, 21, 24]])
        m3 = np.array([list(range(1, 13)), list(range(13, 25))])
        ok1 = np.array_equal(matricize(a, 1), m1)
        ok3 = np.array_equal(matricize(a, 3), m3)
        okv = np.array_equal(vectorize(a), np.arange(1, 25))
        return ok1 and ok3 and okv, f"mode-1 {ok1}, mode-3 {ok3}, vec {okv}"

    return _timed(1, "unfolding and vectorization conventions", 1.0, run)


def criterion_2(count: int = 50) -> CriterionResult:
    def run():
        worst_hosvd = 0.0
        tt_bad = 0
        worst_parseval = 0.0
        cp_ok = 0
        for seed in range(count):
            rng = np.random.default_rng(seed)
            d = 2 + seed % 4
            shape = tuple(int(n) for n in rng.integers(2, 9, size=d))
            a = DenseTensor(rng.standard_normal(shape))
            na = a.norm()
            worst_hosvd = max(worst_hosvd, (hosvd(a).densify() - a).norm() / na)
            for eps in (1e-2, 1e-4, 1e-8):
                tt = tt_svd(a, eps)
                if np.linalg.norm(tt.full_array() - a.array) / na > eps:
                    tt_bad += 1
            t = ttr1_svd(a)
            worst_parseval = max(worst_parseval, abs(float(np.sum(t.weights**2)) - na**2) / na**2)
            cshape = tuple(int(n) for n in rng.integers(3, 9, size=d))
            planted = well_conditioned_cp(cshape, 3, seed)
            _, rep = cpd_als(planted.densify(), 3, max_iters=200, seed=seed)
            cp_ok += rep.residual <= 1e-6
        rate = cp_ok / count
        ok = worst_hosvd <= 1e-10 and tt_bad == 0 and worst_parseval <= 1e-10 and rate >= 0.9
        return ok, (f"HOSVD {worst_hosvd:.1e}, TT eps violations {tt_bad}, TTr1 Parseval {worst_parseval:.1e}, "
                    f"CP-ALS recovery {cp_ok}/{count}")

    return _timed(2, "decomposition correctness", 60.0, run)


def criterion_3(count: int = 20) -> CriterionResult:
    def run():
        rng = np.random.default_rng(3)
        bad = []
        for _ in range(count):
            n = int(rng.integers(2, 7))
            d = int(rng.integers(2, 5))
            r = int(rng.integers(1, n + 1))
            cp = CPModel(np.ones(r), tuple(rng.standard_normal((n, r)) for _ in range(d)))
            tk = TuckerModel(DenseTensor(rng.standard_normal((r,) * d)),
                             tuple(rng.standard_normal((n, r)) for _ in range(d)))
            ranks = [1] + [r] * (d - 1) + [1]
            tt = TTModel(tuple(rng.standard_normal((ranks[k], n, ranks[k + 1])) for k in range(d)))
            for kind, model in (("cp", cp), ("tucker", tk), ("tt", tt)):
                if parameter_count(model) != table1_count(kind, n, d, r):
                    bad.append((kind, n, d, r))
        return not bad, f"{3 * count} counts, mismatches {bad or 'none'}"

    return _timed(3, "storage accounting", None, run)


def nuclear_instance(seed: int = 0, frac: float = 0.4):
    b = planted_tucker(10, 2, 3, seed)
    samples = project_omega(b, sample_uniform(b.shape, int(round(frac * b.size)), seed))
    return b, samples


def criterion_4() -> CriterionResult:
    def run():
        a = planted_cp((20, 20, 20), 3, 0)
        s = project_omega(a, sample_uniform(a.shape, 1600, 0))
        _, rep = complete_fixed_rank(s, 3, seed=0, truth=a)
        b, s2 = nuclear_instance(0)
        _, rep2 = complete_nuclear(s2, truth=b)
        mono = rep.monotone and rep2.monotone
        ok = rep.full_error < 1e-4 and rep2.full_error < 1e-2 and mono
        return ok, (f"fixed-rank error {rep.full_error:.2e} (< 1e-4), nuclear error {rep2.full_error:.2e} "
                    f"(< 1e-2), monotone {mono}")

    return _timed(4, "tensor completion", 120.0, run)


def criterion_5() -> CriterionResult:
    from .uq.collocation import BudgetExceeded, collocate_full, collocate_tensor_recovery
    from .uq.oracles import make_oracle, sparse2_terms
    from .uq.quadrature import ParamSpec

    def run():
        spec = ParamSpec.uniform_spec(6, 3)
        oracle = make_oracle("builtin:sparse2", 6)
        exp, diag = collocate_tensor_recovery(oracle, spec, 2, 300, seed=0)
        terms = dict(sparse2_terms(6))
        true = np.array([terms.get(tuple(int(v) for v in a), 0.0) for a in exp.indices])
        cerr = float(np.max(np.abs(exp.coeffs - true)))
        mean_true = terms[(0,) * 6]
        var_true = sum(c * c for a, c in terms.items() if any(a))
        merr = abs(exp.mean() - mean_true) / abs(mean_true)
        verr = abs(exp.variance() - var_true) / var_true
        try:
            collocate_full(oracle, ParamSpec.uniform_spec(57, 3), 2)
            msg = ""
        except BudgetExceeded as exc:
            msg = str(exc)
        quoted = "1.6e27" in msg and "3^57" in msg
        ok = cerr <= 1e-3 and merr <= 1e-3 and verr <= 1e-3 and quoted and oracle.calls == 300
        return ok, (f"max coefficient error {cerr:.1e}, mean {merr:.1e}, variance {verr:.1e} relative, "
                    f"oracle calls {oracle.calls}, d=57 refusal quotes 1.6e27: {quoted}")

    return _timed(5, "tensor-recovery collocation", 120.0, run)


def criterion_6(max_nodes: int = 30, p: int = 4) -> CriterionResult:
    from .uq.gpc import gram_matrix
    from .uq.quadrature import GAUSSIAN, UNIFORM, OrthoBasis

    def run():
        worst = 0.0
        for kind in (GAUSSIAN, UNIFORM):
            b = OrthoBasis(kind)
            for n in range(1, max_nodes + 1):
                x, w = b.gauss(n)
                for k in range(2 * n):
                    err = abs(float(np.sum(w * x**k)) - b.moment(k)) / b.abs_moment(k)
                    worst = max(worst, err)
        gram = 0.0
        for kinds in ((GAUSSIAN,), (UNIFORM,), (GAUSSIAN, UNIFORM), (UNIFORM, GAUSSIAN, GAUSSIAN)):
            g = gram_matrix(kinds, p)
            gram = max(gram, float(np.max(np.abs(g - np.eye(g.shape[0])))))
        return worst <= 1e-12 and gram <= 1e-10, (
            f"worst moment error {worst:.1e} over n = 1..{max_nodes}, Gram deviation {gram:.1e} up to p = {p}")

    return _timed(6, "quadrature and basis", None, run)


def quadform_moments(q: np.ndarray, b: np.ndarray, order: int) -> np.ndarray:
    """Raw moments of ``x^T Q x + b^T x`` for standard normal ``x``, via cumulants."""
    kap = [0.0, float(np.trace(q))]
    for s in range(2, order + 1):
        k = 2 ** (s - 1) * math.factorial(s - 1) * float(np.trace(np.linalg.matrix_power(q, s)))
        k += math.factorial(s) * 2 ** (s - 3) * float(b @ np.linalg.matrix_power(q, s - 2) @ b)
        kap.append(k)
    mom = [1.0]
    for n in range(1, order + 1):
        mom.append(sum(math.comb(n - 1, k - 1) * kap[k] * mom[n - k] for k in range(1, n + 1)))
    return np.array(mom)


def quadform_surrogate(q: np.ndarray, b: np.ndarray, spec):
    """Exact degree-2 Hermite expansion of ``x^T Q x + b^T x`` (zero-diagonal Q)."""
    from .uq.gpc import GpcExpansion, total_degree_indices

    idx = total_degree_indices(spec.d, 2)
    c = np.zeros(idx.shape[0])
    for j, a in enumerate(idx):
        nz = np.flatnonzero(a)
        if a.sum() == 1:
            c[j] = b[nz[0]]
        elif a.sum() == 2 and nz.size == 2:
            c[j] = 2 * q[nz[0], nz[1]]
    return GpcExpansion(spec.kinds, 2, idx, c)


def criterion_7(order: int = 6) -> CriterionResult:
    from .uq.gpc import GpcExpansion, total_degree_indices
    from .uq.hierarchical import dense_tt_builder, hierarchical_basis, tt_moments
    from .uq.oracles import quadform_params
    from .uq.quadrature import OrthoBasis, ParamSpec, build_quadrature

    def run():
        spec = ParamSpec.uniform_spec(3, 6)
        grid = build_quadrature(spec)
        idx = total_degree_indices(3, 1)
        c = np.zeros(idx.shape[0])
        c[1] = 1.0
        rule = hierarchical_basis(GpcExpansion(spec.kinds, 1, idx, c), grid, 4)
        x, w = OrthoBasis("gaussian").gauss(4)
        rule_err = max(float(np.max(np.abs(rule.nodes - x))), float(np.max(np.abs(rule.weights - w))))
        qm, bv = quadform_params(8)
        spec8 = ParamSpec.uniform_spec(8, 5)
        grid8 = build_quadrature(spec8)
        y, _ = dense_tt_builder(quadform_surrogate(qm, bv, spec8), grid8, 1e-13)
        got = tt_moments(y, grid8, order)
        ref = quadform_moments(qm, bv, order)
        # the first moment is zero; scale every order by sigma^s
        scale = np.array([max(abs(ref[s]), ref[2] ** (s / 2)) for s in range(order + 1)])
        merr = float(np.max(np.abs(got - ref) / scale))
        return rule_err <= 1e-8 and merr <= 1e-8, (
            f"y = xi_1 rule vs Gauss-Hermite(4) {rule_err:.1e}, quadratic-form moments 0..{order} "
            f"relative error {merr:.1e}, TT ranks {y.ranks}")

    return _timed(7, "hierarchical basis and TT moments", 60.0, run)


def fd_jacobian(f, x, h: float = 1e-6) -> np.ndarray:
    """Central differences with step ``h * max(1, |x_i|)``."""
    x = np.asarray(x, dtype=np.float64)
    cols = []
    for i in range(x.size):
        step = h * max(1.0, abs(x[i]))
        e = np.zeros(x.size)
        e[i] = step
        cols.append((f(x + e) - f(x - e)) / (2 * step))
    return np.column_stack(cols)


def jacobian_error(model, x, u) -> float:
    j = model.jacobian(x, u)
    fd = fd_jacobian(lambda z: model.rhs(z, u), x)
    return float(np.max(np.abs(j - fd))) / max(float(np.max(np.abs(j))), 1.0)


def mor_test_system(n: int = 8, m: int = 2, seed: int = 0):
    """Dense cubic system with a dissipative cubic part and generic B, D, E."""
    from .mor import PolynomialSystem

    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n)) / math.sqrt(n)
    ct = np.zeros((n, n, n, n))
    for i in range(n):
        ct[i, i, np.arange(n), np.arange(n)] = -1.0
    ct += 0.02 * rng.standard_normal(ct.shape)
    return PolynomialSystem(
        -(a @ a.T) - np.eye(n),
        0.1 * rng.standard_normal((n, n * n)),
        ct.reshape(n, -1, order="F"),
        0.1 * rng.standard_normal((n, n * m)),
        0.3 * rng.standard_normal((n, m)),
    )


def criterion_8(points: int = 20) -> CriterionResult:
    from .mor import ReducedSystem, complexity_bench, tensorize

    def run():
        sys = mor_test_system()
        tsys = tensorize(sys, eps=1e-10)
        rng = np.random.default_rng(8)
        v, _ = np.linalg.qr(rng.standard_normal((sys.n, 4)))
        red = ReducedSystem(tsys, v)
        red_dense = red.to_dense()
        worst = 0.0
        for _ in range(points):
            x = rng.standard_normal(sys.n)
            u = rng.standard_normal(sys.m)
            xh = rng.standard_normal(red.q)
            for model, pt in ((sys, x), (tsys, x), (red, xh), (red_dense, xh)):
                worst = max(worst, jacobian_error(model, pt, u))
        gal = red.galerkin_check(points=100, seed=1)
        bench = complexity_bench((5, 10, 20), r=4)
        sf, sd = bench["slope_factored_rhs"], bench["slope_dense_rhs"]
        ok = worst <= 1e-5 and gal <= 1e-10 and abs(sf - 1) <= 0.3 and abs(sd - 4) <= 0.3
        return ok, (f"Jacobian vs FD {worst:.1e}, Galerkin {gal:.1e}, rhs count slopes factored {sf:.2f} "
                    f"dense {sd:.2f}")

    return _timed(8, "model order reduction", 120.0, run)


def criterion_9(inputs: int = 20) -> CriterionResult:
    from .volterra import (FactoredKernel3, VolterraKernel3, direct_response, factored_response,
                           lowpass_kernel, tradeoff_report)

    def run():
        rng = np.random.default_rng(9)
        worst = homog = shift = 0.0
        for i in range(inputs):
            mm = int(rng.integers(1, 9))
            k = int(rng.integers(mm, 65))
            r = int(rng.integers(1, 5))
            cp = CPModel(rng.standard_normal(r), tuple(rng.standard_normal((mm, r)) for _ in range(3)))
            ker = VolterraKernel3(cp.full_array())
            fk = FactoredKernel3(cp, 0.0)
            u = rng.standard_normal(k)
            yd = direct_response(ker, u)
            yf = factored_response(fk, u)
            ny = max(float(np.linalg.norm(yd)), 1e-300)
            worst = max(worst, float(np.linalg.norm(yd - yf)) / ny)
            lam = 1.7
            homog = max(homog, float(np.linalg.norm(factored_response(fk, lam * u) - lam**3 * yf)) / (lam**3 * ny))
            s = 3
            us = np.concatenate([np.zeros(s), u])[:k]
            ys = direct_response(ker, us)
            shift = max(shift, float(np.max(np.abs(ys[s:] - yd[: k - s]))) / ny, float(np.max(np.abs(ys[:s]))) / ny)
        u = rng.standard_normal(201)
        rows = tradeoff_report(lowpass_kernel(64), u, [1, 5, 10, 20])
        errs = [row["response_rel_error"] for row in rows]
        sp10 = next(row["speedup"] for row in rows if row["rank"] == 10)
        ok = worst <= 1e-8 and homog <= 1e-10 and shift <= 1e-10 and errs[-1] < errs[0] and sp10 >= 5
        return ok, (f"factored vs direct {worst:.1e}, homogeneity {homog:.1e}, shift {shift:.1e}, "
                    f"response error by rank {', '.join(f'{e:.1e}' for e in errs)}, speedup at R=10 {sp10:.0f}x")

    return _timed(9, "Volterra response", 180.0, run)


def criterion_10() -> CriterionResult:
    from .cli import determinism_check

    def run():
        with tempfile.TemporaryDirectory() as tmp:
            report = determinism_check(Path(tmp))
        bad = [name for name, same in report.items() if not same]
        return not bad, f"{len(report)} artifacts compared, differing: {bad or 'none'}"

    return _timed(10, "CLI determinism", None, run)


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
}


def run_all(only=None, echo=print) -> list[CriterionResult]:
    out = []
    for k, fn in CRITERIA.items():
        if only and k not in only:
            continue
        res = fn()
        if echo is not None:
            echo(res.line())
        out.append(res)
    return out
