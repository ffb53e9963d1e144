"""``tenkit`` batch command line.

Every run writes its artifacts into ``--out`` followed by ``manifest.json``
(config echo, versions, diagnostics).  Files are written atomically, so an
interrupted run never leaves a truncated artifact.  Timing values live
only under the manifest's ``timing`` key and in explicitly named CSV
columns, which determinism comparisons skip.

Exit codes: 0 success, 1 invalid arguments or inputs, 2 I/O failure,
3 numerical failure (a ``diagnostic.json`` is written next to the outputs).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import platform
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .io import FormatError, read_tensor, write_csv, write_json, write_tensor
from .uq.collocation import BudgetExceeded

log = logging.getLogger("tenkit")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3
TIMING_KEYS = ("timing",)
TIMING_COLUMNS = ("direct_time", "factored_time", "speedup")


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def default_seed() -> int:
    env = os.environ.get("TENKIT_SEED")
    if env is None or env == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"TENKIT_SEED must be an integer, got {env!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _versions() -> dict:
    return {"tenkit": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _config(args) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in ("func",):
            continue
        out[k] = v
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


# -- subcommands ----------------------------------------------------------------


def cmd_decompose(args) -> dict:
    from .decomp import (cpd_als, cpd_fit_incremental, hosvd, parameter_count, save_model, tt_svd,
                         ttr1_svd, tucker_truncate)

    a = read_tensor(args.input)
    na = a.norm()
    if args.method == "cp":
        if args.rank:
            model, rep = cpd_als(a, args.rank, max_iters=args.max_iters, restarts=args.restarts, seed=args.seed)
        else:
            model, rep = cpd_fit_incremental(a, args.eps, args.r_max, max_iters=args.max_iters, seed=args.seed)
        diag = {"residual": rep.residual, "iterations": rep.iterations, "converged": rep.converged,
                "ranks": [model.rank]}
    elif args.method == "tucker":
        if args.ranks:
            model, err = tucker_truncate(a, args.ranks)
            res = err / na if na else 0.0
        else:
            model = hosvd(a)
            res = (model.densify() - a).norm() / na if na else 0.0
        diag = {"residual": res, "ranks": list(model.ranks)}
    elif args.method == "tt":
        model = tt_svd(a, args.eps)
        res = float(np.linalg.norm(model.full_array() - a.array)) / na if na else 0.0
        diag = {"residual": res, "ranks": list(model.ranks)}
    else:
        model = ttr1_svd(a)
        if args.rank:
            model = model.truncate(args.rank)
        res = float(np.linalg.norm(model.as_cp().full_array() - a.array)) / na if na else 0.0
        diag = {"residual": res, "ranks": [model.nterms]}
    save_model(model, Path(args.out) / "model")
    diag["parameters"] = parameter_count(model)
    diag["shape"] = list(a.shape)
    return {"diagnostics": diag, "outputs": ["model/model.json"]}


def _write_trajectory_csv(path, traj, name="objective"):
    write_csv(path, ["iteration", name], [(i, v) for i, v in enumerate(traj)])


def cmd_complete(args) -> dict:
    from .completion import LrSparseProblem, SampleSet, complete_fixed_rank, complete_lr_sparse, complete_nuclear
    from .decomp import save_model

    shape = tuple(args.shape)
    samples = SampleSet.read_csv(args.samples, shape)
    truth = read_tensor(args.truth) if args.truth else None
    out = Path(args.out)
    if args.method in ("rank", "fixed_rank"):
        if not args.rank:
            raise UsageError("--rank is required for fixed-rank completion")
        model, rep = complete_fixed_rank(samples, args.rank, max_iters=args.max_iters, seed=args.seed,
                                         restarts=args.restarts, truth=truth)
        save_model(model, out / "model")
        write_tensor(out / "completed.ten", model.densify())
        outputs = ["model/model.json", "completed.ten"]
    elif args.method == "lrsparse":
        if not (args.rank and args.transforms and args.lam is not None):
            raise UsageError("lrsparse completion needs --rank, --transforms and --lam")
        problem = LrSparseProblem(samples, _read_transforms(args.transforms), args.lam, args.rank)
        model, z, rep = complete_lr_sparse(problem, max_iters=args.max_iters, seed=args.seed,
                                           restarts=args.restarts, truth=truth)
        save_model(model, out / "model")
        write_tensor(out / "completed.ten", model.densify())
        write_csv(out / "coefficients.csv", ["k", "z"], [(k + 1, v) for k, v in enumerate(z)])
        outputs = ["model/model.json", "completed.ten", "coefficients.csv"]
    else:
        x, rep = complete_nuclear(samples, max_iters=args.max_iters, truth=truth)
        write_tensor(out / "completed.ten", x)
        outputs = ["completed.ten"]
    _write_trajectory_csv(out / "trajectory.csv", rep.trajectory, "observed_residual")
    outputs.append("trajectory.csv")
    diag = {"observed_residual": rep.observed_residual, "iterations": rep.iterations, "converged": rep.converged,
            "monotone": rep.monotone, "full_error": rep.full_error, "samples": len(samples)}
    if rep.sparsity is not None:
        diag.update(sparsity=rep.sparsity, z_tol=rep.z_tol)
    if not rep.monotone:
        raise ArithmeticError("objective increased during completion")
    return {"diagnostics": diag, "outputs": outputs}


def _read_transforms(path) -> list:
    from .core import Rank1Tensor
    from .io import read_json

    obj = read_json(path)
    items = obj.get("transforms") if isinstance(obj, dict) else obj
    if not isinstance(items, list) or not items:
        raise FormatError(f"{path}: expected a non-empty list of transforms")
    try:
        return [Rank1Tensor(tuple(t["vectors"]), float(t.get("weight", 1.0))) for t in items]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: malformed transform entry: {exc}") from exc


def _spec_from_args(args):
    from .uq.quadrature import ParamSpec

    kinds = args.kinds.split(",")
    if len(kinds) == 1:
        kinds = kinds * args.d
    if len(kinds) != args.d:
        raise UsageError("--kinds must give one kind or one per parameter")
    return ParamSpec(tuple(kinds), (args.nodes,) * args.d)


def _write_coeffs(path, exp):
    header = [f"a{k + 1}" for k in range(exp.d)] + ["coefficient"]
    rows = [list(int(v) for v in a) + [c] for a, c in zip(exp.indices, exp.coeffs)]
    write_csv(path, header, rows)


def cmd_uq_collocate(args) -> dict:
    from .uq.collocation import collocate_full, collocate_tensor_recovery
    from .uq.oracles import make_oracle

    spec = _spec_from_args(args)
    oracle = make_oracle(args.oracle, spec.d)
    if args.threads > 1:
        oracle.workers = args.threads
    out = Path(args.out)
    if args.method == "full":
        exp = collocate_full(oracle, spec, args.order, budget=args.budget or 10**6)
        diag = {"samples": spec.grid_size}
    else:
        if not args.budget:
            raise UsageError("--budget is required for tensor-recovery collocation")
        exp, rd = collocate_tensor_recovery(oracle, spec, args.order, args.budget, rank=args.rank,
                                            lam=args.lam, holdout=args.holdout, seed=args.seed,
                                            restarts=args.restarts)
        diag = rd.to_json()
    diag.update(mean=exp.mean(), variance=exp.variance(), oracle_calls=oracle.calls)
    _write_coeffs(out / "coefficients.csv", exp)
    write_json(out / "expansion.json", _jsonable(exp.to_json()))
    return {"diagnostics": diag, "outputs": ["coefficients.csv", "expansion.json"]}


def cmd_uq_hier(args) -> dict:
    from .io import read_json
    from .uq.gpc import GpcExpansion
    from .uq.hierarchical import hierarchical_basis
    from .uq.quadrature import ParamSpec, build_quadrature

    exp = GpcExpansion.from_json(read_json(args.surrogate))
    spec = ParamSpec(exp.kinds, (args.nodes,) * exp.d)
    rule = hierarchical_basis(exp, build_quadrature(spec), args.n_new, eps_tt=args.eps)
    out = Path(args.out)
    write_csv(out / "rule.csv", ["node", "weight"], list(zip(rule.nodes, rule.weights)))
    write_json(out / "rule.json", _jsonable(rule.to_json()))
    return {"diagnostics": {"tt_ranks": list(rule.tt_ranks), "compression_error": rule.compression_error,
                            "degenerate": rule.degenerate}, "outputs": ["rule.csv", "rule.json"]}


def _ranks_arg(text):
    if not text:
        return None
    out = {}
    for part in text.split(","):
        key, _, val = part.partition("=")
        if key not in ("B", "C", "D") or not val:
            raise UsageError(f"--ranks expects entries like B=4,C=6, got {part!r}")
        out[key] = int(val)
    return out


def _input_fn(args, m):
    if m == 0 or args.input_amplitude == 0:
        return None
    amp, freq = args.input_amplitude, args.input_frequency
    return lambda t: np.full(m, amp * math.sin(2 * math.pi * freq * t))


def _x0(args, n):
    rng = np.random.default_rng(args.seed)
    return args.x0_scale * rng.standard_normal(n)


def cmd_mor_tensorize(args) -> dict:
    from .mor import load_system, save_tensorized, tensorize

    sys_ = load_system(args.system)
    ts = tensorize(sys_, ranks=_ranks_arg(args.ranks), eps=args.eps, r_max=args.r_max,
                   symmetric=args.symmetric, seed=args.seed)
    save_tensorized(ts, Path(args.out) / "tensorized")
    return {"diagnostics": {"ranks": ts.ranks, "fit_errors": ts.fit_errors,
                            "methods": {k: t.method for k, t in zip("BCD", (ts.Bt, ts.Ct, ts.Dt)) if t}},
            "outputs": ["tensorized/tensorized.json"]}


def cmd_mor_reduce(args) -> dict:
    from .io import write_matrix_ten
    from .mor import ReducedSystem, build_projection, load_tensorized

    ts = load_tensorized(args.tensorized)
    v = build_projection(ts, args.q, _x0(args, ts.n), (0.0, args.t1), args.dt, _input_fn(args, ts.m),
                         args.integrator)
    red = ReducedSystem(ts, v)
    out = Path(args.out)
    write_matrix_ten(out / "V.ten", v)
    return {"diagnostics": {"q": red.q, "galerkin_error": red.galerkin_error, "storage": red.storage()},
            "outputs": ["V.ten"]}


def cmd_mor_simulate(args) -> dict:
    from .io import read_matrix_ten
    from .mor import ReducedSystem, load_system, load_tensorized, simulate

    if bool(args.system) == bool(args.tensorized):
        raise UsageError("give exactly one of --system or --tensorized")
    if args.system:
        model = load_system(args.system)
        n = model.n
    else:
        ts = load_tensorized(args.tensorized)
        model = ts
        n = ts.n
        if args.basis:
            model = ReducedSystem(ts, read_matrix_ten(args.basis))
    x0 = _x0(args, n)
    if isinstance(model, ReducedSystem):
        x0 = model.V.T @ x0
    traj = simulate(model, x0, (0.0, args.t1), args.dt, args.integrator, _input_fn(args, model.m))
    q = traj.x.shape[1]
    write_csv(Path(args.out) / "trajectory.csv", ["t"] + [f"x{k + 1}" for k in range(q)],
              [[t] + list(row) for t, row in zip(traj.t, traj.x)])
    return {"diagnostics": {"steps": len(traj.t) - 1, "states": q,
                            "final_norm": float(np.linalg.norm(traj.x[-1]))},
            "outputs": ["trajectory.csv"]}


def cmd_mor_bench(args) -> dict:
    from .mor import TABLE_FORMULAS, complexity_bench

    b = complexity_bench(args.q, r=args.rank, n=args.n, seed=args.seed, symmetric=args.symmetric)
    rows = []
    d = 3
    for row in b["rows"]:
        for method in ("factored", "dense"):
            c = row[method]
            formula = "symmetric" if (method == "factored" and args.symmetric) else (
                "tensor" if method == "factored" else "dense")
            rhs_f, jac_f, sto_f = TABLE_FORMULAS[formula]
            rows.append([row["q"], method, c["rhs_nonlinear"], c["rhs_total"], c["jac_nonlinear"], c["jac_total"],
                         c["storage"], rhs_f(row["q"], d, args.rank), jac_f(row["q"], d, args.rank)])
    write_csv(Path(args.out) / "complexity.csv",
              ["q", "method", "rhs_nonlinear", "rhs_total", "jac_nonlinear", "jac_total", "storage",
               "table_rhs", "table_jacobian"], rows)
    diag = {k: v for k, v in b.items() if k != "rows"}
    return {"diagnostics": diag, "outputs": ["complexity.csv"]}


def _read_signal(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    vals = []
    for r in rows:
        try:
            vals.append(float(r[-1]))
        except ValueError:
            if vals:
                raise FormatError(f"{path}: unparsable value {r[-1]!r}") from None
    if not vals:
        raise FormatError(f"{path}: no samples")
    return np.array(vals)


def _kernel(args):
    from .volterra import load_kernel, lowpass_kernel

    if args.kernel:
        return load_kernel(args.kernel)
    return lowpass_kernel(args.memory)


def _signal(args):
    if args.input:
        return _read_signal(args.input)
    return np.random.default_rng(args.seed).standard_normal(args.samples)


def cmd_volterra_simulate(args) -> dict:
    from .volterra import direct_response, factored_response, factorize_kernel

    ker = _kernel(args)
    u = _signal(args)
    diag = {"memory": ker.memory, "samples": int(u.size)}
    if args.rank:
        fk = factorize_kernel(ker, args.rank, args.fit, seed=args.seed)
        y = factored_response(fk, u)
        diag.update(rank=fk.rank, kernel_fit_error=fk.fit_error, method=fk.method)
    else:
        y = direct_response(ker, u)
    write_csv(Path(args.out) / "response.csv", ["k", "y3"], [(k + 1, v) for k, v in enumerate(y)])
    return {"diagnostics": diag, "outputs": ["response.csv"]}


def cmd_volterra_tradeoff(args) -> dict:
    from .volterra import TRADEOFF_COLUMNS, machine_fingerprint, tradeoff_report

    ker = _kernel(args)
    u = _signal(args)
    rows = tradeoff_report(ker, u, args.ranks, args.fit, seed=args.seed, repeats=args.repeats)
    write_csv(Path(args.out) / "tradeoff.csv", list(TRADEOFF_COLUMNS), [[r[c] for c in TRADEOFF_COLUMNS] for r in rows])
    diag = {"memory": ker.memory, "samples": int(u.size),
            "methods": [r["method"] for r in rows]}
    return {"diagnostics": diag, "outputs": ["tradeoff.csv"],
            "timing_extra": {"machine": machine_fingerprint()}}


def cmd_selftest(args) -> dict:
    from .acceptance import run_all

    only = set(args.only) if args.only else None
    results = run_all(only)
    diag = {"criteria": [{"number": r.number, "name": r.name, "passed": r.passed, "detail": r.detail}
                         for r in results]}
    res = {"diagnostics": diag, "outputs": [], "timing_extra": {"criteria": {r.number: r.elapsed for r in results}}}
    if not all(r.passed for r in results):
        res["exit"] = EXIT_NUMERIC
    return res


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tenkit", description="Tensor computations for circuit-style workloads.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="seed (default: TENKIT_SEED or 0)")
        sp.add_argument("--threads", type=_positive, default=1)
        sp.add_argument("--verbose", action="store_true")

    sp = sub.add_parser("decompose", help="CP, Tucker, TT or TTr1 decomposition of a stored tensor")
    common(sp)
    sp.add_argument("--input", required=True, help=".ten or .json tensor")
    sp.add_argument("--method", choices=("cp", "tucker", "tt", "ttr1"), required=True)
    sp.add_argument("--rank", type=_positive)
    sp.add_argument("--ranks", type=_int_list, help="Tucker ranks, comma separated")
    sp.add_argument("--eps", type=float, default=1e-8)
    sp.add_argument("--r-max", type=_positive, default=10)
    sp.add_argument("--max-iters", type=_positive, default=500)
    sp.add_argument("--restarts", type=_positive, default=1)
    sp.set_defaults(func=cmd_decompose)

    sp = sub.add_parser("complete", help="tensor completion from sampled entries")
    common(sp)
    sp.add_argument("--samples", required=True, help="CSV with i1..id,value (1-based)")
    sp.add_argument("--shape", type=_int_list, required=True)
    sp.add_argument("--method", choices=("rank", "fixed_rank", "lrsparse", "nuclear"), default="rank",
                    help="fixed_rank is an alias of rank")
    sp.add_argument("--rank", type=_positive)
    sp.add_argument("--transforms", help="lrsparse: JSON list of rank-1 transforms {vectors, weight}")
    sp.add_argument("--lam", type=float, help="lrsparse: l1 weight on the transform coefficients")
    sp.add_argument("--max-iters", type=_positive, default=500)
    sp.add_argument("--restarts", type=_positive, default=1)
    sp.add_argument("--truth", help="optional full tensor for error reporting")
    sp.set_defaults(func=cmd_complete)

    uq = sub.add_parser("uq", help="uncertainty quantification").add_subparsers(
        dest="uq_command", required=True, parser_class=_Parser)
    sp = uq.add_parser("collocate", help="gPC coefficients by stochastic collocation")
    common(sp)
    sp.add_argument("--oracle", required=True, help="builtin:<name> or exec:<command>")
    sp.add_argument("--d", type=_positive, default=6)
    sp.add_argument("--nodes", type=_positive, default=3)
    sp.add_argument("--kinds", default="gaussian")
    sp.add_argument("--order", type=int, default=2)
    sp.add_argument("--method", choices=("full", "recovery"), default="recovery")
    sp.add_argument("--budget", type=_positive)
    sp.add_argument("--rank", type=_positive, default=6)
    sp.add_argument("--lam", type=float)
    sp.add_argument("--holdout", type=float, default=0.0)
    sp.add_argument("--restarts", type=_positive, default=8)
    sp.set_defaults(func=cmd_uq_collocate)

    sp = uq.add_parser("hier", help="basis and Gauss rule for a surrogate used as a new input")
    common(sp)
    sp.add_argument("--surrogate", required=True, help="expansion.json from uq collocate")
    sp.add_argument("--nodes", type=_positive, default=5)
    sp.add_argument("--n-new", type=_positive, default=4)
    sp.add_argument("--eps", type=float, default=1e-12)
    sp.set_defaults(func=cmd_uq_hier)

    mor = sub.add_parser("mor", help="polynomial model order reduction").add_subparsers(
        dest="mor_command", required=True, parser_class=_Parser)

    def sim_opts(sp):
        sp.add_argument("--t1", type=float, default=1.0)
        sp.add_argument("--dt", type=float, default=0.01)
        sp.add_argument("--integrator", choices=("rk4", "implicit_euler"), default="rk4")
        sp.add_argument("--input-amplitude", type=float, default=1.0)
        sp.add_argument("--input-frequency", type=float, default=1.0)
        sp.add_argument("--x0-scale", type=float, default=0.1)

    sp = mor.add_parser("tensorize", help="CP-compress B, C, D of a dense system")
    common(sp)
    sp.add_argument("--system", required=True, help="system.json manifest")
    sp.add_argument("--eps", type=float, default=1e-8)
    sp.add_argument("--ranks", help="fixed ranks like B=4,C=6")
    sp.add_argument("--r-max", type=_positive)
    sp.add_argument("--symmetric", action="store_true")
    sp.set_defaults(func=cmd_mor_tensorize)

    sp = mor.add_parser("reduce", help="POD basis and Galerkin-reduced factored model")
    common(sp)
    sp.add_argument("--tensorized", required=True)
    sp.add_argument("--q", type=_positive, required=True)
    sim_opts(sp)
    sp.set_defaults(func=cmd_mor_reduce)

    sp = mor.add_parser("simulate", help="integrate a dense, tensorized or reduced model")
    common(sp)
    sp.add_argument("--system")
    sp.add_argument("--tensorized")
    sp.add_argument("--basis", help="V.ten from mor reduce")
    sim_opts(sp)
    sp.set_defaults(func=cmd_mor_simulate)

    sp = mor.add_parser("bench", help="instrumented operation counts across reduced sizes")
    common(sp)
    sp.add_argument("--q", type=_int_list, default=[5, 10, 20])
    sp.add_argument("--rank", type=_positive, default=4)
    sp.add_argument("--n", type=_positive)
    sp.add_argument("--symmetric", action="store_true")
    sp.set_defaults(func=cmd_mor_bench)

    vol = sub.add_parser("volterra", help="third-order Volterra responses").add_subparsers(
        dest="volterra_command", required=True, parser_class=_Parser)

    def vol_opts(sp):
        sp.add_argument("--kernel", help=".ten kernel (M x M x M), optional .json sidecar with dt")
        sp.add_argument("--memory", type=_positive, default=64, help="memory of the synthetic kernel")
        sp.add_argument("--input", help="CSV input signal (last column)")
        sp.add_argument("--samples", type=_positive, default=201, help="length of the seeded random input")
        sp.add_argument("--fit", choices=("auto", "als", "ttr1"), default="auto")

    sp = vol.add_parser("simulate", help="direct or factored response")
    common(sp)
    vol_opts(sp)
    sp.add_argument("--rank", type=_positive, help="factor the kernel to this rank")
    sp.set_defaults(func=cmd_volterra_simulate)

    sp = vol.add_parser("tradeoff", help="rank / error / speedup table")
    common(sp)
    vol_opts(sp)
    sp.add_argument("--ranks", type=_int_list, default=[1, 5, 10, 20])
    sp.add_argument("--repeats", type=_positive, default=5)
    sp.set_defaults(func=cmd_volterra_tradeoff)

    sp = sub.add_parser("selftest", help="run the acceptance suite")
    common(sp)
    sp.add_argument("--only", type=_int_list, help="criterion numbers to run")
    sp.set_defaults(func=cmd_selftest)
    return p


def _command_name(args) -> str:
    parts = [args.command]
    for k in ("uq_command", "mor_command", "volterra_command"):
        if getattr(args, k, None):
            parts.append(getattr(args, k))
    return " ".join(parts)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    try:
        if args.seed is None:
            args.seed = default_seed()
        if not 0 <= args.seed < 2**64:
            raise UsageError("seed must fit in 64 bits")
        out.mkdir(parents=True, exist_ok=True)
    except UsageError as exc:
        print(f"tenkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"tenkit: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    command = _command_name(args)
    t0 = time.perf_counter()
    caught: list = []
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            res = args.func(args)
    except BudgetExceeded as exc:
        print(f"tenkit {command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, FileNotFoundError) as exc:
        code = EXIT_IO if isinstance(exc, FileNotFoundError) else EXIT_USAGE
        print(f"tenkit {command}: {'I/O error' if code == EXIT_IO else 'error'}: {exc}", file=sys.stderr)
        return code
    except (OSError, FormatError) as exc:
        print(f"tenkit {command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        _diagnostic(out, command, args, exc)
        print(f"tenkit {command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"tenkit {command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    timing = {"elapsed": time.perf_counter() - t0}
    timing.update(res.pop("timing_extra", {}))
    manifest = {
        "command": command,
        "config": _config(args),
        "seed": args.seed,
        "versions": _versions(),
        "diagnostics": res.get("diagnostics", {}),
        "outputs": res.get("outputs", []),
        "warnings": [str(w.message) for w in caught],
        "timing": timing,
    }
    try:
        write_json(out / "manifest.json", _jsonable(manifest))
    except OSError as exc:
        print(f"tenkit {command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    for w in caught:
        log.warning("%s", w.message)
    return res.get("exit", EXIT_OK)


def _diagnostic(out: Path, command: str, args, exc: BaseException) -> None:
    try:
        write_json(out / "diagnostic.json", _jsonable({
            "command": command, "config": _config(args), "error": type(exc).__name__, "message": str(exc)}))
    except OSError:
        pass


# -- determinism ----------------------------------------------------------------


def strip_timing(path: Path) -> bytes:
    """Artifact bytes with timing fields removed (JSON key / CSV columns)."""
    data = path.read_bytes()
    if path.suffix == ".json":
        obj = json.loads(data)
        if isinstance(obj, dict):
            for k in TIMING_KEYS:
                obj.pop(k, None)
        return json.dumps(obj, sort_keys=True).encode()
    if path.suffix == ".csv":
        lines = data.decode().splitlines()
        if not lines:
            return data
        head = lines[0].split(",")
        keep = [i for i, h in enumerate(head) if h not in TIMING_COLUMNS]
        return "\n".join(",".join(line.split(",")[i] for i in keep) for line in lines).encode()
    return data


def _snapshot(directory: Path) -> dict:
    return {str(p.relative_to(directory)): strip_timing(p) for p in sorted(directory.rglob("*")) if p.is_file()}


def determinism_runs(base: Path) -> list[list[str]]:
    """A small run per subcommand, with inputs generated under ``base``."""
    from .completion import project_omega, sample_uniform
    from .core import DenseTensor, outer
    from .acceptance import mor_test_system, planted_cp
    from .io import write_ten
    from .mor import save_system

    base.mkdir(parents=True, exist_ok=True)
    write_ten(base / "rank1.ten", outer([1.0, 2.0, 3.0], [1.0, -1.0], [0.5, 2.0, 1.0, 4.0]).densify())
    a = planted_cp((8, 8, 8), 2, 1)
    write_ten(base / "cp.ten", a)
    project_omega(a, sample_uniform(a.shape, 200, 1)).write_csv(base / "samples.csv")
    save_system(mor_test_system(n=6, m=1), base / "system")
    r = str(base / "runs")
    return [
        ["decompose", "--input", str(base / "rank1.ten"), "--method", "tt", "--eps", "1e-8", "--out", f"{r}/tt"],
        ["decompose", "--input", str(base / "cp.ten"), "--method", "cp", "--rank", "2", "--out", f"{r}/cp"],
        ["complete", "--samples", str(base / "samples.csv"), "--shape", "8,8,8", "--rank", "2",
         "--out", f"{r}/complete"],
        ["uq", "collocate", "--oracle", "builtin:poly6", "--budget", "300", "--seed", "5", "--out", f"{r}/uq"],
        ["uq", "hier", "--surrogate", f"{r}/uq/expansion.json", "--nodes", "3", "--n-new", "3", "--out", f"{r}/hier"],
        ["mor", "tensorize", "--system", str(base / "system/system.json"), "--out", f"{r}/tens"],
        ["mor", "reduce", "--tensorized", f"{r}/tens/tensorized", "--q", "3", "--out", f"{r}/red"],
        ["mor", "simulate", "--tensorized", f"{r}/tens/tensorized", "--basis", f"{r}/red/V.ten",
         "--integrator", "implicit_euler", "--out", f"{r}/sim"],
        ["mor", "bench", "--out", f"{r}/bench"],
        ["volterra", "tradeoff", "--memory", "16", "--samples", "64", "--ranks", "1,4", "--out", f"{r}/vol"],
    ]


def determinism_check(base: Path) -> dict:
    """Run every command twice; map each artifact to whether it matched."""
    runs = determinism_runs(Path(base))
    snaps = []
    for _ in range(2):
        for argv in runs:
            code = main(argv)
            if code != 0:
                raise RuntimeError(f"tenkit {' '.join(argv)} exited with {code}")
        snaps.append(_snapshot(Path(base) / "runs"))
    first, second = snaps
    return {k: first.get(k) == second.get(k) for k in sorted(set(first) | set(second))}


if __name__ == "__main__":
    sys.exit(main())
