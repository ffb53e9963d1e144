import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tenkit.acceptance import well_conditioned_cp
from tenkit.core import DenseTensor, OpCounter, inner_product, matricize, outer
from tenkit.decomp import (
    CPModel,
    SymmetricCPModel,
    TTModel,
    cpd_als,
    cpd_fit_incremental,
    cpd_partial_symmetric,
    cpd_symmetric,
    factored_inner_rank1,
    hosvd,
    is_symmetric,
    load_model,
    multilinear_rank,
    normalize_cp,
    parameter_count,
    save_model,
    symmetrize,
    table1_count,
    tt_add,
    tt_hadamard,
    tt_inner,
    tt_round,
    tt_scale,
    tt_svd,
    tt_weighted_inner,
    ttr1_svd,
    tucker_truncate,
)

shapes = st.lists(st.integers(1, 5), min_size=2, max_size=4).map(tuple)


def _rand(shape, seed):
    return DenseTensor(np.random.default_rng(seed).standard_normal(shape))


def _rel(a, b):
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b))) / max(float(np.linalg.norm(b)), 1e-300)


# -- CP --------------------------------------------------------------------------


def test_cp_recovers_planted_model():
    planted = well_conditioned_cp((6, 5, 4), 3, 0)
    model, rep = cpd_als(planted.densify(), 3, max_iters=200)
    assert rep.residual < 1e-8
    assert rep.monotone
    np.testing.assert_allclose(np.sort(model.weights), np.sort(planted.weights), rtol=1e-6)


def test_cp_rank1_exact():
    t = outer([1.0, 2.0], [3.0, -1.0, 0.5], [2.0, 2.0]).densify()
    model, rep = cpd_als(t, 1)
    assert rep.residual < 1e-12
    np.testing.assert_allclose(model.weights[0], t.norm(), rtol=1e-12)


def test_cp_zero_tensor():
    model, rep = cpd_als(DenseTensor(np.zeros((2, 3, 2))), 2)
    assert rep.residual == 0.0 and np.all(model.weights == 0)


def test_cp_canonical_form():
    rng = np.random.default_rng(1)
    m = normalize_cp(rng.standard_normal(3), [rng.standard_normal((4, 3)) for _ in range(3)])
    assert np.all(m.weights >= 0) and np.all(np.diff(m.weights) <= 0)
    for f in m.factors:
        np.testing.assert_allclose(np.linalg.norm(f, axis=0), 1.0)


def test_cp_entries_and_term():
    rng = np.random.default_rng(2)
    m = CPModel(rng.standard_normal(2), tuple(rng.standard_normal((n, 2)) for n in (3, 4, 2)))
    full = m.full_array()
    assert math.isclose(m.entry((2, 3, 1)), full[1, 2, 0], rel_tol=1e-12)
    idx0 = np.array([[0, 0, 0], [2, 3, 1]])
    np.testing.assert_allclose(m.entries(idx0), full[tuple(idx0.T)])
    total = sum((m.term(i).densify() for i in range(2)), DenseTensor(np.zeros((3, 4, 2))))
    np.testing.assert_allclose(total.array, full, atol=1e-12)


def test_cp_incremental_stops_at_true_rank():
    t = well_conditioned_cp((5, 5, 5), 2, 3).densify()
    model, rep = cpd_fit_incremental(t, 1e-8, 5)
    assert model.rank == 2 and rep.target_met


def test_symmetric_cp_recovers_symmetric_tensor():
    rng = np.random.default_rng(4)
    v = np.linalg.qr(rng.standard_normal((4, 2)))[0]
    lam = np.array([2.0, -1.0])
    t = SymmetricCPModel(lam, v, 3).densify()
    assert is_symmetric(t)
    model, rep = cpd_symmetric(t, 2)
    assert rep.residual < 1e-8


def test_symmetric_cp_rejects_nonsymmetric():
    with pytest.raises(ValueError):
        cpd_symmetric(_rand((3, 3, 3), 0), 1)


def test_partial_symmetric_cp():
    rng = np.random.default_rng(5)
    v = np.linalg.qr(rng.standard_normal((3, 2)))[0]
    first = rng.standard_normal((4, 2))
    t = SymmetricCPModel(np.array([1.5, 0.7]), v, 3, first).densify()
    model, rep = cpd_partial_symmetric(t, 2)
    assert rep.residual < 1e-8
    assert model.first is not None


def test_symmetrize_averages_permutations():
    a = _rand((2, 3, 3), 6).array
    s = symmetrize(a, (1, 2))
    np.testing.assert_allclose(s, 0.5 * (a + a.transpose(0, 2, 1)))


# -- Tucker --------------------------------------------------------------------------


@given(shapes, st.integers(0, 2**31))
def test_hosvd_exact_and_all_orthogonal(shape, seed):
    a = _rand(shape, seed)
    t = hosvd(a)
    assert _rel(t.densify().array, a.array) < 1e-12
    core = t.core
    for k in range(1, a.order + 1):
        g = matricize(core, k)
        gram = g @ g.T
        off = gram - np.diag(np.diag(gram))
        assert np.max(np.abs(off)) <= 1e-10 * max(1.0, np.max(np.abs(gram)))
        norms = np.diag(gram)
        assert np.all(np.diff(norms) <= 1e-10 * max(1.0, norms.max()))


def test_tucker_truncation_of_low_multilinear_rank():
    rng = np.random.default_rng(7)
    core = DenseTensor(rng.standard_normal((2, 2, 2)))
    from tenkit.core import multi_mode_product

    a = multi_mode_product(core, [rng.standard_normal((5, 2)) for _ in range(3)])
    assert multilinear_rank(a) == (2, 2, 2)
    model, err = tucker_truncate(a, (2, 2, 2))
    assert err / a.norm() < 1e-12


# -- TT --------------------------------------------------------------------------


@given(shapes, st.integers(0, 2**31), st.sampled_from([1e-1, 1e-2, 1e-4, 1e-8]))
def test_tt_svd_respects_eps(shape, seed, eps):
    a = _rand(shape, seed)
    tt = tt_svd(a, eps)
    assert _rel(tt.full_array(), a.array) <= eps


def test_tt_rank1_tensor_has_unit_ranks():
    t = outer([1.0, 2.0, 3.0], [1.0, -1.0], [0.5, 2.0, 1.0, 4.0]).densify()
    assert tt_svd(t, 1e-8).ranks == (1, 1, 1, 1)


def test_tt_entry_matches_full_array():
    a = _rand((3, 4, 2), 8)
    tt = tt_svd(a)
    assert math.isclose(tt.entry((2, 3, 1)), a.get((2, 3, 1)), rel_tol=1e-10)


@given(st.integers(0, 2**31))
def test_tt_algebra_matches_dense(seed):
    a, b = _rand((3, 2, 4), seed), _rand((3, 2, 4), seed + 1)
    ta, tb = tt_svd(a), tt_svd(b)
    np.testing.assert_allclose(tt_add(ta, tb).full_array(), a.array + b.array, atol=1e-10)
    np.testing.assert_allclose(tt_hadamard(ta, tb).full_array(), a.array * b.array, atol=1e-10)
    np.testing.assert_allclose(tt_scale(ta, -2.0).full_array(), -2.0 * a.array, atol=1e-10)
    assert math.isclose(tt_inner(ta, tb), inner_product(a, b), rel_tol=1e-9, abs_tol=1e-9)
    w = [np.random.default_rng(seed).random(n) for n in a.shape]
    wfull = np.einsum("i,j,k->ijk", *w)
    assert math.isclose(tt_weighted_inner(ta, tb, w), float(np.sum(wfull * a.array * b.array)),
                        rel_tol=1e-9, abs_tol=1e-9)


def test_tt_round_compresses_sum():
    a = _rand((3, 3, 3, 3), 9)
    ta = tt_svd(a)
    doubled = tt_add(ta, ta)
    r = tt_round(doubled, 1e-12)
    assert r.ranks == ta.ranks
    assert _rel(r.full_array(), 2 * a.array) < 1e-10


def test_tt_inner_counter():
    a = tt_svd(_rand((2, 3, 2), 10))
    c = OpCounter()
    tt_inner(a, a, c)
    assert c.count > 0


# -- TTr1 --------------------------------------------------------------------------


@given(shapes, st.integers(0, 2**31))
def test_ttr1_parseval_and_reconstruction(shape, seed):
    a = _rand(shape, seed)
    t = ttr1_svd(a)
    na = a.norm()
    assert abs(float(np.sum(t.weights**2)) - na**2) <= 1e-10 * na**2
    assert _rel(t.densify().array, a.array) < 1e-10
    k = max(1, t.nterms // 2)
    err = float(np.linalg.norm(t.truncate(k).densify().array - a.array))
    assert math.isclose(err, t.truncation_error(k), rel_tol=1e-8, abs_tol=1e-10 * na)


def test_ttr1_terms_are_orthogonal():
    t = ttr1_svd(_rand((3, 3, 2), 11))
    terms = [outer(*[v[:, i] for v in t.vectors]).densify().data for i in range(t.nterms)]
    g = np.array(terms) @ np.array(terms).T
    np.testing.assert_allclose(g, np.eye(t.nterms), atol=1e-10)


# -- storage --------------------------------------------------------------------------


@given(st.integers(2, 6), st.integers(2, 5), st.integers(1, 4))
def test_table_counts_match_models(n, d, r):
    rng = np.random.default_rng(n * 100 + d * 10 + r)
    cp = CPModel(np.ones(r), tuple(rng.standard_normal((n, r)) for _ in range(d)))
    ranks = [1] + [r] * (d - 1) + [1]
    tt = TTModel(tuple(rng.standard_normal((ranks[k], n, ranks[k + 1])) for k in range(d)))
    assert parameter_count(cp) == table1_count("cp", n, d, r) == n * d * r
    assert parameter_count(tt) == table1_count("tt", n, d, r)


def test_table_count_examples():
    assert table1_count("cp", 10, 3, 2) == 60
    assert table1_count("tucker", 10, 3, 2) == 8 + 60
    assert table1_count("tt", 10, 4, 3) == 10 * 2 * 9 + 60


def test_factored_inner_rank1_matches_dense():
    rng = np.random.default_rng(12)
    m = CPModel(rng.standard_normal(3), tuple(rng.standard_normal((n, 3)) for n in (3, 4, 5)))
    w = outer(*[rng.standard_normal(n) for n in (3, 4, 5)], weight=0.5)
    assert math.isclose(factored_inner_rank1(m, w), inner_product(m.densify(), w.densify()), rel_tol=1e-10)


@pytest.mark.parametrize("kind", ["cp", "tucker", "tt", "ttr1", "sym"])
def test_model_save_load_round_trip(tmp_path, kind):
    a = _rand((3, 3, 3), 13)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        model = {
            "cp": lambda: cpd_als(a, 2)[0],
            "tucker": lambda: hosvd(a),
            "tt": lambda: tt_svd(a),
            "ttr1": lambda: ttr1_svd(a),
            "sym": lambda: SymmetricCPModel(np.array([1.0, 2.0]), np.eye(3, 2), 3),
        }[kind]()
    save_model(model, tmp_path / "m")
    first = {p.name: p.read_bytes() for p in (tmp_path / "m").iterdir()}
    back = load_model(tmp_path / "m")
    np.testing.assert_allclose(back.densify().array, model.densify().array)
    save_model(back, tmp_path / "m")
    assert {p.name: p.read_bytes() for p in (tmp_path / "m").iterdir()} == first
