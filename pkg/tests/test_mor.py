import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tenkit.acceptance import fd_jacobian, jacobian_error, mor_test_system
from tenkit.core import OpCounter
from tenkit.mor import (
    DivergenceError,
    FactoredTensor,
    PolynomialSystem,
    ReducedSystem,
    StepFailure,
    build_projection,
    complexity_bench,
    load_system,
    load_tensorized,
    random_factored_system,
    reduce,
    save_system,
    save_tensorized,
    simulate,
    tensorize,
)


@pytest.fixture(scope="module")
def small():
    sys = mor_test_system(n=4, m=2, seed=1)
    return sys, tensorize(sys, eps=1e-10)


def _orth(n, q, seed):
    return np.linalg.qr(np.random.default_rng(seed).standard_normal((n, q)))[0]


# -- tensorization -------------------------------------------------------------------


def test_squares_example_matches_dense_at_random_points():
    # B x (x) x = (x1^2, x2^2)
    b = np.array([[1.0, 0, 0, 0], [0, 0, 0, 1.0]])
    sys = PolynomialSystem(np.zeros((2, 2)), B=b)
    tsys = tensorize(sys, eps=1e-12)
    rng = np.random.default_rng(0)
    for x in rng.standard_normal((100, 2)):
        np.testing.assert_allclose(sys.rhs(x), x**2, atol=1e-14)
        np.testing.assert_allclose(tsys.rhs(x), x**2, atol=1e-10)
    assert tsys.ranks["B"] == 2


def test_zero_quadratic_gives_rank_one_zero_weight():
    sys = PolynomialSystem(-np.eye(3), B=np.zeros((3, 9)))
    tsys = tensorize(sys)
    assert tsys.ranks["B"] == 1
    assert np.all(tsys.Bt.weights == 0)
    np.testing.assert_array_equal(tsys.rhs(np.ones(3)), -np.ones(3))


def test_tensorize_fits_within_eps(small):
    sys, tsys = small
    assert all(e <= 1e-10 for e in tsys.fit_errors.values())
    np.testing.assert_allclose(tsys.to_dense().C, sys.C, atol=1e-9 * np.abs(sys.C).max())
    rng = np.random.default_rng(2)
    x, u = rng.standard_normal(4), rng.standard_normal(2)
    np.testing.assert_allclose(tsys.rhs(x, u), sys.rhs(x, u), rtol=1e-8, atol=1e-10)


def test_fixed_rank_tensorize():
    sys = mor_test_system(n=4, m=1, seed=3)
    tsys = tensorize(sys, ranks={"B": 2, "C": 3, "D": 1})
    assert tsys.ranks == {"B": 2, "C": 3, "D": 1}


def test_dimension_validation():
    with pytest.raises(ValueError):
        PolynomialSystem(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        PolynomialSystem(np.zeros((2, 2)), B=np.zeros((2, 3)))
    with pytest.raises(ValueError):
        PolynomialSystem(np.zeros((2, 2)), D=np.zeros((2, 3)))


# -- Jacobians ---------------------------------------------------------------------


@given(st.integers(0, 2**31))
@settings(max_examples=10)
def test_dense_jacobian_matches_finite_differences(seed):
    sys = mor_test_system(n=4, m=2, seed=seed % 1000)
    rng = np.random.default_rng(seed)
    assert jacobian_error(sys, rng.standard_normal(4), rng.standard_normal(2)) < 1e-7


@pytest.mark.parametrize("symmetric", [False, True])
def test_factored_jacobian_matches_finite_differences(symmetric):
    tsys = random_factored_system(6, 3, m=2, seed=4, symmetric=symmetric)
    rng = np.random.default_rng(5)
    for _ in range(5):
        assert jacobian_error(tsys, rng.standard_normal(6), rng.standard_normal(2)) < 1e-7


def test_reduced_jacobian_matches_finite_differences(small):
    _, tsys = small
    red = reduce(tsys, _orth(4, 2, 0))
    rng = np.random.default_rng(6)
    assert jacobian_error(red, rng.standard_normal(2), rng.standard_normal(2)) < 1e-7


def test_fd_helper_on_known_function():
    f = lambda x: np.array([x[0] * x[1], x[1] ** 2])
    np.testing.assert_allclose(fd_jacobian(f, np.array([2.0, 3.0])), [[3, 2], [0, 6]], atol=1e-8)


# -- reduction --------------------------------------------------------------------------


def test_identity_projection_keeps_factors(small):
    _, tsys = small
    red = reduce(tsys, np.eye(4))
    for a, b in zip(red.terms, tsys.terms):
        np.testing.assert_allclose(a.out, b.out, atol=1e-15)
        for fa, fb in zip(a.state, b.state):
            np.testing.assert_allclose(fa, fb, atol=1e-15)


def test_galerkin_consistency_at_many_points(small):
    _, tsys = small
    red = reduce(tsys, _orth(4, 3, 1))
    assert red.galerkin_check(points=100, seed=3) <= 1e-10


def test_reduced_dense_and_factored_agree():
    tsys = random_factored_system(10, 3, seed=0)
    red = reduce(tsys, _orth(10, 4, 2))
    dense = red.to_dense()
    rng = np.random.default_rng(0)
    x, u = rng.standard_normal(4), rng.standard_normal(1)
    np.testing.assert_allclose(red.rhs(x, u), dense.rhs(x, u), rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(red.lift(x), red.V @ x)


def test_non_orthonormal_basis_rejected(small):
    _, tsys = small
    with pytest.raises(ValueError):
        ReducedSystem(tsys, np.ones((4, 2)))


def test_storage_count_for_rank_20_quadratic():
    rng = np.random.default_rng(0)
    ft = FactoredTensor(np.ones(20), rng.standard_normal((10, 20)),
                        (rng.standard_normal((10, 20)), rng.standard_normal((10, 20))))
    # r weights plus three q x r factors
    assert ft.storage() == 620


# -- simulation --------------------------------------------------------------------------


def test_linear_decay_reaches_exp_minus_one():
    sys = PolynomialSystem([[-1.0]])
    tr = simulate(sys, [1.0], (0, 1), 0.01)
    assert abs(tr.x[-1, 0] - math.exp(-1)) < 1e-8
    assert tr.x.shape == (101, 1)


def test_cubic_decay_matches_closed_form():
    sys = PolynomialSystem([[0.0]], C=[[-1.0]])
    tr = simulate(sys, [1.0], (0, 1), 0.01)
    np.testing.assert_allclose(tr.x[:, 0], (1 + 2 * tr.t) ** -0.5, atol=1e-6)


def test_implicit_euler_converges_first_order():
    sys = PolynomialSystem([[-1.0]])
    errs = [abs(simulate(sys, [1.0], (0, 1), dt, "implicit_euler").x[-1, 0] - math.exp(-1))
            for dt in (0.02, 0.01)]
    assert 1.8 < errs[0] / errs[1] < 2.2


@pytest.mark.parametrize("integrator", ["rk4", "implicit_euler"])
def test_factored_and_dense_trajectories_agree(small, integrator):
    sys, tsys = small
    x0 = 0.1 * np.ones(4)
    u = lambda t: np.array([np.sin(t), np.cos(t)])
    a = simulate(sys, x0, (0, 1), 0.01, integrator, u)
    b = simulate(tsys, x0, (0, 1), 0.01, integrator, u)
    assert np.max(np.abs(a.x - b.x)) < 1e-8


def test_dissipative_energy_never_increases():
    n = 5
    ct = np.zeros((n, n, n, n))
    for i in range(n):
        ct[i, i, np.arange(n), np.arange(n)] = -1.0
    rng = np.random.default_rng(0)
    a = rng.standard_normal((n, n))
    sys = PolynomialSystem(-(a @ a.T) - np.eye(n), C=ct.reshape(n, -1, order="F"))
    for integ in ("rk4", "implicit_euler"):
        tr = simulate(sys, rng.standard_normal(n), (0, 2), 0.01, integ)
        energy = np.sum(tr.x**2, axis=1)
        assert np.all(np.diff(energy) <= 1e-14)


def test_horizon_must_be_whole_steps():
    with pytest.raises(ValueError):
        simulate(PolynomialSystem([[-1.0]]), [1.0], (0, 1), 0.3)
    with pytest.raises(ValueError):
        simulate(PolynomialSystem([[-1.0]]), [1.0], (0, 1), 0.1, "leapfrog")


class _SingularModel:
    # x' = x with dt = 1 makes the Newton matrix I - dt J vanish
    A = np.eye(1)
    m = 0

    def rhs(self, x, u=None):
        return x

    def jacobian(self, x, u=None):
        return np.eye(1)


def test_step_failure_on_singular_newton_matrix():
    with pytest.raises(StepFailure):
        simulate(_SingularModel(), [1.0], (0, 1), 1.0, "implicit_euler")


def test_divergence_error_on_blow_up():
    sys = PolynomialSystem([[0.0]], C=[[1.0]])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        with pytest.raises(DivergenceError):
            simulate(sys, [1.0], (0, 5), 0.1)


def test_pod_on_decoupled_system_warns_and_spans_active_states():
    # only the first two states move; the rest stay at zero
    a = np.diag([-1.0, -2.0, -3.0, -4.0])
    sys = PolynomialSystem(a)
    x0 = np.array([1.0, 1.0, 0.0, 0.0])
    with pytest.warns(UserWarning, match="snapshot rank"):
        v = build_projection(sys, 3, x0, (0, 1), 0.05)
    assert v.shape == (4, 2)
    np.testing.assert_allclose(v[2:], 0.0, atol=1e-12)
    np.testing.assert_allclose(v.T @ v, np.eye(2), atol=1e-12)


def test_reduced_model_tracks_full_model():
    sys = mor_test_system(n=6, m=1, seed=2)
    tsys = tensorize(sys, eps=1e-10)
    x0 = 0.1 * np.random.default_rng(0).standard_normal(6)
    u = lambda t: np.array([np.sin(2 * t)])
    v = build_projection(tsys, 6, x0, (0, 1), 0.01, u)
    red = reduce(tsys, v)
    full = simulate(tsys, x0, (0, 1), 0.01, u=u)
    rt = simulate(red, v.T @ x0, (0, 1), 0.01, u=u)
    # with q = n the projection is exact
    assert np.max(np.abs(red.lift(rt.x) - full.x)) < 1e-10


# -- complexity ---------------------------------------------------------------------


def test_op_counts_follow_table_scaling():
    res = complexity_bench(qs=(4, 8, 16), r=3)
    assert res["slope_factored_rhs"] < 1.5
    assert res["slope_dense_rhs"] > 3.5
    assert res["slope_factored_jac"] < res["slope_dense_jac"]


def test_dense_rhs_counts():
    sys = mor_test_system(n=3, m=1)
    c = OpCounter()
    sys.rhs(np.ones(3), np.ones(1), c)
    assert c.tags["linear"] == 9
    assert c.tags["nonlinear"] == 9 + 27 + 27 + 81


# -- persistence -------------------------------------------------------------------------


def test_system_round_trip(tmp_path):
    sys = mor_test_system(n=3, m=2)
    p = save_system(sys, tmp_path / "s")
    back = load_system(p)
    for k, v in sys.blocks().items():
        np.testing.assert_array_equal(back.blocks()[k], v)
    first = {f.name: f.read_bytes() for f in (tmp_path / "s").iterdir()}
    save_system(back, tmp_path / "s")
    assert first == {f.name: f.read_bytes() for f in (tmp_path / "s").iterdir()}


@pytest.mark.parametrize("symmetric", [False, True])
def test_tensorized_round_trip(tmp_path, symmetric):
    tsys = random_factored_system(5, 2, m=1, seed=1, symmetric=symmetric)
    p = save_tensorized(tsys, tmp_path / "t")
    back = load_tensorized(p)
    x, u = np.arange(5.0) / 5, np.ones(1)
    np.testing.assert_array_equal(back.rhs(x, u), tsys.rhs(x, u))
    assert back.ranks == tsys.ranks and back.symmetric == symmetric
    first = {f.name: f.read_bytes() for f in (tmp_path / "t").iterdir()}
    save_tensorized(back, tmp_path / "t")
    assert first == {f.name: f.read_bytes() for f in (tmp_path / "t").iterdir()}
