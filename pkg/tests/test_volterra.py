import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tenkit.core import DimensionError
from tenkit.decomp import CPModel
from tenkit.volterra import (
    TRADEOFF_COLUMNS,
    FactoredKernel3,
    VolterraKernel3,
    direct_convolve,
    direct_response,
    factored_response,
    factorize_kernel,
    fft_convolve,
    load_kernel,
    lowpass_kernel,
    save_kernel,
    tradeoff_report,
)


def _loop_response(h, u):
    # reference triple sum straight from the definition, 1-based lags
    m = h.shape[0]
    y = np.zeros(u.size)
    for k in range(1, u.size + 1):
        for a in range(1, m + 1):
            for b in range(1, m + 1):
                for c in range(1, m + 1):
                    if k - a >= 1 and k - b >= 1 and k - c >= 1:
                        y[k - 1] += h[a - 1, b - 1, c - 1] * u[k - a - 1] * u[k - b - 1] * u[k - c - 1]
    return y


def test_direct_matches_definition():
    rng = np.random.default_rng(0)
    h = rng.standard_normal((3, 3, 3))
    u = rng.standard_normal(9)
    np.testing.assert_allclose(direct_response(VolterraKernel3(h), u), _loop_response(h, u), atol=1e-12)


def test_impulse_kernel_delays_cube():
    h = np.zeros((4, 4, 4))
    h[1, 1, 1] = 1.0  # lag 2 in every mode
    u = np.arange(1.0, 8.0)
    y = direct_response(VolterraKernel3(h), u)
    np.testing.assert_allclose(y, np.concatenate([[0, 0], u[:-2] ** 3]))


def test_rank_one_impulse_input_gives_cubed_factor():
    a = np.array([0.5, -1.0, 2.0, 0.25])
    h = np.einsum("i,j,k->ijk", a, a, a)
    u = np.zeros(6)
    u[0] = 1.0
    y = direct_response(VolterraKernel3(h), u)
    # y[k] = a[k-1]^3 for k = 2..M+1
    np.testing.assert_allclose(y[1:5], a**3)
    assert y[0] == 0 and y[5] == 0
    fk = FactoredKernel3(CPModel(np.ones(1), (a[:, None], a[:, None], a[:, None])), 0.0)
    np.testing.assert_allclose(factored_response(fk, u), y, atol=1e-14)


def test_constant_input_settles_to_kernel_sum():
    k = lowpass_kernel(6)
    y = direct_response(k, np.full(15, 2.0))
    np.testing.assert_allclose(y[6:], 8.0 * k.h3.sum(), rtol=1e-13)


def test_zero_input_gives_zero():
    assert np.all(direct_response(lowpass_kernel(5), np.zeros(10)) == 0)


@given(st.integers(1, 12), st.integers(1, 40), st.integers(0, 2**31))
def test_fft_convolution_matches_direct_sum(m, k, seed):
    rng = np.random.default_rng(seed)
    a, u = rng.standard_normal(m), rng.standard_normal(k)
    ref = direct_convolve(a, u)
    np.testing.assert_allclose(fft_convolve(a, u), ref, atol=1e-10 * max(1.0, np.abs(ref).max()))
    np.testing.assert_allclose(direct_convolve(a, u), np.convolve(a, u), atol=1e-12)


@given(st.floats(-3, 3), st.integers(0, 2**31))
@settings(max_examples=20)
def test_cubic_homogeneity(c, seed):
    k = lowpass_kernel(4)
    u = np.random.default_rng(seed).standard_normal(12)
    np.testing.assert_allclose(direct_response(k, c * u), c**3 * direct_response(k, u), atol=1e-10)


@given(st.integers(1, 5), st.integers(0, 2**31))
@settings(max_examples=20)
def test_time_shift_invariance(s, seed):
    k = lowpass_kernel(4)
    u = np.random.default_rng(seed).standard_normal(15)
    y = direct_response(k, u)
    ys = direct_response(k, np.concatenate([np.zeros(s), u]))
    np.testing.assert_allclose(ys[s:], y, atol=1e-12)
    assert np.all(ys[:s] == 0)


@pytest.mark.parametrize("m", [2, 3, 4])
def test_full_rank_factorization_is_exact(m):
    k = VolterraKernel3(np.random.default_rng(m).standard_normal((m, m, m)))
    fk = factorize_kernel(k, m * m)
    assert fk.fit_error < 1e-12
    u = np.random.default_rng(1).standard_normal(20)
    np.testing.assert_allclose(factored_response(fk, u), direct_response(k, u), atol=1e-10)


def test_factorize_methods_and_validation():
    k = lowpass_kernel(5)
    for method in ("als", "ttr1", "auto"):
        fk = factorize_kernel(k, 3, method)
        assert fk.rank <= 3 and 0 <= fk.fit_error < 1
    auto = factorize_kernel(k, 3, "auto")
    assert auto.fit_error <= min(factorize_kernel(k, 3, m).fit_error for m in ("als", "ttr1")) + 1e-12
    with pytest.raises(ValueError):
        factorize_kernel(k, 0)
    with pytest.raises(ValueError):
        factorize_kernel(k, 2, "svd")


def test_kernel_validation():
    with pytest.raises(DimensionError):
        VolterraKernel3(np.zeros((2, 3, 2)))
    with pytest.raises(ValueError):
        VolterraKernel3(np.full((2, 2, 2), np.nan))
    with pytest.raises(ValueError):
        direct_response(lowpass_kernel(2), [])


def test_tradeoff_errors_shrink_with_rank():
    k = lowpass_kernel(8)
    u = np.random.default_rng(0).standard_normal(40)
    rows = tradeoff_report(k, u, [1, 4, 64], repeats=5)
    assert [r["rank"] for r in rows] == [1, 4, 64]
    errs = [r["kernel_fit_error"] for r in rows]
    assert errs[0] > errs[1] > errs[2] and errs[2] < 1e-12
    assert rows[2]["response_rel_error"] < 1e-12
    assert set(TRADEOFF_COLUMNS) <= set(rows[0])


def test_kernel_round_trip(tmp_path):
    k = VolterraKernel3(lowpass_kernel(4).h3, dt=0.5)
    save_kernel(k, tmp_path / "k.ten")
    back = load_kernel(tmp_path / "k.ten")
    np.testing.assert_array_equal(back.h3, k.h3)
    assert back.dt == 0.5
    first = (tmp_path / "k.ten").read_bytes()
    save_kernel(back, tmp_path / "k.ten")
    assert (tmp_path / "k.ten").read_bytes() == first
