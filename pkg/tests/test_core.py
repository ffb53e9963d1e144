import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tenkit.core import (
    DenseTensor,
    DimensionError,
    OpCounter,
    fold,
    inner_product,
    kronecker_power,
    linear_index,
    matricize,
    mode_k_product,
    multi_index,
    multi_mode_product,
    outer,
    vectorize,
)
from tenkit.io import FormatError, read_tensor, tensor_from_bytes, tensor_to_bytes, write_tensor

shapes = st.lists(st.integers(1, 4), min_size=1, max_size=4).map(tuple)


def _tensor(shape, seed):
    return DenseTensor(np.random.default_rng(seed).standard_normal(shape))


def test_linear_index_first_index_fastest():
    # 1-based multi-index in, 0-based flat position out
    assert linear_index((1, 1, 1), (3, 4, 2)) == 0
    assert linear_index((2, 1, 1), (3, 4, 2)) == 1
    assert linear_index((1, 2, 1), (3, 4, 2)) == 3
    assert linear_index((3, 4, 2), (3, 4, 2)) == 23
    assert multi_index(3, (3, 4, 2)) == (1, 2, 1)


def test_flat_constructor_uses_first_index_fastest():
    a = DenseTensor(np.arange(1, 25), (3, 4, 2))
    assert a.get((2, 1, 1)) == 2
    assert a.get((1, 2, 1)) == 4
    assert a.get((1, 1, 2)) == 13


def test_mode2_unfolding_of_reference_tensor():
    a = DenseTensor(np.arange(1, 25), (3, 4, 2))
    m2 = matricize(a, 2)
    assert m2.shape == (4, 6)
    assert list(m2[0]) == [1, 2, 3, 13, 14, 15]


def test_out_of_range_mode_and_index():
    a = DenseTensor(np.zeros((2, 2)))
    with pytest.raises(DimensionError):
        matricize(a, 3)
    with pytest.raises(DimensionError):
        linear_index((3, 1), (2, 2))


def test_nonfinite_entries_rejected():
    with pytest.raises(ValueError):
        DenseTensor([1.0, np.nan])


@given(shapes, st.integers(0, 2**31))
def test_fold_inverts_matricize(shape, seed):
    a = _tensor(shape, seed)
    for n in range(1, len(shape) + 1):
        assert fold(matricize(a, n), n, shape) == a


@given(shapes, st.integers(0, 2**31))
def test_mode_product_equals_unfolding_product(shape, seed):
    a = _tensor(shape, seed)
    rng = np.random.default_rng(seed + 1)
    for k in range(1, len(shape) + 1):
        u = rng.standard_normal((3, shape[k - 1]))
        b = mode_k_product(a, k, u)
        np.testing.assert_allclose(matricize(b, k), u @ matricize(a, k), atol=1e-12)


@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**31))
def test_vec_of_outer_product_is_kron(n1, n2, seed):
    rng = np.random.default_rng(seed)
    u, v = rng.standard_normal(n1), rng.standard_normal(n2)
    np.testing.assert_allclose(vectorize(outer(u, v).densify()), np.kron(v, u), atol=1e-14)


@given(shapes, st.integers(0, 2**31))
def test_rank1_inner_product_matches_dense(shape, seed):
    rng = np.random.default_rng(seed)
    a = _tensor(shape, seed)
    w = outer(*[rng.standard_normal(n) for n in shape], weight=1.5)
    assert math.isclose(inner_product(w, a), inner_product(w.densify(), a), rel_tol=1e-10, abs_tol=1e-10)


def test_multi_mode_product_skips_none():
    a = _tensor((2, 3), 0)
    u = np.eye(3)
    assert multi_mode_product(a, [None, u]) == a


def test_kronecker_power():
    x = np.array([1.0, 2.0])
    np.testing.assert_array_equal(kronecker_power(x, 3), np.kron(np.kron(x, x), x))
    with pytest.raises(ValueError):
        kronecker_power(x, 0)


def test_op_counter_tags():
    c = OpCounter()
    c.add(5, "linear")
    c.matvec(2, 3, "nonlinear")
    c.add(1)
    assert c.count == 12 and c.tags == {"linear": 5, "nonlinear": 6}
    assert c.reset() == 12 and c.count == 0 and c.tags == {}


@given(shapes, st.integers(0, 2**31))
def test_ten_bytes_round_trip(shape, seed):
    a = _tensor(shape, seed)
    buf = tensor_to_bytes(a)
    b = tensor_from_bytes(buf)
    assert b == a
    assert tensor_to_bytes(b) == buf


def test_json_and_ten_files_round_trip(tmp_path):
    a = _tensor((2, 3, 2), 4)
    for name in ("a.ten", "a.json"):
        write_tensor(tmp_path / name, a)
        first = (tmp_path / name).read_bytes()
        b = read_tensor(tmp_path / name)
        assert b == a
        write_tensor(tmp_path / name, b)
        assert (tmp_path / name).read_bytes() == first


def test_bad_magic_and_truncation():
    with pytest.raises(FormatError):
        tensor_from_bytes(b"NOTATENSOR000000")
    buf = tensor_to_bytes(_tensor((2, 2), 1))
    with pytest.raises(FormatError):
        tensor_from_bytes(buf[:-8])
