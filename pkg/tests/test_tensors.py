import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import toma
from toma import DataError, TokenMatrix
from toma.tensors import is_deterministic, matmul


def test_token_matrix_basic():
    x = TokenMatrix(np.zeros((4, 3), dtype=np.float32), grid=(2, 2))
    assert x.n == 4 and x.d == 3
    assert x.data.flags.c_contiguous


def test_token_matrix_rejects_bad_input():
    with pytest.raises(DataError):
        TokenMatrix(np.zeros((2, 2, 2), dtype=np.float32))
    with pytest.raises(DataError):
        TokenMatrix(np.array([[np.nan, 0.0]], dtype=np.float32))
    with pytest.raises(DataError):
        TokenMatrix(np.zeros((4, 3), dtype=np.float32), grid=(3, 2))


def test_l2_normalize_rows_examples():
    out = toma.l2_normalize_rows(TokenMatrix(np.array([[3.0, 4.0]], dtype=np.float32)))
    assert np.allclose(out.data, [[0.6, 0.8]])
    # zero rows stay zero instead of dividing by ~0
    out = toma.l2_normalize_rows(TokenMatrix(np.zeros((1, 2), dtype=np.float32)))
    assert np.array_equal(out.data, [[0.0, 0.0]])
    out = toma.l2_normalize_rows(TokenMatrix(np.array([[2.0, 0.0, 0.0]], dtype=np.float32)))
    assert np.allclose(out.data, [[1.0, 0.0, 0.0]])


def test_l2_normalize_rejects_bad_eps():
    with pytest.raises(DataError):
        toma.l2_normalize_rows(TokenMatrix(np.ones((2, 2), dtype=np.float32)), eps=0.0)


def test_cosine_similarity_examples():
    x = TokenMatrix(np.array([[1, 2], [1, 2], [2, -1], [-1, -2]], dtype=np.float32))
    s = toma.cosine_similarity(x)
    assert s.data[0, 1] == pytest.approx(1.0)
    assert s.data[0, 2] == pytest.approx(0.0, abs=1e-7)
    assert s.data[0, 3] == pytest.approx(-1.0)
    assert np.array_equal(s.data, s.data.T)


def test_similarity_matrix_validation():
    with pytest.raises(DataError):
        toma.SimilarityMatrix(np.array([[1.0, 0.5], [0.0, 1.0]], dtype=np.float32))
    with pytest.raises(DataError):
        toma.SimilarityMatrix(np.array([[1.0, 2.0], [2.0, 1.0]], dtype=np.float32))


def test_softmax_columns_examples():
    out = toma.softmax_columns(np.array([[0.0], [0.0]]))
    assert np.allclose(out, [[0.5], [0.5]])
    out = toma.softmax_columns(np.array([[1000.0], [1000.0]]))
    assert np.allclose(out, [[0.5], [0.5]])
    out = toma.softmax_columns(np.array([[np.log(2.0)], [0.0]]))
    assert np.allclose(out, [[2 / 3], [1 / 3]])


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (5, 3), elements=st.floats(-30, 30)))
def test_softmax_columns_properties(logits):
    out = toma.softmax_columns(logits)
    assert np.allclose(out.sum(axis=0), 1.0)
    assert (out >= 0).all()
    # per-column shift invariance
    shifted = toma.softmax_columns(logits + np.array([1.0, -5.0, 100.0]))
    assert np.allclose(out, shifted)


def test_sdpa_attention_matrix_recovered_with_identity_values():
    rng = np.random.default_rng(0)
    q = TokenMatrix(rng.standard_normal((3, 4)).astype(np.float32))
    k = TokenMatrix(rng.standard_normal((5, 4)).astype(np.float32))
    v = TokenMatrix(np.eye(5, dtype=np.float32))
    out = toma.sdpa(q, k, v, tau=1.0, scale_by_sqrt_d=False, softmax_axis="rows")
    assert np.allclose(out.data.sum(axis=1), 1.0, atol=1e-6)
    assert (out.data >= 0).all()


def test_sdpa_sharp_limit_matches_argmax():
    rng = np.random.default_rng(1)
    q = TokenMatrix(rng.standard_normal((4, 8)).astype(np.float32))
    k = TokenMatrix(rng.standard_normal((6, 8)).astype(np.float32))
    v = TokenMatrix(rng.standard_normal((6, 8)).astype(np.float32))
    out = toma.sdpa(q, k, v, tau=1e-3, scale_by_sqrt_d=False, softmax_axis="rows")
    logits = q.data.astype(np.float64) @ k.data.T.astype(np.float64)
    picks = logits.argmax(axis=1)
    assert np.allclose(out.data, v.data[picks], atol=1e-4)


def test_sdpa_validation():
    q = TokenMatrix(np.zeros((2, 3), dtype=np.float32))
    k = TokenMatrix(np.zeros((2, 4), dtype=np.float32))
    with pytest.raises(DataError):
        toma.sdpa(q, k, k, tau=1.0)
    with pytest.raises(DataError):
        toma.sdpa(q, q, q, tau=0.0)
    with pytest.raises(DataError):
        toma.sdpa(q, q, q, tau=1.0, softmax_axis="diagonal")


def test_deterministic_mode_scopes_and_matches():
    a = np.random.default_rng(2).standard_normal((16, 8)).astype(np.float32)
    b = np.random.default_rng(3).standard_normal((8, 16)).astype(np.float32)
    assert not is_deterministic()
    with toma.deterministic_mode():
        assert is_deterministic()
        first = matmul(a, b)
        second = matmul(a, b)
    assert not is_deterministic()
    assert np.array_equal(first, second)
    assert np.allclose(first, matmul(a, b), atol=1e-10)
    assert first.dtype == np.float64
