import numpy as np
import pytest

from core.errors import DimensionError, NonFiniteError
from core.matrix import (
    DiagonalVector,
    UnitUpperTriangular,
    as_matrix,
    as_vector,
    cholesky_factor,
    is_diagonal,
    mat_mul,
    reconstruct,
)


def test_from_dense_keeps_only_strict_upper():
    a = np.arange(16, dtype=float).reshape(4, 4)
    u = UnitUpperTriangular.from_dense(a)
    dense = u.to_dense()
    assert np.array_equal(np.diag(dense), np.ones(4))
    assert np.array_equal(np.tril(dense, -1), np.zeros((4, 4)))
    assert np.array_equal(np.triu(dense, 1), np.triu(a, 1))


@pytest.mark.parametrize("n", [1, 2, 5, 8])
def test_packed_indexing_matches_dense(rng, n):
    u = UnitUpperTriangular.from_dense(rng.standard_normal((n, n)))
    dense = u.to_dense()
    for i in range(n):
        for j in range(n):
            assert u[i, j] == dense[i, j]


def test_index_out_of_range():
    with pytest.raises(IndexError):
        UnitUpperTriangular.identity(3)[3, 0]


def test_packed_size_is_checked():
    with pytest.raises(DimensionError):
        UnitUpperTriangular(3, np.zeros(2))


def test_factor_arrays_are_read_only():
    u = UnitUpperTriangular.identity(3)
    d = DiagonalVector([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        u.packed[0] = 1.0
    with pytest.raises(ValueError):
        d.values[0] = 0.0


def test_to_dense_returns_writable_copy():
    u = UnitUpperTriangular.identity(2)
    dense = u.to_dense()
    dense[0, 1] = 5.0
    assert u[0, 1] == 0.0


def test_diagonal_vector():
    d = DiagonalVector([1.0, -2.0, 3.0, -4.0])
    assert d.dim == 4
    assert d.first_negative() == 1
    assert DiagonalVector([0.0, 1.0]).first_negative() is None
    assert np.array_equal(d.as_matrix(), np.diag([1.0, -2.0, 3.0, -4.0]))
    with pytest.raises(NonFiniteError):
        DiagonalVector([1.0, np.nan])


def test_mat_mul_names_both_shapes():
    with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 3\)"):
        mat_mul(np.ones((2, 3)), np.ones((2, 3)))
    assert np.array_equal(mat_mul(np.eye(2), [[1.0], [2.0]]), [[1.0], [2.0]])


def test_mat_mul_is_associative(rng):
    a, b, c = rng.standard_normal((3, 4)), rng.standard_normal((4, 2)), rng.standard_normal((2, 5))
    left = mat_mul(mat_mul(a, b), c)
    right = mat_mul(a, mat_mul(b, c))
    assert left.shape == (3, 5)
    np.testing.assert_allclose(left, right, rtol=1e-12, atol=1e-12)


def test_reconstruct_is_exactly_symmetric(rng):
    u = UnitUpperTriangular.from_dense(rng.standard_normal((7, 7)))
    d = DiagonalVector(rng.uniform(0.1, 2.0, 7))
    p = reconstruct(u, d)
    assert np.array_equal(p, p.T)
    ud = u.to_dense()
    np.testing.assert_allclose(p, ud @ np.diag(d.values) @ ud.T, rtol=1e-13, atol=1e-13)


def test_reconstruct_rejects_mismatch():
    with pytest.raises(DimensionError):
        reconstruct(UnitUpperTriangular.identity(2), DiagonalVector([1.0, 1.0, 1.0]))


def test_cholesky_factor(rng):
    u = UnitUpperTriangular.from_dense(rng.standard_normal((5, 5)))
    d = DiagonalVector(rng.uniform(0.0, 3.0, 5))
    s = cholesky_factor(u, d)
    np.testing.assert_allclose(s @ s.T, reconstruct(u, d), rtol=1e-12, atol=1e-12)
    with pytest.raises(NonFiniteError):
        cholesky_factor(u, DiagonalVector([1.0, 1.0, -1.0, 1.0, 1.0]))


def test_as_matrix_validation():
    assert as_matrix(2.0).shape == (1, 1)
    with pytest.raises(NonFiniteError):
        as_matrix([[1.0, np.inf]])
    with pytest.raises(DimensionError):
        as_matrix(np.ones((2, 2, 2)))
    with pytest.raises(DimensionError):
        as_matrix(np.zeros((0, 3)))
    with pytest.raises(DimensionError):
        as_vector([[1.0, 2.0], [3.0, 4.0]])


def test_is_diagonal():
    assert is_diagonal(np.diag([1.0, 2.0]))
    assert is_diagonal(np.array([[1.0, 1e-15], [1e-15, 1.0]]))
    assert not is_diagonal(np.array([[1.0, 0.1], [0.1, 1.0]]))
    assert is_diagonal(np.zeros((2, 2)))
