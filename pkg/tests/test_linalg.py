"""Tests for percolab.linalg - exact elimination, determinants, Smith form."""
# ruff: noqa: D101, D102

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from scipy import sparse

from percolab.errors import TopologyError
from percolab.linalg import bareiss_determinant, smith_normal_form, solve_sparse_exact


def _matmul(a, b):
    return [[sum(x * y for x, y in zip(row, col)) for col in zip(*b)] for row in a]


class TestSolveSparseExact:

    def test_two_by_two(self):
        x = solve_sparse_exact(sparse.csr_matrix([[2, 1], [1, 3]]), [3, 5])
        assert x == [Fraction(4, 5), Fraction(7, 5)]

    def test_zero_pivot_swaps_rows(self):
        assert solve_sparse_exact(np.array([[0, 1], [1, 0]]), [2, 3]) == [3, 2]

    def test_rational_rhs(self):
        x = solve_sparse_exact(np.eye(2, dtype=int) * 3, [Fraction(1, 2), 1])
        assert x == [Fraction(1, 6), Fraction(1, 3)]

    def test_singular(self):
        with pytest.raises(TopologyError):
            solve_sparse_exact(np.array([[1, 1], [1, 1]]), [1, 1])

    def test_path_laplacian(self):
        # Dirichlet path 0 - 1 - 2 - 3 - 4 with ends fixed at 0 and 4
        lap = np.array([[2, -1, 0], [-1, 2, -1], [0, -1, 2]])
        assert solve_sparse_exact(lap, [0, 0, 4]) == [1, 2, 3]


class TestBareiss:

    @pytest.mark.parametrize(
        ("matrix", "det"),
        [
            ([[2, 1], [1, 3]], 5),
            ([[0, 1], [1, 0]], -1),
            ([[1, 2], [2, 4]], 0),
            ([[4, -1, -1], [-1, 4, -1], [-1, -1, 4]], 50),
            ([], 1),
        ],
    )
    def test_known(self, matrix, det):
        assert bareiss_determinant(matrix) == det

    def test_matches_float_determinant(self):
        rng = np.random.default_rng(3)
        m = rng.integers(-5, 6, size=(6, 6))
        assert bareiss_determinant(m) == round(np.linalg.det(m))


class TestSmithNormalForm:

    def test_textbook_example(self):
        a = [[2, 4, 4], [-6, 6, 12], [10, -4, -16]]
        snf = smith_normal_form(a)
        assert snf.diagonal == (2, 6, 12)
        assert snf.invariant_factors == (2, 6, 12)
        assert snf.rank == 3

    def test_transforms(self):
        a = [[2, 4, 4], [-6, 6, 12], [10, -4, -16]]
        snf = smith_normal_form(a)
        product = _matmul(_matmul(snf.left, a), snf.right)
        assert product == [[2, 0, 0], [0, 6, 0], [0, 0, 12]]
        assert abs(bareiss_determinant(snf.left)) == 1
        assert abs(bareiss_determinant(snf.right)) == 1

    def test_divisibility_chain(self):
        a = [[4, 0], [0, 6]]
        snf = smith_normal_form(a)
        assert snf.diagonal == (2, 12)
        assert _matmul(_matmul(snf.left, a), snf.right) == [[2, 0], [0, 12]]

    def test_rank_deficient(self):
        snf = smith_normal_form([[1, 2], [2, 4]])
        assert snf.diagonal == (1, 0)
        assert snf.rank == 1
        assert snf.invariant_factors == ()

    def test_order_is_determinant(self):
        lap = [[4, -1, -1, 0], [-1, 4, 0, -1], [-1, 0, 4, -1], [0, -1, -1, 4]]
        snf = smith_normal_form(lap)
        order = 1
        for d in snf.diagonal:
            order *= d
        assert order == bareiss_determinant(lap) == 192
