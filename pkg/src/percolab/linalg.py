"""Exact integer and rational linear algebra.

Public API
----------
- :func:`solve_sparse_exact` - sparse Gaussian elimination over the rationals.
- :func:`bareiss_determinant` - fraction-free integer determinant.
- :func:`smith_normal_form` - invariant factors with unimodular transforms.
- :class:`SmithForm`
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

import numpy as np
from scipy import sparse

from .errors import TopologyError

logger = logging.getLogger(__name__)

__all__ = [
    "SmithForm",
    "bareiss_determinant",
    "smith_normal_form",
    "solve_sparse_exact",
]

IntMatrix = list[list[int]]

# ---------------------------------------------------------------------------
# Sparse rational elimination
# ---------------------------------------------------------------------------


def solve_sparse_exact(matrix: Any, rhs: Sequence[Any]) -> list[Fraction]:
    """Solve ``matrix @ x = rhs`` exactly over the rationals.

    Elimination runs in the given order, which is pivot-free for the
    positive definite systems the solvers build; a zero pivot falls back
    to the first lower row with a nonzero entry in that column.

    Parameters
    ----------
    matrix:
        Square scipy sparse matrix or dense array with rational-convertible entries.
    rhs:
        Right-hand side of matching length.

    Raises
    ------
    TopologyError
        If the matrix is singular.
    """
    coo = sparse.coo_matrix(matrix)
    n = coo.shape[0]
    rows: list[dict[int, Fraction]] = [{} for _ in range(n)]
    cols: list[set[int]] = [set() for _ in range(n)]
    for i, j, v in zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist(), strict=True):
        value = rows[i].get(j, Fraction(0)) + Fraction(v)
        if value:
            rows[i][j] = value
            cols[j].add(i)
        else:
            rows[i].pop(j, None)
            cols[j].discard(i)
    b = [Fraction(v) for v in rhs]

    for k in range(n):
        if not rows[k].get(k):
            below = sorted(r for r in cols[k] if r > k)
            if not below:
                raise TopologyError(f"singular system: no pivot in column {k}")
            _swap_rows(rows, cols, b, k, below[0])
        pivot_row = rows[k]
        pivot = pivot_row[k]
        for r in sorted(cols[k]):
            if r <= k:
                continue
            target = rows[r]
            factor = target[k] / pivot
            for j, v in pivot_row.items():
                value = target.get(j, Fraction(0)) - factor * v
                if value:
                    target[j] = value
                    cols[j].add(r)
                else:
                    target.pop(j, None)
                    cols[j].discard(r)
            b[r] -= factor * b[k]

    x = [Fraction(0)] * n
    for k in range(n - 1, -1, -1):
        acc = b[k] - sum((v * x[j] for j, v in rows[k].items() if j > k), Fraction(0))
        x[k] = acc / rows[k][k]
    logger.debug("exact elimination on %d unknowns", n)
    return x


def _swap_rows(
    rows: list[dict[int, Fraction]], cols: list[set[int]], b: list[Fraction], k: int, r: int
) -> None:
    for j in rows[k]:
        cols[j].discard(k)
    for j in rows[r]:
        cols[j].discard(r)
    rows[k], rows[r] = rows[r], rows[k]
    b[k], b[r] = b[r], b[k]
    for j in rows[k]:
        cols[j].add(k)
    for j in rows[r]:
        cols[j].add(r)


# ---------------------------------------------------------------------------
# Determinant
# ---------------------------------------------------------------------------


def bareiss_determinant(matrix: Any) -> int:
    """Determinant of an integer matrix by fraction-free Bareiss elimination."""
    a = [[int(v) for v in row] for row in np.asarray(matrix).tolist()]
    n = len(a)
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((r for r in range(k + 1, n) if a[r][k] != 0), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


# ---------------------------------------------------------------------------
# Smith normal form
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SmithForm:
    """``left @ A @ right = diag(diagonal)`` with unimodular *left* and *right*.

    The diagonal is nonnegative and each entry divides the next, zeros last.
    """

    diagonal: tuple[int, ...]
    left: IntMatrix
    right: IntMatrix

    @property
    def invariant_factors(self) -> tuple[int, ...]:
        """Diagonal entries larger than one."""
        return tuple(d for d in self.diagonal if d > 1)

    @property
    def rank(self) -> int:
        """Number of nonzero diagonal entries."""
        return sum(1 for d in self.diagonal if d)


def _identity(n: int) -> IntMatrix:
    return [[int(i == j) for j in range(n)] for i in range(n)]


def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    """Return ``(g, s, t)`` with ``s*a + t*b = g = gcd(a, b)``."""
    s0, s1, t0, t1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        s0, s1 = s1, s0 - q * s1
        t0, t1 = t1, t0 - q * t1
    return a, s0, t0


class _Reducer:
    """Row and column operations on ``a`` mirrored into ``u`` and ``vt``.

    ``vt`` holds the transpose of the right transform, so column operations
    become row operations on it.
    """

    def __init__(self, a: IntMatrix) -> None:
        self.a = a
        self.m = len(a)
        self.n = len(a[0]) if a else 0
        self.u = _identity(self.m)
        self.vt = _identity(self.n)

    def swap_rows(self, i: int, j: int) -> None:
        if i != j:
            self.a[i], self.a[j] = self.a[j], self.a[i]
            self.u[i], self.u[j] = self.u[j], self.u[i]

    def swap_cols(self, i: int, j: int) -> None:
        if i != j:
            for row in self.a:
                row[i], row[j] = row[j], row[i]
            self.vt[i], self.vt[j] = self.vt[j], self.vt[i]

    def add_row(self, target: int, source: int, q: int) -> None:
        """``row[target] -= q * row[source]``."""
        for mat in (self.a, self.u):
            src, dst = mat[source], mat[target]
            for c, v in enumerate(src):
                if v:
                    dst[c] -= q * v

    def add_col(self, target: int, source: int, q: int) -> None:
        """``col[target] -= q * col[source]``."""
        for row in self.a:
            if row[source]:
                row[target] -= q * row[source]
        src, dst = self.vt[source], self.vt[target]
        for c, v in enumerate(src):
            if v:
                dst[c] -= q * v

    def place_pivot(self, t: int) -> bool:
        best: tuple[int, int, int] | None = None
        for i in range(t, self.m):
            row = self.a[i]
            for j in range(t, self.n):
                if row[j] and (best is None or abs(row[j]) < best[0]):
                    best = (abs(row[j]), i, j)
                    if best[0] == 1:
                        break
            if best is not None and best[0] == 1:
                break
        if best is None:
            return False
        self.swap_rows(t, best[1])
        self.swap_cols(t, best[2])
        return True

    def clear(self, t: int) -> None:
        a = self.a
        while True:
            pivot = abs(a[t][t])
            for i in range(t + 1, self.m):
                if a[i][t] and abs(a[i][t]) < pivot:
                    self.swap_rows(t, i)
                    pivot = abs(a[t][t])
            for j in range(t + 1, self.n):
                if a[t][j] and abs(a[t][j]) < pivot:
                    self.swap_cols(t, j)
                    pivot = abs(a[t][t])
            done = True
            for i in range(t + 1, self.m):
                if a[i][t]:
                    self.add_row(i, t, a[i][t] // a[t][t])
                    done = done and not a[i][t]
            for j in range(t + 1, self.n):
                if a[t][j]:
                    self.add_col(j, t, a[t][j] // a[t][t])
                    done = done and not a[t][j]
            if done and not any(a[i][t] for i in range(t + 1, self.m)):
                return

    def combine(self, i: int, j: int) -> None:
        """Replace ``(d_i, d_j)`` by ``(gcd, lcm)`` with a unimodular 2x2 transform."""
        a_, b_ = self.a[i][i], self.a[j][j]
        g, s, t = _xgcd(a_, b_)
        bg, ag = b_ // g, a_ // g
        ui, uj = self.u[i], self.u[j]
        self.u[i] = [s * x + t * y for x, y in zip(ui, uj, strict=True)]
        self.u[j] = [-bg * x + ag * y for x, y in zip(ui, uj, strict=True)]
        vi, vj = self.vt[i], self.vt[j]
        self.vt[i] = [x + y for x, y in zip(vi, vj, strict=True)]
        self.vt[j] = [-t * bg * x + s * ag * y for x, y in zip(vi, vj, strict=True)]
        self.a[i][i], self.a[j][j] = g, a_ * bg


def smith_normal_form(matrix: Any) -> SmithForm:
    """Smith normal form of an integer matrix.

    Returns
    -------
    SmithForm
        Diagonal entries ``d_1 | d_2 | ...`` and unimodular ``U``, ``V`` with
        ``U A V = diag(d)``.
    """
    a = [[int(v) for v in row] for row in np.asarray(matrix).tolist()]
    red = _Reducer(a)
    k = min(red.m, red.n)
    for t in range(k):
        if not red.place_pivot(t):
            break
        red.clear(t)
    for t in range(k):
        if a[t][t] < 0:
            a[t] = [-v for v in a[t]]
            red.u[t] = [-v for v in red.u[t]]
    for i in range(k):
        if a[i][i] in (0, 1):
            continue
        for j in range(i + 1, k):
            if a[j][j] % a[i][i]:
                red.combine(i, j)
    diagonal = tuple(a[t][t] for t in range(k))
    right = [list(col) for col in zip(*red.vt, strict=True)] if red.n else []
    logger.debug(
        "smith normal form of %dx%d: %d invariant factors",
        red.m,
        red.n,
        sum(1 for d in diagonal if d > 1),
    )
    return SmithForm(diagonal=diagonal, left=red.u, right=right)
