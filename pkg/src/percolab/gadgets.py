"""Resistance gadgets ``T_n`` and the integer rigidity they carry.

The gadget ``T_n`` is the rectangle ``[1, 4] x [0, n + 1]`` whose open sites
are the row ``[1, 4] x {1}`` and the ladder ``[2, 3] x [1, n]``; the other
rectangle boundary sites are closed. Terminals are ``s = (1, 1)``,
``a = (2, 1)``, ``b = (3, 1)`` and ``t = (4, 1)``. An edge is open iff both
endpoints are open sites.

The effective resistance between ``s`` and ``t`` follows
``R_1 = 3, R_{n+1} = (3 R_n + 2) / (R_n + 1)`` and equals ``A_{n+1} / B_n``
for the integer sequences ``A_k = 4 A_{k-1} - A_{k-2}`` (``A_0 = A_1 = 1``)
and ``B_k = 4 B_{k-1} - B_{k-2}`` (``B_0 = 0``, ``B_1 = 1``).
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, reduce

import mpmath
import numpy as np
import pandas as pd

from .errors import InternalError, ParameterError
from .fields import ScalarField, SolveOptions
from .percolation import (
    ClusterGraph,
    Edge,
    PercolationSample,
    Point,
    canonical_edge,
    modify_edges,
)
from .solvers import solve_dirichlet

logger = logging.getLogger(__name__)

__all__ = [
    "Gadget",
    "ResistanceResult",
    "build_gadget",
    "convergence_errors",
    "embed_gadget",
    "escape_probability_mc",
    "gadget_table",
    "integer_harmonic_gap",
    "minimal_integer_scaling",
    "resistance_by_solve",
    "resistance_recurrence",
    "resistance_result",
    "sequence_AB",
]

_UNITS = ((1, 0), (-1, 0), (0, 1), (0, -1))

# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Gadget:
    """Site sets of ``T_n`` in its own coordinates."""

    n: int
    open_sites: frozenset[Point]
    closed_sites: frozenset[Point]

    s: Point = (1, 1)
    a: Point = (2, 1)
    b: Point = (3, 1)
    t: Point = (4, 1)

    @property
    def rectangle(self) -> frozenset[Point]:
        """All sites of ``[1, 4] x [0, n + 1]``."""
        return frozenset((x, y) for x in range(1, 5) for y in range(self.n + 2))

    def edges(self) -> list[Edge]:
        """Open edges (both endpoints open), lexicographic."""
        out = []
        for x, y in sorted(self.open_sites):
            for nb in ((x + 1, y), (x, y + 1)):
                if nb in self.open_sites:
                    out.append(((x, y), nb))
        return out

    @cached_property
    def graph(self) -> ClusterGraph:
        """The open graph with ``s`` and ``t`` as its boundary."""
        return ClusterGraph.from_edges(self.edges(), boundary=[self.s, self.t])


def build_gadget(n: int) -> Gadget:
    """Build ``T_n``.

    Raises
    ------
    ParameterError
        If ``n < 1``.
    """
    if n < 1:
        raise ParameterError(f"gadget size must be at least 1, got {n}")
    row = {(x, 1) for x in range(1, 5)}
    ladder = {(x, y) for x in (2, 3) for y in range(1, n + 1)}
    open_sites = frozenset(row | ladder)
    rim = {
        (x, y)
        for x in range(1, 5)
        for y in range(n + 2)
        if x in (1, 4) or y in (0, n + 1)
    }
    closed = frozenset(rim - {(1, 1), (4, 1)})
    return Gadget(n=n, open_sites=open_sites, closed_sites=closed)


# ---------------------------------------------------------------------------
# Resistance
# ---------------------------------------------------------------------------


def resistance_recurrence(n: int) -> Fraction:
    """``R_n`` from the recurrence ``R_{k+1} = (3 R_k + 2) / (R_k + 1)``."""
    if n < 1:
        raise ParameterError(f"n must be at least 1, got {n}")
    r = Fraction(3)
    for _ in range(n - 1):
        r = (3 * r + 2) / (r + 1)
    return r


def sequence_AB(n: int) -> tuple[int, int]:  # noqa: N802
    """Return ``(A_{n+1}, B_n)``."""
    if n < 0:
        raise ParameterError(f"n must be nonnegative, got {n}")
    a_prev, a_cur = 1, 1  # A_0, A_1
    b_prev, b_cur = 0, 1  # B_0, B_1
    for _ in range(n):
        a_prev, a_cur = a_cur, 4 * a_cur - a_prev
    for _ in range(n - 1):
        b_prev, b_cur = b_cur, 4 * b_cur - b_prev
    return a_cur, (b_prev if n == 0 else b_cur)


def _unit_voltage(n: int, opts: SolveOptions | None = None) -> tuple[Gadget, ScalarField]:
    gadget = build_gadget(n)
    opts = opts or SolveOptions(exact=True)
    if not opts.exact:
        opts = opts.model_copy(update={"exact": True})
    h = solve_dirichlet(gadget.graph, None, {gadget.s: 0, gadget.t: 1}, None, opts)
    return gadget, h


def resistance_by_solve(n: int, opts: SolveOptions | None = None) -> Fraction:
    """``1 / h(a)`` for the exact unit-voltage solution ``h(s) = 0``, ``h(t) = 1``.

    Raises
    ------
    CapacityError
        If the gadget exceeds the exact solver cap.
    InternalError
        If ``h(a) = 0``.
    """
    gadget, h = _unit_voltage(n, opts)
    ha = h.at(gadget.a)
    if ha == 0:
        raise InternalError(f"h(a) vanished on T_{n}")
    return 1 / ha


@dataclass(frozen=True)
class ResistanceResult:
    """Both computations of ``R_n`` together with its reduced fraction."""

    n: int
    r_recurrence: Fraction
    r_solve: Fraction
    a: int
    b: int

    @property
    def consistent(self) -> bool:
        """Whether recurrence, solve and ``A/B`` agree with ``gcd(A, B) = 1``."""
        return (
            self.r_recurrence == self.r_solve == Fraction(self.a, self.b)
            and math.gcd(self.a, self.b) == 1
        )


def resistance_result(n: int, opts: SolveOptions | None = None) -> ResistanceResult:
    """Collect recurrence, exact solve and sequence values for ``T_n``."""
    a, b = sequence_AB(n)
    return ResistanceResult(n, resistance_recurrence(n), resistance_by_solve(n, opts), a, b)


def minimal_integer_scaling(n: int, opts: SolveOptions | None = None) -> ScalarField:
    """Smallest integer multiple of the unit-voltage solution on ``T_n``.

    The scale is the least common multiple of the denominators of ``h``;
    its value at ``t`` is the integer gap.
    """
    _, h = _unit_voltage(n, opts)
    scale = reduce(math.lcm, (v.denominator for v in h.values), 1)
    return ScalarField(h.graph, [v * scale for v in h.values], "rational", {"scale": scale})


def integer_harmonic_gap(n: int, opts: SolveOptions | None = None) -> int:
    """Smallest ``|u(t) - u(s)| > 0`` over integer-valued harmonic ``u`` on ``T_n``.

    ``u(a) - u(s) = (B_n / A_{n+1}) (u(t) - u(s))`` with coprime ``A, B``
    forces ``A_{n+1}`` to divide ``u(t) - u(s)``.

    Raises
    ------
    InternalError
        If the exact solve disagrees with ``A_{n+1}``.
    """
    scaled = minimal_integer_scaling(n, opts)
    gadget = build_gadget(n)
    gap = int(scaled.at(gadget.t) - scaled.at(gadget.s))
    expected, _ = sequence_AB(n)
    if gap != expected:
        raise InternalError(f"integer gap {gap} on T_{n} differs from A_{n + 1} = {expected}")
    return gap


def escape_probability_mc(n: int, walks: int, seed: int) -> float:
    """Fraction of simple random walks from ``a`` that reach ``t`` before ``s``.

    Estimates ``h(a) = 1 / R_n``.
    """
    gadget = build_gadget(n)
    graph = gadget.graph
    rng = np.random.default_rng(seed)
    neighbors = [list(graph.nx_graph.neighbors(i)) for i in range(graph.n_vertices)]
    start, s, t = (graph.index(p) for p in (gadget.a, gadget.s, gadget.t))
    hits = 0
    for _ in range(walks):
        v = start
        while v not in (s, t):
            nbrs = neighbors[v]
            v = nbrs[int(rng.integers(len(nbrs)))]
        hits += v == t
    return hits / walks


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------


def convergence_errors(n_max: int, precision_bits: int = 200) -> list[mpmath.mpf]:
    """``|R_n - (1 + sqrt 3)|`` for ``n = 1..n_max`` at the given binary precision."""
    with mpmath.workprec(precision_bits):
        limit = 1 + mpmath.sqrt(3)
        out = []
        for n in range(1, n_max + 1):
            r = resistance_recurrence(n)
            out.append(abs(mpmath.mpf(r.numerator) / r.denominator - limit))
    return out


def gadget_table(n_max: int, check_solve: bool = True) -> pd.DataFrame:
    """Table of ``n, A_{n+1}, B_n, R_n`` with decimal value and distance to ``1 + sqrt 3``.

    With *check_solve* every row is cross-checked against the exact solve.

    Raises
    ------
    InternalError
        If a cross-check fails.
    """
    errors = convergence_errors(n_max)
    rows = []
    with mpmath.workprec(200):
        for n, err in zip(range(1, n_max + 1), errors, strict=True):
            a, b = sequence_AB(n)
            r = resistance_recurrence(n)
            if check_solve and resistance_by_solve(n) != r:
                raise InternalError(f"exact solve and recurrence disagree on T_{n}")
            if r != Fraction(a, b) or math.gcd(a, b) != 1:
                raise InternalError(f"R_{n} = {r} is not A/B = {a}/{b} in lowest terms")
            rows.append(
                {
                    "n": n,
                    "A_{n+1}": str(a),
                    "B_n": str(b),
                    "R_n": f"{r.numerator}/{r.denominator}",
                    "R_n_decimal": mpmath.nstr(mpmath.mpf(a) / b, 30),
                    "abs_error": mpmath.nstr(err, 10),
                }
            )
    return pd.DataFrame(rows)


# ---------------------------------------------------------------------------
# Embedding into samples
# ---------------------------------------------------------------------------


def _check_path(path: Sequence[Point], start: Point) -> list[Edge]:
    edges = []
    prev = start
    for pt in path:
        try:
            edges.append(canonical_edge(prev, pt))
        except ParameterError:
            raise ParameterError(f"attach path breaks between {prev} and {pt}") from None
        prev = pt
    return edges


def embed_gadget(
    sample: PercolationSample,
    anchor: Sequence[int],
    n: int,
    attach_paths: tuple[Sequence[Sequence[int]], Sequence[Sequence[int]]] = ((), ()),
    seal_terminals: bool = False,
) -> PercolationSample:
    """Force a translated ``T_n`` into *sample*.

    Site ``z`` of the gadget lands on ``anchor + z``. Gadget edges are open
    iff both endpoints are open sites, every other edge leaving the rectangle
    is closed except the terminal edges, the two attach paths (starting next
    to ``s`` and ``t`` respectively) are opened, and terminal edges without a
    path are closed when *seal_terminals* is set and left alone otherwise.

    Raises
    ------
    ParameterError
        If the gadget or a path leaves the region, a path enters the
        rectangle, or the paths meet.
    """
    if sample.region.d != 2:
        raise ParameterError("gadgets are planar")
    gadget = build_gadget(n)
    ax, ay = (int(c) for c in anchor)

    def shift(p: Point) -> Point:
        return (p[0] + ax, p[1] + ay)

    rect = {shift(p) for p in gadget.rectangle}
    opened = {shift(p) for p in gadget.open_sites}
    if not sample.region.contains(sorted(rect)).all():
        raise ParameterError(f"T_{n} at {tuple(anchor)} does not fit in {sample.region}")

    paths = [[tuple(int(c) for c in pt) for pt in path] for path in attach_paths]
    seen: set[Point] = set()
    for path in paths:
        for pt in path:
            if pt in rect or pt in seen:
                raise ParameterError(f"attach path point {pt} collides with the gadget or path")
            seen.add(pt)
        if path and not sample.region.contains(path).all():
            raise ParameterError("attach path leaves the region")

    edits: list[tuple[Edge, bool]] = []
    terminals = {shift(gadget.s): (-1, 0), shift(gadget.t): (1, 0)}
    for x, y in sorted(rect):
        for dx, dy in _UNITS:
            nb = (x + dx, y + dy)
            if nb in rect:
                if (dx, dy) in ((1, 0), (0, 1)):
                    edits.append((((x, y), nb), (x, y) in opened and nb in opened))
            elif terminals.get((x, y)) != (dx, dy) and sample.region.contains([nb]).all():
                edits.append((((x, y), nb), False))
    for terminal, path in zip((shift(gadget.s), shift(gadget.t)), paths, strict=True):
        outward = terminals[terminal]
        outside = (terminal[0] + outward[0], terminal[1] + outward[1])
        if path:
            if path[0] != outside:
                raise ParameterError(f"attach path must start at {outside}")
            edits.extend((edge, True) for edge in _check_path(path, terminal))
        elif seal_terminals and sample.region.contains([outside]).all():
            edits.append(((terminal, outside), False))
    logger.debug("embedding T_%d at %s with %d edits", n, tuple(anchor), len(edits))
    return modify_edges(sample, edits)
