"""Abelian sandpile on cluster graphs with a dissipative exterior.

A vertex holding at least ``deg(v)`` chips topples: it loses ``deg(v)``
chips and sends one to each neighbor in the graph. ``deg`` is the full
lattice degree, so chips sent along edges leaving the graph are lost. The
Markov chain adds a chip at a uniform vertex and stabilizes.

Frequencies ``ξ`` with ``Lξ`` integral are the toppling invariants: the sum
``Σ s ξ`` modulo one survives stabilization, and ``h = exp(2πiξ)`` is an
eigenfunction of the chain with eigenvalue the mean of ``h``.

Public API
----------
- :func:`sandpile_degree`, :class:`SandpileState`, :class:`Odometer`
- :func:`stabilize`, :func:`toppling_identity_holds`, :func:`is_recurrent`
- :func:`markov_step`, :class:`DensityTrace`, :func:`run_chain`,
  :func:`chain_occupation`
- :func:`reduced_laplacian`, :class:`DualGroup`, :func:`toppling_invariants`,
  :func:`spanning_tree_count`
- :func:`eigenvalue`, :func:`exact_eigenvalue`,
  :func:`is_multiplicative_harmonic`
- :class:`SpectrumReport`, :func:`l2_mixing_curve`,
  :func:`mixing_upper_bound_time`, :func:`census_lower_bound`
- :class:`GadgetOccurrence`, :class:`SlowMixingCensus`,
  :func:`find_slow_mixing_gadgets`, :func:`slow_mixing_frequency`,
  :func:`slow_mixing_gadget_census`, :func:`diamond_peel_bridge`
"""

from __future__ import annotations

import itertools
import json
import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Any, Literal

import numpy as np
import pandas as pd
from more_itertools import chunked
from numba import njit

from .config import SandpileSettings
from .errors import CapacityError, InternalError, ParameterError, TopologyError
from .linalg import SmithForm, smith_normal_form
from .percolation import ClusterGraph, PercolationSample, Point
from .topology import diamond_peel as diamond_peel_bridge

logger = logging.getLogger(__name__)

__all__ = [
    "DensityTrace",
    "DualGroup",
    "GadgetOccurrence",
    "Odometer",
    "SandpileState",
    "SlowMixingCensus",
    "SpectrumReport",
    "census_lower_bound",
    "chain_occupation",
    "diamond_peel_bridge",
    "eigenvalue",
    "exact_eigenvalue",
    "find_slow_mixing_gadgets",
    "is_multiplicative_harmonic",
    "is_recurrent",
    "l2_mixing_curve",
    "markov_step",
    "mixing_upper_bound_time",
    "reduced_laplacian",
    "run_chain",
    "sandpile_degree",
    "slow_mixing_frequency",
    "slow_mixing_gadget_census",
    "spanning_tree_count",
    "stabilize",
    "toppling_identity_holds",
    "toppling_invariants",
]

Policy = Literal["fifo", "random"]

# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------


def sandpile_degree(graph: ClusterGraph, sample: PercolationSample | None = None) -> np.ndarray:
    """Full lattice degree of every vertex.

    With a *sample* this is the number of open lattice edges at the vertex,
    edges leaving the box included. Without one every lattice edge counts,
    so a vertex of ``Z^d`` has degree ``2d``.
    """
    if sample is None:
        return np.full(graph.n_vertices, 2 * graph.dim, dtype=np.int64)
    return sample.open_degree(graph.points)


def _check_dissipation(graph: ClusterGraph, degree: np.ndarray) -> None:
    loss = degree - graph.degree
    labels = graph.component_labels()
    exits = np.bincount(labels, weights=loss, minlength=int(labels.max(initial=0)) + 1)
    if np.any(exits == 0):
        raise TopologyError("a component of the graph has no edge to the dissipative exterior")


@dataclass(frozen=True, eq=False)
class SandpileState:
    """Chip configuration on a graph with full degrees *degree*."""

    graph: ClusterGraph
    degree: np.ndarray
    chips: np.ndarray

    def __post_init__(self) -> None:
        degree = np.asarray(self.degree, dtype=np.int64)
        chips = np.asarray(self.chips, dtype=np.int64)
        n = self.graph.n_vertices
        if degree.shape != (n,) or chips.shape != (n,):
            raise ParameterError(f"degree and chips must have one entry per vertex ({n})")
        if np.any(degree < self.graph.degree) or np.any(degree < 1):
            raise ParameterError("full degrees must be positive and at least the graph degree")
        if np.any(chips < 0):
            raise ParameterError("chip counts must be nonnegative")
        for arr in (degree, chips):
            arr.setflags(write=False)
        object.__setattr__(self, "degree", degree)
        object.__setattr__(self, "chips", chips)

    @classmethod
    def saturated(cls, graph: ClusterGraph, degree: np.ndarray | None = None) -> SandpileState:
        """The maximal stable state ``deg - 1``."""
        deg = sandpile_degree(graph) if degree is None else np.asarray(degree, dtype=np.int64)
        return cls(graph, deg, deg - 1)

    @classmethod
    def from_sample(cls, sample: PercolationSample, graph: ClusterGraph) -> SandpileState:
        """Saturated state on *graph* with degrees read from *sample*."""
        return cls.saturated(graph, sandpile_degree(graph, sample))

    def with_chips(self, chips: Any) -> SandpileState:
        """Same graph and degrees, new chips."""
        return SandpileState(self.graph, self.degree, np.asarray(chips, dtype=np.int64))

    def add_chip(self, vertex: int, count: int = 1) -> SandpileState:
        """Add *count* chips at vertex index *vertex*."""
        chips = self.chips.copy()
        chips[vertex] += count
        return self.with_chips(chips)

    @property
    def dissipation(self) -> np.ndarray:
        """Number of edges from each vertex to the exterior."""
        return self.degree - self.graph.degree

    @property
    def is_stable(self) -> bool:
        """Whether no vertex can topple."""
        return bool(np.all(self.chips < self.degree))

    @property
    def total(self) -> int:
        """Number of chips."""
        return int(self.chips.sum())

    @property
    def mean_chips(self) -> float:
        """Average chip count per vertex."""
        return float(self.chips.mean())

    def same_chips(self, other: SandpileState) -> bool:
        """Whether both states hold the same chips."""
        return bool(np.array_equal(self.chips, other.chips))


@dataclass(frozen=True, eq=False)
class Odometer:
    """Toppling counts of one stabilization."""

    counts: np.ndarray

    @property
    def total(self) -> int:
        """Number of topplings."""
        return int(self.counts.sum())

    def same_as(self, other: Odometer) -> bool:
        """Whether both odometers agree vertex by vertex."""
        return bool(np.array_equal(self.counts, other.counts))


# ---------------------------------------------------------------------------
# Toppling kernels
# ---------------------------------------------------------------------------


@njit(cache=True)
def _topple_fifo(indptr, indices, degree, loss, chips, odometer, queue, queued, start, budget):
    """Stabilize *chips* in place; return ``(topplings, chips lost)``.

    With ``start >= 0`` only that vertex is assumed unstable. A vertex is
    queued at most once, so *queue* of length n is a ring buffer that never
    overflows. ``topplings == -1`` reports an exhausted *budget*.
    """
    n = chips.shape[0]
    head = 0
    size = 0
    if start >= 0:
        if chips[start] >= degree[start]:
            queue[0] = start
            queued[start] = True
            size = 1
    else:
        for v in range(n):
            if chips[v] >= degree[v]:
                queue[size] = v
                queued[v] = True
                size += 1
    topplings = 0
    lost = 0
    while size > 0:
        v = queue[head]
        head = (head + 1) % n
        size -= 1
        queued[v] = False
        k = chips[v] // degree[v]
        if k == 0:
            continue
        chips[v] -= k * degree[v]
        odometer[v] += k
        topplings += k
        lost += k * loss[v]
        if budget >= 0 and topplings > budget:
            return -1, lost
        for p in range(indptr[v], indptr[v + 1]):
            u = indices[p]
            chips[u] += k
            if chips[u] >= degree[u] and not queued[u]:
                queue[(head + size) % n] = u
                queued[u] = True
                size += 1
    return topplings, lost


@njit(cache=True)
def _run_chain_kernel(indptr, indices, degree, loss, chips, sites, record_every, totals, codes):
    n = chips.shape[0]
    queue = np.empty(n, dtype=np.int64)
    queued = np.zeros(n, dtype=np.bool_)
    odometer = np.zeros(n, dtype=np.int64)
    total = 0
    for v in range(n):
        total += chips[v]
    rec = 0
    for t in range(sites.shape[0]):
        v = sites[t]
        chips[v] += 1
        total += 1
        if chips[v] >= degree[v]:
            _, lost = _topple_fifo(
                indptr, indices, degree, loss, chips, odometer, queue, queued, v, -1
            )
            total -= lost
        if (t + 1) % record_every == 0:
            totals[rec] = total
            rec += 1
        if codes.shape[0] > 0:
            code = 0
            for i in range(n):
                code = code * degree[i] + chips[i]
            codes[t] = code
    return rec


def _csr(graph: ClusterGraph) -> tuple[np.ndarray, np.ndarray]:
    adj = graph.adjacency
    return adj.indptr.astype(np.int64), adj.indices.astype(np.int64)


def _topple_random(
    graph: ClusterGraph,
    degree: np.ndarray,
    chips: np.ndarray,
    odometer: np.ndarray,
    rng: np.random.Generator,
    budget: int,
) -> int:
    indptr, indices = _csr(graph)
    pending = [int(v) for v in np.flatnonzero(chips >= degree)]
    listed = np.zeros(chips.size, dtype=bool)
    listed[pending] = True
    topplings = 0
    while pending:
        j = int(rng.integers(len(pending)))
        v = pending[j]
        chips[v] -= degree[v]
        odometer[v] += 1
        topplings += 1
        if 0 <= budget < topplings:
            return -1
        for u in indices[indptr[v] : indptr[v + 1]]:
            chips[u] += 1
            if not listed[u] and chips[u] >= degree[u]:
                pending.append(int(u))
                listed[u] = True
        if chips[v] < degree[v]:
            pending[j] = pending[-1]
            pending.pop()
            listed[v] = False
    return topplings


def stabilize(
    state: SandpileState,
    policy: Policy = "fifo",
    rng: np.random.Generator | None = None,
    max_topplings: int | None = None,
) -> tuple[SandpileState, Odometer]:
    """Topple until stable.

    ``"fifo"`` runs a queue of unstable vertices in compiled code;
    ``"random"`` topples a uniformly chosen unstable vertex each time.

    Raises
    ------
    TopologyError
        If some component cannot shed chips, or *max_topplings* is exceeded.
    ParameterError
        For an unknown *policy*.
    """
    graph = state.graph
    _check_dissipation(graph, state.degree)
    chips = state.chips.copy()
    odometer = np.zeros(graph.n_vertices, dtype=np.int64)
    budget = -1 if max_topplings is None else int(max_topplings)
    if policy == "fifo":
        indptr, indices = _csr(graph)
        queue = np.empty(graph.n_vertices, dtype=np.int64)
        queued = np.zeros(graph.n_vertices, dtype=np.bool_)
        topplings, _ = _topple_fifo(
            indptr, indices, state.degree, state.dissipation, chips, odometer,
            queue, queued, -1, budget,
        )  # fmt: skip
    elif policy == "random":
        topplings = _topple_random(
            graph, state.degree, chips, odometer, rng or np.random.default_rng(), budget
        )
    else:
        raise ParameterError(f"unknown toppling policy {policy!r}")
    if topplings < 0:
        raise TopologyError(f"stabilization exceeded {max_topplings} topplings")
    logger.debug("stabilized with %d topplings (%s)", topplings, policy)
    return state.with_chips(chips), Odometer(odometer)


def _laplacian_times(graph: ClusterGraph, degree: np.ndarray, vec: np.ndarray) -> np.ndarray:
    out = degree * vec
    np.subtract.at(out, graph.edges[:, 0], vec[graph.edges[:, 1]])
    np.subtract.at(out, graph.edges[:, 1], vec[graph.edges[:, 0]])
    return out


def toppling_identity_holds(
    before: SandpileState, after: SandpileState, odometer: Odometer
) -> bool:
    """Check ``after = before - L odometer`` exactly."""
    lap = _laplacian_times(before.graph, before.degree, odometer.counts)
    return bool(np.array_equal(after.chips, before.chips - lap))


def is_recurrent(state: SandpileState) -> bool:
    """Burning test: a stable state is recurrent iff adding one chip per
    exterior edge makes every vertex topple exactly once.

    Raises
    ------
    ParameterError
        If *state* is not stable.
    """
    if not state.is_stable:
        raise ParameterError("the burning test needs a stable state")
    _, odometer = stabilize(state.with_chips(state.chips + state.dissipation))
    return bool(np.all(odometer.counts == 1))


# ---------------------------------------------------------------------------
# Markov chain
# ---------------------------------------------------------------------------


def markov_step(state: SandpileState, rng: np.random.Generator) -> SandpileState:
    """Add a chip at a uniform vertex and stabilize."""
    v = int(rng.integers(state.graph.n_vertices))
    final, _ = stabilize(state.add_chip(v))
    return final


@dataclass(frozen=True, eq=False)
class DensityTrace:
    """Mean chip count of the chain at recorded times."""

    times: np.ndarray
    mean_chips: np.ndarray
    seed: int
    n_vertices: int

    def to_frame(self) -> pd.DataFrame:
        """Trace as a ``t,meanChips`` table."""
        return pd.DataFrame({"t": self.times, "meanChips": self.mean_chips})

    def to_csv(self, path: str | Path) -> Path:
        """Write the trace as CSV ``t,meanChips``."""
        out = Path(path)
        self.to_frame().to_csv(out, index=False)
        return out

    def is_settled(self, tail: float = 0.25, band: float = 0.01) -> bool:
        """Whether the last *tail* of the trace stays within ``band`` of its mean."""
        k = max(1, int(len(self.mean_chips) * tail))
        last = self.mean_chips[-k:]
        centre = float(last.mean())
        return bool(np.all(np.abs(last - centre) <= band * max(abs(centre), 1e-12)))


def _chain_arrays(graph: ClusterGraph, degree: np.ndarray | None) -> tuple[np.ndarray, ...]:
    deg = sandpile_degree(graph) if degree is None else np.asarray(degree, dtype=np.int64)
    _check_dissipation(graph, deg)
    indptr, indices = _csr(graph)
    return indptr, indices, deg, deg - graph.degree


def run_chain(
    graph: ClusterGraph,
    steps: int,
    seed: int,
    record_every: int = 1,
    degree: np.ndarray | None = None,
) -> DensityTrace:
    """Run the chain from ``deg - 1`` and record the mean chip count.

    Time ``0`` is the saturated start; afterwards every *record_every*-th
    step is recorded.

    Raises
    ------
    ParameterError
        If *steps* is negative or *record_every* is not positive.
    """
    if steps < 0 or record_every < 1:
        raise ParameterError("steps must be >= 0 and record_every >= 1")
    indptr, indices, deg, loss = _chain_arrays(graph, degree)
    chips = deg - 1
    start = float(chips.mean())
    sites = np.random.default_rng(seed).integers(0, graph.n_vertices, size=steps)
    totals = np.zeros(steps // record_every, dtype=np.int64)
    recorded = _run_chain_kernel(
        indptr, indices, deg, loss, chips, sites.astype(np.int64), record_every, totals,
        np.zeros(0, dtype=np.int64),
    )  # fmt: skip
    times = np.arange(recorded + 1, dtype=np.int64) * record_every
    means = np.concatenate([[start], totals[:recorded] / graph.n_vertices])
    logger.debug("chain of %d steps on %d vertices", steps, graph.n_vertices)
    return DensityTrace(times=times, mean_chips=means, seed=seed, n_vertices=graph.n_vertices)


def chain_occupation(
    graph: ClusterGraph, steps: int, seed: int, degree: np.ndarray | None = None
) -> pd.Series:
    """Visit counts of chain states after each step, indexed by state code.

    The code of ``s`` is its mixed-radix number with digit ``s(v) < deg(v)``,
    vertices in graph order.

    Raises
    ------
    ParameterError
        If the number of stable states does not fit in 63 bits.
    """
    indptr, indices, deg, loss = _chain_arrays(graph, degree)
    if sum(math.log2(int(d)) for d in deg) >= 63:
        raise ParameterError("too many stable states to encode")
    chips = deg - 1
    sites = np.random.default_rng(seed).integers(0, graph.n_vertices, size=steps)
    codes = np.zeros(steps, dtype=np.int64)
    _run_chain_kernel(
        indptr, indices, deg, loss, chips, sites.astype(np.int64), steps + 1,
        np.zeros(0, dtype=np.int64), codes,
    )  # fmt: skip
    return pd.Series(codes).value_counts().sort_index()


def decode_state(code: int, degree: Sequence[int]) -> np.ndarray:
    """Chips of the state with mixed-radix *code* (see :func:`chain_occupation`)."""
    chips = np.zeros(len(degree), dtype=np.int64)
    for i in range(len(degree) - 1, -1, -1):
        code, chips[i] = divmod(int(code), int(degree[i]))
    return chips


# ---------------------------------------------------------------------------
# Toppling invariants
# ---------------------------------------------------------------------------


def reduced_laplacian(graph: ClusterGraph, degree: np.ndarray | None = None) -> np.ndarray:
    """Integer matrix with the full degrees on the diagonal and ``-1`` per edge."""
    deg = sandpile_degree(graph) if degree is None else np.asarray(degree, dtype=np.int64)
    lap = np.diag(deg).astype(np.int64)
    i, j = graph.edges[:, 0], graph.edges[:, 1]
    lap[i, j] -= 1
    lap[j, i] -= 1
    return lap


@dataclass(frozen=True, eq=False)
class DualGroup:
    """Frequencies ``ξ`` with ``Lξ`` integral, modulo integers.

    ``generators[j]`` has order ``invariant_factors[j]`` and the group is
    their direct sum.
    """

    reduced_laplacian: np.ndarray
    snf: SmithForm
    invariant_factors: tuple[int, ...]
    generators: tuple[tuple[Fraction, ...], ...]
    order: int

    @property
    def n_vertices(self) -> int:
        """Number of vertices of the underlying graph."""
        return int(self.reduced_laplacian.shape[0])

    @cached_property
    def _numerators(self) -> tuple[tuple[int, ...], ...]:
        return tuple(
            tuple(int(x * d) for x in gen)
            for gen, d in zip(self.generators, self.invariant_factors, strict=True)
        )

    def element(self, coefficients: Sequence[int]) -> tuple[Fraction, ...]:
        """``Σ c_j ξ_j`` reduced into ``[0, 1)``."""
        if len(coefficients) != len(self.generators):
            raise ParameterError(f"expected {len(self.generators)} coefficients")
        out = [Fraction(0)] * self.n_vertices
        for c, nums, d in zip(coefficients, self._numerators, self.invariant_factors, strict=True):
            for i, num in enumerate(nums):
                out[i] += Fraction(c * num % d, d)
        return tuple(x - math.floor(x) for x in out)

    def pairing(self, chips: Sequence[int]) -> tuple[Fraction, ...]:
        """``Σ_v s(v) ξ_j(v)`` modulo one for every generator."""
        values = [int(c) for c in chips]
        out = []
        for nums, d in zip(self._numerators, self.invariant_factors, strict=True):
            total = sum(c * n for c, n in zip(values, nums, strict=True) if c)
            out.append(Fraction(total % d, d))
        return tuple(out)

    def is_invariant(self, xi: Sequence[Fraction]) -> bool:
        """Whether ``Lξ`` is integral."""
        return _integral_product(self.reduced_laplacian, xi)

    def to_summary(self) -> dict[str, Any]:
        """JSON-ready summary with big integers as strings."""
        return {
            "vertices": self.n_vertices,
            "invariantFactors": [str(d) for d in self.invariant_factors],
            "order": str(self.order),
        }

    def write_json(self, path: str | Path) -> Path:
        """Write :meth:`to_summary` as JSON."""
        out = Path(path)
        with out.open("w", encoding="utf-8") as fh:
            json.dump(self.to_summary(), fh, indent=2)
        return out


def _integral_product(matrix: np.ndarray, xi: Sequence[Any]) -> bool:
    fr = [Fraction(x) for x in xi]
    for row in matrix.tolist():
        value = sum((a * x for a, x in zip(row, fr, strict=True) if a), Fraction(0))
        if value.denominator != 1:
            return False
    return True


def toppling_invariants(graph: ClusterGraph, degree: np.ndarray | None = None) -> DualGroup:
    """Dual group of toppling invariants from the Smith form ``U L V = D``.

    ``ξ_j = V[:, j] / d_j`` mod 1 for every diagonal entry ``d_j > 1``, since
    ``L ξ_j = U^{-1} e_j`` is integral.

    Raises
    ------
    TopologyError
        If the reduced Laplacian is singular.
    """
    lap = reduced_laplacian(graph, degree)
    snf = smith_normal_form(lap)
    if 0 in snf.diagonal:
        raise TopologyError("the reduced Laplacian is singular; no chips are dissipated")
    generators: list[tuple[Fraction, ...]] = []
    factors: list[int] = []
    for j, d in enumerate(snf.diagonal):
        if d == 1:
            continue
        generators.append(tuple(Fraction(row[j] % d, d) for row in snf.right))
        factors.append(d)
    order = math.prod(snf.diagonal)
    logger.info("dual group of order %d with %d generators", order, len(factors))
    return DualGroup(
        reduced_laplacian=lap,
        snf=snf,
        invariant_factors=tuple(factors),
        generators=tuple(generators),
        order=order,
    )


def spanning_tree_count(
    graph: ClusterGraph, degree: np.ndarray | None = None, max_vertices: int = 12
) -> int:
    """Count spanning trees of the graph with the exterior glued to one sink.

    Trees are enumerated one by one, every exterior edge giving its own
    parallel edge to the sink.

    Raises
    ------
    CapacityError
        If the graph has more than *max_vertices* vertices.
    """
    n = graph.n_vertices
    if n > max_vertices:
        raise CapacityError(f"explicit enumeration is limited to {max_vertices} vertices")
    deg = sandpile_degree(graph) if degree is None else np.asarray(degree, dtype=np.int64)
    edges = [tuple(e) for e in graph.edges.tolist()]
    for v, extra in enumerate((deg - graph.degree).tolist()):
        edges.extend([(v, n)] * extra)
    need = n

    def find(parent: list[int], a: int) -> int:
        while parent[a] != a:
            a = parent[a]
        return a

    def spans(parent: list[int], rest: Iterable[tuple[int, int]]) -> bool:
        trial = parent.copy()
        for a, b in rest:
            ra, rb = find(trial, a), find(trial, b)
            if ra != rb:
                trial[ra] = rb
        return len({find(trial, v) for v in range(n + 1)}) == 1

    def count(k: int, parent: list[int], picked: int) -> int:
        if picked == need:
            return 1
        if len(edges) - k < need - picked:
            return 0
        a, b = edges[k]
        ra, rb = find(parent, a), find(parent, b)
        total = 0
        if ra != rb:
            joined = parent.copy()
            joined[ra] = rb
            total += count(k + 1, joined, picked + 1)
        if spans(parent, edges[k + 1 :]):
            total += count(k + 1, parent, picked)
        return total

    return count(0, list(range(n + 1)), 0)


# ---------------------------------------------------------------------------
# Eigenvalues
# ---------------------------------------------------------------------------


def _phases(graph: ClusterGraph, xi: Sequence[Any]) -> np.ndarray:
    arr = np.asarray([float(x) for x in xi], dtype=np.float64)
    if arr.shape != (graph.n_vertices,):
        raise ParameterError(f"a frequency needs one value per vertex ({graph.n_vertices})")
    return arr


def eigenvalue(graph: ClusterGraph, xi: Sequence[Any]) -> complex:
    """Mean of ``exp(2πi ξ)`` over the vertices."""
    return complex(np.exp(2j * np.pi * _phases(graph, xi)).mean())


_QUARTER_TURNS = ((1, 0), (0, 1), (-1, 0), (0, -1))


def exact_eigenvalue(xi: Sequence[Any]) -> tuple[Fraction, Fraction]:
    """Real and imaginary parts of the mean of ``exp(2πi ξ)`` for quarter phases.

    Raises
    ------
    ParameterError
        If some phase is not a multiple of ``1/4``.
    """
    re, im = 0, 0
    for x in xi:
        q = Fraction(x) * 4
        if q.denominator != 1:
            raise ParameterError(f"phase {x} is not a multiple of 1/4")
        dre, dim = _QUARTER_TURNS[int(q) % 4]
        re += dre
        im += dim
    m = len(xi)
    return Fraction(re, m), Fraction(im, m)


def is_multiplicative_harmonic(
    graph: ClusterGraph, xi: Sequence[Any], degree: np.ndarray | None = None
) -> bool:
    """Whether ``h = exp(2πi ξ)`` satisfies ``h(v)^deg(v) = Π_{u~v} h(u)``.

    Exterior neighbors carry ``h = 1``. Phases are compared exactly, which is
    ``deg(v) ξ(v) - Σ_{u~v} ξ(u)`` being an integer.
    """
    _phases(graph, xi)
    return _integral_product(reduced_laplacian(graph, degree), xi)


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    """Nontrivial eigenvalues of the chain and the ``l2`` distance curve."""

    eigenvalues: np.ndarray
    group_order: int
    t_values: tuple[int, ...]
    curve: tuple[float, ...]
    exact: bool

    @property
    def enumerated(self) -> int:
        """Number of nontrivial characters summed."""
        return int(self.eigenvalues.size)

    @property
    def max_modulus(self) -> float:
        """Largest ``|λ|`` among nontrivial characters (0 if none)."""
        return float(np.abs(self.eigenvalues).max(initial=0.0))

    def unimodular_count(self, tol: float = 1e-9) -> int:
        """Number of nontrivial eigenvalues on the unit circle."""
        return int(np.sum(np.abs(self.eigenvalues) > 1 - tol))

    def curve_at(self, t: int) -> float:
        """Curve value at a recorded time *t*."""
        return dict(zip(self.t_values, self.curve, strict=True))[t]

    def first_time_below(self, threshold: float = 1e-6) -> int | None:
        """Smallest recorded ``t`` with curve value below *threshold*."""
        for t, value in zip(self.t_values, self.curve, strict=True):
            if value < threshold:
                return t
        return None

    def is_conjugation_closed(self, tol: float = 1e-9) -> bool:
        """Whether every eigenvalue has its conjugate in the list (quadratic)."""
        lam = self.eigenvalues
        conj = np.conj(lam)
        for chunk in range(0, lam.size, 1024):
            dist = np.abs(lam[chunk : chunk + 1024, None] - conj[None, :])
            if np.any(dist.min(axis=1) > tol):
                return False
        return True

    def curve_frame(self) -> pd.DataFrame:
        """The curve as a ``t,l2`` table."""
        return pd.DataFrame({"t": self.t_values, "l2": self.curve})

    def to_frame(self, decimals: int = 10) -> pd.DataFrame:
        """Distinct eigenvalues with multiplicities: ``re,im,absLambda,multiplicity``."""
        frame = pd.DataFrame(
            {
                "re": np.round(self.eigenvalues.real, decimals) + 0.0,
                "im": np.round(self.eigenvalues.imag, decimals) + 0.0,
            }
        )
        grouped = frame.groupby(["re", "im"]).size().reset_index(name="multiplicity")
        grouped.insert(2, "absLambda", np.hypot(grouped["re"], grouped["im"]))
        return grouped.sort_values(["absLambda", "re", "im"], ascending=[False, True, True])

    def to_csv(self, path: str | Path) -> Path:
        """Write :meth:`to_frame` as CSV."""
        out = Path(path)
        self.to_frame().to_csv(out, index=False)
        return out


def _character_values(group: DualGroup, coefficients: np.ndarray) -> np.ndarray:
    big = max(group.invariant_factors) >= 2**31
    phases = np.zeros((coefficients.shape[0], group.n_vertices), dtype=np.float64)
    for j, (nums, d) in enumerate(zip(group._numerators, group.invariant_factors, strict=True)):
        dtype = object if big else np.int64
        col = coefficients[:, j].astype(dtype)[:, None]
        row = np.asarray(nums, dtype=dtype)[None, :]
        phases += ((col * row) % d).astype(np.float64) / float(d)
    return np.exp(2j * np.pi * np.mod(phases, 1.0)).mean(axis=1)


def l2_mixing_curve(
    group: DualGroup,
    t_values: Iterable[int],
    cap: int | None = None,
    lower_bound: bool = False,
) -> SpectrumReport:
    """``Σ_{h≠1} |λ_h|^{2t}`` by enumerating the dual group.

    Above *cap* elements the sum runs over the first ``cap - 1`` nontrivial
    elements only when *lower_bound* is set; the result then bounds the
    curve from below.

    Raises
    ------
    CapacityError
        If the group is larger than *cap* and *lower_bound* is not set.
    ParameterError
        If some ``t`` is negative.
    """
    ts = tuple(sorted(int(t) for t in t_values))
    if any(t < 0 for t in ts):
        raise ParameterError("times must be nonnegative")
    cap = SandpileSettings().enumeration_cap if cap is None else cap
    exact = group.order <= cap
    if not exact:
        if not lower_bound:
            raise CapacityError(f"dual group of order {group.order} exceeds the cap {cap}")
        logger.warning(
            "enumerating %d of %d characters; the curve is a lower bound", cap - 1, group.order
        )
    limit = min(group.order, cap) - 1
    elements = itertools.islice(
        itertools.product(*(range(d) for d in group.invariant_factors)), 1, limit + 1
    )
    values: list[np.ndarray] = []
    for chunk in chunked(elements, 4096):
        values.append(_character_values(group, np.asarray(chunk, dtype=np.int64)))
    lam = np.concatenate(values) if values else np.zeros(0, dtype=np.complex128)
    sq = np.abs(lam) ** 2
    curve = tuple(float(np.sum(sq**t)) for t in ts)
    return SpectrumReport(
        eigenvalues=lam, group_order=group.order, t_values=ts, curve=curve, exact=exact
    )


def mixing_upper_bound_time(m: int, eps: float) -> float:
    """Time after which ``‖P^t - U‖_2^2 <= eps`` on an ``m``-vertex cluster.

    Equals ``(5/4) m log(2 (m - 1) (1 + 1/eps))``.
    """
    if m < 2 or eps <= 0:
        raise ParameterError("need m >= 2 and eps > 0")
    return 1.25 * m * math.log(2 * (m - 1) * (1 + 1 / eps))


def census_lower_bound(m: int, multiplicity: int, t: int) -> float:
    """``multiplicity · |1 - 4/m|^{2t}``, the share of the curve owed to gadgets."""
    if m < 1:
        raise ParameterError("m must be positive")
    return multiplicity * abs(1 - 4 / m) ** (2 * t)


# ---------------------------------------------------------------------------
# Slow-mixing gadgets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GadgetOccurrence:
    """A unit square whose two diagonal *half_sites* have degree two."""

    corner: Point
    diagonal: int
    half_sites: tuple[Point, Point]


def _half_sites(corner: Sequence[int], diagonal: int) -> tuple[Point, Point]:
    x, y = int(corner[0]), int(corner[1])
    if diagonal == 0:
        return (x, y), (x + 1, y + 1)
    return (x + 1, y), (x, y + 1)


def find_slow_mixing_gadgets(
    graph: ClusterGraph, degree: np.ndarray | None = None
) -> list[GadgetOccurrence]:
    """Unit squares with all four sides open and two opposite corners of degree two.

    Raises
    ------
    ParameterError
        If the graph is not planar.
    """
    if graph.dim != 2:
        raise ParameterError("the gadget census is planar")
    deg = sandpile_degree(graph) if degree is None else np.asarray(degree, dtype=np.int64)
    found: list[GadgetOccurrence] = []
    for x, y in map(tuple, graph.points.tolist()):
        square = [(x, y), (x + 1, y), (x + 1, y + 1), (x, y + 1)]
        if not all(graph.contains(pt) for pt in square):
            continue
        if not all(graph.has_edge(square[k], square[(k + 1) % 4]) for k in range(4)):
            continue
        for diagonal in (0, 1):
            sites = _half_sites((x, y), diagonal)
            if all(deg[graph.index(pt)] == 2 for pt in sites):
                found.append(GadgetOccurrence((x, y), diagonal, sites))
    return found


def slow_mixing_frequency(
    graph: ClusterGraph,
    corner: Sequence[int],
    diagonal: int = 0,
    degree: np.ndarray | None = None,
) -> tuple[Fraction, ...] | None:
    """Frequency with ``1/2`` on a diagonal of the unit square at *corner*.

    Returns ``None`` when the diagonal is not in the graph or when the
    frequency is not a toppling invariant, as happens on the full lattice.
    """
    sites = _half_sites(corner, diagonal)
    if not all(graph.contains(pt) for pt in sites):
        return None
    xi = [Fraction(0)] * graph.n_vertices
    for pt in sites:
        xi[graph.index(pt)] = Fraction(1, 2)
    return tuple(xi) if is_multiplicative_harmonic(graph, xi, degree) else None


@dataclass(frozen=True)
class SlowMixingCensus:
    """Gadgets found on an ``m``-vertex cluster.

    ``eigenvalue`` is the exact eigenvalue of each gadget frequency, and
    ``unaffected_fraction = 1 - 2/m`` the share of vertices where the
    multiplicative harmonic function is one.
    """

    m: int
    occurrences: tuple[GadgetOccurrence, ...]
    eigenvalue: Fraction | None
    unaffected_fraction: Fraction

    @property
    def multiplicity(self) -> int:
        """Number of gadget occurrences."""
        return len(self.occurrences)

    def lower_bound(self, t: int) -> float:
        """:func:`census_lower_bound` for this census."""
        return census_lower_bound(self.m, self.multiplicity, t)

    def to_frame(self) -> pd.DataFrame:
        """Occurrences as an ``x,y,diagonal`` table."""
        return pd.DataFrame(
            [
                {"x": occ.corner[0], "y": occ.corner[1], "diagonal": occ.diagonal}
                for occ in self.occurrences
            ],
            columns=["x", "y", "diagonal"],
        )


def slow_mixing_gadget_census(
    graph: ClusterGraph, degree: np.ndarray | None = None
) -> SlowMixingCensus:
    """Scan for gadgets and evaluate their eigenvalue in exact arithmetic.

    Raises
    ------
    ParameterError
        If the graph is not planar.
    InternalError
        If a gadget frequency fails to be a toppling invariant.
    """
    occurrences = find_slow_mixing_gadgets(graph, degree)
    m = graph.n_vertices
    value: Fraction | None = None
    for occ in occurrences:
        xi = slow_mixing_frequency(graph, occ.corner, occ.diagonal, degree)
        if xi is None:
            raise InternalError(f"gadget at {occ.corner} does not give a toppling invariant")
        re, im = exact_eigenvalue(xi)
        if im != 0 or (value is not None and re != value):
            raise InternalError(f"gadget at {occ.corner} has eigenvalue {re} + {im}i")
        value = re
    logger.info("found %d slow-mixing gadgets on %d vertices", len(occurrences), m)
    return SlowMixingCensus(
        m=m,
        occurrences=tuple(occurrences),
        eigenvalue=value,
        unaffected_fraction=Fraction(m - 2, m),
    )
