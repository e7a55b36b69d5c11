"""Vertex and edge fields on a :class:`~percolab.percolation.ClusterGraph`.

A field carries its graph, its values and a numeric kind: ``float64`` or
``rational`` (exact :class:`fractions.Fraction` in an object array). Mixing
kinds or graphs in arithmetic raises instead of converting silently.

Edge fields store one value per listed edge, read in the canonical
orientation ``i -> j`` with ``i < j``; calling a field on the reversed pair
returns the negated value.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Literal

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from .errors import ParameterError
from .percolation import ClusterGraph, Point

logger = logging.getLogger(__name__)

__all__ = [
    "EdgeField",
    "NumericKind",
    "ScalarField",
    "SolveOptions",
    "format_value",
]

NumericKind = Literal["float64", "rational"]


class SolveOptions(BaseModel):
    """Options shared by every elliptic solve.

    Attributes
    ----------
    tolerance:
        Relative residual bound of iterative solves; ignored by exact solves.
    max_iterations:
        Iteration budget; ``None`` means ten times the number of unknowns.
    preconditioner:
        ``"diagonal"`` (Jacobi) or ``"none"``.
    exact:
        Solve in exact rational arithmetic.
    exact_cap:
        Largest number of unknowns accepted in exact mode.
    """

    tolerance: float = Field(1e-10, gt=0)
    max_iterations: int | None = Field(None, ge=1)
    preconditioner: Literal["none", "diagonal"] = "diagonal"
    exact: bool = False
    exact_cap: int = Field(5000, ge=1)

    model_config = {"frozen": True, "extra": "forbid"}

    @property
    def kind(self) -> NumericKind:
        """Numeric kind of the fields these options produce."""
        return "rational" if self.exact else "float64"


def _coerce(values: Any, kind: NumericKind) -> np.ndarray:
    if kind == "rational":
        arr = np.empty(len(values), dtype=object)
        arr[:] = [v if isinstance(v, Fraction) else Fraction(v) for v in values]
        return arr
    return np.asarray(values, dtype=np.float64)


def format_value(value: Any) -> str:
    """Render a field value for CSV: ``"n/d"`` for rationals, ``repr`` for floats."""
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    return repr(float(value))


class _FieldBase:
    graph: ClusterGraph
    values: np.ndarray
    kind: NumericKind

    def _check_compatible(self, other: Any) -> None:
        if not isinstance(other, type(self)):
            raise ParameterError(
                f"cannot combine {type(self).__name__} with {type(other).__name__}"
            )
        if other.kind != self.kind:
            raise ParameterError(f"cannot mix {self.kind} and {other.kind} fields")
        if not self.graph.is_same(other.graph):
            raise ParameterError("fields live on different graphs")

    def _scalar(self, factor: Any) -> Any:
        if self.kind == "rational":
            if isinstance(factor, float):
                raise ParameterError("a float scalar cannot scale a rational field")
            return Fraction(factor)
        return float(factor)

    def abs_max(self) -> Any:
        """Largest absolute value (0 on an empty field)."""
        if len(self.values) == 0:
            return Fraction(0) if self.kind == "rational" else 0.0
        if self.kind == "rational":
            return max(abs(v) for v in self.values)
        return float(np.abs(self.values).max())


@dataclass(frozen=True, eq=False)
class ScalarField(_FieldBase):
    """A function on the vertices of a graph."""

    graph: ClusterGraph
    values: np.ndarray
    kind: NumericKind = "float64"
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.values) != self.graph.n_vertices:
            raise ParameterError(
                f"{len(self.values)} values for a graph with {self.graph.n_vertices} vertices"
            )
        values = _coerce(self.values, self.kind)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    # ── constructors ──

    @classmethod
    def zeros(cls, graph: ClusterGraph, kind: NumericKind = "float64") -> ScalarField:
        """The zero field."""
        return cls(graph, [0] * graph.n_vertices, kind)

    @classmethod
    def from_function(
        cls,
        graph: ClusterGraph,
        fn: Callable[[Point], Any],
        kind: NumericKind = "float64",
    ) -> ScalarField:
        """Evaluate *fn* at every vertex."""
        return cls(graph, [fn(graph.point(i)) for i in range(graph.n_vertices)], kind)

    @classmethod
    def from_mapping(
        cls,
        graph: ClusterGraph,
        mapping: Mapping[Sequence[int], Any],
        kind: NumericKind = "float64",
        default: Any = 0,
    ) -> ScalarField:
        """Field equal to *mapping* where given and *default* elsewhere.

        Points of *mapping* that are not vertices are ignored.
        """
        values = [default] * graph.n_vertices
        for pt, value in mapping.items():
            if graph.contains(pt):
                values[graph.index(pt)] = value
        return cls(graph, values, kind)

    @classmethod
    def linear(
        cls, graph: ClusterGraph, slope: Sequence[Any], kind: NumericKind = "float64"
    ) -> ScalarField:
        """The affine function ``x -> slope . x``."""
        if len(slope) != graph.dim:
            raise ParameterError(f"slope {slope} does not have dimension {graph.dim}")
        if kind == "rational":
            coeffs = [Fraction(c) for c in slope]
            return cls.from_function(
                graph,
                lambda pt: sum((c * x for c, x in zip(coeffs, pt, strict=True)), Fraction(0)),
                kind,
            )
        return cls(graph, graph.points @ np.asarray(slope, dtype=np.float64), kind)

    # ── access ──

    def at(self, point: Sequence[int]) -> Any:
        """Value at the vertex *point*."""
        return self.values[self.graph.index(point)]

    def as_float(self) -> ScalarField:
        """The same field in float64."""
        if self.kind == "float64":
            return self
        return ScalarField(self.graph, [float(v) for v in self.values], "float64", self.metadata)

    def with_metadata(self, **extra: Any) -> ScalarField:
        """Copy with *extra* merged into the metadata."""
        return ScalarField(self.graph, self.values, self.kind, {**self.metadata, **extra})

    def max(self) -> Any:
        """Largest value."""
        return max(self.values) if self.kind == "rational" else float(self.values.max())

    def min(self) -> Any:
        """Smallest value."""
        return min(self.values) if self.kind == "rational" else float(self.values.min())

    # ── arithmetic ──

    def __add__(self, other: ScalarField) -> ScalarField:
        self._check_compatible(other)
        return ScalarField(self.graph, self.values + other.values, self.kind)

    def __sub__(self, other: ScalarField) -> ScalarField:
        self._check_compatible(other)
        return ScalarField(self.graph, self.values - other.values, self.kind)

    def __neg__(self) -> ScalarField:
        return ScalarField(self.graph, -self.values, self.kind)

    def __mul__(self, factor: Any) -> ScalarField:
        return ScalarField(self.graph, self.values * self._scalar(factor), self.kind)

    __rmul__ = __mul__

    # ── export ──

    def to_frame(self) -> pd.DataFrame:
        """Table with columns ``x1..xd, value`` in vertex order."""
        columns = [f"x{i + 1}" for i in range(self.graph.dim)]
        frame = pd.DataFrame(self.graph.points, columns=columns)
        frame["value"] = [format_value(v) for v in self.values]
        return frame

    def to_csv(self, path: str | Path) -> Path:
        """Write :meth:`to_frame` as CSV and return the path."""
        out = Path(path)
        self.to_frame().to_csv(out, index=False)
        return out


@dataclass(frozen=True, eq=False)
class EdgeField(_FieldBase):
    """An antisymmetric function on the oriented edges of a graph."""

    graph: ClusterGraph
    values: np.ndarray
    kind: NumericKind = "float64"

    def __post_init__(self) -> None:
        if len(self.values) != self.graph.n_edges:
            raise ParameterError(
                f"{len(self.values)} values for a graph with {self.graph.n_edges} edges"
            )
        values = _coerce(self.values, self.kind)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, graph: ClusterGraph, kind: NumericKind = "float64") -> EdgeField:
        """The zero edge field."""
        return cls(graph, [0] * graph.n_edges, kind)

    @classmethod
    def from_mapping(
        cls,
        graph: ClusterGraph,
        mapping: Mapping[tuple[Sequence[int], Sequence[int]], Any],
        kind: NumericKind = "float64",
    ) -> EdgeField:
        """Field with ``F(x, y) = mapping[(x, y)]`` and zero on unlisted edges.

        Raises
        ------
        ParameterError
            If a key is not an edge of the graph.
        """
        values: list[Any] = [0] * graph.n_edges
        for (x, y), value in mapping.items():
            k, sign = graph.edge_id(graph.index(x), graph.index(y))
            values[k] = value if sign > 0 else -value
        return cls(graph, values, kind)

    def __call__(self, x: Sequence[int], y: Sequence[int]) -> Any:
        """Value on the oriented edge ``(x, y)``."""
        k, sign = self.graph.edge_id(self.graph.index(x), self.graph.index(y))
        return self.values[k] if sign > 0 else -self.values[k]

    @property
    def support(self) -> np.ndarray:
        """Mask of edges carrying a nonzero value."""
        return np.asarray([v != 0 for v in self.values], dtype=bool)

    def l2_norm(self) -> float:
        """Euclidean norm over edges."""
        return float(np.sqrt(sum(float(v) ** 2 for v in self.values)))

    def __add__(self, other: EdgeField) -> EdgeField:
        self._check_compatible(other)
        return EdgeField(self.graph, self.values + other.values, self.kind)

    def __sub__(self, other: EdgeField) -> EdgeField:
        self._check_compatible(other)
        return EdgeField(self.graph, self.values - other.values, self.kind)

    def __neg__(self) -> EdgeField:
        return EdgeField(self.graph, -self.values, self.kind)

    def __mul__(self, factor: Any) -> EdgeField:
        return EdgeField(self.graph, self.values * self._scalar(factor), self.kind)

    __rmul__ = __mul__

    def to_frame(self) -> pd.DataFrame:
        """Table with tail coordinates, head coordinates and value per edge."""
        d = self.graph.dim
        tails = self.graph.points[self.graph.edges[:, 0]]
        heads = self.graph.points[self.graph.edges[:, 1]]
        frame = pd.DataFrame(
            np.hstack([tails, heads]),
            columns=[f"x{i + 1}" for i in range(d)] + [f"y{i + 1}" for i in range(d)],
        )
        frame["value"] = [format_value(v) for v in self.values]
        return frame
