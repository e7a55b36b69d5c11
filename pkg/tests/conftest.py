"""Shared fixtures: small full-lattice boxes and percolation clusters."""

from __future__ import annotations

import pytest

from percolab.percolation import BoxRegion, ClusterGraph, largest_cluster, sample_percolation


def block(rows: int, cols: int) -> ClusterGraph:
    """Full-lattice block ``[0, cols) x [0, rows)`` without Dirichlet boundary."""
    pts = [(x, y) for x in range(cols) for y in range(rows)]
    edges = [((x, y), (x + 1, y)) for x in range(cols - 1) for y in range(rows)]
    edges += [((x, y), (x, y + 1)) for x in range(cols) for y in range(rows - 1)]
    return ClusterGraph.from_edges(edges, vertices=pts)


@pytest.fixture
def full_sample():
    return sample_percolation(BoxRegion(d=2, radius=4), 1.0, seed=0)


@pytest.fixture
def full_box(full_sample):
    """The full ``[-4, 4]^2`` box with its faces as boundary."""
    return largest_cluster(full_sample)


@pytest.fixture
def perc_sample():
    return sample_percolation(BoxRegion(d=2, radius=10), 0.8, seed=11)


@pytest.fixture
def perc_cluster(perc_sample):
    """Largest cluster of a ``p = 0.8`` sample on ``[-10, 10]^2``."""
    return largest_cluster(perc_sample)
