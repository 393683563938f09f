"""Random geometric graph model of a sensor field.

Nodes are dropped uniformly on the square ``[0, L]^2`` and two nodes are
neighbours when their Euclidean distance ``d`` satisfies ``0 < d <= r``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class NetworkConfig:
    n: int
    side: float
    radius: float
    seed: int = 0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ConfigError(f"node count must be a positive integer, got {self.n!r}")
        if not self.side > 0:
            raise ConfigError(f"side length must be > 0, got {self.side!r}")
        if not self.radius > 0:
            raise ConfigError(f"radius must be > 0, got {self.radius!r}")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError(f"seed must fit in 64 bits, got {self.seed!r}")


@dataclass(frozen=True, eq=False)
class NetworkGraph:
    """Immutable undirected graph with node IDs ``0..n-1``.

    Attributes:
        n: Number of nodes.
        adjacency: Sorted neighbour tuples, one per node.
        positions: ``(n, 2)`` coordinates, or None for synthetic graphs.
        side: Field edge length the positions were drawn on (0 if unknown).
        radius: Connectivity radius (0 if unknown).
        seed: Seed used to draw the positions (None if not random).
    """

    n: int
    adjacency: tuple[tuple[int, ...], ...]
    positions: Optional[np.ndarray] = None
    side: float = 0.0
    radius: float = 0.0
    seed: Optional[int] = None
    degrees: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "degrees", tuple(len(a) for a in self.adjacency))
        if self.positions is not None:
            self.positions.setflags(write=False)

    def neighbors(self, u: int) -> tuple[int, ...]:
        return self.adjacency[u]

    def degree(self, u: int) -> int:
        return self.degrees[u]

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u in range(self.n) for v in self.adjacency[u] if u < v]

    def same_topology(self, other: "NetworkGraph") -> bool:
        return self.n == other.n and self.adjacency == other.adjacency

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "L": self.side,
            "r": self.radius,
            "seed": self.seed,
            "positions": [] if self.positions is None else self.positions.tolist(),
            "edges": [list(e) for e in self.edges()],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "NetworkGraph":
        positions = np.asarray(doc["positions"], dtype=float) if doc.get("positions") else None
        return graph_from_edges(
            doc["n"], doc["edges"], positions=positions,
            side=doc.get("L", 0.0), radius=doc.get("r", 0.0), seed=doc.get("seed"),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path) -> "NetworkGraph":
        return cls.from_json(json.loads(Path(path).read_text()))


def graph_from_edges(n: int, edges: Iterable[Sequence[int]], positions=None,
                     side: float = 0.0, radius: float = 0.0, seed=None) -> NetworkGraph:
    """Build a graph from an explicit undirected edge list."""
    nbrs: list[set[int]] = [set() for _ in range(n)]
    for u, v in edges:
        if u == v:
            raise ConfigError(f"self-loop on node {u}")
        if not (0 <= u < n and 0 <= v < n):
            raise ConfigError(f"edge ({u}, {v}) out of range for n={n}")
        nbrs[u].add(v)
        nbrs[v].add(u)
    adjacency = tuple(tuple(sorted(s)) for s in nbrs)
    return NetworkGraph(n, adjacency, positions, side, radius, seed)


def graph_from_positions(positions, radius: float, side: float = 0.0, seed=None) -> NetworkGraph:
    """Connect every pair of distinct points at distance in ``(0, radius]``."""
    pos = np.array(positions, dtype=float).reshape(-1, 2)
    n = len(pos)
    adjacency = []
    # row-by-row keeps memory at O(n) for large fields
    for u in range(n):
        d2 = np.sum((pos - pos[u]) ** 2, axis=1)
        mask = (d2 <= radius * radius) & (d2 > 0.0)
        adjacency.append(tuple(int(v) for v in np.flatnonzero(mask)))
    return NetworkGraph(n, tuple(adjacency), pos, float(side), float(radius), seed)


def generate_network(config: NetworkConfig) -> NetworkGraph:
    """Drop ``config.n`` nodes uniformly on ``[0, L]^2`` and connect by distance."""
    rng = np.random.default_rng(config.seed)
    pos = rng.uniform(0.0, config.side, size=(config.n, 2))
    return graph_from_positions(pos, config.radius, config.side, config.seed)


def mean_degree(graph: NetworkGraph) -> float:
    return sum(graph.degrees) / graph.n


def mean_degree_exact(graph: NetworkGraph) -> Fraction:
    return Fraction(sum(graph.degrees), graph.n)


def node_density(graph: NetworkGraph, config: NetworkConfig) -> float:
    """Nodes per unit area, ``n / L^2``."""
    return config.n / (config.side * config.side)


def isolated_nodes(graph: NetworkGraph) -> list[int]:
    return [u for u, d in enumerate(graph.degrees) if d == 0]
