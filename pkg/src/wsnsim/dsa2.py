"""Counter inference from local degree information, without knowing n.

A node ``u`` asks each neighbour ``v`` for its external degree ``b_v``, the
number of ``v``'s neighbours outside ``N(u) + {u}``, and sets its hop budget
to ``max(1, floor(c_u * sum(b_v) / d(u)))``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .coding import DegreeDistribution
from .dsa1 import DisseminationReport, SimState, initialize_sources, run_rounds
from .errors import ConfigError


@dataclass(frozen=True)
class InferenceResult:
    node_id: int
    degree: int
    external_degrees: dict[int, int]
    c_u: float
    counter: int

    @property
    def sum_b(self) -> int:
        return sum(self.external_degrees.values())


def external_degree(graph, u: int, v: int) -> int:
    """``|N(v) \\ (N(u) + {u})|`` for a neighbour ``v`` of ``u``."""
    nu = graph.neighbors(u)
    if v not in nu:
        raise ConfigError(f"node {v} is not a neighbour of {u}")
    closed = set(nu)
    closed.add(u)
    return sum(1 for w in graph.neighbors(v) if w not in closed)


def _chain_sum(graph, v: int, closed: set[int], max_steps: int) -> int:
    # v has exactly one external neighbour: follow the chain outward until a
    # node branches (or dead-ends), then use the degrees beyond it.
    visited = set(closed)
    visited.add(v)
    cur = v
    for _ in range(max_steps):
        ext = [w for w in graph.neighbors(cur) if w not in visited]
        if len(ext) != 1:
            return sum(graph.degree(w) for w in ext)
        cur = ext[0]
        visited.add(cur)
    return 0


def infer_counter(graph, u: int, c_u: float, max_steps: Optional[int] = None) -> InferenceResult:
    """Run the inference phase at ``u``.

    ``graph`` only needs ``neighbors(x)`` and ``degree(x)``. ``max_steps``
    caps the chain walk through degree-one neighbours; without it the walk
    stops only at a branch or a dead end, which always happens in a finite
    graph because visited nodes are excluded.
    """
    nu = graph.neighbors(u)
    d = len(nu)
    if d < 1:
        raise ConfigError(f"node {u} has no neighbours")
    closed = set(nu)
    closed.add(u)
    b = {}
    for v in nu:
        bv = sum(1 for w in graph.neighbors(v) if w not in closed)
        if bv == 1:
            steps = max_steps if max_steps is not None else 1 << 30
            bv = _chain_sum(graph, v, closed, steps)
        b[v] = bv
    # tolerance guards floor() against c_u rounding just below an integer
    counter = max(1, math.floor(c_u * sum(b.values()) / d + 1e-9))
    return InferenceResult(u, d, b, c_u, counter)


def choose_c_u(graph, u: int, C: float = 1.0) -> float:
    """``C * mean_local / d(u)`` where the mean is over ``N(u) + {u}``."""
    if not C > 0:
        raise ConfigError(f"C must be > 0, got {C!r}")
    nu = graph.neighbors(u)
    if not nu:
        raise ConfigError(f"node {u} has no neighbours")
    local = [graph.degree(v) for v in nu] + [len(nu)]
    return C * (sum(local) / len(local)) / len(nu)


def infer_all(graph, C: float = 1.0) -> list[InferenceResult]:
    n = graph.n
    return [infer_counter(graph, u, choose_c_u(graph, u, C), max_steps=n) for u in range(n)]


def run_dsa2(graph, payloads: Sequence[int], m: int, dist: DegreeDistribution, C: float, rng,
             **engine) -> DisseminationReport:
    counters = [r.counter for r in infer_all(graph, C)]
    state = SimState(graph, payloads, m, dist, rng, **engine)
    initialize_sources(state, rng, counters)
    return run_rounds(state, rng)


def inference_csv(results: Sequence[InferenceResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["node_id", "degree", "sum_b_v", "c_u", "counter"])
    for r in results:
        w.writerow([r.node_id, r.degree, r.sum_b, repr(r.c_u), r.counter])
    return buf.getvalue()
