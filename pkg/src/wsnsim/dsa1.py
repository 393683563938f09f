"""Flooding-based dissemination with degree-derived hop counters.

Every source floods its packet to all of its neighbours, which accept it with
probability one. Each copy then walks onward one hop per round: a relay hands
the packet to a single neighbour it does not yet know to hold that origin
(any neighbour if there is none), and the receiver decrements the counter.
First-time receivers keep the packet with probability ``1/d_c`` of a free
slot. Copies stop once the counter reaches zero.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .coding import DegreeDistribution, NodeStore, Packet, accept_decision, absorb, apply_update, new_store, update_packet
from .errors import ConfigError, IntegrityError
from .netgraph import NetworkGraph

TraceFn = Callable[[dict], None]

# "memory": a relay avoids neighbours it has itself exchanged the origin with.
# "fresh": a relay avoids every neighbour that already holds the origin.
NEXT_HOP_RULES = ("memory", "fresh")
# "unicast": each relay step goes to one neighbour.
# "multicast": a node's first relay of an origin goes to all fresh neighbours.
RELAY_MODES = ("unicast", "multicast")


def init_counter_dsa1(n: int, degree: int) -> int:
    """Hop budget ``floor(n / d)``, never below one."""
    if degree < 1:
        raise ConfigError("a source without neighbours cannot flood its packet")
    return max(1, n // degree)


@dataclass(frozen=True)
class DisseminationReport:
    tx_count: int
    per_origin_tx: tuple[int, ...]
    per_origin_depth: tuple[int, ...]
    counters: tuple[int, ...]
    rounds: int
    occupancy: tuple[int, ...]
    stores: tuple[NodeStore, ...] = ()

    @property
    def n(self) -> int:
        return len(self.per_origin_tx)

    def mean_tx_per_origin(self) -> float:
        return self.tx_count / self.n if self.n else 0.0

    def mean_depth(self) -> float:
        return sum(self.per_origin_depth) / self.n if self.n else 0.0

    def mean_occupancy(self) -> float:
        return sum(self.occupancy) / len(self.occupancy) if self.occupancy else 0.0


class SimState:
    """Mutable state of one dissemination run.

    Attributes:
        stores: One NodeStore per node.
        queues: Per-node FIFO of packets waiting to be relayed next round.
        per_origin_tx: Transmissions spent on each origin's packet.
        per_origin_depth: Largest hop count any copy of an origin reached.
        known: ``known[u][origin]`` is the set of neighbours ``u`` has seen
            holding ``origin`` (it sent to them or received from them).
    """

    def __init__(self, graph: NetworkGraph, payloads: Sequence[int], m: int,
                 dist: DegreeDistribution, rng, strict_discard: bool = False,
                 trace: Optional[TraceFn] = None, payload_bits: int = 64,
                 next_hop: str = "memory", relay: str = "unicast"):
        n = graph.n
        if len(payloads) != n:
            raise ConfigError(f"expected {n} payloads, got {len(payloads)}")
        self.graph = graph
        self.payloads = list(payloads)
        self.stores = [new_store(u, payloads[u], m, dist, rng, payload_bits) for u in range(n)]
        self.queues: list[deque[Packet]] = [deque() for _ in range(n)]
        self.round = 0
        self.tx_count = 0
        self.per_origin_tx = [0] * n
        self.per_origin_depth = [0] * n
        self.counters = [0] * n
        self.known: list[dict[int, set[int]]] = [dict() for _ in range(n)]
        self.strict_discard = strict_discard
        self.trace = trace
        if next_hop not in NEXT_HOP_RULES:
            raise ConfigError(f"unknown next-hop rule {next_hop!r}")
        if relay not in RELAY_MODES:
            raise ConfigError(f"unknown relay mode {relay!r}")
        self.next_hop = next_hop
        self.relay = relay
        self.relayed: list[set[int]] = [set() for _ in range(n)]

    def _deliver(self, u: int, v: int, pkt: Packet, first_hop: bool, rng) -> None:
        origin = pkt.origin_id
        self.tx_count += 1
        self.per_origin_tx[origin] += 1
        self.known[u].setdefault(origin, set()).add(v)
        self.known[v].setdefault(origin, set()).add(u)
        remaining = pkt.counter - 1
        depth = self.counters[origin] - remaining
        if depth > self.per_origin_depth[origin]:
            self.per_origin_depth[origin] = depth

        store = self.stores[v]
        accepted = False
        if origin not in store.seen_ids:
            store.seen_ids.add(origin)
            j = accept_decision(store, pkt, first_hop, rng)
            if j is not None:
                absorb(store, pkt, j)
                accepted = True
            forward = remaining >= 1
        else:
            forward = remaining >= 1 and not self.strict_discard
        if forward:
            self.queues[v].append(Packet(origin, pkt.payload, remaining, pkt.flag))
        if self.trace is not None:
            self.trace({"round": self.round, "from": u, "to": v, "origin": origin,
                        "counter": pkt.counter, "accepted": accepted})

    def _pick_next_hop(self, u: int, origin: int, rng) -> int:
        nbrs = self.graph.adjacency[u]
        if self.next_hop == "fresh":
            stores = self.stores
            eligible = [w for w in nbrs if origin not in stores[w].seen_ids]
        else:
            kn = self.known[u].get(origin)
            eligible = [w for w in nbrs if w not in kn] if kn else nbrs
        if not eligible:
            eligible = nbrs
        return eligible[int(rng.random() * len(eligible))]


def initialize_sources(state: SimState, rng, counters: Optional[Sequence[int]] = None) -> SimState:
    """Every node floods its INIT packet to all neighbours.

    ``counters`` defaults to the DSA-I rule ``floor(n / d(u))``.
    """
    g = state.graph
    if counters is None:
        counters = [init_counter_dsa1(g.n, g.degree(u)) for u in range(g.n)]
    for u, c in enumerate(counters):
        if c < 1:
            raise ConfigError(f"counter for node {u} must be >= 1, got {c}")
        if g.degree(u) == 0:
            raise ConfigError(f"node {u} is isolated")
    state.counters = list(counters)
    # floods happen concurrently; a random order keeps slot capacity from
    # systematically favouring low node IDs
    order = list(range(g.n))
    rng.shuffle(order)
    for s in order:
        pkt = Packet(s, state.payloads[s], state.counters[s])
        for v in g.adjacency[s]:
            state._deliver(s, v, pkt, True, rng)
    return state


def run_rounds(state: SimState, rng) -> DisseminationReport:
    """Relay queued packets in synchronous rounds until every queue drains."""
    n = state.graph.n
    guard = 10 * n * max(state.counters, default=1)
    while any(state.queues):
        state.round += 1
        if state.round > guard:
            raise IntegrityError(f"dissemination did not terminate within {guard} rounds")
        sends = []
        for u in range(n):
            q = state.queues[u]
            if not q:
                continue
            state.queues[u] = deque()
            for pkt in q:
                origin = pkt.origin_id
                if state.relay == "multicast" and origin not in state.relayed[u]:
                    state.relayed[u].add(origin)
                    targets = [w for w in state.graph.adjacency[u]
                               if origin not in state.stores[w].seen_ids]
                    if targets:
                        sends.extend((u, w, pkt) for w in targets)
                        continue
                sends.append((u, state._pick_next_hop(u, origin, rng), pkt))
        for u, v, pkt in sends:
            state._deliver(u, v, pkt, False, rng)
    return dissemination_report(state)


def dissemination_report(state: SimState) -> DisseminationReport:
    return DisseminationReport(
        tx_count=state.tx_count,
        per_origin_tx=tuple(state.per_origin_tx),
        per_origin_depth=tuple(state.per_origin_depth),
        counters=tuple(state.counters),
        rounds=state.round,
        occupancy=tuple(s.occupancy() for s in state.stores),
        stores=tuple(state.stores),
    )


def run_dsa1(graph: NetworkGraph, payloads: Sequence[int], m: int, dist: DegreeDistribution,
             rng, counters: Optional[Sequence[int]] = None, **engine) -> DisseminationReport:
    """Full DSA-I run; ``engine`` is forwarded to :class:`SimState`."""
    state = SimState(graph, payloads, m, dist, rng, **engine)
    initialize_sources(state, rng, counters)
    return run_rounds(state, rng)


def propagate_update(graph: NetworkGraph, stores: Sequence[NodeStore], origin: int,
                     old: int, new: int) -> int:
    """Flood an UPDATE delta from ``origin`` through its connected component.

    Each reached node rebroadcasts once and folds the delta into its store if
    it holds ``origin``. Returns the number of transmissions used.
    """
    pkt = update_packet(origin, old, new)
    seen = {origin}
    frontier = deque([origin])
    apply_update(stores[origin], pkt)
    tx = 0
    while frontier:
        u = frontier.popleft()
        for v in graph.adjacency[u]:
            tx += 1
            if v not in seen:
                seen.add(v)
                apply_update(stores[v], pkt)
                frontier.append(v)
    return tx


class JsonlTrace:
    """Collects trace events and writes them as newline-delimited JSON."""

    def __init__(self):
        self.events: list[dict] = []

    def __call__(self, event: dict) -> None:
        self.events.append(event)

    def dumps(self) -> str:
        return "".join(json.dumps(e, sort_keys=True) + "\n" for e in self.events)

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())
