"""Packets, per-node XOR storage and Soliton degree distributions."""

from __future__ import annotations

import bisect
import enum
import hashlib
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .errors import ConfigError, IntegrityError

PAYLOAD_BITS = 64


class Flag(enum.IntEnum):
    INIT = 0
    UPDATE = 1


@dataclass(frozen=True)
class Packet:
    """One dissemination unit.

    For ``Flag.UPDATE`` packets the payload is the delta ``new ^ old``.
    """

    origin_id: int
    payload: int
    counter: int
    flag: Flag = Flag.INIT

    def __post_init__(self):
        if self.counter < 0:
            raise IntegrityError(f"negative counter on packet from {self.origin_id}")


def payload_for(seed: int, origin: int, bits: int = PAYLOAD_BITS) -> int:
    """Deterministic test-pattern payload for ``origin`` under ``seed``."""
    nbytes = (bits + 7) // 8
    h = hashlib.blake2b(f"{seed}:{origin}".encode(), digest_size=max(nbytes, 1))
    return int.from_bytes(h.digest(), "big") & ((1 << bits) - 1)


# ---------------------------------------------------------------------------
# degree distributions


class DistKind(str, enum.Enum):
    IDEAL = "ideal"
    ROBUST = "robust"


@dataclass(frozen=True)
class DegreeDistribution:
    kind: DistKind
    k: int
    c0: float
    delta: float
    pmf: tuple[float, ...]
    spike: Optional[int] = None
    R: Optional[float] = None
    cdf: tuple[float, ...] = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "cdf", tuple(itertools.accumulate(self.pmf)))

    def prob(self, i: int) -> float:
        return self.pmf[i - 1] if 1 <= i <= self.k else 0.0

    def mean(self) -> float:
        return math.fsum(i * p for i, p in enumerate(self.pmf, start=1))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def ideal_soliton_pmf(k: int) -> list[float]:
    return [1.0 / k] + [1.0 / (i * (i - 1)) for i in range(2, k + 1)]


def build_distribution(kind, k: int, c0: float = 0.1, delta: float = 0.5) -> DegreeDistribution:
    """Ideal or Robust Soliton distribution over degrees ``1..k``.

    For the robust variant ``R = c0 * ln(k/delta) * sqrt(k)`` and the spike sits
    at ``round(k/R)`` clamped to ``[1, k]``. A negative spike mass (``R < delta``)
    is clamped to zero.
    """
    kind = DistKind(kind)
    if int(k) != k or k < 1:
        raise ConfigError(f"support size k must be a positive integer, got {k!r}")
    k = int(k)
    ideal = ideal_soliton_pmf(k)
    if kind is DistKind.IDEAL:
        return DegreeDistribution(kind, k, c0, delta, tuple(ideal))

    if not 0.0 < delta < 1.0:
        raise ConfigError(f"delta must lie in (0, 1), got {delta!r}")
    if not c0 > 0.0:
        raise ConfigError(f"c0 must be > 0, got {c0!r}")
    R = c0 * math.log(k / delta) * math.sqrt(k)
    spike = min(max(_round_half_up(k / R), 1), k)
    tau = [0.0] * k
    for i in range(1, spike):
        tau[i - 1] = R / (i * k)
    tau[spike - 1] = max(R * math.log(R / delta) / k, 0.0)
    unnorm = [t + w for t, w in zip(tau, ideal)]
    beta = math.fsum(unnorm)
    return DegreeDistribution(kind, k, c0, delta, tuple(p / beta for p in unnorm), spike, R)


def sample_degree(dist: DegreeDistribution, rng) -> int:
    u = rng.random() * dist.cdf[-1]
    return min(bisect.bisect_right(dist.cdf, u), dist.k - 1) + 1


# ---------------------------------------------------------------------------
# node storage


@dataclass
class CodedSlot:
    accept_degree: int
    acc: int = 0
    ids: set[int] = field(default_factory=set)

    @property
    def full(self) -> bool:
        return len(self.ids) >= self.accept_degree


@dataclass
class NodeStore:
    """Storage of one node: raw own reading plus ``m - 1`` XOR slots.

    ``slot_of`` maps an absorbed origin to the index of its coded slot.
    """

    node_id: int
    own: int
    coded_slots: list[CodedSlot]
    seen_ids: set[int] = field(default_factory=set)
    slot_of: dict[int, int] = field(default_factory=dict)
    payload_bits: int = PAYLOAD_BITS
    open_slots: list[int] = field(init=False, repr=False)

    def __post_init__(self):
        self.seen_ids.add(self.node_id)
        self.refresh_open_slots()

    def refresh_open_slots(self) -> None:
        """Recompute the indices of coded slots that still have room."""
        self.open_slots = [j for j, s in enumerate(self.coded_slots) if len(s.ids) < s.accept_degree]

    @property
    def m(self) -> int:
        return len(self.coded_slots) + 1

    def occupancy(self) -> int:
        """Number of distinct foreign IDs held in coded slots."""
        return len(self.slot_of)

    def to_json(self) -> dict:
        width = (self.payload_bits + 3) // 4
        return {
            "node_id": self.node_id,
            "own": format(self.own, f"0{width}x"),
            "slots": [
                {"d_c": s.accept_degree, "ids": sorted(s.ids), "acc_hex": format(s.acc, f"0{width}x")}
                for s in self.coded_slots
            ],
        }

    @classmethod
    def from_json(cls, doc: Mapping, payload_bits: int = PAYLOAD_BITS) -> "NodeStore":
        slots = [CodedSlot(s["d_c"], int(s["acc_hex"], 16), set(s["ids"])) for s in doc["slots"]]
        store = cls(doc["node_id"], int(doc["own"], 16), slots, payload_bits=payload_bits)
        for j, s in enumerate(slots):
            for i in s.ids:
                store.slot_of[i] = j
                store.seen_ids.add(i)
        return store


def new_store(node_id: int, own: int, m: int, dist: DegreeDistribution, rng,
              payload_bits: int = PAYLOAD_BITS) -> NodeStore:
    """Fresh store with ``m - 1`` coded slots, each with its own drawn degree."""
    if m < 1:
        raise ConfigError(f"slot count m must be >= 1, got {m}")
    slots = [CodedSlot(sample_degree(dist, rng)) for _ in range(m - 1)]
    return NodeStore(node_id, own, slots, payload_bits=payload_bits)


def accept_decision(store: NodeStore, packet: Packet, first_hop: bool, rng) -> Optional[int]:
    """Pick a coded slot for ``packet`` or return None to reject it.

    The candidate is drawn uniformly among slots that are not yet full. A
    first-hop packet is always accepted into it; otherwise the packet is kept
    with probability ``1 / d_c`` of the candidate.
    """
    open_slots = store.open_slots
    if not open_slots:
        return None
    j = open_slots[int(rng.random() * len(open_slots))]
    if first_hop:
        return j
    if rng.random() <= 1.0 / store.coded_slots[j].accept_degree:
        return j
    return None


def absorb(store: NodeStore, packet: Packet, slot: int, check: bool = True) -> NodeStore:
    """XOR ``packet`` into coded slot ``slot`` and record its origin.

    With ``check=False`` a duplicate is XORed anyway; the origin then cancels
    out of both the accumulator and the ID set.
    """
    if packet.flag is not Flag.INIT:
        raise IntegrityError("only INIT packets are absorbed; use apply_update for deltas")
    s = store.coded_slots[slot]
    origin = packet.origin_id
    if check:
        if origin in s.ids:
            raise IntegrityError(f"node {store.node_id} absorbing origin {origin} twice into slot {slot}")
        if origin in store.slot_of:
            raise IntegrityError(f"node {store.node_id} already holds origin {origin} in another slot")
    s.acc ^= packet.payload
    if origin in s.ids:
        s.ids.discard(origin)
        store.slot_of.pop(origin, None)
        store.refresh_open_slots()
    else:
        s.ids.add(origin)
        store.slot_of[origin] = slot
        if len(s.ids) == s.accept_degree:
            store.open_slots.remove(slot)
    store.seen_ids.add(origin)
    return store


def apply_update(store: NodeStore, delta_packet: Packet) -> NodeStore:
    """Fold an UPDATE delta into whichever slot holds its origin.

    Nodes that never stored the origin ignore the packet. The origin itself
    refreshes its raw own slot.
    """
    if delta_packet.flag is not Flag.UPDATE:
        raise IntegrityError("apply_update expects an UPDATE packet")
    origin = delta_packet.origin_id
    if origin == store.node_id:
        store.own ^= delta_packet.payload
    j = store.slot_of.get(origin)
    if j is not None:
        store.coded_slots[j].acc ^= delta_packet.payload
    return store


def update_packet(origin: int, old: int, new: int, counter: int = 0) -> Packet:
    return Packet(origin, old ^ new, counter, Flag.UPDATE)


def ledger_violations(stores: Sequence[NodeStore], truth: Sequence[int]) -> list[tuple[int, int]]:
    """(node, slot) pairs whose accumulator disagrees with the XOR of its IDs.

    Slot ``-1`` denotes the own slot.
    """
    bad = []
    for st in stores:
        if st.own != truth[st.node_id]:
            bad.append((st.node_id, -1))
        for j, s in enumerate(st.coded_slots):
            expect = 0
            for i in s.ids:
                expect ^= truth[i]
            if expect != s.acc:
                bad.append((st.node_id, j))
            if not s.ids <= st.seen_ids or len(s.ids) > s.accept_degree:
                bad.append((st.node_id, j))
    return bad


def check_ledger(stores: Sequence[NodeStore], truth: Sequence[int]) -> None:
    bad = ledger_violations(stores, truth)
    if bad:
        raise IntegrityError(f"XOR ledger violated at {len(bad)} slot(s), first {bad[:5]}")


def dump_stores(stores: Iterable[NodeStore]) -> list[dict]:
    return [s.to_json() for s in stores]


def load_stores(docs: Iterable[Mapping], payload_bits: int = PAYLOAD_BITS) -> list[NodeStore]:
    return [NodeStore.from_json(d, payload_bits) for d in docs]
