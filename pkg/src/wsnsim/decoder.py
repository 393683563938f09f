"""Query-based recovery of all source payloads from a subset of stores.

Each queried node contributes its raw own reading plus one XOR equation per
non-empty coded slot. Equations are solved over GF(2): a peeling pass first
resolves degree-one rows, then Gaussian elimination on Python-int bitmasks
handles whatever is left.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .coding import NodeStore
from .errors import ConfigError, IntegrityError


@dataclass(frozen=True)
class QuerySet:
    node_ids: frozenset[int]

    @property
    def h(self) -> int:
        return len(self.node_ids)


@dataclass(frozen=True)
class Row:
    ids: frozenset[int]
    rhs: int

    @property
    def mask(self) -> int:
        m = 0
        for i in self.ids:
            m |= 1 << i
        return m


@dataclass
class LinearSystem:
    n: int
    rows: list[Row] = field(default_factory=list)


@dataclass(frozen=True)
class DecodeResult:
    """Outcome of :func:`solve`.

    ``values`` holds every origin that could be pinned down, even on failure.
    """

    n: int
    values: dict[int, int]
    rank: int
    peeled: int

    @property
    def success(self) -> bool:
        return len(self.values) == self.n

    @property
    def rank_deficit(self) -> int:
        return self.n - self.rank

    @property
    def unrecovered(self) -> frozenset[int]:
        return frozenset(range(self.n)) - self.values.keys()

    def __bool__(self) -> bool:
        return self.success


def select_query(n: int, h: int, rng) -> QuerySet:
    """Uniform random ``h``-subset of ``range(n)``."""
    if h < 0 or h > n:
        raise ConfigError(f"cannot query {h} of {n} nodes")
    return QuerySet(frozenset(rng.sample(range(n), h)))


def build_system(stores: Sequence[NodeStore], query: QuerySet | Iterable[int], n: int | None = None) -> LinearSystem:
    ids = query.node_ids if isinstance(query, QuerySet) else query
    system = LinearSystem(len(stores) if n is None else n)
    for u in sorted(ids):
        st = stores[u]
        system.rows.append(Row(frozenset((st.node_id,)), st.own))
        for s in st.coded_slots:
            if s.ids:
                system.rows.append(Row(frozenset(s.ids), s.acc))
    return system


def _peel(n: int, rows: list[list]) -> dict[int, int]:
    # rows are mutable [mask, rhs]; returns values resolved by degree-one rows
    holders: dict[int, list[int]] = {}
    for r, (mask, _) in enumerate(rows):
        m = mask
        while m:
            low = m & -m
            holders.setdefault(low.bit_length() - 1, []).append(r)
            m ^= low
    values: dict[int, int] = {}
    ripple = [r for r, (mask, _) in enumerate(rows) if mask and mask & (mask - 1) == 0]
    while ripple:
        r = ripple.pop()
        mask, rhs = rows[r]
        if mask == 0:
            if rhs:
                raise IntegrityError("contradictory equations: empty row with nonzero value")
            continue
        if mask & (mask - 1):
            continue
        var = mask.bit_length() - 1
        rows[r][0] = 0
        rows[r][1] = 0
        if var in values:
            if values[var] != rhs:
                raise IntegrityError(f"contradictory values for origin {var}")
            continue
        values[var] = rhs
        bit = 1 << var
        for other in holders.get(var, ()):
            om, orhs = rows[other]
            if om & bit:
                om ^= bit
                orhs ^= rhs
                rows[other][0] = om
                rows[other][1] = orhs
                if om == 0:
                    if orhs:
                        raise IntegrityError(f"contradictory equations after substituting origin {var}")
                elif om & (om - 1) == 0:
                    ripple.append(other)
    return values


def _eliminate(rows: Iterable[tuple[int, int]]) -> dict[int, list[int]]:
    """Reduced row-echelon basis keyed by each row's lowest set bit."""
    basis: dict[int, list[int]] = {}
    for mask, rhs in rows:
        while mask:
            low = mask & -mask
            piv = basis.get(low)
            if piv is None:
                basis[low] = [mask, rhs]
                break
            mask ^= piv[0]
            rhs ^= piv[1]
        else:
            if rhs:
                raise IntegrityError("contradictory equations: dependent row with nonzero value")
    # back-reduce from the highest pivot down so each row keeps only free bits
    for low in sorted(basis, reverse=True):
        row = basis[low]
        m = row[0] ^ low
        while m:
            bit = m & -m
            m ^= bit
            piv = basis.get(bit)
            if piv is not None:
                row[0] ^= piv[0]
                row[1] ^= piv[1]
    return basis


def solve(system: LinearSystem, peel: bool = True) -> DecodeResult:
    """Recover as many origins as the equations determine.

    Raises IntegrityError when the equations contradict each other.
    """
    n = system.n
    rows = [[r.mask, r.rhs] for r in system.rows]
    for mask, _ in rows:
        if mask >> n:
            raise ConfigError(f"row refers to an origin outside range({n})")
    values = _peel(n, rows) if peel else {}
    peeled = len(values)
    residue = [(m, v) for m, v in rows if m]
    basis = _eliminate(residue)
    for low, (mask, rhs) in basis.items():
        if mask == low:
            values[low.bit_length() - 1] = rhs
    return DecodeResult(n, values, peeled + len(basis), peeled)


def decode_trial(stores: Sequence[NodeStore], n: int, h: int, rng) -> bool:
    if h <= 0:
        return False
    query = select_query(n, h, rng)
    return solve(build_system(stores, query, n)).success
