import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force
from wsnsim.coding import CodedSlot, NodeStore, build_distribution, payload_for
from wsnsim.decoder import LinearSystem, QuerySet, Row, build_system, decode_trial, select_query, solve
from wsnsim.dsa1 import run_dsa1
from wsnsim.errors import ConfigError, IntegrityError
from wsnsim.harness import sample_network
from wsnsim.netgraph import graph_from_edges


def system(n, rows):
    return LinearSystem(n, [Row(frozenset(ids), rhs) for ids, rhs in rows])


def random_rows(n, count, rng, bits=64, truth=None):
    truth = truth or [rng.getrandbits(bits) for _ in range(n)]
    rows = []
    for _ in range(count):
        ids = rng.sample(range(n), rng.randint(1, n))
        rhs = 0
        for i in ids:
            rhs ^= truth[i]
        rows.append((ids, rhs))
    return truth, rows


def test_select_query_bounds():
    rng = random.Random(0)
    assert select_query(7, 7, rng).node_ids == frozenset(range(7))
    assert select_query(7, 1, rng).h == 1
    assert select_query(7, 0, rng).h == 0
    with pytest.raises(ConfigError):
        select_query(7, 8, rng)
    with pytest.raises(ConfigError):
        select_query(7, -1, rng)


def test_select_query_uniform_inclusion():
    n, h, N = 50, 10, 10**5
    rng = random.Random(42)
    counts = [0] * n
    for _ in range(N):
        for i in select_query(n, h, rng).node_ids:
            counts[i] += 1
    p = h / n
    sigma = math.sqrt(p * (1 - p) / N)
    assert all(abs(c / N - p) <= 3 * sigma for c in counts)


def test_query_all_with_empty_slots_gives_identity():
    stores = [NodeStore(i, 10 + i, [CodedSlot(2)]) for i in range(4)]
    sysm = build_system(stores, QuerySet(frozenset(range(4))))
    assert [(set(r.ids), r.rhs) for r in sysm.rows] == [({i}, 10 + i) for i in range(4)]
    assert solve(sysm).values == {i: 10 + i for i in range(4)}


def test_k3_single_query():
    g = graph_from_edges(3, [(0, 1), (1, 2), (0, 2)])
    pay = [payload_for(5, i) for i in range(3)]
    # unit slot degrees put each neighbour in its own slot
    rep = run_dsa1(g, pay, 3, build_distribution("ideal", 1), random.Random(0))
    for u in range(3):
        sysm = build_system(rep.stores, [u], 3)
        assert {frozenset(r.ids) for r in sysm.rows} == {frozenset({i}) for i in range(3)}
        assert decode_trial(rep.stores, 3, 1, random.Random(u))
        assert solve(sysm).values == dict(enumerate(pay))


def test_empty_query_fails():
    stores = [NodeStore(i, i, []) for i in range(3)]
    sysm = build_system(stores, [], 3)
    assert sysm.rows == []
    res = solve(sysm)
    assert not res and res.rank_deficit == 3 and res.unrecovered == {0, 1, 2}
    assert decode_trial(stores, 3, 0, random.Random(0)) is False


def test_hand_elimination():
    x = [0b101, 0b011, 0b110]
    res = solve(system(3, [({0}, x[0]), ({0, 1}, x[0] ^ x[1]), ({1, 2}, x[1] ^ x[2])]))
    assert res.success and res.values == dict(enumerate(x))


def test_missing_unknown():
    res = solve(system(3, [({0}, 1), ({1}, 2)]))
    assert not res.success and res.rank_deficit == 1 and res.unrecovered == {2}
    assert res.values == {0: 1, 1: 2}


def test_needs_elimination_beyond_peeling():
    x = [3, 5, 9]
    rows = [({0, 1}, x[0] ^ x[1]), ({1, 2}, x[1] ^ x[2]), ({0, 1, 2}, x[0] ^ x[1] ^ x[2])]
    res = solve(system(3, rows))
    assert res.success and res.peeled == 0 and res.values == dict(enumerate(x))


@pytest.mark.parametrize("peel", [True, False])
def test_contradiction_raises(peel):
    with pytest.raises(IntegrityError):
        solve(system(2, [({0}, 1), ({0}, 2)]), peel=peel)
    with pytest.raises(IntegrityError):
        solve(system(3, [({0, 1}, 1), ({1, 2}, 2), ({0, 2}, 0)]), peel=peel)


def test_out_of_range_row():
    with pytest.raises(ConfigError):
        solve(system(2, [({5}, 1)]))


def test_query_all_after_dissemination():
    for seed in range(20):
        g = sample_network(30, 2.0, 0.6, seed, (0,))
        pay = [payload_for(seed, i) for i in range(30)]
        rep = run_dsa1(g, pay, 4, build_distribution("ideal", 30), random.Random(seed))
        assert decode_trial(rep.stores, 30, 30, random.Random(seed))


def test_rows_match_truth_after_dissemination():
    g = sample_network(40, 2.0, 0.7, 3, (0,))
    pay = [payload_for(3, i) for i in range(40)]
    rep = run_dsa1(g, pay, 5, build_distribution("ideal", 40), random.Random(3))
    sysm = build_system(rep.stores, select_query(40, 15, random.Random(1)))
    for r in sysm.rows:
        acc = 0
        for i in r.ids:
            acc ^= pay[i]
        assert acc == r.rhs


@settings(max_examples=200, deadline=None)
@given(n=st.integers(1, 10), count=st.integers(0, 14), seed=st.integers(0, 2**32))
def test_matches_brute_force(n, count, seed):
    rng = random.Random(seed)
    truth, rows = random_rows(n, count, rng, bits=3)
    res = solve(system(n, rows))
    assert res.values == brute_force(n, rows, 3)
    assert all(truth[i] == v for i, v in res.values.items())


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 200), extra=st.integers(0, 60), seed=st.integers(0, 2**32))
def test_peeling_agrees_with_elimination(n, extra, seed):
    rng = random.Random(seed)
    truth = [rng.getrandbits(64) for _ in range(n)]
    rows = [([i], truth[i]) for i in rng.sample(range(n), rng.randint(0, n))]
    rows += random_rows(n, extra, rng, truth=truth)[1]
    rng.shuffle(rows)
    a = solve(system(n, rows), peel=True)
    b = solve(system(n, rows), peel=False)
    assert a.values == b.values and a.rank == b.rank


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 12), count=st.integers(0, 20), more=st.integers(1, 5), seed=st.integers(0, 2**32))
def test_adding_rows_never_hurts(n, count, more, seed):
    rng = random.Random(seed)
    truth, rows = random_rows(n, count, rng)
    _, extra = random_rows(n, more, rng, truth=truth)
    before = solve(system(n, rows))
    after = solve(system(n, rows + extra))
    assert before.values.items() <= after.values.items()
    assert after.rank >= before.rank
