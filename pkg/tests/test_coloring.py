import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regpack.coloring import check_schedule, hs_equitable_coloring, round_schedule
from regpack.errors import DegreeTooHigh
from regpack.graphs import LabeledGraph, ReducedGraph, blow_up, mask_of


def cycle(n):
    return LabeledGraph(n, [(i, (i + 1) % n) for i in range(n)])


def random_graph_max_degree(n, dmax, seed, p=0.5):
    rng = random.Random(seed)
    G = LabeledGraph(n)
    deg = [0] * n
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    rng.shuffle(pairs)
    for u, v in pairs:
        if deg[u] < dmax and deg[v] < dmax and rng.random() < p:
            G.add_edge(u, v)
            deg[u] += 1
            deg[v] += 1
    return G


class TestEquitableColoring:
    def test_c5_three_classes(self):
        col = hs_equitable_coloring(cycle(5), 2, random.Random(0))
        col.check(cycle(5))
        assert sorted(col.sizes(), reverse=True) == [2, 2, 1]

    def test_empty_graph(self):
        col = hs_equitable_coloring(LabeledGraph(9), 2, random.Random(0))
        assert sorted(col.sizes()) == [3, 3, 3]

    def test_random_delta3(self):
        G = random_graph_max_degree(100, 3, seed=1)
        col = hs_equitable_coloring(G, 3, random.Random(0))
        col.check(G)
        assert col.k == 4
        assert col.sizes() == [25, 25, 25, 25]

    def test_degree_too_high(self):
        with pytest.raises(DegreeTooHigh):
            hs_equitable_coloring(cycle(4), 1)

    @given(st.integers(2, 60), st.integers(1, 5), st.integers(0, 10_000))
    @settings(max_examples=60, deadline=None)
    def test_property_independence_and_balance(self, n, dmax, seed):
        G = random_graph_max_degree(n, dmax, seed)
        col = hs_equitable_coloring(G, max(dmax, G.max_degree()), random.Random(seed))
        col.check(G)


class TestRoundSchedule:
    def test_single_edge_k1(self):
        R = ReducedGraph(2, [(0, 1)])
        sched = round_schedule(R, 1, 1)
        assert len(sched) == 2
        nonempty = [c for c in sched if c]
        assert sorted(map(tuple, nonempty)) == [(0,), (1,)]

    def test_block_scatter(self):
        # every round class meets each block at most once
        R = ReducedGraph(3, [(0, 1), (1, 2)])
        K = 4
        sched = round_schedule(R, K, 2)
        for cls in sched:
            blocks = [v // K for v in cls]
            assert len(blocks) == len(set(blocks))

    def test_c4_schedule_checks(self):
        R = ReducedGraph(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
        K = 8
        sched = round_schedule(R, K, 2)
        assert check_schedule(R, K, 2, sched) == []

    def test_bipartite_degree_bound_exhaustive(self):
        R = ReducedGraph(2, [(0, 1)])
        K = 4
        sched = round_schedule(R, K, 1)
        RK = blow_up(R, K)
        for a, ca in enumerate(sched):
            for b, cb in enumerate(sched):
                if a == b:
                    continue
                mb = mask_of(cb)
                for v in ca:
                    assert bin(RK.adj[v] & mb).count("1") <= 1

    def test_empty_classes_retained(self):
        R = ReducedGraph(2, [(0, 1)])
        sched = round_schedule(R, 2, 1)
        assert len(sched) == (2 * 1) ** 2 * 2
        assert any(not c for c in sched)
