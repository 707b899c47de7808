import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regpack.errors import BadParams
from regpack.graphs import (
    BipartiteGraph,
    LabeledGraph,
    PartitionedGraph,
    ReducedGraph,
    VertexPartition,
    blow_up,
    equitable_split,
    induced_bipartite,
    read_edge_list,
    read_partition,
    square,
    write_edge_list,
    write_partition,
)


def path_graph(n):
    return LabeledGraph(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n):
    return LabeledGraph(n, [(i, (i + 1) % n) for i in range(n)])


def complete_graph(n):
    return LabeledGraph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


class TestBlowUp:
    def test_k2_doubled_is_k22(self):
        R = ReducedGraph(2, [(0, 1)])
        RK = blow_up(R, 2)
        assert RK.n == 4
        assert RK.num_edges() == 4
        assert not RK.has_edge(0, 1) and not RK.has_edge(2, 3)
        for a in (0, 1):
            for b in (2, 3):
                assert RK.has_edge(a, b)

    def test_single_vertex(self):
        RK = blow_up(ReducedGraph(1), 5)
        assert RK.n == 5 and RK.num_edges() == 0

    def test_path_counts(self):
        # oracle: brute-force construction of the blow-up edge set
        R = ReducedGraph(3, [(0, 1), (1, 2)])
        K = 3
        RK = blow_up(R, K)
        expected = {
            frozenset((i * K + a, j * K + b))
            for i, j in R.edges() for a in range(K) for b in range(K)
        }
        assert {frozenset(e) for e in RK.edges()} == expected
        assert RK.num_edges() == K * K * R.num_edges() == 18
        assert RK.n == K * R.r

    def test_blocks_independent(self):
        R = ReducedGraph(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
        RK = blow_up(R, 4)
        for i in range(4):
            block = range(i * 4, (i + 1) * 4)
            for a in block:
                for b in block:
                    if a != b:
                        assert not RK.has_edge(a, b)


class TestSquare:
    def test_c5_is_k5(self):
        assert square(cycle_graph(5)) == complete_graph(5)

    def test_empty(self):
        G = LabeledGraph(7)
        assert square(G) == G

    def test_p4_oracle(self):
        # oracle: brute-force BFS distance matrix
        G = path_graph(4)
        S = square(G)
        def dist(G, u, v):
            from collections import deque
            dq, seen = deque([(u, 0)]), {u}
            while dq:
                x, d = dq.popleft()
                if x == v:
                    return d
                for y in G.neighbors(x):
                    if y not in seen:
                        seen.add(y)
                        dq.append((y, d + 1))
            return None
        for u in range(4):
            for v in range(u + 1, 4):
                assert S.has_edge(u, v) == (dist(G, u, v) in (1, 2))
        assert S.num_edges() == 5

    @given(st.integers(3, 16), st.random_module())
    @settings(max_examples=30, deadline=None)
    def test_square_contains_graph(self, n, _rm):
        rng = random.Random(n * 17 + 1)
        G = LabeledGraph(n)
        for u in range(n):
            for v in range(u + 1, n):
                if rng.random() < 0.25:
                    G.add_edge(u, v)
        S = square(G)
        for u, v in G.edges():
            assert S.has_edge(u, v)
        if G.max_degree() >= 1:
            assert S.max_degree() <= G.max_degree() * (G.max_degree() + 1)


class TestEquitableSplit:
    @pytest.mark.parametrize("n,parts,sizes", [(10, 3, [4, 3, 3]), (6, 6, [1] * 6), (7, 2, [4, 3])])
    def test_sizes(self, n, parts, sizes):
        out = equitable_split(range(n), parts)
        assert [len(c) for c in out] == sizes

    @given(st.integers(0, 40), st.integers(1, 12))
    @settings(max_examples=60, deadline=None)
    def test_partition_properties(self, n, parts):
        out = equitable_split(range(n), parts)
        flat = [v for c in out for v in c]
        assert sorted(flat) == list(range(n))
        lens = [len(c) for c in out]
        assert max(lens) - min(lens) <= 1

    def test_rejects_zero_parts(self):
        with pytest.raises(BadParams):
            equitable_split(range(4), 0)


class TestInducedBipartite:
    def _pg(self, G, classes, redges):
        part = VertexPartition.from_lists(classes, G.n)
        R = ReducedGraph(len(classes), redges)
        return PartitionedGraph(G, part, R)

    def test_k4_split(self):
        G = complete_graph(4)
        # drop within-class edges so classes are independent
        G.remove_edge(0, 1)
        G.remove_edge(2, 3)
        pg = self._pg(G, [[0, 1], [2, 3]], [(0, 1)])
        B = induced_bipartite(pg, 0, 1)
        assert B.num_edges() == 4
        assert B.left_ids == [0, 1] and B.right_ids == [2, 3]

    def test_no_cross_edges(self):
        pg = self._pg(LabeledGraph(4), [[0, 1], [2, 3]], [(0, 1)])
        assert induced_bipartite(pg, 0, 1).num_edges() == 0

    def test_seeded_count_matches_bruteforce(self):
        rng = random.Random(5)
        G = LabeledGraph(8)
        classes = [[0, 1, 2, 3], [4, 5, 6, 7]]
        for u in classes[0]:
            for v in classes[1]:
                if rng.random() < 0.5:
                    G.add_edge(u, v)
        pg = self._pg(G, classes, [(0, 1)])
        B = induced_bipartite(pg, 0, 1)
        brute = sum(1 for u in classes[0] for v in classes[1] if G.has_edge(u, v))
        assert B.num_edges() == brute

    def test_rejects_same_class(self):
        pg = self._pg(LabeledGraph(2), [[0], [1]], [])
        with pytest.raises(BadParams):
            induced_bipartite(pg, 1, 1)


class TestPartitionValidation:
    def test_catches_non_independent_class(self):
        G = LabeledGraph(4, [(0, 1)])
        pg = PartitionedGraph(G, VertexPartition.from_lists([[0, 1], [2, 3]]), ReducedGraph(2, [(0, 1)]))
        assert any("independent" in e for e in pg.validate())

    def test_catches_off_reduced_edges(self):
        G = LabeledGraph(4, [(0, 2)])
        pg = PartitionedGraph(G, VertexPartition.from_lists([[0, 1], [2, 3]]), ReducedGraph(2))
        assert any("not in R" in e for e in pg.validate())


def test_edge_list_roundtrip(tmp_path):
    G = cycle_graph(9)
    p = tmp_path / "g.txt"
    write_edge_list(G, p)
    assert read_edge_list(p) == G


def test_partition_roundtrip(tmp_path):
    part = VertexPartition.from_lists([[0, 2], [1, 3]])
    p = tmp_path / "p.json"
    write_partition(part, p)
    assert read_partition(p, 4).classes == part.classes


def test_bipartite_subgraph_index_maps():
    B = BipartiteGraph(3, 3, [(0, 0), (1, 1), (2, 2), (0, 2)])
    S = B.subgraph([0, 2], [2, 0])
    assert S.left_ids == [0, 2] and S.right_ids == [2, 0]
    assert S.has_edge(0, 0)      # old (0,2)
    assert S.has_edge(0, 1)      # old (0,0)
    assert S.has_edge(1, 0)      # old (2,2)
    assert not S.has_edge(1, 1)
