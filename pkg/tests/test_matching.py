import itertools
import math
import random

import pytest
from scipy import stats

from regpack.errors import NoMatching, SideMismatch, SwitchIneligible, TooLarge
from regpack.generators import certified_bipartite_host
from regpack.graphs import BipartiteGraph
from regpack.matching import (
    ExactUniformSampler,
    Matching,
    apply_switch,
    count_matchings_exact,
    count_matchings_through,
    default_steps,
    find_perfect_matching,
    matching_diagnostics,
    sample_switch_chain,
    sample_switch_chain_many,
    sample_uniform_exact,
)


def complete_bipartite(n):
    return BipartiteGraph(n, n, [(u, v) for u in range(n) for v in range(n)])


def cycle6():
    # C_6 as a bipartite 3+3 graph
    return BipartiteGraph(3, 3, [(0, 0), (0, 1), (1, 1), (1, 2), (2, 2), (2, 0)])


def brute_force_count(B):
    n = B.nl
    return sum(
        1 for perm in itertools.permutations(range(n))
        if all(B.has_edge(u, perm[u]) for u in range(n))
    )


class TestFindPerfectMatching:
    def test_complete(self):
        m = find_perfect_matching(complete_bipartite(3))
        m.check(complete_bipartite(3))

    def test_hall_violation(self):
        B = BipartiteGraph(4, 4, [(0, 0), (1, 0), (2, 0), (3, 1), (3, 2)])
        assert find_perfect_matching(B) is None

    def test_seeded_random(self):
        rng = random.Random(0)
        B = BipartiteGraph(50, 50)
        for u in range(50):
            for v in range(50):
                if rng.random() < 0.3:
                    B.add_edge(u, v)
        m = find_perfect_matching(B)
        assert m is not None
        m.check(B)

    def test_side_mismatch(self):
        with pytest.raises(SideMismatch):
            find_perfect_matching(BipartiteGraph(2, 3))


class TestExactCount:
    def test_complete_factorial(self):
        assert count_matchings_exact(complete_bipartite(5)) == math.factorial(5)

    def test_cycle_has_two(self):
        assert count_matchings_exact(cycle6()) == 2

    def test_seeded_matches_bruteforce(self):
        rng = random.Random(4)
        B = BipartiteGraph(10, 10)
        for u in range(10):
            for v in range(10):
                if rng.random() < 0.6:
                    B.add_edge(u, v)
        assert count_matchings_exact(B) == brute_force_count(B)

    def test_cap(self):
        with pytest.raises(TooLarge):
            count_matchings_exact(BipartiteGraph(25, 25))

    def test_edge_counts_sum(self):
        B = cycle6()
        total = count_matchings_exact(B)
        for u in range(3):
            assert sum(count_matchings_through(B, u, v) for v in range(3)) == total


class TestExactSampler:
    def test_k22_balanced(self):
        B = complete_bipartite(2)
        rng = random.Random(1)
        hits = sum(1 for _ in range(10_000) if sample_uniform_exact(B, rng).sigma == [0, 1])
        # 3-sigma band around 1/2
        sigma = math.sqrt(0.25 / 10_000)
        assert abs(hits / 10_000 - 0.5) < 3 * sigma + 1e-12

    def test_unique_matching(self):
        B = BipartiteGraph(3, 3, [(0, 0), (1, 0), (1, 1), (2, 1), (2, 2)])
        assert count_matchings_exact(B) == 1
        for s in range(5):
            assert sample_uniform_exact(B, random.Random(s)).sigma == [0, 1, 2]

    def test_cycle_balanced(self):
        B = cycle6()
        rng = random.Random(2)
        sampler = ExactUniformSampler(B)
        hits = sum(1 for _ in range(4000) if sampler.sample(rng).sigma == [0, 1, 2])
        assert abs(hits / 4000 - 0.5) < 0.03

    def test_no_matching(self):
        B = BipartiteGraph(2, 2, [(0, 0), (1, 0)])
        with pytest.raises(NoMatching):
            sample_uniform_exact(B, random.Random(0))

    def test_chi_square_uniformity(self):
        # |M| = 24 on K_{4,4}; 1e5 exact samples must fit uniform at p > 0.01
        B = complete_bipartite(4)
        sampler = ExactUniformSampler(B)
        assert sampler.total() == 24
        rng = random.Random(7)
        counts: dict[tuple, int] = {}
        N = 100_000
        for _ in range(N):
            key = sampler.sample(rng).as_tuple()
            counts[key] = counts.get(key, 0) + 1
        observed = [counts.get(key, 0) for key in
                    (tuple(p) for p in itertools.permutations(range(4)))]
        chi2, p = stats.chisquare(observed)
        assert p > 0.01


class TestSwitch:
    def test_k33_rotation(self):
        B = complete_bipartite(3)
        sigma = Matching([0, 1, 2])
        out = apply_switch(B, sigma, 0, 1, 2)
        assert out.sigma == [2, 0, 1]
        out.check(B)

    def test_ineligible_on_cycle(self):
        B = cycle6()
        sigma = Matching([0, 1, 2])
        with pytest.raises(SwitchIneligible):
            apply_switch(B, sigma, 0, 1, 2)  # needs edge (1, sigma(0)) = (1,0), absent

    def test_inverse_rotation_recovers(self):
        rng = random.Random(3)
        for _ in range(50):
            B = BipartiteGraph(6, 6)
            for u in range(6):
                for v in range(6):
                    if rng.random() < 0.8:
                        B.add_edge(u, v)
            m = find_perfect_matching(B)
            if m is None:
                continue
            triple = rng.sample(range(6), 3)
            try:
                fwd = apply_switch(B, m, *triple)
            except SwitchIneligible:
                continue
            back = apply_switch(B, fwd, triple[0], triple[2], triple[1])
            assert back.sigma == m.sigma


class TestSwitchChain:
    def test_zero_steps_returns_start(self):
        B = complete_bipartite(5)
        start = find_perfect_matching(B)
        out = sample_switch_chain(B, 0, random.Random(0))
        assert out.sigma == start.sigma

    def test_k44_edge_frequencies(self):
        B = complete_bipartite(4)
        rng = random.Random(11)
        draws = sample_switch_chain_many(B, 10_000, default_steps(4), rng)
        for u in range(4):
            for v in range(4):
                freq = sum(1 for s in draws if s[u] == v) / len(draws)
                assert abs(freq - 0.25) < 0.02

    def test_validity_preserved(self):
        B = certified_bipartite_host(12, 0.7, 0.05, random.Random(5))
        out = sample_switch_chain(B, 2000, random.Random(6))
        out.check(B)

    def test_deterministic_per_seed(self):
        B = certified_bipartite_host(12, 0.7, 0.05, random.Random(5))
        a = sample_switch_chain(B, 500, random.Random(9)).sigma
        b = sample_switch_chain(B, 500, random.Random(9)).sigma
        assert a == b


class TestDiagnostics:
    def test_knn_symmetry(self):
        B = complete_bipartite(5)
        st_ = matching_diagnostics(B, "exact", 4000, random.Random(0))
        n = 5
        sigma = math.sqrt((1 / n) * (1 - 1 / n) / 4000)
        for (u, v), f in st_.edge_frequencies.items():
            assert abs(f - 1 / n) < 4 * sigma
        total = sum(st_.edge_frequencies.values())
        assert total == pytest.approx(n)

    def test_full_neighborhood_hits_always(self):
        B = cycle6()
        st_ = matching_diagnostics(B, "exact", 200, random.Random(1),
                                   test_sets={0: [0, 1]})
        assert st_.set_hit_rates["0"] == 1.0

    def test_m1_statistic_against_exact(self):
        # P[sigma(u) in S] ~ |S| / (d n) for S inside N(u)
        B = certified_bipartite_host(12, 0.7, 0.05, random.Random(3))
        u = 0
        nbrs = [v for v in range(12) if B.has_edge(u, v)]
        S = nbrs[:4]
        st_ = matching_diagnostics(B, "exact", 10_000, random.Random(2),
                                   test_sets={u: S})
        total = count_matchings_exact(B)
        exact = sum(count_matchings_through(B, u, v) for v in S) / total
        assert abs(st_.set_hit_rates["0"] - exact) < 0.02
        assert abs(st_.set_hit_rates["0"] - len(S) / (0.7 * 12)) < 0.15 * len(S) / (0.7 * 12)

    def test_m3_overlap_tail(self):
        B = complete_bipartite(8)
        sub = BipartiteGraph(8, 8, [(u, (u + 1) % 8) for u in range(8)])
        st_ = matching_diagnostics(B, "exact", 2000, random.Random(4),
                                   subgraph=sub, d=1.0, d_prime=1 / 8)
        assert st_.overlap_tail_fraction is not None
        assert st_.overlap_tail_fraction <= 0.05


class TestTheorem42Bounds:
    @pytest.mark.parametrize("n,d", [(10, 0.6), (12, 0.7), (14, 0.65)])
    def test_count_bounds_on_certified_instances(self, n, d):
        eps = 0.05
        B = certified_bipartite_host(n, d, eps, random.Random(n))
        cnt = count_matchings_exact(B)
        lo = (d - 2 * eps) ** n * math.factorial(n)
        hi = (d + 2 * eps) ** n * math.factorial(n)
        assert lo <= cnt <= hi
