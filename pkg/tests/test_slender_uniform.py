import dataclasses
import random
from fractions import Fraction

import pytest

from helpers import path3_instance, two_class_instance
from regpack.errors import NotSuperRegular
from regpack.graphs import LabeledGraph, ReducedGraph, blow_up
from regpack.params import ParamSet
from regpack.slender import SlenderInput, run_slender, validate_input
from regpack.uniform import refine_host, refine_pattern, run_uniform_embed, b_diagnostics


def make_params(**kw):
    base = dict(eps=0.05, k=1, Delta_R=1, C=2)
    base.update(kw)
    return ParamSet(**base)


def embed_two_class(n=60, d="9/10", k=1, seed=0, **param_kw):
    host, P, bmat, templates, kmat, rng = two_class_instance(n=n, d=d, k=k, seed=seed)
    params = make_params(k=k, **param_kw)
    res = run_uniform_embed(host, P.graph, bmat, templates[0], kmat,
                            [None, None], 1.0, params, rng)
    return host, P, templates[0], res


class TestSlenderDegenerate:
    def _complete_input(self, m=6):
        """Complete host, complete candidacy: every matching is valid."""
        q = 2
        R = ReducedGraph(2, [(0, 1)])
        Y = [[0, 1, 2], [3, 4, 5]] if m == 3 else [list(range(m)), list(range(m, 2 * m))]
        U = [list(range(m)), list(range(m, 2 * m))]
        G = LabeledGraph(2 * m, [(u, v) for u in U[0] for v in U[1]])
        H = LabeledGraph(2 * m)
        H_star = LabeledGraph(2 * m, [(Y[0][i], Y[1][i]) for i in range(m)])
        from regpack.graphs import BipartiteGraph
        A0 = []
        for i in range(2):
            B = BipartiteGraph(m, m, left_ids=Y[i], right_ids=U[i])
            B.adj = [(1 << m) - 1] * m
            A0.append(B)
        one = Fraction(1)
        zero = Fraction(0)
        params = make_params()
        return SlenderInput(
            R_star=R, Y_classes=Y, U_classes=U, G_host=G, P_host=G, H=H, H_star=H_star,
            A0=A0, schedule=[[0], [1]], d_mat=[[zero, one], [one, zero]],
            beta_mat=[[zero, one], [one, zero]], d0=1.0, params=params, C=0,
            max_class_degree=1)

    def test_empty_pattern_complete_host(self):
        s = self._complete_input(m=6)
        out = run_slender(s, random.Random(0), expected_w=2, check_certificates=False)
        # class-respecting bijection consistent with the full candidacy
        assert sorted(out.phi.keys()) == list(range(12))
        assert {out.phi[p] for p in s.Y_classes[0]} == set(s.U_classes[0])
        # with a complete patching graph every F row stays complete
        for Fj in out.F:
            assert all(row == (1 << Fj.nr) - 1 for row in Fj.adj)

    def test_strict_mode_on_complete_instance(self):
        s = self._complete_input(m=6)
        s.params = dataclasses.replace(s.params, strict_candidacy=True)
        out = run_slender(s, random.Random(1), expected_w=2, check_certificates=False)
        assert len(set(out.phi.values())) == 12

    def test_exact_sampler_path(self):
        s = self._complete_input(m=6)
        s.params = dataclasses.replace(s.params, exact_sampler=True)
        out = run_slender(s, random.Random(2), expected_w=2, check_certificates=False)
        assert len(set(out.phi.values())) == 12

    def test_density_ladder_exact_identity(self):
        # p(d, j, w) = d0 * product of the class-graph neighbour densities,
        # as exact rationals (checked internally; re-derived here)
        from regpack.coloring import round_schedule
        from regpack.uniform import expand_matrix
        host, P, bmat, templates, kmat, rng = two_class_instance(seed=21)
        params = make_params()
        Y, H_star, K = refine_pattern(templates[0], kmat, 2, params, rng)
        sched = round_schedule(templates[0].reduced, K, params.Delta_R)
        U, A0s = refine_host(host, P.graph, [None, None], Y, bmat, 1.0, params, rng)
        RK = ReducedGraph(2 * K, blow_up(templates[0].reduced, K).edges())
        dK = expand_matrix(host.densities, 2, K)
        bK = expand_matrix(bmat, 2, K)
        s = SlenderInput(
            R_star=RK, Y_classes=Y, U_classes=U, G_host=host.graph, P_host=P.graph,
            H=templates[0].graph, H_star=H_star, A0=A0s, schedule=sched,
            d_mat=dK, beta_mat=bK, d0=1.0,
            params=dataclasses.replace(params, eps=params.eps ** (1 / 3)), C=params.C)
        out = run_slender(s, rng, expected_w=params.w, check_certificates=False)
        for j in range(2 * K):
            want_d = Fraction(1)
            want_b = Fraction(1)
            for ell in RK.neighbors(j):
                want_d *= dK[j][ell]
                want_b *= bK[j][ell]
            assert out.p_host[j] == want_d
            assert out.p_patch[j] == want_b


class TestValidation:
    def test_valid_instance_passes(self):
        host, P, bmat, templates, kmat, rng = two_class_instance(seed=2)
        params = make_params()
        Y, H_star, K = refine_pattern(templates[0], kmat, 2, params, rng)
        from regpack.coloring import round_schedule
        sched = round_schedule(templates[0].reduced, K, params.Delta_R)
        U, A0s = refine_host(host, P.graph, [None, None], Y, bmat, 1.0, params, rng)
        from regpack.uniform import expand_matrix
        s = SlenderInput(
            R_star=ReducedGraph(2 * K, blow_up(templates[0].reduced, K).edges()),
            Y_classes=Y, U_classes=U, G_host=host.graph, P_host=P.graph,
            H=templates[0].graph, H_star=H_star, A0=A0s, schedule=sched,
            d_mat=expand_matrix(host.densities, 2, K),
            beta_mat=expand_matrix(bmat, 2, K), d0=1.0,
            params=dataclasses.replace(params, eps=params.eps ** (1 / 3)), C=params.C)
        assert validate_input(s, expected_w=params.w) == []

    def test_nonmatching_pair_flagged(self):
        s_obj = TestSlenderDegenerate()._complete_input(m=4)
        s_obj.H_star.add_edge(s_obj.Y_classes[0][0], s_obj.Y_classes[1][1])
        violations = validate_input(s_obj, expected_w=2, check_certificates=False)
        assert any("(V6)" in v for v in violations)

    def test_dependent_schedule_class_flagged(self):
        s_obj = TestSlenderDegenerate()._complete_input(m=4)
        s_obj.schedule = [[0, 1], []]
        violations = validate_input(s_obj, expected_w=2, check_certificates=False)
        assert any("(V2)" in v for v in violations)


class TestUniformEmbed:
    def test_two_class_matching_pattern(self):
        host, P, tpl, res = embed_two_class(seed=3)
        for x, y in tpl.graph.edges():
            assert host.graph.has_edge(res.phi[x], res.phi[y])
        assert len(set(res.phi.values())) == tpl.graph.n

    def test_k2_pattern(self):
        host, P, tpl, res = embed_two_class(n=100, d="4/5", k=2, seed=4)
        assert res.K == 9
        for x, y in tpl.graph.edges():
            assert host.graph.has_edge(res.phi[x], res.phi[y])

    def test_strict_candidacy_on_dense_instance(self):
        # the completion-charging rule is viable here: candidacy densities
        # behave like d^K with K=4, and 0.9^4 * 30 keeps degrees near 20
        host, P, bmat, templates, kmat, rng = two_class_instance(n=120, d="9/10", seed=31)
        params = make_params(strict_candidacy=True)
        res = run_uniform_embed(host, P.graph, bmat, templates[0], kmat,
                                [None, None], 1.0, params, rng)
        for x, y in templates[0].graph.edges():
            assert host.graph.has_edge(res.phi[x], res.phi[y])
        # strict hyperedges carry the completion partners: one per class-graph
        # neighbour of the vertex's refined class
        some_x = next(iter(res.phi))
        assert len(res.N[some_x]) >= 1

    def test_path3_pattern(self):
        host, P, bmat, templates, kmat, rng = path3_instance(seed=5)
        params = ParamSet(eps=0.05, k=1, Delta_R=2, C=2)
        res = run_uniform_embed(host, P.graph, bmat, templates[0], kmat,
                                [None] * 3, 1.0, params, rng)
        for x, y in templates[0].graph.edges():
            assert host.graph.has_edge(res.phi[x], res.phi[y])

    def test_partition_bookkeeping(self):
        host, P, tpl, res = embed_two_class(seed=6)
        K = res.K
        for j, (yj, uj) in enumerate(zip(res.Y_classes, res.U_classes)):
            assert len(yj) == len(uj)
            blk = j // K
            assert set(yj) <= set(tpl.partition.classes[blk])
            assert set(uj) <= set(host.partition.classes[blk])

    def test_candidacy_hypergraph_properties(self):
        host, P, tpl, res = embed_two_class(k=2, n=100, d="4/5", seed=7)
        yclass = {}
        for j, cls in enumerate(res.Y_classes):
            for p in cls:
                yclass[p] = j
        for x, nx in res.N.items():
            seen_classes = [yclass[y] for y in nx]
            assert len(seen_classes) == len(set(seen_classes))
            for y in tpl.graph.neighbors(x):
                assert y in nx
            for y in nx:
                assert x in res.N[y]

    def test_cb2_containment_exact(self):
        host, P, tpl, res = embed_two_class(seed=8)
        for j, Fj in enumerate(res.F):
            for a, pid in enumerate(Fj.left_ids):
                for b in range(Fj.nr):
                    if not Fj.has_edge(a, b):
                        continue
                    w = Fj.right_ids[b]
                    for ynb in res.N[pid]:
                        assert P.graph.has_edge(w, res.phi[ynb])

    def test_candidacy_respected_with_real_a0(self):
        import math
        host, P, bmat, templates, kmat, rng = two_class_instance(n=60, seed=9)
        from regpack.generators import certified_bipartite_host
        A0 = []
        for i in range(2):
            B = certified_bipartite_host(60, 0.7, 0.05, rng)
            B.left_ids = list(templates[0].partition.classes[i])
            B.right_ids = list(host.partition.classes[i])
            A0.append(B)
        params = make_params()
        res = run_uniform_embed(host, P.graph, bmat, templates[0], kmat, A0, 0.7, params, rng)
        for i, Ab in enumerate(A0):
            xpos = {p: a for a, p in enumerate(Ab.left_ids)}
            vpos = {v: b for b, v in enumerate(Ab.right_ids)}
            for p in templates[0].partition.classes[i]:
                assert Ab.has_edge(xpos[p], vpos[res.phi[p]])

    def test_trace_jsonl_roundtrip(self, tmp_path):
        import json as json_mod
        from regpack.slender import trace_to_jsonl
        host, P, bmat, templates, kmat, rng = two_class_instance(seed=22)
        params = make_params()
        trace: list[dict] = []
        run_uniform_embed(host, P.graph, bmat, templates[0], kmat,
                          [None, None], 1.0, params, rng, trace=trace)
        out = tmp_path / "trace.jsonl"
        trace_to_jsonl(trace, out)
        lines = out.read_text().strip().splitlines()
        assert len(lines) == len(trace) > 0
        assert all("round" in json_mod.loads(l) for l in lines)

    def test_w_exceeds_refined_round_count(self):
        # dropped-candidate bound from the trace: bounded by 4 K Delta_R xi m
        host, P, bmat, templates, kmat, rng = two_class_instance(seed=10)
        params = make_params()
        trace: list[dict] = []
        res = run_uniform_embed(host, P.graph, bmat, templates[0], kmat,
                                [None, None], 1.0, params, rng, trace=trace)
        m = max(len(c) for c in res.Y_classes)
        bound = 4 * res.K * params.Delta_R * params.xi_max * m
        for ev in trace:
            if "dropped_max_degree" in ev:
                assert ev["dropped_max_degree"] <= bound


class TestDiagnostics:
    def test_b_diagnostics_shapes(self):
        host, P, bmat, templates, kmat, rng = two_class_instance(n=48, seed=11)
        params = make_params()
        runs = [run_uniform_embed(host, P.graph, bmat, templates[0], kmat,
                                  [None, None], 1.0, params, rng) for _ in range(30)]
        v = host.partition.classes[0][0]
        nbrs = [w for w in host.graph.neighbors(v) if w in set(host.partition.classes[1])]
        S = nbrs[: int(0.4 * 48)]
        from regpack.graphs import LabeledGraph as LG
        empty_overlap = LG(host.graph.n)
        report = b_diagnostics(runs, templates[0], host, kmat, b1_probes=[(v, S)],
                               overlap_graph=empty_overlap,
                               qw_probes=[(list(templates[0].partition.classes[0]),
                                           list(host.partition.classes[0]))])
        assert report["runs"] == 30
        assert len(report["b1"]) == 1
        # empty avoid-graph: image overlap statistics are identically zero
        assert report["b4_overlap_mean"] == 0.0
        # phi maps X_0 onto V_0, so the Q=X_0, W=V_0 probe is exact
        assert report["b6"][0]["mean"] == len(host.partition.classes[0])

    def test_too_few_runs(self):
        from regpack.errors import TooFewRuns
        with pytest.raises(TooFewRuns):
            b_diagnostics([], None, None, None)


class TestRefineHost:
    def test_rejects_hopeless_candidacy(self):
        n = 200
        host, P, bmat, templates, kmat, rng = two_class_instance(n=n, seed=12)
        from regpack.graphs import BipartiteGraph
        # odd host vertices carry no candidacy at all, so the exceptional
        # set exceeds the K*eps*n cap
        A0 = []
        for i in range(2):
            B = BipartiteGraph(n, n,
                               left_ids=list(templates[0].partition.classes[i]),
                               right_ids=list(host.partition.classes[i]))
            full_half = sum(1 << b for b in range(0, n, 2))
            for a in range(n):
                B.adj[a] = full_half
            A0.append(B)
        params = make_params()
        Y, H_star, K = refine_pattern(templates[0], kmat, 2, params, rng)
        with pytest.raises(NotSuperRegular):
            refine_host(host, P.graph, A0, Y, bmat, 0.5, params, rng, cap=2)
