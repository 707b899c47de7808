"""Preprocessing pipeline that turns a near-equiregular pattern into a
valid slender instance and runs it.

Step 1 splits every pattern class into K = (k+1)^2 * Delta_R classes
independent in the pattern square, so each refined pair is a matching.
Step 2 completes those matchings to full size.  Step 3 refines the host
classes at matching sizes, routing the few vertices whose initial
candidacy degrees stray outside the (d0 +- 2 eps) window into classes
where they keep enough candidates, and trims the candidacy graph to the
window.  Step 4 runs the slender algorithm at the sharpened tolerance
eps^(1/3).
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .coloring import hs_equitable_coloring, round_schedule
from .errors import (
    EmbedFailure,
    FailureType1,
    NotNearEquiregular,
    RetriesExhausted,
    TooFewRuns,
)
from .graphs import (
    BipartiteGraph,
    LabeledGraph,
    PartitionedGraph,
    ReducedGraph,
    iter_bits,
    mask_of,
    popcount,
    square,
)
from .params import ParamSet
from .regularity import check_near_equiregular, pipeline_certificate, super_regularity_certificate
from .slender import SlenderInput, run_slender
from .errors import NotSuperRegular


@dataclass
class UniformEmbedResult:
    phi: dict[int, int]
    Y_classes: list[list[int]]
    U_classes: list[list[int]]
    F: list[BipartiteGraph]
    N: dict[int, tuple[int, ...]]
    K: int
    attempts: int = 1
    trace: list[dict] = field(default_factory=list)


def refine_pattern(H: PartitionedGraph, kmat, C: int, params: ParamSet, rng):
    """Steps 1-2: split classes via the pattern square, complete the matchings.

    Returns (Y_classes, H_star, K); Y_classes come in per-block order,
    larger classes first inside each block.
    """
    ok, violations = check_near_equiregular(H, kmat, C)
    if not ok:
        raise NotNearEquiregular("; ".join(violations[:4]))
    K = params.K
    H2 = square(H.graph)
    Y_classes: list[list[int]] = []
    for i, cls in enumerate(H.partition.classes):
        sub = LabeledGraph(len(cls))
        pos = {p: a for a, p in enumerate(cls)}
        cmask = mask_of(cls)
        for p in cls:
            for qn in iter_bits(H2.adj[p] & cmask):
                if qn > p:
                    sub.add_edge(pos[p], pos[qn])
        col = hs_equitable_coloring(sub, K - 1, rng)
        blocks = sorted(col.classes, key=lambda c: (-len(c), c))
        Y_classes.extend([sorted(cls[a] for a in blk) for blk in blocks])

    H_star = H.graph.copy()
    yclass = {}
    for j, cls in enumerate(Y_classes):
        for p in cls:
            yclass[p] = j
    RK_edges = [(a, b) for i, j in H.reduced.edges()
                for a in range(i * K, (i + 1) * K) for b in range(j * K, (j + 1) * K)]
    for a, b in RK_edges:
        ya, yb = Y_classes[a], Y_classes[b]
        matched_a = set()
        matched_b = set()
        for p in ya:
            for qn in H.graph.neighbors(p):
                if yclass.get(qn) == b:
                    matched_a.add(p)
                    matched_b.add(qn)
        free_a = [p for p in ya if p not in matched_a]
        free_b = [qn for qn in yb if qn not in matched_b]
        want = min(len(ya), len(yb)) - min(len(matched_a), len(matched_b))
        for p, qn in list(zip(free_a, free_b))[:max(want, 0)]:
            H_star.add_edge(p, qn)
    return Y_classes, H_star, K


def refine_host(G: PartitionedGraph, P_host: LabeledGraph, A0: list[BipartiteGraph | None],
                Y_classes: list[list[int]], beta_mat, d0: float, params: ParamSet, rng,
                cap: int | None = None):
    """Step 3: refine host classes to the pattern-class sizes and trim A0.

    Returns (U_classes, A0_star) where A0_star[j] is the candidacy pair
    on (Y_j, U_j).  Raises FailureType1 when the refined certificates
    keep failing.
    """
    K = params.K
    r = G.reduced.r
    eps = params.eps
    eps_out = eps ** (1 / 3)
    cap = cap if cap is not None else params.retry_cap
    for _attempt in range(cap):
        U_classes: list[list[int]] = [[] for _ in Y_classes]
        A0_star: list[BipartiteGraph] = [None] * len(Y_classes)  # type: ignore
        feasible = True
        for i in range(r):
            if not _refine_one_block(G, A0[i], Y_classes, U_classes, A0_star,
                                     i, d0, eps, params, rng):
                feasible = False
                break
        if not feasible:
            continue
        if _refined_events_hold(G, P_host, beta_mat, U_classes, A0_star, d0, eps_out, params):
            return U_classes, A0_star
    raise FailureType1(f"host refinement failed to certify after {cap} attempts")


def _refine_one_block(G, Ai, Y_classes, U_classes, A0_star, i, d0, eps, params, rng) -> bool:
    K = params.K
    Vi = list(G.partition.classes[i])
    block = list(range(i * K, (i + 1) * K))
    m = max(len(Y_classes[j]) for j in block)
    # window for exceptional-vertex detection, with the small-class floor
    width = max(2 * eps * m, params.cert_sd_floor * math.sqrt(max(d0 * (1 - d0), 0.0) * m) + 1)
    routed: dict[int, int] = {}
    if Ai is None:
        rest = list(Vi)
    else:
        xpos = {p: a for a, p in enumerate(Ai.left_ids)}
        vpos = {v: b for b, v in enumerate(Ai.right_ids)}
        cols = Ai.right_adj()
        ymasks = [sum(1 << xpos[p] for p in Y_classes[j]) for j in block]
        rest = []
        exceptional = []
        degs: dict[int, list[int]] = {}
        for v in Vi:
            col = cols[vpos[v]]
            dd = [popcount(col & ym) for ym in ymasks]
            degs[v] = dd
            if any(abs(x - d0 * m) > width + 1e-9 for x in dd):
                exceptional.append(v)
            else:
                rest.append(v)
        if len(exceptional) > K * eps * len(Vi):
            raise NotSuperRegular(
                f"exceptional set of class {i} has {len(exceptional)} vertices; "
                f"initial candidacy cannot be ({eps},{d0})-super-regular")
        counts = [0] * K
        for v in exceptional:
            placed = False
            for jj, j in enumerate(block):
                if degs[v][jj] > d0 * m - width - 1e-9 and counts[jj] < len(Y_classes[j]):
                    routed[v] = j
                    counts[jj] += 1
                    placed = True
                    break
            if not placed:
                return False
    rng.shuffle(rest)
    pos = 0
    for j in block:
        cls = [v for v, tgt in routed.items() if tgt == j]
        take = len(Y_classes[j]) - len(cls)
        cls.extend(rest[pos:pos + take])
        pos += take
        U_classes[j] = cls
    if pos != len(rest):
        return False
    for j in block:
        yj, uj = Y_classes[j], U_classes[j]
        Fj = BipartiteGraph(len(yj), len(uj), left_ids=list(yj), right_ids=list(uj))
        if Ai is None:
            Fj.adj = [(1 << len(uj)) - 1] * len(yj)
        else:
            xpos = {p: a for a, p in enumerate(Ai.left_ids)}
            upos = {v: b for b, v in enumerate(Ai.right_ids)}
            for a, p in enumerate(yj):
                row = Ai.adj[xpos[p]]
                acc = 0
                for b, v in enumerate(uj):
                    if (row >> upos[v]) & 1:
                        acc |= 1 << b
                Fj.adj[a] = acc
            # trim overfull host-side degrees into the window, dropping
            # highest-index pattern neighbours first
            allowed = math.floor(d0 * m + width + 1e-9)
            cols = Fj.right_adj()
            for b in range(len(uj)):
                excess = popcount(cols[b]) - allowed
                for a in reversed(list(iter_bits(cols[b]))):
                    if excess <= 0:
                        break
                    Fj.adj[a] &= ~(1 << b)
                    excess -= 1
        A0_star[j] = Fj
    return True


def _refined_events_hold(G, P_host, beta_mat, U_classes, A0_star, d0, eps_out, params) -> bool:
    K = params.K
    floor = params.cert_sd_floor
    for i, j in G.reduced.edges():
        dij = float(G.densities[i][j]) if G.densities else None
        bij = float(beta_mat[i][j])
        for a in range(i * K, (i + 1) * K):
            for b in range(j * K, (j + 1) * K):
                ua, ub = U_classes[a], U_classes[b]
                if len(ua) < 2 or len(ub) < 2:
                    continue
                pair = _cross_pair(G.graph, ua, ub)
                if dij is not None and not pipeline_certificate(pair, eps_out, dij, floor):
                    return False
                ppair = _cross_pair(P_host, ua, ub)
                if not pipeline_certificate(ppair, eps_out, bij, floor):
                    return False
    for Fj in A0_star:
        if Fj.nl >= 2 and not pipeline_certificate(Fj, eps_out, d0, floor):
            return False
    return True


def _cross_pair(G: LabeledGraph, left: list[int], right: list[int]) -> BipartiteGraph:
    rpos = {v: b for b, v in enumerate(right)}
    rmask = mask_of(right)
    B = BipartiteGraph(len(left), len(right), left_ids=left, right_ids=right)
    for a, u in enumerate(left):
        acc = 0
        for w in iter_bits(G.adj[u] & rmask):
            acc |= 1 << rpos[w]
        B.adj[a] = acc
    return B


def expand_matrix(mat, r: int, K: int) -> list[list[Fraction]]:
    out = [[Fraction(0)] * (K * r) for _ in range(K * r)]
    for i in range(r):
        for j in range(r):
            val = Fraction(mat[i][j]) if mat[i][j] else Fraction(0)
            for a in range(i * K, (i + 1) * K):
                for b in range(j * K, (j + 1) * K):
                    if a != b:
                        out[a][b] = val
    return out


def run_uniform_embed(G: PartitionedGraph, P_host: LabeledGraph, beta_mat,
                      H: PartitionedGraph, kmat, A0: list[BipartiteGraph | None],
                      d0: float, params: ParamSet, rng,
                      check_hypotheses: bool = True,
                      trace: list[dict] | None = None) -> UniformEmbedResult:
    """Steps 1-4 with whole-run retries; returns the embedding bundle."""
    if check_hypotheses:
        _check_hypotheses(G, P_host, beta_mat, H, kmat, A0, d0, params)
    r = G.reduced.r
    # the refinement constants come from this template's degree matrix and
    # this reduced graph, not the instance-wide caps
    k_inst = max(1, max(max(row) for row in kmat))
    dr_inst = max(1, H.reduced.max_degree())
    eff = dataclasses.replace(params, k=k_inst, Delta_R=dr_inst)
    K = eff.K
    last: Exception | None = None
    for attempt in range(1, eff.embed_retry_cap + 1):
        try:
            Y_classes, H_star, K = refine_pattern(H, kmat, C=eff.C, params=eff, rng=rng)
            schedule = round_schedule(H.reduced, K, eff.Delta_R)
            U_classes, A0_star = refine_host(G, P_host, A0, Y_classes, beta_mat, d0, eff, rng)
            RK = _blown_reduced(H.reduced, K)
            sl_params = dataclasses.replace(eff, eps=min(eff.eps ** (1 / 3), 0.5))
            s = SlenderInput(
                R_star=RK,
                Y_classes=Y_classes,
                U_classes=U_classes,
                G_host=G.graph,
                P_host=P_host,
                H=H.graph,
                H_star=H_star,
                A0=A0_star,
                schedule=schedule,
                d_mat=expand_matrix(G.densities, r, K),
                beta_mat=expand_matrix(beta_mat, r, K),
                d0=d0,
                params=sl_params,
                C=params.C,
            )
            out = run_slender(s, rng, expected_w=eff.w,
                              check_certificates=False, trace=trace)
            N = _candidacy_hypergraph(H, H_star, eff)
            res = UniformEmbedResult(phi=out.phi, Y_classes=Y_classes, U_classes=U_classes,
                                     F=out.F, N=N, K=K, attempts=attempt, trace=out.trace)
            _assert_result(G, H, A0, res, eff)
            return res
        except EmbedFailure as exc:
            last = exc
    raise RetriesExhausted(
        f"uniform embedding failed {eff.embed_retry_cap} times; last: {last}") from last


def _blown_reduced(R: ReducedGraph, K: int) -> ReducedGraph:
    from .graphs import blow_up
    return ReducedGraph(K * R.r, blow_up(R, K).edges())


def _candidacy_hypergraph(H: PartitionedGraph, H_star: LabeledGraph, params: ParamSet) -> dict[int, tuple[int, ...]]:
    src = H_star if params.strict_candidacy else H.graph
    return {x: tuple(sorted(src.neighbors(x))) for x in range(H.graph.n)}


def _check_hypotheses(G, P_host, beta_mat, H, kmat, A0, d0, params) -> None:
    eps = params.eps
    for i, j in G.reduced.edges():
        pair = G.pair_view(i, j)
        if not super_regularity_certificate(pair, eps, float(G.densities[i][j])).ok:
            raise NotSuperRegular(f"host pair ({i},{j}) failed its certificate")
        ppair = _cross_pair(P_host, list(G.partition.classes[i]), list(G.partition.classes[j]))
        if not super_regularity_certificate(ppair, eps, float(beta_mat[i][j])).ok:
            raise NotSuperRegular(f"patching pair ({i},{j}) failed its certificate")
    ok, violations = check_near_equiregular(H, kmat, params.C)
    if not ok:
        raise NotNearEquiregular("; ".join(violations[:4]))
    for i, Ai in enumerate(A0):
        if Ai is not None and not super_regularity_certificate(Ai, eps, d0).ok:
            raise NotSuperRegular(f"initial candidacy class {i} failed its certificate")


def _assert_result(G: PartitionedGraph, H: PartitionedGraph, A0, res: UniformEmbedResult,
                   params: ParamSet) -> None:
    K = res.K
    # partition bookkeeping
    for j, (yj, uj) in enumerate(zip(res.Y_classes, res.U_classes)):
        blk = j // K
        if not set(yj) <= set(H.partition.classes[blk]):
            raise AssertionError(f"pattern class {j} escapes its block")
        if not set(uj) <= set(G.partition.classes[blk]):
            raise AssertionError(f"host class {j} escapes its block")
        if len(yj) != len(uj):
            raise AssertionError(f"class {j} sizes disagree")
    # candidacy hypergraph structure
    yclass = {}
    for j, cls in enumerate(res.Y_classes):
        for p in cls:
            yclass[p] = j
    bound = K * params.Delta_R
    for x, nx in res.N.items():
        if len(nx) > bound:
            raise AssertionError("candidacy hyperedge exceeds its size bound")
        per: dict[int, int] = {}
        for y in nx:
            per[yclass[y]] = per.get(yclass[y], 0) + 1
            if x not in res.N[y]:
                raise AssertionError("candidacy hypergraph is not symmetric")
        if any(c > 1 for c in per.values()):
            raise AssertionError("candidacy hyperedge hits a class twice")
        for y in H.graph.neighbors(x):
            if y not in nx:
                raise AssertionError("pattern neighbourhood escapes its hyperedge")
    # initial-candidacy membership
    for i, Ai in enumerate(A0):
        if Ai is None:
            continue
        xpos = {p: a for a, p in enumerate(Ai.left_ids)}
        upos = {v: b for b, v in enumerate(Ai.right_ids)}
        for p in H.partition.classes[i]:
            v = res.phi[p]
            if not Ai.has_edge(xpos[p], upos[v]):
                raise AssertionError(f"phi({p}) violates the initial candidacy")


# ---------------------------------------------------------------------------
# Monte-Carlo diagnostics over repeated runs


def b_diagnostics(runs: list[UniformEmbedResult], H: PartitionedGraph, G: PartitionedGraph,
                  kmat, b1_probes: list[tuple[int, list[int]]] | None = None,
                  overlap_graph: LabeledGraph | None = None,
                  qw_probes: list[tuple[list[int], list[int]]] | None = None) -> dict:
    """Statistics of the embedding distribution; reported, never asserted.

    ``b1_probes`` are (host vertex, host subset) pairs; for each, the
    report compares the mean embedded-neighbour count inside the subset
    with k|S|/(d n).  ``overlap_graph`` triggers the image-overlap
    statistics, ``qw_probes`` the set-intersection concentration.
    """
    if len(runs) < 30:
        raise TooFewRuns(f"diagnostics need at least 30 runs, got {len(runs)}")
    class_of = H.partition.class_of()
    vclass = G.partition.class_of()
    report: dict = {"runs": len(runs)}
    if b1_probes:
        out = []
        for v, S in b1_probes:
            i = vclass[v]
            j = vclass[S[0]]
            n = len(G.partition.classes[j])
            k_ij = kmat[i][j]
            d_ij = float(G.densities[i][j])
            Sset = set(S)
            counts = []
            for res in runs:
                inv = {hv: p for p, hv in res.phi.items()}
                x = inv[v]
                cnt = sum(1 for y in H.graph.neighbors(x) if res.phi[y] in Sset)
                counts.append(cnt)
            mean = sum(counts) / len(counts)
            se = (sum((c - mean) ** 2 for c in counts) / max(len(counts) - 1, 1)) ** 0.5 \
                / math.sqrt(len(counts))
            expected = k_ij * len(S) / (d_ij * n)
            out.append({"v": v, "S_size": len(S), "mean": mean, "se": se,
                        "expected": expected,
                        "ratio": mean / expected if expected else None})
        report["b1"] = out
    collisions = 0
    pairs = 0
    for res in runs[:50]:
        items = sorted(res.phi.items())[:40]
        for ai in range(len(items)):
            for bi in range(ai + 1, len(items)):
                xa, xb = items[ai][0], items[bi][0]
                pairs += 1
                if set(H.graph.neighbors(xa)) & set(H.graph.neighbors(xb)):
                    collisions += 1
    report["b3_collision_rate"] = collisions / pairs if pairs else 0.0
    if overlap_graph is not None:
        rates = []
        for res in runs:
            img = set()
            for x, y in H.graph.edges():
                img.add(frozenset((res.phi[x], res.phi[y])))
            hit = sum(1 for e in img if overlap_graph.has_edge(*tuple(e)))
            rates.append(hit / max(len(img), 1))
        report["b4_overlap_mean"] = sum(rates) / len(rates)
    if qw_probes:
        out = []
        for Q, W in qw_probes:
            Wset = set(W)
            vals = [sum(1 for p in Q if res.phi[p] in Wset) for res in runs]
            mean = sum(vals) / len(vals)
            n = len(G.partition.classes[vclass[W[0]]])
            out.append({"Q_size": len(Q), "W_size": len(W), "mean": mean,
                        "expected": len(Q) * len(W) / n})
        report["b6"] = out
    return report


def diagnostics_to_json(report: dict) -> str:
    return json.dumps(report, indent=2)
