"""The main packing loop and its theorem-level drivers.

Templates are packed in nibble rounds.  Round 0 splits the host into a
patching reserve P and the working graph G^1.  Each later round embeds
a batch of templates into the current remainder, deletes the union of
their images, and then walks the batch sequentially, re-embedding a
small window of each template through the unused part of P so that the
batch becomes pairwise edge-disjoint and collision constraints hold.

Desk-scale thresholds.  The batch events (U1)/(U2), (W1)-(W3) and
(a')/(b') are checked per the stated formulas but with configurable
floors: at the batch sizes this package runs, quantities like
gamma^(4/3) n or 2 delta gamma n drop below one vertex and would make
the events unsatisfiable whenever anything at all needs patching.
Failures of types 1/2 retry the single embedding, 3/4/5 restart the
round with fresh randomness, 6 restarts likewise (it cannot fire when
(W1)-(W3) hold at full scale, but the check is kept).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import (
    BadParams,
    EmbedFailure,
    FailureExhausted,
    HypothesisViolation,
    PatchFailure,
    QuasirandomnessFailed,
    RetriesExhausted,
)
from .graphs import (
    BipartiteGraph,
    Embedding,
    LabeledGraph,
    PartitionedGraph,
    ReducedGraph,
    VertexPartition,
    blow_up,
    iter_bits,
    mask_of,
    popcount,
)
from .params import ParamSet, q as q_fn
from .patching import repatch
from .regularity import pipeline_certificate, random_split, restrict_super_regular
from .uniform import UniformEmbedResult, run_uniform_embed


@dataclass
class PackInstance:
    host: PartitionedGraph
    templates: list[PartitionedGraph]
    k_mats: list[list[list[int]]]
    A_list: list[list[BipartiteGraph | None] | None]
    lam: list[tuple[int, int, int, int]] = field(default_factory=list)
    d0: float = 1.0
    params: ParamSet = field(default_factory=ParamSet)
    gamma_n: int = 1
    probe_sets: list[tuple[list[int], list[int]]] | None = None


@dataclass
class RoundLog:
    round: int
    densities: list[float]
    conflicts: int
    patched: int
    failures: list[str] = field(default_factory=list)


@dataclass
class PackingResult:
    embeddings: list[dict[int, int]]
    leftover: LabeledGraph
    coverage: float
    rounds: list[RoundLog]
    failure_log: list[str]
    s_real: int

    def edge_images(self, templates: list[PartitionedGraph]) -> list[set[frozenset[int]]]:
        out = []
        for phi, t in zip(self.embeddings, templates):
            out.append({frozenset((phi[x], phi[y])) for x, y in t.graph.edges()})
        return out


def validate_instance(inst: PackInstance) -> list[str]:
    """Mechanical (S1)-(S8)-style checks; returns violations."""
    v: list[str] = []
    host = inst.host
    r = host.reduced.r
    params = inst.params
    if host.reduced.max_degree() > params.Delta_R:
        v.append("(S1) reduced-graph degree exceeds Delta_R")
    sizes = host.partition.sizes()
    n = max(sizes)
    for i, t in enumerate(inst.templates):
        if t.partition.sizes() != sizes:
            v.append(f"(S3) template {i} partition sizes differ from the host")
            break
    for i, km in enumerate(inst.k_mats):
        for a in range(r):
            for b in range(r):
                if km[a][b] != km[b][a]:
                    v.append(f"(S2) k-matrix {i} not symmetric")
                if km[a][b] > params.k:
                    v.append(f"(S2) k-matrix {i} exceeds k={params.k}")
                if km[a][b] and not host.reduced.has_edge(a, b):
                    v.append(f"(S2) k-matrix {i} nonzero off the reduced graph")
    for a, b in host.reduced.edges():
        total = sum(km[a][b] for km in inst.k_mats)
        budget = (1 - params.alpha) * float(host.densities[a][b]) * n
        if total > budget + 1e-9:
            v.append(f"(S4) pair ({a},{b}) oversubscribed: sum k = {total} > {budget:.2f}")
    s = len(inst.templates)
    lam_nodes = {(i, x) for (i, x, ip, xp) in inst.lam} | {(ip, xp) for (i, x, ip, xp) in inst.lam}
    deg: dict[tuple[int, int], int] = {}
    per_tpl: dict[tuple[int, int, int], int] = {}
    for (i, x, ip, xp) in inst.lam:
        if not (0 <= i < s and 0 <= ip < s):
            v.append("(S8) collision constraint references a padded or missing template")
            continue
        deg[(i, x)] = deg.get((i, x), 0) + 1
        deg[(ip, xp)] = deg.get((ip, xp), 0) + 1
        per_tpl[(i, x, ip)] = per_tpl.get((i, x, ip), 0) + 1
        per_tpl[(ip, xp, i)] = per_tpl.get((ip, xp, i), 0) + 1
    if deg and max(deg.values()) > (1 - 2 * params.alpha) * inst.d0 * n:
        v.append("(S8) collision-graph degree exceeds (1-2 alpha) d0 n")
    if per_tpl and max(per_tpl.values()) > params.k:
        v.append("(S8) per-template collision degree exceeds k")
    per_class: dict[tuple[int, int], int] = {}
    class_of = inst.templates[0].partition.class_of() if inst.templates else []
    for (i, x) in lam_nodes:
        if 0 <= i < s:
            j = class_of[x]
            per_class[(i, j)] = per_class.get((i, j), 0) + 1
    for (i, j), cnt in per_class.items():
        if cnt > params.eps * sizes[j]:
            v.append(f"(S8) template {i} has {cnt} constrained vertices in class {j}")
    return v


def _filler_template(host: PartitionedGraph, rng) -> tuple[PartitionedGraph, list[list[int]]]:
    """A k'=1 near-equiregular filler on the host partition."""
    from .balancer import regularize_near

    r = host.reduced.r
    empty = LabeledGraph(host.graph.n)
    pg = PartitionedGraph(empty, host.partition, host.reduced)
    k1 = [[1 if host.reduced.has_edge(i, j) else 0 for j in range(r)] for i in range(r)]
    filled = regularize_near(pg, k1, C=1, rng=rng)
    return filled, k1


def _density_trace(inst: PackInstance, T: int, k_mats, beta_mat) -> list[list[list[Fraction]]]:
    """Exact per-round density ladder d^t from the subscription counts."""
    r = inst.host.reduced.r
    n = max(inst.host.partition.sizes())
    gamma_n = max(1, inst.gamma_n)
    d = [[Fraction(inst.host.densities[i][j]) - Fraction(beta_mat[i][j]) for j in range(r)]
         for i in range(r)]
    trace = [[row[:] for row in d]]
    for t in range(T):
        batch = range(t * gamma_n, min((t + 1) * gamma_n, len(k_mats)))
        new = [row[:] for row in trace[-1]]
        for i, j in inst.host.reduced.edges():
            cur = trace[-1][i][j]
            prod = Fraction(1)
            for idx in batch:
                km = k_mats[idx][i][j]
                if cur > 0:
                    prod *= (Fraction(1) - Fraction(km, 1) / (cur * n))
            new[i][j] = new[j][i] = cur * prod
        trace.append(new)
    return trace


def run_main_packing(inst: PackInstance, rng, round_retry_cap: int = 6) -> PackingResult:
    """Pack the templates; raises FailureExhausted when retries run out."""
    errs = validate_instance(inst)
    if errs:
        raise BadParams("invalid packing instance: " + "; ".join(errs[:4]))
    params = inst.params
    host = inst.host
    r = host.reduced.r
    n = max(host.partition.sizes())
    s_real = len(inst.templates)
    gamma_n = max(1, inst.gamma_n)
    T = math.ceil(s_real / gamma_n) if s_real else 0
    failure_log: list[str] = []

    templates = list(inst.templates)
    k_mats = [list(map(list, km)) for km in inst.k_mats]
    A_list = list(inst.A_list)
    while len(templates) < T * gamma_n:
        filler, k1 = _filler_template(host, rng)
        templates.append(filler)
        k_mats.append(k1)
        A_list.append(None)

    # beta_{j,j'} = beta * d_{j,j'} / d, with d the minimum pair density
    dmin = min((Fraction(host.densities[i][j]) for i, j in host.reduced.edges()), default=Fraction(1))
    beta_mat = [[Fraction(params.beta).limit_denominator(10 ** 6) * Fraction(host.densities[i][j]) / dmin
                 if host.reduced.has_edge(i, j) else Fraction(0) for j in range(r)] for i in range(r)]

    # Round 0: carve the patching reserve out of every host pair
    P_host = LabeledGraph(host.graph.n)
    G_cur = LabeledGraph(host.graph.n)
    for i, j in host.reduced.edges():
        pair = host.pair_view(i, j)
        Ppair, Gpair = random_split(pair, float(host.densities[i][j]), float(beta_mat[i][j]),
                                    rng, eps=params.eps, cap=params.retry_cap)
        left = host.partition.classes[i]
        right = host.partition.classes[j]
        for a in range(Ppair.nl):
            for b in iter_bits(Ppair.adj[a]):
                P_host.add_edge(left[a], right[b])
        for a in range(Gpair.nl):
            for b in iter_bits(Gpair.adj[a]):
                G_cur.add_edge(left[a], right[b])
    P_cur = P_host.copy()
    trace = _density_trace(inst, T, k_mats, beta_mat)
    for level in trace:
        for i, j in host.reduced.edges():
            if level[i][j] <= 0:
                raise BadParams("density ladder hits zero: instance oversubscribed for this gamma")

    embeddings: list[dict[int, int] | None] = [None] * len(templates)
    rounds: list[RoundLog] = []
    class_of_x = templates[0].partition.class_of() if templates else []
    eps_t = params.eps ** (1 / 3)

    for t in range(1, T + 1):
        batch = list(range((t - 1) * gamma_n, t * gamma_n))
        d_now = trace[t - 1]
        d_next = trace[t]
        done = False
        last_exc: _RoundRestart | None = None
        for attempt in range(round_retry_cap):
            try:
                result = _run_round(inst, templates, k_mats, A_list, embeddings, batch,
                                    G_cur, P_host, P_cur, d_now, d_next, beta_mat,
                                    class_of_x, t, eps_t, rng, failure_log)
                rounds.append(result["log"])
                G_cur = result["G_next"]
                P_cur = result["P_next"]
                for idx, phi in result["phis"].items():
                    embeddings[idx] = phi
                done = True
                break
            except _RoundRestart as exc:
                last_exc = exc
                failure_log.append(f"round {t} attempt {attempt + 1}: {exc}")
        if not done:
            raise FailureExhausted(last_exc.failure_type, where=f"round {t}",
                                   msg=f"round {t} failed {round_retry_cap} attempts: {last_exc}")
        eps_t = min(q_fn(eps_t, params.w), 0.45)

    final = [phi for phi in embeddings[:s_real]]
    _assert_packing(inst, templates[:s_real], final, A_list[:s_real])
    covered: set[frozenset[int]] = set()
    for idx in range(s_real):
        for x, y in templates[idx].graph.edges():
            covered.add(frozenset((final[idx][x], final[idx][y])))
    leftover = host.graph.copy()
    for e in covered:
        u, v = tuple(e)
        leftover.remove_edge(u, v)
    coverage = len(covered) / host.graph.num_edges() if host.graph.num_edges() else 0.0
    return PackingResult(embeddings=final, leftover=leftover, coverage=coverage,
                         rounds=rounds, failure_log=failure_log, s_real=s_real)


class _RoundRestart(Exception):
    def __init__(self, failure_type: int, msg: str):
        super().__init__(msg)
        self.failure_type = failure_type


def _run_round(inst, templates, k_mats, A_list, embeddings, batch, G_cur, P_host, P_cur,
               d_now, d_next, beta_mat, class_of_x, t, eps_t, rng, failure_log) -> dict:
    params = inst.params
    host = inst.host
    r = host.reduced.r
    n = max(host.partition.sizes())
    K = params.K

    # Step 1: independent embeddings against (G^t, P)
    G_round = PartitionedGraph(G_cur, host.partition, host.reduced,
                               densities=[[d_now[i][j] for j in range(r)] for i in range(r)])
    results: dict[int, UniformEmbedResult] = {}
    for idx in batch:
        A_eff = _collision_thinned_candidacy(inst, A_list, embeddings, idx, class_of_x, rng)
        emb_params = dataclasses.replace(params, eps=max(min(eps_t ** 3, params.eps), 1e-6))
        try:
            res = run_uniform_embed(G_round, P_host, beta_mat, templates[idx], k_mats[idx],
                                    A_eff, _effective_d0(inst, A_eff), emb_params, rng,
                                    check_hypotheses=False)
        except (EmbedFailure, RetriesExhausted) as exc:
            raise _RoundRestart(1, f"template {idx}: {exc}")
        results[idx] = res
        if inst.probe_sets:
            for Q, W in inst.probe_sets:
                Wset = set(W)
                got = sum(1 for p in Q if res.phi[p] in Wset)
                want = len(Q) * len(W) / n
                if abs(got - want) > max(params.gamma * len(Q) * len(W) / n,
                                         4 * math.sqrt(want) + 1):
                    raise _RoundRestart(2, f"template {idx} failed a probe-set check")

    # remove the union of the images
    G_next = G_cur.copy()
    for idx in batch:
        phi = results[idx].phi
        for x, y in templates[idx].graph.edges():
            G_next.remove_edge(phi[x], phi[y])
    for i, j in host.reduced.edges():
        pair = _cross_pair(G_next, host.partition.classes[i], host.partition.classes[j])
        if not pipeline_certificate(pair, eps_t, float(d_next[i][j]), params.cert_sd_floor):
            raise _RoundRestart(3, f"depleted pair ({i},{j}) lost its certificate")

    # Step 2: conflict bookkeeping
    edge_images = {idx: {frozenset((results[idx].phi[x], results[idx].phi[y]))
                         for x, y in templates[idx].graph.edges()} for idx in batch}
    lam_by_tpl: dict[int, list[tuple[int, int, int]]] = {}
    for (i, x, ip, xp) in inst.lam:
        lam_by_tpl.setdefault(i, []).append((x, ip, xp))
        lam_by_tpl.setdefault(ip, []).append((xp, i, x))
    conflict_count = 0
    U_sets: dict[int, set[int]] = {}
    NU_sets: dict[int, set[int]] = {}
    for idx in batch:
        conflicts = set()
        for jdx in batch:
            if jdx != idx:
                conflicts |= edge_images[idx] & edge_images[jdx]
        conflict_count += len(conflicts)
        U = set()
        for e in conflicts:
            U |= set(e)
        for (x, ip, xp) in lam_by_tpl.get(idx, []):
            U.add(results[idx].phi[x])
        NU = set(U)
        phi = results[idx].phi
        for x, y in templates[idx].graph.edges():
            img = (phi[x], phi[y])
            if img[0] in U:
                NU.add(img[1])
            if img[1] in U:
                NU.add(img[0])
        U_sets[idx] = U
        NU_sets[idx] = NU
    gamma = len(batch) / n
    u1_cap = max(gamma ** (4 / 3) * n, 2.0)
    hits: dict[int, int] = {}
    for idx in batch:
        for v in NU_sets[idx]:
            hits[v] = hits.get(v, 0) + 1
    if hits and max(hits.values()) > u1_cap:
        raise _RoundRestart(4, "a vertex appears in too many conflict neighbourhoods")
    class_maps = {idx: {v: j for j, cls in enumerate(results[idx].U_classes) for v in cls}
                  for idx in batch}
    for idx in batch:
        m_prime = math.ceil(n / results[idx].K)
        u2_cap = max(gamma ** (2 / 5) * m_prime, math.ceil(params.delta * m_prime))
        per_class: dict[int, int] = {}
        for v in NU_sets[idx]:
            j = class_maps[idx].get(v, -1)
            per_class[j] = per_class.get(j, 0) + 1
        if per_class and max(per_class.values()) > u2_cap:
            raise _RoundRestart(4, f"template {idx} has a crowded conflict class")

    # Steps 3 and 4: per-template patch windows, then sequential re-embedding
    P_next = P_cur.copy()
    patched_total = 0
    phis: dict[int, dict[int, int]] = {}
    for pos, idx in enumerate(batch):
        res = results[idx]
        Kr = len(res.U_classes)
        m_prime = math.ceil(n / res.K)
        phi = res.phi
        inv = {hv: p for p, hv in phi.items()}
        cmap = class_maps[idx]
        need = [len([v for v in U_sets[idx] if cmap.get(v) == j]) for j in range(Kr)]
        # the re-embedding needs candidacy degree around 4 inside the patch
        # window, whose density is beta * d0
        min_window = math.ceil(4 / max(params.beta * inst.d0, 1e-9))
        base = max(math.ceil(params.delta * m_prime), max(need, default=0))
        if base > 0 or max(need, default=0) > 0:
            base = max(base, min_window)
        cap_window = min(len(c) for c in res.U_classes)
        window = min(base, cap_window)
        if window == 0 or not (U_sets[idx] or params.delta > 0):
            phis[idx] = dict(phi)
            continue
        # (W1)-(W3)-style hypothesis checks happen inside repatch; collision
        # exclusions thin the candidacy rows first.  The random part of the
        # window is redrawn (and grown when redraws keep failing) until no
        # candidacy row is starved, since a starved row cannot be matched.
        RK = ReducedGraph(res.K * r, blow_up(host.reduced, res.K).edges())
        bKr = _expand(beta_mat, r, res.K)
        rows = None
        Z_classes: list[list[int]] = []
        for widen in range(6):
            redraws = 4
            for _redraw in range(redraws):
                Z_classes = []
                feasible = True
                for j in range(Kr):
                    forced = [inv[v] for v in U_sets[idx] if cmap.get(v) == j]
                    pool = [p for p in res.Y_classes[j] if p not in set(forced)]
                    if window < len(forced) or window - len(forced) > len(pool):
                        feasible = False
                        break
                    extra = rng.sample(pool, window - len(forced))
                    Z_classes.append(forced + extra)
                if not feasible:
                    continue
                cand = _patch_rows(inst, res, phi, templates[idx], A_list[idx], Z_classes,
                                   P_next, lam_by_tpl.get(idx, []), embeddings, phis,
                                   batch, idx)
                if min((len(v) for v in cand.values()), default=2) >= 2:
                    rows = cand
                    break
            if rows is not None or window >= cap_window:
                break
            window = min(max(window + 3, int(window * 3 / 2)), cap_window)
        if rows is None:
            raise _RoundRestart(5, f"template {idx}: patch window starved at every width")
        try:
            phi2 = repatch(templates[idx].graph, res.Y_classes, P_next, RK, bKr, phi,
                           res.N, rows, Z_classes,
                           beta_prime=float(params.beta) * inst.d0, delta=params.delta,
                           params=params, rng=rng,
                           A0_check=_a0_checker(A_list[idx], class_of_x, templates[idx]))
        except (PatchFailure, HypothesisViolation) as exc:
            raise _RoundRestart(6 if isinstance(exc, HypothesisViolation) else 5,
                                f"template {idx}: {exc}")
        patched_total += sum(len(z) for z in Z_classes)
        phis[idx] = phi2
        # the patch reserve loses every image edge it carried
        for x, y in templates[idx].graph.edges():
            P_next.remove_edge(phi2[x], phi2[y])

    # cross-check batch disjointness before accepting the round
    seen: set[frozenset[int]] = set()
    for idx in batch:
        for x, y in templates[idx].graph.edges():
            e = frozenset((phis[idx][x], phis[idx][y]))
            if e in seen:
                raise _RoundRestart(5, "batch images still overlap after patching")
            seen.add(e)

    log = RoundLog(round=t, densities=[float(d_next[i][j]) for i, j in host.reduced.edges()],
                   conflicts=conflict_count, patched=patched_total)
    return {"G_next": G_next, "P_next": P_next, "phis": phis, "log": log}


def _cross_pair(G: LabeledGraph, left, right) -> BipartiteGraph:
    rpos = {v: b for b, v in enumerate(right)}
    rmask = mask_of(right)
    B = BipartiteGraph(len(left), len(right), left_ids=list(left), right_ids=list(right))
    for a, u in enumerate(left):
        acc = 0
        for w in iter_bits(G.adj[u] & rmask):
            acc |= 1 << rpos[w]
        B.adj[a] = acc
    return B


def _effective_d0(inst: PackInstance, A_eff) -> float:
    if all(a is None for a in A_eff):
        return 1.0
    return inst.d0


def _collision_thinned_candidacy(inst, A_list, embeddings, idx, class_of_x, rng):
    """Step-1 candidacy: exclude images taken by earlier collision partners."""
    params = inst.params
    host = inst.host
    r = host.reduced.r
    base = A_list[idx]
    excluded: dict[int, set[int]] = {}
    for (i, x, ip, xp) in inst.lam:
        if i == idx and ip < len(embeddings) and embeddings[ip] is not None:
            excluded.setdefault(x, set()).add(embeddings[ip][xp])
        if ip == idx and i < len(embeddings) and embeddings[i] is not None:
            excluded.setdefault(xp, set()).add(embeddings[i][x])
    if not excluded:
        return base if base is not None else [None] * r
    out: list[BipartiteGraph] = []
    for j in range(r):
        Xj = list(inst.templates[idx].partition.classes[j]) if idx < len(inst.templates) \
            else list(host.partition.classes[j])
        Vj = list(host.partition.classes[j])
        if base is None or base[j] is None:
            Bj = BipartiteGraph(len(Xj), len(Vj), left_ids=Xj, right_ids=Vj)
            Bj.adj = [(1 << len(Vj)) - 1] * len(Xj)
        else:
            Bj = base[j].copy()
        vpos = {v: b for b, v in enumerate(Vj)}
        constrained = {}
        for a, x in enumerate(Xj):
            if x in excluded:
                allowed = Bj.adj[a]
                for hv in excluded[x]:
                    if hv in vpos:
                        allowed &= ~(1 << vpos[hv])
                constrained[a] = allowed
        if constrained:
            d0_target = inst.params.alpha * inst.d0 if inst.d0 < 1 else \
                min((popcount(mask) / len(Vj) for mask in constrained.values()), default=1.0)
            Bj = restrict_super_regular(Bj, constrained, min(d0_target, 1.0), rng,
                                        eps=params.eps, cap=params.retry_cap)
        out.append(Bj)
    return out


def _patch_rows(inst, res, phi, template, A_i, Z_classes, P_next, lam_entries,
                embeddings, phis_round, batch, idx):
    """Candidacy rows for the patch: initial candidacy cut to the class
    window, intersected with the patch-graph neighbourhoods of all
    embedded out-of-window pattern neighbours, minus collision images."""
    host = inst.host
    zall = {z for cls in Z_classes for z in cls}
    rows: dict[int, list[int]] = {}
    # collision exclusions within and across rounds
    excluded: dict[int, set[int]] = {}
    for (x, ip, xp) in lam_entries:
        img = None
        if ip in phis_round:
            img = phis_round[ip].get(xp)
        elif ip < len(embeddings) and embeddings[ip] is not None:
            img = embeddings[ip][xp]
        if img is not None:
            excluded.setdefault(x, set()).add(img)
    class_of_x = template.partition.class_of()
    for j, cls in enumerate(Z_classes):
        wset = [phi[z] for z in cls]
        for z in cls:
            blk = class_of_x[z]
            if A_i is None or A_i[blk] is None:
                allowed = set(wset)
            else:
                Ab = A_i[blk]
                xpos = {p: a for a, p in enumerate(Ab.left_ids)}
                vpos = {v: b for b, v in enumerate(Ab.right_ids)}
                arow = Ab.adj[xpos[z]]
                allowed = {w for w in wset if w in vpos and (arow >> vpos[w]) & 1}
            for ynb in res.N[z]:
                if ynb in zall:
                    continue
                prow = P_next.adj[phi[ynb]]
                allowed = {w for w in allowed if (prow >> w) & 1}
            allowed -= excluded.get(z, set())
            rows[z] = sorted(allowed)
    return rows


def _a0_checker(A_i, class_of_x, template):
    if A_i is None:
        return None

    def check(z, hv):
        blk = template.partition.class_of()[z]
        Ab = A_i[blk]
        if Ab is None:
            return True
        xpos = {p: a for a, p in enumerate(Ab.left_ids)}
        vpos = {v: b for b, v in enumerate(Ab.right_ids)}
        return bool((Ab.adj[xpos[z]] >> vpos[hv]) & 1)

    return check


def _expand(mat, r, K):
    out = [[Fraction(0)] * (K * r) for _ in range(K * r)]
    for i in range(r):
        for j in range(r):
            for a in range(i * K, (i + 1) * K):
                for b in range(j * K, (j + 1) * K):
                    if a != b:
                        out[a][b] = Fraction(mat[i][j])
    return out


def _assert_packing(inst, templates, embeddings, A_list) -> None:
    """(T1)/(T2)/(T4) asserted before returning success."""
    host = inst.host
    seen: set[frozenset[int]] = set()
    for idx, (tpl, phi) in enumerate(zip(templates, embeddings)):
        if phi is None:
            raise AssertionError(f"template {idx} has no embedding")
        vals = list(phi.values())
        if len(vals) != len(set(vals)):
            raise AssertionError(f"embedding {idx} not injective")
        for x, y in tpl.graph.edges():
            e = frozenset((phi[x], phi[y]))
            if not host.graph.has_edge(phi[x], phi[y]):
                raise AssertionError(f"template {idx} uses a non-host edge")
            if e in seen:
                raise AssertionError(f"templates share the edge {sorted(e)}")
            seen.add(e)
        Ai = A_list[idx] if idx < len(A_list) else None
        if Ai is not None:
            for j, Ab in enumerate(Ai):
                if Ab is None:
                    continue
                xpos = {p: a for a, p in enumerate(Ab.left_ids)}
                vpos = {v: b for b, v in enumerate(Ab.right_ids)}
                for p in tpl.partition.classes[j]:
                    if not (Ab.adj[xpos[p]] >> vpos[phi[p]]) & 1:
                        raise AssertionError(f"(T1) violated for template {idx}")
    for (i, x, ip, xp) in inst.lam:
        if i < len(embeddings) and ip < len(embeddings):
            if embeddings[i][x] == embeddings[ip][xp]:
                raise AssertionError("(T4) violated: a collision pair shares an image")


# ---------------------------------------------------------------------------
# theorem-level drivers


def pack_partite(host: PartitionedGraph, families: list[PartitionedGraph], params: ParamSet,
                 rng, batch_size: int | None = None, gamma_n: int = 1,
                 round_retry_cap: int = 6):
    """Batch the family, stack each batch into a near-equiregular template,
    pack the templates, then compose back to per-member embeddings.

    Returns (member_embeddings, PackingResult, batch_info).
    """
    from .balancer import stack_family
    from .verifier import verify_packing

    r = host.reduced.r
    n = max(host.partition.sizes())
    # driver precondition: per-pair edge mass within the (1 - alpha) budget
    for i, j in host.reduced.edges():
        mass = sum(_pair_mass(L, i, j) for L in families)
        budget = (1 - params.alpha) * float(host.densities[i][j]) * n * n
        if mass > budget + 1e-9:
            raise BadParams(
                f"family pair ({i},{j}) carries {mass:.0f} edges, budget {budget:.0f}")
    off_pairs = [(i, j) for i in range(r) for j in range(i + 1, r)
                 if not host.reduced.has_edge(i, j)]
    for i, j in off_pairs:
        if any(_pair_mass(L, i, j) for L in families):
            raise BadParams(f"family has edges on the non-edge ({i},{j}) of the reduced graph")
    if batch_size is None:
        # the stacked per-pair degree drives the refinement constant
        # quadratically, so default to singleton batches; callers with
        # matching-like members can raise this safely
        batch_size = 1
    batches = [families[i:i + batch_size] for i in range(0, len(families), batch_size)]

    templates = []
    k_mats = []
    taus_all = []
    for batch in batches:
        kmat0 = [[0] * r for _ in range(r)]
        H, taus, J, kmat_eff = stack_family(batch, host.reduced, kmat0, params.C, rng)
        templates.append(H)
        k_mats.append(kmat_eff)
        taus_all.append(taus)

    inst = PackInstance(host=host, templates=templates, k_mats=k_mats,
                        A_list=[None] * len(templates), params=params, gamma_n=gamma_n)
    result = run_main_packing(inst, rng, round_retry_cap=round_retry_cap)

    member_embeddings: list[dict[int, int]] = []
    pos = 0
    for b_idx, batch in enumerate(batches):
        phi_t = result.embeddings[b_idx]
        for ell, L in enumerate(batch):
            tau = taus_all[b_idx][ell]
            member_embeddings.append({x: phi_t[tau[x]] for x in range(L.graph.n)})
        pos += len(batch)
    report = verify_packing(host, families, member_embeddings)
    if not report.ok:
        raise AssertionError("composed member embeddings failed verification: "
                             + "; ".join(report.violations[:3]))
    return member_embeddings, result, {"batches": len(batches), "batch_size": batch_size}


def _pair_mass(L: PartitionedGraph, i: int, j: int) -> float:
    mask = mask_of(L.partition.classes[j])
    return sum(popcount(L.graph.adj[u] & mask) for u in L.partition.classes[i])


def quasirandomness_check(G: LabeledGraph, p: float, eps: float) -> list[str]:
    """Degree and codegree conditions of the quasirandom driver."""
    errs = []
    n = G.n
    for v in range(n):
        if abs(G.degree(v) - p * n) > eps * p * n + 1e-9:
            errs.append(f"vertex {v} has degree {G.degree(v)}, outside (1 +- {eps}) p n")
            break
    bad = 0
    for u in range(n):
        for v in range(u + 1, n):
            co = popcount(G.adj[u] & G.adj[v])
            if abs(co - p * p * n) > eps * p * p * n + 1e-9:
                bad += 1
    if bad > eps * n * n:
        errs.append(f"{bad} vertex pairs have atypical codegree (allowed {eps * n * n:.0f})")
    return errs


def merge_small_members(H_list: list[LabeledGraph], n: int, Delta: int,
                        min_edges: int, rng) -> list[LabeledGraph]:
    """Overlay members with few edges pairwise onto disjoint vertex sets,
    then pad at most one leftover small member with a path forest."""
    big = [H for H in H_list if H.num_edges() >= min_edges]
    small = sorted((H for H in H_list if H.num_edges() < min_edges), key=lambda H: H.num_edges())
    while len(small) >= 2:
        a = small.pop(0)
        b = small.pop(0)
        used_a = {v for v in range(n) if a.degree(v) > 0}
        free_a = [v for v in range(n) if a.degree(v) == 0]
        used_b = sorted(v for v in range(n) if b.degree(v) > 0)
        if len(used_b) > len(free_a):
            small = [a, b] + small
            break
        relabel = dict(zip(used_b, free_a))
        merged = a.copy()
        for u, v in b.edges():
            merged.add_edge(relabel[u], relabel[v])
        if merged.num_edges() >= min_edges:
            big.append(merged)
        else:
            small.insert(0, merged)
    if small:
        H = small.pop(0).copy()
        free = [v for v in range(n) if H.degree(v) == 0]
        idx = 0
        while H.num_edges() < min_edges and idx + 1 < len(free):
            H.add_edge(free[idx], free[idx + 1])
            idx += 2
        big.append(H)
        big.extend(small)
    return big


def pack_quasirandom(G: LabeledGraph, H_list: list[LabeledGraph], alpha: float, p: float,
                     Delta: int, params: ParamSet, rng, r: int | None = None,
                     gamma_n: int = 1, round_retry_cap: int = 6):
    """Partition the quasirandom host, drop within-class edges, stack and pack.

    Returns (embeddings into G, PackingResult, leftover stats).
    """
    from .verifier import leftover_stats

    n = G.n
    total = sum(H.num_edges() for H in H_list)
    if total > (1 - alpha) * p * n * (n - 1) / 2 + 1e-9:
        raise BadParams("family exceeds the (1-alpha) edge budget")
    errs = quasirandomness_check(G, p, params.eps)
    if errs:
        raise QuasirandomnessFailed("; ".join(errs[:3]))
    for H in H_list:
        if H.n != n:
            raise BadParams("every member must span the host vertex count")
        if H.max_degree() > Delta:
            raise BadParams("member degree above the stated bound")

    H_list = merge_small_members(H_list, n, Delta, max(n // 4, 1), rng)
    if r is None:
        r = next((cand for cand in range(Delta + 1, n) if n % cand == 0), None)
        if r is None:
            raise BadParams("no divisor of n suits the class count; pass r explicitly")
    if n % r != 0:
        raise BadParams("class count must divide the host order in equal-class mode")
    n_class = n // r

    # random host partition until every pair certifies
    R = ReducedGraph(r, [(i, j) for i in range(r) for j in range(i + 1, r)])
    host_pg = None
    for _ in range(params.retry_cap):
        ids = list(range(n))
        rng.shuffle(ids)
        classes = [sorted(ids[i * n_class:(i + 1) * n_class]) for i in range(r)]
        pruned = LabeledGraph(n)
        for u, v in G.edges():
            cu = next(ci for ci, cls in enumerate(classes) if u in set(cls))
            cv = next(ci for ci, cls in enumerate(classes) if v in set(cls))
            if cu != cv:
                pruned.add_edge(u, v)
        cand = PartitionedGraph(pruned, VertexPartition.from_lists(classes, n), R,
                                densities=[[Fraction(p).limit_denominator(10 ** 6) if i != j else Fraction(0)
                                            for j in range(r)] for i in range(r)])
        if all(pipeline_certificate(cand.pair_view(i, j), params.eps, p, params.cert_sd_floor)
               for i, j in R.edges()):
            host_pg = cand
            break
    if host_pg is None:
        raise QuasirandomnessFailed("no certified host partition found")

    from .coloring import try_equitable_coloring
    members = []
    for H in H_list:
        col = try_equitable_coloring(H, r, rng)
        if col is None:
            raise BadParams("a member admits no equitable coloring at this class count; "
                            "raise r above its maximum degree")
        classes = sorted(col.classes, key=lambda c: (-len(c), c))
        members.append(PartitionedGraph(H, VertexPartition.from_lists(
            [sorted(c) for c in classes], n), R))

    embeddings, result, info = pack_partite(host_pg, members, params, rng,
                                            gamma_n=gamma_n, round_retry_cap=round_retry_cap)
    stats = leftover_stats(host_pg, members, embeddings)
    stats["delta_J_vs_4apn"] = (stats["delta_J"], 4 * alpha * p * n)
    return embeddings, result, stats


def pack_bipartite(G_pair: BipartiteGraph, H_pairs: list[BipartiteGraph], alpha: float,
                   params: ParamSet, rng, d: float | None = None,
                   gamma_n: int = 1, round_retry_cap: int = 6):
    """Bipartite driver: split the large side, reduce to a 3-class path host.

    The host has sides (A, B); each member is padded to (|A|, |B|), its
    B-side split to balance the two half-pair edge counts, and everything
    is handed to the partite pipeline on the path 2-1-3.
    """
    nA, nB = G_pair.nl, G_pair.nr
    if d is None:
        d = G_pair.density()
    total = sum(H.num_edges() for H in H_pairs)
    if total > (1 - alpha) * G_pair.num_edges() + 1e-9:
        raise BadParams("family exceeds the (1-alpha) edge budget")
    for H in H_pairs:
        if H.nl > nA or H.nr > nB:
            raise BadParams("a member exceeds the host side sizes")
    h2 = nB // 2
    sizes = [nA, h2, nB - h2]
    R = ReducedGraph(3, [(0, 1), (0, 2)])

    # host split of B, resampled until both pairs certify
    host_pg = None
    for _ in range(params.retry_cap):
        ids = list(range(nB))
        rng.shuffle(ids)
        B1 = sorted(ids[:h2])
        B2 = sorted(ids[h2:])
        G = LabeledGraph(nA + nB)
        for u in range(nA):
            for v in iter_bits(G_pair.adj[u]):
                G.add_edge(u, nA + v)
        classes = [list(range(nA)), [nA + v for v in B1], [nA + v for v in B2]]
        dfrac = Fraction(d).limit_denominator(10 ** 6)
        cand = PartitionedGraph(G, VertexPartition.from_lists(classes, nA + nB), R,
                                densities=[[Fraction(0), dfrac, dfrac],
                                           [dfrac, Fraction(0), Fraction(0)],
                                           [dfrac, Fraction(0), Fraction(0)]])
        if all(pipeline_certificate(cand.pair_view(i, j), params.eps, d, params.cert_sd_floor)
               for i, j in R.edges()):
            host_pg = cand
            break
    if host_pg is None:
        raise RetriesExhausted("no certified host split found")

    members = []
    for H in H_pairs:
        # balanced split of the member's B side, best of a few resamples
        best = None
        for _ in range(20):
            ids = list(range(nB))
            rng.shuffle(ids)
            M1 = set(ids[:h2])
            e1 = sum(1 for u in range(H.nl) for v in iter_bits(H.adj[u]) if v in M1)
            imbalance = abs(H.num_edges() - 2 * e1)
            if best is None or imbalance < best[0]:
                best = (imbalance, sorted(M1))
        M1 = set(best[1])
        L = LabeledGraph(nA + nB)
        for u in range(H.nl):
            for v in iter_bits(H.adj[u]):
                L.add_edge(u, nA + v)
        classes = [list(range(nA)),
                   [nA + v for v in sorted(M1)],
                   [nA + v for v in range(nB) if v not in M1]]
        members.append(PartitionedGraph(L, VertexPartition.from_lists(classes, nA + nB), R))

    embeddings, result, info = pack_partite(host_pg, members, params, rng,
                                            gamma_n=gamma_n, round_retry_cap=round_retry_cap)
    return embeddings, result, info
