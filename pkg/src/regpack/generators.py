"""Seeded instance generators: hosts, templates, and whole instances.

Hosts meant to carry a tight certificate are built as random regular
bipartite graphs (circulant offsets destroyed by degree-preserving
2-switches) and resampled until the certificate passes, so the claimed
(eps, d) is a verified property rather than an expectation.
"""

from __future__ import annotations

import json
import math
from fractions import Fraction
from pathlib import Path

from .errors import BadParams, RetriesExhausted
from .graphs import (
    BipartiteGraph,
    LabeledGraph,
    PartitionedGraph,
    ReducedGraph,
    VertexPartition,
    iter_bits,
)
from .regularity import super_regularity_certificate


def random_regular_bipartite(n: int, k: int, rng) -> BipartiteGraph:
    """k-regular bipartite graph on n+n vertices, randomized by 2-switches."""
    if not 0 <= k <= n:
        raise BadParams(f"need 0 <= k <= n, got k={k}, n={n}")
    offsets = rng.sample(range(n), k)
    B = BipartiteGraph(n, n)
    for u in range(n):
        for o in offsets:
            B.add_edge(u, (u + o) % n)
    edges = B.edges()
    for _ in range(10 * n * max(k, 1)):
        i = rng.randrange(len(edges))
        j = rng.randrange(len(edges))
        (a, b), (c, d) = edges[i], edges[j]
        if a == c or b == d:
            continue
        if B.has_edge(a, d) or B.has_edge(c, b):
            continue
        B.remove_edge(a, b)
        B.remove_edge(c, d)
        B.add_edge(a, d)
        B.add_edge(c, b)
        edges[i] = (a, d)
        edges[j] = (c, b)
    return B


def near_regular_bipartite(n: int, d: float, rng) -> BipartiteGraph:
    """Degrees in {floor(dn), floor(dn)+1} matching density d as closely as possible.

    The fractional part is realized by a partial matching on the
    complement, so no vertex on either side exceeds floor(dn)+1.
    """
    from .matching import find_perfect_matching

    lo = math.floor(d * n)
    extra = round((d * n - lo) * n)
    B = random_regular_bipartite(n, lo, rng)
    if extra == 0:
        return B
    # the complement is (n - lo)-regular, hence has a perfect matching;
    # a random slice of one realizes the fractional part
    comp = BipartiteGraph(n, n)
    full = (1 << n) - 1
    comp.adj = [full & ~row for row in B.adj]
    m = find_perfect_matching(comp)
    if m is None:
        raise RetriesExhausted(f"complement matching missing for n={n}, d={d}")
    for u in rng.sample(range(n), extra):
        B.add_edge(u, m.sigma[u])
    return B


def certified_bipartite_host(n: int, d: float, eps: float, rng, tries: int = 64) -> BipartiteGraph:
    """Bipartite host that passes the (eps, d)-super-regularity certificate.

    Degrees are drawn from {floor(dn), floor(dn)+1} clipped to the
    (d +- eps) window, so tight windows around a non-integer dn stay
    reachable.
    """
    lo = math.floor(d * n)

    def fits(k):
        return abs(k - d * n) <= eps * n + 1e-9

    for _ in range(tries):
        if fits(lo) and fits(lo + 1):
            B = near_regular_bipartite(n, d, rng)
        elif fits(round(d * n)):
            B = random_regular_bipartite(n, round(d * n), rng)
        else:
            raise BadParams(f"no integer degree lies in the ({eps},{d}) window at n={n}")
        if super_regularity_certificate(B, eps, d).ok:
            return B
    raise RetriesExhausted(f"no certified ({eps},{d}) host of size {n} after {tries} tries")


def host_complete(n: int) -> LabeledGraph:
    return LabeledGraph(n, [(u, v) for u in range(n) for v in range(u + 1, n)])


def host_gnp(n: int, p: float, rng) -> LabeledGraph:
    G = LabeledGraph(n)
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < p:
                G.add_edge(u, v)
    return G


def host_superregular(R: ReducedGraph, class_size: int, densities, eps: float, rng,
                      sizes: list[int] | None = None) -> PartitionedGraph:
    """Partitioned host whose R-pairs are certified super-regular.

    ``densities`` is an r x r matrix (numbers or Fractions); entries off
    E(R) are ignored.  ``sizes`` optionally overrides per-class sizes.
    """
    r = R.r
    if sizes is None:
        sizes = [class_size] * r
    bounds = [0]
    for s in sizes:
        bounds.append(bounds[-1] + s)
    n_total = bounds[-1]
    classes = [list(range(bounds[i], bounds[i + 1])) for i in range(r)]
    G = LabeledGraph(n_total)
    dmat = [[Fraction(0)] * r for _ in range(r)]
    for i, j in R.edges():
        d = float(densities[i][j])
        dmat[i][j] = dmat[j][i] = Fraction(densities[i][j]).limit_denominator(10 ** 6)
        ni, nj = sizes[i], sizes[j]
        if ni == nj:
            B = certified_bipartite_host(ni, d, eps, rng)
        else:
            # unequal sides: pad the smaller side virtually, then drop it
            m = max(ni, nj)
            B = certified_bipartite_host(m, d, eps, rng).subgraph(range(ni), range(nj))
        for u in range(ni):
            for v in iter_bits(B.adj[u]):
                G.add_edge(classes[i][u], classes[j][v])
    return PartitionedGraph(G, VertexPartition.from_lists(classes), R, densities=dmat)


def random_tree(n: int, max_degree: int, rng) -> LabeledGraph:
    """Uniform-ish random tree built by degree-capped random attachment."""
    if n < 1:
        raise BadParams("tree needs at least one vertex")
    if n > 1 and max_degree < 2:
        raise BadParams("trees on >= 2 vertices need max_degree >= 2")
    G = LabeledGraph(n)
    deg = [0] * n
    available = [0]
    order = list(range(1, n))
    rng.shuffle(order)
    for v in order:
        u = available[rng.randrange(len(available))]
        G.add_edge(u, v)
        deg[u] += 1
        deg[v] += 1
        if deg[u] >= max_degree:
            available.remove(u)
        available.append(v)
    return G


def cycle_factor(n: int, lengths: list[int]) -> LabeledGraph:
    """Vertex-disjoint cycles with the given lengths, spanning n vertices."""
    if sum(lengths) != n:
        raise BadParams(f"cycle lengths sum to {sum(lengths)}, need {n}")
    if any(l < 3 for l in lengths):
        raise BadParams("cycles need length >= 3")
    G = LabeledGraph(n)
    base = 0
    for l in lengths:
        for i in range(l):
            G.add_edge(base + i, base + (i + 1) % l)
        base += l
    return G


def random_bounded_degree_graph(n: int, max_degree: int, e_target: int, rng,
                                tries_factor: int = 50) -> LabeledGraph:
    G = LabeledGraph(n)
    deg = [0] * n
    tries = tries_factor * max(e_target, 1)
    while G.num_edges() < e_target and tries > 0:
        tries -= 1
        u = rng.randrange(n)
        v = rng.randrange(n)
        if u == v or G.has_edge(u, v) or deg[u] >= max_degree or deg[v] >= max_degree:
            continue
        G.add_edge(u, v)
        deg[u] += 1
        deg[v] += 1
    return G


def tree_family_gl(n: int, max_degree: int, rng, start: int = 1) -> list[LabeledGraph]:
    """Trees T_start..T_n with |T_i| = i, each padded to n vertices.

    Vertices i..n-1 of the i-th tree are isolated, so every member lives
    on a common n-vertex set.
    """
    fam = []
    for i in range(start, n + 1):
        T = random_tree(i, max_degree, rng) if i > 1 else LabeledGraph(1)
        G = LabeledGraph(n)
        for u, v in T.edges():
            G.add_edge(u, v)
        fam.append(G)
    return fam


def bipartite_union_templates(r: int, class_size: int, k: int, count: int, rng,
                              R: ReducedGraph | None = None,
                              sizes: list[int] | None = None) -> list[PartitionedGraph]:
    """Templates whose pairs are unions of k random perfect matchings.

    Each template is (R, k, 0)-near-equiregular when class sizes agree;
    with ragged sizes the pair graphs are matchings-of-min-size overlays
    and callers should re-check.
    """
    if R is None:
        R = ReducedGraph(r, [(i, j) for i in range(r) for j in range(i + 1, r)])
    if sizes is None:
        sizes = [class_size] * r
    bounds = [0]
    for s in sizes:
        bounds.append(bounds[-1] + s)
    classes = [list(range(bounds[i], bounds[i + 1])) for i in range(r)]
    out = []
    for _ in range(count):
        G = LabeledGraph(bounds[-1])
        for i, j in R.edges():
            ni, nj = sizes[i], sizes[j]
            if ni == nj:
                B = random_regular_bipartite(ni, k, rng)
                for a in range(ni):
                    for b in iter_bits(B.adj[a]):
                        G.add_edge(classes[i][a], classes[j][b])
            else:
                # ragged sizes: k layers of min-size matchings, resampled on collision
                m = min(ni, nj)
                used: set[tuple[int, int]] = set()
                for _layer in range(k):
                    for _try in range(50):
                        perm_i = rng.sample(range(ni), m)
                        perm_j = rng.sample(range(nj), m)
                        layer = list(zip(perm_i, perm_j))
                        if all(e not in used for e in layer):
                            used.update(layer)
                            for a, b in layer:
                                G.add_edge(classes[i][a], classes[j][b])
                            break
        out.append(PartitionedGraph(G, VertexPartition.from_lists(classes, bounds[-1]), R))
    return out


# ---------------------------------------------------------------------------
# instance files


def write_instance(path, host: PartitionedGraph, templates: list[PartitionedGraph],
                   k_mats: list[list[list[int]]], params: dict,
                   lam: list[list[int]] | None = None) -> None:
    """One JSON instance drives pack/verify/diagnose identically."""
    payload = {
        "host": {
            "n": host.graph.n,
            "edges": host.graph.edges(),
            "partition": [list(c) for c in host.partition.classes],
            "reduced_edges": host.reduced.edges(),
            "densities": [[str(host.densities[i][j]) if host.densities else "0"
                           for j in range(host.reduced.r)] for i in range(host.reduced.r)],
        },
        "templates": [
            {
                "n": t.graph.n,
                "edges": t.graph.edges(),
                "partition": [list(c) for c in t.partition.classes],
                "k_matrix": k_mats[idx],
            }
            for idx, t in enumerate(templates)
        ],
        "lambda": lam or [],
        "params": params,
    }
    Path(path).write_text(json.dumps(payload))


def read_instance(path):
    data = json.loads(Path(path).read_text())
    h = data["host"]
    R = ReducedGraph(len(h["partition"]), [tuple(e) for e in h["reduced_edges"]])
    host_graph = LabeledGraph(h["n"], [tuple(e) for e in h["edges"]])
    dens = [[Fraction(x) for x in row] for row in h["densities"]]
    host = PartitionedGraph(host_graph, VertexPartition.from_lists(h["partition"], h["n"]), R,
                            densities=dens)
    templates = []
    k_mats = []
    for t in data["templates"]:
        tg = LabeledGraph(t["n"], [tuple(e) for e in t["edges"]])
        templates.append(PartitionedGraph(tg, VertexPartition.from_lists(t["partition"], t["n"]), R))
        k_mats.append(t["k_matrix"])
    lam = [tuple(x) for x in data.get("lambda", [])]
    return host, templates, k_mats, data.get("params", {}), lam
