"""Core graph types: bitset-backed simple graphs, partitions, reduced graphs.

Adjacency rows are Python ints used as bitsets, so neighbourhood
intersections and degree counts cost O(n/64) words.  All types are
immutable by convention after construction; the few mutating helpers
(`add_edge`, `remove_edges`) are meant for builders, which freeze the
object before sharing it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import BadParams


def popcount(x: int) -> int:
    return x.bit_count()


def iter_bits(mask: int):
    """Yield the set bit positions of ``mask`` in increasing order."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def mask_of(indices: Iterable[int]) -> int:
    m = 0
    for i in indices:
        m |= 1 << i
    return m


class LabeledGraph:
    """Simple undirected graph on vertex ids ``0..n-1``."""

    __slots__ = ("n", "adj", "_m")

    def __init__(self, n: int, edges: Iterable[tuple[int, int]] = ()):
        self.n = n
        self.adj = [0] * n
        self._m = 0
        for u, v in edges:
            self.add_edge(u, v)

    def add_edge(self, u: int, v: int) -> None:
        if u == v:
            raise BadParams(f"self-loop at {u}")
        if not (0 <= u < self.n and 0 <= v < self.n):
            raise BadParams(f"vertex out of range: {(u, v)}")
        if not self.has_edge(u, v):
            self.adj[u] |= 1 << v
            self.adj[v] |= 1 << u
            self._m += 1

    def remove_edge(self, u: int, v: int) -> None:
        if self.has_edge(u, v):
            self.adj[u] &= ~(1 << v)
            self.adj[v] &= ~(1 << u)
            self._m -= 1

    def remove_edges(self, edges: Iterable[tuple[int, int]]) -> None:
        for u, v in edges:
            self.remove_edge(u, v)

    def has_edge(self, u: int, v: int) -> bool:
        return (self.adj[u] >> v) & 1 == 1

    def degree(self, u: int) -> int:
        return popcount(self.adj[u])

    def max_degree(self) -> int:
        return max((popcount(a) for a in self.adj), default=0)

    def num_edges(self) -> int:
        return self._m

    def neighbors(self, u: int) -> list[int]:
        return list(iter_bits(self.adj[u]))

    def edges(self) -> list[tuple[int, int]]:
        out = []
        for u in range(self.n):
            m = self.adj[u] >> (u + 1)
            for off in iter_bits(m):
                out.append((u, u + 1 + off))
        return out

    def copy(self) -> "LabeledGraph":
        g = LabeledGraph(self.n)
        g.adj = list(self.adj)
        g._m = self._m
        return g

    def union(self, other: "LabeledGraph") -> "LabeledGraph":
        if other.n != self.n:
            raise BadParams("union of graphs on different vertex sets")
        g = LabeledGraph(self.n)
        g.adj = [a | b for a, b in zip(self.adj, other.adj)]
        g._m = sum(popcount(a) for a in g.adj) // 2
        return g

    def __eq__(self, other) -> bool:
        return isinstance(other, LabeledGraph) and self.n == other.n and self.adj == other.adj

    def __repr__(self) -> str:
        return f"LabeledGraph(n={self.n}, m={self._m})"


class BipartiteGraph:
    """Bipartite graph on disjoint sides ``0..nl-1`` and ``0..nr-1``.

    Rows ``adj[u]`` are bitsets over the right side.  ``left_ids`` and
    ``right_ids`` optionally carry the global ids this view was cut from,
    so embeddings can be translated back without relabeling bugs.
    """

    __slots__ = ("nl", "nr", "adj", "left_ids", "right_ids")

    def __init__(self, nl: int, nr: int, edges: Iterable[tuple[int, int]] = (),
                 left_ids: Sequence[int] | None = None,
                 right_ids: Sequence[int] | None = None):
        self.nl = nl
        self.nr = nr
        self.adj = [0] * nl
        self.left_ids = list(left_ids) if left_ids is not None else None
        self.right_ids = list(right_ids) if right_ids is not None else None
        for u, v in edges:
            self.add_edge(u, v)

    def add_edge(self, u: int, v: int) -> None:
        if not (0 <= u < self.nl and 0 <= v < self.nr):
            raise BadParams(f"bipartite edge out of range: {(u, v)}")
        self.adj[u] |= 1 << v

    def remove_edge(self, u: int, v: int) -> None:
        self.adj[u] &= ~(1 << v)

    def has_edge(self, u: int, v: int) -> bool:
        return (self.adj[u] >> v) & 1 == 1

    def deg_left(self, u: int) -> int:
        return popcount(self.adj[u])

    def right_adj(self) -> list[int]:
        cols = [0] * self.nr
        for u, row in enumerate(self.adj):
            for v in iter_bits(row):
                cols[v] |= 1 << u
        return cols

    def num_edges(self) -> int:
        return sum(popcount(r) for r in self.adj)

    def density(self) -> float:
        if self.nl == 0 or self.nr == 0:
            return 0.0
        return self.num_edges() / (self.nl * self.nr)

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u in range(self.nl) for v in iter_bits(self.adj[u])]

    def copy(self) -> "BipartiteGraph":
        g = BipartiteGraph(self.nl, self.nr)
        g.adj = list(self.adj)
        g.left_ids = list(self.left_ids) if self.left_ids is not None else None
        g.right_ids = list(self.right_ids) if self.right_ids is not None else None
        return g

    def subgraph(self, left: Sequence[int], right: Sequence[int]) -> "BipartiteGraph":
        """Induced pair on the given local index subsets, re-indexed."""
        rmask_pos = {v: i for i, v in enumerate(right)}
        g = BipartiteGraph(len(left), len(right),
                           left_ids=[l if self.left_ids is None else self.left_ids[l] for l in left],
                           right_ids=[r if self.right_ids is None else self.right_ids[r] for r in right])
        rmask = mask_of(right)
        for i, l in enumerate(left):
            row = self.adj[l] & rmask
            nr = 0
            for v in iter_bits(row):
                nr |= 1 << rmask_pos[v]
            g.adj[i] = nr
        return g

    def __repr__(self) -> str:
        return f"BipartiteGraph({self.nl}x{self.nr}, m={self.num_edges()})"


@dataclass(frozen=True)
class VertexPartition:
    """Ordered partition of ``0..n-1`` into disjoint classes covering V."""

    classes: tuple[tuple[int, ...], ...]
    n: int

    @staticmethod
    def from_lists(classes: Sequence[Sequence[int]], n: int | None = None) -> "VertexPartition":
        cls = tuple(tuple(c) for c in classes)
        seen: set[int] = set()
        total = 0
        for c in cls:
            total += len(c)
            seen.update(c)
        if len(seen) != total:
            raise BadParams("partition classes overlap")
        if n is None:
            n = total
        if seen != set(range(n)):
            raise BadParams("partition does not cover the vertex set")
        return VertexPartition(cls, n)

    @property
    def r(self) -> int:
        return len(self.classes)

    def class_of(self) -> list[int]:
        out = [-1] * self.n
        for idx, c in enumerate(self.classes):
            for v in c:
                out[v] = idx
        return out

    def sizes(self) -> list[int]:
        return [len(c) for c in self.classes]

    def masks(self) -> list[int]:
        return [mask_of(c) for c in self.classes]


class ReducedGraph(LabeledGraph):
    """Graph on class indices; inherits the bitset machinery."""

    def __init__(self, r: int, edges: Iterable[tuple[int, int]] = ()):
        super().__init__(r, edges)

    @property
    def r(self) -> int:
        return self.n


@dataclass
class PartitionedGraph:
    """Host or pattern graph with its partition and reduced graph.

    ``densities`` and ``degrees`` are optional symmetric r x r matrices
    (lists of lists); densities are exact `Fraction`s so thresholds like
    ``(d +- eps)|A|`` reproduce bit-for-bit across platforms.
    """

    graph: LabeledGraph
    partition: VertexPartition
    reduced: ReducedGraph
    densities: list[list[Fraction]] | None = None
    degrees: list[list[int]] | None = None
    _masks: list[int] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not self._masks:
            self._masks = self.partition.masks()

    def validate(self) -> list[str]:
        """Structural invariants: independent classes, no off-R edges."""
        errs = []
        masks = self._masks
        for i, ci in enumerate(self.partition.classes):
            for v in ci:
                if self.graph.adj[v] & masks[i]:
                    errs.append(f"class {i} is not independent (vertex {v})")
                    break
        r = self.reduced.r
        for i in range(r):
            for j in range(i + 1, r):
                if not self.reduced.has_edge(i, j):
                    cross = any(self.graph.adj[v] & masks[j] for v in self.partition.classes[i])
                    if cross:
                        errs.append(f"edges present between classes {i},{j} not in R")
        return errs

    def class_mask(self, i: int) -> int:
        return self._masks[i]

    def pair_view(self, i: int, j: int) -> BipartiteGraph:
        return induced_bipartite(self, i, j)


@dataclass
class Embedding:
    """Class-respecting injection of a pattern graph into a host graph.

    ``mapping[x]`` is the host vertex assigned to pattern vertex ``x``.
    Edge realization is the verifier's job, never assumed here.
    """

    mapping: list[int]

    def image(self, xs: Iterable[int]) -> list[int]:
        return [self.mapping[x] for x in xs]

    def edge_image(self, pattern: LabeledGraph) -> set[frozenset[int]]:
        out = set()
        for u, v in pattern.edges():
            out.add(frozenset((self.mapping[u], self.mapping[v])))
        return out

    def is_injective(self) -> bool:
        vals = [v for v in self.mapping if v >= 0]
        return len(vals) == len(set(vals))


# ---------------------------------------------------------------------------
# operations


def blow_up(R: ReducedGraph, K: int) -> ReducedGraph:
    """K-fold blow-up: vertex i becomes block {iK..iK+K-1}, edges become K_{K,K}.

    Blocks are kept contiguous so block j of the result maps back to
    vertex ``j // K`` of ``R``.
    """
    if K < 1:
        raise BadParams("K must be >= 1")
    out = ReducedGraph(K * R.r)
    for i, j in R.edges():
        for a in range(K):
            for b in range(K):
                out.add_edge(i * K + a, j * K + b)
    return out


def square(G: LabeledGraph) -> LabeledGraph:
    """Graph with edges between vertices at distance 1 or 2 in ``G``."""
    out = LabeledGraph(G.n)
    for u in range(G.n):
        reach = G.adj[u]
        for v in iter_bits(G.adj[u]):
            reach |= G.adj[v]
        reach &= ~(1 << u)
        out.adj[u] = reach
    out._m = sum(popcount(a) for a in out.adj) // 2
    return out


def equitable_split(vertices: Sequence[int], parts: int, rng=None) -> list[list[int]]:
    """Split into ``parts`` lists with sizes differing by at most one.

    Deterministic for a fixed input order; pass ``rng`` for a shuffled
    split.  Larger parts come first.
    """
    if parts < 1:
        raise BadParams("parts must be >= 1")
    vs = list(vertices)
    if rng is not None:
        rng.shuffle(vs)
    n = len(vs)
    base, extra = divmod(n, parts)
    out = []
    pos = 0
    for p in range(parts):
        size = base + (1 if p < extra else 0)
        out.append(vs[pos:pos + size])
        pos += size
    return out


def induced_bipartite(G: PartitionedGraph, i: int, j: int) -> BipartiteGraph:
    """The pair G[V_i, V_j] with local re-indexing and global id maps."""
    if i == j:
        raise BadParams("bipartite restriction needs two distinct classes")
    left = G.partition.classes[i]
    right = G.partition.classes[j]
    rpos = {v: p for p, v in enumerate(right)}
    rmask = G.class_mask(j)
    B = BipartiteGraph(len(left), len(right), left_ids=left, right_ids=right)
    for p, u in enumerate(left):
        row = G.graph.adj[u] & rmask
        m = 0
        for v in iter_bits(row):
            m |= 1 << rpos[v]
        B.adj[p] = m
    return B


# ---------------------------------------------------------------------------
# external interfaces: edge-list text + partition sidecar


def write_edge_list(G: LabeledGraph, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{G.n} {G.num_edges()}\n")
        for u, v in G.edges():
            fh.write(f"{u} {v}\n")


def read_edge_list(path) -> LabeledGraph:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise BadParams("edge list header must be 'n m'")
        n, m = int(header[0]), int(header[1])
        G = LabeledGraph(n)
        count = 0
        for line in fh:
            line = line.strip()
            if not line:
                continue
            u, v = map(int, line.split())
            G.add_edge(u, v)
            count += 1
        if count != m:
            raise BadParams(f"edge list declares {m} edges, found {count}")
    return G


def write_partition(partition: VertexPartition, path) -> None:
    with open(path, "w") as fh:
        json.dump([list(c) for c in partition.classes], fh)


def read_partition(path, n: int | None = None) -> VertexPartition:
    with open(path) as fh:
        classes = json.load(fh)
    return VertexPartition.from_lists(classes, n)
