"""Equitable colorings and the embedding-round schedule.

A graph of maximum degree at most k always has an equitable
(k+1)-coloring.  The constructive route here: greedy proper coloring
into k+1 classes, then balancing moves.  A balancing move walks a path
in the "class-move digraph" (an arc X -> Y when some vertex of X has no
neighbour in Y) from an oversized class to an undersized class,
shifting one vertex along each arc.  If no such path exists the search
restarts from a shuffled greedy coloring; small instances fall back to
an exhaustive swap search.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import BadParams, DegreeTooHigh, RetriesExhausted
from .graphs import LabeledGraph, ReducedGraph, blow_up, mask_of, popcount, square


@dataclass
class EquitableColoring:
    classes: list[list[int]]

    @property
    def k(self) -> int:
        return len(self.classes)

    def sizes(self) -> list[int]:
        return [len(c) for c in self.classes]

    def spread(self) -> int:
        sizes = self.sizes()
        return max(sizes) - min(sizes)

    def check(self, G: LabeledGraph) -> None:
        seen: set[int] = set()
        for cls in self.classes:
            m = mask_of(cls)
            for v in cls:
                if G.adj[v] & m:
                    raise BadParams(f"class containing {v} is not independent")
            seen.update(cls)
        if seen != set(range(G.n)):
            raise BadParams("classes do not partition the vertex set")
        if self.spread() > 1:
            raise BadParams(f"size spread {self.spread()} exceeds 1")


def _greedy_classes(G: LabeledGraph, k: int, order: list[int]) -> list[list[int]]:
    classes: list[list[int]] = [[] for _ in range(k + 1)]
    masks = [0] * (k + 1)
    for v in order:
        # prefer the currently smallest admissible class; ties by index
        best = -1
        for c in sorted(range(k + 1), key=lambda c: (len(classes[c]), c)):
            if not (G.adj[v] & masks[c]):
                best = c
                break
        if best < 0:
            raise DegreeTooHigh(f"greedy found no class for vertex {v}")
        classes[best].append(v)
        masks[best] |= 1 << v
    return classes


def _balance(G: LabeledGraph, classes: list[list[int]], iteration_cap: int) -> bool:
    """Equalize class sizes via class-move paths; True on success."""
    k1 = len(classes)
    masks = [mask_of(c) for c in classes]
    for _ in range(iteration_cap):
        sizes = [len(c) for c in classes]
        hi = max(sizes)
        lo = min(sizes)
        if hi - lo <= 1:
            return True
        sources = [c for c in range(k1) if sizes[c] == hi]
        targets = {c for c in range(k1) if sizes[c] == lo}
        # BFS over classes: arc c -> c2 if some v in class c has no neighbour in c2
        parent_arc: dict[int, tuple[int, int]] = {}
        frontier = list(sources)
        visited = set(sources)
        reached = None
        while frontier and reached is None:
            nxt = []
            for c in frontier:
                for c2 in range(k1):
                    if c2 in visited or c2 == c:
                        continue
                    mover = next((v for v in classes[c] if not (G.adj[v] & masks[c2])), None)
                    if mover is None:
                        continue
                    parent_arc[c2] = (c, mover)
                    visited.add(c2)
                    if c2 in targets:
                        reached = c2
                        break
                    nxt.append(c2)
                if reached is not None:
                    break
            frontier = nxt
        if reached is None:
            return False
        # shift one vertex along the path ending at `reached`; sources are
        # never assigned a parent arc, so the walk stops at one
        c2 = reached
        while c2 in parent_arc:
            c, mover = parent_arc[c2]
            classes[c].remove(mover)
            classes[c2].append(mover)
            masks[c] &= ~(1 << mover)
            masks[c2] |= 1 << mover
            c2 = c
    sizes = [len(c) for c in classes]
    return max(sizes) - min(sizes) <= 1


def _exhaustive_balance(G: LabeledGraph, classes: list[list[int]]) -> bool:
    """Depth-2 swap search; viable only for small classes."""
    k1 = len(classes)
    for _ in range(G.n * G.n):
        masks = [mask_of(c) for c in classes]
        sizes = [len(c) for c in classes]
        hi = max(sizes)
        lo = min(sizes)
        if hi - lo <= 1:
            return True
        done = False
        for c in range(k1):
            if sizes[c] != hi or done:
                continue
            for c2 in range(k1):
                if sizes[c2] != lo or done:
                    continue
                for v in classes[c]:
                    if not (G.adj[v] & masks[c2]):
                        classes[c].remove(v)
                        classes[c2].append(v)
                        done = True
                        break
                if done:
                    break
                # depth 2: v -> c3, w in c3 -> c2
                for c3 in range(k1):
                    if c3 in (c, c2) or done:
                        continue
                    for v in classes[c]:
                        if G.adj[v] & masks[c3]:
                            continue
                        for w in classes[c3]:
                            if w != v and not (G.adj[w] & (masks[c2] | (1 << v))):
                                classes[c].remove(v)
                                classes[c3].append(v)
                                classes[c3].remove(w)
                                classes[c2].append(w)
                                done = True
                                break
                        if done:
                            break
        if not done:
            return False
    return False


def hs_equitable_coloring(G: LabeledGraph, k: int, rng=None, restarts: int = 64) -> EquitableColoring:
    """Equitable (k+1)-coloring of a graph with max degree <= k."""
    if G.max_degree() > k:
        raise DegreeTooHigh(f"max degree {G.max_degree()} exceeds {k}")
    order = list(range(G.n))
    for attempt in range(restarts):
        classes = _greedy_classes(G, k, order)
        if _balance(G, classes, iteration_cap=4 * G.n + 8):
            col = EquitableColoring([sorted(c) for c in classes])
            col.check(G)
            return col
        if max(len(c) for c in classes) < 64 and _exhaustive_balance(G, classes):
            col = EquitableColoring([sorted(c) for c in classes])
            col.check(G)
            return col
        if rng is None:
            raise RetriesExhausted("balancing failed and no rng supplied for restarts")
        rng.shuffle(order)
    raise RetriesExhausted(f"equitable coloring failed after {restarts} restarts")


def try_equitable_coloring(G: LabeledGraph, classes: int, rng, restarts: int = 32) -> EquitableColoring | None:
    """Equitable coloring into a fixed class count, without the degree
    precondition; None when greedy + balancing keeps failing.

    Unlike the (k+1)-class theorem route, a proper coloring into
    ``classes`` classes need not exist at all (bipartite 2-regular
    graphs do have balanced 2-colorings, odd cycles have none)."""
    order = list(range(G.n))
    for _ in range(restarts):
        try:
            cls = _greedy_classes(G, classes - 1, order)
        except DegreeTooHigh:
            rng.shuffle(order)
            continue
        if _balance(G, cls, iteration_cap=4 * G.n + 8) or \
                (max(len(c) for c in cls) < 64 and _exhaustive_balance(G, cls)):
            col = EquitableColoring([sorted(c) for c in cls])
            col.check(G)
            return col
        rng.shuffle(order)
    return None


def round_schedule(R: ReducedGraph, K: int, Delta_R: int) -> list[list[int]]:
    """Partition of [K*r] into w = (K*Delta_R)^2 (Delta_R+1) round classes.

    Every class is independent in the square of the K-fold blow-up, the
    per-pair bipartite degree between classes is at most 1, and for
    every edge ij of R the round windows of blocks i and j are disjoint
    intervals.  Empty classes are retained so round indices stay aligned
    with the bookkeeping.
    """
    if R.max_degree() > Delta_R:
        raise DegreeTooHigh(f"Delta(R)={R.max_degree()} exceeds Delta_R={Delta_R}")
    r = R.r
    # independent sets W*_1..W*_{Delta_R+1} of R, greedily
    w_star: list[list[int]] = [[] for _ in range(Delta_R + 1)]
    star_masks = [0] * (Delta_R + 1)
    for v in range(r):
        for c in range(Delta_R + 1):
            if not (R.adj[v] & star_masks[c]):
                w_star[c].append(v)
                star_masks[c] |= 1 << v
                break
    RK = blow_up(R, K)
    RK2 = square(RK)
    per_block = (K * Delta_R) ** 2
    schedule: list[list[int]] = []
    for c in range(Delta_R + 1):
        members: list[int] = []
        for i in w_star[c]:
            members.extend(range(i * K, (i + 1) * K))
        # lexicographically-first greedy partition of (R_K)^2[W**] into
        # per_block independent sets
        sub: list[list[int]] = [[] for _ in range(per_block)]
        sub_masks = [0] * per_block
        for v in members:
            placed = False
            for c2 in range(per_block):
                if not (RK2.adj[v] & sub_masks[c2]):
                    sub[c2].append(v)
                    sub_masks[c2] |= 1 << v
                    placed = True
                    break
            if not placed:
                raise BadParams("blow-up square needs more colors than reserved")
        schedule.extend(sub)
    return schedule


def check_schedule(R: ReducedGraph, K: int, Delta_R: int, schedule: list[list[int]]) -> list[str]:
    """Mechanical checks of the schedule properties; returns violations."""
    errs = []
    RK = blow_up(R, K)
    RK2 = square(RK)
    seen: set[int] = set()
    for idx, cls in enumerate(schedule):
        m = mask_of(cls)
        for v in cls:
            if RK2.adj[v] & m:
                errs.append(f"round class {idx} not independent in the blow-up square")
                break
        seen.update(cls)
    if seen != set(range(K * R.r)):
        errs.append("schedule does not partition the blow-up vertex set")
    if len(schedule) != (K * Delta_R) ** 2 * (Delta_R + 1):
        errs.append(f"schedule has {len(schedule)} classes, expected {(K * Delta_R) ** 2 * (Delta_R + 1)}")
    for a, ca in enumerate(schedule):
        for b in range(a + 1, len(schedule)):
            cb = schedule[b]
            mb = mask_of(cb)
            for v in ca:
                if popcount(RK.adj[v] & mb) > 1:
                    errs.append(f"bipartite degree above 1 between round classes {a},{b}")
                    break
    # window disjointness per R-edge
    first = {}
    last = {}
    for idx, cls in enumerate(schedule):
        for v in cls:
            blk = v // K
            first.setdefault(blk, idx)
            last[blk] = idx
    for i, j in R.edges():
        if not (last.get(i, -1) < first.get(j, 1 << 30) or last.get(j, -1) < first.get(i, 1 << 30)):
            errs.append(f"round windows of blocks {i},{j} overlap")
    return errs
