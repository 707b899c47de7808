"""Local re-embedding of a bad vertex set through the patching graph.

Given an embedding phi, per-class bad sets Z_i with images W_i = phi(Z_i),
and a candidacy bigraph F recording which patch images each bad vertex
may take, this produces phi' that agrees with phi outside Z, realizes
every pattern edge at Z inside the patching graph, and respects F.

The re-embedding itself is the slender primitive run directly on the
patch instance: pattern pairs H[Z_i, Z_j] have maximum degree one, so
after completion to perfect matchings they are already slender, and the
schedule embeds one class per round (each singleton class set is
trivially independent).  The blow-up refinement used for full-size
patterns would re-split these already-matching classes for no benefit,
so it is skipped here.
"""

from __future__ import annotations

import dataclasses
from fractions import Fraction

from .errors import EmbedFailure, HypothesisViolation, PatchFailure
from .graphs import BipartiteGraph, LabeledGraph, ReducedGraph, iter_bits, mask_of
from .params import ParamSet
from .regularity import pipeline_certificate
from .slender import SlenderInput, run_slender


def repatch(H: LabeledGraph, pattern_classes: list[list[int]],
            P_host: LabeledGraph, R: ReducedGraph, beta_mat,
            phi: dict[int, int], N: dict[int, tuple[int, ...]],
            F_rows: dict[int, dict[int, bool]] | list[BipartiteGraph],
            Z_classes: list[list[int]], beta_prime: float, delta: float,
            params: ParamSet, rng, A0_check=None) -> dict[int, int]:
    """Return phi' re-embedding Z inside W = phi(Z); conclusions asserted.

    ``F_rows`` maps each z in Z to the set of permitted host images (a
    list of per-class BipartiteGraph views also works).  ``beta_prime``
    is the claimed candidacy density for the hypothesis certificate and
    ``delta`` its tolerance.
    """
    r = len(Z_classes)
    Z = [z for cls in Z_classes for z in cls]
    if not Z:
        return dict(phi)
    W_classes = [[phi[z] for z in cls] for cls in Z_classes]
    sizes = {len(cls) for cls in Z_classes}
    if len(sizes) != 1:
        raise HypothesisViolation(f"patch classes must share one size, got {sorted(sizes)}")
    m = sizes.pop()

    F_pairs = _as_pairs(F_rows, Z_classes, W_classes)

    # hypothesis (a): every F[Z_i, W_i] certified at (delta, beta')
    for i in range(r):
        if not pipeline_certificate(F_pairs[i], delta, beta_prime, params.cert_sd_floor):
            raise HypothesisViolation(f"patch candidacy class {i} failed its ({delta},{beta_prime}) certificate")
    # hypothesis (b): P restricted to W certified at (delta, beta) per pair
    for i, j in R.edges():
        pair = _cross(P_host, W_classes[i], W_classes[j])
        if not pipeline_certificate(pair, delta, float(beta_mat[i][j]), params.cert_sd_floor):
            raise HypothesisViolation(f"patching pair ({i},{j}) on W failed its certificate")
    zset = set(Z)
    for x, y in H.edges():
        if x in zset and y in zset:
            zc = {z: c for c, cls in enumerate(Z_classes) for z in cls}
            if zc[x] != zc[y] and not R.has_edge(zc[x], zc[y]):
                raise HypothesisViolation("pattern edge inside Z crosses a non-edge of R")

    # pattern restricted to Z, completed pairwise to perfect matchings
    zpos = {}
    zclass = {}
    for c, cls in enumerate(Z_classes):
        for a, z in enumerate(cls):
            zpos[z] = a
            zclass[z] = c
    local_n = r * m
    def lid(z):
        return zclass[z] * m + zpos[z]
    HZ = LabeledGraph(local_n)
    for x, y in H.edges():
        if x in zset and y in zset:
            HZ.add_edge(lid(x), lid(y))
    HZ_star = HZ.copy()
    for i, j in R.edges():
        matched_i = set()
        matched_j = set()
        for a in range(m):
            for nb in HZ.neighbors(i * m + a):
                if nb // m == j:
                    matched_i.add(a)
                    matched_j.add(nb - j * m)
        free_i = [a for a in range(m) if a not in matched_i]
        free_j = [b for b in range(m) if b not in matched_j]
        for a, b in zip(free_i, free_j):
            HZ_star.add_edge(i * m + a, j * m + b)

    # auxiliary complete-partite graph plays the patching role: no
    # constraints beyond F bind inside the patch
    Q = LabeledGraph(local_n)
    for i, j in R.edges():
        for a in range(m):
            for b in range(m):
                Q.add_edge(i * m + a, j * m + b)
    PW = LabeledGraph(local_n)
    for i, j in R.edges():
        for a, wa in enumerate(W_classes[i]):
            for b, wb in enumerate(W_classes[j]):
                if P_host.has_edge(wa, wb):
                    PW.add_edge(i * m + a, j * m + b)

    tau = [[Fraction(1) if i != j else Fraction(0) for j in range(r)] for i in range(r)]
    bmat = [[Fraction(beta_mat[i][j]) for j in range(r)] for i in range(r)]
    sl_params = dataclasses.replace(params, eps=delta, C=0)
    schedule = [[i] for i in range(r)]
    s = SlenderInput(
        R_star=R,
        Y_classes=[[i * m + a for a in range(m)] for i in range(r)],
        U_classes=[[i * m + a for a in range(m)] for i in range(r)],
        G_host=PW,
        P_host=Q,
        H=HZ,
        H_star=HZ_star,
        A0=F_pairs,
        schedule=schedule,
        d_mat=bmat,
        beta_mat=tau,
        d0=beta_prime,
        params=sl_params,
        C=0,
        max_class_degree=max(R.max_degree(), 1),
    )
    last = None
    for _ in range(params.embed_retry_cap):
        try:
            out = run_slender(s, rng, expected_w=len(schedule), check_certificates=False)
            break
        except EmbedFailure as exc:
            last = exc
    else:
        raise PatchFailure(f"patch embedding failed: {last}") from last

    phi2 = dict(phi)
    for c, cls in enumerate(Z_classes):
        for a, z in enumerate(cls):
            local_img = out.phi[c * m + a]
            phi2[z] = W_classes[local_img // m][local_img % m]

    _assert_conclusions(H, phi, phi2, zset, P_host, F_pairs, Z_classes, W_classes, N, A0_check)
    return phi2


def _as_pairs(F_rows, Z_classes, W_classes) -> list[BipartiteGraph]:
    if isinstance(F_rows, list) and F_rows and isinstance(F_rows[0], BipartiteGraph):
        return F_rows
    out = []
    for cls, wcls in zip(Z_classes, W_classes):
        wpos = {w: b for b, w in enumerate(wcls)}
        B = BipartiteGraph(len(cls), len(wcls), left_ids=list(cls), right_ids=list(wcls))
        for a, z in enumerate(cls):
            allowed = F_rows[z]
            acc = 0
            for w in allowed:
                if w in wpos:
                    acc |= 1 << wpos[w]
            B.adj[a] = acc
        out.append(B)
    return out


def _cross(G: LabeledGraph, left: list[int], right: list[int]) -> BipartiteGraph:
    rpos = {v: b for b, v in enumerate(right)}
    rmask = mask_of(right)
    B = BipartiteGraph(len(left), len(right), left_ids=left, right_ids=right)
    for a, u in enumerate(left):
        acc = 0
        for w in iter_bits(G.adj[u] & rmask):
            acc |= 1 << rpos[w]
        B.adj[a] = acc
    return B


def _assert_conclusions(H, phi, phi2, zset, P_host, F_pairs, Z_classes, W_classes, N, A0_check):
    """Exact patch conclusions, checked on every success."""
    for x in phi:
        if x not in zset and phi2[x] != phi[x]:
            raise AssertionError("patched embedding moved a vertex outside Z")
    vals = list(phi2.values())
    if len(vals) != len(set(vals)):
        raise AssertionError("patched embedding is not injective")
    for x, y in H.edges():
        if x in zset or y in zset:
            if not P_host.has_edge(phi2[x], phi2[y]):
                raise AssertionError(
                    f"patched pattern edge ({x},{y}) not realized in the patching graph")
    for c, cls in enumerate(Z_classes):
        wset = set(W_classes[c])
        wpos = {w: b for b, w in enumerate(W_classes[c])}
        for a, z in enumerate(cls):
            if phi2[z] not in wset:
                raise AssertionError("patched image left its class window")
            if not F_pairs[c].has_edge(a, wpos[phi2[z]]):
                raise AssertionError("patched image violates the candidacy bigraph")
            if A0_check is not None and not A0_check(z, phi2[z]):
                raise AssertionError("patched image violates the initial candidacy")
