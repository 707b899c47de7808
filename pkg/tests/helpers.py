"""Shared instance builders for the test suite."""

import random
from fractions import Fraction

from regpack.generators import bipartite_union_templates, host_superregular
from regpack.graphs import ReducedGraph


def frac(x: str) -> Fraction:
    return Fraction(x)


def two_class_instance(n=60, d="9/10", beta="1/10", k=1, count=1, seed=0, eps=0.05):
    """Host, patching graph, beta matrix and templates on two classes."""
    rng = random.Random(seed)
    R = ReducedGraph(2, [(0, 1)])
    df = Fraction(d)
    bf = Fraction(beta)
    dens = [[Fraction(0), df], [df, Fraction(0)]]
    bmat = [[Fraction(0), bf], [bf, Fraction(0)]]
    host = host_superregular(R, n, dens, eps, rng)
    P = host_superregular(R, n, bmat, eps, rng)
    templates = bipartite_union_templates(2, n, k, count, rng, R=R)
    kmat = [[0, k], [k, 0]]
    return host, P, bmat, templates, kmat, rng


def path3_instance(n=48, d="9/10", beta="1/10", count=1, seed=0, eps=0.05):
    rng = random.Random(seed)
    R = ReducedGraph(3, [(0, 1), (1, 2)])
    df = Fraction(d)
    bf = Fraction(beta)
    dens = [[Fraction(0), df, Fraction(0)], [df, Fraction(0), df], [Fraction(0), df, Fraction(0)]]
    bmat = [[Fraction(0), bf, Fraction(0)], [bf, Fraction(0), bf], [Fraction(0), bf, Fraction(0)]]
    host = host_superregular(R, n, dens, eps, rng)
    P = host_superregular(R, n, bmat, eps, rng)
    templates = bipartite_union_templates(3, n, 1, count, rng, R=R)
    kmat = [[0, 1, 0], [1, 0, 1], [0, 1, 0]]
    return host, P, bmat, templates, kmat, rng
