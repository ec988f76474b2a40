"""Shared fixtures and brute-force oracles for the test suite."""
import itertools
import math

import numpy as np
import pytest

from girthlearn.distances import DistanceMatrix
from girthlearn.graphs import LatentGraph, edge_key, gen_random_latent_tree


def brute_girth(G: LatentGraph) -> float:
    """Shortest simple cycle by enumerating node sequences (tiny graphs only)."""
    nodes = G.nodes
    best = math.inf
    for k in range(3, len(nodes) + 1):
        for combo in itertools.permutations(nodes, k):
            if combo[0] != min(combo) or combo[1] > combo[-1]:
                continue
            if all(G.has_edge(combo[t], combo[(t + 1) % k]) for t in range(k)):
                return k
    return best


def tree_distance_matrix(G: LatentGraph, lengths: dict, ids=None) -> DistanceMatrix:
    """Additive path-length metric of a weighted tree, restricted to ``ids``."""
    ids = list(ids) if ids is not None else G.observed_nodes
    d = np.zeros((len(ids), len(ids)))
    for a, u in enumerate(ids):
        dist = {u: 0.0}
        stack = [u]
        while stack:
            x = stack.pop()
            for w in G.neighbors(x):
                if w not in dist:
                    dist[w] = dist[x] + lengths[edge_key(x, w)]
                    stack.append(w)
        for b, v in enumerate(ids):
            d[a, b] = dist[v]
    return DistanceMatrix(ids, d, "exact_global")


def brute_edit_distance(G: LatentGraph, Gh: LatentGraph) -> int:
    """Edit distance by trying every relabelling of the padded hidden set."""
    obs = G.observed_nodes
    H, Hh = G.hidden_nodes, Gh.hidden_nodes
    k = max(len(H), len(Hh))
    Hp = H + [("pad", j) for j in range(k - len(H))]
    Hhp = Hh + [("pad", j) for j in range(k - len(Hh))]
    best = math.inf
    ref = {frozenset(e) for e in G.edges}
    for perm in itertools.permutations(range(k)):
        ren = {Hhp[i]: Hp[perm[i]] for i in range(k)}
        ren.update({v: v for v in obs})
        est = {frozenset((ren[u], ren[v])) for u, v in Gh.edges}
        best = min(best, 2 * len(ref ^ est))
    return int(best)


@pytest.fixture
def random_tree():
    def make(seed, n_internal=4):
        return gen_random_latent_tree(n_internal, seed=seed)
    return make


def dyadic_lengths(lengths: dict, grid: int = 64) -> dict:
    """Round lengths onto a 1/grid lattice so path sums are exact in floating point."""
    return {e: max(1, round(L * grid)) / grid for e, L in lengths.items()}


ACCEPTANCE_LINES: list = []


@pytest.fixture
def report():
    """Record one acceptance line; all lines are echoed in the terminal summary."""
    def emit(k, ok, detail):
        line = f"ACCEPTANCE {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
