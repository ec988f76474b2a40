"""Tests for graph construction, generators and structural measures."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from girthlearn.graphs import (DepthBoundQuery, GenerationFailed, GraphError, LatentGraph,
                               ball_and_induced, depth, depth_bound_lemma1, gen_latent_cycle,
                               gen_random_latent_tree, gen_random_regular_girth, girth,
                               graph_stats, sample_observed_uniform)

from conftest import brute_girth


def cycle(n):
    return LatentGraph.from_edges([(k, (k + 1) % n) for k in range(n)])


def test_latent_cycle_two_leaves_each():
    """g=10 with two leaves per hidden node: 30 nodes, hidden degree 4, girth 10, depth 1."""
    G = gen_latent_cycle(10, 2)
    assert len(G) == 30
    assert len(G.hidden_nodes) == 10
    assert all(G.degree(h) == 4 for h in G.hidden_nodes)
    assert girth(G) == 10
    assert depth(G) == 1


def test_latent_cycle_smallest():
    G = gen_latent_cycle(3, 2)
    assert len(G) == 9
    assert girth(G) == 3


def test_latent_cycle_rejects_leafless():
    with pytest.raises(GraphError):
        gen_latent_cycle(10, 0)
    with pytest.raises(GraphError):
        gen_latent_cycle(2, 1)


@given(st.integers(3, 100), st.integers(1, 4))
@settings(max_examples=40, deadline=None)
def test_latent_cycle_girth_and_depth(g, k):
    """Girth equals the cycle length and depth is one for every generated instance."""
    G = gen_latent_cycle(g, k)
    assert girth(G) == g
    assert depth(G) == 1


def test_random_regular_girth_basic():
    G = gen_random_regular_girth(20, 3, 3, seed=1)
    assert all(G.degree(v) == 3 for v in G.nodes)
    assert len(G) == 20 and not G.hidden_nodes


def test_random_regular_girth_impossible():
    """The only 3-regular graph on 4 nodes is K4, whose girth is 3."""
    with pytest.raises(GenerationFailed):
        gen_random_regular_girth(4, 3, 4, seed=0, retry_cap=50)


def test_random_regular_girth_errors():
    with pytest.raises(GraphError):
        gen_random_regular_girth(5, 3, 3)
    with pytest.raises(GraphError):
        gen_random_regular_girth(6, 3, 3, retry_cap=0)


def test_random_regular_girth_deterministic():
    a = gen_random_regular_girth(30, 3, 5, seed=7)
    b = gen_random_regular_girth(30, 3, 5, seed=7)
    assert a.edges == b.edges
    assert girth(a) >= 5


def test_girth_examples():
    assert girth(cycle(6)) == 6
    G = cycle(6)
    G.add_edge(0, 3)
    assert girth(G) == 4
    T, _ = gen_random_latent_tree(5, seed=3)
    assert girth(T) == math.inf


@given(st.integers(3, 10), st.floats(0.1, 0.7), st.integers(0, 10_000))
@settings(max_examples=200, deadline=None)
def test_girth_matches_bruteforce(n, p, seed):
    """Exact BFS girth agrees with cycle enumeration on small random graphs."""
    rng = np.random.default_rng(seed)
    edges = [(a, b) for a in range(n) for b in range(a + 1, n) if rng.random() < p]
    G = LatentGraph.from_edges(edges, nodes=range(n))
    assert girth(G) == brute_girth(G)


def test_depth_examples():
    assert depth(cycle(5)) == 0
    chain = LatentGraph.from_edges([("h1", "h2"), ("h2", "v")],
                                   observed={"h1": False, "h2": False, "v": True})
    assert depth(chain) == 2
    with pytest.raises(GraphError):
        depth(LatentGraph.from_edges([(0, 1)], observed={0: False, 1: False}))


def test_ball_examples():
    C = cycle(10)
    ball, bnd, F = ball_and_induced(C, 0, 0)
    assert ball == {0} and bnd == {0} and len(F) == 1 and F.num_edges == 0
    ball, bnd, F = ball_and_induced(C, 0, 2)
    assert ball == {8, 9, 0, 1, 2} and bnd == {8, 2}
    assert F.num_edges == 4 and F.is_acyclic()
    ball, _, F = ball_and_induced(C, 0, 10)
    assert ball == set(C.nodes) and F.num_edges == 10


@given(st.integers(0, 10_000), st.integers(0, 5))
@settings(max_examples=60, deadline=None)
def test_ball_invariants(seed, l):
    """Boundary sits inside the ball and the induced subgraph keeps exactly the inner edges."""
    G = gen_random_regular_girth(16, 3, 3, seed=seed)
    i = int(np.random.default_rng(seed).integers(16))
    ball, bnd, F = ball_and_induced(G, i, l)
    assert bnd <= ball
    inner = {frozenset(e) for e in G.edges if e[0] in ball and e[1] in ball}
    assert {frozenset(e) for e in F.edges} == inner


def test_sample_observed_uniform():
    G = gen_latent_cycle(10, 2)
    full = sample_observed_uniform(G, 1.0, seed=0)
    assert not full.hidden_nodes and depth(full) == 0
    a = sample_observed_uniform(G, 0.5, seed=4)
    b = sample_observed_uniform(G, 0.5, seed=4)
    assert a.observed == b.observed
    with pytest.raises(GraphError):
        sample_observed_uniform(G, 0.0)
    with pytest.raises(GraphError):
        sample_observed_uniform(G, 1.5)


def test_sample_observed_fraction():
    """Binomial(10^4, 0.5) lands in [0.48, 0.52] except with probability about 6e-5."""
    G = LatentGraph.from_edges([], nodes=range(10_000))
    frac = len(sample_observed_uniform(G, 0.5, seed=11).observed_nodes) / 10_000
    assert 0.48 <= frac <= 0.52


def test_depth_bound_example():
    """Direct evaluation at m=1024, rho=0.5, degree 3, eps=0.2."""
    q = DepthBoundQuery(m=1024, rho=0.5, delta_min=3, delta_max=3, g=10, eps=0.2)
    bound, prob = depth_bound_lemma1(q)
    assert bound == pytest.approx(3.962082778558458, rel=1e-12)
    assert prob == pytest.approx(1 - 1024 ** -0.2)
    assert prob >= 0.75


def test_depth_bound_degenerate_and_errors():
    assert depth_bound_lemma1(DepthBoundQuery(100, 1.0, 3, 3, 10, 0.1)) == (0.0, 1.0)
    with pytest.raises(GraphError):
        depth_bound_lemma1(DepthBoundQuery(1024, 0.5, 3, 3, g=10, eps=50.0))
    with pytest.raises(GraphError):
        DepthBoundQuery(10, 0.5, 3, 3, 10, eps=-1.0)


def test_graph_stats_and_json():
    G = gen_latent_cycle(4, 1)
    s = graph_stats(G)
    assert (s.p, s.m, s.girth, s.delta_min, s.delta_max, s.depth) == (4, 8, 4, 1, 3, 1)
    assert s.rho == 0.5
    H = LatentGraph.from_json(G.to_json())
    assert H.edges == G.edges and H.observed == G.observed
    dot = G.to_dot()
    assert "dashed" in dot and dot.count("--") == G.num_edges


@given(st.integers(1, 12), st.integers(0, 1000))
@settings(max_examples=40, deadline=None)
def test_random_latent_tree_shape(n_internal, seed):
    """Leaves are observed, internal nodes have degree at least three, and it is a tree."""
    G, lengths = gen_random_latent_tree(n_internal, seed=seed)
    assert G.is_acyclic() and len(G.components()) == 1
    for v in G.nodes:
        assert (G.degree(v) == 1) == G.observed[v]
        assert G.degree(v) == 1 or G.degree(v) >= 3
    assert set(lengths) == set(G.edges)
