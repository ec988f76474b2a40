"""Tests for the quartet test, MST and recursive grouping."""
import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from girthlearn.distances import DistanceMatrix
from girthlearn.evaluation import edit_distance
from girthlearn.graphs import LatentGraph, gen_random_latent_tree
from girthlearn.latent_tree import mst, quartet_test, recursive_grouping

from conftest import dyadic_lengths, tree_distance_matrix


def dm_from(ids, pairs, default):
    d = np.full((len(ids), len(ids)), float(default))
    np.fill_diagonal(d, 0.0)
    pos = {v: k for k, v in enumerate(ids)}
    for (a, b), x in pairs.items():
        d[pos[a], pos[b]] = d[pos[b], pos[a]] = x
    return DistanceMatrix(list(ids), d)


def quartet_dm():
    """a, b | u, v with unit pendant and internal edges."""
    return dm_from(["a", "b", "u", "v"], {("a", "b"): 2, ("u", "v"): 2}, 3)


def path_nodes(G, s, t):
    prev = {s: None}
    stack = [s]
    while stack:
        x = stack.pop()
        for w in G.neighbors(x):
            if w not in prev:
                prev[w] = x
                stack.append(w)
    out = {t}
    while prev[t] is not None:
        t = prev[t]
        out.add(t)
    return out


def oracle_split(G, quad):
    """The pairing whose two paths are vertex-disjoint, or None for a star quartet."""
    a, b, c, d = quad
    for x, y, z, w in ((a, b, c, d), (a, c, b, d), (a, d, b, c)):
        if not path_nodes(G, x, y) & path_nodes(G, z, w):
            return frozenset([frozenset([x, y]), frozenset([z, w])])
    return None


def test_quartet_examples():
    (q,) = quartet_test(quartet_dm())
    assert q.outcome == "Q(a,b|u,v)"
    assert q.separates("a", "u") and not q.separates("a", "b")
    (q,) = quartet_test(dm_from("abcd", {}, 2))
    assert q.split is None and q.outcome == "Null"
    assert all(q.split is None for q in quartet_test(quartet_dm(), lam=1.0))
    with pytest.raises(ValueError):
        quartet_test(quartet_dm(), lam=-1)


@pytest.mark.parametrize("seed", range(100))
def test_quartet_matches_path_oracle(seed):
    """Lambda = 0 on exact binary-tree metrics reproduces the topological split of every quartet."""
    rng = np.random.default_rng(seed)
    G, lengths = gen_random_latent_tree(int(rng.integers(2, 11)), seed=seed, max_children=2)
    assert len(G.observed_nodes) <= 12
    dm = tree_distance_matrix(G, lengths)
    for q in quartet_test(dm):
        want = oracle_split(G, q.nodes)
        got = None if q.split is None else frozenset(map(frozenset, q.split))
        assert got == want


@given(st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_quartet_star_ties_are_null(seed):
    """With a tiny Lambda, quartets meeting at one node are null and the rest match the oracle."""
    G, lengths = gen_random_latent_tree(4, seed=seed, max_children=3)
    dm = tree_distance_matrix(G, lengths)
    for q in quartet_test(dm, lam=1e-9):
        got = None if q.split is None else frozenset(map(frozenset, q.split))
        assert got == oracle_split(G, q.nodes)


def test_mst_examples():
    one = DistanceMatrix([0], np.zeros((1, 1)))
    assert mst([0], one) == []
    chain = DistanceMatrix(list(range(5)), np.abs(np.subtract.outer(np.arange(5.0), np.arange(5.0))))
    assert mst(range(5), chain) == [(0, 1), (1, 2), (2, 3), (3, 4)]
    r2 = 2 ** 0.5
    sq = DistanceMatrix([0, 1, 2, 3], np.array([[0, 1, r2, 1], [1, 0, 1, r2],
                                                [r2, 1, 0, 1], [1, r2, 1, 0]]))
    assert mst(range(4), sq) == [(0, 1), (0, 3), (1, 2)]
    flat = dm_from([0, 1, 2, 3], {}, 1)
    assert mst(range(4), flat) == [(0, 1), (0, 2), (0, 3)]


def test_rg_small_cases():
    assert recursive_grouping(dm_from(["a", "b"], {}, 1.5)).edges == [("a", "b")]
    f = recursive_grouping(dm_from(["a"], {}, 0))
    assert f.edges == [] and f.nodes == ["a"]
    f = recursive_grouping(dm_from("abc", {("a", "b"): 1}, 2))
    assert not f.hidden and len(f.edges) == 2


def test_rg_star_with_outgroup():
    """Three leaves at mutual distance 2 and an outgroup at 3: one hidden hub."""
    dm = dm_from(["a", "b", "c", "o"], {("a", "o"): 3, ("b", "o"): 3, ("c", "o"): 3}, 2)
    f = recursive_grouping(dm)
    assert len(f.hidden) == 1
    (h,) = f.hidden
    assert set(f.neighbors(h)) == {"a", "b", "c", "o"}
    assert f.dist(h, "a") == pytest.approx(1.0)
    assert f.dist(h, "o") == pytest.approx(2.0)


def test_rg_quartet_tree():
    f = recursive_grouping(quartet_dm())
    truth = LatentGraph.from_edges([("a", "h1"), ("b", "h1"), ("h1", "h2"), ("u", "h2"), ("v", "h2")],
                                   observed={"h1": False, "h2": False})
    assert len(f.hidden) == 2
    assert edit_distance(truth, f.to_graph()).value == 0


def test_rg_argument_checks():
    with pytest.raises(ValueError):
        recursive_grouping(quartet_dm(), tau=0.0)
    with pytest.raises(ValueError):
        recursive_grouping(quartet_dm(), hidden_distance="other")


@given(st.integers(2, 8), st.integers(0, 100_000), st.sampled_from([0.0, 0.4]))
@settings(max_examples=60, deadline=None)
def test_rg_recovers_random_latent_trees(n_internal, seed, p_obs):
    """Exact tree metrics: the learned forest is the true tree up to hidden relabelling."""
    G, lengths = gen_random_latent_tree(n_internal, seed=seed, p_internal_observed=p_obs)
    dm = tree_distance_matrix(G, lengths)
    f = recursive_grouping(dm, lam=1e-9)
    est = f.to_graph()
    assert est.is_acyclic()
    assert edit_distance(G, est).value == 0


@given(st.integers(1, 8), st.integers(0, 100_000))
@settings(max_examples=40, deadline=None)
def test_rg_output_invariants(n_internal, seed):
    """Hidden nodes end with degree >= 3 and nonnegative child distances below sibling distances."""
    G, lengths = gen_random_latent_tree(n_internal, seed=seed, length_range=(0.05, 2.0))
    dm = tree_distance_matrix(G, lengths)
    rng = np.random.default_rng(seed)
    noise = np.triu(rng.uniform(0, 0.05, dm.d.shape), 1)
    noisy = dm.d + noise + noise.T
    f = recursive_grouping(DistanceMatrix(dm.ids, noisy), lam=1e-9, tau=0.01)
    est = f.to_graph()
    assert est.is_acyclic()
    for h in f.hidden:
        nb = f.neighbors(h)
        assert len(nb) >= 3
        assert f.children[h]
        for a, b in itertools.permutations(nb, 2):
            assert f.dist(h, a) >= 0
            if a in dm.ids and b in dm.ids:
                assert f.dist(h, a) < f.dist(a, b) + 1e-9


@given(st.integers(0, 100_000))
@settings(max_examples=40, deadline=None)
def test_quartet_exact_ties_at_zero_lambda(seed):
    """Dyadic lengths make star ties exact; Lambda = 0 must then return null, never a guess."""
    G, lengths = gen_random_latent_tree(3, seed=seed, max_children=3)
    dm = tree_distance_matrix(G, dyadic_lengths(lengths))
    for q in quartet_test(dm):
        got = None if q.split is None else frozenset(map(frozenset, q.split))
        assert got == oracle_split(G, q.nodes)
