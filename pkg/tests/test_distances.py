"""Tests for empirical joints, information distances and oracle distance matrices."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from girthlearn.distances import (D_CAP, DistanceError, DistanceMatrix, SampleMatrix,
                                  empirical_distances, empirical_joint, info_distance,
                                  oracle_distances)
from girthlearn.graphs import LatentGraph, edge_key, gen_latent_cycle, gen_random_latent_tree
from girthlearn.inference import enumerate_oracle
from girthlearn.models import IsingModel, gen_potentials, sample_exact, two_node_table


def samples(rows, cols=(0, 1)):
    return SampleMatrix((np.asarray(rows) + 1) // 2, list(cols))


def test_empirical_joint_examples():
    J = empirical_joint(samples([[1, 1], [-1, -1]]), 0, 1)
    assert np.array_equal(J, [[0.5, 0], [0, 0.5]])
    J = empirical_joint(samples([[1, 1], [1, -1], [-1, 1], [-1, -1]]), 0, 1)
    assert np.allclose(J, 0.25)
    J = empirical_joint(samples([[1, 1], [-1, -1]]), 0, 1, pseudocount=1)
    assert np.allclose(J, [[2 / 6, 1 / 6], [1 / 6, 2 / 6]])
    with pytest.raises(DistanceError):
        empirical_joint(SampleMatrix(np.zeros((0, 2)), [0, 1]), 0, 1)


def test_info_distance_examples():
    assert info_distance(np.diag([0.5, 0.5])) == 0.0
    assert info_distance(np.full((2, 2), 0.25)) == D_CAP
    assert info_distance(np.full((2, 2), 0.25), "raw_det") == D_CAP
    assert info_distance(two_node_table(0.2, 0, 0)) == pytest.approx(-math.log(math.tanh(0.2)), rel=1e-12)
    assert info_distance(two_node_table(0.2, 0, 0)) == pytest.approx(1.6226, abs=5e-5)
    with pytest.raises(DistanceError):
        info_distance(np.diag([0.5, 0.5]), "other")


def test_raw_det_is_literal():
    J = two_node_table(0.4, 0.3, -0.2)
    assert info_distance(J, "raw_det") == pytest.approx(-math.log(abs(np.linalg.det(J))), rel=1e-12)


def test_empirical_distances_match_pairwise():
    rng = np.random.default_rng(0)
    S = SampleMatrix(rng.integers(0, 2, size=(200, 4)), [0, 1, 2, 3])
    dm = empirical_distances(S)
    dm.check()
    for a in range(4):
        for b in range(4):
            if a != b:
                assert dm(a, b) == pytest.approx(info_distance(empirical_joint(S, a, b)), abs=1e-12)


def test_oracle_c4_matches_enumeration():
    """Observed 4-cycle with theta 0.2: elimination joints equal brute-force enumeration."""
    G = LatentGraph.from_edges([(0, 1), (1, 2), (2, 3), (3, 0)])
    M = IsingModel(G, {e: 0.2 for e in G.edges}, {v: 0.0 for v in G.nodes})
    dm = oracle_distances(M, "exact_global")
    pairs = [(a, b) for a in range(4) for b in range(a + 1, 4)]
    ref = enumerate_oracle(M, pairs)
    for a, b in pairs:
        assert dm(a, b) == pytest.approx(info_distance(ref.pair_marginals[(a, b)]), abs=1e-12)


def test_oracle_tree_variants_agree():
    G, _ = gen_random_latent_tree(4, seed=2)
    M = gen_potentials(G, (0.2, 0.6), phi_value=0.1, seed=2)
    a = oracle_distances(M, "exact_global")
    b = oracle_distances(M, "exact_tree_limit")
    assert np.allclose(a.d, b.d, atol=1e-10)


def test_oracle_large_girth_tree_limit_close():
    G = gen_latent_cycle(30, 1)
    M = gen_potentials(G, (0.05, 0.2), seed=0)
    a = oracle_distances(M, "exact_global")
    b = oracle_distances(M, "exact_tree_limit")
    mask = (a.d < 20) & (b.d < 20)
    assert np.max(np.abs(a.d - b.d)[mask]) < 1e-2


@given(st.integers(1, 6), st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_tree_additivity(n_internal, seed):
    """Zero-field tree: normalized distances add along paths to 1e-9."""
    G, _ = gen_random_latent_tree(n_internal, seed=seed)
    M = gen_potentials(G, (0.3, 0.9), sign="random", seed=seed)
    ids = G.nodes
    dm = oracle_distances(M, "exact_global", nodes=ids)
    root = ids[0]
    acc = {root: 0.0}
    stack = [root]
    while stack:
        u = stack.pop()
        for w in G.neighbors(u):
            if w not in acc:
                acc[w] = acc[u] - math.log(abs(math.tanh(M.theta[edge_key(u, w)])))
                stack.append(w)
    for v in ids:
        assert dm(root, v) == pytest.approx(acc[v], abs=1e-9)


def test_single_edge_consistency():
    """At n=10^5 the empirical distance is within 0.05 in at least 95 of 100 seeds."""
    G = LatentGraph.from_edges([(0, 1)])
    M = IsingModel(G, {(0, 1): 0.2}, {0: 0.0, 1: 0.0})
    d = -math.log(math.tanh(0.2))
    hits = sum(abs(empirical_distances(sample_exact(M, 100_000, seed=s))(0, 1) - d) < 0.05
               for s in range(100))
    assert hits >= 95


@given(st.integers(0, 10_000), st.sampled_from(["raw_det", "normalized_det"]),
       st.floats(0, 2))
@settings(max_examples=40, deadline=None)
def test_matrix_invariants(seed, metric, pc):
    rng = np.random.default_rng(seed)
    S = SampleMatrix(rng.integers(0, 2, size=(int(rng.integers(1, 40)), 5)), list("abcde"))
    dm = empirical_distances(S, metric, pseudocount=pc)
    assert np.array_equal(dm.d, dm.d.T)
    assert np.all(np.diag(dm.d) == 0)
    assert dm.d.min() >= 0 and dm.d.max() <= D_CAP


def test_csv_roundtrips():
    S = samples([[1, -1, 1], [-1, -1, 1]], cols=[3, "x", 7])
    R = SampleMatrix.from_csv(S.to_csv())
    assert R.columns == [3, "x", 7] and np.array_equal(R.data, S.data)
    dm = DistanceMatrix([1, 2], np.array([[0, 0.5], [0.5, 0]]), "exact_global", "raw_det")
    back = DistanceMatrix.from_csv(dm.to_csv(), dm.meta_json())
    assert back.ids == [1, 2] and np.array_equal(back.d, dm.d)
    assert (back.variant, back.metric) == ("exact_global", "raw_det")


def test_non_binary_alphabet():
    S = SampleMatrix(np.array([[0, 0], [1, 1], [2, 2]]), [0, 1], alphabet_size=3)
    assert empirical_distances(S)(0, 1) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(DistanceError):
        SampleMatrix(np.array([[0, 3]]), [0, 1], alphabet_size=3)
