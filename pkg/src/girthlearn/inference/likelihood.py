"""Observed-data log-likelihood via P(x_V) = P(x_V, x_H) / P(x_H | x_V).

x_H is the most likely hidden configuration given x_V. With the exact
engine every term is exact and the identity gives the true likelihood for
any x_H; with LBP both factors are Bethe approximations.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._jtree import EliminationTree, ising_potentials
from ..distances import SampleMatrix
from .lbp import bethe_log_prob, run_lbp

ENGINES = ("exact", "lbp")


@dataclass
class LikelihoodInfo:
    loglik: np.ndarray  # per sample
    hidden_map: np.ndarray  # 0/1 states of hidden nodes, per sample
    engine: str
    approximate: bool
    converged: bool = True


def _observed_states(M, x_V):
    """0/1 states (n, p) ordered as M.graph.observed_nodes."""
    obs = M.graph.observed_nodes
    if isinstance(x_V, SampleMatrix):
        pos = {c: k for k, c in enumerate(x_V.columns)}
        missing = [v for v in obs if v not in pos]
        if missing:
            raise ValueError(f"samples lack observed columns {missing[:5]}")
        return x_V.data[:, [pos[v] for v in obs]].astype(np.int8)
    X = np.atleast_2d(np.asarray(x_V))
    if X.shape[1] != len(obs):
        raise ValueError("x_V must have one column per observed node")
    if X.min() < 0:
        X = (X + 1) // 2
    return X.astype(np.int8)


def _score(theta, phi, pairs, states):
    s = 2.0 * states - 1.0
    out = s @ phi
    for (a, b), t in zip(pairs, theta):
        out = out + t * s[:, a] * s[:, b]
    return out


def _clamp(node_pot, cols, X):
    rows = np.arange(X.shape[0])[:, None]
    node_pot[rows, np.asarray(cols)[None, :], 1 - X] = 0.0
    return node_pot


def loglik_observed(M, x_V, engine: str = "exact", width_cap: int = 12, hidden=None,
                    return_info: bool = False):
    """Per-sample log P(x_V) through the MAP-hidden-state identity.

    ``hidden`` optionally fixes x_H (0/1 array, one column per hidden node)
    instead of the MAP state; under the exact engine the value does not
    depend on that choice.
    """
    if engine not in ENGINES:
        raise ValueError(f"engine must be one of {ENGINES}")
    nodes, idx, pairs, theta, phi = M.arrays()
    m = len(nodes)
    X = _observed_states(M, x_V)
    obs_cols = [idx[v] for v in M.graph.observed_nodes]
    hid_cols = [idx[v] for v in M.graph.hidden_nodes]
    uniq, inverse = np.unique(X, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    B = uniq.shape[0]
    base_pot, edge_pot = ising_potentials(m, pairs, theta, phi, batch=1)
    clamped = _clamp(np.repeat(base_pot, B, axis=0), obs_cols, uniq)
    converged = True
    if engine == "exact":
        tree = EliminationTree(m, pairs, width_cap=width_cap)
        full, _ = tree.map_assignment(clamped, edge_pot)
        if hidden is not None:
            full[:, hid_cols] = np.asarray(hidden, dtype=np.int8)[np.unique(inverse, return_index=True)[1]]
        logz = tree.log_partition(base_pot, edge_pot)[0]
        logz_c = tree.log_partition(clamped, edge_pot)
        sc = _score(theta, phi, pairs, full)
        log_joint = sc - logz
        log_cond = sc - logz_c
    else:
        logn = np.log(np.maximum(clamped, 1e-300))
        nb_c, eb_c, conv_c, _ = run_lbp(m, pairs, theta, logn, mode="max")
        full = np.argmax(nb_c[:, :, ::-1], axis=2)  # reversed so ties go to +1
        full = (1 - full).astype(np.int8)
        full[:, obs_cols] = uniq
        if hidden is not None:
            full[:, hid_cols] = np.asarray(hidden, dtype=np.int8)[np.unique(inverse, return_index=True)[1]]
        nb, eb, conv, _ = run_lbp(m, pairs, theta, np.log(base_pot))
        nb_s, eb_s, conv_s, _ = run_lbp(m, pairs, theta, logn)
        log_joint = bethe_log_prob(m, pairs, np.repeat(nb, B, 0), np.repeat(eb, B, 0), full)
        log_cond = bethe_log_prob(m, pairs, nb_s, eb_s, full)
        converged = bool(conv and conv_s and conv_c)
    ll = (log_joint - log_cond)[inverse]
    if not return_info:
        return ll
    return LikelihoodInfo(ll, full[inverse][:, hid_cols], engine, engine != "exact", converged)


def loglik_exact(M, x_V, width_cap: int = 12) -> np.ndarray:
    """log P(x_V) = log Z(clamped) - log Z, without going through x_H."""
    nodes, idx, pairs, theta, phi = M.arrays()
    X = _observed_states(M, x_V)
    uniq, inverse = np.unique(X, axis=0, return_inverse=True)
    tree = EliminationTree(len(nodes), pairs, width_cap=width_cap)
    base, edge_pot = ising_potentials(len(nodes), pairs, theta, phi)
    clamped = _clamp(np.repeat(base, uniq.shape[0], axis=0),
                     [idx[v] for v in M.graph.observed_nodes], uniq)
    vals = tree.log_partition(clamped, edge_pot) - tree.log_partition(base, edge_pot)[0]
    return vals[np.asarray(inverse).reshape(-1)]


def log_prob_partial(M, states: np.ndarray, mask: np.ndarray, engine: str = "exact",
                     width_cap: int = 12) -> np.ndarray:
    """log P(x_S) per row, where S is the row's ``mask`` over model node order.

    ``states`` holds 0/1 values for all m nodes; entries outside the mask
    are ignored. The exact engine uses clamped partition functions; the
    LBP engine uses the MAP-completion identity with Bethe beliefs.
    """
    if engine not in ENGINES:
        raise ValueError(f"engine must be one of {ENGINES}")
    nodes, idx, pairs, theta, phi = M.arrays()
    m = len(nodes)
    states = np.asarray(states, dtype=np.int8)
    mask = np.asarray(mask, dtype=bool)
    B = states.shape[0]
    base, edge_pot = ising_potentials(m, pairs, theta, phi, batch=1)
    clamped = np.repeat(base, B, axis=0)
    rows, cols = np.nonzero(mask)
    clamped[rows, cols, 1 - states[rows, cols]] = 0.0
    if engine == "exact":
        tree = EliminationTree(m, pairs, width_cap=width_cap)
        return tree.log_partition(clamped, edge_pot) - tree.log_partition(base, edge_pot)[0]
    logn = np.log(np.maximum(clamped, 1e-300))
    nb_c, _, _, _ = run_lbp(m, pairs, theta, logn, mode="max")
    full = (1 - np.argmax(nb_c[:, :, ::-1], axis=2)).astype(np.int8)
    full[mask] = states[mask]
    nb, eb, _, _ = run_lbp(m, pairs, theta, np.log(base))
    nb_s, eb_s, _, _ = run_lbp(m, pairs, theta, logn)
    return (bethe_log_prob(m, pairs, np.repeat(nb, B, 0), np.repeat(eb, B, 0), full)
            - bethe_log_prob(m, pairs, nb_s, eb_s, full))
