"""Loopy belief propagation for pairwise binary models.

Synchronous (flooding) schedule with damping, batched over evidence
settings: node log-potentials have shape (B, n, 2) and every batch row runs
its own message passing in lock step.
"""
from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .._jtree import ising_potentials
from .exact import InferenceResult

_SPINS = np.array([-1.0, 1.0])


class _Directed:
    def __init__(self, n, pairs):
        src, dst, rev = [], [], []
        for k, (a, b) in enumerate(pairs):
            src += [a, b]
            dst += [b, a]
            rev += [2 * k + 1, 2 * k]
        self.n = n
        self.src = np.array(src, dtype=int)
        self.dst = np.array(dst, dtype=int)
        self.rev = np.array(rev, dtype=int)
        self.edge_of = np.repeat(np.arange(len(pairs)), 2)
        self.flip = np.tile([False, True], len(pairs))  # message b -> a uses transposed table
        self.degree = np.bincount(self.dst, minlength=n) if len(dst) else np.zeros(n, int)


def _incoming(D, logm, B):
    tot = np.zeros((B, D.n, 2))
    np.add.at(tot, (slice(None), D.dst), logm)
    return tot


def run_lbp(n, pairs, theta, log_node, damping=0.5, tol=1e-8, max_iters=1000, mode="sum"):
    """Core message passing. Returns (node_beliefs, edge_beliefs, converged, iters)."""
    D = _Directed(n, pairs)
    B = log_node.shape[0]
    theta = np.asarray(theta, dtype=float)
    log_edge = theta[:, None, None] * np.outer(_SPINS, _SPINS)[None]  # (E, x_a, x_b)
    log_pair = log_edge[D.edge_of]
    log_pair = np.where(D.flip[:, None, None], np.transpose(log_pair, (0, 2, 1)), log_pair)
    # log_pair[d, x_src, x_dst]
    msgs = np.full((B, len(D.src), 2), 0.5)
    converged, it = False, 0
    reduce = (lambda a, axis: logsumexp(a, axis=axis)) if mode == "sum" else (lambda a, axis: a.max(axis=axis))
    for it in range(1, max_iters + 1):
        logm = np.log(msgs)
        tot = log_node + _incoming(D, logm, B)
        cavity = tot[:, D.src, :] - logm[:, D.rev, :]  # (B, Dn, x_src)
        new = reduce(cavity[:, :, :, None] + log_pair[None], axis=2)
        new = np.exp(new - new.max(axis=2, keepdims=True))
        new /= new.sum(axis=2, keepdims=True)
        # undamped residual, so damping does not shrink the stopping test
        delta = np.abs(new - msgs).max() if msgs.size else 0.0
        if delta < tol:
            msgs = new
            converged = True
            break
        msgs = (1.0 - damping) * new + damping * msgs
    if max_iters <= 0:
        it = 0
    logm = np.log(msgs)
    tot = log_node + _incoming(D, logm, B)
    nb = np.exp(tot - tot.max(axis=2, keepdims=True))
    nb /= nb.sum(axis=2, keepdims=True)
    E = len(pairs)
    eb = np.empty((B, E, 2, 2))
    if E:
        fwd = np.arange(0, 2 * E, 2)  # a -> b
        bwd = fwd + 1  # b -> a
        a = D.src[fwd]
        b = D.dst[fwd]
        cav_a = tot[:, a, :] - logm[:, bwd, :]
        cav_b = tot[:, b, :] - logm[:, fwd, :]
        le = cav_a[:, :, :, None] + cav_b[:, :, None, :] + log_edge[None]
        le = np.exp(le - le.max(axis=(2, 3), keepdims=True))
        eb = le / le.sum(axis=(2, 3), keepdims=True)
    return nb, eb, converged, it


def bethe_log_prob(n, pairs, node_b, edge_b, states) -> np.ndarray:
    """log of prod_e b_e(x) * prod_i b_i(x)^(1 - deg_i), exact on trees.

    ``states`` holds 0/1 state indices with shape (B, n).
    """
    B = states.shape[0]
    rows = np.arange(B)[:, None]
    deg = np.zeros(n, dtype=int)
    for a, b in pairs:
        deg[a] += 1
        deg[b] += 1
    with np.errstate(divide="ignore"):
        ln = np.log(node_b[rows, np.arange(n)[None, :], states])
        out = ((1 - deg)[None, :] * ln).sum(axis=1)
        if pairs:
            P = np.asarray(pairs)
            le = np.log(edge_b[rows, np.arange(len(pairs))[None, :], states[:, P[:, 0]], states[:, P[:, 1]]])
            out = out + le.sum(axis=1)
    return out


def bethe_log_partition(n, pairs, theta, log_node, node_b, edge_b) -> np.ndarray:
    """Bethe approximation to log Z per batch row."""
    theta = np.asarray(theta, dtype=float)
    deg = np.zeros(n, dtype=int)
    for a, b in pairs:
        deg[a] += 1
        deg[b] += 1
    with np.errstate(divide="ignore", invalid="ignore"):
        nb_log = np.where(node_b > 0, np.log(node_b), 0.0)
        energy_n = (node_b * log_node).sum(axis=(1, 2))
        ent_n = -(node_b * nb_log).sum(axis=2)
        out = energy_n + ((1 - deg)[None, :] * ent_n).sum(axis=1)
        if pairs:
            le = theta[:, None, None] * np.outer(_SPINS, _SPINS)[None]
            eb_log = np.where(edge_b > 0, np.log(edge_b), 0.0)
            out = out + (edge_b * le[None]).sum(axis=(1, 2, 3)) - (edge_b * eb_log).sum(axis=(1, 2, 3))
    return out


def lbp(M, damping: float = 0.5, tol: float = 1e-8, max_iters: int = 1000) -> InferenceResult:
    """Sum-product LBP marginals with a Bethe estimate of log Z."""
    nodes, _, pairs, theta, phi = M.arrays()
    node_pot, _ = ising_potentials(len(nodes), pairs, theta, phi)
    log_node = np.log(node_pot)
    nb, eb, conv, it = run_lbp(len(nodes), pairs, theta, log_node, damping, tol, max_iters)
    logz = bethe_log_partition(len(nodes), pairs, theta, log_node, nb, eb)
    pm = {e: eb[0, k] for k, e in enumerate(M.graph.edges)}
    return InferenceResult(nodes, nb[0], pm, float(logz[0]), bool(conv), int(it))
