"""Generalized EM for Ising models with hidden nodes.

E-step: exact clamped calibration, one batch row per distinct observed
pattern. M-step: a fixed number of gradient-ascent steps on the expected
complete log-likelihood Q(w) = w . T_bar - A(w), halving the step whenever
Q would decrease, so each iteration can only raise the likelihood.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .._jtree import EliminationTree, ising_potentials
from ..graphs import LatentGraph
from ..models import IsingModel
from .likelihood import _clamp, _observed_states

_SIGN = np.array([[1.0, -1.0], [-1.0, 1.0]])  # x_u x_v on the 2x2 state grid


@dataclass
class EMHistory:
    loglik: list = field(default_factory=list)  # mean per-sample log-likelihood before each step
    q_gain: list = field(default_factory=list)


def _moments(node_marg, edge_marg):
    """E[x_i] per node and E[x_u x_v] per edge, per batch row."""
    return node_marg[..., 1] - node_marg[..., 0], (edge_marg * _SIGN).sum(axis=(-1, -2))


class _Problem:
    def __init__(self, graph: LatentGraph, S, width_cap):
        self.graph = graph
        self.nodes = graph.nodes
        self.idx = {v: k for k, v in enumerate(self.nodes)}
        self.pairs = [(self.idx[u], self.idx[v]) for u, v in graph.edges]
        self.tree = EliminationTree(len(self.nodes), self.pairs, width_cap=width_cap)
        probe = IsingModel(graph, {e: 0.0 for e in graph.edges}, {v: 0.0 for v in self.nodes})
        X = _observed_states(probe, S)
        self.uniq, counts = np.unique(X, axis=0, return_counts=True)
        self.w = counts / counts.sum()
        self.obs_cols = [self.idx[v] for v in graph.observed_nodes]

    def split(self, vec):
        E = len(self.pairs)
        return vec[:E], vec[E:]

    def expected_stats(self, vec):
        """(T_bar under the posterior, mean log-likelihood)."""
        theta, phi = self.split(vec)
        m = len(self.nodes)
        base, edge_pot = ising_potentials(m, self.pairs, theta, phi)
        clamped = _clamp(np.repeat(base, len(self.w), axis=0), self.obs_cols, self.uniq)
        logz_c, nm, em = self.tree.calibrate(clamped, edge_pot)
        logz = self.tree.log_partition(base, edge_pot)[0]
        mx, mxx = _moments(nm, em)
        T = np.concatenate([self.w @ mxx, self.w @ mx])
        return T, float(self.w @ logz_c - logz)

    def model_stats(self, vec):
        """(E_w[T], A(w))."""
        theta, phi = self.split(vec)
        base, edge_pot = ising_potentials(len(self.nodes), self.pairs, theta, phi)
        logz, nm, em = self.tree.calibrate(base, edge_pot)
        mx, mxx = _moments(nm[0], em[0])
        return np.concatenate([mxx, mx]), float(logz[0])

    def q_value(self, vec, T):
        return float(vec @ T - self.model_stats(vec)[1])

    def to_model(self, vec):
        theta, phi = self.split(vec)
        return IsingModel(self.graph.copy(), dict(zip(self.graph.edges, map(float, theta))),
                          dict(zip(self.nodes, map(float, phi))))


def q_gradient(model: IsingModel, S, at: IsingModel | None = None, width_cap: int = 12):
    """Gradient of Q(. | model) evaluated at ``at`` (defaults to ``model``): T_bar - E_at[T]."""
    prob = _Problem(model.graph, S, width_cap)
    T, _ = prob.expected_stats(_vector(model, prob))
    ET, _ = prob.model_stats(_vector(at or model, prob))
    return T - ET


def q_function(model: IsingModel, S, at: IsingModel, width_cap: int = 12) -> float:
    prob = _Problem(model.graph, S, width_cap)
    T, _ = prob.expected_stats(_vector(model, prob))
    return prob.q_value(_vector(at, prob), T)


def _vector(M: IsingModel, prob: _Problem):
    return np.concatenate([[M.theta[e] for e in prob.graph.edges],
                           [M.phi[v] for v in prob.nodes]]).astype(float)


def em_fit(structure, S, iters: int = 20, step: float = 0.1, inner_steps: int = 50,
           warm_start: IsingModel | None = None, fit_phi: bool = True, tol: float = 0.0,
           width_cap: int = 12, return_history: bool = False):
    """Fit theta (and phi) on a fixed structure by generalized EM.

    ``structure`` is a LatentGraph (initialised at zero potentials) or an
    IsingModel used as the starting point.
    """
    if isinstance(structure, IsingModel):
        warm_start = warm_start or structure
        graph = structure.graph
    else:
        graph = structure
    prob = _Problem(graph, S, width_cap)
    E = len(prob.pairs)
    vec = _vector(warm_start, prob) if warm_start is not None else np.zeros(E + len(prob.nodes))
    mask = np.ones_like(vec)
    if not fit_phi:
        mask[E:] = 0.0
    hist = EMHistory()
    for _ in range(iters):
        T, ll = prob.expected_stats(vec)
        hist.loglik.append(ll)
        q0 = prob.q_value(vec, T)
        q = q0
        for _ in range(inner_steps):
            ET, _ = prob.model_stats(vec)
            g = (T - ET) * mask
            eta = step
            while eta > 1e-8:
                cand = vec + eta * g
                qc = prob.q_value(cand, T)
                if qc >= q:
                    vec, q = cand, qc
                    break
                eta *= 0.5
            else:
                break
        hist.q_gain.append(q - q0)
        if len(hist.loglik) > 1 and abs(hist.loglik[-1] - hist.loglik[-2]) < tol:
            break
    if iters > 0:
        hist.loglik.append(prob.expected_stats(vec)[1])
    fitted = prob.to_model(vec)
    return (fitted, hist) if return_history else fitted
