"""Empirical correlation-decay profile: L1 gap between P(x_A) under G and under F_l(i)."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .._jtree import EliminationTree, ising_potentials
from ..graphs import ball_and_induced, edge_key


@dataclass
class DecayProfile:
    center: object
    targets: list
    ls: list = field(default_factory=list)
    values: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"center": self.center, "targets": self.targets,
                "profile": [{"l": l, "zeta": z} for l, z in zip(self.ls, self.values)]}


def marginal_table(M, A, theta=None, width_cap: int = 12) -> np.ndarray:
    """Exact joint of x_A as a flat vector over the 2^|A| state combinations."""
    nodes, idx, pairs, th, phi = M.arrays()
    if theta is not None:
        th = theta
    cols = [idx[a] for a in A]
    combos = np.array(list(itertools.product([0, 1], repeat=len(cols))), dtype=int)
    tree = EliminationTree(len(nodes), pairs, width_cap=width_cap)
    base, edge_pot = ising_potentials(len(nodes), pairs, th, phi)
    clamped = np.repeat(base, len(combos), axis=0)
    rows = np.arange(len(combos))[:, None]
    clamped[rows, np.array(cols)[None, :], 1 - combos] = 0.0
    logp = tree.log_partition(clamped, edge_pot) - tree.log_partition(base, edge_pot)[0]
    return np.exp(logp)


def decay_profile(M, i, A, l_range, width_cap: int = 12) -> DecayProfile:
    """zeta(l) = ||P_{X_A | G} - P_{X_A | F_l(i)}||_1 with F_l the ball-induced subgraph.

    Edges of G outside F_l keep their endpoints but get zero potential.
    """
    A = list(A)
    full = marginal_table(M, A, width_cap=width_cap)
    edges = M.graph.edges
    prof = DecayProfile(i, A)
    for l in l_range:
        ball, _, sub = ball_and_induced(M.graph, i, int(l))
        if not set(A) <= ball:
            raise ValueError(f"targets must lie inside B_{l}({i!r})")
        inside = set(sub.edges)
        theta = np.array([M.theta[e] if edge_key(*e) in inside else 0.0 for e in edges])
        local = marginal_table(M, A, theta=theta, width_cap=width_cap)
        prof.ls.append(int(l))
        prof.values.append(float(min(2.0, np.abs(full - local).sum())))
    return prof
