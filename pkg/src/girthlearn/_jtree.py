"""Clique tree built from a min-fill elimination order, over binary variables.

State index 0 encodes x = -1 and index 1 encodes x = +1. Node potentials are
batched with shape ``(B, n, 2)`` so one calibration can answer many evidence
settings at once; edge potentials are shared across the batch, ``(E, 2, 2)``.
Messages are renormalised at every step and the log normalisers accumulated,
so potentials of moderate size never overflow.
"""
from __future__ import annotations

import numpy as np


class WidthExceeded(RuntimeError):
    """Induced width of the elimination order is above the configured cap."""


def min_fill_order(n: int, edges) -> list[int]:
    """Greedy min-fill elimination order, ties broken by smallest index."""
    adj = [set() for _ in range(n)]
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    remaining = set(range(n))
    order = []
    while remaining:
        best, best_fill = -1, None
        for v in sorted(remaining):
            nb = list(adj[v])
            fill = 0
            for a in range(len(nb)):
                na = adj[nb[a]]
                for b in range(a + 1, len(nb)):
                    if nb[b] not in na:
                        fill += 1
            if best_fill is None or fill < best_fill:
                best, best_fill = v, fill
                if fill == 0:
                    break
        nb = list(adj[best])
        for a in nb:
            adj[a].update(x for x in nb if x != a)
            adj[a].discard(best)
        remaining.discard(best)
        adj[best] = set()
        order.append(best)
    return order


def induced_width(n: int, edges, order=None) -> int:
    tree = EliminationTree(n, edges, width_cap=None, order=order)
    return tree.width


def _align(table, src_vars, dst_vars):
    """Reshape ``table`` (batch + src_vars axes) to broadcast against dst_vars."""
    pos = {v: k for k, v in enumerate(dst_vars)}
    perm = sorted(range(len(src_vars)), key=lambda k: pos[src_vars[k]])
    t = np.transpose(table, [0] + [k + 1 for k in perm])
    shape = [t.shape[0]] + [1] * len(dst_vars)
    for k in perm:
        shape[pos[src_vars[k]] + 1] = 2
    return t.reshape(shape)


def _marginalize(table, vars_, keep, op=np.sum):
    """Sum (or max) out every variable not in ``keep``; result axes follow ``keep``."""
    drop = tuple(k + 1 for k, v in enumerate(vars_) if v not in keep)
    t = op(table, axis=drop) if drop else table
    rest = [v for v in vars_ if v in keep]
    perm = [rest.index(v) + 1 for v in keep]
    return np.transpose(t, [0] + perm)


class EliminationTree:
    """Clique tree induced by eliminating variables in a fixed order."""

    def __init__(self, n: int, edges, width_cap: int | None = 12, order=None):
        self.n = n
        self.edges = [tuple(map(int, e)) for e in edges]
        self.order = list(order) if order is not None else min_fill_order(n, self.edges)
        pos = np.empty(n, dtype=int)
        pos[self.order] = np.arange(n)
        self.pos = pos
        adj = [set() for _ in range(n)]
        for u, v in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        self.vars, self.sep, self.parent = [], [], []
        for v in self.order:
            sep = tuple(sorted(adj[v], key=lambda x: pos[x]))
            self.vars.append((v,) + sep)
            self.sep.append(sep)
            self.parent.append(int(pos[sep[0]]) if sep else -1)
            for a in sep:
                adj[a].update(x for x in sep if x != a)
                adj[a].discard(v)
        self.children = [[] for _ in range(n)]
        for c, p in enumerate(self.parent):
            if p >= 0:
                self.children[p].append(c)
        self.width = max((len(vs) - 1 for vs in self.vars), default=0)
        if width_cap is not None and self.width > width_cap:
            raise WidthExceeded(
                f"induced width {self.width} exceeds cap {width_cap}; "
                "use sampling-based or loopy methods instead")
        self.node_home = [int(pos[v]) for v in range(n)]
        self.edge_home = [int(min(pos[u], pos[v])) for u, v in self.edges]

    # -- potentials ---------------------------------------------------------
    def _psi(self, node_pot, edge_pot):
        B = node_pot.shape[0]
        psi = [np.ones((B,) + (2,) * len(vs)) for vs in self.vars]
        for v in range(self.n):
            c = self.node_home[v]
            psi[c] = psi[c] * _align(node_pot[:, v, :], (v,), self.vars[c])
        for e, (u, v) in enumerate(self.edges):
            c = self.edge_home[e]
            psi[c] = psi[c] * _align(edge_pot[e][None], (u, v), self.vars[c])
        return psi

    def _upward(self, psi, op=np.sum):
        B = psi[0].shape[0] if psi else 1
        logz = np.zeros(B)
        up, bel_up = [None] * self.n, [None] * self.n
        for c in range(self.n):
            bel = psi[c]
            for ch in self.children[c]:
                bel = bel * _align(up[ch], self.sep[ch], self.vars[c])
            bel_up[c] = bel
            m = op(bel, axis=1)
            z = m.reshape(B, -1).sum(axis=1) if op is np.sum else m.reshape(B, -1).max(axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                logz += np.log(z)
                up[c] = m / z.reshape((B,) + (1,) * (m.ndim - 1))
        return up, bel_up, logz

    def calibrate(self, node_pot, edge_pot):
        """Sum-product calibration.

        Returns ``(logZ[B], node_marg[B, n, 2], edge_marg[B, E, 2, 2])``.
        """
        node_pot = np.asarray(node_pot, dtype=float)
        edge_pot = np.asarray(edge_pot, dtype=float)
        psi = self._psi(node_pot, edge_pot)
        up, _, logz = self._upward(psi)
        B = node_pot.shape[0]
        down = [None] * self.n
        beliefs = [None] * self.n
        for c in reversed(range(self.n)):
            base = psi[c]
            if self.parent[c] >= 0:
                base = base * _align(down[c], self.sep[c], self.vars[c])
            incoming = [_align(up[ch], self.sep[ch], self.vars[c]) for ch in self.children[c]]
            full = base
            for t in incoming:
                full = full * t
            beliefs[c] = full
            for k, ch in enumerate(self.children[c]):
                t = base
                for j, other in enumerate(incoming):
                    if j != k:
                        t = t * other
                m = _marginalize(t, self.vars[c], self.sep[ch])
                z = m.reshape(B, -1).sum(axis=1)
                down[ch] = m / z.reshape((B,) + (1,) * (m.ndim - 1))
        node_marg = np.empty((B, self.n, 2))
        for v in range(self.n):
            c = self.node_home[v]
            m = _marginalize(beliefs[c], self.vars[c], (v,))
            node_marg[:, v, :] = m / m.sum(axis=1, keepdims=True)
        edge_marg = np.empty((B, len(self.edges), 2, 2))
        for e, (u, v) in enumerate(self.edges):
            c = self.edge_home[e]
            m = _marginalize(beliefs[c], self.vars[c], (u, v))
            edge_marg[:, e] = m / m.reshape(B, -1).sum(axis=1)[:, None, None]
        return logz, node_marg, edge_marg

    def log_partition(self, node_pot, edge_pot):
        psi = self._psi(np.asarray(node_pot, float), np.asarray(edge_pot, float))
        return self._upward(psi)[2]

    def map_assignment(self, node_pot, edge_pot):
        """Max-product decoding; ties go to state 1 (x = +1). Returns (states[B, n], log max score)."""
        node_pot = np.asarray(node_pot, dtype=float)
        psi = self._psi(node_pot, np.asarray(edge_pot, float))
        _, bel_up, logmax = self._upward(psi, op=np.max)
        B = node_pot.shape[0]
        x = np.zeros((B, self.n), dtype=np.int8)
        rows = np.arange(B)
        for c in reversed(range(self.n)):
            v = self.vars[c][0]
            idx = (rows, slice(None)) + tuple(x[:, s] for s in self.sep[c])
            b = bel_up[c][idx]
            x[:, v] = b[:, 1] >= b[:, 0]
        return x, logmax

    def sample(self, node_pot, edge_pot, n_samples: int, rng) -> np.ndarray:
        """Exact forward sampling in reverse elimination order. Returns states[n_samples, n]."""
        node_pot = np.asarray(node_pot, dtype=float)[:1]
        psi = self._psi(node_pot, np.asarray(edge_pot, float))
        _, bel_up, _ = self._upward(psi)
        x = np.zeros((n_samples, self.n), dtype=np.int8)
        for c in reversed(range(self.n)):
            v = self.vars[c][0]
            t = bel_up[c][0]
            p1 = t[1] / (t[0] + t[1])
            if self.sep[c]:
                p1 = p1[tuple(x[:, s] for s in self.sep[c])]
            x[:, v] = rng.random(n_samples) < p1
        return x


def ising_potentials(n: int, edges, theta, phi, batch: int = 1):
    """Linear-domain potentials exp(phi x) and exp(theta x x') for spins in {-1,+1}."""
    spins = np.array([-1.0, 1.0])
    phi = np.asarray(phi, dtype=float)
    node = np.exp(phi[:, None] * spins[None, :])
    node = np.broadcast_to(node, (batch, n, 2)).copy()
    theta = np.asarray(theta, dtype=float).reshape(-1)
    edge = np.exp(theta[:, None, None] * np.outer(spins, spins)[None])
    return node, edge
