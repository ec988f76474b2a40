"""Quartet test, minimum spanning trees and recursive grouping for latent trees.

Everything here works on a DistanceMatrix over a node set A; members of A
may themselves be hidden nodes introduced earlier (EstOne passes those in
with extended distances), they are then treated as hidden for merging.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .distances import DistanceMatrix
from .graphs import LatentGraph, edge_key, id_key

# pairing p splits the sorted quadruple (i, j, k, l) as
#   p=0: ij|kl   p=1: ik|jl   p=2: il|jk
_PAIRINGS = ((0, 1, 2, 3), (0, 2, 1, 3), (0, 3, 1, 2))


@dataclass(frozen=True)
class Quartet:
    nodes: tuple  # the four ids, sorted by id_key
    split: tuple | None  # ((a, b), (u, v)) or None for a null result

    @property
    def outcome(self) -> str:
        if self.split is None:
            return "Null"
        (a, b), (u, v) = self.split
        return f"Q({a},{b}|{u},{v})"

    def separates(self, a, b) -> bool:
        if self.split is None:
            return False
        left, right = self.split
        return (a in left and b in right) or (a in right and b in left)


def _quartet_arrays(D: np.ndarray, lam: float):
    """Vectorised quartet test over all 4-subsets of range(len(D)).

    Returns (quads[K, 4], outcome[K]) with outcome -1 for null or the index
    of the winning pairing.
    """
    n = D.shape[0]
    if n < 4:
        return np.zeros((0, 4), dtype=int), np.zeros(0, dtype=int)
    quads = np.array(list(itertools.combinations(range(n), 4)), dtype=int)
    # log domain; with lam = 0 this is the four-point condition on distance
    # sums, so exact ties stay ties instead of hinging on exp() rounding
    if lam == 0:
        lo = hi = -D
    else:
        S = np.exp(-D)
        with np.errstate(divide="ignore"):
            lo = np.log(np.maximum(S - lam, 0.0))
        hi = np.log(S + lam)
    low, high = [], []
    for a, b, c, d in _PAIRINGS:
        qa, qb, qc, qd = quads[:, a], quads[:, b], quads[:, c], quads[:, d]
        low.append(lo[qa, qb] + lo[qc, qd])
        high.append(hi[qa, qb] + hi[qc, qd])
    out = np.full(len(quads), -1)
    for p in range(3):
        o1, o2 = [q for q in range(3) if q != p]
        out[low[p] > np.maximum(high[o1], high[o2])] = p
    return quads, out


def _declared(quads, out):
    """Declared quartets as rows (x, y, z, w) meaning xy|zw."""
    keep = out >= 0
    q, o = quads[keep], out[keep]
    rows = np.empty_like(q)
    for p, perm in enumerate(_PAIRINGS):
        m = o == p
        rows[m] = q[m][:, list(perm)]
    return rows


def quartet_test(dm: DistanceMatrix, A=None, lam: float = 0.0) -> set:
    """Robust quartet test on every 4-subset of A (all ids of ``dm`` by default)."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    ids = sorted(A if A is not None else dm.ids, key=id_key)
    sub = dm.sub(ids)
    quads, out = _quartet_arrays(sub.d, lam)
    res = set()
    for q, o in zip(quads, out):
        nodes = tuple(ids[k] for k in q)
        if o < 0:
            res.add(Quartet(nodes, None))
        else:
            a, b, c, d = (nodes[k] for k in _PAIRINGS[o])
            res.add(Quartet(nodes, ((a, b), (c, d))))
    return res


def mst(A, dm: DistanceMatrix, ndigits: int = 9) -> list:
    """Kruskal MST over A. Weights are rounded before sorting so float noise
    cannot flip the (deterministic, lexicographic) tie-break."""
    nodes = sorted(A, key=id_key)
    parent = {v: v for v in nodes}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    cand = []
    for a, b in itertools.combinations(nodes, 2):
        u, v = edge_key(a, b)
        cand.append((round(dm(u, v), ndigits), id_key(u), id_key(v), u, v))
    cand.sort(key=lambda t: t[:3])
    tree = []
    for _, _, _, u, v in cand:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
            tree.append((u, v))
            if len(tree) == len(nodes) - 1:
                break
    return sorted(tree, key=lambda e: (id_key(e[0]), id_key(e[1])))


@dataclass
class LatentForest:
    base: list  # input node set A
    nodes: list
    edges: list
    lengths: dict  # edge_key -> length
    children: dict  # introduced hidden id -> frozenset of base ids below it
    dist: DistanceMatrix  # distances over base plus surviving introduced nodes
    hidden: list = field(default_factory=list)  # introduced hidden ids that survived
    merged: dict = field(default_factory=dict)  # removed id -> surviving id
    log: list = field(default_factory=list)

    def neighbors(self, v) -> list:
        return sorted({b if a == v else a for a, b in self.edges if v in (a, b)}, key=id_key)

    def to_graph(self, hidden_base=()) -> LatentGraph:
        hid = set(self.hidden) | set(hidden_base)
        obs = {v: v not in hid for v in self.nodes}
        return LatentGraph.from_edges(self.edges, observed=obs, nodes=self.nodes)

    def to_json(self, hidden_base=()) -> str:
        g = self.to_graph(hidden_base).to_dict()
        g["lengths"] = [[u, v, self.lengths[(u, v)]] for u, v in self.edges]
        return json.dumps(g, sort_keys=True)


class _Table:
    """Growing symmetric distance table over base nodes plus new hidden nodes."""

    def __init__(self, dm: DistanceMatrix):
        self.ids = list(dm.ids)
        self.pos = {v: k for k, v in enumerate(self.ids)}
        self.T = np.array(dm.d, dtype=float)

    def add(self, v, row: np.ndarray):
        n = len(self.ids)
        T = np.zeros((n + 1, n + 1))
        T[:n, :n] = self.T
        T[n, :n] = T[:n, n] = row
        self.T = T
        self.pos[v] = n
        self.ids.append(v)

    def __call__(self, u, v):
        return self.T[self.pos[u], self.pos[v]]


def _hidden_id_source(taken):
    taken = set(taken)
    k = 0
    while True:
        name = f"h{k}"
        k += 1
        if name not in taken:
            yield name


def recursive_grouping(dm: DistanceMatrix, lam: float = 0.0, tau: float = 1e-6,
                       hidden_base=(), new_ids=None, hidden_distance: str = "corrected",
                       ndigits: int = 9) -> LatentForest:
    """Recursive grouping over all ids of ``dm``.

    ``hidden_base`` marks members of the input that are themselves hidden;
    ``new_ids`` yields names for introduced nodes. ``hidden_distance``
    selects the corrected (pendant-adjusted) or literal children-average rule
    for distances between introduced nodes.
    """
    if lam < 0 or tau <= 0:
        raise ValueError("need lambda >= 0 and tau > 0")
    if hidden_distance not in ("corrected", "literal"):
        raise ValueError("hidden_distance must be 'corrected' or 'literal'")
    base = list(dm.ids)
    new_ids = new_ids if new_ids is not None else _hidden_id_source(base)
    if len(base) < 2:
        return LatentForest(base, list(base), [], {}, {}, dm)
    if len(base) <= 3:
        edges = mst(base, dm, ndigits)
        return LatentForest(base, list(base), edges, {e: dm(*e) for e in edges}, {}, dm,
                            log=[{"op": "mst", "nodes": len(base)}])

    n = len(base)
    tab = _Table(dm)
    quads, out = _quartet_arrays(dm.d, lam)
    Q = _declared(quads, out)
    active = list(range(n))  # indices into tab.ids
    desc = {k: {k} for k in range(n)}  # universe index -> base indices below it (inclusive)
    under = {k: {k} for k in range(n)}  # universe index -> all universe indices below it
    edges, log = [], []
    new_hidden = []

    while len(active) > 1:
        grp = np.empty(n, dtype=int)
        for g, a in enumerate(active):
            grp[list(desc[a])] = g
        k = len(active)
        sep = np.zeros((k, k), dtype=bool)
        if len(Q):
            x, y, z, w = (grp[Q[:, c]] for c in range(4))
            for ga, gb, o1, o2 in ((x, z, y, w), (x, w, y, z), (y, z, x, w), (y, w, x, z)):
                ok = (ga != gb) & (o1 != ga) & (o1 != gb) & (o2 != ga) & (o2 != gb)
                sep[ga[ok], gb[ok]] = True
        sep |= sep.T
        fams = _components(~sep)
        fams = [f for f in fams if len(f) >= 2]
        if not fams:
            break
        next_active = set(active)
        for f in fams:
            members = [active[g] for g in f]
            wit = [a for a in active if a not in members]
            if len(members) == 2 and not wit:
                i, j = members
                edges.append((i, j, tab.T[i, j]))
                next_active -= set(members)
                log.append({"op": "join", "nodes": [tab.ids[i], tab.ids[j]]})
                continue
            pend = _pendants(tab.T, members, wit)
            h = next(new_ids)
            hi = len(tab.ids)
            row = _hidden_row(tab.T, members, pend, desc, under, hi, hidden_distance,
                              set(new_hidden))
            tab.add(h, row)
            new_hidden.append(hi)
            desc[hi] = set().union(*(desc[c] for c in members))
            under[hi] = set().union(*(under[c] for c in members)) | {hi}
            for c in members:
                edges.append((hi, c, pend[c]))
            next_active -= set(members)
            next_active.add(hi)
            log.append({"op": "group", "hidden": h, "children": [tab.ids[c] for c in members]})
        active = sorted(next_active)

    return _finish(tab, base, edges, new_hidden, set(hidden_base), desc, tau, log)


def _components(adj: np.ndarray) -> list:
    k = adj.shape[0]
    seen, comps = set(), []
    for s in range(k):
        if s in seen:
            continue
        stack, comp = [s], []
        seen.add(s)
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in np.flatnonzero(adj[u]):
                if v not in seen:
                    seen.add(int(v))
                    stack.append(int(v))
        comps.append(sorted(comp))
    return comps


def _pendants(T, members, wit) -> dict:
    """Estimated distance from each family member to the new parent, clamped at 0."""
    pend = {}
    for i in members:
        vals = []
        others = [j for j in members if j != i]
        if wit:
            for j in others:
                vals.append(0.5 * (T[i, j] + np.mean([T[i, k] - T[j, k] for k in wit])))
        else:
            for j, k in itertools.combinations(others, 2):
                vals.append(0.5 * (T[i, j] + T[i, k] - T[j, k]))
        pend[i] = max(0.0, float(np.mean(vals)))
    return pend


def _hidden_row(T, members, pend, desc, under, hi, rule, hidden_set) -> np.ndarray:
    """Distances from the new node (index hi) to every current universe index."""
    N = T.shape[0]
    row = np.zeros(N)
    below = set().union(*(under[c] for c in members))
    for c in members:
        for x in under[c]:
            row[x] = T[x, c] + pend[c]
    C = sorted(set().union(*(desc[c] for c in members)))
    for x in range(N):
        if x in below:
            continue
        if x in hidden_set:
            Cx = sorted(desc[x])
            if rule == "literal":
                row[x] = np.mean(T[np.ix_(C, Cx)])
            else:
                row[x] = np.mean([row[b] - T[b, x] for b in Cx])
        else:
            row[x] = np.mean([T[a, x] - row[a] for a in C])
    return np.maximum(row, 0.0)


def _finish(tab, base, raw_edges, new_hidden, hidden_base, desc, tau, log) -> LatentForest:
    ids = tab.ids
    adj: dict = {ids[k]: {} for k in range(len(base))}
    for hi in new_hidden:
        adj[ids[hi]] = {}
    for i, j, L in raw_edges:
        u, v = ids[i], ids[j]
        adj[u][v] = adj[v][u] = float(L)
    is_new = {ids[h] for h in new_hidden}
    order = {v: k for k, v in enumerate(ids)}  # creation order; base (older) first
    merged = {}

    def hidden(v):
        return v in is_new or v in hidden_base

    # tau-merging, shortest eligible edge first
    while True:
        cand = [(L, order[u], order[v], u, v) for u in adj for v, L in adj[u].items()
                if order[u] < order[v] and L < tau and (hidden(u) or hidden(v))]
        if not cand:
            break
        _, _, _, u, v = min(cand)
        if hidden(u) and hidden(v):
            keep, gone = (u, v) if order[u] < order[v] else (v, u)
        else:
            keep, gone = (v, u) if hidden(u) else (u, v)
        for y, L in adj.pop(gone).items():
            del adj[y][gone]
            if y != keep:
                L = min(L, adj[keep].get(y, np.inf))
                adj[keep][y] = adj[y][keep] = L
        merged[gone] = keep
        log.append({"op": "merge", "removed": gone, "into": keep})

    # splice degree-2 and drop degree<=1 introduced nodes
    changed = True
    while changed:
        changed = False
        for h in sorted((v for v in adj if v in is_new), key=lambda v: order[v]):
            nb = adj[h]
            if len(nb) <= 2:
                items = list(nb.items())
                for y, _ in items:
                    del adj[y][h]
                del adj[h]
                if len(items) == 2:
                    (a, la), (b, lb) = items
                    adj[a][b] = adj[b][a] = min(la + lb, adj[a].get(b, np.inf))
                log.append({"op": "splice" if len(items) == 2 else "drop", "hidden": h})
                changed = True
                break

    for gone, keep in list(merged.items()):
        while keep in merged:
            keep = merged[keep]
        merged[gone] = keep
    nodes = sorted(adj, key=lambda v: order[v])
    edges, lengths = [], {}
    for u in adj:
        for v, L in adj[u].items():
            e = edge_key(u, v)
            if e not in lengths:
                lengths[e] = float(L)
                edges.append(e)
    edges.sort(key=lambda e: (id_key(e[0]), id_key(e[1])))
    keep_idx = [order[v] for v in nodes]
    dist = DistanceMatrix(nodes, tab.T[np.ix_(keep_idx, keep_idx)])
    surv = [v for v in nodes if v in is_new]
    children = {ids[h]: frozenset(ids[b] for b in desc[h]) for h in new_hidden if ids[h] in adj}
    return LatentForest(list(base), nodes, edges, lengths, children, dist, surv, merged, log)


def path_lengths(forest: LatentForest, source) -> dict:
    """Sum of edge lengths along forest paths from ``source``."""
    adj: dict = {v: [] for v in forest.nodes}
    for u, v in forest.edges:
        L = forest.lengths[(u, v)]
        adj[u].append((v, L))
        adj[v].append((u, L))
    out = {source: 0.0}
    stack = [source]
    while stack:
        u = stack.pop()
        for v, L in adj[u]:
            if v not in out:
                out[v] = out[u] + L
                stack.append(v)
    return out
