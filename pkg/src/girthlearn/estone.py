"""EstOne: local MSTs over distance balls, then neighbourhood-wise recursive grouping.

Introduced hidden nodes get distances to every node seen so far (an
append-only extended table), so later neighbourhoods that contain them can
be regrouped like any other node set.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .distances import D_CAP, DistanceMatrix
from .graphs import LatentGraph, edge_key, id_key
from .latent_tree import LatentForest, mst, recursive_grouping


@dataclass
class EstoneConfig:
    r: float
    lam: float = 1e-9
    tau: float = 1e-6
    metric: str = "normalized_det"
    order: str = "ascending-id"
    d_cap: float = D_CAP
    alphabet_size: int = 2
    hidden_distance: str = "corrected"
    extend: str = "robust"  # how new hidden nodes get distances to far nodes: robust | mean

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("r must be positive")
        if self.lam < 0 or not self.tau > 0:
            raise ValueError("need lambda >= 0 and tau > 0")
        if self.order != "ascending-id":
            raise ValueError("only the ascending-id processing order is implemented")
        if self.extend not in ("robust", "mean"):
            raise ValueError("extend must be 'robust' or 'mean'")


@dataclass
class GraphEstimate:
    graph: LatentGraph
    dist: DistanceMatrix  # extended distances over observed and introduced nodes
    lengths: dict = field(default_factory=dict)  # edge_key -> estimated length
    provenance: list = field(default_factory=list)
    initial: LatentGraph | None = None
    config: dict = field(default_factory=dict)

    @property
    def n_components(self) -> int:
        return len(self.graph.components())

    def to_dict(self) -> dict:
        g = self.graph.to_dict()
        g["lengths"] = [[u, v, self.lengths.get((u, v))] for u, v in self.graph.edges]
        g["config"] = self.config
        g["components"] = self.n_components
        return g

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str, dist: DistanceMatrix | None = None) -> "GraphEstimate":
        data = json.loads(text)
        g = LatentGraph.from_dict(data)
        lengths = {edge_key(u, v): L for u, v, L in data.get("lengths", [])}
        if dist is None:
            dist = DistanceMatrix(g.nodes, np.zeros((len(g), len(g))))
        return cls(g, dist, lengths, [], None, data.get("config", {}))

    def to_dot(self) -> str:
        return self.graph.to_dot("estimate", self.lengths)

    def provenance_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.provenance)


# -- helpers -------------------------------------------------------------

def r_window(dm: DistanceMatrix) -> tuple[float, float]:
    """(r_min, r_max): the smallest radius keeping every node's nearest
    neighbour in its ball, and the largest pairwise distance."""
    p = len(dm.ids)
    if p < 2:
        return 0.0, 0.0
    d = dm.d.copy()
    np.fill_diagonal(d, np.inf)
    r_min = float(np.max(np.min(d, axis=1)))
    np.fill_diagonal(d, -np.inf)
    return r_min, float(np.max(d))


def balls(dm: DistanceMatrix, r: float) -> dict:
    return {v: [u for u in dm.ids if dm(u, v) <= r] for v in dm.ids}


def local_mst_union(dm: DistanceMatrix, r: float) -> tuple[LatentGraph, list]:
    g = LatentGraph.from_edges([], nodes=dm.ids)
    log = []
    for v, B in balls(dm, r).items():
        for u, w in mst(B, dm):
            if not g.has_edge(u, w):
                g.add_edge(u, w)
                log.append({"op": "local-mst", "center": v, "edge": [u, w]})
    return g, log


@dataclass
class Parameters:
    lam: float
    tau: float
    r: float
    source: str


def default_parameters(dm: DistanceMatrix, n: int, bounds=None) -> Parameters:
    """Confidence bound, merge threshold and radius.

    With ``bounds`` (an AssumptionReport or a dict with d_min, d_max, r and
    optionally zeta, alphabet) the theoretical rules are used; otherwise
    lam = 2 sqrt(log p / n), tau = half the smallest nearest-neighbour
    distance and r = the midpoint of r_window.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    r_lo, r_hi = r_window(dm)
    r_mid = 0.5 * (r_lo + r_hi)
    p = max(2, len(dm.ids))
    heur_lam = 2.0 * math.sqrt(math.log(p) / n)
    d = dm.d.copy()
    np.fill_diagonal(d, np.inf)
    heur_tau = 0.5 * float(np.min(d)) if len(dm.ids) > 1 else 1e-6
    if bounds is None:
        return Parameters(heur_lam, max(heur_tau, 1e-12), r_mid, "heuristic")
    b = bounds if isinstance(bounds, dict) else asdict(bounds)
    d_min, d_max = b["d_min"], b["d_max"]
    r = b.get("r") or r_mid
    X = b.get("alphabet", 2)
    lam = math.exp(-(d_max / 2.0) * (r / d_min + 2.0))
    tau = d_min / 2.0 - X ** 2 * b.get("zeta", 0.0)
    if tau <= 0:
        warnings.warn("theoretical merge threshold is not positive; using the heuristic one")
        return Parameters(lam, max(heur_tau, 1e-12), r, "theory-lambda+heuristic-tau")
    return Parameters(lam, tau, r, "theory")


class _Extended:
    def __init__(self, dm: DistanceMatrix, cap: float):
        self.ids = list(dm.ids)
        self.pos = {v: k for k, v in enumerate(self.ids)}
        self.n = len(self.ids)
        self.cap = cap
        size = max(8, 2 * self.n)
        self.T = np.zeros((size, size))
        self.T[: self.n, : self.n] = dm.d

    def add(self, v, row):
        if self.n == self.T.shape[0]:
            T = np.zeros((2 * self.n, 2 * self.n))
            T[: self.n, : self.n] = self.T[: self.n, : self.n]
            self.T = T
        row = np.clip(row, 0.0, self.cap)
        self.T[self.n, : self.n] = row
        self.T[: self.n, self.n] = row
        self.pos[v] = self.n
        self.ids.append(v)
        self.n += 1

    def sub(self, ids) -> DistanceMatrix:
        k = [self.pos[v] for v in ids]
        return DistanceMatrix(list(ids), self.T[np.ix_(k, k)])

    def matrix(self, ids) -> DistanceMatrix:
        return self.sub(ids)


def _branches(forest: LatentForest, h) -> list:
    """Base members of S grouped by the neighbour of h they hang from."""
    adj: dict = {v: [] for v in forest.nodes}
    for u, v in forest.edges:
        adj[u].append(v)
        adj[v].append(u)
    base = set(forest.base)
    out = []
    for nb in sorted(adj[h], key=id_key):
        seen, stack = {h, nb}, [nb]
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        members = sorted((seen - {h}) & base, key=id_key)
        if members:
            out.append(members)
    return out


def _extend(ext: _Extended, forest: LatentForest, h, rule: str):
    """Row of distances from new hidden node h to every node in the table."""
    row = np.zeros(ext.n)
    local = forest.dist
    groups = _branches(forest, h)
    for x in ext.ids:
        k = ext.pos[x]
        if x in local.ids:
            row[k] = local(h, x)
            continue
        ests = [np.mean([ext.T[ext.pos[a], k] - local(a, h) for a in grp]) for grp in groups]
        if not ests:
            row[k] = ext.cap
        elif rule == "mean":
            row[k] = float(np.mean([ext.T[ext.pos[a], k] - local(a, h)
                                    for grp in groups for a in grp]))
        elif len(ests) == 2:
            row[k] = max(ests)  # the branch holding x underestimates; the other is exact
        else:
            row[k] = float(np.median(ests))
    return row


def _hidden_ids():
    k = 0
    while True:
        yield f"h{k}"
        k += 1


def _cleanup(G: LatentGraph, lengths: dict, log: list, step: int):
    changed = True
    while changed:
        changed = False
        for h in G.hidden_nodes:
            deg = G.degree(h)
            if deg <= 2:
                nb = G.neighbors(h)
                ls = [lengths.pop(edge_key(h, y), 0.0) for y in nb]
                G.remove_node(h)
                if deg == 2 and not G.has_edge(*nb):
                    G.add_edge(*nb)
                    lengths[edge_key(*nb)] = sum(ls)
                log.append({"step": step, "op": "splice" if deg == 2 else "drop", "hidden": h})
                changed = True
                break


def estone(dm: DistanceMatrix, cfg: EstoneConfig) -> GraphEstimate:
    V = list(dm.ids)
    G0, log = local_mst_union(dm, cfg.r)
    G = G0.copy()
    lengths = {e: dm(*e) for e in G.edges}
    ext = _Extended(dm, cfg.d_cap)
    leaves = {v for v in G0.nodes if G0.degree(v) == 1}
    new_ids = _hidden_ids()
    for step, v in enumerate(sorted((u for u in V if u not in leaves), key=id_key)):
        A = [v] + G.neighbors(v)
        hidden_A = {a for a in A if not G.observed[a]}
        S = recursive_grouping(ext.sub(A), cfg.lam, cfg.tau, hidden_base=hidden_A,
                               new_ids=new_ids, hidden_distance=cfg.hidden_distance)
        for h in S.hidden:
            ext.add(h, _extend(ext, S, h, cfg.extend))
        # replace the subgraph over A by S
        Aset = set(A)
        for u, w in list(G.edges):
            if u in Aset and w in Aset:
                G.remove_edge(u, w)
                lengths.pop((u, w), None)
        for gone, keep in S.merged.items():
            if gone in Aset:
                for y in G.neighbors(gone):
                    L = lengths.pop(edge_key(gone, y), 0.0)
                    if y != keep and not G.has_edge(keep, y):
                        G.add_edge(keep, y)
                        lengths[edge_key(keep, y)] = L
                G.remove_node(gone)
                log.append({"step": step, "op": "merge", "center": v, "removed": gone,
                            "into": keep})
        for h in S.hidden:
            G.add_node(h, observed=False)
        for u, w in S.edges:
            G.add_edge(u, w)
            lengths[(u, w)] = S.lengths[(u, w)]
        log.append({"step": step, "op": "RG-at-v", "center": v, "nodes": A,
                    "hidden": S.hidden, "edges": [list(e) for e in S.edges],
                    "prior_hidden_in_nbd": sorted(hidden_A, key=id_key)})
    _cleanup(G, lengths, log, -1)
    nodes = G.nodes
    return GraphEstimate(G, ext.sub(nodes), lengths, log, G0, asdict(cfg))


def learn_fully_observed(dm: DistanceMatrix, r: float) -> GraphEstimate:
    """Union of local MSTs over distance balls, with no hidden-node stage."""
    G, log = local_mst_union(dm, r)
    lengths = {e: dm(*e) for e in G.edges}
    return GraphEstimate(G, dm, lengths, log, G.copy(), {"r": r, "variant": "fully-observed"})
