"""Latent graphs: representation, synthetic generators and structural measures.

A :class:`LatentGraph` is a simple undirected graph whose nodes carry an
observed/hidden role. Node ids are ints for generated graphs; learners add
hidden nodes with string ids (``"h0"``, ``"h1"``, ...).
"""
from __future__ import annotations

import json
import math
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Iterable

import numpy as np

Node = Hashable


class GraphError(ValueError):
    pass


class GenerationFailed(RuntimeError):
    pass


_ID_RE = re.compile(r"^(\D*)(\d+)$")


def id_key(node):
    """Total order on mixed int/str ids: ints first, then natural string order."""
    if isinstance(node, (int, np.integer)):
        return (0, "", int(node))
    s = str(node)
    m = _ID_RE.match(s)
    if m:
        return (1, m.group(1), int(m.group(2)))
    return (2, s, 0)


def edge_key(u, v):
    return (u, v) if id_key(u) <= id_key(v) else (v, u)


@dataclass
class LatentGraph:
    """Undirected simple graph with observed/hidden node roles."""

    observed: dict = field(default_factory=dict)  # node -> bool, insertion ordered
    adj: dict = field(default_factory=dict)  # node -> set of neighbours

    @classmethod
    def from_edges(cls, edges, observed=None, nodes=None) -> "LatentGraph":
        """Build from an edge list. ``observed`` maps node -> bool (default all observed)."""
        g = cls()
        for v in nodes or ():
            g.add_node(v, True if observed is None else observed.get(v, True))
        for u, v in edges:
            for w in (u, v):
                if w not in g.adj:
                    g.add_node(w, True if observed is None else observed.get(w, True))
            g.add_edge(u, v)
        if observed is not None:
            for v, o in observed.items():
                if v not in g.adj:
                    g.add_node(v, o)
        return g

    def add_node(self, v, observed: bool = True) -> None:
        if v in self.adj:
            raise GraphError(f"duplicate node id {v!r}")
        self.observed[v] = bool(observed)
        self.adj[v] = set()

    def add_edge(self, u, v) -> None:
        if u == v:
            raise GraphError(f"self-loop at {u!r}")
        if u not in self.adj or v not in self.adj:
            raise GraphError(f"edge ({u!r}, {v!r}) has a missing endpoint")
        self.adj[u].add(v)
        self.adj[v].add(u)

    def remove_edge(self, u, v) -> None:
        self.adj[u].discard(v)
        self.adj[v].discard(u)

    def remove_node(self, v) -> None:
        for w in self.adj.pop(v):
            self.adj[w].discard(v)
        del self.observed[v]

    def has_edge(self, u, v) -> bool:
        return u in self.adj and v in self.adj[u]

    @property
    def nodes(self) -> list:
        return sorted(self.adj, key=id_key)

    @property
    def observed_nodes(self) -> list:
        return [v for v in self.nodes if self.observed[v]]

    @property
    def hidden_nodes(self) -> list:
        return [v for v in self.nodes if not self.observed[v]]

    @property
    def edges(self) -> list:
        out = {edge_key(u, v) for u in self.adj for v in self.adj[u]}
        return sorted(out, key=lambda e: (id_key(e[0]), id_key(e[1])))

    @property
    def num_edges(self) -> int:
        return sum(len(s) for s in self.adj.values()) // 2

    def degree(self, v) -> int:
        return len(self.adj[v])

    def neighbors(self, v) -> list:
        return sorted(self.adj[v], key=id_key)

    def __len__(self) -> int:
        return len(self.adj)

    def __contains__(self, v) -> bool:
        return v in self.adj

    def copy(self) -> "LatentGraph":
        return LatentGraph(dict(self.observed), {v: set(s) for v, s in self.adj.items()})

    def induced(self, keep: Iterable) -> "LatentGraph":
        keep = set(keep)
        g = LatentGraph()
        for v in self.nodes:
            if v in keep:
                g.add_node(v, self.observed[v])
        for u, v in self.edges:
            if u in keep and v in keep:
                g.add_edge(u, v)
        return g

    def with_roles(self, observed: dict) -> "LatentGraph":
        g = self.copy()
        for v in g.observed:
            g.observed[v] = bool(observed[v])
        return g

    def index(self) -> dict:
        """Map node -> position in :attr:`nodes`."""
        return {v: i for i, v in enumerate(self.nodes)}

    def components(self) -> list:
        seen, comps = set(), []
        for s in self.nodes:
            if s in seen:
                continue
            comp, stack = [], [s]
            seen.add(s)
            while stack:
                u = stack.pop()
                comp.append(u)
                for w in self.adj[u]:
                    if w not in seen:
                        seen.add(w)
                        stack.append(w)
            comps.append(sorted(comp, key=id_key))
        return comps

    def is_acyclic(self) -> bool:
        return self.num_edges == len(self) - len(self.components())

    # -- serialisation -------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "nodes": [{"id": _jsonable(v), "observed": self.observed[v]} for v in self.nodes],
            "edges": [[_jsonable(u), _jsonable(v)] for u, v in self.edges],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LatentGraph":
        g = cls()
        for rec in data["nodes"]:
            g.add_node(rec["id"], rec.get("observed", True))
        for u, v in data["edges"]:
            g.add_edge(u, v)
        return g

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "LatentGraph":
        return cls.from_dict(json.loads(text))

    def to_dot(self, name: str = "G", lengths: dict | None = None) -> str:
        lines = [f"graph {name} {{"]
        for v in self.nodes:
            style = "solid" if self.observed[v] else "dashed"
            shape = "box" if self.observed[v] else "ellipse"
            lines.append(f'  "{v}" [shape={shape}, style={style}];')
        for u, v in self.edges:
            attr = ""
            if lengths is not None and (u, v) in lengths:
                attr = f' [label="{lengths[(u, v)]:.3f}"]'
            lines.append(f'  "{u}" -- "{v}"{attr};')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _jsonable(v):
    return int(v) if isinstance(v, np.integer) else v


@dataclass(frozen=True)
class GraphStats:
    p: int
    m: int
    girth: float
    delta_min: int
    delta_max: int
    depth: int
    rho: float


def graph_stats(g: LatentGraph) -> GraphStats:
    degs = [g.degree(v) for v in g.nodes] or [0]
    p = len(g.observed_nodes)
    return GraphStats(p, len(g), girth(g), min(degs), max(degs), depth(g), p / len(g))


# -- generators ---------------------------------------------------------

def gen_latent_cycle(g: int, leaves_per_hidden: int = 2, seed=None) -> LatentGraph:
    """Cycle of ``g`` hidden nodes, each carrying ``leaves_per_hidden`` observed leaves.

    Hidden nodes get ids ``0..g-1``; the leaves of hidden node ``a`` are
    ``g + a*leaves_per_hidden + k``. ``seed`` is accepted for interface
    uniformity; the construction is deterministic.
    """
    if g < 3:
        raise GraphError("cycle length must be at least 3")
    if leaves_per_hidden < 1:
        raise GraphError("hidden nodes need degree >= 3: leaves_per_hidden must be >= 1")
    G = LatentGraph()
    for a in range(g):
        G.add_node(a, observed=False)
    for a in range(g):
        for k in range(leaves_per_hidden):
            G.add_node(g + a * leaves_per_hidden + k, observed=True)
    for a in range(g):
        G.add_edge(a, (a + 1) % g)
        for k in range(leaves_per_hidden):
            G.add_edge(a, g + a * leaves_per_hidden + k)
    return G


def gen_random_regular_girth(m: int, degree: int, g_target: int, seed=None,
                             retry_cap: int = 1000) -> LatentGraph:
    """Random ``degree``-regular graph on ``m`` nodes with girth >= ``g_target``.

    Pairing (configuration) model with rejection on simplicity and girth.
    All nodes come back observed.
    """
    if (m * degree) % 2:
        raise GraphError("m * degree must be even")
    if retry_cap < 1:
        raise GraphError("retry_cap must be >= 1")
    if degree >= m:
        raise GenerationFailed(f"no simple {degree}-regular graph on {m} nodes")
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(m), degree)
    for _ in range(retry_cap):
        perm = rng.permutation(stubs).reshape(-1, 2)
        if np.any(perm[:, 0] == perm[:, 1]):
            continue
        pairs = {tuple(sorted(map(int, e))) for e in perm}
        if len(pairs) != len(perm):
            continue
        G = LatentGraph.from_edges(sorted(pairs), nodes=range(m))
        if girth(G) >= g_target:
            return G
    raise GenerationFailed(
        f"no {degree}-regular graph with girth >= {g_target} on {m} nodes "
        f"after {retry_cap} tries")


def gen_random_latent_tree(n_internal: int, seed=None, max_children: int = 3,
                           p_internal_observed: float = 0.0,
                           length_range=(0.2, 1.0)) -> tuple[LatentGraph, dict]:
    """Random tree whose internal nodes have degree >= 3 and whose leaves are observed.

    Returns the graph and a dict of edge lengths keyed by :func:`edge_key`.
    Internal nodes are hidden unless flipped observed with probability
    ``p_internal_observed``.
    """
    rng = np.random.default_rng(seed)
    G = LatentGraph()
    G.add_node(0, observed=False)
    for k in range(1, 4):
        G.add_node(k, observed=False)
        G.add_edge(0, k)
    leaves, nxt = [1, 2, 3], 4
    for _ in range(n_internal - 1):
        parent = leaves.pop(int(rng.integers(len(leaves))))
        for _ in range(int(rng.integers(2, max_children + 1))):
            G.add_node(nxt, observed=False)
            G.add_edge(parent, nxt)
            leaves.append(nxt)
            nxt += 1
    for v in G.nodes:
        if G.degree(v) == 1:
            G.observed[v] = True
        elif rng.random() < p_internal_observed:
            G.observed[v] = True
    lo, hi = length_range
    lengths = {e: float(rng.uniform(lo, hi)) for e in G.edges}
    return G, lengths


# -- structural measures ------------------------------------------------

def bfs_distances(g: LatentGraph, source, limit: float = math.inf) -> dict:
    dist = {source: 0}
    q = deque([source])
    while q:
        u = q.popleft()
        if dist[u] >= limit:
            continue
        for w in g.adj[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                q.append(w)
    return dist


def girth(g: LatentGraph) -> float:
    """Length of the shortest cycle, ``math.inf`` for forests.

    One BFS per node; a non-tree edge (u, w) closes a cycle of length at most
    dist[u] + dist[w] + 1, and the minimum over all roots is exact.
    """
    best = math.inf
    for s in g.adj:
        dist = {s: 0}
        parent = {s: None}
        q = deque([s])
        while q:
            u = q.popleft()
            if 2 * dist[u] + 1 >= best:
                break
            for w in g.adj[u]:
                if w not in dist:
                    dist[w] = dist[u] + 1
                    parent[w] = u
                    q.append(w)
                elif parent[u] != w:
                    best = min(best, dist[u] + dist[w] + 1)
    return best


def depth(g: LatentGraph) -> int:
    """Max over hidden nodes of the hop distance to the nearest observed node."""
    obs = g.observed_nodes
    if not obs:
        raise GraphError("depth needs at least one observed node")
    dist = {v: 0 for v in obs}
    q = deque(obs)
    while q:
        u = q.popleft()
        for w in g.adj[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                q.append(w)
    hidden = g.hidden_nodes
    if not hidden:
        return 0
    if any(h not in dist for h in hidden):
        return math.inf
    return max(dist[h] for h in hidden)


def ball_and_induced(g: LatentGraph, i, l: int):
    """Return (B_l(i), boundary at exactly distance l, induced subgraph on B_l(i))."""
    if i not in g:
        raise GraphError(f"unknown node {i!r}")
    dist = bfs_distances(g, i, limit=l)
    ball = set(dist)
    boundary = {v for v, d in dist.items() if d == l}
    return ball, boundary, g.induced(ball)


def sample_observed_uniform(g: LatentGraph, rho: float, seed=None) -> LatentGraph:
    """Reassign roles: each node observed independently with probability ``rho``."""
    if not (0.0 < rho <= 1.0):
        raise GraphError("rho must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    u = rng.random(len(g))
    return g.with_roles({v: bool(u[k] < rho) for k, v in enumerate(g.nodes)})


@dataclass(frozen=True)
class DepthBoundQuery:
    m: int
    rho: float
    delta_min: int
    delta_max: int
    g: float
    eps: float
    beta: float = 1.0

    def __post_init__(self):
        if self.eps < 0:
            raise GraphError("eps must be >= 0")
        if not (0.0 < self.rho <= 1.0):
            raise GraphError("rho must lie in (0, 1]")
        if not (0.0 <= self.beta <= 1.0):
            raise GraphError("beta must lie in [0, 1]")


def eps0(q: DepthBoundQuery) -> float:
    """Largest admissible slack exponent for the uniform-sampling depth bound."""
    # log of (1-rho)^((Dmin-1)^(g/2)) taken in log space to avoid underflow
    log_term = (q.delta_min - 1) ** (q.g / 2) * math.log1p(-q.rho)
    return -(math.log(4 * q.m * q.delta_max) + log_term) / math.log(q.m)


def depth_bound_lemma1(q: DepthBoundQuery) -> tuple[float, float]:
    """High-probability upper bound on depth under uniform node sampling.

    Returns ``(bound, probability)``, with probability ``1 - m**-eps``.
    """
    if q.rho == 1.0:
        return 0.0, 1.0
    if q.delta_min < 3:
        raise GraphError("bound needs delta_min >= 3 (log(delta_min - 1) > 0)")
    if q.eps > max(0.0, eps0(q)):
        raise GraphError(f"eps={q.eps} exceeds max(0, eps0)={max(0.0, eps0(q)):.4g}")
    inner = math.log(4 * q.m ** (1 + q.eps) * q.delta_max) / abs(math.log1p(-q.rho))
    bound = math.log(inner) / math.log(q.delta_min - 1)
    return bound, 1.0 - q.m ** (-q.eps)
