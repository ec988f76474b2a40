"""Information distances from samples or from exact model marginals.

Two metrics are available: ``raw_det`` is -log|det P_ij|, and
``normalized_det`` divides |det P_ij| by sqrt(det diag(P_i) det diag(P_j)).
For binary variables the normalized form equals -log|corr(X_i, X_j)|, which
is additive along tree paths.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

D_CAP = 50.0
DET_FLOOR = 1e-12
METRICS = ("raw_det", "normalized_det")
VARIANTS = ("empirical", "exact_global", "exact_tree_limit")


class DistanceError(ValueError):
    pass


def _parse_id(text: str):
    try:
        return int(text)
    except ValueError:
        return text


@dataclass
class SampleMatrix:
    """n x p table of alphabet indices; binary data encode -1 -> 0 and +1 -> 1."""

    data: np.ndarray
    columns: list
    alphabet_size: int = 2

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.int8)
        if self.data.ndim != 2 or self.data.shape[1] != len(self.columns):
            raise DistanceError("data must be n x len(columns)")
        if len(set(self.columns)) != len(self.columns):
            raise DistanceError("column ids must be unique")
        if self.data.size and (self.data.min() < 0 or self.data.max() >= self.alphabet_size):
            raise DistanceError("cells must lie in [0, alphabet_size)")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def p(self) -> int:
        return self.data.shape[1]

    def spins(self) -> np.ndarray:
        return 2.0 * self.data - 1.0

    def column(self, node) -> np.ndarray:
        return self.data[:, self.columns.index(node)]

    def subset(self, rows) -> "SampleMatrix":
        return SampleMatrix(self.data[rows], list(self.columns), self.alphabet_size)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        body = 2 * self.data.astype(int) - 1 if self.alphabet_size == 2 else self.data
        w.writerows(body.tolist())
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, alphabet_size: int | None = None) -> "SampleMatrix":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise DistanceError("empty sample file")
        cols = [_parse_id(c) for c in rows[0]]
        body = np.array([[int(x) for x in r] for r in rows[1:] if r], dtype=int).reshape(-1, len(cols))
        if body.size and body.min() < 0:
            if not set(np.unique(body)) <= {-1, 1}:
                raise DistanceError("negative cells are only valid for +/-1 data")
            return cls(((body + 1) // 2).astype(np.int8), cols, 2)
        k = alphabet_size or max(2, int(body.max()) + 1 if body.size else 2)
        return cls(body.astype(np.int8), cols, k)


@dataclass
class DistanceMatrix:
    ids: list
    d: np.ndarray
    variant: str = "empirical"
    metric: str = "normalized_det"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=float)
        self._pos = {v: k for k, v in enumerate(self.ids)}

    def index(self, v) -> int:
        return self._pos[v]

    def __call__(self, u, v) -> float:
        return float(self.d[self._pos[u], self._pos[v]])

    def sub(self, ids) -> "DistanceMatrix":
        k = [self._pos[v] for v in ids]
        return DistanceMatrix(list(ids), self.d[np.ix_(k, k)], self.variant, self.metric,
                              dict(self.meta))

    def check(self) -> None:
        d = self.d
        if not np.allclose(d, d.T, rtol=0, atol=0):
            raise DistanceError("distance matrix not symmetric")
        if np.any(np.diag(d) != 0) or d.min() < 0 or d.max() > D_CAP:
            raise DistanceError("distance matrix violates diagonal/cap invariants")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.ids)
        for row in self.d:
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()

    def meta_json(self) -> str:
        return json.dumps({"variant": self.variant, "metric": self.metric, **self.meta},
                          sort_keys=True, indent=1)

    @classmethod
    def from_csv(cls, text: str, meta_text: str | None = None) -> "DistanceMatrix":
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        ids = [_parse_id(c) for c in rows[0]]
        d = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)
        if d.shape != (len(ids), len(ids)):
            raise DistanceError("distance CSV body must be square over the header ids")
        meta = json.loads(meta_text) if meta_text else {}
        variant = meta.pop("variant", "empirical")
        metric = meta.pop("metric", "normalized_det")
        return cls(ids, d, variant, metric, meta)


# -- joints and distances ---------------------------------------------------

def empirical_joint(S: SampleMatrix, i, j, pseudocount: float = 0.0) -> np.ndarray:
    """Relative-frequency joint table of columns i and j, with additive smoothing."""
    if S.n == 0:
        raise DistanceError("no samples")
    k = S.alphabet_size
    a, b = S.column(i).astype(int), S.column(j).astype(int)
    counts = np.bincount(a * k + b, minlength=k * k).reshape(k, k).astype(float)
    counts += pseudocount
    return counts / counts.sum()


def info_distance(J, metric: str = "normalized_det") -> float:
    """-log|det J| (raw) or its marginal-normalized form, capped at D_CAP."""
    J = np.asarray(J, dtype=float)
    return float(_distances_from_joints(J[None], metric)[0])


def _distances_from_joints(J: np.ndarray, metric: str) -> np.ndarray:
    """Vectorised over a stack of square joint tables J[..., k, k]."""
    if metric not in METRICS:
        raise DistanceError(f"unknown metric {metric!r}")
    det = np.abs(np.linalg.det(J))
    out = np.full(det.shape, D_CAP)
    ok = det >= DET_FLOOR
    if metric == "raw_det":
        out[ok] = -np.log(det[ok])
    else:
        pi = J.sum(axis=-1)
        pj = J.sum(axis=-2)
        norm = np.sqrt(np.prod(pi, axis=-1) * np.prod(pj, axis=-1))
        ok &= norm > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            out[ok] = np.maximum(0.0, -np.log(det[ok] / norm[ok]))
    return np.minimum(out, D_CAP)


def empirical_distances(S: SampleMatrix, metric: str = "normalized_det",
                        pseudocount: float = 0.0) -> DistanceMatrix:
    """All pairwise distances from empirical joints of the sample columns."""
    if S.n == 0:
        raise DistanceError("no samples")
    k, p = S.alphabet_size, S.p
    onehot = np.zeros((S.n, p * k))
    onehot[np.arange(S.n)[:, None], np.arange(p)[None, :] * k + S.data] = 1.0
    C = onehot.T @ onehot + pseudocount
    J = C.reshape(p, k, p, k).transpose(0, 2, 1, 3)
    J = J / J.sum(axis=(2, 3), keepdims=True)
    d = _distances_from_joints(J, metric)
    np.fill_diagonal(d, 0.0)
    d = 0.5 * (d + d.T)
    return DistanceMatrix(list(S.columns), d, "empirical", metric,
                          {"n": S.n, "pseudocount": pseudocount})


def oracle_distances(M, variant: str = "exact_global", metric: str = "normalized_det",
                     width_cap: int = 12, nodes=None) -> DistanceMatrix:
    """Exact distances between observed nodes of an Ising model.

    ``exact_global`` uses pairwise marginals under the full graph;
    ``exact_tree_limit`` uses, for each pair, the model restricted to the
    induced subgraph on the union of their graph balls of radius
    floor(g/2) - 1.
    """
    from .graphs import ball_and_induced, girth
    from .inference import pairwise_joints
    from .models import IsingModel

    ids = list(nodes) if nodes is not None else M.graph.observed_nodes
    p = len(ids)
    d = np.zeros((p, p))
    if variant == "exact_global":
        pairs = [(ids[a], ids[b]) for a in range(p) for b in range(a + 1, p)]
        joints = pairwise_joints(M, pairs, width_cap=width_cap)
        vals = _distances_from_joints(np.array([joints[q] for q in pairs]).reshape(-1, 2, 2), metric)
        for (u, v), x in zip(pairs, vals):
            d[ids.index(u), ids.index(v)] = d[ids.index(v), ids.index(u)] = x
    elif variant == "exact_tree_limit":
        g = girth(M.graph)
        l = (int(g) // 2 - 1) if math.isfinite(g) else len(M.graph)
        balls = {v: ball_and_induced(M.graph, v, l)[0] for v in ids}
        groups: dict = {}
        for a in range(p):
            for b in range(a + 1, p):
                key = frozenset(balls[ids[a]] | balls[ids[b]])
                groups.setdefault(key, []).append((ids[a], ids[b]))
        pos = {v: k for k, v in enumerate(ids)}
        for key, pairs in groups.items():
            sub_graph = M.graph.induced(key)
            sub = IsingModel(sub_graph, {e: M.theta[e] for e in sub_graph.edges},
                             {v: M.phi[v] for v in sub_graph.nodes})
            joints = pairwise_joints(sub, pairs, width_cap=width_cap)
            vals = _distances_from_joints(np.array([joints[q] for q in pairs]).reshape(-1, 2, 2),
                                          metric)
            for (u, v), x in zip(pairs, vals):
                d[pos[u], pos[v]] = d[pos[v], pos[u]] = x
    else:
        raise DistanceError(f"unknown oracle variant {variant!r}")
    return DistanceMatrix(ids, d, variant, metric)
