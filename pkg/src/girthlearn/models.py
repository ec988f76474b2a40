"""Pairwise Ising models on latent graphs, samplers and recovery-condition calculators."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numba
import numpy as np

from ._jtree import EliminationTree, WidthExceeded, ising_potentials
from .distances import D_CAP, DET_FLOOR, SampleMatrix
from .graphs import LatentGraph, depth, edge_key, girth


class ModelError(ValueError):
    pass


@dataclass
class IsingModel:
    """P(x) proportional to exp(sum_e theta_e x_u x_v + sum_i phi_i x_i), x in {-1,+1}^m."""

    graph: LatentGraph
    theta: dict  # edge_key(u, v) -> float
    phi: dict  # node -> float

    def __post_init__(self):
        edges = set(self.graph.edges)
        theta = {}
        for (u, v), val in self.theta.items():
            theta[edge_key(u, v)] = float(val)
        if set(theta) != edges:
            raise ModelError("theta must be defined on exactly the edge set")
        if set(self.phi) != set(self.graph.nodes):
            raise ModelError("phi must be defined on exactly the node set")
        vals = list(theta.values()) + list(self.phi.values())
        if not all(math.isfinite(x) for x in vals):
            raise ModelError("potentials must be finite")
        self.theta = theta
        self.phi = {v: float(x) for v, x in self.phi.items()}

    # -- array views used by the inference engine -------------------------
    @property
    def nodes(self) -> list:
        return self.graph.nodes

    def arrays(self):
        """(nodes, index, edge index pairs, theta array, phi array)."""
        nodes = self.graph.nodes
        idx = {v: k for k, v in enumerate(nodes)}
        edges = self.graph.edges
        pairs = [(idx[u], idx[v]) for u, v in edges]
        theta = np.array([self.theta[e] for e in edges], dtype=float)
        phi = np.array([self.phi[v] for v in nodes], dtype=float)
        return nodes, idx, pairs, theta, phi

    def elimination_tree(self, width_cap: int | None = 12) -> EliminationTree:
        nodes, _, pairs, _, _ = self.arrays()
        return EliminationTree(len(nodes), pairs, width_cap=width_cap)

    def with_params(self, theta: dict | None = None, phi: dict | None = None) -> "IsingModel":
        return IsingModel(self.graph.copy(), dict(theta if theta is not None else self.theta),
                          dict(phi if phi is not None else self.phi))

    def to_dict(self) -> dict:
        return {
            "graph": self.graph.to_dict(),
            "theta": [{"u": u, "v": v, "val": self.theta[(u, v)]} for u, v in self.graph.edges],
            "phi": [{"id": v, "val": self.phi[v]} for v in self.graph.nodes],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "IsingModel":
        g = LatentGraph.from_dict(data["graph"])
        theta = {edge_key(r["u"], r["v"]): r["val"] for r in data["theta"]}
        phi = {r["id"]: r["val"] for r in data["phi"]}
        return cls(g, theta, phi)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "IsingModel":
        return cls.from_dict(json.loads(text))


def gen_potentials(G: LatentGraph, theta_range=(0.05, 0.2), sign: str = "positive",
                   phi_value: float = 0.0, seed=None) -> IsingModel:
    """Edge potentials uniform on ``theta_range`` (random signs if ``sign='random'``)."""
    lo, hi = theta_range
    if lo <= 0 or hi < lo:
        raise ModelError("theta range needs 0 < lo <= hi")
    if sign not in ("positive", "random"):
        raise ModelError("sign must be 'positive' or 'random'")
    rng = np.random.default_rng(seed)
    edges = G.edges
    mags = rng.uniform(lo, hi, size=len(edges)) if hi > lo else np.full(len(edges), lo)
    if sign == "random":
        mags = mags * rng.choice([-1.0, 1.0], size=len(edges))
    theta = {e: float(t) for e, t in zip(edges, mags)}
    return IsingModel(G.copy(), theta, {v: float(phi_value) for v in G.nodes})


def two_node_table(theta: float, phi1: float, phi2: float) -> np.ndarray:
    """Joint table P[x1, x2] with index 0 = -1, 1 = +1."""
    s = np.array([-1.0, 1.0])
    logits = theta * np.outer(s, s) + phi1 * s[:, None] + phi2 * s[None, :]
    w = np.exp(logits - logits.max())
    return w / w.sum()


def two_node_det(theta: float, phi1: float = 0.0, phi2: float = 0.0) -> tuple[float, float]:
    """|det| of the two-node joint table and its distance -log|det| (capped at D_CAP)."""
    z = 2.0 * (math.exp(theta) * math.cosh(phi1 + phi2) + math.exp(-theta) * math.cosh(phi1 - phi2))
    det = abs(2.0 * math.sinh(2.0 * theta)) / z ** 2
    return det, (D_CAP if det < DET_FLOOR else min(D_CAP, -math.log(det)))


def two_node_distance(theta: float, phi1: float = 0.0, phi2: float = 0.0,
                      metric: str = "normalized_det") -> float:
    from .distances import info_distance
    return info_distance(two_node_table(theta, phi1, phi2), metric)


def attractive_counterpart(M: IsingModel, width_cap: int = 12) -> tuple[IsingModel, float]:
    """Model with |theta|, |phi| and phi'_max = max over observed i of atanh(E[X_i])."""
    bar = M.with_params({e: abs(t) for e, t in M.theta.items()},
                        {v: abs(p) for v, p in M.phi.items()})
    if all(p == 0.0 for p in bar.phi.values()):
        return bar, 0.0
    from .inference import exact_inference
    try:
        res = exact_inference(bar, width_cap=width_cap)
    except WidthExceeded as exc:
        raise WidthExceeded(f"{exc}; estimate E[X_i] from samples of the counterpart") from exc
    nodes = bar.nodes
    obs = [k for k, v in enumerate(nodes) if bar.graph.observed[v]] or list(range(len(nodes)))
    means = res.node_marginals[obs, 1] - res.node_marginals[obs, 0]
    return bar, float(np.max(np.arctanh(np.clip(means, -1 + 1e-15, 1 - 1e-15))))


# -- recovery conditions ----------------------------------------------------

def critical_theta(max_degree: int) -> float:
    return math.atanh(1.0 / max_degree)


def upsilon(d_min, d_max, r, g, delta, alphabet: int = 2) -> float:
    """Slack of the correlation-decay condition at radius r."""
    eta = d_max / d_min
    return min(d_min,
               0.5 * math.exp(-r) * (math.exp(d_min) - 1.0),
               math.exp(-0.5 * d_max * (r / d_min + 2.0)),
               g / 4.0 * d_min - r,
               r - d_max * delta * (eta + 1.0))


@dataclass
class AssumptionReport:
    theta_min: float
    theta_max: float
    alpha: float
    phi_max_prime: float | None
    d_min: float
    d_max: float
    eta: float
    delta: float
    girth: float
    max_degree: int
    min_hidden_degree: int | None
    metric: str
    r: float | None
    upsilon: float | None
    r_window: tuple
    zeta: float
    zeta_source: str
    alphabet: int
    kappa: float
    eps: float
    decay_ratio: float
    girth_depth_margin: float
    flags: dict = field(default_factory=dict)

    @property
    def satisfies(self) -> dict:
        return self.flags

    def to_dict(self) -> dict:
        out = asdict(self)
        out["r_window"] = list(self.r_window)
        return _finite_json(out)


def _finite_json(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else repr(obj)
    if isinstance(obj, dict):
        return {k: _finite_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite_json(v) for v in obj]
    return obj


def assumption_report(M: IsingModel, delta=None, g=None, r=None, zeta: float = 0.0,
                      zeta_source: str = "caller", kappa: float = 0.05, eps: float = 1e-3,
                      metric: str = "normalized_det", width_cap: int = 12) -> AssumptionReport:
    """Evaluate the degree, distance-bound, decay and girth/depth conditions for ``M``.

    Distance bounds come from two-node models at the extreme potentials,
    evaluated under ``metric``. ``zeta`` is the correlation-decay rate value
    entering the slack; record where it came from in ``zeta_source``.
    """
    G = M.graph
    mags = [abs(t) for t in M.theta.values()] or [0.0]
    th_min, th_max = min(mags), max(mags)
    max_deg = max((G.degree(v) for v in G.nodes), default=0)
    hidden_degs = [G.degree(h) for h in G.hidden_nodes]
    delta = depth(G) if delta is None else delta
    g = girth(G) if g is None else g
    try:
        _, phi_p = attractive_counterpart(M, width_cap=width_cap)
    except WidthExceeded:
        phi_p = None
    d_min = two_node_distance(th_max, phi_p or 0.0, phi_p or 0.0, metric)
    d_max = two_node_distance(th_min, 0.0, 0.0, metric)
    eta = d_max / d_min if d_min > 0 else math.inf
    alpha = max_deg * math.tanh(th_max)
    r_lo = delta * (eta + 1.0) * d_max
    r_hi = g / 8.0 * d_min
    r_eval = r if r is not None else (0.5 * (r_lo + r_hi) if r_lo < r_hi else None)
    ups = None
    if r_eval is not None and math.isfinite(g) and d_min > 0:
        ups = upsilon(d_min, d_max, r_eval, g, delta)
    with np.errstate(all="ignore"):
        decay_ratio = (alpha ** (g / 2.0) / th_min ** (eta * (eta + 1.0) + 2.0)
                       if th_min > 0 and math.isfinite(g) else math.inf)
    margin = g / 4.0 - delta * eta * (eta + 1.0)
    dist_ok = 0.0 < d_min <= d_max < D_CAP
    flags = {
        "A1": all(d >= 3 for d in hidden_degs),
        "A2": dist_ok,
        "A3_alpha": alpha < 1.0,
        "A4_girth_depth": margin > 0,
        "B1": all(d >= 3 for d in hidden_degs),
        "B2": dist_ok,
        "B3": ups is not None and ups > 0 and 2 ** 2 * zeta < ups,
        "r_window_nonempty": r_lo < r_hi,
        "r_in_window": r is not None and r_lo < r <= r_hi,
    }
    return AssumptionReport(th_min, th_max, alpha, phi_p, d_min, d_max, eta, delta, g, max_deg,
                            min(hidden_degs) if hidden_degs else None, metric, r, ups,
                            (r_lo, r_hi), zeta, zeta_source, 2, kappa, eps, decay_ratio,
                            margin, flags)


def sample_complexity(kind: str, **p) -> float:
    """Sample-size calculators.

    kind='thm1'      theta_min^(-delta*eta*(eta+1)-2) * log p   (constant fixed to 1)
    kind='thm2'      finite-sample sufficient n for structural consistency
    kind='thm3'      lower bound on P[edit distance > eps*m] for any estimator
    kind='necessary' delta_min / rho * log p                    (constant fixed to 1)
    """
    if kind == "thm1":
        expo = -p["delta"] * p["eta"] * (p["eta"] + 1.0) - 2.0
        return p["theta_min"] ** expo * math.log(p["p"])
    if kind == "thm2":
        X = p.get("alphabet", 2)
        gap = p["upsilon"] - X ** 2 * p.get("zeta", 0.0)
        if gap <= 0:
            raise ModelError("denominator nonpositive - assumptions violated")
        return (2.0 * X ** 2 / gap ** 2) * (4.0 * math.log(p["p"]) + X * math.log(2.0)
                                            - math.log(p["kappa"] / 7.0))
    if kind == "thm3":
        m, beta, n, g = p["m"], p["beta"], p["n"], p["g"]
        X, eps = p.get("alphabet", 2), p["eps"]
        dmin, dmax = p["delta_min"], p["delta_max"]
        slack = m - g * dmax ** g
        if slack <= 0:
            raise ModelError("bound undefined: m must exceed g * delta_max**g")
        log_frac = (n * m ** beta * math.log(X) + (2 * eps + 1) * m * math.log(m)
                    + eps * m * math.log(3.0) - 0.5 * dmin * m * math.log(m)
                    - 0.5 * dmin * m * math.log(slack))
        return 1.0 - math.exp(log_frac) if log_frac < 0 else 0.0
    if kind == "necessary":
        return p["delta_min"] / p["rho"] * math.log(p["p"])
    raise ModelError(f"unknown calculator {kind!r}")


# -- samplers -------------------------------------------------------------

def _to_samples(M: IsingModel, states: np.ndarray, include_hidden: bool) -> SampleMatrix:
    nodes = M.nodes
    keep = [k for k, v in enumerate(nodes) if include_hidden or M.graph.observed[v]]
    return SampleMatrix(np.ascontiguousarray(states[:, keep], dtype=np.int8),
                        [nodes[k] for k in keep], 2)


def sample_exact(M: IsingModel, n: int, seed=None, width_cap: int = 12,
                 include_hidden: bool = False) -> SampleMatrix:
    """n i.i.d. exact samples by forward sampling on the elimination tree."""
    nodes, _, pairs, theta, phi = M.arrays()
    tree = EliminationTree(len(nodes), pairs, width_cap=width_cap)
    node_pot, edge_pot = ising_potentials(len(nodes), pairs, theta, phi)
    rng = np.random.default_rng(seed)
    states = tree.sample(node_pot, edge_pot, int(n), rng)
    return _to_samples(M, states, include_hidden)


@numba.njit(cache=True)
def _gibbs_sweeps(x, ptr, nbr, w, phi, u, burn, thin, t0, out, n_out):
    m = x.shape[0]
    for s in range(u.shape[0]):
        for i in range(m):
            h = phi[i]
            for k in range(ptr[i], ptr[i + 1]):
                h += w[k] * x[nbr[k]]
            p = 1.0 / (1.0 + math.exp(-2.0 * h))
            x[i] = 1 if u[s, i] < p else -1
        t = t0 + s + 1
        if t > burn and (t - burn) % thin == 0 and n_out[0] < out.shape[0]:
            out[n_out[0], :] = x
            n_out[0] += 1


def sample_gibbs(M: IsingModel, n: int, burn_in_sweeps: int = 100, thin_sweeps: int = 10,
                 seed=None, include_hidden: bool = False, chunk: int = 2000) -> SampleMatrix:
    """Single-chain single-site Gibbs sampler, one record every ``thin_sweeps`` sweeps."""
    if thin_sweeps < 1 or burn_in_sweeps < 0:
        raise ModelError("thin_sweeps must be >= 1 and burn_in_sweeps >= 0")
    nodes, _, pairs, theta, phi = M.arrays()
    m = len(nodes)
    nbrs = [[] for _ in range(m)]
    for (a, b), t in zip(pairs, theta):
        nbrs[a].append((b, t))
        nbrs[b].append((a, t))
    ptr = np.zeros(m + 1, dtype=np.int64)
    for i in range(m):
        ptr[i + 1] = ptr[i] + len(nbrs[i])
    nbr = np.array([b for lst in nbrs for b, _ in lst], dtype=np.int64)
    w = np.array([t for lst in nbrs for _, t in lst], dtype=float)
    rng = np.random.default_rng(seed)
    x = np.where(rng.random(m) < 0.5, -1, 1).astype(np.int64)
    out = np.zeros((int(n), m), dtype=np.int64)
    n_out = np.zeros(1, dtype=np.int64)
    total = burn_in_sweeps + int(n) * thin_sweeps
    done = 0
    while done < total:
        k = min(chunk, total - done)
        u = rng.random((k, m))
        _gibbs_sweeps(x, ptr, nbr, w, phi, u, burn_in_sweeps, thin_sweeps, done, out, n_out)
        done += k
    return _to_samples(M, ((out + 1) // 2).astype(np.int8), include_hidden)
