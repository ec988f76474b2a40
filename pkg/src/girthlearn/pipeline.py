"""End-to-end cells: generate, sample, learn, fit, score. Shared by the CLI and scripts."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ._jtree import WidthExceeded
from .distances import DistanceMatrix, SampleMatrix, empirical_distances
from .estone import EstoneConfig, GraphEstimate, default_parameters, estone, r_window
from .evaluation import edit_distance, model_scores
from .graphs import gen_latent_cycle
from .inference import em_fit
from .models import IsingModel, gen_potentials, sample_exact

WARM_MAX = 0.99


@dataclass
class CellConfig:
    g: int = 10
    leaves: int = 2
    theta_lo: float = 0.05
    theta_hi: float = 0.2
    n: int = 2000
    r: float | None = None  # None: midpoint of the empirical r window
    lam: float | None = None  # None: heuristic
    tau: float | None = None
    metric: str = "normalized_det"
    engine: str = "exact"
    em_iters: int = 10
    width_cap: int = 12


def cell_seeds(master: int, n: int, replicate: int):
    """(model, train, test) seeds; the model depends only on (master, replicate)."""
    model = np.random.SeedSequence([master, replicate])
    train, test = np.random.SeedSequence([master, n, replicate]).spawn(2)
    return model, train, test


def warm_start(estimate: GraphEstimate) -> IsingModel:
    """theta_e = atanh(exp(-length)), the tree-edge inverse of the normalized distance."""
    G = estimate.graph
    theta = {}
    for e in G.edges:
        L = estimate.lengths.get(e)
        c = math.exp(-L) if L is not None else 0.5
        theta[e] = math.atanh(min(WARM_MAX, max(c, 1e-6)))
    return IsingModel(G.copy(), theta, {v: 0.0 for v in G.nodes})


def fit_estimate(estimate: GraphEstimate, S: SampleMatrix, iters: int = 10,
                 width_cap: int = 12) -> IsingModel:
    return em_fit(warm_start(estimate), S, iters=iters, width_cap=width_cap)


def learn(dm: DistanceMatrix, n: int, r=None, lam=None, tau=None, metric="normalized_det"):
    lo, hi = r_window(dm)
    par = default_parameters(dm, n)
    cfg = EstoneConfig(r=r if r is not None else max(0.5 * (lo + hi), 1e-9),
                       lam=lam if lam is not None else par.lam,
                       tau=tau if tau is not None else par.tau, metric=metric)
    return estone(dm, cfg), cfg


def run_cell(cfg: CellConfig, master: int, replicate: int) -> dict:
    """One (r, n, seed) cell on a latent cycle; returns a flat metrics row."""
    s_model, s_train, s_test = cell_seeds(master, cfg.n, replicate)
    G = gen_latent_cycle(cfg.g, cfg.leaves)
    M = gen_potentials(G, (cfg.theta_lo, cfg.theta_hi), seed=s_model)
    S = sample_exact(M, cfg.n, seed=s_train)
    T = sample_exact(M, cfg.n, seed=s_test)
    dm = empirical_distances(S, cfg.metric)
    est, ecfg = learn(dm, cfg.n, cfg.r, cfg.lam, cfg.tau, cfg.metric)
    ed = edit_distance(G, est.graph)
    row = {"r": ecfg.r, "n": cfg.n, "seed": replicate, "g": cfg.g,
           "lambda": ecfg.lam, "tau": ecfg.tau,
           "hidden": len(est.graph.hidden_nodes), "edges": est.graph.num_edges,
           "components": est.n_components, "acyclic": est.graph.is_acyclic(),
           "edit_distance": ed.value, "edit_exact": ed.exact}
    try:
        fitted = fit_estimate(est, S, cfg.em_iters, cfg.width_cap)
        sc = model_scores(fitted, T, engine=cfg.engine, width_cap=cfg.width_cap)
        row.update(loglik=sc.loglik_sum, df=sc.df, bic=sc.bic, normalized_bic=sc.normalized_bic,
                   perplexity=sc.perplexity, perp_bic=sc.perp_bic, status="ok")
    except WidthExceeded:
        row.update(loglik=math.nan, df=len(est.graph) + est.graph.num_edges, bic=math.nan,
                   normalized_bic=math.nan, perplexity=math.nan, perp_bic=math.nan,
                   status="width-exceeded")
    return row


SWEEP_FIELDS = ["r", "n", "seed", "g", "lambda", "tau", "hidden", "edges", "components", "acyclic",
                "edit_distance", "edit_exact", "loglik", "df", "bic", "normalized_bic",
                "perplexity", "perp_bic", "status"]


def sweep(base: CellConfig, r_grid, n_grid, seeds, master: int = 0) -> list:
    rows = []
    for r in r_grid:
        for n in n_grid:
            for s in seeds:
                cfg = CellConfig(**{**asdict(base), "r": r, "n": n})
                rows.append(run_cell(cfg, master, s))
    rows.sort(key=lambda d: (d["r"], d["n"], d["seed"]))
    return rows
