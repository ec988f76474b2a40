"""Edit distance up to hidden-label permutation, perplexity/BIC scores, PMI and topic words."""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .distances import SampleMatrix
from .graphs import LatentGraph, id_key
from .inference.likelihood import ENGINES, _observed_states, log_prob_partial, loglik_observed


class EvalError(ValueError):
    pass


# -- edit distance -----------------------------------------------------------

@dataclass
class EditDistanceResult:
    value: int
    matching: dict  # hidden id of the estimate -> hidden id of the reference (or a pad label)
    exact: bool


def _pad_label(k):
    return f"<pad{k}>"


def _blocks(G: LatentGraph, obs, hidden):
    order = list(obs) + list(hidden)
    pos = {v: k for k, v in enumerate(order)}
    A = np.zeros((len(order), len(order)), dtype=np.int64)
    for u, v in G.edges:
        A[pos[u], pos[v]] = A[pos[v], pos[u]] = 1
    return A


def edit_distance(G: LatentGraph, Gh: LatentGraph, exact_limit: int = 8) -> EditDistanceResult:
    """min over hidden relabellings of the L1 distance between symmetric adjacency matrices."""
    obs = G.observed_nodes
    if obs != Gh.observed_nodes:
        raise EvalError("graphs must share the same observed node set")
    H, Hh = G.hidden_nodes, Gh.hidden_nodes
    k = max(len(H), len(Hh))
    Hp = H + [_pad_label(j) for j in range(k - len(H))]
    Hhp = Hh + [_pad_label(j) for j in range(k - len(Hh))]
    A = _blocks(G, obs, H)
    B = _blocks(Gh, obs, Hh)
    p = len(obs)
    n = p + k
    A2 = np.zeros((n, n), dtype=np.int64)
    B2 = np.zeros((n, n), dtype=np.int64)
    A2[: A.shape[0], : A.shape[0]] = A
    B2[: B.shape[0], : B.shape[0]] = B
    base = int(np.abs(A2[:p, :p] - B2[:p, :p]).sum())
    # linear part: cost of sending estimate hidden i to reference hidden j
    lin = 2 * np.abs(B2[p:, :p][:, None, :] - A2[p:, :p][None, :, :]).sum(axis=2)
    HB, HA = B2[p:, p:], A2[p:, p:]

    def total(perm):
        P = np.asarray(perm)
        return base + int(lin[np.arange(k), P].sum()) + int(np.abs(HB - HA[np.ix_(P, P)]).sum())

    if k == 0:
        return EditDistanceResult(base, {}, True)
    perm = _heuristic(lin, HB, HA, total)
    best = total(perm)
    exact = best == 0
    if k <= exact_limit and best > 0:
        perm, best = _branch_and_bound(lin, HB, HA, base, perm, best)
        exact = True
    matching = {Hhp[i]: Hp[j] for i, j in enumerate(perm)}
    return EditDistanceResult(int(best), matching, exact)


def _heuristic(lin, HB, HA, total):
    k = lin.shape[0]
    degB, degA = HB.sum(axis=1), HA.sum(axis=1)
    sig = lin + np.abs(degB[:, None] - degA[None, :])
    _, perm = linear_sum_assignment(sig)
    perm = list(perm)
    cur = total(perm)
    improved = True
    while improved and cur > 0:
        improved = False
        for a, b in itertools.combinations(range(k), 2):
            perm[a], perm[b] = perm[b], perm[a]
            c = total(perm)
            if c < cur:
                cur, improved = c, True
            else:
                perm[a], perm[b] = perm[b], perm[a]
    return perm


def _branch_and_bound(lin, HB, HA, base, perm0, best0):
    k = lin.shape[0]
    best = [best0, list(perm0)]
    assign = [-1] * k
    used = [False] * k

    def bound(i, partial):
        free_r = list(range(i, k))
        free_c = [j for j in range(k) if not used[j]]
        if not free_r:
            return partial
        sub = lin[np.ix_(free_r, free_c)]
        r, c = linear_sum_assignment(sub)
        return partial + int(sub[r, c].sum())

    def rec(i, partial):
        if partial >= best[0]:
            return
        if i == k:
            best[0], best[1] = partial, list(assign)
            return
        if bound(i, partial) >= best[0]:
            return
        for j in np.argsort(lin[i], kind="stable"):
            if used[j]:
                continue
            add = int(lin[i, j])
            for i2 in range(i):
                add += 2 * abs(int(HB[i, i2]) - int(HA[j, assign[i2]]))
            used[j], assign[i] = True, int(j)
            rec(i + 1, partial + add)
            used[j], assign[i] = False, -1

    rec(0, base)
    return best[1], best[0]


def apply_matching(Gh: LatentGraph, matching: dict) -> LatentGraph:
    """Relabel the hidden nodes of ``Gh`` by ``matching`` (pads become fresh ids)."""
    ren = {v: matching.get(v, v) for v in Gh.nodes}
    out = LatentGraph()
    for v in Gh.nodes:
        out.add_node(ren[v], Gh.observed[v])
    for u, v in Gh.edges:
        out.add_edge(ren[u], ren[v])
    return out


# -- likelihood scores -------------------------------------------------------

@dataclass
class EvalMetrics:
    n: int
    p: int
    loglik_sum: float
    df: int
    bic: float
    normalized_bic: float
    perplexity: float
    perp_bic: float
    pred_perplexity: float | None = None
    pred_perp_bic: float | None = None
    pmi: float | None = None
    engine: str = "exact"

    def to_dict(self) -> dict:
        return asdict(self)


def degrees_of_freedom(G: LatentGraph) -> int:
    return len(G) + G.num_edges


def model_scores(M, S_test: SampleMatrix, engine: str = "exact", width_cap: int = 12) -> EvalMetrics:
    if S_test.n == 0:
        raise EvalError("empty test set")
    if engine not in ENGINES:
        raise EvalError(f"engine must be one of {ENGINES}")
    ll = loglik_observed(M, S_test, engine=engine, width_cap=width_cap)
    n, p = S_test.n, len(M.graph.observed_nodes)
    total = float(ll.sum())
    df = degrees_of_freedom(M.graph)
    bic = total - 0.5 * df * math.log(n)
    return EvalMetrics(n, p, total, df, bic, bic / (n * p), math.exp(-total / (n * p)),
                       math.exp(-bic / (n * p)), engine=engine)


def predictive_scores(M, S_test: SampleMatrix, hold_fraction: float = 0.5, seed=0,
                      engine: str = "exact", width_cap: int = 12) -> tuple[float, float]:
    """Predictive perplexity of a random ``hold_fraction`` of each test row given the rest.

    The exponent is normalised by the number of predicted coordinates, so an
    independent fair-coin model scores exactly 2.
    """
    if not 0 < hold_fraction < 1:
        raise EvalError("hold_fraction must lie in (0, 1)")
    nodes, idx, _, _, _ = M.arrays()
    X = _observed_states(M, S_test)
    n, p = X.shape
    obs_cols = np.array([idx[v] for v in M.graph.observed_nodes])
    n_pred = max(1, int(round(hold_fraction * p)))
    rng = np.random.default_rng(seed)
    pred = np.zeros((n, p), dtype=bool)
    for k in range(n):
        pred[k, rng.choice(p, size=n_pred, replace=False)] = True
    full = np.zeros((n, len(nodes)), dtype=np.int8)
    full[:, obs_cols] = X
    mask_all = np.zeros((n, len(nodes)), dtype=bool)
    mask_all[:, obs_cols] = True
    mask_obs = mask_all.copy()
    mask_obs[:, obs_cols] &= ~pred
    lp = (log_prob_partial(M, full, mask_all, engine, width_cap)
          - log_prob_partial(M, full, mask_obs, engine, width_cap))
    total = float(lp.sum())
    denom = n * n_pred
    df = degrees_of_freedom(M.graph)
    cond_bic = total - 0.5 * df * math.log(n)
    return math.exp(-total / denom), math.exp(-cond_bic / denom)


# -- topic coherence ---------------------------------------------------------

def pmi_score(corpus: SampleMatrix, topic_word_sets: dict, pseudocount: float = 0.5) -> float:
    """Average PMI over topics and the 45 word pairs of each 10-word set; word present = state 1."""
    if not topic_word_sets:
        raise EvalError("no topics given")
    n = corpus.n
    z = n + 4.0 * pseudocount
    total, count = 0.0, 0
    for h, words in topic_word_sets.items():
        words = list(words)
        if len(words) != 10 or len(set(words)) != 10:
            raise EvalError(f"topic {h!r} must list exactly 10 distinct ids")
        cols = {w: corpus.column(w).astype(bool) for w in words}
        for a, b in itertools.combinations(words, 2):
            c11 = float(np.sum(cols[a] & cols[b]))
            p11 = (c11 + pseudocount) / z
            pa = (cols[a].sum() + 2.0 * pseudocount) / z
            pb = (cols[b].sum() + 2.0 * pseudocount) / z
            if p11 <= 0 or pa <= 0 or pb <= 0:
                raise EvalError("zero co-occurrence probability; use a nonzero pseudocount")
            total += math.log(p11 / (pa * pb))
            count += 1
    return total / count


def top_words(estimate, h, k: int = 10) -> list:
    """The k observed nodes nearest to h in extended distance, ties by id."""
    obs = estimate.graph.observed_nodes
    if k > len(obs):
        raise EvalError(f"asked for {k} words but only {len(obs)} observed nodes")
    return sorted(obs, key=lambda v: (estimate.dist(h, v), id_key(v)))[:k]
