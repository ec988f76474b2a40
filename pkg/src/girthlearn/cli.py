"""girthlearn command-line driver.

Exit codes: 0 ok, 2 usage error, 3 input parse error, 4 assumption or width failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from ._jtree import WidthExceeded
from .distances import DistanceError, DistanceMatrix, SampleMatrix, empirical_distances, oracle_distances
from .estone import (EstoneConfig, GraphEstimate, default_parameters, estone, learn_fully_observed,
                     r_window)
from .evaluation import edit_distance, model_scores, pmi_score, predictive_scores, top_words
from .graphs import (DepthBoundQuery, GenerationFailed, GraphError, LatentGraph, depth_bound_lemma1,
                     gen_latent_cycle, gen_random_latent_tree, gen_random_regular_girth)
from .latent_tree import recursive_grouping
from .models import (IsingModel, ModelError, assumption_report, critical_theta, gen_potentials,
                     sample_complexity, sample_exact, sample_gibbs, upsilon)
from .pipeline import SWEEP_FIELDS, CellConfig, fit_estimate, sweep

METRIC = {"raw": "raw_det", "normalized": "normalized_det"}
EXIT_USAGE, EXIT_PARSE, EXIT_ASSUME = 2, 3, 4


class UsageError(Exception):
    pass


class ParseError(Exception):
    pass


# -- io helpers ------------------------------------------------------------------

def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _meta_path(path: str) -> str:
    return str(path) + ".meta.json"


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def _meta(args) -> dict:
    out = {k: v for k, v in vars(args).items() if k not in ("func",) and not callable(v)}
    return {"command": args.command, "args": out}


def load_model(path: str) -> IsingModel:
    try:
        return IsingModel.from_json(_read(path))
    except (ValueError, KeyError, TypeError, ModelError, GraphError) as exc:
        raise ParseError(f"bad model file {path}: {exc}") from exc


def load_samples(path: str) -> SampleMatrix:
    try:
        return SampleMatrix.from_csv(_read(path))
    except (ValueError, DistanceError) as exc:
        raise ParseError(f"bad sample file {path}: {exc}") from exc


def load_distances(path: str) -> DistanceMatrix:
    meta = Path(_meta_path(path))
    try:
        return DistanceMatrix.from_csv(_read(path), meta.read_text() if meta.exists() else None)
    except (ValueError, DistanceError, IndexError) as exc:
        raise ParseError(f"bad distance file {path}: {exc}") from exc


def load_estimate(path: str, dist: str | None = None) -> GraphEstimate:
    try:
        dm = load_distances(dist) if dist else None
        return GraphEstimate.from_json(_read(path), dm)
    except (ValueError, KeyError, GraphError) as exc:
        raise ParseError(f"bad estimate file {path}: {exc}") from exc


def load_graph(path: str) -> LatentGraph:
    text = _read(path)
    try:
        data = json.loads(text)
        if "graph" in data and "theta" in data:
            return IsingModel.from_dict(data).graph
        return LatentGraph.from_dict(data)
    except (ValueError, KeyError, GraphError, ModelError) as exc:
        raise ParseError(f"bad graph file {path}: {exc}") from exc


def _float_or_auto(text: str):
    if text == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a number or 'auto', got {text!r}") from exc


def _float_list(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad list {text!r}") from exc


def _int_list(text: str) -> list:
    out = []
    for part in text.split(","):
        if ".." in part:
            a, b = part.split("..")
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    return out


# -- commands ---------------------------------------------------------------------

def cmd_gen_model(args):
    try:
        if args.kind == "latent-cycle":
            G = gen_latent_cycle(args.g, args.leaves)
        elif args.kind == "regular":
            G = gen_random_regular_girth(args.m, args.degree, args.g, seed=args.seed)
        else:
            G, _ = gen_random_latent_tree(args.internal, seed=args.seed)
    except GenerationFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ASSUME
    M = gen_potentials(G, (args.theta_lo, args.theta_hi), args.sign, args.phi, seed=args.seed)
    data = M.to_dict()
    data["meta"] = _meta(args)
    _write(args.out, json.dumps(data, sort_keys=True) + "\n")
    return 0


def cmd_sample(args):
    M = load_model(args.model)
    if args.sampler == "exact":
        S = sample_exact(M, args.n, seed=args.seed, include_hidden=args.include_hidden)
    else:
        S = sample_gibbs(M, args.n, args.burn_in, args.thin, seed=args.seed,
                         include_hidden=args.include_hidden)
    _write(args.out, S.to_csv())
    if args.out and args.out != "-":
        _write(_meta_path(args.out), _dump(_meta(args)))
    return 0


def cmd_distances(args):
    metric = METRIC[args.metric]
    if args.samples:
        dm = empirical_distances(load_samples(args.samples), metric, args.pseudocount)
    elif args.model:
        dm = oracle_distances(load_model(args.model), args.variant, metric)
    else:
        raise UsageError("distances needs --samples or --model")
    dm.meta.update(_meta(args))
    _write(args.out, dm.to_csv())
    if args.out and args.out != "-":
        _write(_meta_path(args.out), dm.meta_json() + "\n")
    return 0


def _resolve_params(args, dm):
    n = args.n or int(dm.meta.get("n", 1000))
    par = default_parameters(dm, n)
    r = par.r if args.r in (None, "auto") else args.r
    lam = par.lam if args.lam in (None, "auto") else args.lam
    tau = par.tau if args.tau in (None, "auto") else args.tau
    return r, lam, tau


def cmd_learn(args):
    dm = load_distances(args.distances)
    r, lam, tau = _resolve_params(args, dm)
    if args.method == "estone":
        est = estone(dm, EstoneConfig(r=r, lam=lam, tau=tau, metric=dm.metric))
    elif args.method == "fully-observed":
        est = learn_fully_observed(dm, r)
    else:
        F = recursive_grouping(dm, lam, tau)
        G = F.to_graph()
        est = GraphEstimate(G, F.dist, dict(F.lengths), F.log, None,
                            {"lam": lam, "tau": tau, "variant": "rg"})
    est.config.update({"r": r, "lam": lam, "tau": tau, "r_window": list(r_window(dm)),
                       "meta": _meta(args)})
    _write(args.out, est.to_json() + "\n")
    if args.out and args.out != "-":
        _write(str(args.out) + ".provenance.jsonl", est.provenance_jsonl())
        _write(str(args.out) + ".dist.csv", est.dist.to_csv())
    print(f"components: {est.n_components}", file=sys.stderr)
    return 0


def cmd_fit(args):
    S = load_samples(args.samples)
    est = load_estimate(args.estimate)
    M = fit_estimate(est, S, iters=args.iters)
    data = M.to_dict()
    data["meta"] = _meta(args)
    _write(args.out, json.dumps(data, sort_keys=True) + "\n")
    return 0


def cmd_eval(args):
    if args.what == "edit":
        if not (args.truth and args.estimate):
            raise UsageError("eval edit needs --truth and --estimate")
        res = edit_distance(load_graph(args.truth), load_graph(args.estimate), args.exact_limit)
        out = {"edit_distance": res.value, "exact": res.exact,
               "matching": {str(k): str(v) for k, v in res.matching.items()}}
    elif args.what in ("scores", "pred"):
        if not (args.model and args.samples):
            raise UsageError(f"eval {args.what} needs --model and --samples")
        M, S = load_model(args.model), load_samples(args.samples)
        sc = model_scores(M, S, engine=args.engine)
        out = sc.to_dict()
        if args.what == "pred":
            pp, pb = predictive_scores(M, S, args.hold_fraction, args.seed, args.engine)
            out.update(pred_perplexity=pp, pred_perp_bic=pb)
    else:
        if not (args.samples and (args.topics or args.estimate)):
            raise UsageError("eval pmi needs --samples and --topics or --estimate")
        S = load_samples(args.samples)
        if args.topics:
            topics = json.loads(_read(args.topics))
        else:
            est = load_estimate(args.estimate, args.distances)
            topics = {h: top_words(est, h, 10) for h in est.graph.hidden_nodes}
        out = {"pmi": pmi_score(S, topics, args.pseudocount), "topics": len(topics)}
    out["meta"] = _meta(args)
    _write(args.out, _dump(out))
    return 0


def cmd_check(args):
    M = load_model(args.model)
    r = None if args.r in (None, "auto") else args.r
    rep = assumption_report(M, r=r, zeta=args.zeta, metric=METRIC[args.metric])
    out = rep.to_dict()
    out["satisfied"] = all(rep.flags.values())
    _write(args.out, _dump(out))
    return 0 if out["satisfied"] else EXIT_ASSUME


def cmd_calculators(args):
    p = {}
    for kv in args.param:
        if "=" not in kv:
            raise UsageError(f"parameters are key=value, got {kv!r}")
        k, v = kv.split("=", 1)
        p[k] = float(v)
    try:
        if args.kind in ("thm1", "thm2", "thm3", "necessary"):
            val = sample_complexity(args.kind, **p)
        elif args.kind == "lemma1":
            q = DepthBoundQuery(int(p["m"]), p["rho"], int(p["delta_min"]), int(p["delta_max"]),
                                int(p["g"]), p["eps"], p.get("beta", 1.0))
            val = list(depth_bound_lemma1(q))
        elif args.kind == "critical-theta":
            val = critical_theta(int(p["max_degree"]))
        else:
            val = upsilon(p["d_min"], p["d_max"], p["r"], p["g"], p["delta"])
    except KeyError as exc:
        raise UsageError(f"missing parameter {exc}") from exc
    except (ModelError, GraphError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ASSUME
    _write(args.out, _dump({"kind": args.kind, "params": p, "value": val}))
    return 0


def cmd_sweep(args):
    if not args.grid_n or not args.grid_seed:
        raise UsageError("sweep needs nonempty --grid-n and --grid-seed")
    r_grid = args.grid_r if args.grid_r else [None]
    base = CellConfig(g=args.g, leaves=args.leaves, theta_lo=args.theta_lo, theta_hi=args.theta_hi,
                      engine=args.engine, em_iters=args.em_iters, metric=METRIC[args.metric],
                      lam=None if args.lam in (None, "auto") else args.lam,
                      tau=None if args.tau in (None, "auto") else args.tau)
    rows = sweep(base, r_grid, args.grid_n, args.grid_seed, master=args.seed)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SWEEP_FIELDS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    _write(args.out, buf.getvalue())
    if args.out and args.out != "-":
        _write(_meta_path(args.out), _dump(_meta(args)))
    return 0


def cmd_export_dot(args):
    if args.estimate:
        est = load_estimate(args.estimate)
        text = est.to_dot()
    elif args.model:
        text = load_model(args.model).graph.to_dot("model")
    else:
        raise UsageError("export-dot needs --estimate or --model")
    _write(args.out, text)
    return 0


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="girthlearn", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, *names):
        if "out" in names:
            p.add_argument("--out", default=None)
        if "seed" in names:
            p.add_argument("--seed", type=int, default=0)
        if "metric" in names:
            p.add_argument("--metric", choices=sorted(METRIC), default="normalized")
        if "engine" in names:
            p.add_argument("--engine", choices=["exact", "lbp"], default="exact")
        if "params" in names:
            p.add_argument("--r", type=_float_or_auto, default="auto")
            p.add_argument("--lambda", dest="lam", type=_float_or_auto, default="auto")
            p.add_argument("--tau", type=_float_or_auto, default="auto")

    p = sub.add_parser("gen-model", help="generate a graph and Ising potentials")
    p.add_argument("--kind", choices=["latent-cycle", "regular", "latent-tree"], default="latent-cycle")
    p.add_argument("--g", type=int, default=10)
    p.add_argument("--leaves", type=int, default=2)
    p.add_argument("--m", type=int, default=20)
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--internal", type=int, default=4)
    p.add_argument("--theta-lo", type=float, default=0.05)
    p.add_argument("--theta-hi", type=float, default=0.2)
    p.add_argument("--sign", choices=["positive", "random"], default="positive")
    p.add_argument("--phi", type=float, default=0.0)
    common(p, "out", "seed")
    p.set_defaults(func=cmd_gen_model)

    p = sub.add_parser("sample", help="draw i.i.d. samples of the observed nodes")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--sampler", choices=["exact", "gibbs"], default="exact")
    p.add_argument("--burn-in", type=int, default=100)
    p.add_argument("--thin", type=int, default=10)
    p.add_argument("--include-hidden", action="store_true")
    common(p, "out", "seed")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("distances", help="empirical or oracle information distances")
    p.add_argument("--samples")
    p.add_argument("--model")
    p.add_argument("--variant", choices=["exact_global", "exact_tree_limit"], default="exact_global")
    p.add_argument("--pseudocount", type=float, default=0.0)
    common(p, "out", "metric")
    p.set_defaults(func=cmd_distances)

    p = sub.add_parser("learn", help="learn a structure from distances")
    p.add_argument("method", choices=["estone", "rg", "fully-observed"])
    p.add_argument("--distances", required=True)
    p.add_argument("--n", type=int, default=None, help="sample size for the heuristic lambda")
    common(p, "out", "params")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("fit", help="fit potentials on a learned structure by EM")
    p.add_argument("--estimate", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--iters", type=int, default=10)
    common(p, "out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="evaluation metrics")
    p.add_argument("what", choices=["edit", "scores", "pred", "pmi"])
    p.add_argument("--truth")
    p.add_argument("--estimate")
    p.add_argument("--model")
    p.add_argument("--samples")
    p.add_argument("--distances")
    p.add_argument("--topics")
    p.add_argument("--exact-limit", type=int, default=8)
    p.add_argument("--hold-fraction", type=float, default=0.5)
    p.add_argument("--pseudocount", type=float, default=0.5)
    common(p, "out", "seed", "engine")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("check-assumptions", help="evaluate recovery conditions for a model")
    p.add_argument("--model", required=True)
    p.add_argument("--r", type=_float_or_auto, default="auto")
    p.add_argument("--zeta", type=float, default=0.0)
    common(p, "out", "metric")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("calculators", help="sample-size and depth-bound calculators")
    p.add_argument("kind", choices=["thm1", "thm2", "thm3", "necessary", "lemma1",
                                    "critical-theta", "upsilon"])
    p.add_argument("param", nargs="*", help="key=value")
    common(p, "out")
    p.set_defaults(func=cmd_calculators)

    p = sub.add_parser("sweep", help="learn/fit/score over an (r, n, seed) grid")
    p.add_argument("--grid-r", type=_float_list, default=None)
    p.add_argument("--grid-n", type=_int_list, required=True)
    p.add_argument("--grid-seed", type=_int_list, required=True)
    p.add_argument("--g", type=int, default=10)
    p.add_argument("--leaves", type=int, default=2)
    p.add_argument("--theta-lo", type=float, default=0.05)
    p.add_argument("--theta-hi", type=float, default=0.2)
    p.add_argument("--em-iters", type=int, default=10)
    p.add_argument("--lambda", dest="lam", type=_float_or_auto, default="auto")
    p.add_argument("--tau", type=_float_or_auto, default="auto")
    common(p, "out", "seed", "metric", "engine")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export-dot", help="write a Graphviz DOT file")
    p.add_argument("--estimate")
    p.add_argument("--model")
    common(p, "out")
    p.set_defaults(func=cmd_export_dot)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except WidthExceeded as exc:
        print(f"width error: {exc}", file=sys.stderr)
        return EXIT_ASSUME


if __name__ == "__main__":
    sys.exit(main())
