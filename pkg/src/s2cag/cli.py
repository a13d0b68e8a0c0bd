"""Command-line entry point: ``s2cag {cluster,diagnose,bench,convert}``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import statistics
import sys
import time
from contextlib import nullcontext

import numpy as np

from . import graphstore, metrics
from .msscag import MsscagParams, cluster_msscag
from .smoothing import build_nsr
from .sscag import SscagParams, cluster_sscag

log = logging.getLogger("s2cag")

# per-dataset settings; a pair means (sscag value, msscag value)
PRESETS = {
    "acm":      dict(k=3,  alpha=0.8,        order=15,        iters=(7, 50),  gamma=1.0),
    "wiki":     dict(k=17, alpha=1.7,        order=(6, 12),   iters=(7, 50),  gamma=0.9),
    "citeseer": dict(k=6,  alpha=0.8,        order=(60, 40),  iters=(7, 100), gamma=0.9),
    "photo":    dict(k=8,  alpha=1.5,        order=9,         iters=(7, 50),  gamma=1.0),
    "dblp":     dict(k=4,  alpha=0.9,        order=10,        iters=(7, 50),  gamma=1.0),
    "pubmed":   dict(k=3,  alpha=1.8,        order=175,       iters=(7, 50),  gamma=1.0),
    "cora":     dict(k=70, alpha=(0.9, 1.4), order=(20, 7),   iters=(7, 100), gamma=1.0),
    "arxiv":    dict(k=40, alpha=(1.4, 2.5), order=30,        iters=(4, 50),  gamma=1.0),
}

DEFAULTS = dict(alpha=0.9, order=15, iters={"sscag": 7, "msscag": 50}, gamma=1.0,
                oversampling=10, seed=42)


class UsageError(Exception):
    pass


def preset_params(name, method):
    try:
        raw = PRESETS[name.lower()]
    except KeyError:
        raise UsageError(f"unknown preset '{name}' (known: {', '.join(sorted(PRESETS))})") from None
    pick = 0 if method == "sscag" else 1
    return {key: (val[pick] if isinstance(val, tuple) else val) for key, val in raw.items()}


def resolve_config(args):
    """Merge defaults, preset and explicit flags (explicit flags win)."""
    cfg = {"alpha": DEFAULTS["alpha"], "order": DEFAULTS["order"],
           "iters": DEFAULTS["iters"][args.method], "gamma": DEFAULTS["gamma"],
           "oversampling": DEFAULTS["oversampling"], "seed": DEFAULTS["seed"], "k": None}
    if args.preset:
        cfg.update(preset_params(args.preset, args.method))
    for key in ("k", "alpha", "order", "iters", "gamma", "oversampling", "seed"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if cfg["k"] is None:
        raise UsageError("--k is required unless a --preset supplies it")
    return cfg


def make_params(method, cfg):
    try:
        if method == "sscag":
            return SscagParams(k=cfg["k"], alpha=cfg["alpha"], order=cfg["order"],
                               iters=cfg["iters"], oversampling=cfg["oversampling"],
                               seed=cfg["seed"])
        return MsscagParams(k=cfg["k"], alpha=cfg["alpha"], order=cfg["order"],
                            iters=cfg["iters"], gamma=cfg["gamma"], seed=cfg["seed"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _threads(args):
    val = args.threads
    if val is None:
        env = os.environ.get("SSCAG_THREADS")
        if env:
            try:
                val = int(env)
            except ValueError:
                raise UsageError(f"SSCAG_THREADS must be an integer, got '{env}'") from None
    if val is not None and val < 1:
        raise UsageError("--threads must be >= 1")
    return val


def _thread_limit(n):
    if n is None:
        return nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


def _check_inputs(args, need_labels=False):
    for flag, path in (("--edges", args.edges), ("--attrs", args.attrs), ("--labels", args.labels)):
        if path is None:
            if flag != "--labels" or need_labels:
                raise UsageError(f"{flag} is required")
            continue
        if not os.path.isfile(path):
            raise UsageError(f"{flag}: file not found: {path}")


def _load(args):
    _check_inputs(args)
    return graphstore.load_graph(args.edges, args.attrs, args.labels)


def run_clustering(g, method, params, force_branch="auto"):
    if method == "sscag":
        return cluster_sscag(g, params, force_branch=force_branch)
    return cluster_msscag(g, params)


def write_labels(path, g, labels):
    ids = g.original_ids()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("vertex_id\tcluster\n")
        for vid, lab in zip(ids, labels):
            fh.write(f"{vid}\t{int(lab)}\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _dump(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default)
    if path is None:
        print(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


# ------------------------------------------------------------- commands

def cmd_cluster(args):
    cfg = resolve_config(args)
    params = make_params(args.method, cfg)
    g = _load(args)
    with _thread_limit(_threads(args)):
        a = run_clustering(g, args.method, params, args.force_branch)
    q = metrics.evaluate(a, truth=g.labels, nsr=a.nsr, modularity_operator=a.modularity_operator)
    report = q.to_dict()
    report.update({"method": args.method, "n": g.n, "m": g.m, "d": g.d, "k": params.k,
                   "cluster_sizes": a.sizes.tolist(), "rounding_iterations": a.iterations,
                   "timings_ms": a.report["timings_ms"]})
    if "cost_estimates" in a.report:
        report["cost_estimates"] = a.report["cost_estimates"]
    if "iteration" in a.report:
        report["iteration"] = a.report["iteration"]
    os.makedirs(args.out, exist_ok=True)
    write_labels(os.path.join(args.out, "labels.tsv"), g, a.labels)
    _dump(report, os.path.join(args.out, "report.json"))
    line = f"{args.method}: n={g.n} k={params.k} branch={report['branch']}"
    if "cost_estimates" in report:
        ce = report["cost_estimates"]
        line += f" f_naive={ce['f_naive']} f_integr={ce['f_integr']}"
    if q.acc is not None:
        line += f" acc={q.acc:.4f} nmi={q.nmi:.4f} ari={q.ari:.4f}"
    print(line)
    return 0


def cmd_diagnose(args):
    cfg = {"alpha": DEFAULTS["alpha"], "order": DEFAULTS["order"]}
    if args.preset:
        p = preset_params(args.preset, args.method)
        cfg.update(alpha=p["alpha"], order=p["order"])
    for key in ("alpha", "order"):
        if getattr(args, key) is not None:
            cfg[key] = getattr(args, key)
    g = _load(args)
    with _thread_limit(_threads(args)):
        ops = graphstore.normalize(g)
        z = build_nsr(ops, cfg["order"], cfg["alpha"])
        diag = metrics.stochasticity_report(ops, z)
    out = {"schema_version": metrics.REPORT_SCHEMA_VERSION, "alpha": cfg["alpha"],
           "order": cfg["order"], **diag.summary()}
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _dump(out, os.path.join(args.out, "diagnostics.json"))
    _dump(out)
    return 0


def cmd_bench(args):
    cfg = resolve_config(args)
    params = make_params(args.method, cfg)
    if args.repeats < 1:
        raise UsageError("--repeats must be >= 1")
    g = _load(args)
    samples = []
    with _thread_limit(_threads(args)):
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            a = run_clustering(g, args.method, params, args.force_branch)
            wall = (time.perf_counter() - t0) * 1e3
            samples.append({"wall_ms": wall, **a.report["timings_ms"]})
    phases = sorted({key for s in samples for key in s})
    out = {"schema_version": metrics.REPORT_SCHEMA_VERSION, "method": args.method,
           "branch": a.report["branch"], "repeats": args.repeats, "samples": samples,
           "median_ms": {key: statistics.median(s[key] for s in samples) for key in phases}}
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _dump(out, os.path.join(args.out, "bench.json"))
    print(f"{'phase':<12}{'median ms':>12}")
    for key in phases:
        print(f"{key:<12}{out['median_ms'][key]:>12.2f}")
    return 0


def _read_features(path):
    ext = os.path.splitext(path)[1].lower()
    if ext == ".npy":
        return np.load(path), None
    if ext == ".npz":
        import scipy.sparse as sp
        try:
            return sp.load_npz(path), None
        except (ValueError, KeyError):
            with np.load(path) as data:
                return data[data.files[0]], None
    return graphstore.read_attributes(path)


def cmd_convert(args):
    _check_inputs(args)
    x, ids = _read_features(args.attrs)
    n = x.shape[0]
    edges = graphstore.read_edges(args.edges)
    labels = None
    if args.labels:
        lab = graphstore.read_labels(args.labels)
        keys = ids if ids is not None else range(n)
        labels = np.array([lab[int(v)] for v in keys], dtype=np.int64)
    if ids is not None:
        index = {int(v): i for i, v in enumerate(ids)}
        edges = np.array([(index[u], index[v]) for u, v in edges], dtype=np.int64).reshape(-1, 2)
    g = graphstore.build_graph(n, edges, x, labels=labels, vertex_ids=ids)
    paths = graphstore.save_graph(g, args.out)
    print(f"wrote n={g.n} m={g.m} d={g.d}: " + ", ".join(paths[k] for k in sorted(paths)))
    return 0


# --------------------------------------------------------------- parser

def build_parser():
    parser = argparse.ArgumentParser(prog="s2cag", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def io(p, out_required):
        p.add_argument("--edges")
        p.add_argument("--attrs")
        p.add_argument("--labels")
        p.add_argument("--out", required=out_required)
        p.add_argument("--threads", type=int)

    def algo(p):
        p.add_argument("--method", choices=("sscag", "msscag"), default="sscag")
        p.add_argument("--preset")
        p.add_argument("--k", type=int)
        p.add_argument("--alpha", type=float)
        p.add_argument("--order", type=int)
        p.add_argument("--iters", type=int)
        p.add_argument("--gamma", type=float)
        p.add_argument("--oversampling", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--force-branch", choices=("auto", "naive", "integrated"), default="auto")

    p = sub.add_parser("cluster", help="cluster a graph, write labels.tsv and report.json")
    io(p, True)
    algo(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("diagnose", help="stochasticity statistics of the affinity matrix")
    io(p, False)
    p.add_argument("--method", choices=("sscag", "msscag"), default="sscag")
    p.add_argument("--preset")
    p.add_argument("--alpha", type=float)
    p.add_argument("--order", type=int)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("bench", help="time the pipeline, excluding I/O")
    io(p, False)
    algo(p)
    p.add_argument("--repeats", type=int, default=5)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("convert", help="turn edge CSV + features + labels into canonical files")
    io(p, True)
    p.set_defaults(func=cmd_convert)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, FileNotFoundError) as exc:
        print(f"s2cag: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report any runtime failure as exit 1
        log.debug("failure", exc_info=True)
        print(f"s2cag: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
