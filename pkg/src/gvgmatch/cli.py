"""Command line: synth, perturb, mst, register, benchmark.

Exit codes: 0 success; 2 usage, file or parse error; 3 degenerate geometry;
4 matcher failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import __version__
from .affinity import AffinityWeights
from .benchmark import (BenchmarkConfig, config_from_csv, format_table, level_name, records_to_csv,
                        run_benchmark, summarize)
from .graph import GraphInvariantError, minimum_spanning_tree
from .io import GraphFormatError, read_graph, write_graph, write_text_atomic
from .matchers import ALGORITHMS, MatcherConfig
from .pipeline import RegistrationConfig, register
from .rigid import DegenerateConfigurationError
from .stats import GroundTruth, matching_accuracy
from .synth import TreeSpec, build_gvg, deform, generate_tree, prune

EXIT_OK, EXIT_INPUT, EXIT_GEOMETRY, EXIT_MATCHER = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _floats(text):
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _fraction(text):
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in [0, 1]")
    return v


def _algorithms(text):
    if text.lower() == "all":
        return ALGORITHMS
    try:
        return tuple(MatcherConfig(a.strip()).algorithm for a in text.split(",") if a.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _optional_algorithms(text):
    return () if text.lower() == "none" else _algorithms(text)


def _levels(text):
    """``D=0.3:T=0,D=0.5`` style or ``D30T0,D50T30`` style level lists."""
    out = []
    for item in text.split(","):
        item = item.strip().upper()
        d = t = 0.0
        try:
            if "=" in item:
                for part in item.split(":"):
                    key, val = part.split("=")
                    if key == "D":
                        d = float(val)
                    elif key == "T":
                        t = float(val)
                    else:
                        raise ValueError
            else:
                if not item.startswith("D"):
                    raise ValueError
                body = item[1:]
                ds, _, ts = body.partition("T")
                d, t = float(ds) / 100.0, (float(ts) / 100.0 if ts else 0.0)
        except ValueError:
            raise argparse.ArgumentTypeError(f"cannot read level {item!r} (use D40T30 or D=0.4:T=0.3)") from None
        out.append((d, t))
    return tuple(out)


def _weights(args):
    try:
        return AffinityWeights(args.alpha, args.beta)
    except ValueError as exc:
        raise CliError(f"invalid weights: {exc}", EXIT_INPUT) from None


def _load(path):
    try:
        return read_graph(path)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}", EXIT_INPUT) from None
    except (GraphFormatError, GraphInvariantError) as exc:
        raise CliError(f"invalid graph: {exc}", EXIT_INPUT) from None


def _flag_echo(args):
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(vars(args).items())
            if k not in ("func",) and not callable(v)}


def cmd_synth(args):
    spec = TreeSpec(seed=args.seed, n_nodes=args.nodes)
    tree = generate_tree(spec)
    graph = tree if args.tree else build_gvg(tree, args.nu)
    meta = dict(graph.meta)
    meta["cli"] = {"command": "synth", **_flag_echo(args)}
    write_graph(args.output, graph, meta)
    return EXIT_OK


def cmd_perturb(args):
    graph = _load(args.input)
    out = prune(deform(graph, args.deform, args.seed), args.prune, args.seed + 1)
    meta = dict(out.meta)
    meta["cli"] = {"command": "perturb", **_flag_echo(args)}
    if args.shuffle_seed is not None:
        perm = np.random.default_rng(args.shuffle_seed).permutation(out.n_nodes)
        out = out.permute_nodes(perm)
        if args.truth_out:
            target = GroundTruth.from_permutation(perm).target
            write_text_atomic(args.truth_out, json.dumps({"target": target.tolist()}) + "\n")
    write_graph(args.output, out.replace(meta=meta), meta)
    return EXIT_OK


def cmd_mst(args):
    graph = _load(args.input)
    tree = minimum_spanning_tree(graph, weight=args.weight)
    meta = dict(graph.meta)
    meta["cli"] = {"command": "mst", **_flag_echo(args)}
    write_graph(args.output, tree, meta)
    return EXIT_OK


def _truth(spec, A, B):
    if spec is None:
        return None
    if spec == "identity":
        if A.n_nodes != B.n_nodes:
            raise CliError("identity truth needs equally sized graphs", EXIT_INPUT)
        return GroundTruth.identity(A.n_nodes)
    if spec == "labels":
        if A.labels is None or B.labels is None:
            raise CliError("--truth labels needs labelled nodes in both graphs", EXIT_INPUT)
        return GroundTruth.from_labels(A.labels, B.labels)
    try:
        with open(spec, encoding="utf-8") as fh:
            target = json.load(fh)["target"]
        truth = GroundTruth(np.asarray(target, dtype=np.int64))
    except OSError as exc:
        raise CliError(f"cannot read {spec}: {exc.strerror}", EXIT_INPUT) from None
    except (ValueError, KeyError, TypeError) as exc:
        raise CliError(f"invalid truth file {spec}: {exc}", EXIT_INPUT) from None
    if len(truth.target) != A.n_nodes or np.any(truth.target >= B.n_nodes):
        raise CliError("truth file does not fit the graphs", EXIT_INPUT)
    return truth


def _csv_text(header, rows):
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return out.getvalue()


def _polylines(graph, name):
    rows = []
    for e in range(graph.n_edges):
        a, b = graph.edge_index[e]
        for k, p in enumerate(graph.paths[e]):
            rows.append([name, e, int(a), int(b), k, *(repr(float(x)) for x in p)])
    return rows


def cmd_register(args):
    A, B = _load(args.graph_a), _load(args.graph_b)
    truth = _truth(args.truth, A, B)
    config = RegistrationConfig(weights=_weights(args), skip_rigid=args.skip_rigid,
                                pose_candidates=args.pose_candidates, deformable=args.deformable,
                                matcher=MatcherConfig(seed=args.seed))
    try:
        result = register(A, B, args.algorithm, config)
    except DegenerateConfigurationError as exc:
        raise CliError(f"degenerate geometry: {exc}", EXIT_GEOMETRY) from None

    summary = {"graph_a": os.fspath(args.graph_a), "graph_b": os.fspath(args.graph_b),
               "flags": _flag_echo(args), "rigid": None, "algorithms": {}}
    if result.alignment is not None:
        summary["rigid"] = {**result.alignment.transform.to_dict(),
                            "trimmed_rmse": result.alignment.trimmed_rmse,
                            "inlier_fraction": result.alignment.inlier_fraction}
    files = {}
    failed = []
    for name, res in result.results.items():
        if not res.ok:
            failed.append(f"{name}: {res.error}")
            summary["algorithms"][name] = {"status": "failed", "error": res.error}
            continue
        asg = res.assignment
        entry = {"status": "ok", "objective": asg.objective, "converged": asg.converged,
                 "iterations": asg.iterations, "permutation": asg.permutation.tolist(),
                 "soft": asg.soft.tolist(), "transforms": [t.to_dict() for t in res.transforms]}
        if truth is not None:
            entry["accuracy"] = matching_accuracy(asg, truth)
        summary["algorithms"][name] = entry
        rows = []
        for i, j in asg.pairs():
            rows.append([i, j, *(repr(float(x)) for x in result.aligned.coords[i]),
                         *(repr(float(x)) for x in B.coords[j])])
        files[f"correspondences_{name}.csv"] = _csv_text(
            ["node_a", "node_b", "ax", "ay", "az", "bx", "by", "bz"], rows)
    header = ["graph", "edge", "a", "b", "point", "x", "y", "z"]
    files["polylines.csv"] = _csv_text(header, _polylines(result.aligned, "A_aligned") + _polylines(B, "B"))
    files["registration.json"] = json.dumps(summary, indent=1) + "\n"

    os.makedirs(args.out_dir, exist_ok=True)
    for fname, text in sorted(files.items()):
        write_text_atomic(os.path.join(args.out_dir, fname), text)
    for name, entry in summary["algorithms"].items():
        if entry["status"] == "ok":
            acc = f"  accuracy {entry['accuracy']:.2f}%" if "accuracy" in entry else ""
            print(f"{name:8s} J = {entry['objective']:.6g}{acc}")
    if failed:
        raise CliError("matcher failure: " + "; ".join(failed), EXIT_MATCHER)
    return EXIT_OK


def cmd_benchmark(args):
    if args.replay:
        try:
            with open(args.replay, encoding="utf-8") as fh:
                cfg = config_from_csv(fh.read())
        except OSError as exc:
            raise CliError(f"cannot read {args.replay}: {exc.strerror}", EXIT_INPUT) from None
        except (ValueError, TypeError) as exc:
            raise CliError(f"cannot replay {args.replay}: {exc}", EXIT_INPUT) from None
    else:
        weights = _weights(args)
        try:
            cfg = BenchmarkConfig(graph_seeds=tuple(range(args.first_graph, args.first_graph + args.graphs)),
                                  n_nodes=args.nodes, nu=args.nu, levels=args.levels,
                                  algorithms=args.algorithm, kinds=args.kinds,
                                  seeds=tuple(range(args.seed, args.seed + args.seeds)),
                                  alpha=weights.alpha, beta=weights.beta, deformable=args.deformable,
                                  pose_candidates=args.pose_candidates, timing=args.timing)
        except ValueError as exc:
            raise CliError(f"invalid benchmark configuration: {exc}", EXIT_INPUT) from None

    def progress(k, n):
        if not args.quiet:
            print(f"\r{k}/{n} units", end="" if k < n else "\n", file=sys.stderr, flush=True)

    records = run_benchmark(cfg, jobs=args.jobs, progress=progress)
    table = format_table(summarize(records), cfg.algorithms)
    write_text_atomic(args.output, records_to_csv(records, cfg))
    if args.table:
        write_text_atomic(args.table, table)
    print(table, end="")
    n_failed = sum(r.accuracy is None for r in records)
    if n_failed:
        print(f"{n_failed} of {len(records)} records failed", file=sys.stderr)
    return EXIT_OK


def _add_weights(p):
    p.add_argument("--alpha", type=_floats, default=(0.5, 0.5), help="node weights (default 0.5,0.5)")
    p.add_argument("--beta", type=_floats, default=(0.25, 0.25, 0.5),
                   help="edge weights (default 0.25,0.25,0.5)")


def build_parser():
    parser = argparse.ArgumentParser(prog="gvgmatch", description=__doc__.splitlines()[0],
                                     epilog="exit codes: 2 usage/file/parse, 3 degenerate geometry, "
                                            "4 matcher failure")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic tree and its over-connected graph")
    p.add_argument("--nodes", "--n", type=int, default=80)
    p.add_argument("--nu", type=float, default=35.0, help="over-connection radius (default 35)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tree", action="store_true", help="write the tree instead of the GVG")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("perturb", help="deform then prune a graph")
    p.add_argument("input")
    p.add_argument("--deform", type=_fraction, default=0.0, help="displacement, fraction of the diagonal")
    p.add_argument("--prune", type=_fraction, default=0.0, help="fraction of edges removed")
    p.add_argument("--seed", type=int, default=0, help="deformation seed; pruning uses seed + 1")
    p.add_argument("--shuffle-seed", type=int, default=None, help="also shuffle node ids")
    p.add_argument("--truth-out", default=None, help="write the shuffle's ground truth here")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("mst", help="minimum spanning tree of a graph")
    p.add_argument("input")
    p.add_argument("--weight", choices=("energy", "length"), default="energy")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_mst)

    p = sub.add_parser("register", help="rigid pre-alignment then graph matching of A onto B")
    p.add_argument("graph_a")
    p.add_argument("graph_b")
    p.add_argument("--algorithm", type=_algorithms, default=("FGM",), help="comma list or 'all'")
    p.add_argument("--deformable", type=_optional_algorithms, default=("FGM", "RRWM"),
                   help="algorithms refined by transform fitting (default FGM,RRWM; 'none')")
    p.add_argument("--truth", default=None, help="'identity', 'labels' or a JSON file {\"target\": [...]}")
    p.add_argument("--skip-rigid", action="store_true")
    p.add_argument("--pose-candidates", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    _add_weights(p)
    p.add_argument("-o", "--out-dir", required=True)
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("benchmark", help="synthetic accuracy grid, CSV and summary table")
    p.add_argument("--graphs", type=int, default=10)
    p.add_argument("--first-graph", type=int, default=1)
    p.add_argument("--nodes", type=int, default=80)
    p.add_argument("--nu", type=float, default=35.0)
    p.add_argument("--levels", type=_levels, default=BenchmarkConfig().levels,
                   help="e.g. D0T0,D40T30 (default: D and T in 0,30,40,50)")
    p.add_argument("--algorithm", type=_algorithms, default=BenchmarkConfig().algorithms)
    p.add_argument("--kinds", type=lambda s: tuple(s.upper().split(",")), default=("GVG", "MST"))
    p.add_argument("--deformable", type=_optional_algorithms, default=("FGM", "RRWM"))
    p.add_argument("--seeds", type=int, default=5, help="perturbation draws per cell")
    p.add_argument("--seed", type=int, default=0, help="first perturbation seed")
    p.add_argument("--pose-candidates", type=int, default=16)
    p.add_argument("--timing", action="store_true", help="record runtimes (CSV no longer reproducible)")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--replay", default=None, help="rerun the configuration stored in a benchmark CSV")
    p.add_argument("--table", default=None, help="also write the summary table here")
    p.add_argument("--quiet", action="store_true")
    _add_weights(p)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"gvgmatch {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"gvgmatch {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DegenerateConfigurationError as exc:
        print(f"gvgmatch {args.command}: degenerate geometry: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY


if __name__ == "__main__":
    sys.exit(main())
