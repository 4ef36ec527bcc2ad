"""Synthetic benchmark grid: perturb, register, score, tabulate.

For every graph, (D, T) level and seed the graph is deformed (fraction D of
its diagonal), pruned (fraction T of its edges) and its nodes are shuffled.
The GVG record registers that copy against the original; the MST record
registers the minimum spanning tree of the copy against the minimum
spanning tree of the original. The shuffle is the ground truth.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .affinity import AffinityWeights
from .graph import SpatialGraph, minimum_spanning_tree
from .matchers import REQUIRED_ALGORITHMS, MatcherConfig
from .pipeline import RegistrationConfig, register
from .rigid import DegenerateConfigurationError
from .stats import GroundTruth, describe, matching_accuracy, wilcoxon_signed_rank
from .synth import TreeSpec, build_gvg, deform, generate_tree, prune

CSV_HEADER = ("graph_id", "algorithm", "kind", "deform", "prune", "seed", "accuracy", "runtime_ms",
              "objective", "status")
KINDS = ("GVG", "MST")
DEFAULT_LEVELS = tuple((d, t) for d in (0.0, 0.3, 0.4, 0.5) for t in (0.0, 0.3, 0.4, 0.5))
CONFIG_PREFIX = "# config: "


@dataclass(frozen=True)
class BenchmarkConfig:
    graph_seeds: tuple = tuple(range(1, 11))
    n_nodes: int = 80
    nu: float = 35.0
    levels: tuple = DEFAULT_LEVELS
    algorithms: tuple = REQUIRED_ALGORITHMS
    kinds: tuple = KINDS
    seeds: tuple = tuple(range(5))
    alpha: tuple = (0.5, 0.5)
    beta: tuple = (0.25, 0.25, 0.5)
    deformable: tuple = ("FGM", "RRWM")
    pose_candidates: int = 16
    timing: bool = False  # wall-clock times make the CSV non-reproducible

    def __post_init__(self):
        norm = lambda xs, f: tuple(f(x) for x in xs)
        object.__setattr__(self, "graph_seeds", norm(self.graph_seeds, int))
        object.__setattr__(self, "levels", tuple((float(d), float(t)) for d, t in self.levels))
        object.__setattr__(self, "algorithms", norm(self.algorithms, lambda a: MatcherConfig(a).algorithm))
        object.__setattr__(self, "deformable", norm(self.deformable, lambda a: MatcherConfig(a).algorithm))
        object.__setattr__(self, "kinds", norm(self.kinds, lambda k: str(k).upper()))
        object.__setattr__(self, "seeds", norm(self.seeds, int))
        AffinityWeights(self.alpha, self.beta)
        if not self.graph_seeds or not self.levels or not self.algorithms or not self.seeds:
            raise ValueError("benchmark needs graphs, levels, algorithms and seeds")
        if any(k not in KINDS for k in self.kinds):
            raise ValueError(f"kinds must be drawn from {KINDS}")
        for d, t in self.levels:
            if not (0.0 <= d <= 1.0 and 0.0 <= t < 1.0):
                raise ValueError(f"level D={d} T={t} out of range")
        if self.n_nodes < 2 or self.nu <= 0:
            raise ValueError("n_nodes must be >= 2 and nu positive")

    @property
    def weights(self):
        return AffinityWeights(self.alpha, self.beta)

    def registration(self) -> RegistrationConfig:
        return RegistrationConfig(weights=self.weights, pose_candidates=self.pose_candidates,
                                  deformable=self.deformable)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "BenchmarkConfig":
        raw = json.loads(text)
        raw["levels"] = [tuple(x) for x in raw["levels"]]
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()})


@dataclass
class ExperimentRecord:
    graph_id: int
    algorithm: str
    kind: str
    deform: float
    prune: float
    seed: int
    accuracy: float = None  # None when the cell failed
    runtime_ms: float = None
    objective: float = None
    status: str = "ok"

    def sort_key(self, algorithms=REQUIRED_ALGORITHMS):
        order = algorithms.index(self.algorithm) if self.algorithm in algorithms else len(algorithms)
        return (self.graph_id, self.deform, self.prune, order, self.algorithm, KINDS.index(self.kind), self.seed)


def level_name(d, t) -> str:
    return f"D{round(100 * d)}T{round(100 * t)}"


@functools.lru_cache(maxsize=32)
def make_graph(graph_seed: int, n_nodes: int = 80, nu: float = 35.0) -> SpatialGraph:
    return build_gvg(generate_tree(TreeSpec(seed=graph_seed, n_nodes=n_nodes)), nu)


def perturbation_seeds(seed, graph_seed, d, t):
    """Independent streams for deformation, pruning and shuffling of one cell."""
    ss = np.random.SeedSequence((int(seed), int(graph_seed), round(d * 1000), round(t * 1000)))
    return [int(c.generate_state(1)[0]) for c in ss.spawn(3)]


def perturbed_copy(graph: SpatialGraph, d, t, seed, graph_seed=0):
    """Deformed, pruned, node-shuffled copy of ``graph`` plus its ground truth."""
    s_def, s_prune, s_perm = perturbation_seeds(seed, graph_seed, d, t)
    A = prune(deform(graph, d, s_def), t, s_prune)
    perm = np.random.default_rng(s_perm).permutation(graph.n_nodes)
    return A, perm


def _fmt(x, spec):
    return "" if x is None else format(x, spec)


def _run_unit(args):
    """All records of one (graph, level, seed) unit."""
    cfg, graph_seed, d, t, seed = args
    graph = make_graph(graph_seed, cfg.n_nodes, cfg.nu)
    A, perm = perturbed_copy(graph, d, t, seed, graph_seed)
    truth = GroundTruth.from_permutation(perm)
    reg = cfg.registration()
    records = []
    for kind in cfg.kinds:
        a, b = (A, graph) if kind == "GVG" else (minimum_spanning_tree(A), minimum_spanning_tree(graph))
        base = dict(graph_id=graph_seed, kind=kind, deform=d, prune=t, seed=seed)
        try:
            result = register(a.permute_nodes(perm), b, cfg.algorithms, reg, timing=cfg.timing)
        except (DegenerateConfigurationError, ValueError, FloatingPointError) as exc:
            records += [ExperimentRecord(algorithm=name, status=f"failed: {type(exc).__name__}", **base)
                        for name in cfg.algorithms]
            continue
        for name, res in result.results.items():
            if not res.ok:
                records.append(ExperimentRecord(algorithm=name, status="failed: matcher", **base))
                continue
            records.append(ExperimentRecord(
                algorithm=name, accuracy=matching_accuracy(res.assignment, truth),
                runtime_ms=res.runtime_ms if cfg.timing else None,
                objective=float(res.assignment.objective), **base))
    return records


def run_benchmark(cfg: BenchmarkConfig = BenchmarkConfig(), jobs: int = 1, progress=None):
    """Every record of the grid, sorted by (graph, level, algorithm, kind, seed)."""
    units = [(cfg, g, d, t, s) for g in cfg.graph_seeds for d, t in cfg.levels for s in cfg.seeds]
    records = []
    if jobs <= 1:
        for k, unit in enumerate(units):
            records += _run_unit(unit)
            if progress:
                progress(k + 1, len(units))
    else:
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as pool:
            for k, part in enumerate(pool.map(_run_unit, units)):
                records += part
                if progress:
                    progress(k + 1, len(units))
    records.sort(key=lambda r: r.sort_key(cfg.algorithms))
    return records


def records_to_csv(records, cfg: BenchmarkConfig) -> str:
    out = io.StringIO()
    out.write("# gvgmatch benchmark; rerun with: gvgmatch benchmark --replay <this file>\n")
    out.write(CONFIG_PREFIX + cfg.to_json() + "\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow([r.graph_id, r.algorithm, r.kind, _fmt(r.deform, ".2f"), _fmt(r.prune, ".2f"), r.seed,
                         _fmt(r.accuracy, ".4f"), _fmt(r.runtime_ms, ".1f"), _fmt(r.objective, ".10g"),
                         r.status])
    return out.getvalue()


def config_from_csv(text: str) -> BenchmarkConfig:
    for line in text.splitlines():
        if line.startswith(CONFIG_PREFIX):
            return BenchmarkConfig.from_json(line[len(CONFIG_PREFIX):])
        if not line.startswith("#"):
            break
    raise ValueError("no '# config:' line in the CSV header")


def records_from_csv(text: str):
    rows = csv.DictReader(line for line in text.splitlines() if not line.startswith("#"))
    if tuple(rows.fieldnames or ()) != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {rows.fieldnames}")
    num = lambda s, f: f(s) if s != "" else None
    return [ExperimentRecord(int(r["graph_id"]), r["algorithm"], r["kind"], float(r["deform"]),
                             float(r["prune"]), int(r["seed"]), num(r["accuracy"], float),
                             num(r["runtime_ms"], float), num(r["objective"], float), r["status"])
            for r in rows]


@dataclass
class SummaryCell:
    algorithm: str
    kind: str
    level: tuple
    summary: object
    p_value: float = None  # GVG vs MST, paired on (graph, seed)

    @property
    def significant(self):
        return self.p_value is not None and self.p_value < 0.05


def summarize(records, algorithms=None):
    """Per (algorithm, kind, level) statistics plus the paired GVG-vs-MST test."""
    if not records:
        raise ValueError("no records to summarise")
    groups = {}
    for r in records:
        groups.setdefault((r.algorithm, r.kind, (r.deform, r.prune)), []).append(r)
    cells = {}
    for key, rs in groups.items():
        failures = sum(r.accuracy is None for r in rs)
        cells[key] = SummaryCell(*key, describe([r.accuracy for r in rs if r.accuracy is not None], failures))
    for (algo, kind, level), cell in cells.items():
        if kind != "MST" or (algo, "GVG", level) not in groups:
            continue
        gvg = {(r.graph_id, r.seed): r.accuracy for r in groups[(algo, "GVG", level)]}
        pairs = [(gvg[(r.graph_id, r.seed)], r.accuracy) for r in groups[(algo, kind, level)]
                 if r.accuracy is not None and gvg.get((r.graph_id, r.seed)) is not None]
        if len(pairs) >= 2:
            a, b = zip(*pairs)
            p = wilcoxon_signed_rank(a, b).p_value
            cell.p_value = p
            cells[(algo, "GVG", level)].p_value = p
    return cells


def format_table(cells, algorithms=None, digits=2) -> str:
    """Rows per (algorithm, kind), one column per level; ``*`` marks p < 0.05."""
    levels = sorted({k[2] for k in cells})
    algos = algorithms or sorted({k[0] for k in cells})
    kinds = [k for k in KINDS if any(c[1] == k for c in cells)]
    header = ["algorithm", "kind"] + [level_name(*lv) for lv in levels]
    rows = []
    for algo in algos:
        for kind in kinds:
            row = [algo, kind]
            for lv in levels:
                cell = cells.get((algo, kind, lv))
                if cell is None:
                    row.append("")
                    continue
                text = cell.summary.format(digits) + ("*" if cell.significant else "")
                if cell.summary.failures:
                    text += f" [{cell.summary.failures} failed]"
                row.append(text)
            rows.append(row)
    widths = [max(len(r[c]) for r in [header] + rows) for c in range(len(header))]
    lines = ["  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in [header] + rows]
    lines.append("Values are mean ± SD (median) accuracy in %; * = GVG vs MST Wilcoxon p < 0.05.")
    return "\n".join(lines) + "\n"
