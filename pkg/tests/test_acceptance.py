"""Acceptance criteria 1-9, one verdict line per criterion.

Criteria 2, 3 and 9 run the synthetic benchmark at full graph size and take
tens of minutes on one core.
"""

import itertools
import math
import time

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from conftest import random_graph
from gvgmatch.affinity import (AffinityWeights, DistanceMatrices, NormalizationStats, build_affinity, edge_affinity,
                               node_affinity)
from gvgmatch.benchmark import BenchmarkConfig, make_graph, records_to_csv, run_benchmark, summarize
from gvgmatch.matchers import (ALGORITHMS, REQUIRED_ALGORITHMS, MatcherConfig, assignment_score, hungarian, ipfp,
                               permutation_matrix, run_matcher, spectral_match)
from gvgmatch.pipeline import RegistrationConfig, register
from gvgmatch.rigid import collect_point_cloud, rigid_align, rotation_angle_deg
from gvgmatch.stats import GroundTruth, matching_accuracy, wilcoxon_signed_rank
from gvgmatch.synth import TreeSpec, generate_tree

pytestmark = pytest.mark.acceptance


def brute_qap(f):
    n1, n2 = f.shape
    best = -math.inf
    if n1 <= n2:
        maps = itertools.permutations(range(n2), n1)
    else:
        maps = (_rows_to_perm(rows, n1, n2) for rows in itertools.permutations(range(n1), n2))
    for p in maps:
        best = max(best, f.objective(permutation_matrix(np.asarray(p), n2)))
    return best


def _rows_to_perm(rows, n1, n2):
    perm = np.full(n1, -1)
    perm[list(rows)] = np.arange(n2)
    return perm


def brute_lap(S):
    n1, n2 = S.shape
    if n1 <= n2:
        return max(assignment_score(S, np.asarray(p)) for p in itertools.permutations(range(n2), n1))
    return max(assignment_score(S, _rows_to_perm(r, n1, n2)) for r in itertools.permutations(range(n1), n2))


# 1 ----------------------------------------------------------------------------------

def test_criterion_1_self_match(acceptance):
    worst_acc, worst_time = 100.0, 0.0
    misses = []
    for seed in range(1, 11):
        g = make_graph(seed, 80, 35.0)
        perm = np.random.default_rng(seed).permutation(g.n_nodes)
        A, truth = g.permute_nodes(perm), GroundTruth.from_permutation(perm)
        t0 = time.perf_counter()
        res = register(A, g, REQUIRED_ALGORITHMS, RegistrationConfig(deformable=("FGM", "RRWM")))
        elapsed = time.perf_counter() - t0
        worst_time = max(worst_time, elapsed)
        for name, r in res.results.items():
            acc = matching_accuracy(r.assignment, truth) if r.ok else 0.0
            worst_acc = min(worst_acc, acc)
            if acc != 100.0:
                misses.append(f"seed {seed} {name} {acc:.2f}%")
    ok = worst_acc == 100.0 and worst_time < 60.0
    acceptance(1, ok, f"min accuracy {worst_acc:.2f}%, slowest pair {worst_time:.1f} s {misses}")
    assert ok


# 2 ----------------------------------------------------------------------------------

def test_criterion_2_pure_displacement(acceptance):
    levels = ((0.3, 0.0), (0.4, 0.0), (0.5, 0.0))
    cfg = BenchmarkConfig(levels=levels, algorithms=("FGM", "RRWM"), kinds=("GVG",), seeds=(0,))
    cells = summarize(run_benchmark(cfg))
    means = {(a, lv): cells[(a, "GVG", lv)].summary.mean for a in cfg.algorithms for lv in levels}
    ok = all(cells[(a, "GVG", lv)].summary.n >= 10 and m >= 90.0 for (a, lv), m in means.items())
    detail = ", ".join(f"{a} D{round(100 * lv[0])} {m:.2f}%" for (a, lv), m in means.items())
    acceptance(2, ok, detail)
    assert ok


# 3 ----------------------------------------------------------------------------------

def test_criterion_3_gvg_beats_mst(acceptance):
    cfg = BenchmarkConfig(levels=((0.4, 0.3),), algorithms=("FGM",), seeds=tuple(range(5)))
    records = run_benchmark(cfg)
    gvg = {(r.graph_id, r.seed): r.accuracy for r in records if r.kind == "GVG"}
    mst = {(r.graph_id, r.seed): r.accuracy for r in records if r.kind == "MST"}
    keys = sorted(gvg)
    a = [gvg[k] if gvg[k] is not None else 0.0 for k in keys]
    b = [mst[k] if mst[k] is not None else 0.0 for k in keys]
    p = wilcoxon_signed_rank(a, b).p_value
    ok = len(keys) >= 50 and np.mean(a) > np.mean(b) and p < 0.05
    acceptance(3, ok, f"GVG {np.mean(a):.2f}% vs MST {np.mean(b):.2f}% over {len(keys)} pairs, p = {p:.3g}")
    assert ok


# 4 ----------------------------------------------------------------------------------

def test_criterion_4_exhaustive_oracles(acceptance):
    worst_excess, lap_mismatch, trace_breaks = -math.inf, 0, 0
    for seed in range(50):
        rng = np.random.default_rng(10_000 + seed)
        n1, n2 = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        f = build_affinity(random_graph(rng, n1), random_graph(rng, n2))[0]
        opt = brute_qap(f)
        for name in ALGORITHMS:
            worst_excess = max(worst_excess, run_matcher(f, MatcherConfig(name)).objective - opt)
        for S in (f.Kn, rng.normal(size=(n1, n2)), f.matvec(np.ones((n1, n2)))):
            lap_mismatch += assignment_score(S, hungarian(S)) != brute_lap(S)
        for init in (None, spectral_match(f).soft, rng.random((n1, n2))):
            trace = ipfp(f, init).info["trace"]
            trace_breaks += trace != sorted(trace)
    ok = worst_excess <= 1e-9 and lap_mismatch == 0 and trace_breaks == 0
    acceptance(4, ok, f"max J above optimum {worst_excess:.2e}, LAP mismatches {lap_mismatch}, "
                      f"decreasing IPFP traces {trace_breaks}")
    assert ok


# 5 ----------------------------------------------------------------------------------

def _cloud(seed, n=2000):
    pts = collect_point_cloud(generate_tree(TreeSpec(seed=seed)))
    idx = np.random.default_rng(seed).choice(len(pts), size=min(n, len(pts)), replace=False)
    return pts[np.sort(idx)]


def test_criterion_5_rigid_recovery(acceptance):
    worst_rot, worst_trans, worst_partial, slowest = 0.0, 0.0, 0.0, 0.0
    for k in range(20):
        pts = _cloud(100 + k)
        diag = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
        R = Rotation.random(random_state=k).as_matrix()
        t = np.random.default_rng(k).uniform(-50, 50, 3)
        t0 = time.perf_counter()
        rep = rigid_align(pts, pts @ R.T + t)
        slowest = max(slowest, time.perf_counter() - t0)
        worst_rot = max(worst_rot, rotation_angle_deg(rep.transform.rotation, R))
        worst_trans = max(worst_trans, float(np.linalg.norm(rep.transform.translation - t)) / diag)
        keep = np.random.default_rng(1000 + k).random(len(pts)) >= 0.3
        t0 = time.perf_counter()
        part = rigid_align(pts[keep], pts @ R.T + t)
        slowest = max(slowest, time.perf_counter() - t0)
        worst_partial = max(worst_partial, rotation_angle_deg(part.transform.rotation, R))
    ok = worst_rot <= 0.1 and worst_trans <= 1e-4 and worst_partial <= 2.0 and slowest < 10.0
    acceptance(5, ok, f"rotation {worst_rot:.2e} deg, translation {worst_trans:.2e} x diagonal, "
                      f"30% deleted {worst_partial:.3f} deg, slowest {slowest:.2f} s")
    assert ok


# 6 ----------------------------------------------------------------------------------

def test_criterion_6_affinity_fidelity(acceptance):
    rng = np.random.default_rng(6)
    worst_entry, worst_obj, outside = 0.0, 0.0, 0
    for _ in range(200):
        a = float(rng.random())
        b = rng.dirichlet(np.ones(3))
        w = AffinityWeights((a, 1.0 - a), (b[0], b[1], 1.0 - b[0] - b[1]))
        mats = [rng.uniform(0, 40, size=(3, 4)) for _ in range(5)]
        s = NormalizationStats(*rng.uniform(0.1, 10, size=5))
        Kn, Ke = node_affinity(DistanceMatrices(*mats), w, s), edge_affinity(DistanceMatrices(*mats), w, s)
        for i, j in itertools.product(range(3), range(4)):
            kn = math.exp(-(w.alpha[0] * mats[0][i, j] / s.sigma_C + w.alpha[1] * mats[1][i, j] / s.sigma_D))
            ke = math.exp(-(w.beta[0] * mats[2][i, j] / s.sigma_P + w.beta[1] * mats[3][i, j] / s.sigma_L
                            + w.beta[2] * mats[4][i, j] / s.sigma_U))
            for got, want in ((Kn[i, j], kn), (Ke[i, j], ke)):
                worst_entry = max(worst_entry, abs(got - want) / max(want, 1e-300))
    rejected = 0
    bad = [((0.6, 0.5), (0.25, 0.25, 0.5)), ((0.5, 0.5), (0.3, 0.3, 0.3)), ((1.5, -0.5), (0.2, 0.3, 0.5)),
           ((0.5, 0.5), (0.5, 0.6, -0.1))]
    for alpha, beta in bad:
        try:
            AffinityWeights(alpha, beta)
        except ValueError:
            rejected += 1
    for seed in range(50):
        r = np.random.default_rng(seed)
        n1, n2 = int(r.integers(1, 6)), int(r.integers(1, 6))
        f = build_affinity(random_graph(r, n1), random_graph(r, n2))[0]
        outside += int(np.any(f.Kn <= 0) or np.any(f.Kn > 1) or np.any(f.Ke <= 0) or np.any(f.Ke > 1))
        K = f.dense()
        for _ in range(5):
            X = r.random((n1, n2))
            worst_obj = max(worst_obj, abs(f.objective(X) - float(X.ravel() @ K @ X.ravel())))
    ok = worst_entry <= 1e-12 and rejected == len(bad) and outside == 0 and worst_obj <= 1e-10
    acceptance(6, ok, f"entry rel. error {worst_entry:.1e}, invalid weights rejected {rejected}/{len(bad)}, "
                      f"entries outside (0,1] {outside}, factorized vs dense {worst_obj:.1e}")
    assert ok


# 7 ----------------------------------------------------------------------------------

def _enumerated_p(d):
    from scipy.stats import rankdata
    d = d[d != 0]
    if len(d) == 0:
        return 1.0
    r = rankdata(np.abs(d))
    W = min(r[d > 0].sum(), r[d < 0].sum())
    hits = sum(min(sum(r[list(s)]), r.sum() - sum(r[list(s)])) <= W + 1e-9
               for k in range(len(d) + 1) for s in itertools.combinations(range(len(d)), k))
    return min(1.0, hits / 2 ** len(d))


def test_criterion_7_wilcoxon_exact(acceptance):
    rng = np.random.default_rng(7)
    worst = 0.0
    for n in range(2, 9):
        for _ in range(60):
            a, b = rng.integers(0, 6, size=n).astype(float), rng.integers(0, 6, size=n).astype(float)
            worst = max(worst, abs(wilcoxon_signed_rank(a, b).p_value - _enumerated_p(a - b)))
    p5 = wilcoxon_signed_rank([1, 2, 3, 4, 5], [0, 0, 0, 0, 0]).p_value
    ok = worst <= 1e-12 and abs(p5 - 0.0625) <= 1e-12
    acceptance(7, ok, f"max |p - enumeration| {worst:.1e} for n <= 8, p({{1..5}}) = {p5}")
    assert ok


# 8 ----------------------------------------------------------------------------------

def test_criterion_8_labelled_graph_path(acceptance):
    g = make_graph(3, 40, 35.0)
    names = [f"landmark-{i}" if i % 3 == 0 else None for i in range(g.n_nodes)]
    B = g.replace(labels=names)
    perm = np.random.default_rng(8).permutation(g.n_nodes)
    A = B.permute_nodes(perm)
    truth = GroundTruth.from_labels(A.labels, B.labels)
    res = register(A, B, ("FGM",), RegistrationConfig(deformable=("FGM",)))
    acc = matching_accuracy(res.results["FGM"].assignment, truth)
    ok = truth.n_pairs == len([n for n in names if n]) and acc == 100.0
    acceptance(8, ok, f"clinical table not reproducible (no data); labelled path: {truth.n_pairs} labelled "
                      f"pairs, accuracy {acc:.2f}%")
    assert ok


# 9 ----------------------------------------------------------------------------------

def test_criterion_9_determinism(acceptance):
    cfg = BenchmarkConfig(graph_seeds=(1,), n_nodes=40, levels=((0.0, 0.0), (0.4, 0.3)), seeds=(0, 1),
                          pose_candidates=8)
    first = records_to_csv(run_benchmark(cfg, jobs=1), cfg)
    second = records_to_csv(run_benchmark(cfg, jobs=1), cfg)
    parallel = records_to_csv(run_benchmark(cfg, jobs=3), cfg)
    ok = first.encode() == second.encode() == parallel.encode()
    acceptance(9, ok, f"{len(first.splitlines()) - 3} rows; rerun identical {first == second}, "
                      f"--jobs 1 vs 3 identical {first == parallel}")
    assert ok
