"""Time the numba and numpy forms of the hot kernels on an 80-node GVG pair.

    python3 benchmarks/bench_kernels.py [--repeats 5] [--nodes 80]

Both forms are importable regardless of GVGMATCH_DISABLE_NUMBA; when numba
is disabled the ``*_loops`` form runs as plain Python and is skipped.
"""

import argparse
import time

import numpy as np

from gvgmatch import kernels
from gvgmatch._accel import NUMBA_ENABLED
from gvgmatch.affinity import PathSamples, build_affinity
from gvgmatch.synth import TreeSpec, build_gvg, deform, generate_tree


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=80)
    ap.add_argument("--nu", type=float, default=35.0)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    g = build_gvg(generate_tree(TreeSpec(seed=1, n_nodes=args.nodes)), args.nu)
    h = deform(g, 0.3, seed=2)
    sa, sb = PathSamples.of(h), PathSamples.of(g)
    factors, _, _ = build_affinity(h, g)
    X = np.random.default_rng(0).random(factors.shape)
    print(f"graph: {g.n_nodes} nodes, {g.n_edges} edges; numba enabled: {NUMBA_ENABLED}")

    cases = {
        "path distance": (
            lambda: kernels.mean_min_segment_distance_loops(sa.points, sb.seg_start, sb.seg_end, sb.seg_ptr),
            lambda: kernels.mean_min_segment_distance_numpy(sa.points, sb.seg_start, sb.seg_end, sb.seg_ptr)),
        "edge matvec": (
            lambda: kernels.edge_matvec_loops(factors.Ke, factors.edges_a, factors.edges_b, X),
            lambda: kernels.edge_matvec_numpy(factors.Ke, factors.edges_a, factors.edges_b, X)),
    }
    print(f"{'kernel':16s} {'numba [ms]':>12s} {'numpy [ms]':>12s} {'speed-up':>9s} {'max |diff|':>11s}")
    for name, (fast, ref) in cases.items():
        t_ref, out_ref = best_of(ref, args.repeats)
        if NUMBA_ENABLED:
            fast()  # compile (or load from cache) outside the timing
            t_fast, out_fast = best_of(fast, args.repeats)
            diff = float(np.max(np.abs(out_fast - out_ref)))
            print(f"{name:16s} {1e3 * t_fast:12.2f} {1e3 * t_ref:12.2f} {t_ref / t_fast:9.1f} {diff:11.2e}")
        else:
            print(f"{name:16s} {'skipped':>12s} {1e3 * t_ref:12.2f}")


if __name__ == "__main__":
    main()
