"""Numeric inner loops shared by the affinity builder and the matchers.

Each kernel has a ``*_loops`` form (compiled by numba when enabled) and a
``*_numpy`` form. The public names dispatch to whichever backend is active;
both forms are importable so tests and benchmarks can compare them.
"""

import numpy as np

from ._accel import NUMBA_ENABLED, jit


# ---------------------------------------------------------------------------
# Mean point-to-polyline distance
# ---------------------------------------------------------------------------

# reassociation and FMA contraction only; the kernels rely on exact min/inf semantics
_FAST = {"nsz", "arcp", "contract", "reassoc"}
_BIG = 1e300


@jit(fastmath=_FAST)
def _mean_min_segment_distance_flat(px, py, pz, n_samples, seg_start, seg_end, seg_ptr):
    n_pts = px.shape[0]
    n_paths = n_pts // n_samples
    n_targets = seg_ptr.shape[0] - 1
    out = np.empty((n_paths, n_targets))
    best = np.empty(n_pts)
    for w in range(n_targets):
        best[:] = _BIG
        for k in range(seg_ptr[w], seg_ptr[w + 1]):
            ax = seg_start[k, 0]
            ay = seg_start[k, 1]
            az = seg_start[k, 2]
            dx = seg_end[k, 0] - ax
            dy = seg_end[k, 1] - ay
            dz = seg_end[k, 2] - az
            dd = dx * dx + dy * dy + dz * dz
            inv = 1.0 / dd if dd > 0.0 else 0.0
            # innermost loop runs over contiguous query points so it vectorises
            for p in range(n_pts):
                qx = px[p] - ax
                qy = py[p] - ay
                qz = pz[p] - az
                t = (qx * dx + qy * dy + qz * dz) * inv
                t = min(max(t, 0.0), 1.0)
                rx = qx - t * dx
                ry = qy - t * dy
                rz = qz - t * dz
                best[p] = min(best[p], rx * rx + ry * ry + rz * rz)
        for v in range(n_paths):
            acc = 0.0
            for s in range(v * n_samples, (v + 1) * n_samples):
                acc += np.sqrt(best[s])
            out[v, w] = acc / n_samples
    return out


def mean_min_segment_distance_loops(points, seg_start, seg_end, seg_ptr):
    """``out[v, w]`` = mean over samples of path ``v`` of the distance to path ``w``'s segments.

    ``points`` is ``(V, S, 3)``; segments of target ``w`` are rows
    ``seg_ptr[w]:seg_ptr[w + 1]`` of ``seg_start``/``seg_end``.
    """
    n_paths, n_samples = points.shape[:2]
    flat = points.reshape(-1, 3)
    return _mean_min_segment_distance_flat(
        np.ascontiguousarray(flat[:, 0]), np.ascontiguousarray(flat[:, 1]), np.ascontiguousarray(flat[:, 2]),
        n_samples, np.ascontiguousarray(seg_start, dtype=float), np.ascontiguousarray(seg_end, dtype=float),
        np.ascontiguousarray(seg_ptr, dtype=np.int64))


def mean_min_segment_distance_numpy(points, seg_start, seg_end, seg_ptr):
    n_paths, n_samples = points.shape[:2]
    flat = points.reshape(-1, 3)
    out = np.empty((n_paths, len(seg_ptr) - 1))
    for w in range(len(seg_ptr) - 1):
        a = seg_start[seg_ptr[w]:seg_ptr[w + 1]]
        d = seg_end[seg_ptr[w]:seg_ptr[w + 1]] - a
        q = flat[:, None, :] - a[None, :, :]
        dd = np.einsum("kc,kc->k", d, d)
        safe = np.where(dd > 0.0, dd, 1.0)
        t = np.clip(np.einsum("pkc,kc->pk", q, d) / safe, 0.0, 1.0)
        t = np.where(dd > 0.0, t, 0.0)
        r = q - t[:, :, None] * d[None, :, :]
        best = np.einsum("pkc,pkc->pk", r, r).min(axis=1)
        out[:, w] = np.sqrt(best).reshape(n_paths, n_samples).mean(axis=1)
    return out


# ---------------------------------------------------------------------------
# Edge part of the factorised affinity product
# ---------------------------------------------------------------------------

@jit
def edge_matvec_loops(ke, edges_a, edges_b, x):
    out = np.zeros_like(x)
    for v in range(edges_a.shape[0]):
        a = edges_a[v, 0]
        b = edges_a[v, 1]
        for w in range(edges_b.shape[0]):
            c = edges_b[w, 0]
            d = edges_b[w, 1]
            k = ke[v, w]
            out[a, c] += k * x[b, d]
            out[b, d] += k * x[a, c]
            out[a, d] += k * x[b, c]
            out[b, c] += k * x[a, d]
    return out


def _one_hot(index, size):
    m = np.zeros((size, len(index)))
    m[index, np.arange(len(index))] = 1.0
    return m


def edge_matvec_numpy(ke, edges_a, edges_b, x):
    n1, n2 = x.shape
    a, b = edges_a[:, 0], edges_a[:, 1]
    c, d = edges_b[:, 0], edges_b[:, 1]
    ga, gb = _one_hot(a, n1), _one_hot(b, n1)
    gc, gd = _one_hot(c, n2), _one_hot(d, n2)
    out = ga @ (ke * x[np.ix_(b, d)]) @ gc.T
    out += gb @ (ke * x[np.ix_(a, c)]) @ gd.T
    out += ga @ (ke * x[np.ix_(b, c)]) @ gd.T
    out += gb @ (ke * x[np.ix_(a, d)]) @ gc.T
    return out


if NUMBA_ENABLED:
    mean_min_segment_distance = mean_min_segment_distance_loops
    edge_matvec = edge_matvec_loops
else:
    mean_min_segment_distance = mean_min_segment_distance_numpy
    edge_matvec = edge_matvec_numpy
