"""Path following from a concave to a convex relaxation of the QAP objective.

Write ``E(X) = sum X * M(X)`` for the edge part of J (``M`` = factorised
edge product) and keep the node term linear, ``sum Kn * X``, which agrees
with the quadratic node term on binary matrices. On partial permutation
matrices ``sum X**2`` is the constant ``min(n1, n2)``, so for any ``c``

    F(X; c) = sum Kn * X + E(X) + c * sum X**2

differs from J by a constant there. With ``lmax`` / ``lmin`` the extreme
eigenvalues of the edge part of K, ``F`` is concave for ``c <= -lmax`` and
convex for ``c >= -lmin``. The homotopy ``c(g) = -(1 - g) lmax - g lmin``
for ``g = 0, step, ..., 1`` starts at a concave program and ends at a
convex one whose maxima over the assignment polytope sit on vertices. Each
stage is maximised by Frank-Wolfe with Hungarian direction finding and an
exact line search, warm started from the previous stage.
"""

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from ..affinity import AffinityFactors
from .common import MatcherConfig, finalize, hungarian, permutation_matrix, uniform_start

_DENSE_SPECTRUM = 400


def edge_spectrum_bounds(factors: AffinityFactors, tol: float = 1e-8):
    """``(lmax, lmin)`` of the edge part of K (K with its diagonal removed)."""
    n1, n2 = factors.shape
    N = n1 * n2
    if N == 0 or len(factors.edges_a) == 0 or len(factors.edges_b) == 0:
        return 0.0, 0.0

    def mv(v):
        return factors.edge_matvec(np.asarray(v, dtype=float).reshape(n1, n2)).ravel()

    if N <= _DENSE_SPECTRUM:
        Ke = np.column_stack([mv(e) for e in np.eye(N)])
        w = np.linalg.eigvalsh(0.5 * (Ke + Ke.T))
        return float(w[-1]), float(w[0])
    op = LinearOperator((N, N), matvec=mv, dtype=float)
    v0 = np.ones(N) / np.sqrt(N)
    try:
        lmax = float(eigsh(op, k=1, which="LA", v0=v0, tol=tol, return_eigenvectors=False)[0])
        lmin = float(eigsh(op, k=1, which="SA", v0=v0, tol=tol, return_eigenvectors=False)[0])
    except ArpackNoConvergence:
        # Gershgorin: row sums of the non-negative edge part
        bound = float(factors.edge_degree().max())
        return bound, -bound
    # pad by the solver tolerance so the end points really are concave / convex
    pad = 1e-6 * max(1.0, abs(lmax), abs(lmin))
    return lmax + pad, lmin - pad


def _gamma_path(cfg: MatcherConfig):
    if cfg.fgm_gamma is not None:
        return [float(g) for g in np.atleast_1d(cfg.fgm_gamma)]
    n = int(round(1.0 / cfg.fgm_path_step))
    path = [min(1.0, k * cfg.fgm_path_step) for k in range(n + 1)]
    if path[-1] < 1.0:
        path.append(1.0)
    return path


def fgm(factors: AffinityFactors, cfg: MatcherConfig = MatcherConfig("FGM"), init=None):
    n2 = factors.shape[1]
    lmax, lmin = edge_spectrum_bounds(factors)
    X = uniform_start(factors.shape) if init is None else np.array(init, dtype=float)
    MX = factors.edge_matvec(X)

    best_perm, best_J = None, -np.inf
    fw_total = 0
    all_converged = True
    values = []
    for gamma in _gamma_path(cfg):
        c = -(1.0 - gamma) * lmax - gamma * lmin
        F = float(np.sum(factors.Kn * X) + np.sum(X * MX) + c * np.sum(X * X))
        converged = False
        for _ in range(cfg.fgm_fw_iters):
            fw_total += 1
            g = factors.Kn + 2.0 * MX + 2.0 * c * X
            d = permutation_matrix(hungarian(g), n2) - X
            slope = float(np.sum(g * d))
            if slope <= cfg.fgm_tol * max(1.0, abs(F)):
                converged = True
                break
            Md = factors.edge_matvec(d)
            q = float(np.vdot(d, Md)) + c * float(np.vdot(d, d))
            t = 1.0 if q >= 0 else min(1.0, -slope / (2.0 * q))
            X = X + t * d
            MX = MX + t * Md
            F += t * slope + t * t * q
        all_converged &= converged
        values.append(F)
        perm = hungarian(X)
        J = factors.objective(permutation_matrix(perm, n2))
        if J > best_J:
            best_J, best_perm = J, perm
    return finalize(factors, X, "FGM", all_converged, fw_total,
                    info={"path_values": values, "spectrum": (lmax, lmin)}, permutation=best_perm)
