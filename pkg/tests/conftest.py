import itertools
import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gvgmatch.graph import SpatialGraph

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=300,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

DATA = os.path.join(os.path.dirname(__file__), "data")


def straight(p, q, k=3):
    t = np.linspace(0.0, 1.0, k)[:, None]
    return np.asarray(p, float) * (1 - t) + np.asarray(q, float) * t


def random_graph(rng, n, p_edge=0.6, scale=10.0, connected=False):
    """Small graph with straight (sometimes kinked) paths and random energies."""
    coords = rng.uniform(0.0, scale, size=(n, 3))
    pairs = [pq for pq in itertools.combinations(range(n), 2) if rng.random() < p_edge]
    if connected:
        order = rng.permutation(n)
        chain = {tuple(sorted((int(order[k]), int(order[k + 1])))) for k in range(n - 1)}
        pairs = sorted(set(pairs) | chain)
    paths, energies = [], []
    for a, b in pairs:
        if rng.random() < 0.5:
            path = straight(coords[a], coords[b], int(rng.integers(2, 5)))
        else:
            mid = 0.5 * (coords[a] + coords[b]) + rng.normal(0, 1.0, 3)
            path = np.vstack([coords[a], mid, coords[b]])
        paths.append(path)
        energies.append(float(rng.uniform(0.5, 5.0)))
    return SpatialGraph(coords, pairs, paths, energies)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def triangle():
    coords = np.array([[0.0, 0, 0], [4.0, 0, 0], [0.0, 3, 0]])
    edges = [(0, 1), (1, 2), (0, 2)]
    paths = [straight(coords[a], coords[b]) for a, b in edges]
    return SpatialGraph(coords, edges, paths, [1.0, 2.0, 3.0])


_ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """``report(criterion, ok, detail)`` records one acceptance verdict."""
    def report(criterion, ok, detail=""):
        line = f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        _ACCEPTANCE[criterion] = line
        print(line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[k])
