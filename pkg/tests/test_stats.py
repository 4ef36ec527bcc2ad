import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import rankdata

from gvgmatch.stats import GroundTruth, describe, matching_accuracy, wilcoxon_signed_rank


def enumerated_p(a, b):
    """Two-sided p-value by enumerating all 2^n sign patterns of the midranks."""
    d = np.asarray(a, float) - np.asarray(b, float)
    d = d[d != 0]
    if len(d) == 0:
        return 1.0
    r = rankdata(np.abs(d))
    W = min(r[d > 0].sum(), r[d < 0].sum())
    hits = 0
    for signs in itertools.product((0, 1), repeat=len(d)):
        wp = sum(ri for ri, s in zip(r, signs) if s)
        hits += min(wp, r.sum() - wp) <= W + 1e-9
    return min(1.0, hits / 2 ** len(d))


def test_wilcoxon_textbook_example():
    res = wilcoxon_signed_rank([1, 2, 3, 4, 5], [0, 0, 0, 0, 0])
    assert res.statistic == 0 and res.method == "exact"
    assert res.p_value == pytest.approx(0.0625, abs=1e-12)


def test_wilcoxon_identical_samples():
    res = wilcoxon_signed_rank([3, 1, 2], [3, 1, 2])
    assert res.p_value == 1.0 and res.method == "degenerate" and res.n_effective == 0


def test_wilcoxon_input_validation():
    with pytest.raises(ValueError):
        wilcoxon_signed_rank([1], [2])
    with pytest.raises(ValueError):
        wilcoxon_signed_rank([1, 2], [1, 2, 3])


@given(st.lists(st.tuples(st.integers(-4, 4), st.integers(-4, 4)), min_size=2, max_size=8))
def test_wilcoxon_exact_matches_enumeration(pairs):
    # small integer ranges force ties and zero differences
    a, b = zip(*pairs)
    res = wilcoxon_signed_rank(a, b)
    assert res.p_value == pytest.approx(enumerated_p(a, b), abs=1e-12)


def test_wilcoxon_symmetric_in_arguments():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=15), rng.normal(size=15)
    assert wilcoxon_signed_rank(a, b).p_value == wilcoxon_signed_rank(b, a).p_value


def test_normal_approximation_near_exact_at_crossover():
    rng = np.random.default_rng(1)
    for _ in range(20):
        a, b = rng.normal(size=13), rng.normal(size=13)
        exact = wilcoxon_signed_rank(a, b, exact_max=13)
        approx = wilcoxon_signed_rank(a, b, exact_max=12)
        assert exact.method == "exact" and approx.method == "normal"
        assert abs(exact.p_value - approx.p_value) < 0.02


def test_normal_approximation_on_large_shift():
    a = np.arange(1.0, 41.0)
    res = wilcoxon_signed_rank(a, np.zeros(40))
    assert res.method == "normal" and res.p_value < 1e-6


def test_accuracy_examples():
    truth = GroundTruth.identity(4)
    assert matching_accuracy([0, 1, 2, 3], truth) == 100.0
    assert matching_accuracy([0, 1, 3, 2], truth) == 50.0
    assert matching_accuracy([0, 1, -1, -1], truth) == 50.0
    with pytest.raises(ValueError):
        matching_accuracy([0], GroundTruth(np.array([-1])))


def test_random_permutation_accuracy_averages_one_match():
    # a uniform random permutation has one fixed point on average
    rng = np.random.default_rng(2)
    n = 80
    truth = GroundTruth.identity(n)
    acc = [matching_accuracy(rng.permutation(n), truth) for _ in range(4000)]
    assert np.mean(acc) == pytest.approx(100.0 / n, rel=0.1)


def test_ground_truth_from_permutation():
    perm = np.array([2, 0, 3, 1])
    truth = GroundTruth.from_permutation(perm)
    # node perm[i] of A corresponds to node i of B
    for i, p in enumerate(perm):
        assert truth.target[p] == i
    with pytest.raises(ValueError):
        GroundTruth(np.array([0, 0]))


def test_ground_truth_from_labels():
    truth = GroundTruth.from_labels(["a", "b", "", "c", "d", "d"], ["c", "b", "a", "x", "d"])
    assert truth.target.tolist() == [2, 1, -1, 0, -1, -1]
    assert truth.n_pairs == 3


@given(st.integers(0, 10_000), st.integers(2, 30))
def test_accuracy_invariant_under_joint_relabeling(seed, n):
    rng = np.random.default_rng(seed)
    truth = GroundTruth(rng.permutation(n))
    found = rng.permutation(n)
    q = rng.permutation(n)  # relabel the nodes of B
    relabeled = GroundTruth(q[truth.target])
    assert matching_accuracy(q[found], relabeled) == matching_accuracy(found, truth)


def test_describe():
    s = describe([40.0, 60.0])
    assert s.mean == 50.0 and s.median == 50.0
    assert s.sd == pytest.approx(math.sqrt(200.0))
    assert s.format() == "50.00 ± 14.14 (50.00)"
    assert describe([7.0]).sd == 0.0
    empty = describe([None, math.nan], failures=2)
    assert empty.n == 0 and empty.failures == 2 and empty.format() == "n/a"
