from collections import Counter

import numpy as np
import pytest
from hypothesis import given, strategies as st

from constructive.errors import PipelineError
from constructive.lingfeat import SCALAR_NAMES
from constructive.model import (
    FeatureTable,
    FixedPipeline,
    GroupParams,
    Split,
    Standardizer,
    auc,
    evaluate_group,
    grid_search,
    logistic_gradient,
    logistic_objective,
    permutation_test,
    puzzle_aware_splits,
    train_logreg,
    weight_grid,
)

from oracles import brute_auc, finite_difference, rel_err


def test_auc_examples():
    assert auc([0.9, 0.8, 0.3], [1, 1, 0]) == 1.0
    assert auc([0.5, 0.5], [1, 0]) == 0.5
    assert auc([0.2, 0.7, 0.6, 0.4], [0, 1, 0, 1]) == 0.75
    with pytest.raises(PipelineError):
        auc([0.1, 0.2], [1, 1])


@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 1)), min_size=2, max_size=50)
       .filter(lambda v: len({y for _, y in v}) == 2))
def test_auc_matches_pairwise(pairs):
    s = [float(a) for a, _ in pairs]
    y = [b for _, b in pairs]
    assert auc(s, y) == pytest.approx(brute_auc(s, y), abs=1e-9)
    assert auc(s, y) + auc(s, [1 - v for v in y]) == 1.0


def test_standardizer():
    std = Standardizer.fit(np.array([[1.0, 5.0, np.nan], [3.0, 5.0, 2.0]]))
    assert std.mean.tolist() == [2.0, 5.0, 2.0]
    assert std.sd[0] == 1.0
    out = std.apply(np.array([[1.0, 5.0, np.nan], [3.0, 5.0, 2.0]]))
    assert out.tolist() == [[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 4))
    y = (rng.random(30) < 0.5).astype(float)
    for _ in range(10):
        params = rng.normal(size=5)
        for C in (0.1, 10.0):
            num = finite_difference(lambda p: logistic_objective(np.array(p), X, y, C), list(params))
            assert rel_err(logistic_gradient(params, X, y, C), num) < 1e-5


def test_separable_toy():
    rng = np.random.default_rng(1)
    X = np.vstack([rng.normal(-2, 0.5, size=(8, 2)), rng.normal(2, 0.5, size=(8, 2))])
    y = np.array([0] * 8 + [1] * 8)
    m = train_logreg(X, y, C=100.0)
    assert auc(m.decision(X), y) >= 0.99
    assert all(b <= a + 1e-12 for a, b in zip(m.loss_trace, m.loss_trace[1:]))
    with pytest.raises(PipelineError):
        train_logreg(X, np.zeros(16), 1.0)


def test_training_converges():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(100, 3))
    y = (X[:, 0] + rng.normal(size=100) > 0).astype(int)
    m = train_logreg(X, y, C=1.0)
    assert m.converged and m.iterations < 1000
    params = np.append(m.weights, m.bias)
    assert np.abs(logistic_gradient(params, X, y, 1.0)).max() < 1e-6


def test_splits_properties():
    pids = [f"p{i % 7}" for i in range(70)]
    y = [i % 2 for i in range(70)]
    splits = puzzle_aware_splits(pids, y, 20, 0.8, seed=3)
    for sp in splits:
        tr = {pids[i] for i in sp.train}
        va = {pids[i] for i in sp.validation}
        assert not tr & va
        assert len(sp.train) + len(sp.validation) == 70
    again = puzzle_aware_splits(pids, y, 20, 0.8, seed=3)
    assert all(a.train.tobytes() == b.train.tobytes() and a.validation.tobytes() == b.validation.tobytes()
               for a, b in zip(splits, again))


def test_two_puzzles_forced_partition():
    pids = ["a"] * 4 + ["b"] * 4
    y = [0, 1] * 4
    for sp in puzzle_aware_splits(pids, y, 5, 0.8, seed=0):
        assert {pids[i] for i in sp.train} != {pids[i] for i in sp.validation}
        assert len(sp.train) == len(sp.validation) == 4


def test_unsplittable():
    with pytest.raises(PipelineError):
        puzzle_aware_splits(["a"] * 4, [0, 1, 0, 1], 1)
    with pytest.raises(PipelineError):
        puzzle_aware_splits(["a", "a", "b", "b"], [0, 0, 1, 1], 1, max_redraws=5)


def test_weight_grid():
    grid = weight_grid(4, 0.1)
    assert len(grid) == 286
    assert grid[0] == (0.3, 0.3, 0.2, 0.2)
    assert all(abs(sum(w) - 1) < 1e-9 for w in grid)


def random_table(n, rng, n_puzzles=10, signal=None):
    scalars = rng.normal(size=(n, len(SCALAR_NAMES)))
    if signal is not None:
        scalars[:, 0] = signal + 0.05 * rng.normal(size=n)
    pos = [Counter({("N",): int(rng.integers(1, 5)), ("V",): int(rng.integers(1, 5))}) for _ in range(n)]
    return FeatureTable([f"g{i}" for i in range(n)], [f"p{i % n_puzzles}" for i in range(n)], scalars, pos)


def null_cv_auc(seed, n=200):
    rng = np.random.default_rng(seed)
    table = random_table(n, rng)
    y = rng.integers(0, 2, size=n)
    splits = puzzle_aware_splits(table.puzzle_ids, y, 20, 0.8, seed)
    return evaluate_group(table, "baseline", GroupParams(1.0), y, splits).mean_auc


def test_null_cv_auc_near_half():
    assert abs(null_cv_auc(0) - 0.5) <= 0.1
    aucs = [null_cv_auc(s) for s in range(50)]
    assert abs(np.mean(aucs) - 0.5) <= 0.1


def test_grid_single_candidate_verbatim():
    rng = np.random.default_rng(4)
    table = random_table(80, rng, 8)
    y = rng.integers(0, 2, size=80)
    splits = puzzle_aware_splits(table.puzzle_ids, y, 3, 0.8, 0)
    res = grid_search(table, y, splits, {"C": [0.5], "n": [1], "min_df": [2], "weights": [(0.25, 0.25, 0.25, 0.25)]})
    assert res.groups["baseline"].params == GroupParams(0.5)
    assert res.groups["pos"].params == GroupParams(0.5, 1, 2)
    assert res.weights == (0.25, 0.25, 0.25, 0.25)


def test_grid_dominant_group_gets_weight():
    rng = np.random.default_rng(5)
    y = rng.integers(0, 2, size=120)
    table = random_table(120, rng, 12, signal=y.astype(float))
    splits = puzzle_aware_splits(table.puzzle_ids, y, 5, 0.8, 0)
    res = grid_search(table, y, splits, {"C": [1.0], "n": [1], "min_df": [2]})
    w = dict(zip(res.group_order, res.weights))
    assert w["baseline"] >= max(w.values())
    assert res.ensemble_mean_auc > 0.95


def test_permutation_bounds():
    rng = np.random.default_rng(6)
    y = np.array([0, 1] * 20)
    table = random_table(40, rng, 5, signal=y.astype(float))
    pipe = FixedPipeline(table, {"baseline": GroupParams(1.0)}, None, n_iter=3)
    p, obs, null = permutation_test(pipe, y, n_perm=19, seed=1)
    assert obs > 0.99 and p == pytest.approx(1 / 20)
    p_hi, _, _ = permutation_test(pipe, y, n_perm=19, seed=1, observed=-1.0)
    assert p_hi == 1.0
    # parallel evaluation gives the same null distribution
    _, _, null2 = permutation_test(pipe, y, n_perm=19, seed=1, jobs=2)
    assert np.array_equal(null, null2)
