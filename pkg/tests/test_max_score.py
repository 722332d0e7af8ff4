from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from assortmatch.entropic import synthetic_market
from assortmatch.errors import InsufficientTrades, ValidationError
from assortmatch.market_data import CoupleSample
from assortmatch.max_score import (
    InequalitySet,
    ScoreSpec,
    SwapInequality,
    available_pairs,
    fit_max_score,
    generate_inequalities,
    score,
)


def random_inequalities(rng, g=1000, o=3):
    return InequalitySet(*rng.normal(size=(4, g, o)))


def grid_best(D, offset, lo=-10, hi=10, n=201):
    axis = np.linspace(lo, hi, n)
    a, b = np.meshgrid(axis, axis, indexing="ij")
    T = np.stack([a.ravel(), b.ravel()], axis=1)
    return int(((D @ T.T + offset[:, None]) >= 0).sum(axis=0).max())


def test_two_trades_one_inequality():
    s = CoupleSample([[1.0], [2.0]], [[1.0], [3.0]], ("a",))
    ineq = generate_inequalities(s, 1, seed=0)
    assert len(ineq) == 1
    assert tuple(ineq.trades[0]) == (0, 1)


def test_enumeration_excludes_shared_individuals(rng):
    s = CoupleSample(
        rng.normal(size=(10, 2)),
        rng.normal(size=(10, 2)),
        ("a", "b"),
        male_id=np.array([0, 0, 1, 2, 3, 4, 5, 6, 7, 8]),
        female_id=np.array([0, 1, 2, 2, 3, 4, 5, 6, 7, 8]),
    )
    assert available_pairs(s) == comb(10, 2) - 2
    with pytest.raises(InsufficientTrades) as info:
        generate_inequalities(s, 45, seed=0)
    assert info.value.available == 43
    ineq = generate_inequalities(s, 43, seed=0)
    pairs = {tuple(t) for t in ineq.trades}
    assert (0, 1) not in pairs and (2, 3) not in pairs and len(pairs) == 43


def test_all_pairs_when_ids_distinct(rng):
    s = CoupleSample(rng.normal(size=(10, 2)), rng.normal(size=(10, 2)), ("a", "b"))
    ineq = generate_inequalities(s, 45, seed=1)
    assert {tuple(t) for t in ineq.trades} == {(i, j) for i in range(10) for j in range(i + 1, 10)}


def test_rejection_sampling_path(rng, monkeypatch):
    import assortmatch.max_score as ms

    monkeypatch.setattr(ms, "ENUMERATION_LIMIT", 10)
    s = CoupleSample(rng.normal(size=(50, 2)), rng.normal(size=(50, 2)), ("a", "b"))
    ineq = generate_inequalities(s, 200, seed=2)
    pairs = [tuple(t) for t in ineq.trades]
    assert len(set(pairs)) == 200 and all(i < j for i, j in pairs)


def test_swap_gap_matches_definition(rng):
    ineq = random_inequalities(rng, g=20)
    theta = rng.normal(size=(3, 3))
    np.testing.assert_allclose([s.z(theta) for s in ineq], ineq.z(theta), atol=1e-12)
    np.testing.assert_allclose(ineq.features() @ theta.ravel(), ineq.z(theta), atol=1e-12)


def test_swap_antisymmetry(rng):
    for s in random_inequalities(rng, g=30):
        theta = rng.normal(size=(3, 3))
        assert s.reversed().z(theta) == pytest.approx(-s.z(theta))


def test_score_ties_and_unit_case(rng):
    ineq = random_inequalities(rng, g=17)
    assert score(np.zeros((3, 3)), ineq) == 17
    one = SwapInequality(np.array([2.0]), np.array([2.0]), np.array([1.0]), np.array([1.0]))
    assert score(np.eye(1), [one]) == 1
    with pytest.raises(ValidationError):
        score(np.full((3, 3), np.nan), ineq)


def test_scale_invariance(rng):
    ineq = random_inequalities(rng)
    for _ in range(20):
        theta = rng.normal(size=(3, 3))
        c = float(np.exp(rng.uniform(-5, 5)))
        assert score(theta, ineq) == score(c * theta, ineq)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_diagonal_is_restriction_of_full(seed):
    rng = np.random.default_rng(seed)
    ineq = random_inequalities(rng, g=60)
    names = ("edu", "age", "inc")
    diag = ScoreSpec("diagonal", names)
    full = ScoreSpec("full_interaction", names)
    free = rng.uniform(-10, 10, size=2)
    theta = diag.theta(free)
    full_free = [theta[pos] for pos in full.free_positions()]
    D, off = diag.design(ineq)
    Df, offf = full.design(ineq)
    assert ((D @ free + off) >= 0).sum() == ((Df @ full_free + offf) >= 0).sum() == score(theta, ineq)


def test_spec_pins_and_validation():
    spec = ScoreSpec.with_pins("full_interaction", ("edu", "age"), {"edu": 1.0, "age*edu": 0.0})
    assert spec.fixed == {(0, 0): 1.0, (1, 0): 0.0}
    assert spec.free_positions() == [(0, 1), (1, 1)]
    assert spec.label((1, 0)) == "age*edu"
    with pytest.raises(ValidationError):
        ScoreSpec("other", ("a",))
    with pytest.raises(ValidationError):
        ScoreSpec("diagonal", ("a", "b"), {(0, 1): 1.0})
    with pytest.raises(ValidationError):
        ScoreSpec.with_pins("diagonal", ("a",), {"b": 1.0})
    with pytest.raises(ValidationError):
        ScoreSpec("diagonal", ("a",), domain=(1, 1))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_de_reaches_grid_best(seed):
    rng = np.random.default_rng(seed)
    ineq = random_inequalities(rng, g=50)
    spec = ScoreSpec("diagonal", ("a", "b", "c"))
    D, off = spec.design(ineq)
    fit = fit_max_score(ineq, spec, runs=3, population=60, iterations=100, seed=seed)
    assert fit.best_score >= grid_best(D, off)
    assert score(fit.best_theta, ineq) == fit.best_score


def test_pinned_everything(rng):
    ineq = random_inequalities(rng, g=40, o=2)
    spec = ScoreSpec("diagonal", ("a", "b"), {(0, 0): 1.0, (1, 1): -2.0})
    fit = fit_max_score(ineq, spec, runs=2, population=10, seed=0)
    assert fit.labels == ("a", "b")
    np.testing.assert_array_equal(fit.mean, [1.0, -2.0])
    assert fit.best_score == score(np.diag([1.0, -2.0]), ineq)
    assert all(row[4] for row in fit.rows())


def test_determinism(rng):
    ineq = random_inequalities(rng, g=80)
    spec = ScoreSpec("diagonal", ("a", "b", "c"))
    a = fit_max_score(ineq, spec, runs=3, population=20, iterations=20, seed=5)
    b = fit_max_score(ineq, spec, runs=3, population=20, iterations=20, seed=5)
    np.testing.assert_array_equal(a.run_thetas, b.run_thetas)
    np.testing.assert_array_equal(a.run_scores, b.run_scores)


def test_fit_validation(rng):
    ineq = random_inequalities(rng, g=5)
    spec = ScoreSpec("diagonal", ("a", "b", "c"))
    with pytest.raises(ValidationError):
        fit_max_score(ineq, spec, runs=0)
    with pytest.raises(ValidationError):
        fit_max_score(ineq, spec, population=2)
    with pytest.raises(ValidationError):
        fit_max_score(random_inequalities(rng, g=5, o=2), spec)


def test_sign_recovery():
    mk = synthetic_market(np.diag([1.0, 3.0, 1.5]), 2000, seed=3, names=("education", "age", "income"))
    ineq = generate_inequalities(mk.sample, 2000, seed=3)
    spec = ScoreSpec("diagonal", mk.sample.names)
    fit = fit_max_score(ineq, spec, runs=20, population=60, iterations=60, seed=3)
    assert np.mean(fit.run_thetas[:, 1] > 0) >= 0.95
    assert fit.mean[0] == 1.0 and fit.lower[0] == 1.0 and fit.upper[0] == 1.0
