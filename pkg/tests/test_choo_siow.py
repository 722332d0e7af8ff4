import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from assortmatch.choo_siow import ContingencyTable, surplus_surface, systematic_surplus, tabulate
from assortmatch.errors import DimensionMismatch, EmptyBinSpec, ValidationError
from assortmatch.market_data import CoupleSample


def table(mu, m0, f0):
    return ContingencyTable(np.atleast_2d(mu), np.atleast_1d(m0), np.atleast_1d(f0))


def test_hand_cases():
    assert systematic_surplus(table(1.0, 1.0, 1.0))[0, 0] == 0.0
    assert abs(systematic_surplus(table(4.0, 2.0, 2.0))[0, 0] - np.log(4)) <= 1e-12
    assert abs(systematic_surplus(table(0.0, 1.0, 1.0))[0, 0] - 2 * np.log(1e-8)) <= 1e-12
    assert systematic_surplus(table(0.0, 1.0, 1.0))[0, 0] == pytest.approx(-36.841, abs=1e-3)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 100))
def test_uniform_scaling(seed, c):
    rng = np.random.default_rng(seed)
    t = ContingencyTable(rng.uniform(1, 100, (3, 4)), rng.uniform(1, 100, 3), rng.uniform(1, 100, 4))
    assert np.max(np.abs(systematic_surplus(t.scaled(c)) - systematic_surplus(t))) <= 1e-12


def test_monotonicity(rng):
    t = ContingencyTable(rng.uniform(1, 10, (2, 2)), rng.uniform(1, 10, 2), rng.uniform(1, 10, 2))
    base = systematic_surplus(t)
    up = systematic_surplus(ContingencyTable(t.mu + np.eye(2), t.mu_m0, t.mu_0f))
    assert up[0, 0] > base[0, 0]
    more_single = systematic_surplus(ContingencyTable(t.mu, t.mu_m0 + [1, 0], t.mu_0f))
    assert more_single[0, 0] < base[0, 0]
    more_single = systematic_surplus(ContingencyTable(t.mu, t.mu_m0, t.mu_0f + [1, 0]))
    assert more_single[0, 0] < base[0, 0]


def test_transpose(rng):
    t = ContingencyTable(rng.uniform(0, 10, (2, 3)), rng.uniform(0, 10, 2), rng.uniform(0, 10, 3))
    np.testing.assert_allclose(systematic_surplus(t.transpose()), systematic_surplus(t).T)


def test_floor_mask():
    surf = surplus_surface(table([[0.0, 3.0]], [2.0], [1.0, 0.0]))
    np.testing.assert_array_equal(surf.is_floored, [[True, True]])
    surf = surplus_surface(table([[1.0, 3.0]], [2.0], [1.0, 1.0]))
    assert not surf.is_floored.any()


def test_invalid_tables():
    with pytest.raises(DimensionMismatch):
        table([[1.0, 2.0]], [1.0], [1.0])
    with pytest.raises(ValidationError):
        table([[-1.0]], [1.0], [1.0])
    with pytest.raises(ValidationError):
        systematic_surplus(table(1.0, 1.0, 1.0), floor=0)


def test_tabulate_simple():
    s = CoupleSample(np.full((4, 1), 0.5), np.full((4, 1), 0.5), ("a",))
    t = tabulate(s, [0.2, 0.3], [0.1, 0.9], "a", [0, 1, 2])
    np.testing.assert_array_equal(t.mu, [[4, 0], [0, 0]])
    np.testing.assert_array_equal(t.mu_m0, [2, 0])
    np.testing.assert_array_equal(t.mu_0f, [2, 0])
    t = tabulate(s, None, None, "a", [0, 1, 2])
    np.testing.assert_array_equal(t.mu_m0, [0, 0])


def test_tabulate_age_bands(rng):
    s = CoupleSample(rng.uniform(20, 50, (100, 1)), rng.uniform(20, 50, (100, 1)), ("age",))
    t = tabulate(s, None, None, "age", np.arange(20, 51, 5))
    assert t.mu.sum() == 100
    assert t.row_labels[0] == "[20, 25)"
    with pytest.raises(EmptyBinSpec):
        tabulate(s, None, None, "age", [20])
    with pytest.raises(ValidationError):
        tabulate(s, None, None, "age", [30, 50])
