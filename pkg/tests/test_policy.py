from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from assortmatch.errors import InfeasibleLabor, ValidationError
from assortmatch.policy import (
    HouseholdParams,
    PreferenceMixture,
    budget_residual,
    childcare_effects,
    consumption,
    fertility,
    labor_supply,
    mixture_effects,
    preference_weight,
    wage_effects,
)

BASE = HouseholdParams(delta=1.0, w_m=1.0, w_f=1.0, psi=1.0, phi=0.5)


def random_feasible(rng):
    while True:
        p = HouseholdParams(
            delta=rng.uniform(0, 3),
            w_m=rng.uniform(0.2, 3),
            w_f=rng.uniform(0.2, 3),
            psi=rng.uniform(0.2, 3),
            phi=rng.uniform(0.01, 1),
            s=rng.uniform(0, 0.9),
        )
        lf = 1 - (1 - p.s) * p.phi * float(preference_weight(p.delta)) * (p.w_m + p.w_f) / p.effective_price
        if 0.01 < lf < 0.99:
            return p


def test_worked_example():
    assert fertility(BASE) == pytest.approx(2 / 3)
    assert labor_supply(BASE) == pytest.approx(2 / 3)
    assert consumption(BASE) == pytest.approx(1.0)
    dn, dl = childcare_effects(BASE)
    assert dn == pytest.approx(2 / 9)
    assert dl == pytest.approx(2 / 9)
    assert wage_effects(BASE)[0] == pytest.approx(1 / 9)


def test_no_taste_for_children():
    p = BASE.with_delta(0.0)
    assert fertility(p) == 0
    assert labor_supply(p) == 1
    assert consumption(p) == 2
    assert childcare_effects(p) == (0.0, 0.0)


def test_full_provision_limit():
    p = HouseholdParams(1.0, 1.0, 1.0, 1.0, 0.5, s=1 - 1e-12)
    assert fertility(p) == pytest.approx(0.5 * 2 / 1.0, rel=1e-9)


def test_wage_knife_edge():
    p = HouseholdParams(1.0, 1.0, 1.0, psi=0.25, phi=0.5, s=0.5)
    dn, dl = wage_effects(p)
    assert dn == 0 and dl == 0


def test_derivatives_finite_differences():
    rng = np.random.default_rng(0)
    h = 1e-6
    for _ in range(1000):
        p = random_feasible(rng)
        dn_ds, dl_ds = childcare_effects(p)
        dn_dw, dl_dw = wage_effects(p)
        up, dn = replace(p, s=p.s + h), replace(p, s=p.s - h)
        fd_n = (fertility(up) - fertility(dn)) / (2 * h)
        fd_l = (labor_supply(up) - labor_supply(dn)) / (2 * h)
        wu, wd = replace(p, w_f=p.w_f + h), replace(p, w_f=p.w_f - h)
        fdw_n = (fertility(wu) - fertility(wd)) / (2 * h)
        fdw_l = (labor_supply(wu) - labor_supply(wd)) / (2 * h)
        for analytic, fd in ((dn_ds, fd_n), (dl_ds, fd_l), (dn_dw, fdw_n), (dl_dw, fdw_l)):
            assert abs(analytic - fd) <= 1e-6 * max(abs(analytic), 1e-3)
        if dn_dw != 0:
            assert np.sign(dn_dw) == -np.sign(dl_dw)


def test_budget_identity():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        p = random_feasible(rng)
        assert abs(budget_residual(p)) <= 1e-12
        assert fertility(p) >= 0 and 0 <= labor_supply(p) <= 1


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 100))
def test_money_homogeneity(c):
    p = HouseholdParams(1.3, 1.1 * c, 0.9 * c, 0.7 * c, 0.3, 0.2)
    assert fertility(p) == pytest.approx(fertility(HouseholdParams(1.3, 1.1, 0.9, 0.7, 0.3, 0.2)), rel=1e-12)


def test_infeasible_labor_raises():
    p = HouseholdParams(delta=10.0, w_m=10.0, w_f=1.0, psi=0.01, phi=1.0)
    with pytest.raises(InfeasibleLabor):
        labor_supply(p)


def test_param_validation():
    with pytest.raises(ValidationError):
        HouseholdParams(-1.0, 1, 1, 1, 1)
    with pytest.raises(ValidationError):
        HouseholdParams(1.0, 1, 1, 1, 1, s=1.0)
    with pytest.raises(ValidationError):
        PreferenceMixture((1.0, 1.0), (0.5, 0.5))
    with pytest.raises(ValidationError):
        PreferenceMixture((1.0, 2.0), (0.5, 0.6))


def test_worked_mixture():
    mix = PreferenceMixture.two_type(0.0, 2.0, 0.5)
    eff = mixture_effects(mix, BASE)
    assert eff.heterogeneous_weight == pytest.approx(1 / 3)
    assert eff.homogeneous_weight == pytest.approx(0.5)
    assert abs(eff.dn_ds_ratio - 1.5) <= 1e-12
    assert abs(eff.dlf_ds_ratio - 1.5) <= 1e-12
    assert eff.dn_ds_homogeneous == pytest.approx(childcare_effects(BASE)[0])


def test_mixture_limit():
    mix = PreferenceMixture.two_type(2.0 - 1e-9, 2.0, 0.5)
    assert abs(mixture_effects(mix, BASE).dn_ds_ratio - 1) <= 1e-6


def test_bias_ratio_exceeds_one():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        base = random_feasible(rng)
        lo = rng.uniform(0, 2)
        hi = lo + rng.uniform(0.01, 2)
        mix = PreferenceMixture.two_type(lo, hi, rng.uniform(0.01, 0.99))
        try:
            eff = mixture_effects(mix, base)
        except InfeasibleLabor:
            continue
        assert eff.dn_ds_ratio > 1
        g = preference_weight
        assert mix.probs[0] * g(lo) + mix.probs[1] * g(hi) < g(mix.mean_delta)


def test_k_type_mixture():
    mix = PreferenceMixture((0.5, 1.0, 3.0), (0.2, 0.5, 0.3))
    eff = mixture_effects(mix, BASE)
    het = sum(p * d / (1 + d) for d, p in zip(mix.deltas, mix.probs))
    assert eff.heterogeneous_weight == pytest.approx(het)
    assert eff.dn_ds_ratio > 1
