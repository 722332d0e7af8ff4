"""Static fertility and female labor supply model with childcare provision.

A unitary household maximizes ``log c + delta log n`` subject to
``c + psi n = w_m + w_f (1 - (1 - s) phi n)``. All results are closed form.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import InfeasibleLabor, ValidationError


def preference_weight(delta):
    """``delta / (1 + delta)``, the budget share spent on children."""
    delta = np.asarray(delta, dtype=np.float64)
    return delta / (1.0 + delta)


@dataclass(frozen=True)
class HouseholdParams:
    delta: float
    w_m: float
    w_f: float
    psi: float
    phi: float
    s: float = 0.0

    def __post_init__(self):
        if not self.delta >= 0:
            raise ValidationError(f"delta must be nonnegative, got {self.delta}")
        for name in ("w_m", "w_f", "psi", "phi"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0 <= self.s < 1:
            raise ValidationError(f"childcare provision s must lie in [0, 1), got {self.s}")

    def with_delta(self, delta) -> "HouseholdParams":
        return replace(self, delta=float(delta))

    @property
    def effective_price(self) -> float:
        """Full price of a child: ``psi + (1 - s) w_f phi``."""
        return self.psi + (1.0 - self.s) * self.w_f * self.phi


def _fertility(p: HouseholdParams) -> float:
    return float(preference_weight(p.delta)) * (p.w_m + p.w_f) / p.effective_price


def _checked(p: HouseholdParams):
    n = _fertility(p)
    lf = 1.0 - (1.0 - p.s) * n * p.phi
    if lf < 0.0 or lf > 1.0:
        raise InfeasibleLabor(lf)
    return n, lf


def fertility(p: HouseholdParams) -> float:
    return _checked(p)[0]


def labor_supply(p: HouseholdParams) -> float:
    return _checked(p)[1]


def consumption(p: HouseholdParams) -> float:
    n, lf = _checked(p)
    return p.w_m + p.w_f * lf - p.psi * n


def budget_residual(p: HouseholdParams) -> float:
    """``c + psi n - w_m - w_f (1 - (1 - s) phi n)``; zero at the optimum."""
    n, _ = _checked(p)
    c = consumption(p)
    return c + p.psi * n - (p.w_m + p.w_f * (1.0 - (1.0 - p.s) * p.phi * n))


def childcare_effects(p: HouseholdParams) -> tuple[float, float]:
    """``(dn/ds, dl_f/ds)``."""
    _checked(p)
    base = float(preference_weight(p.delta)) * (p.w_m + p.w_f) * p.phi / p.effective_price**2
    return base * p.w_f, base * p.psi


def wage_effects(p: HouseholdParams) -> tuple[float, float]:
    """``(dn/dw_f, dl_f/dw_f)``."""
    _checked(p)
    factor = p.psi - (1.0 - p.s) * p.w_m * p.phi
    dn = float(preference_weight(p.delta)) * factor / p.effective_price**2
    return dn, -(1.0 - p.s) * p.phi * dn


@dataclass(frozen=True)
class PreferenceMixture:
    """Population shares of couples by child-preference type.

    The two-type case ``PreferenceMixture.two_type(delta_L, delta_H, p_H)``
    is the low/high split; any number of types is accepted.
    """

    deltas: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        d = tuple(float(x) for x in self.deltas)
        pr = tuple(float(x) for x in self.probs)
        if len(d) != len(pr) or len(d) < 2:
            raise ValidationError("a mixture needs at least two types with one probability each")
        if any(x < 0 for x in d):
            raise ValidationError("preference weights must be nonnegative")
        if any(not 0 < x < 1 for x in pr) or abs(sum(pr) - 1.0) > 1e-12:
            raise ValidationError("type probabilities must lie in (0, 1) and sum to one")
        if len(set(d)) < 2:
            raise ValidationError("a mixture needs at least two distinct preference levels")
        object.__setattr__(self, "deltas", d)
        object.__setattr__(self, "probs", pr)

    @classmethod
    def two_type(cls, delta_L: float, delta_H: float, p_H: float) -> "PreferenceMixture":
        if not 0 <= delta_L < delta_H:
            raise ValidationError("need 0 <= delta_L < delta_H")
        return cls((delta_L, delta_H), (1.0 - p_H, p_H))

    @property
    def mean_delta(self) -> float:
        return float(np.dot(self.probs, self.deltas))

    @property
    def heterogeneous_weight(self) -> float:
        return float(np.dot(self.probs, preference_weight(np.array(self.deltas))))

    @property
    def homogeneous_weight(self) -> float:
        return float(preference_weight(self.mean_delta))


@dataclass(frozen=True)
class MixtureEffects:
    """Policy responses with and without preference heterogeneity.

    Ratios are homogeneous over heterogeneous and exceed one whenever types differ.
    """

    dn_ds_heterogeneous: float
    dn_ds_homogeneous: float
    dn_ds_ratio: float
    dlf_ds_heterogeneous: float
    dlf_ds_homogeneous: float
    dlf_ds_ratio: float
    dn_dwf_heterogeneous: float
    dn_dwf_homogeneous: float
    heterogeneous_weight: float
    homogeneous_weight: float


def mixture_effects(mix: PreferenceMixture, base: HouseholdParams) -> MixtureEffects:
    """Childcare effects under the mixture versus a single household at the mean preference.

    ``base.delta`` is ignored. Every type, and the mean type, must be feasible.
    """
    for d in (*mix.deltas, mix.mean_delta):
        _checked(base.with_delta(d))
    het = mix.heterogeneous_weight
    hom = mix.homogeneous_weight
    if het == 0.0:
        raise ValidationError("the heterogeneous response is zero; the ratio is undefined")
    # effects are linear in delta/(1+delta): evaluate at a unit weight and rescale
    unit_n, unit_lf = _unit_childcare(base)
    unit_w = _unit_wage(base)
    return MixtureEffects(
        dn_ds_heterogeneous=het * unit_n,
        dn_ds_homogeneous=hom * unit_n,
        dn_ds_ratio=hom / het,
        dlf_ds_heterogeneous=het * unit_lf,
        dlf_ds_homogeneous=hom * unit_lf,
        dlf_ds_ratio=hom / het,
        dn_dwf_heterogeneous=het * unit_w,
        dn_dwf_homogeneous=hom * unit_w,
        heterogeneous_weight=het,
        homogeneous_weight=hom,
    )


def _unit_childcare(p: HouseholdParams):
    base = (p.w_m + p.w_f) * p.phi / p.effective_price**2
    return base * p.w_f, base * p.psi


def _unit_wage(p: HouseholdParams):
    return (p.psi - (1.0 - p.s) * p.w_m * p.phi) / p.effective_price**2


def effects_grid(base: HouseholdParams, mixtures: Sequence[PreferenceMixture]) -> list[MixtureEffects]:
    return [mixture_effects(m, base) for m in mixtures]
