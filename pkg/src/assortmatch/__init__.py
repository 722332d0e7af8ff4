"""Estimators for sorting in two-sided marriage markets."""
from ._backend import BACKEND
from .affinity import AffinityEstimate, bootstrap_errors, estimate_affinity, estimate_with_errors
from .choo_siow import ContingencyTable, SurplusSurface, surplus_surface, systematic_surplus, tabulate
from .entropic import EquilibriumMatching, social_gain, solve_equilibrium, surplus_shares, synthetic_market
from .errors import AssortMatchError, NumericalError, ValidationError
from .market_data import AttributeSchema, CoupleSample, load_couples, standardize
from .max_score import InequalitySet, ScoreSpec, fit_max_score, generate_inequalities, score
from .policy import HouseholdParams, PreferenceMixture, mixture_effects
from .spectral import normalize_series, rank_test, saliency

__version__ = "0.1.0"

__all__ = [
    "AffinityEstimate",
    "AssortMatchError",
    "AttributeSchema",
    "BACKEND",
    "bootstrap_errors",
    "ContingencyTable",
    "CoupleSample",
    "EquilibriumMatching",
    "estimate_affinity",
    "estimate_with_errors",
    "fit_max_score",
    "generate_inequalities",
    "HouseholdParams",
    "InequalitySet",
    "load_couples",
    "mixture_effects",
    "normalize_series",
    "NumericalError",
    "PreferenceMixture",
    "rank_test",
    "saliency",
    "score",
    "ScoreSpec",
    "social_gain",
    "solve_equilibrium",
    "standardize",
    "surplus_shares",
    "surplus_surface",
    "SurplusSurface",
    "synthetic_market",
    "systematic_surplus",
    "tabulate",
    "ValidationError",
]
