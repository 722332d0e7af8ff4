"""Entropic-OT matching equilibrium with a bilinear surplus."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import DimensionMismatch, NonConvergence, NumericalOverflow, ValidationError
from .market_data import CoupleSample

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10_000


@dataclass(frozen=True)
class EquilibriumMatching:
    """Solved matching: ``sigma * log(pi) = Phi - a[:, None] - b[None, :]``."""

    pi: np.ndarray
    a: np.ndarray
    b: np.ndarray
    sigma: float
    iterations: int
    marginal_error: float


@dataclass(frozen=True)
class SurplusShares:
    U: np.ndarray
    V: np.ndarray


def surplus_matrix(A, X, Y) -> np.ndarray:
    """Phi[i, j] = X[i] @ A @ Y[j]."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if A.shape != (X.shape[1], Y.shape[1]):
        raise DimensionMismatch(
            f"affinity matrix {A.shape} does not conform with {X.shape[1]} male and {Y.shape[1]} female attributes"
        )
    return X @ A @ Y.T


def _check_marginal(m, size, label):
    if m is None:
        return np.full(size, 1.0 / size)
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (size,):
        raise DimensionMismatch(f"{label} marginal has shape {m.shape}, expected ({size},)")
    if np.any(m <= 0) or not np.all(np.isfinite(m)):
        raise ValidationError(f"{label} marginal must be strictly positive")
    if abs(m.sum() - 1.0) > 1e-9:
        raise ValidationError(f"{label} marginal sums to {m.sum()}, not 1")
    return m


def solve_scaled(S, p, q, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, v0=None):
    """Log-domain proportional fitting on the kernel ``exp(S)``.

    Finds ``u, v`` with ``exp(S - u[:, None] - v[None, :])`` having row sums
    ``p`` and column sums ``q``; ``u`` is pinned by ``p @ u = 0``. Returns
    ``(u, v, iterations, row_error)``. Column sums are exact after every
    sweep, so only the row error is tracked.
    """
    if not np.all(np.isfinite(S)):
        raise NumericalOverflow("surplus over sigma has non-finite entries")
    log_p = np.log(p)
    log_q = np.log(q)
    v = np.zeros(S.shape[1]) if v0 is None else np.array(v0, dtype=np.float64)
    L = _backend.lse_rows(S, v)
    u = L - log_p
    err = np.inf
    it = 0
    while it < max_iter:
        it += 1
        u = L - log_p
        v = _backend.lse_cols(S, u) - log_q
        L = _backend.lse_rows(S, v)
        err = float(np.max(np.abs(np.exp(L - u) - p)))
        if err <= tol:
            break
    if not np.isfinite(err):
        raise NumericalOverflow("potentials left the representable range")
    shift = p @ u
    return u - shift, v + shift, it, err


def solve_equilibrium(
    A,
    sigma,
    X,
    Y,
    p=None,
    q=None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    v0=None,
) -> EquilibriumMatching:
    """Equilibrium matching density for surplus ``x' A y`` and scale ``sigma``.

    ``p`` and ``q`` default to uniform weights over the rows of ``X`` and
    ``Y``. Raises :class:`NonConvergence` when the marginal error is still
    above ``tol`` after ``max_iter`` sweeps.
    """
    if not sigma > 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    if not tol > 0:
        raise ValidationError(f"tol must be positive, got {tol}")
    Phi = surplus_matrix(A, X, Y)
    p = _check_marginal(p, Phi.shape[0], "male")
    q = _check_marginal(q, Phi.shape[1], "female")
    S = Phi / sigma
    u, v, it, _ = solve_scaled(S, p, q, tol, max_iter, None if v0 is None else np.asarray(v0) / sigma)
    a, b = sigma * u, sigma * v
    pi = np.exp((Phi - a[:, None] - b[None, :]) / sigma)
    err = float(max(np.max(np.abs(pi.sum(axis=1) - p)), np.max(np.abs(pi.sum(axis=0) - q))))
    if err > tol:
        raise NonConvergence(it, err)
    return EquilibriumMatching(pi, a, b, float(sigma), it, err)


def social_gain(matching: EquilibriumMatching, Phi) -> float:
    """Regularized surplus ``sum(pi * Phi) - sigma * sum(pi * log(pi))``."""
    pi = matching.pi
    return float(np.sum(pi * Phi) - matching.sigma * np.sum(pi * np.log(pi)))


def surplus_shares(matching: EquilibriumMatching, Phi) -> SurplusShares:
    a = matching.a[:, None]
    b = matching.b[None, :]
    U = (Phi + a - b) / 2.0
    return SurplusShares(U, Phi - U)


def sample_couples(matching: EquilibriumMatching, X, Y, n: int, seed=None, names=None) -> CoupleSample:
    """Draw ``n`` couples i.i.d. from the matching density."""
    if n < 1:
        raise ValidationError(f"n must be at least 1, got {n}")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if n < 2:
        raise ValidationError("a couple sample needs at least two draws")
    i, j = draw_cells(matching, n, seed)
    return CoupleSample(X[i], Y[j], names)


def draw_cells(matching: EquilibriumMatching, n: int, seed=None):
    """Row and column indices of ``n`` i.i.d. draws from the matching density."""
    rng = np.random.default_rng(seed)
    flat = matching.pi.ravel()
    cells = rng.choice(flat.size, size=n, p=flat / flat.sum())
    return np.divmod(cells, matching.pi.shape[1])


def draw_types(n_types: int, n_attributes: int, rng) -> np.ndarray:
    """Standard-normal type grid, centered and scaled to unit variance per column."""
    T = rng.standard_normal((n_types, n_attributes))
    return (T - T.mean(axis=0)) / T.std(axis=0)


@dataclass(frozen=True)
class SyntheticMarket:
    A: np.ndarray
    sigma: float
    X_types: np.ndarray
    Y_types: np.ndarray
    matching: EquilibriumMatching
    sample: CoupleSample


def synthetic_market(A, n: int, sigma: float = 1.0, n_types: int = 200, seed=None, names=None) -> SyntheticMarket:
    """Known-truth market: random type grids, equilibrium at ``A``, and ``n`` sampled couples.

    Male and female types are independent standard-normal draws, exactly
    standardized over the grid, with uniform masses.
    """
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    o = A.shape[0]
    if A.shape != (o, o):
        raise DimensionMismatch("truth affinity matrix must be square")
    ss = np.random.SeedSequence(seed)
    rx, ry, rs = (np.random.default_rng(s) for s in ss.spawn(3))
    Xt = draw_types(n_types, o, rx)
    Yt = draw_types(n_types, o, ry)
    matching = solve_equilibrium(A, sigma, Xt, Yt)
    sample = sample_couples(matching, Xt, Yt, n, rs, names=names)
    return SyntheticMarket(A, float(sigma), Xt, Yt, matching, sample)
