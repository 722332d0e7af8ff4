"""Saliency (SVD) analysis, rank tests and cross-period normalization of affinity matrices."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .affinity import AffinityEstimate, estimate_with_errors
from .errors import ValidationError, ZeroMatrix
from .market_data import CoupleSample

RANK_ZERO_THRESHOLD = 1e-3


@dataclass(frozen=True)
class SaliencyDecomposition:
    """``A = U_load.T @ diag(lambdas) @ V_load``; rows of the loadings are indices."""

    U_load: np.ndarray
    V_load: np.ndarray
    lambdas: np.ndarray
    shares: np.ndarray

    def indices(self, x, y):
        """Male and female index values ``U_load @ x`` and ``V_load @ y``."""
        return self.U_load @ np.asarray(x), self.V_load @ np.asarray(y)

    def reconstruct(self):
        return self.U_load.T @ np.diag(self.lambdas) @ self.V_load


def saliency(A, convention: str = "positive") -> SaliencyDecomposition:
    """Singular value decomposition of an affinity matrix with pinned loading signs.

    Each (male, female) loading pair is flipped so its largest-magnitude male
    loading is positive, or negative with ``convention="table6"``.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or not np.all(np.isfinite(A)):
        raise ValidationError("affinity matrix must be a finite 2-D array")
    if convention not in ("positive", "table6"):
        raise ValidationError(f"unknown sign convention {convention!r}")
    W, lam, Zt = np.linalg.svd(A)
    U_load = W.T.copy()
    V_load = Zt.copy()
    want = 1.0 if convention == "positive" else -1.0  # table6: leading male loading negative
    for k in range(lam.size):
        lead = U_load[k, np.argmax(np.abs(U_load[k]))]
        if np.sign(lead) != want:
            U_load[k] *= -1.0
            V_load[k] *= -1.0
    total = lam.sum()
    shares = lam / total if total > 0 else np.zeros_like(lam)
    return SaliencyDecomposition(U_load, V_load, lam, shares)


@dataclass(frozen=True)
class RankTestResult:
    k: int
    method: str
    reject: bool
    level: float
    statistic: float
    critical: float
    pvalue: float
    df: int
    lambda_draws: np.ndarray
    estimate: AffinityEstimate


def trailing_block_statistic(B, cov, k):
    """Wald statistic for ``rank(B) = k`` on the block outside the leading ``k`` singular pairs.

    ``cov`` is the covariance of ``B.ravel()``. Returns ``(statistic, df)``.
    """
    B = np.asarray(B, dtype=np.float64)
    W, _, Zt = np.linalg.svd(B)
    Up = W[:, k:]
    Vp = Zt[k:, :].T
    T = Up.T @ B @ Vp
    K = np.kron(Up.T, Vp.T)
    omega = K @ cov @ K.T
    t = T.ravel()
    stat = float(t @ np.linalg.pinv(omega, hermitian=True) @ t)
    return stat, t.size


def rank_test(
    sample: CoupleSample,
    k: int,
    reps: int = 200,
    level: float = 0.05,
    seed=None,
    method: str = "wald",
    threshold: float = RANK_ZERO_THRESHOLD,
    n_jobs: int = 1,
    **estimate_kwargs,
) -> RankTestResult:
    """Test ``rank(A) = k`` against a larger rank using the couple bootstrap.

    ``method="wald"`` compares the trailing-block Wald statistic (bootstrap
    covariance) with its chi-square critical value. ``method="percentile"``
    rejects when the ``level`` quantile of the bootstrapped ``(k+1)``-th
    singular value exceeds ``threshold``. Both return the bootstrap
    distribution of that singular value.
    """
    O = sample.n_attributes
    if not 0 <= k < O:
        raise ValidationError(f"hypothesized rank must lie in [0, {O - 1}], got {k}")
    if not 0 < level < 1:
        raise ValidationError("level must lie in (0, 1)")
    if method not in ("wald", "percentile"):
        raise ValidationError(f"unknown rank test method {method!r}")
    est = estimate_with_errors(sample, reps=reps, seed=seed, n_jobs=n_jobs, **estimate_kwargs)
    draws = est.bootstrap_draws
    lam_draws = np.array([np.linalg.svd(d, compute_uv=False)[k] for d in draws])
    if method == "wald":
        cov = np.cov(draws.reshape(draws.shape[0], -1), rowvar=False)
        stat, df = trailing_block_statistic(est.B, cov, k)
        critical = float(stats.chi2.ppf(1.0 - level, df))
        pvalue = float(stats.chi2.sf(stat, df))
        reject = stat > critical
    else:
        stat = float(np.quantile(lam_draws, level))
        df = 0
        critical = float(threshold)
        pvalue = float(np.mean(lam_draws <= threshold))
        reject = stat > critical
    return RankTestResult(k, method, bool(reject), level, float(stat), critical, pvalue, df, lam_draws, est)


@dataclass(frozen=True)
class NormalizedSeries:
    """Per-period unit-Frobenius-norm affinity matrices and recovered scales."""

    A: tuple[np.ndarray, ...]
    sigma: np.ndarray
    labels: tuple[str, ...]
    names: tuple[tuple[str, ...], ...]

    def diagonals(self) -> dict[str, dict[str, float]]:
        """Attribute -> period -> normalized diagonal entry (missing where unobserved)."""
        out: dict[str, dict[str, float]] = {}
        for A, label, names in zip(self.A, self.labels, self.names):
            for k, nm in enumerate(names):
                out.setdefault(nm, {})[label] = float(A[k, k])
        return out


def normalize_series(B_list: Sequence, labels: Sequence | None = None, names: Sequence | None = None) -> NormalizedSeries:
    """Rescale each period's ``B`` to unit Frobenius norm; ``sigma = 1 / ||B||``.

    Periods may carry different attribute subsets through ``names``.
    """
    mats = [np.asarray(B, dtype=np.float64) for B in B_list]
    labels = tuple(str(x) for x in (labels if labels is not None else range(1, len(mats) + 1)))
    if len(labels) != len(mats):
        raise ValidationError("one label per period is required")
    if names is None:
        names = [tuple(f"x{i + 1}" for i in range(B.shape[0])) for B in mats]
    names = tuple(tuple(n) for n in names)
    A_out, sig = [], []
    for B, label, nm in zip(mats, labels, names):
        if B.ndim != 2 or B.shape[0] != len(nm):
            raise ValidationError(f"period {label}: matrix shape {B.shape} does not match {len(nm)} names")
        norm = np.linalg.norm(B, "fro")
        if not norm > 0:
            raise ZeroMatrix(label)
        A_out.append(B / norm)
        sig.append(1.0 / norm)
    return NormalizedSeries(tuple(A_out), np.array(sig), labels, names)
