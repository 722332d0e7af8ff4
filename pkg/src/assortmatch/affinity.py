"""Estimation of the scaled affinity matrix ``B = A / sigma`` from matched couples.

The estimator minimizes ``W(B, 1) - E_hat[x' B y]``, a smooth convex function
whose gradient is the gap between model and sample cross-moments. Couples
sharing an identical attribute vector on one side are merged into a single
type before solving; this leaves the minimizer and gradient unchanged and
shifts the social gain by a known entropy constant, which is added back.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg, optimize

from .entropic import DEFAULT_MAX_ITER, DEFAULT_TOL, solve_scaled
from .errors import InnerSolverFailure, NonConvergence, NumericalError, ValidationError
from .market_data import CoupleSample

log = logging.getLogger(__name__)

SIGNIFICANCE_Z = 1.96
# Newton steps need a dense solve over the smaller side's distinct types.
NEWTON_MAX_TYPES = 3000


@dataclass(frozen=True)
class AffinityEstimate:
    B: np.ndarray
    objective: float
    moment_residuals: np.ndarray
    converged: bool
    iterations: int
    names: tuple[str, ...]
    n: int
    standard_errors: np.ndarray | None = None
    bootstrap_draws: np.ndarray | None = None
    bootstrap_failures: int = 0

    @property
    def significant(self) -> np.ndarray:
        """Entries with ``|B| / SE >= 1.96``; all False without standard errors."""
        if self.standard_errors is None:
            return np.zeros(self.B.shape, dtype=bool)
        se = self.standard_errors
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(se > 0, np.abs(self.B) / se, np.inf * (self.B != 0))
        return z >= SIGNIFICANCE_Z


@dataclass(frozen=True)
class BootstrapResult:
    standard_errors: np.ndarray
    draws: np.ndarray
    failures: int
    reps: int


def _merge_types(M, w):
    """Distinct rows of ``M`` with their total weight and the entropy offset of the split."""
    types, inverse = np.unique(M, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    mass = np.bincount(inverse, weights=w, minlength=types.shape[0])
    share = w / mass[inverse]
    offset = -float(np.sum(w * np.log(share)))
    return types, mass, offset


class AffinityObjective:
    """Value, gradient and Hessian of the estimation criterion at ``sigma = 1``.

    Inner potentials are kept between calls and reused as a warm start.
    """

    def __init__(self, sample: CoupleSample, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER):
        w = sample.weights
        self.O = sample.n_attributes
        self.Xu, self.p, off_m = _merge_types(sample.X, w)
        self.Yu, self.q, off_f = _merge_types(sample.Y, w)
        self.entropy_offset = off_m + off_f
        self.target = sample.X.T @ (w[:, None] * sample.Y)
        self.tol = tol
        self.max_iter = max_iter
        self._v = None
        self.inner_iterations = 0

    @property
    def n_types(self):
        return self.Xu.shape[0], self.Yu.shape[0]

    def solve(self, B):
        S = self.Xu @ B @ self.Yu.T
        try:
            u, v, it, err = solve_scaled(S, self.p, self.q, self.tol, self.max_iter, self._v)
        except NumericalError as exc:
            raise InnerSolverFailure(str(exc)) from exc
        self.inner_iterations += it
        if err > self.tol:
            raise InnerSolverFailure(str(NonConvergence(it, err)))
        self._v = v
        pi = np.exp(S - u[:, None] - v[None, :])
        return u, v, pi

    def _value_grad(self, B):
        B = np.asarray(B, dtype=np.float64).reshape(self.O, self.O)
        u, v, pi = self.solve(B)
        # dual form of the social gain: second-order accurate in the marginal error
        W = self.p @ u + self.q @ v + pi.sum() - 1.0 + self.entropy_offset
        value = W - float(np.sum(B * self.target))
        grad = self.Xu.T @ pi @ self.Yu - self.target
        return value, grad, pi

    def value_and_gradient(self, B):
        value, grad, _ = self._value_grad(B)
        return value, grad

    def model_moments(self, B):
        _, _, pi = self.solve(np.asarray(B, dtype=np.float64))
        return self.Xu.T @ pi @ self.Yu

    def hessian(self, pi):
        """Covariance of ``vec(x y')`` net of its best additive (row + column) fit under ``pi``."""
        O = self.O
        Xu, Yu = self.Xu, self.Yu
        nm, nf = pi.shape
        XX = (Xu[:, :, None] * Xu[:, None, :]).reshape(nm, O * O)
        YY = (Yu[:, :, None] * Yu[:, None, :]).reshape(nf, O * O)
        T = (XX.T @ pi @ YY).reshape(O, O, O, O)  # [k, m, l, n]
        H = T.transpose(0, 2, 1, 3).reshape(O * O, O * O)
        piY = pi @ Yu
        piX = pi.T @ Xu
        R = (Xu[:, :, None] * piY[:, None, :]).reshape(nm, O * O)
        C = (piX[:, :, None] * Yu[:, None, :]).reshape(nf, O * O)
        r = pi.sum(axis=1)
        c = pi.sum(axis=0)
        Pr = pi / r[:, None]
        M = np.diag(c) - pi.T @ Pr
        rhs = C - Pr.T @ R
        beta = np.zeros((nf, O * O))
        if nf > 1:
            beta[:-1] = linalg.solve(M[:-1, :-1], rhs[:-1], assume_a="pos")
        alpha = (R - pi @ beta) / r[:, None]
        H = H - R.T @ alpha - C.T @ beta
        return 0.5 * (H + H.T)


def objective_and_gradient(B, sample: CoupleSample, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER):
    """Criterion value and its gradient (model minus sample cross-moments) at ``B``."""
    return AffinityObjective(sample, tol, max_iter).value_and_gradient(B)


def _newton(obj: AffinityObjective, B0, outer_tol, max_outer):
    O = obj.O
    B = B0.copy()
    value, grad, pi = obj._value_grad(B)
    it = 0
    while it < max_outer and np.max(np.abs(grad)) > outer_tol:
        it += 1
        g = grad.ravel()
        try:
            H = obj.hessian(pi)
            step = -linalg.solve(H, g, assume_a="pos")
        except (linalg.LinAlgError, ValueError):
            step = -g
        if not g @ step < 0:
            step = -g
        t = 1.0
        while True:
            trial = B + t * step.reshape(O, O)
            tv, tg, tpi = obj._value_grad(trial)
            if tv <= value + 1e-4 * t * (g @ step):
                break
            # near the optimum the decrease drops below rounding; accept a gradient reduction
            if np.max(np.abs(tg)) < np.max(np.abs(grad)) and abs(tv - value) <= 1e-12 * max(1.0, abs(value)):
                break
            t *= 0.5
            if t < 1e-10:
                return B, value, grad, it, False
        B, value, grad, pi = trial, tv, tg, tpi
    return B, value, grad, it, bool(np.max(np.abs(grad)) <= outer_tol)


def _lbfgs(obj: AffinityObjective, B0, outer_tol, max_outer):
    O = obj.O
    res = optimize.minimize(
        lambda b: (lambda vg: (vg[0], vg[1].ravel()))(obj.value_and_gradient(b)),
        B0.ravel(),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": max_outer, "gtol": outer_tol * 0.1, "ftol": 1e-16, "maxcor": 30},
    )
    B = res.x.reshape(O, O)
    value, grad = obj.value_and_gradient(B)
    return B, value, grad, int(res.nit), bool(np.max(np.abs(grad)) <= outer_tol)


def estimate_affinity(
    sample: CoupleSample,
    init=None,
    outer_tol: float = 1e-6,
    max_outer: int = 200,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    method: str = "auto",
) -> AffinityEstimate:
    """Minimize the estimation criterion over ``B``.

    ``method`` is ``"newton"`` (damped Newton with an exact Hessian),
    ``"lbfgs"``, or ``"auto"``, which picks Newton unless both sides have more
    than ``NEWTON_MAX_TYPES`` distinct types. A run that stops before the
    moment residuals reach ``outer_tol`` returns its last iterate with
    ``converged=False``.
    """
    O = sample.n_attributes
    if sample.n <= O:
        raise ValidationError(f"need more couples ({sample.n}) than attributes ({O})")
    if not outer_tol > 0:
        raise ValidationError("outer_tol must be positive")
    B0 = np.zeros((O, O)) if init is None else np.array(init, dtype=np.float64).reshape(O, O)
    obj = AffinityObjective(sample, tol, max_iter)
    if method == "auto":
        method = "newton" if min(obj.n_types) <= NEWTON_MAX_TYPES else "lbfgs"
    if method == "newton":
        B, value, grad, it, ok = _newton(obj, B0, outer_tol, max_outer)
    elif method == "lbfgs":
        B, value, grad, it, ok = _lbfgs(obj, B0, outer_tol, max_outer)
    else:
        raise ValidationError(f"unknown method {method!r}")
    if not ok:
        log.warning("affinity estimation stopped with moment residual %.3e", np.max(np.abs(grad)))
    return AffinityEstimate(
        B=B,
        objective=float(value),
        moment_residuals=grad,
        converged=ok,
        iterations=it,
        names=sample.names,
        n=sample.n,
    )


def _replicate(args):
    sample, child, init, kwargs = args
    rng = np.random.default_rng(child)
    idx = rng.choice(sample.n, size=sample.n, p=sample.weights)
    try:
        est = estimate_affinity(sample.resample(idx), init=init, **kwargs)
    except (NumericalError, ValidationError) as exc:
        log.info("bootstrap replicate failed: %s", exc)
        return None
    return est.B if est.converged else None


def bootstrap_errors(
    sample: CoupleSample,
    reps: int = 2000,
    seed=None,
    init=None,
    n_jobs: int = 1,
    **estimate_kwargs,
) -> BootstrapResult:
    """Couple-level nonparametric bootstrap of the affinity estimate.

    Replicate ``r`` resamples with the ``r``-th child of ``SeedSequence(seed)``,
    so results do not depend on ``n_jobs`` or execution order. Failed or
    unconverged replicates are excluded and counted.
    """
    if reps < 2:
        raise ValidationError(f"reps must be at least 2, got {reps}")
    children = np.random.SeedSequence(seed).spawn(reps)
    tasks = [(sample, c, init, estimate_kwargs) for c in children]
    if n_jobs == 1:
        results = [_replicate(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_replicate, tasks))
    draws = [r for r in results if r is not None]
    failures = reps - len(draws)
    if len(draws) < 2:
        raise InnerSolverFailure(f"only {len(draws)} of {reps} bootstrap replicates succeeded")
    draws = np.stack(draws)
    return BootstrapResult(draws.std(axis=0, ddof=1), draws, failures, reps)


def estimate_with_errors(sample: CoupleSample, reps: int = 2000, seed=None, n_jobs: int = 1, **kwargs) -> AffinityEstimate:
    """Point estimate plus bootstrap standard errors warm-started at it."""
    est = estimate_affinity(sample, **kwargs)
    kwargs.pop("init", None)
    boot = bootstrap_errors(sample, reps, seed, init=est.B, n_jobs=n_jobs, **kwargs)
    return replace(
        est,
        standard_errors=boot.standard_errors,
        bootstrap_draws=boot.draws,
        bootstrap_failures=boot.failures,
    )
