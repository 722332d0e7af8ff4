"""Matching maximum score estimation from pairwise swap inequalities."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from math import comb
from typing import Mapping, Sequence

import numpy as np
from scipy import optimize

from . import _backend
from .errors import InsufficientTrades, ValidationError
from .market_data import CoupleSample

DEFAULT_DOMAIN = (-10.0, 10.0)
# Enumerate all valid pairs when there are at most this many; sample by rejection otherwise.
ENUMERATION_LIMIT = 5_000_000


@dataclass(frozen=True)
class SwapInequality:
    """Observed trades (m1, w1), (m2, w2) against the partner swap (m1, w2), (m2, w1)."""

    x1: np.ndarray
    y1: np.ndarray
    x2: np.ndarray
    y2: np.ndarray
    stage: str | None = None
    trades: tuple[int, int] | None = None

    def z(self, theta) -> float:
        theta = np.asarray(theta, dtype=np.float64)
        return float(
            self.x1 @ theta @ self.y1 + self.x2 @ theta @ self.y2 - self.x1 @ theta @ self.y2 - self.x2 @ theta @ self.y1
        )

    def reversed(self) -> "SwapInequality":
        """The inequality with the counterfactual configuration taken as observed."""
        return SwapInequality(self.x1, self.y2, self.x2, self.y1, self.stage, self.trades)


class InequalitySet:
    """Immutable batch of swap inequalities stored as attribute differences.

    For a swap of trades ``g`` and ``h`` the surplus gap is
    ``(x_g - x_h)' theta (y_g - y_h)``.
    """

    def __init__(self, X1, Y1, X2, Y2, stage=None, trades=None, names=None):
        self.X1, self.Y1, self.X2, self.Y2 = (np.array(a, dtype=np.float64, ndmin=2) for a in (X1, Y1, X2, Y2))
        for a in (self.X1, self.Y1, self.X2, self.Y2):
            a.setflags(write=False)
        self.dx = self.X1 - self.X2
        self.dy = self.Y1 - self.Y2
        self.stage = stage
        self.trades = None if trades is None else np.asarray(trades)
        self.names = tuple(names) if names is not None else tuple(f"x{k + 1}" for k in range(self.dx.shape[1]))

    def __len__(self):
        return self.dx.shape[0]

    def __getitem__(self, g) -> SwapInequality:
        tr = None if self.trades is None else tuple(int(t) for t in self.trades[g])
        return SwapInequality(self.X1[g], self.Y1[g], self.X2[g], self.Y2[g], self.stage, tr)

    def __iter__(self):
        return (self[g] for g in range(len(self)))

    @property
    def n_attributes(self):
        return self.dx.shape[1]

    def features(self) -> np.ndarray:
        """Row ``g`` is ``vec(dx_g dy_g')`` in row-major order, so ``z = features @ theta.ravel()``."""
        G, O = self.dx.shape
        return (self.dx[:, :, None] * self.dy[:, None, :]).reshape(G, O * O)

    def z(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64)
        return np.einsum("gk,kl,gl->g", self.dx, theta, self.dy)

    @classmethod
    def from_list(cls, inequalities: Sequence[SwapInequality], names=None):
        ineqs = list(inequalities)
        if not ineqs:
            raise ValidationError("no inequalities")
        stack = lambda attr: np.array([getattr(s, attr) for s in ineqs])  # noqa: E731
        return cls(stack("x1"), stack("y1"), stack("x2"), stack("y2"), ineqs[0].stage, names=names)


def _ids(sample, attr):
    ids = getattr(sample, attr)
    if ids is None:
        return np.arange(sample.n)
    return np.unique(np.asarray(ids).astype(str), return_inverse=True)[1].ravel()


def _pair_count(k):
    return int(np.sum(k * (k - 1) // 2))


def available_pairs(sample: CoupleSample) -> int:
    """Number of unordered trade pairs with distinct men and distinct women."""
    m = _ids(sample, "male_id")
    w = _ids(sample, "female_id")
    both = np.unique(np.stack([m, w], axis=1), axis=0, return_counts=True)[1]
    return (
        comb(sample.n, 2)
        - _pair_count(np.bincount(m))
        - _pair_count(np.bincount(w))
        + _pair_count(both)
    )


def generate_inequalities(stage_sample: CoupleSample, count: int, seed=None, stage=None) -> InequalitySet:
    """Sample ``count`` distinct swap inequalities uniformly from the valid trade pairs."""
    n = stage_sample.n
    m = _ids(stage_sample, "male_id")
    w = _ids(stage_sample, "female_id")
    avail = available_pairs(stage_sample)
    if avail < 1:
        raise InsufficientTrades("stage has no pair of trades with distinct men and distinct women", 0)
    if count < 1 or count > avail:
        raise InsufficientTrades(f"requested {count} inequalities; at most {avail} are available", avail)
    rng = np.random.default_rng(seed)
    if comb(n, 2) <= ENUMERATION_LIMIT:
        g, h = np.triu_indices(n, 1)
        ok = (m[g] != m[h]) & (w[g] != w[h])
        g, h = g[ok], h[ok]
        pick = np.sort(rng.choice(g.size, size=count, replace=False))
        g, h = g[pick], h[pick]
    else:
        chosen: dict[tuple[int, int], None] = {}
        while len(chosen) < count:
            a = rng.integers(0, n, size=2 * (count - len(chosen)) + 16)
            b = rng.integers(0, n, size=a.size)
            for i, j in zip(a.tolist(), b.tolist()):
                if i == j or m[i] == m[j] or w[i] == w[j]:
                    continue
                key = (i, j) if i < j else (j, i)
                if key not in chosen:
                    chosen[key] = None
                    if len(chosen) == count:
                        break
        pairs = np.array(sorted(chosen))
        g, h = pairs[:, 0], pairs[:, 1]
    if stage is None and stage_sample.stage is not None and len(set(stage_sample.stage.tolist())) == 1:
        stage = str(stage_sample.stage[0])
    X, Y = stage_sample.X, stage_sample.Y
    return InequalitySet(X[g], Y[g], X[h], Y[h], stage=stage, trades=np.stack([g, h], axis=1), names=stage_sample.names)


def score(theta, inequalities) -> int:
    """Number of inequalities with nonnegative surplus gap at ``theta``."""
    if not isinstance(inequalities, InequalitySet):
        inequalities = InequalitySet.from_list(inequalities)
    theta = np.asarray(theta, dtype=np.float64)
    if not np.all(np.isfinite(theta)):
        raise ValidationError("theta must be finite")
    F = inequalities.features()
    return int(_backend.score_batch(F, np.zeros(len(inequalities)), theta.reshape(1, -1))[0])


@dataclass(frozen=True)
class ScoreSpec:
    """Which coefficients of the affinity matrix are searched and which are pinned.

    ``fixed`` maps ``(row, col)`` positions to pinned values; by default the
    first diagonal entry (education) is pinned to one.
    """

    kind: str
    names: tuple[str, ...]
    fixed: Mapping[tuple[int, int], float] = field(default_factory=lambda: {(0, 0): 1.0})
    domain: tuple[float, float] = DEFAULT_DOMAIN

    def __post_init__(self):
        if self.kind not in ("diagonal", "full_interaction"):
            raise ValidationError(f"spec kind must be 'diagonal' or 'full_interaction', got {self.kind!r}")
        object.__setattr__(self, "names", tuple(self.names))
        lo, hi = self.domain
        if not lo < hi:
            raise ValidationError(f"empty search domain {self.domain}")
        O = len(self.names)
        fixed = {}
        for (i, j), v in dict(self.fixed).items():
            if not (0 <= i < O and 0 <= j < O):
                raise ValidationError(f"pinned position {(i, j)} outside a {O}x{O} matrix")
            if self.kind == "diagonal" and i != j:
                raise ValidationError("the diagonal spec can only pin diagonal entries")
            fixed[(int(i), int(j))] = float(v)
        object.__setattr__(self, "fixed", fixed)

    @classmethod
    def with_pins(cls, kind, names, pins: Mapping[str, float] | None = None, domain=DEFAULT_DOMAIN):
        """Pin diagonal entries by attribute name, e.g. ``{"education": 1.0}``."""
        names = tuple(names)
        pins = {names[0]: 1.0} if pins is None else pins
        fixed = {}
        for key, v in pins.items():
            if "*" in key:
                a, b = key.split("*", 1)
                fixed[(names.index(a), names.index(b))] = v
            else:
                if key not in names:
                    raise ValidationError(f"unknown attribute {key!r} to pin")
                fixed[(names.index(key), names.index(key))] = v
        return cls(kind, names, fixed, tuple(domain))

    @property
    def O(self) -> int:
        return len(self.names)

    def positions(self) -> list[tuple[int, int]]:
        if self.kind == "diagonal":
            return [(k, k) for k in range(self.O)]
        return [(i, j) for i in range(self.O) for j in range(self.O)]

    def free_positions(self) -> list[tuple[int, int]]:
        return [pos for pos in self.positions() if pos not in self.fixed]

    def label(self, pos) -> str:
        i, j = pos
        return self.names[i] if i == j else f"{self.names[i]}*{self.names[j]}"

    def theta(self, free_values) -> np.ndarray:
        """Full ``O x O`` matrix from the free coefficient values."""
        theta = np.zeros((self.O, self.O))
        for pos, v in self.fixed.items():
            theta[pos] = v
        for pos, v in zip(self.free_positions(), np.atleast_1d(free_values)):
            theta[pos] = v
        return theta

    def design(self, inequalities: InequalitySet):
        """``(D, offset)`` with ``z = D @ free_values + offset`` for every inequality."""
        if inequalities.n_attributes != self.O:
            raise ValidationError("inequalities and spec disagree on the attribute count")
        F = inequalities.features().reshape(len(inequalities), self.O, self.O)
        free = self.free_positions()
        D = np.stack([F[:, i, j] for i, j in free], axis=1) if free else np.zeros((len(inequalities), 0))
        offset = np.zeros(len(inequalities))
        for (i, j), v in self.fixed.items():
            offset += v * F[:, i, j]
        return D, offset


@dataclass(frozen=True)
class ScoreFit:
    """Spread of maximum-score maximizers across independent searches."""

    spec: ScoreSpec
    labels: tuple[str, ...]
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    run_thetas: np.ndarray
    run_scores: np.ndarray
    best_score: int
    best_theta: np.ndarray
    n_inequalities: int
    runs: int
    population: int
    iterations: int
    seed: object
    stage: str | None = None

    def rows(self):
        """``(label, mean, lower, upper, pinned)`` per reported coefficient."""
        out = []
        for k, pos in enumerate(self.spec.positions()):
            out.append((self.labels[k], self.mean[k], self.lower[k], self.upper[k], pos in self.spec.fixed))
        return out


def _differential_evolution(D, offset, n_free, domain, population, iterations, mutation, crossover, rng):
    lo, hi = domain

    def neg_score(x):
        thetas = np.atleast_2d(x.T) if x.ndim == 2 else x.reshape(1, -1)
        counts = _backend.score_batch(D, offset, thetas)
        return -counts.astype(np.float64) if x.ndim == 2 else -float(counts[0])

    init = rng.uniform(lo, hi, size=(population, n_free))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = optimize.differential_evolution(
            neg_score,
            [(lo, hi)] * n_free,
            strategy="rand1bin",
            maxiter=iterations,
            init=init,
            mutation=mutation,
            recombination=crossover,
            seed=rng,
            polish=False,
            tol=0.0,
            atol=0.0,
            vectorized=True,
            updating="deferred",
        )
    return np.asarray(res.x, dtype=np.float64), int(round(-res.fun))


def fit_max_score(
    inequalities: InequalitySet,
    spec: ScoreSpec,
    runs: int = 100,
    population: int = 1000,
    iterations: int = 300,
    seed=None,
    mutation: float = 0.8,
    crossover: float = 0.9,
) -> ScoreFit:
    """Maximize the score over the free coefficients with ``runs`` independent DE searches.

    Reports the mean and the 2.5 / 97.5 percentiles of each coefficient across
    the run maximizers; pinned coefficients get a degenerate interval.
    """
    if not isinstance(inequalities, InequalitySet):
        inequalities = InequalitySet.from_list(inequalities, names=spec.names)
    if len(inequalities) == 0:
        raise ValidationError("no inequalities to score")
    if runs < 1:
        raise ValidationError("runs must be at least 1")
    if population < 5:
        raise ValidationError("population must be at least 5")
    D, offset = spec.design(inequalities)
    n_free = D.shape[1]
    positions = spec.positions()
    children = np.random.SeedSequence(seed).spawn(runs)
    thetas = np.empty((runs, len(positions)))
    scores = np.empty(runs, dtype=np.int64)
    for r, child in enumerate(children):
        if n_free == 0:
            free = np.zeros(0)
            s = int(_backend.score_batch(D, offset, np.zeros((1, 0)))[0])
        else:
            free, s = _differential_evolution(
                D, offset, n_free, spec.domain, population, iterations, mutation, crossover, np.random.default_rng(child)
            )
        full = spec.theta(free)
        thetas[r] = [full[pos] for pos in positions]
        scores[r] = s
    mean = thetas.mean(axis=0)
    lower = np.percentile(thetas, 2.5, axis=0)
    upper = np.percentile(thetas, 97.5, axis=0)
    for k, pos in enumerate(positions):
        if pos in spec.fixed:
            mean[k] = lower[k] = upper[k] = spec.fixed[pos]
    best = int(np.argmax(scores))
    return ScoreFit(
        spec=spec,
        labels=tuple(spec.label(pos) for pos in positions),
        mean=mean,
        lower=lower,
        upper=upper,
        run_thetas=thetas,
        run_scores=scores,
        best_score=int(scores[best]),
        best_theta=spec.theta([thetas[best][k] for k, pos in enumerate(positions) if pos not in spec.fixed]),
        n_inequalities=len(inequalities),
        runs=runs,
        population=population,
        iterations=iterations,
        seed=seed,
        stage=inequalities.stage,
    )
