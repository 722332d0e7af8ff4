"""Discrete-type systematic surplus from matched and unmatched counts."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyBinSpec, ValidationError
from .market_data import CoupleSample, bin_index

DEFAULT_FLOOR = 1e-8


@dataclass(frozen=True)
class ContingencyTable:
    mu: np.ndarray
    mu_m0: np.ndarray
    mu_0f: np.ndarray
    row_labels: tuple[str, ...] | None = None
    col_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        mu = np.array(self.mu, dtype=np.float64, ndmin=2)
        m0 = np.asarray(self.mu_m0, dtype=np.float64).ravel()
        f0 = np.asarray(self.mu_0f, dtype=np.float64).ravel()
        if m0.shape != (mu.shape[0],) or f0.shape != (mu.shape[1],):
            raise DimensionMismatch("unmatched counts must match the table's rows and columns")
        for arr in (mu, m0, f0):
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise ValidationError("counts must be finite and nonnegative")
        rows = self.row_labels or tuple(str(i + 1) for i in range(mu.shape[0]))
        cols = self.col_labels or tuple(str(j + 1) for j in range(mu.shape[1]))
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "mu_m0", m0)
        object.__setattr__(self, "mu_0f", f0)
        object.__setattr__(self, "row_labels", tuple(rows))
        object.__setattr__(self, "col_labels", tuple(cols))

    def transpose(self) -> "ContingencyTable":
        return ContingencyTable(self.mu.T, self.mu_0f, self.mu_m0, self.col_labels, self.row_labels)

    def scaled(self, c: float) -> "ContingencyTable":
        return ContingencyTable(self.mu * c, self.mu_m0 * c, self.mu_0f * c, self.row_labels, self.col_labels)


@dataclass(frozen=True)
class SurplusSurface:
    """Estimated surplus with a mask of cells touched by the zero-count floor."""

    phi: np.ndarray
    is_floored: np.ndarray
    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]


def _bin_labels(edges):
    return tuple(f"[{edges[k]:g}, {edges[k + 1]:g})" for k in range(len(edges) - 1))


def _edges(bins):
    edges = np.asarray(bins, dtype=np.float64)
    if edges.ndim != 1 or edges.size < 2 or not np.all(np.diff(edges) > 0):
        raise EmptyBinSpec("bins need at least two strictly increasing boundaries")
    return edges


def _counts(values, edges, label):
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size and (values.min() < edges[0] or values.max() > edges[-1]):
        raise ValidationError(f"{label} values fall outside the bins")
    return np.bincount(bin_index(values, edges), minlength=edges.size - 1).astype(np.float64) if values.size else np.zeros(edges.size - 1)


def tabulate(matched: CoupleSample, unmatched_m, unmatched_f, attr: str, bins, female_bins=None) -> ContingencyTable:
    """Count matched couples per (male bin, female bin) and unmatched singles per bin.

    ``unmatched_m`` / ``unmatched_f`` hold the attribute value of each single;
    ``None`` means no singles were observed on that side.
    """
    ex = _edges(bins)
    ef = ex if female_bins is None else _edges(female_bins)
    k = matched.names.index(attr)
    x, y = matched.X[:, k], matched.Y[:, k]
    _counts(x, ex, "male")
    _counts(y, ef, "female")
    mu = np.zeros((ex.size - 1, ef.size - 1))
    np.add.at(mu, (bin_index(x, ex), bin_index(y, ef)), 1.0)
    m0 = _counts([] if unmatched_m is None else unmatched_m, ex, "unmatched male")
    f0 = _counts([] if unmatched_f is None else unmatched_f, ef, "unmatched female")
    return ContingencyTable(mu, m0, f0, _bin_labels(ex), _bin_labels(ef))


def systematic_surplus(table: ContingencyTable, floor: float = DEFAULT_FLOOR) -> np.ndarray:
    """``2 log mu_ij - log mu_i0 - log mu_0j`` with every count floored at ``floor``."""
    if not floor > 0:
        raise ValidationError(f"floor must be positive, got {floor}")
    mu = np.log(np.maximum(table.mu, floor))
    m0 = np.log(np.maximum(table.mu_m0, floor))
    f0 = np.log(np.maximum(table.mu_0f, floor))
    return 2.0 * mu - m0[:, None] - f0[None, :]


def surplus_surface(table: ContingencyTable, floor: float = DEFAULT_FLOOR) -> SurplusSurface:
    phi = systematic_surplus(table, floor)
    floored = (table.mu < floor) | (table.mu_m0 < floor)[:, None] | (table.mu_0f < floor)[None, :]
    return SurplusSurface(phi, floored, table.row_labels, table.col_labels)
