"""Couple-level data: ingestion, encoding, standardization and descriptives."""
from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import yaml

from .errors import (
    DegenerateCharacteristic,
    DegenerateColumn,
    EmptyBinSpec,
    EmptySample,
    MissingColumn,
    UnknownCategory,
    ValidationError,
)

STAGES = ("Application", "Pre-relationship", "Serious", "Proposal")
_STAGE_ALIASES = {
    "application": "Application",
    "pre-relationship": "Pre-relationship",
    "pre-relation": "Pre-relationship",
    "prerelationship": "Pre-relationship",
    "serious": "Serious",
    "serious-relation": "Serious",
    "serious-relationship": "Serious",
    "proposal": "Proposal",
}
MISSING_TOKENS = frozenset({"", "na", "nan", "null", "none"})

# Ordinal codes of the platform's categorical attributes.
TABLE3_ENCODINGS: dict[str, dict[str, int]] = {
    "education": {
        "JuniorHigh": 1,
        "HighSchool": 2,
        "Vocational": 3,
        "Undergraduate": 4,
        "Graduate": 5,
    },
    "drink": {"Never": 1, "SocialOnly": 2, "DrinkRegularly": 3},
    "smoke": {"Never": 1, "Occasionally": 2, "Regularly": 3},
    "marital_history": {"NeverMarried": 1, "DivorcedOrWidowed": 2},
    "housework": {
        "LeaveToPartner": 1,
        "DiscussWithPartner": 2,
        "ShareEqually": 3,
        "DoItMyself": 4,
    },
    "childcare": {
        "DoNotWantChildren": 1,
        "LeaveToPartner": 2,
        "DiscussWithPartner": 3,
        "ShareEqually": 4,
        "DoItMyself": 5,
    },
    "child": {"DoNotWant": 1, "NoPreference": 2, "Want": 3},
}

_CODE_PREFIX = re.compile(r"^\(\d+\)\s*")


def normalize_stage(label):
    key = str(label).strip().lower().replace(" ", "-").replace("_", "-")
    try:
        return _STAGE_ALIASES[key]
    except KeyError:
        raise ValidationError(f"unknown stage {label!r}; expected one of {STAGES}") from None


@dataclass(frozen=True)
class AttributeSchema:
    """Ordered attribute list with per-attribute kind and ordinal encoding."""

    names: tuple[str, ...]
    kinds: Mapping[str, str]
    encodings: Mapping[str, Mapping[str, float]] = field(default_factory=dict)

    def __post_init__(self):
        names = tuple(self.names)
        object.__setattr__(self, "names", names)
        if not names:
            raise ValidationError("schema needs at least one attribute")
        if len(set(names)) != len(names):
            raise ValidationError("attribute names must be unique")
        for name in names:
            kind = self.kinds.get(name)
            if kind not in ("continuous", "ordinal"):
                raise ValidationError(f"attribute {name!r}: kind must be 'continuous' or 'ordinal', got {kind!r}")
            if kind == "ordinal":
                enc = self.encodings.get(name)
                if not enc:
                    raise ValidationError(f"ordinal attribute {name!r} has no encoding")
                codes = list(enc.values())
                if len(set(codes)) != len(codes):
                    raise ValidationError(f"ordinal attribute {name!r} has tied codes")

    def __len__(self):
        return len(self.names)

    @classmethod
    def from_dict(cls, data: Mapping) -> "AttributeSchema":
        unknown = set(data) - {"attributes", "version"}
        if unknown:
            raise ValidationError(f"unknown schema keys: {sorted(unknown)}")
        names, kinds, encodings = [], {}, {}
        for entry in data.get("attributes") or []:
            extra = set(entry) - {"name", "kind", "encoding"}
            if extra:
                raise ValidationError(f"unknown attribute keys: {sorted(extra)}")
            name = entry["name"]
            names.append(name)
            kinds[name] = entry.get("kind", "continuous")
            enc = entry.get("encoding")
            if enc == "table3":
                enc = TABLE3_ENCODINGS.get(name)
                if enc is None:
                    raise ValidationError(f"no built-in encoding for attribute {name!r}")
            if enc is not None:
                encodings[name] = {str(k): float(v) for k, v in enc.items()}
        return cls(tuple(names), kinds, encodings)

    @classmethod
    def from_file(cls, path) -> "AttributeSchema":
        text = Path(path).read_text()
        data = yaml.safe_load(text)
        if not isinstance(data, Mapping):
            raise ValidationError(f"schema file {path} must hold a mapping")
        return cls.from_dict(data)

    @classmethod
    def continuous(cls, names: Sequence[str]) -> "AttributeSchema":
        return cls(tuple(names), {n: "continuous" for n in names})

    def to_dict(self):
        attrs = []
        for name in self.names:
            entry = {"name": name, "kind": self.kinds[name]}
            if name in self.encodings:
                entry["encoding"] = dict(self.encodings[name])
            attrs.append(entry)
        return {"attributes": attrs}

    def write(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def encode(self, attr, raw, row):
        """Map one raw cell to a float; ``None`` marks a missing value."""
        text = raw.strip()
        if text.lower() in MISSING_TOKENS:
            return None
        if self.kinds[attr] == "ordinal":
            enc = self.encodings[attr]
            label = _CODE_PREFIX.sub("", text)
            if label in enc:
                return float(enc[label])
            try:
                code = float(text)
            except ValueError:
                code = None
            if code is not None and code in set(enc.values()):
                return code
            raise UnknownCategory(row, attr, text)
        try:
            value = float(text)
        except ValueError:
            raise ValidationError(f"row {row}: non-numeric value {text!r} for attribute {attr!r}") from None
        if not np.isfinite(value):
            return None
        return value


@dataclass(frozen=True)
class CoupleSample:
    """Paired male/female attribute matrices, one row per couple (or trade)."""

    X: np.ndarray
    Y: np.ndarray
    names: tuple[str, ...]
    year: np.ndarray | None = None
    stage: np.ndarray | None = None
    weights: np.ndarray | None = None
    male_id: np.ndarray | None = None
    female_id: np.ndarray | None = None
    dropped: int = 0

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64, ndmin=2)
        Y = np.array(self.Y, dtype=np.float64, ndmin=2)
        if X.shape != Y.shape:
            raise ValidationError(f"male attributes {X.shape} and female attributes {Y.shape} differ in shape")
        n, o = X.shape
        if n < 2:
            raise EmptySample(f"a couple sample needs at least 2 rows, got {n}")
        if o < 1:
            raise ValidationError("a couple sample needs at least one attribute")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise ValidationError("attribute matrices contain non-finite entries")
        names = tuple(self.names) if self.names is not None else tuple(f"x{k + 1}" for k in range(o))
        if len(names) != o:
            raise ValidationError(f"{len(names)} attribute names for {o} columns")
        if self.weights is None:
            w = np.full(n, 1.0 / n)
        else:
            w = np.asarray(self.weights, dtype=np.float64)
            if w.shape != (n,) or np.any(w < 0) or not np.all(np.isfinite(w)) or w.sum() <= 0:
                raise ValidationError("weights must be a nonnegative vector with positive sum")
            w = w / w.sum()
        X.setflags(write=False)
        Y.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "weights", w)
        for key in ("year", "stage", "male_id", "female_id"):
            val = getattr(self, key)
            if val is not None:
                val = np.asarray(val)
                if val.shape != (n,):
                    raise ValidationError(f"{key} must have one entry per row")
                object.__setattr__(self, key, val)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def n_attributes(self) -> int:
        return self.X.shape[1]

    def take(self, index) -> "CoupleSample":
        """Rows at ``index`` (a boolean mask or integer array); weights renormalized."""
        index = np.asarray(index)
        if index.dtype == bool:
            index = np.flatnonzero(index)
        opt = {k: (None if getattr(self, k) is None else getattr(self, k)[index])
               for k in ("year", "stage", "male_id", "female_id")}
        return CoupleSample(self.X[index], self.Y[index], self.names, weights=self.weights[index], **opt)

    def resample(self, index) -> "CoupleSample":
        """Bootstrap draw: rows at ``index`` with uniform weights."""
        index = np.asarray(index)
        return CoupleSample(self.X[index], self.Y[index], self.names)

    def select(self, names: Sequence[str]) -> "CoupleSample":
        cols = [self.names.index(nm) for nm in names]
        return replace(self, X=self.X[:, cols], Y=self.Y[:, cols], names=tuple(names))

    def for_stage(self, stage) -> "CoupleSample":
        if self.stage is None:
            raise ValidationError("sample has no stage column")
        stage = normalize_stage(stage)
        mask = np.array([normalize_stage(s) == stage for s in self.stage])
        if mask.sum() < 2:
            raise EmptySample(f"stage {stage!r} has {int(mask.sum())} rows")
        return self.take(mask)

    def for_year(self, year) -> "CoupleSample":
        if self.year is None:
            raise ValidationError("sample has no year column")
        mask = np.array([str(y) == str(year) for y in self.year])
        if mask.sum() < 2:
            raise EmptySample(f"year {year!r} has {int(mask.sum())} rows")
        return self.take(mask)

    def write_csv(self, path):
        """Write in the couples-file layout read by :func:`load_couples`."""
        header = [f"male_{nm}" for nm in self.names] + [f"female_{nm}" for nm in self.names]
        extra = [k for k in ("year", "stage", "male_id", "female_id") if getattr(self, k) is not None]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header + extra)
            for i in range(self.n):
                row = [repr(float(v)) for v in self.X[i]] + [repr(float(v)) for v in self.Y[i]]
                row += [str(getattr(self, k)[i]) for k in extra]
                writer.writerow(row)


def load_couples(path, schema: AttributeSchema, delimiter: str = ",") -> CoupleSample:
    """Read a couples file, apply the schema encodings and drop incomplete rows.

    Rows with any missing attribute are dropped; the count is stored on the
    returned sample as ``dropped``.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptySample(f"{path} is empty") from None
        rows = list(reader)
    col = {name: k for k, name in enumerate(header)}
    for side in ("male", "female"):
        for attr in schema.names:
            if f"{side}_{attr}" not in col:
                raise MissingColumn(f"{side}_{attr}")

    X, Y, years, stages, weights, mids, fids = [], [], [], [], [], [], []
    dropped = 0
    for r, row in enumerate(rows, start=1):
        if not any(cell.strip() for cell in row):
            continue
        row = row + [""] * (len(header) - len(row))
        xs = [schema.encode(a, row[col[f"male_{a}"]], r) for a in schema.names]
        ys = [schema.encode(a, row[col[f"female_{a}"]], r) for a in schema.names]
        if any(v is None for v in xs) or any(v is None for v in ys):
            dropped += 1
            continue
        X.append(xs)
        Y.append(ys)
        if "year" in col:
            years.append(row[col["year"]].strip())
        if "stage" in col:
            stages.append(normalize_stage(row[col["stage"]]))
        if "weight" in col:
            weights.append(float(row[col["weight"]]))
        if "male_id" in col:
            mids.append(row[col["male_id"]].strip())
        if "female_id" in col:
            fids.append(row[col["female_id"]].strip())
    if not X:
        raise EmptySample(f"no complete rows in {path} ({dropped} dropped)")
    if len(X) < 2:
        raise EmptySample(f"only one complete row in {path} ({dropped} dropped)")
    return CoupleSample(
        np.array(X),
        np.array(Y),
        schema.names,
        year=np.array(years) if "year" in col else None,
        stage=np.array(stages) if "stage" in col else None,
        weights=np.array(weights) if "weight" in col else None,
        male_id=np.array(mids) if "male_id" in col else None,
        female_id=np.array(fids) if "female_id" in col else None,
        dropped=dropped,
    )


@dataclass(frozen=True)
class Standardization:
    """Per-column location and scale used by :func:`standardize`."""

    names: tuple[str, ...]
    male_mean: np.ndarray
    male_sd: np.ndarray
    female_mean: np.ndarray
    female_sd: np.ndarray

    def invert(self, sample: CoupleSample) -> CoupleSample:
        return replace(
            sample,
            X=sample.X * self.male_sd + self.male_mean,
            Y=sample.Y * self.female_sd + self.female_mean,
        )


def _weighted_moments(M, w):
    mean = w @ M
    sd = np.sqrt(w @ (M - mean) ** 2)
    return mean, sd


def _check_sd(sd, mean, names, side):
    for k, s in enumerate(sd):
        # constant columns leave rounding noise of order eps * |mean|
        if not s > 1e-12 * max(1.0, abs(mean[k])):
            raise DegenerateColumn(f"{side}_{names[k]}")


def standardize(sample: CoupleSample) -> tuple[CoupleSample, Standardization]:
    """Z-score every male and female column under the sample weights.

    Returns the transformed sample and the (mean, sd) pairs. The standard
    deviation is the weighted population one, so the result has exactly unit
    second moment under the same weights the estimator uses.
    """
    w = sample.weights
    mx, sx = _weighted_moments(sample.X, w)
    my, sy = _weighted_moments(sample.Y, w)
    _check_sd(sx, mx, sample.names, "male")
    _check_sd(sy, my, sample.names, "female")
    out = replace(sample, X=(sample.X - mx) / sx, Y=(sample.Y - my) / sy)
    return out, Standardization(sample.names, mx, sx, my, sy)


def correlation_matrix(sample: CoupleSample, gender: str) -> np.ndarray:
    """Pearson correlations among one side's attributes."""
    if gender not in ("male", "female"):
        raise ValidationError(f"gender must be 'male' or 'female', got {gender!r}")
    M = sample.X if gender == "male" else sample.Y
    w = sample.weights
    mean, sd = _weighted_moments(M, w)
    _check_sd(sd, mean, sample.names, gender)
    Z = (M - mean) / sd
    C = (Z * w[:, None]).T @ Z
    C = 0.5 * (C + C.T)
    np.fill_diagonal(C, 1.0)
    return np.clip(C, -1.0, 1.0)


def summary_statistics(sample: CoupleSample) -> dict:
    """N, mean, median, sd, min and max of every attribute by gender."""
    out = {}
    for gender, M in (("female", sample.Y), ("male", sample.X)):
        out[gender] = {
            name: {
                "N": int(M.shape[0]),
                "mean": float(M[:, k].mean()),
                "median": float(np.median(M[:, k])),
                "sd": float(M[:, k].std(ddof=1)),
                "min": float(M[:, k].min()),
                "max": float(M[:, k].max()),
            }
            for k, name in enumerate(sample.names)
        }
    return out


def _check_bins(bins, values, side):
    edges = np.asarray(bins, dtype=np.float64)
    if edges.ndim != 1 or edges.size < 2:
        raise EmptyBinSpec("bin specification needs at least two boundaries")
    if not np.all(np.diff(edges) > 0):
        raise EmptyBinSpec("bin boundaries must be strictly increasing")
    if values.min() < edges[0] or values.max() > edges[-1]:
        raise ValidationError(
            f"{side} values span [{values.min()}, {values.max()}], outside bins [{edges[0]}, {edges[-1]}]"
        )
    return edges


def bin_index(values, edges) -> np.ndarray:
    """Bin of each value; bins are half-open except the last, which is closed."""
    idx = np.searchsorted(edges, values, side="right") - 1
    return np.clip(idx, 0, len(edges) - 2)


def joint_proportion(sample: CoupleSample, attr: str, bins, female_bins=None) -> np.ndarray:
    """P[i, j] = share of couples with husband in bin i and wife in bin j."""
    k = sample.names.index(attr)
    x, y = sample.X[:, k], sample.Y[:, k]
    ex = _check_bins(bins, x, "male")
    ey = _check_bins(bins if female_bins is None else female_bins, y, "female")
    counts = np.zeros((ex.size - 1, ey.size - 1))
    np.add.at(counts, (bin_index(x, ex), bin_index(y, ey)), 1.0)
    return counts / sample.n


def likelihood_ratio(P) -> np.ndarray:
    """Joint proportion over the product of its marginals.

    Cells whose row or column marginal is zero are undefined and set to NaN.
    """
    P = np.asarray(P, dtype=np.float64)
    pm = P.sum(axis=1)
    pf = P.sum(axis=0)
    denom = np.outer(pm, pf)
    out = np.full(P.shape, np.nan)
    ok = denom > 0
    out[ok] = P[ok] / denom[ok]
    return out


@dataclass(frozen=True)
class OccupationTable:
    """Raw occupation characteristics with their platform categories."""

    occupations: tuple[str, ...]
    characteristics: np.ndarray
    category_map: Mapping[str, str]
    signs: np.ndarray
    characteristic_names: tuple[str, ...] | None = None

    def __post_init__(self):
        occ = tuple(self.occupations)
        C = np.array(self.characteristics, dtype=np.float64, ndmin=2)
        signs = np.asarray(self.signs, dtype=np.float64)
        if C.shape[0] != len(occ):
            raise ValidationError("one characteristic row per occupation is required")
        if C.shape[1] < 1:
            raise ValidationError("at least one characteristic is required")
        if signs.shape != (C.shape[1],) or not np.all(np.abs(signs) == 1):
            raise ValidationError("signs must be +1 or -1 per characteristic")
        missing = [o for o in occ if o not in self.category_map]
        if missing:
            raise ValidationError(f"occupations without a category: {missing}")
        names = self.characteristic_names or tuple(f"c{k + 1}" for k in range(C.shape[1]))
        object.__setattr__(self, "occupations", occ)
        object.__setattr__(self, "characteristics", C)
        object.__setattr__(self, "signs", signs)
        object.__setattr__(self, "characteristic_names", tuple(names))


def flexibility_index(table: OccupationTable) -> dict[str, float]:
    """Average of sign-normalized occupation-level z-scores, by platform category.

    Occupations are weighted equally when z-scoring and when averaging within
    a category.
    """
    C = table.characteristics
    mean = C.mean(axis=0)
    sd = C.std(axis=0)
    for k, s in enumerate(sd):
        if not s > 1e-12 * max(1.0, abs(mean[k])):
            raise DegenerateCharacteristic(table.characteristic_names[k])
    Z = (C - mean) / sd * table.signs
    cats = np.array([table.category_map[o] for o in table.occupations])
    out = {}
    for cat in dict.fromkeys(cats):
        within = Z[cats == cat].mean(axis=0)
        out[str(cat)] = float(within.mean())
    return out
