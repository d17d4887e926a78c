"""Confidential dataset container, CSV ingestion and random partitioning."""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from ._rng import stream
from .exceptions import InputError, ParameterError, SchemaError, ValidationError

DEFAULT_MISSING = ("", "?", "NA", "NaN", "nan")


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CausalDataset:
    """Rows of (binary outcome, binary treatment, covariate vector).

    Arrays are copied and made read-only on construction.
    """

    outcomes: np.ndarray
    treatments: np.ndarray
    covariates: np.ndarray
    covariate_names: tuple = ()

    def __post_init__(self):
        y = np.asarray(self.outcomes)
        z = np.asarray(self.treatments)
        x = np.asarray(self.covariates, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        if x.ndim != 2:
            raise ValidationError("covariates must be a 2-d array")
        n = len(y)
        if len(z) != n or x.shape[0] != n:
            raise ValidationError(
                f"length mismatch: {n} outcomes, {len(z)} treatments, {x.shape[0]} covariate rows"
            )
        for name, v in (("outcome", y), ("treatment", z)):
            bad = np.flatnonzero((v != 0) & (v != 1))
            if bad.size:
                raise ValidationError(
                    f"non-binary {name} value {v[bad[0]]!r} at row {bad[0]}", row=int(bad[0])
                )
        if not np.all(np.isfinite(x)):
            row = int(np.flatnonzero(~np.isfinite(x).all(axis=1))[0])
            raise ValidationError(f"non-finite covariate at row {row}", row=row)
        names = tuple(self.covariate_names) or tuple(f"x{j + 1}" for j in range(x.shape[1]))
        if len(names) != x.shape[1]:
            raise SchemaError("covariate_names does not match covariate count")
        object.__setattr__(self, "outcomes", _frozen(y, np.int8))
        object.__setattr__(self, "treatments", _frozen(z, np.int8))
        object.__setattr__(self, "covariates", _frozen(x, float))
        object.__setattr__(self, "covariate_names", names)

    @property
    def n(self) -> int:
        return len(self.outcomes)

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    @property
    def n_treated(self) -> int:
        return int(self.treatments.sum())

    @property
    def n_control(self) -> int:
        return self.n - self.n_treated

    def subset(self, index) -> "CausalDataset":
        index = np.asarray(index)
        return CausalDataset(
            self.outcomes[index], self.treatments[index], self.covariates[index], self.covariate_names
        )

    def require_both_arms(self):
        """Raise unless at least one treated and one control record exist."""
        if self.n_treated == 0 or self.n_control == 0:
            raise ValidationError(
                f"dataset needs both arms (treated={self.n_treated}, control={self.n_control})"
            )

    def fingerprint(self) -> str:
        """Stable hash identifying this dataset for the privacy ledger."""
        h = hashlib.sha256()
        for a in (self.outcomes, self.treatments, self.covariates):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()[:16]


# --- schema ---------------------------------------------------------------


@dataclass(frozen=True)
class BinaryRule:
    """How to turn one CSV column into a 0/1 vector.

    With neither ``threshold`` nor ``positive`` the column must already hold
    0/1. ``threshold`` maps numeric values ``>= threshold`` to 1; ``positive``
    maps the listed categories to 1 and everything else to 0.
    """

    column: str
    threshold: Optional[float] = None
    positive: Optional[tuple] = None

    @classmethod
    def from_spec(cls, spec):
        if isinstance(spec, str):
            return cls(spec)
        if "column" not in spec:
            raise SchemaError(f"binary rule without 'column': {spec!r}")
        pos = spec.get("positive")
        return cls(spec["column"], spec.get("threshold"), tuple(pos) if pos is not None else None)

    def apply(self, col: pd.Series, label: str) -> np.ndarray:
        if self.positive is not None:
            return col.str.strip().isin([str(p).strip() for p in self.positive]).to_numpy(np.int8)
        values = _parse_floats(col)
        bad = np.flatnonzero(np.isnan(values))
        if bad.size:
            raise ValidationError(
                f"non-numeric {label} value {col.iloc[bad[0]]!r} at row {bad[0]}", row=int(bad[0])
            )
        if self.threshold is not None:
            return (values >= self.threshold).astype(np.int8)
        bad = np.flatnonzero((values != 0) & (values != 1))
        if bad.size:
            raise ValidationError(
                f"non-binary {label} value {col.iloc[bad[0]]!r} at row {bad[0]}", row=int(bad[0])
            )
        return values.astype(np.int8)


def _parse_floats(col: pd.Series) -> np.ndarray:
    # pandas' fast string parser can be one ulp off; Python's float() is exact
    def conv(text):
        try:
            value = float(text)
        except (TypeError, ValueError):
            return np.nan
        return value if np.isfinite(value) else np.nan

    return np.fromiter((conv(t) for t in col), dtype=float, count=len(col))


@dataclass(frozen=True)
class CovariateRule:
    """One covariate column: ``numeric``, ``onehot`` (drop-first) or ``indicator``."""

    column: str
    kind: str = "numeric"
    positive: Optional[tuple] = None

    @classmethod
    def from_spec(cls, spec):
        if isinstance(spec, str):
            return cls(spec)
        if "column" not in spec:
            raise SchemaError(f"covariate rule without 'column': {spec!r}")
        kind = spec.get("kind", "indicator" if "positive" in spec else "numeric")
        if kind not in ("numeric", "onehot", "indicator"):
            raise SchemaError(f"unknown covariate kind {kind!r}")
        pos = spec.get("positive")
        if kind == "indicator" and pos is None:
            raise SchemaError(f"indicator covariate {spec['column']!r} needs 'positive'")
        return cls(spec["column"], kind, tuple(pos) if pos is not None else None)

    def apply(self, col: pd.Series):
        if self.kind == "numeric":
            values = _parse_floats(col)
            bad = np.flatnonzero(np.isnan(values))
            if bad.size:
                raise ValidationError(
                    f"non-numeric covariate {self.column!r} value {col.iloc[bad[0]]!r} at row {bad[0]}",
                    row=int(bad[0]),
                )
            return values[:, None], [self.column]
        stripped = col.str.strip()
        if self.kind == "indicator":
            pos = [str(p).strip() for p in self.positive]
            return stripped.isin(pos).to_numpy(float)[:, None], [self.column]
        levels = sorted(stripped.unique())
        cols = [(stripped == lev).to_numpy(float) for lev in levels[1:]]
        names = [f"{self.column}={lev}" for lev in levels[1:]]
        if not cols:
            return np.empty((len(col), 0)), []
        return np.column_stack(cols), names


@dataclass(frozen=True)
class Schema:
    """Column mapping from a CSV file onto a :class:`CausalDataset`.

    ``covariates=None`` means every column other than outcome and treatment,
    read as numeric.
    """

    outcome: BinaryRule = field(default_factory=lambda: BinaryRule("y"))
    treatment: BinaryRule = field(default_factory=lambda: BinaryRule("z"))
    covariates: Optional[tuple] = None
    missing_values: tuple = DEFAULT_MISSING

    @classmethod
    def from_dict(cls, d: dict) -> "Schema":
        unknown = set(d) - {"outcome", "treatment", "covariates", "missing_values"}
        if unknown:
            raise SchemaError(f"unknown schema keys: {sorted(unknown)}")
        covs = d.get("covariates")
        return cls(
            outcome=BinaryRule.from_spec(d.get("outcome", "y")),
            treatment=BinaryRule.from_spec(d.get("treatment", "z")),
            covariates=None if covs is None else tuple(CovariateRule.from_spec(c) for c in covs),
            missing_values=tuple(d.get("missing_values", DEFAULT_MISSING)),
        )


def count_records(path) -> int:
    """Number of data rows in a CSV file, without parsing any values."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = sum(1 for row in csv.reader(fh) if row)
    return max(rows - 1, 0)


def load_csv(path, schema: Optional[Schema] = None) -> CausalDataset:
    """Read and validate a CSV file into a :class:`CausalDataset`.

    Rows containing a missing value in any used column are dropped (the
    number dropped is stored on the returned object as ``dropped_rows``);
    row order is otherwise preserved.
    """
    schema = schema or Schema()
    path = Path(path)
    if not path.exists():
        raise InputError(f"no such file: {path}")
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise InputError(f"empty file: {path}") from None
    df.columns = [c.strip() for c in df.columns]
    if len(df) == 0:
        raise InputError(f"no data rows in {path}")

    if schema.covariates is None:
        used = {schema.outcome.column, schema.treatment.column}
        cov_rules = tuple(CovariateRule(c) for c in df.columns if c not in used)
    else:
        cov_rules = schema.covariates
    needed = [schema.outcome.column, schema.treatment.column] + [r.column for r in cov_rules]
    missing_cols = [c for c in needed if c not in df.columns]
    if missing_cols:
        raise SchemaError(f"missing column(s): {missing_cols}")

    missing = {m.strip() for m in schema.missing_values}
    complete = ~df[needed].apply(lambda s: s.str.strip().isin(missing)).any(axis=1)
    dropped = int((~complete).sum())
    df = df[complete].reset_index(drop=True)
    if len(df) == 0:
        raise InputError("no complete rows after removing missing values")

    y = schema.outcome.apply(df[schema.outcome.column], "outcome")
    z = schema.treatment.apply(df[schema.treatment.column], "treatment")
    blocks, names = [], []
    for rule in cov_rules:
        block, block_names = rule.apply(df[rule.column])
        blocks.append(block)
        names.extend(block_names)
    x = np.column_stack(blocks) if blocks else np.empty((len(df), 0))
    data = CausalDataset(y, z, x, tuple(names))
    object.__setattr__(data, "dropped_rows", dropped)
    return data


def write_csv(data: CausalDataset, path, float_format="%.17g"):
    """Write ``data`` back as a y, z, covariates CSV (inverse of the default schema)."""
    df = pd.DataFrame(data.covariates, columns=list(data.covariate_names))
    df.insert(0, "z", data.treatments.astype(int))
    df.insert(0, "y", data.outcomes.astype(int))
    df.to_csv(path, index=False, float_format=float_format)


# --- partitioning ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Partitioning:
    assignments: np.ndarray  # 0-based partition index per record
    M: int

    @property
    def partition_sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.M)

    def indices(self, m: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == m)

    def groups(self):
        order = np.argsort(self.assignments, kind="stable")
        bounds = np.cumsum(self.partition_sizes)[:-1]
        return np.split(order, bounds)

    def to_csv(self, path):
        """Audit export: ``row_index,partition_index`` (partition indices 1..M)."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["row_index", "partition_index"])
            for i, m in enumerate(self.assignments):
                w.writerow([i, int(m) + 1])


def random_partition(data_or_n, M: int, seed=0, rng: Optional[np.random.Generator] = None) -> Partitioning:
    """Split records into ``M`` disjoint groups whose sizes differ by at most one.

    Records are shuffled (Fisher-Yates via ``Generator.permutation``) and the
    shuffled order is cut into contiguous chunks. ``rng`` overrides ``seed``.
    """
    n = data_or_n if isinstance(data_or_n, (int, np.integer)) else data_or_n.n
    if not isinstance(M, (int, np.integer)) or M < 1:
        raise ParameterError(f"M must be a positive integer, got {M!r}")
    if M > n:
        raise ParameterError(f"M={M} exceeds the number of records n={n}")
    rng = rng if rng is not None else stream(seed, "partition")
    order = rng.permutation(n)
    chunks = np.array_split(order, M)
    assignments = np.empty(n, dtype=np.int64)
    for m, idx in enumerate(chunks):
        assignments[idx] = m
    assignments.setflags(write=False)
    return Partitioning(assignments, int(M))


@dataclass(frozen=True, eq=False)
class PartitionHealth:
    treated: np.ndarray
    control: np.ndarray

    @property
    def degenerate_flags(self) -> np.ndarray:
        return (self.treated < 2) | (self.control < 2)

    @property
    def n_degenerate(self) -> int:
        return int(self.degenerate_flags.sum())


def partition_health(data: CausalDataset, parts: Partitioning) -> PartitionHealth:
    if len(parts.assignments) != data.n:
        raise ParameterError("partitioning does not match dataset size")
    treated = np.bincount(parts.assignments, weights=data.treatments, minlength=parts.M).astype(int)
    return PartitionHealth(treated, parts.partition_sizes - treated)

