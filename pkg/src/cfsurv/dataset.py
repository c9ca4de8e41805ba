"""Loading, validating and splitting right-censored observational data."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .exceptions import (
    DimensionMismatch,
    EmptyArm,
    EmptyInput,
    MissingColumn,
    MissingValue,
    NonBinaryIndicator,
    NonFiniteCovariate,
    NonPositiveTime,
)

__all__ = [
    "Observation",
    "RightCensoredSample",
    "CsvSchema",
    "load_csv",
    "split_arms",
    "standardize_covariates",
]


@dataclass(frozen=True)
class Observation:
    time: float
    event: int
    arm: int
    covariates: tuple[float, ...]


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RightCensoredSample:
    """Observed tuples ``(time, event, arm, covariates)``.

    Stored column-wise as read-only numpy arrays. ``covariates`` has shape
    ``(n, p)``. ``dropped_count`` records rows removed in lenient loading.
    """

    time: np.ndarray
    event: np.ndarray
    arm: np.ndarray
    covariates: np.ndarray
    covariate_names: tuple[str, ...] | None = None
    dropped_count: int = 0
    rows: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        time = _frozen(self.time, float).reshape(-1)
        n = time.shape[0]
        event = _frozen(self.event, int).reshape(-1)
        arm = _frozen(self.arm, int).reshape(-1)
        cov = np.asarray(self.covariates, dtype=float)
        if cov.ndim == 1:
            cov = cov.reshape(n, -1) if n else cov.reshape(0, 1)
        cov = _frozen(cov, float)
        if event.shape[0] != n or arm.shape[0] != n or cov.shape[0] != n:
            raise DimensionMismatch("time, event, arm and covariates must have the same length")
        if cov.shape[1] < 1:
            raise DimensionMismatch("at least one covariate is required")
        rows = np.arange(1, n + 1) if self.rows is None else self.rows
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "event", event)
        object.__setattr__(self, "arm", arm)
        object.__setattr__(self, "covariates", cov)
        object.__setattr__(self, "rows", _frozen(rows, int))
        if self.covariate_names is not None:
            names = tuple(self.covariate_names)
            if len(names) != cov.shape[1]:
                raise DimensionMismatch("covariate_names length differs from covariate dimension")
            object.__setattr__(self, "covariate_names", names)
        _validate(self)

    @property
    def size(self) -> int:
        return int(self.time.shape[0])

    def __len__(self):
        return self.size

    @property
    def covariate_dim(self) -> int:
        return int(self.covariates.shape[1])

    @property
    def observations(self) -> list[Observation]:
        return [
            Observation(float(t), int(d), int(z), tuple(float(v) for v in x))
            for t, d, z, x in zip(self.time, self.event, self.arm, self.covariates)
        ]

    @property
    def censoring_fraction(self) -> float:
        if self.size == 0:
            return float("nan")
        return float(1.0 - self.event.mean())

    def subset(self, mask) -> "RightCensoredSample":
        mask = np.asarray(mask)
        return RightCensoredSample(
            time=self.time[mask],
            event=self.event[mask],
            arm=self.arm[mask],
            covariates=self.covariates[mask],
            covariate_names=self.covariate_names,
            rows=self.rows[mask],
        )

    @classmethod
    def from_arrays(cls, time, event, covariates, arm=None, covariate_names=None):
        time = np.asarray(time, dtype=float)
        if arm is None:
            arm = np.zeros(time.shape[0], dtype=int)
        return cls(time=time, event=event, arm=arm, covariates=covariates,
                   covariate_names=covariate_names)


def _validate(sample: RightCensoredSample) -> None:
    for i, t in enumerate(sample.time):
        if not (math.isfinite(t) and t > 0):
            raise NonPositiveTime(int(sample.rows[i]), float(t))
    for name, col in (("event", sample.event), ("arm", sample.arm)):
        bad = np.flatnonzero((col != 0) & (col != 1))
        if bad.size:
            raise NonBinaryIndicator(int(sample.rows[bad[0]]), name, int(col[bad[0]]))
    bad = np.argwhere(~np.isfinite(sample.covariates))
    if bad.size:
        i, j = bad[0]
        label = sample.covariate_names[j] if sample.covariate_names else f"x{j + 1}"
        raise NonFiniteCovariate(int(sample.rows[i]), label, float(sample.covariates[i, j]))


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for :func:`load_csv`.

    ``covariates=None`` means every header column that is not the time,
    event or arm column, in header order.
    """

    time: str = "time"
    event: str = "event"
    arm: str = "arm"
    covariates: Sequence[str] | None = None

    @classmethod
    def coerce(cls, schema) -> "CsvSchema":
        if schema is None:
            return cls()
        if isinstance(schema, CsvSchema):
            return schema
        return cls(**dict(schema))


def _is_missing(cell: str) -> bool:
    return cell.strip().lower() in {"", "na", "null", "none"}


def _parse_float(cell: str):
    try:
        return float(cell)
    except ValueError:
        return None


def _parse_indicator(cell, row, column):
    value = _parse_float(cell)
    if value not in (0.0, 1.0):
        raise NonBinaryIndicator(row, column, cell)
    return int(value)


def load_csv(
    path: str | Path,
    schema: CsvSchema | Mapping[str, object] | None = None,
    *,
    lenient: bool = False,
) -> RightCensoredSample:
    """Read a right-censored sample from a UTF-8 CSV file with a header row.

    Rows with a missing value (empty cell or ``NA``) in a mapped column raise
    :class:`MissingValue` unless ``lenient`` is set, in which case they are
    dropped and counted in ``dropped_count``. Row numbers in error messages
    count data rows from 1.
    """
    schema = CsvSchema.coerce(schema)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyInput(f"{path}: no header row") from None
        records = list(reader)

    for name in (schema.time, schema.event, schema.arm):
        if name not in header:
            raise MissingColumn(name)
    if schema.covariates is None:
        cov_names = [h for h in header if h not in (schema.time, schema.event, schema.arm)]
    else:
        cov_names = list(schema.covariates)
    if not cov_names:
        raise MissingColumn("<covariates>")
    for name in cov_names:
        if name not in header:
            raise MissingColumn(name)

    idx = {h: k for k, h in enumerate(header)}
    mapped = [schema.time, schema.event, schema.arm, *cov_names]
    times, events, arms, covs, rows = [], [], [], [], []
    dropped = 0
    for r, rec in enumerate(records, start=1):
        if not rec or all(not c.strip() for c in rec):
            continue
        cells = {name: (rec[idx[name]] if idx[name] < len(rec) else "") for name in mapped}
        missing = [name for name in mapped if _is_missing(cells[name])]
        if missing:
            if lenient:
                dropped += 1
                continue
            raise MissingValue(r, missing[0])
        t = _parse_float(cells[schema.time])
        if t is None or not math.isfinite(t) or t <= 0:
            raise NonPositiveTime(r, cells[schema.time])
        d = _parse_indicator(cells[schema.event], r, schema.event)
        z = _parse_indicator(cells[schema.arm], r, schema.arm)
        x = []
        for name in cov_names:
            v = _parse_float(cells[name])
            if v is None or not math.isfinite(v):
                raise NonFiniteCovariate(r, name, cells[name])
            x.append(v)
        times.append(t)
        events.append(d)
        arms.append(z)
        covs.append(x)
        rows.append(r)

    p = len(cov_names)
    return RightCensoredSample(
        time=np.array(times, dtype=float),
        event=np.array(events, dtype=int),
        arm=np.array(arms, dtype=int),
        covariates=np.array(covs, dtype=float).reshape(len(times), p),
        covariate_names=tuple(cov_names),
        dropped_count=dropped,
        rows=np.array(rows, dtype=int),
    )


def split_arms(
    sample: RightCensoredSample, require_both: bool = True
) -> tuple[RightCensoredSample, RightCensoredSample]:
    """Partition a sample into (control, treated), preserving row order."""
    if sample.size == 0:
        raise EmptyInput("cannot split an empty sample")
    control = sample.subset(sample.arm == 0)
    treated = sample.subset(sample.arm == 1)
    if require_both:
        if control.size == 0:
            raise EmptyArm(0)
        if treated.size == 0:
            raise EmptyArm(1)
    return control, treated


def standardize_covariates(sample: RightCensoredSample):
    """Center and scale covariates to unit variance using pooled moments.

    Returns the transformed sample together with the ``(mean, scale)`` used.
    Constant columns are centered but left unscaled.
    """
    mean = sample.covariates.mean(axis=0)
    scale = sample.covariates.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    out = RightCensoredSample(
        time=sample.time,
        event=sample.event,
        arm=sample.arm,
        covariates=(sample.covariates - mean) / scale,
        covariate_names=sample.covariate_names,
        dropped_count=sample.dropped_count,
        rows=sample.rows,
    )
    return out, (mean, scale)
