"""Trial data containers and CSV ingestion."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

MIN_PER_ARM = 4


class DataError(ValueError):
    """Raised when trial data fails validation."""


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ArmPair:
    """Two arm labels to compare; ``arm_a`` is coded +1 and ``arm_b`` -1."""

    arm_a: str
    arm_b: str

    def __post_init__(self):
        if self.arm_a == self.arm_b:
            raise DataError(f"arm pair labels must differ, got {self.arm_a!r} twice")


@dataclass(frozen=True)
class DoseEncoding:
    """Mapping from raw dose labels to real treatment values."""

    mapping: Mapping[str, float]

    def __post_init__(self):
        values = list(self.mapping.values())
        if len(set(values)) != len(values):
            raise DataError("dose encoding must be injective")
        for v in values:
            if not math.isfinite(float(v)):
                raise DataError(f"dose value {v!r} is not finite")
        object.__setattr__(self, "mapping", dict((str(k), float(v)) for k, v in self.mapping.items()))

    @classmethod
    def parse(cls, text: str) -> "DoseEncoding":
        """Parse ``"low=-1,mid=0,high=1"``."""
        mapping = {}
        for item in text.split(","):
            if not item.strip():
                continue
            if "=" not in item:
                raise DataError(f"bad dose encoding item {item!r}, expected label=value")
            label, value = item.split("=", 1)
            try:
                mapping[label.strip()] = float(value)
            except ValueError:
                raise DataError(f"dose value {value!r} for {label!r} is not a number") from None
        if not mapping:
            raise DataError("empty dose encoding")
        return cls(mapping)


@dataclass(frozen=True)
class TrialDataset:
    """Per-patient covariates, treatment codes and responses.

    Arrays are copied and made read-only on construction.

    Parameters
    ----------
    covariates : array_like, shape (N, D)
    covariate_names : sequence of str, length D
    treatment : array_like, shape (N,)
        Real-valued treatment codes.
    response : array_like, shape (N,)
    arm_labels : sequence of str, optional
        Original treatment label of each row, used in per-arm reports.
    """

    covariates: np.ndarray
    covariate_names: tuple
    treatment: np.ndarray
    response: np.ndarray
    arm_labels: tuple = field(default=None)

    def __post_init__(self):
        X = _frozen(self.covariates)
        if X.ndim == 1:
            X = _frozen(X.reshape(-1, 1))
        T = _frozen(self.treatment)
        R = _frozen(self.response)
        names = tuple(str(n) for n in self.covariate_names)
        if X.ndim != 2:
            raise DataError("covariates must be a 2-D matrix")
        n = X.shape[0]
        if T.shape != (n,) or R.shape != (n,):
            raise DataError(
                f"length mismatch: covariates have {n} rows, treatment {T.shape}, response {R.shape}"
            )
        if len(names) != X.shape[1]:
            raise DataError(f"{len(names)} covariate names for {X.shape[1]} columns")
        for label, arr in (("covariates", X), ("treatment", T), ("response", R)):
            if not np.all(np.isfinite(arr)):
                raise DataError(f"non-finite values in {label}")
        values, counts = np.unique(T, return_counts=True)
        if len(values) < 2:
            raise DataError("treatment must take at least two distinct values")
        if counts.min() < 2:
            raise DataError(f"treatment value {values[counts.argmin()]!r} appears only once")
        labels = self.arm_labels
        if labels is None:
            labels = tuple(_fmt(t) for t in T)
        else:
            labels = tuple(str(a) for a in labels)
            if len(labels) != n:
                raise DataError("arm_labels length mismatch")
        object.__setattr__(self, "covariates", X)
        object.__setattr__(self, "treatment", T)
        object.__setattr__(self, "response", R)
        object.__setattr__(self, "covariate_names", names)
        object.__setattr__(self, "arm_labels", labels)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def d(self) -> int:
        return self.covariates.shape[1]

    def column(self, j) -> np.ndarray:
        """Covariate column by index or name."""
        if isinstance(j, str):
            j = self.covariate_names.index(j)
        return self.covariates[:, j]

    def to_csv(self, path, treatment_col="treatment", response_col="response", delimiter=",",
               use_labels=False):
        """Write the dataset back out; floats use the shortest round-trip repr."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, delimiter=delimiter)
            w.writerow([treatment_col, response_col, *self.covariate_names])
            for i in range(self.n):
                t = self.arm_labels[i] if use_labels else _fmt(self.treatment[i])
                w.writerow([t, _fmt(self.response[i]), *(_fmt(v) for v in self.covariates[i])])


def _fmt(v) -> str:
    return repr(float(v))


def _parse_float(cell: str, line: int, column: str) -> float:
    text = cell.strip()
    if not text:
        raise DataError(f"line {line}, column {column!r}: empty cell")
    try:
        v = float(text)
    except ValueError:
        raise DataError(f"line {line}, column {column!r}: cannot parse {cell!r} as a number") from None
    if not math.isfinite(v):
        raise DataError(f"line {line}, column {column!r}: non-finite value {cell!r}")
    return v


def ingest_csv(
    path,
    treatment_col: str = "treatment",
    response_col: str = "response",
    covariate_cols: Sequence[str] | None = None,
    arm_pair: ArmPair | None = None,
    dose_encoding: DoseEncoding | None = None,
    delimiter: str = ",",
) -> TrialDataset:
    """Read a trial CSV into a :class:`TrialDataset`.

    Treatment cells are mapped through ``arm_pair`` (+1/-1, other arms
    dropped) or ``dose_encoding`` when given, and parsed as numbers
    otherwise. Every other column not named in ``covariate_cols`` is used as a
    covariate when ``covariate_cols`` is None. Source row order is kept.

    Raises
    ------
    DataError
        Missing columns, unparsable or non-finite cells (with line and
        column), absent arm labels, or fewer than 4 rows in any arm.
    """
    if arm_pair is not None and dose_encoding is not None:
        raise DataError("give either an arm pair or a dose encoding, not both")
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        rows = [(reader.line_num, row) for row in reader if any(c.strip() for c in row)]

    for col in (treatment_col, response_col):
        if col not in header:
            raise DataError(f"missing column {col!r}; header has {header}")
    if covariate_cols is None:
        covariate_cols = [h for h in header if h not in (treatment_col, response_col)]
    missing = [c for c in covariate_cols if c not in header]
    if missing:
        raise DataError(f"missing covariate columns {missing}")
    if not covariate_cols:
        raise DataError("no covariate columns")
    t_idx = header.index(treatment_col)
    r_idx = header.index(response_col)
    c_idx = [header.index(c) for c in covariate_cols]

    raw_labels = []
    for line, row in rows:
        if len(row) != len(header):
            raise DataError(f"line {line}: expected {len(header)} cells, found {len(row)}")
        label = row[t_idx].strip()
        if not label:
            raise DataError(f"line {line}, column {treatment_col!r}: empty cell")
        raw_labels.append(label)

    present = set(raw_labels)
    if arm_pair is not None:
        for arm in (arm_pair.arm_a, arm_pair.arm_b):
            if arm not in present:
                raise DataError(f"arm {arm!r} not found in column {treatment_col!r}; have {sorted(present)}")
        code = {arm_pair.arm_a: 1.0, arm_pair.arm_b: -1.0}
    elif dose_encoding is not None:
        unknown = sorted(present - set(dose_encoding.mapping))
        if unknown:
            raise DataError(f"treatment labels {unknown} missing from dose encoding")
        code = dose_encoding.mapping
    else:
        code = None

    X, T, R, labels = [], [], [], []
    for (line, row), label in zip(rows, raw_labels):
        if code is not None:
            if label not in code:
                continue
            t = code[label]
        else:
            t = _parse_float(label, line, treatment_col)
        R.append(_parse_float(row[r_idx], line, response_col))
        X.append([_parse_float(row[k], line, name) for k, name in zip(c_idx, covariate_cols)])
        T.append(t)
        labels.append(label)

    if not T:
        raise DataError("no rows retained")
    uniq, counts = np.unique(np.array(T), return_counts=True)
    if len(uniq) < 2:
        raise DataError("only one treatment arm present after filtering")
    small = [(labels[T.index(u)], int(c)) for u, c in zip(uniq, counts) if c < MIN_PER_ARM]
    if small:
        raise DataError(f"arms with fewer than {MIN_PER_ARM} rows: {small}")

    return TrialDataset(
        covariates=np.array(X, dtype=float).reshape(len(T), len(covariate_cols)),
        covariate_names=tuple(covariate_cols),
        treatment=np.array(T),
        response=np.array(R),
        arm_labels=tuple(labels),
    )
