"""Specifications, device populations, normalization and pass/fail labeling.

A :class:`Dataset` holds one row per device and one column per specification.
Rows are stored as a read-only ``(n_records, n_specs)`` float array; the
per-record :class:`DeviceRecord` view exists for callers that want it.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    AlreadyNormalized,
    DuplicateId,
    EmptyDataset,
    InvalidSpec,
    MissingColumn,
    NonNumericValue,
    UnknownSpecName,
)
from .seeding import rng_for

__all__ = [
    "SpecificationDef",
    "DeviceRecord",
    "Dataset",
    "LabelVector",
    "load_specs",
    "save_specs",
    "load_dataset",
    "save_dataset",
    "normalize",
    "denormalize",
    "label_pass_fail",
    "split",
]


@dataclass(frozen=True)
class SpecificationDef:
    """One specification and its acceptability range.

    ``test_cost`` is the cost of one application of the test, in arbitrary
    currency units.
    """

    name: str
    unit: str
    nominal: float
    range_lo: float
    range_hi: float
    test_cost: float = 1.0

    def __post_init__(self):
        if not self.name:
            raise InvalidSpec("specification name must be non-empty")
        for attr in ("nominal", "range_lo", "range_hi", "test_cost"):
            if not math.isfinite(getattr(self, attr)):
                raise InvalidSpec(f"{self.name}: {attr} must be finite")
        if not self.range_lo < self.range_hi:
            raise InvalidSpec(f"{self.name}: range_lo must be < range_hi")
        if not self.range_lo <= self.nominal <= self.range_hi:
            raise InvalidSpec(f"{self.name}: nominal {self.nominal} outside range")
        if self.test_cost < 0:
            raise InvalidSpec(f"{self.name}: test_cost must be nonnegative")

    @property
    def width(self) -> float:
        return self.range_hi - self.range_lo

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "unit": self.unit,
            "nominal": self.nominal,
            "lo": self.range_lo,
            "hi": self.range_hi,
            "cost": self.test_cost,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SpecificationDef":
        try:
            return cls(
                name=str(obj["name"]),
                unit=str(obj.get("unit", "")),
                nominal=float(obj["nominal"]),
                range_lo=float(obj["lo"]),
                range_hi=float(obj["hi"]),
                test_cost=float(obj.get("cost", 1.0)),
            )
        except KeyError as exc:
            raise InvalidSpec(f"specification entry missing field {exc.args[0]!r}") from None


def _check_unique_names(specs: Sequence[SpecificationDef]):
    seen = set()
    for s in specs:
        if s.name in seen:
            raise InvalidSpec(f"duplicate specification name {s.name!r}")
        seen.add(s.name)


def load_specs(path) -> list[SpecificationDef]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise InvalidSpec("specification file must hold a JSON array")
    specs = [SpecificationDef.from_json(obj) for obj in data]
    _check_unique_names(specs)
    return specs


def save_specs(specs: Sequence[SpecificationDef], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([s.to_json() for s in specs], fh, indent=2)
        fh.write("\n")


@dataclass(frozen=True)
class DeviceRecord:
    id: str
    values: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class Dataset:
    """An immutable population of measured devices.

    Parameters
    ----------
    specs : sequence of SpecificationDef
        Column definitions, in column order.
    ids : sequence of str
        One unique identifier per record.
    values : array_like, shape (n_records, n_specs)
        Measured (or normalized) specification values.
    normalized : bool
        True once :func:`normalize` has been applied.
    """

    specs: tuple[SpecificationDef, ...]
    ids: tuple[str, ...]
    values: np.ndarray
    normalized: bool = False
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        specs = tuple(self.specs)
        _check_unique_names(specs)
        ids = tuple(str(i) for i in self.ids)
        values = np.array(self.values, dtype=float, copy=True)
        if values.size == 0:
            values = values.reshape(len(ids), len(specs))
        if values.ndim != 2 or values.shape != (len(ids), len(specs)):
            raise ValueError(
                f"values shape {values.shape} does not match "
                f"{len(ids)} records x {len(specs)} specs"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("dataset values must be finite")
        if len(set(ids)) != len(ids):
            raise DuplicateId("record ids must be unique")
        values.setflags(write=False)
        object.__setattr__(self, "specs", specs)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_index", {s.name: k for k, s in enumerate(specs)})

    def __len__(self):
        return len(self.ids)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.specs == other.specs
            and self.ids == other.ids
            and self.normalized == other.normalized
            and np.array_equal(self.values, other.values)
        )

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.specs]

    @property
    def records(self) -> list[DeviceRecord]:
        return [DeviceRecord(i, tuple(row.tolist())) for i, row in zip(self.ids, self.values)]

    def spec(self, name: str) -> SpecificationDef:
        return self.specs[self.index(name)]

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownSpecName(f"unknown specification {name!r}") from None

    def indices(self, names: Iterable[str]) -> list[int]:
        return [self.index(n) for n in names]

    def columns(self, names: Iterable[str]) -> np.ndarray:
        """Values of the named specs, shape ``(n_records, len(names))``."""
        return self.values[:, self.indices(names)]

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=int)
        return Dataset(self.specs, [self.ids[r] for r in rows], self.values[rows], self.normalized)

    def head(self, n: int) -> "Dataset":
        return self.take(np.arange(min(n, len(self))))

    def select(self, names: Sequence[str]) -> "Dataset":
        """Dataset restricted to the named spec columns, in the given order."""
        idx = self.indices(names)
        return Dataset([self.specs[k] for k in idx], self.ids, self.values[:, idx], self.normalized)


def load_dataset(path, specs: Sequence[SpecificationDef], strict: bool = True) -> Dataset:
    """Read a CSV population file whose header is ``id,<spec1>,<spec2>,...``.

    With ``strict=False`` the spec columns may appear in any order and extra
    columns are ignored; every spec in ``specs`` must still be present.
    """
    specs = list(specs)
    names = [s.name for s in specs]
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MissingColumn(f"{path}: empty file, expected header") from None
        if not header or header[0] != "id":
            raise MissingColumn(f"{path}: first column must be 'id'")
        missing = [n for n in names if n not in header[1:]]
        if missing:
            raise MissingColumn(f"{path}: header mismatch, missing {missing}")
        if strict and header[1:] != names:
            raise MissingColumn(f"{path}: header mismatch, expected order {names}, got {header[1:]}")
        cols = [header.index(n) for n in names]

        ids, rows, seen = [], [], set()
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            rid = row[0].strip()
            if len(row) != len(header):
                raise MissingColumn(
                    f"{path}:{line_no}: row {rid} has {len(row)} cells, expected {len(header)}"
                )
            if rid in seen:
                raise DuplicateId(f"{path}:{line_no}: duplicate id {rid!r}")
            seen.add(rid)
            vals = []
            for col, cell in zip(names, (row[k] for k in cols)):
                try:
                    v = float(cell)
                except ValueError:
                    raise NonNumericValue(rid, col, cell) from None
                if not math.isfinite(v):
                    raise NonNumericValue(rid, col, cell)
                vals.append(v)
            ids.append(rid)
            rows.append(vals)
    values = np.array(rows, dtype=float).reshape(len(rows), len(specs))
    return Dataset(specs, ids, values, normalized=False)


def save_dataset(ds: Dataset, path) -> None:
    """Write ``ds`` as CSV; floats use shortest round-trip formatting."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id"] + ds.names)
        for rid, row in zip(ds.ids, ds.values):
            writer.writerow([rid] + [repr(float(v)) for v in row])


def _bounds(specs) -> tuple[np.ndarray, np.ndarray]:
    lo = np.array([s.range_lo for s in specs], dtype=float)
    hi = np.array([s.range_hi for s in specs], dtype=float)
    return lo, hi


def normalize_values(specs: Sequence[SpecificationDef], values) -> np.ndarray:
    """Map each column affinely so its range becomes [0, 1].

    Out-of-range raw values stay strictly outside [0, 1] even when the
    subtraction rounds them onto a bound, so pass/fail labels survive.
    """
    lo, hi = _bounds(specs)
    values = np.asarray(values, dtype=float)
    out = (values - lo) / (hi - lo)
    out = np.where((values > hi) & (out <= 1.0), np.nextafter(1.0, 2.0), out)
    out = np.where((values < lo) & (out >= 0.0), np.nextafter(0.0, -1.0), out)
    return out


def denormalize_values(specs: Sequence[SpecificationDef], values) -> np.ndarray:
    lo, hi = _bounds(specs)
    return np.asarray(values, dtype=float) * (hi - lo) + lo


def normalize(ds: Dataset) -> Dataset:
    if ds.normalized:
        raise AlreadyNormalized("dataset is already normalized")
    return Dataset(ds.specs, ds.ids, normalize_values(ds.specs, ds.values), normalized=True)


def denormalize(ds: Dataset) -> Dataset:
    if not ds.normalized:
        raise ValueError("dataset is not normalized")
    return Dataset(ds.specs, ds.ids, denormalize_values(ds.specs, ds.values), normalized=False)


@dataclass(frozen=True, eq=False)
class LabelVector:
    """Pass/fail outcome of every record against a subset of specifications.

    ``passed[k]`` is True when record ``k`` passes; :attr:`signs` gives the
    same information as +1 (Pass) / -1 (Fail).
    """

    subset: frozenset
    passed: np.ndarray

    def __post_init__(self):
        passed = np.array(self.passed, dtype=bool, copy=True)
        passed.setflags(write=False)
        object.__setattr__(self, "subset", frozenset(self.subset))
        object.__setattr__(self, "passed", passed)

    def __len__(self):
        return len(self.passed)

    @property
    def signs(self) -> np.ndarray:
        return np.where(self.passed, 1, -1)

    @property
    def yield_fraction(self) -> float:
        return float(self.passed.mean()) if len(self.passed) else float("nan")


def pass_mask(ds: Dataset, names: Iterable[str], widen: float = 0.0) -> np.ndarray:
    """Boolean Pass mask over ``names``; see :func:`label_pass_fail`."""
    idx = ds.indices(names)
    if not idx:
        return np.ones(len(ds), dtype=bool)
    vals = ds.values[:, idx]
    if ds.normalized:
        lo = np.full(len(idx), -widen)
        hi = np.full(len(idx), 1.0 + widen)
    else:
        lo, hi = _bounds([ds.specs[k] for k in idx])
        w = hi - lo
        lo, hi = lo - widen * w, hi + widen * w
    return np.all((vals >= lo) & (vals <= hi), axis=1)


def label_pass_fail(ds: Dataset, subset: Iterable[str], widen: float = 0.0) -> LabelVector:
    """Label each record Pass iff every spec in ``subset`` lies in its range.

    Ranges are closed.  On a normalized dataset the range of every spec is
    [0, 1].  ``widen`` moves both bounds outward by that fraction of the range
    width (negative values shrink the range); it is how the guard-band models
    obtain their perturbed labels.
    """
    subset = list(subset)
    for name in subset:
        ds.index(name)
    return LabelVector(frozenset(subset), pass_mask(ds, subset, widen))


def split(ds: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded random partition into ``(first, rest)``.

    ``first`` receives ``round(fraction * len(ds))`` records.  Both parts keep
    the original relative record order.
    """
    if len(ds) == 0:
        raise EmptyDataset("cannot split an empty dataset")
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    perm = rng_for(seed, "split").permutation(len(ds))
    k = int(round(fraction * len(ds)))
    first = np.sort(perm[:k])
    rest = np.sort(perm[k:])
    return ds.take(first), ds.take(rest)
