"""Regular grids over normalized spec space.

Used twice: to thin training data (pure cells collapse to their center) and to
precompute a Good/Bad/GuardBand attribute per cell for the tester.

Cell membership is half-open, ``[lo, hi)``, except that the last bin of each
dimension is closed.  Points outside the bounds are clamped to the edge cells.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .datamodel import Dataset, LabelVector, pass_mask
from .errors import CellLimitExceeded, DimensionMismatch, GridTooCoarse, UnknownSpecName
from .guardband import GuardBandModel, TriState, classify_codes

__all__ = [
    "DEFAULT_BOUNDS",
    "DEFAULT_CELL_LIMIT",
    "GridSpec",
    "LookupTable",
    "compact_arrays",
    "compact_training_data",
    "build_lookup_table",
    "lut_classify",
    "lut_classify_many",
    "lut_to_text",
    "lut_from_text",
    "save_lut",
    "load_lut",
]

DEFAULT_BOUNDS = (-0.25, 1.25)
DEFAULT_CELL_LIMIT = 1_000_000
_CODE_CHARS = {1: "G", -1: "B", 0: "U"}


@dataclass(frozen=True)
class GridSpec:
    dims: tuple[str, ...]
    bins_per_dim: tuple[int, ...]
    bounds_per_dim: tuple[tuple[float, float], ...]

    def __post_init__(self):
        dims = tuple(self.dims)
        bins = tuple(int(b) for b in self.bins_per_dim)
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds_per_dim)
        if not (len(dims) == len(bins) == len(bounds)):
            raise ValueError("dims, bins_per_dim and bounds_per_dim must have equal length")
        if len(set(dims)) != len(dims):
            raise ValueError("grid dims must be unique")
        if any(b < 1 for b in bins):
            raise ValueError("each dimension needs at least one bin")
        if any(not lo < hi for lo, hi in bounds):
            raise ValueError("grid bounds need lo < hi")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "bins_per_dim", bins)
        object.__setattr__(self, "bounds_per_dim", bounds)

    @classmethod
    def uniform(cls, dims: Sequence[str], bins: int, bounds=DEFAULT_BOUNDS) -> "GridSpec":
        dims = tuple(dims)
        return cls(dims, (bins,) * len(dims), (tuple(bounds),) * len(dims))

    @property
    def n_cells(self) -> int:
        return math.prod(self.bins_per_dim)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.bins_per_dim

    def restrict(self, dims: Sequence[str]) -> "GridSpec":
        """Sub-grid over ``dims`` (in that order)."""
        pos = {d: k for k, d in enumerate(self.dims)}
        try:
            idx = [pos[d] for d in dims]
        except KeyError as exc:
            raise UnknownSpecName(f"grid has no dimension {exc.args[0]!r}") from None
        return GridSpec(
            tuple(dims),
            tuple(self.bins_per_dim[k] for k in idx),
            tuple(self.bounds_per_dim[k] for k in idx),
        )

    def _arrays(self):
        lo = np.array([b[0] for b in self.bounds_per_dim])
        hi = np.array([b[1] for b in self.bounds_per_dim])
        bins = np.array(self.bins_per_dim)
        return lo, hi, bins

    def cell_coords(self, X) -> np.ndarray:
        """Per-dimension bin index of each row of ``X``, shape ``(n, n_dims)``."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != len(self.dims):
            raise DimensionMismatch(f"grid has {len(self.dims)} dims, got {X.shape[1]}")
        lo, hi, bins = self._arrays()
        idx = np.floor((X - lo) / (hi - lo) * bins).astype(np.int64)
        return np.clip(idx, 0, bins - 1)

    def flat_index(self, X) -> np.ndarray:
        return np.ravel_multi_index(self.cell_coords(X).T, self.shape)

    def centers(self, coords) -> np.ndarray:
        lo, hi, bins = self._arrays()
        return lo + (np.asarray(coords) + 0.5) * (hi - lo) / bins

    def all_centers(self) -> np.ndarray:
        """Centers of every cell in row-major order."""
        coords = np.indices(self.shape).reshape(len(self.dims), -1).T
        return self.centers(coords)


def compact_arrays(X, y, grid: GridSpec):
    """Thin ``(X, y)`` on ``grid``; labels ``y`` are ``+1``/``-1``.

    Rows in mixed cells are kept as they are; every pure cell contributes one
    row at its center carrying the cell's label.

    Returns
    -------
    X_out, y_out : ndarray
        Kept rows (original order) followed by cell centers (cell order).
    keep : ndarray of int
        Indices of the kept original rows.
    pure_coords : ndarray of int, shape (n_pure, n_dims)
        Grid coordinates of the collapsed cells.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.shape[0] == 0:
        return X.copy(), y.copy(), np.zeros(0, dtype=int), np.zeros((0, len(grid.dims)), dtype=int)
    coords = grid.cell_coords(X)
    cells, inverse = np.unique(coords, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    n_cells = cells.shape[0]
    n_pos = np.bincount(inverse, weights=(y > 0).astype(float), minlength=n_cells)
    n_all = np.bincount(inverse, minlength=n_cells)
    mixed = (n_pos > 0) & (n_pos < n_all)
    keep = np.flatnonzero(mixed[inverse])
    pure = np.flatnonzero(~mixed)
    pure_labels = np.where(n_pos[pure] > 0, 1, -1).astype(y.dtype)
    X_out = np.vstack([X[keep], grid.centers(cells[pure])])
    y_out = np.concatenate([y[keep], pure_labels])
    return X_out, y_out, keep, cells[pure]


def compact_training_data(ds: Dataset, labels: LabelVector, grid: GridSpec):
    """Grid-compact a normalized dataset against its labels.

    Synthetic rows sit at the cell center in the grid dimensions; columns
    outside the grid take the mean of the merged rows.  Their labels are the
    cell labels.  A :class:`GridTooCoarse` warning is issued if re-labeling a
    synthetic row from its own values would disagree with its cell.

    Returns
    -------
    (Dataset, LabelVector)
    """
    if not ds.normalized:
        raise ValueError("grid compaction requires a normalized dataset")
    if len(labels) != len(ds):
        raise ValueError("labels do not match the dataset")
    grid_idx = ds.indices(grid.dims)
    X = ds.values[:, grid_idx]
    if len(ds) == 0:
        return ds, labels
    X_out, y_out, keep, pure_coords = compact_arrays(X, labels.signs, grid)

    all_coords = grid.cell_coords(X)
    synth = np.empty((len(pure_coords), len(ds.specs)))
    for r, cell in enumerate(pure_coords):
        members = np.all(all_coords == cell, axis=1)
        synth[r] = ds.values[members].mean(axis=0)
    synth[:, grid_idx] = X_out[len(keep):]
    synth_ids = ["cell:" + "-".join(str(int(c)) for c in cell) for cell in pure_coords]
    out = Dataset(
        ds.specs,
        [ds.ids[k] for k in keep] + synth_ids,
        np.vstack([ds.values[keep], synth]),
        normalized=True,
    )
    out_labels = LabelVector(labels.subset, y_out > 0)

    relabeled = pass_mask(out, sorted(labels.subset))
    if np.any(relabeled != out_labels.passed):
        n_bad = int(np.sum(relabeled != out_labels.passed))
        warnings.warn(
            f"{n_bad} merged cell(s) straddle an acceptability bound; their centers re-label differently",
            GridTooCoarse,
            stacklevel=2,
        )
    return out, out_labels


@dataclass(frozen=True)
class LookupTable:
    """Row-major string of cell attributes (``G``, ``B``, ``U``) over a grid."""

    grid: GridSpec
    attributes: str

    def __post_init__(self):
        if len(self.attributes) != self.grid.n_cells:
            raise ValueError(f"{len(self.attributes)} attributes for {self.grid.n_cells} cells")
        if set(self.attributes) - {"G", "B", "U"}:
            raise ValueError("attributes must be drawn from G, B, U")

    def histogram(self) -> dict:
        return {ch: self.attributes.count(ch) for ch in "GBU"}


def build_lookup_table(gb: GuardBandModel, grid: GridSpec, cell_limit: int = DEFAULT_CELL_LIMIT) -> LookupTable:
    if tuple(grid.dims) != tuple(gb.retained_specs):
        raise ValueError(f"grid dims {grid.dims} must equal the model's retained specs {gb.retained_specs}")
    if grid.n_cells > cell_limit:
        raise CellLimitExceeded(grid.n_cells, cell_limit)
    codes = classify_codes(gb, grid.all_centers())
    return LookupTable(grid, "".join(_CODE_CHARS[int(c)] for c in codes))


def lut_classify_many(lut: LookupTable, X) -> list[TriState]:
    flat = lut.grid.flat_index(X)
    return [TriState.from_code(lut.attributes[k]) for k in flat]


def lut_classify(lut: LookupTable, x) -> TriState:
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != len(lut.grid.dims):
        raise DimensionMismatch(f"table has {len(lut.grid.dims)} dims, got {x.shape[0]}")
    return lut_classify_many(lut, x[None, :])[0]


def lut_to_text(lut: LookupTable, width: int = 80) -> str:
    g = lut.grid
    lines = [str(len(g.dims))]
    for name, (lo, hi), bins in zip(g.dims, g.bounds_per_dim, g.bins_per_dim):
        if not name or any(ch.isspace() for ch in name):
            raise ValueError(f"dimension name {name!r} cannot be written to a table file")
        lines.append(f"{name} {lo!r} {hi!r} {bins}")
    a = lut.attributes
    lines.extend(a[k : k + width] for k in range(0, len(a), width))
    return "\n".join(lines) + "\n"


def lut_from_text(text: str) -> LookupTable:
    lines = text.splitlines()
    try:
        n = int(lines[0])
        dims, bins, bounds = [], [], []
        for line in lines[1 : n + 1]:
            name, lo, hi, b = line.split()
            dims.append(name)
            bounds.append((float(lo), float(hi)))
            bins.append(int(b))
    except (IndexError, ValueError) as exc:
        raise ValueError(f"malformed lookup table header: {exc}") from None
    if len(dims) != n:
        raise ValueError("lookup table header is truncated")
    return LookupTable(GridSpec(dims, bins, bounds), "".join(l.strip() for l in lines[n + 1 :]))


def save_lut(lut: LookupTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(lut_to_text(lut))


def load_lut(path) -> LookupTable:
    with open(path, encoding="utf-8") as fh:
        return lut_from_text(fh.read())
