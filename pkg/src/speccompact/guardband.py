"""Dual-model guard banding.

Two classifiers see the same retained-spec features but learn from labels
computed with perturbed acceptability ranges on the eliminated specs: the
*tight* model uses ranges shrunk by ``delta`` on each side (normalized units),
the *loose* model ranges widened by ``delta``.  Where they agree the verdict
is confident; where they disagree the device lands in the guard band.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import svc
from .datamodel import Dataset, label_pass_fail
from .errors import DegenerateLabels, DimensionMismatch, EmptyRetainedSet, InvariantViolation
from .seeding import derive_seed

__all__ = [
    "TriState",
    "GuardBandModel",
    "train_guard_band",
    "classify",
    "classify_many",
    "guard_band_to_json",
    "guard_band_from_json",
    "save_guard_band",
    "load_guard_band",
]


class TriState(enum.Enum):
    GOOD = "G"
    BAD = "B"
    GUARD_BAND = "U"

    @property
    def code(self) -> str:
        return self.value

    @property
    def label(self) -> str:
        return {"G": "Good", "B": "Bad", "U": "GuardBand"}[self.value]

    @classmethod
    def from_code(cls, ch: str) -> "TriState":
        return cls(ch)


# integer codes used by the vectorized paths
GOOD, BAD, GUARD = 1, -1, 0
_TO_STATE = {GOOD: TriState.GOOD, BAD: TriState.BAD, GUARD: TriState.GUARD_BAND}


def states_from_codes(codes) -> list[TriState]:
    return [_TO_STATE[int(c)] for c in codes]


@dataclass(frozen=True)
class GuardBandModel:
    tight: svc.SvcModel
    loose: svc.SvcModel
    delta: float
    retained_specs: tuple[str, ...]
    eliminated_specs: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "retained_specs", tuple(self.retained_specs))
        object.__setattr__(self, "eliminated_specs", tuple(self.eliminated_specs))
        if self.tight.kernel != self.loose.kernel:
            raise ValueError("tight and loose models must share a kernel")
        dim = len(self.retained_specs)
        if self.tight.n_features != dim or self.loose.n_features != dim:
            raise ValueError("sub-model input dimension must equal the retained spec count")

    @property
    def n_features(self) -> int:
        return len(self.retained_specs)


def guard_band_labels(train: Dataset, eliminated: Sequence[str], delta: float):
    """Tight and loose ``+1/-1`` labels for the eliminated specs."""
    tight = label_pass_fail(train, eliminated, widen=-delta).passed
    loose = label_pass_fail(train, eliminated, widen=delta).passed
    if np.any(tight & ~loose):
        raise InvariantViolation("a tight-range Pass is a loose-range Fail")
    return np.where(tight, 1, -1), np.where(loose, 1, -1)


def train_guard_band(
    train: Dataset,
    retained: Sequence[str],
    eliminated: Sequence[str],
    delta: float,
    hp: svc.Hyperparams = svc.Hyperparams(),
    seed: int = 0,
    grid=None,
) -> GuardBandModel:
    """Fit the tight/loose model pair on a normalized training set.

    If ``grid`` (a :class:`~speccompact.grid.GridSpec` covering the retained
    specs) is given, each side's training set is grid-compacted against that
    side's own labels before fitting.

    Raises
    ------
    EmptyRetainedSet
        If ``retained`` is empty.
    DegenerateLabels
        If either perturbed labeling has a single class; ``side`` names which.
    """
    retained = list(retained)
    eliminated = list(eliminated)
    if not retained:
        raise EmptyRetainedSet("guard-band model needs at least one retained spec")
    if set(retained) & set(eliminated):
        raise ValueError("retained and eliminated specs overlap")
    if not eliminated:
        raise ValueError("no eliminated specs to predict")
    if delta < 0:
        raise ValueError("delta must be >= 0")
    if not train.normalized:
        raise ValueError("guard-band training requires a normalized dataset")

    X = train.columns(retained)
    y_tight, y_loose = guard_band_labels(train, eliminated, delta)
    if grid is not None:
        from .grid import compact_arrays

        grid = grid.restrict(retained)
    models = {}
    for side, y in (("tight", y_tight), ("loose", y_loose)):
        Xs = X
        if grid is not None:
            Xs, y, _, _ = compact_arrays(X, y, grid)
        try:
            models[side] = svc.train_svc(Xs, y, hp, seed=derive_seed(seed, "guardband", side))
        except DegenerateLabels as exc:
            raise DegenerateLabels(str(exc), side=side) from None
    return GuardBandModel(models["tight"], models["loose"], float(delta), retained, eliminated)


def classify_codes(gb: GuardBandModel, X) -> np.ndarray:
    """Vectorized classification returning 1 (Good), -1 (Bad) or 0 (GuardBand)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != gb.n_features:
        raise DimensionMismatch(f"expected {gb.n_features} retained-spec values, got {X.shape[1]}")
    t = svc.predict_many(gb.tight, X)
    lo = svc.predict_many(gb.loose, X)
    return np.where(t == lo, t, GUARD)


def classify_many(gb: GuardBandModel, X) -> list[TriState]:
    return states_from_codes(classify_codes(gb, X))


def classify(gb: GuardBandModel, x) -> TriState:
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != gb.n_features:
        raise DimensionMismatch(f"expected {gb.n_features} retained-spec values, got {x.shape[0]}")
    return _TO_STATE[int(classify_codes(gb, x[None, :])[0])]


def guard_band_to_json(gb: GuardBandModel) -> dict:
    return {
        "delta": gb.delta,
        "retained_specs": list(gb.retained_specs),
        "eliminated_specs": list(gb.eliminated_specs),
        "tight": svc.model_to_json(gb.tight),
        "loose": svc.model_to_json(gb.loose),
    }


def guard_band_from_json(obj: dict) -> GuardBandModel:
    return GuardBandModel(
        tight=svc.model_from_json(obj["tight"]),
        loose=svc.model_from_json(obj["loose"]),
        delta=float(obj["delta"]),
        retained_specs=tuple(obj["retained_specs"]),
        eliminated_specs=tuple(obj["eliminated_specs"]),
    )


def save_guard_band(gb: GuardBandModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(guard_band_to_json(gb), fh)
        fh.write("\n")


def load_guard_band(path) -> GuardBandModel:
    with open(path, encoding="utf-8") as fh:
        return guard_band_from_json(json.load(fh))
