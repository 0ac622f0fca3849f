"""Greedy specification-test elimination.

Candidates are examined once each, in a configured order.  A candidate is
tentatively removed from the retained tests and a guard-band model is trained
to predict the joint pass/fail of everything eliminated so far (the candidate
included) from the retained tests.  If the held-out prediction error is at
most ``e_T`` the elimination sticks; otherwise the test goes back.

Percentages are over all evaluated devices.  Devices in the guard band count
toward ``guard_pct`` only, never toward yield loss, defect escape or ``e_p``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence, Union

import numpy as np

from . import svc
from .datamodel import Dataset, LabelVector, label_pass_fail, split
from .errors import DegenerateLabels, EmptyRetainedSet, InvalidConfig, InvalidCounts, LengthMismatch, UnknownSpecName
from .grid import GridSpec
from .guardband import BAD, GOOD, GUARD, GuardBandModel, TriState, classify_codes, guard_band_to_json, train_guard_band
from .seeding import derive_seed

__all__ = [
    "FixedList",
    "MarginalScore",
    "CompactionConfig",
    "Metrics",
    "StepMetrics",
    "CompactionResult",
    "CostReport",
    "order_tests",
    "evaluate_candidate",
    "compact",
    "compute_metrics",
    "cost_savings",
    "steps_to_csv",
    "report_to_json",
]


@dataclass(frozen=True)
class FixedList:
    """Examine exactly these specs, in this order."""

    names: tuple[str, ...]

    def __post_init__(self):
        names = tuple(self.names)
        if len(set(names)) != len(names):
            raise InvalidConfig("fixed ordering lists a spec twice")
        object.__setattr__(self, "names", names)


@dataclass(frozen=True)
class MarginalScore:
    """Order specs by how well the other specs predict each one's pass/fail.

    Each spec gets a plain classifier trained on ``1 - holdout`` of the
    training set and scored on the rest; lowest held-out error goes first.
    ``max_train`` caps the scoring set size to bound runtime.
    """

    holdout: float = 0.3
    max_train: Optional[int] = 2000


Ordering = Union[FixedList, MarginalScore]


@dataclass(frozen=True)
class CompactionConfig:
    e_T: float = 0.02
    delta: float = 0.01
    hp: svc.Hyperparams = field(default_factory=svc.Hyperparams)
    ordering: Ordering = field(default_factory=MarginalScore)
    grid: Optional[GridSpec] = None
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.e_T <= 1.0:
            raise InvalidConfig("e_T must lie in [0, 1]")
        if not self.delta >= 0:
            raise InvalidConfig("delta must be >= 0")

    def to_json(self) -> dict:
        if isinstance(self.ordering, FixedList):
            ordering = {"strategy": "fixed", "names": list(self.ordering.names)}
        else:
            ordering = {"strategy": "marginal", "holdout": self.ordering.holdout, "max_train": self.ordering.max_train}
        grid = None
        if self.grid is not None:
            grid = {
                "dims": list(self.grid.dims),
                "bins": list(self.grid.bins_per_dim),
                "bounds": [list(b) for b in self.grid.bounds_per_dim],
            }
        return {
            "e_T": self.e_T,
            "delta": self.delta,
            "hp": self.hp.to_json(),
            "ordering": ordering,
            "grid": grid,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CompactionConfig":
        try:
            o = obj.get("ordering") or {"strategy": "marginal"}
            if o.get("strategy") == "fixed":
                ordering = FixedList(tuple(o["names"]))
            elif o.get("strategy", "marginal") == "marginal":
                ordering = MarginalScore(float(o.get("holdout", 0.3)), o.get("max_train", 2000))
            else:
                raise InvalidConfig(f"unknown ordering strategy {o.get('strategy')!r}")
            g = obj.get("grid")
            grid = None
            if g is not None:
                grid = GridSpec(tuple(g["dims"]), tuple(g["bins"]), tuple(tuple(b) for b in g["bounds"]))
            return cls(
                e_T=float(obj.get("e_T", 0.02)),
                delta=float(obj.get("delta", 0.01)),
                hp=svc.Hyperparams.from_json(obj.get("hp") or {}),
                ordering=ordering,
                grid=grid,
                seed=int(obj.get("seed", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidConfig):
                raise
            raise InvalidConfig(f"bad compaction config: {exc}") from None


@dataclass(frozen=True)
class Metrics:
    """Confusion counts of tri-state predictions against true pass/fail."""

    n: int
    n_good_correct: int
    n_bad_correct: int
    n_yield_loss: int
    n_defect_escape: int
    n_guard: int

    @property
    def n_confident_correct(self) -> int:
        return self.n_good_correct + self.n_bad_correct

    @property
    def n_confident_wrong(self) -> int:
        return self.n_yield_loss + self.n_defect_escape

    def _pct(self, k):
        return 100.0 * k / self.n if self.n else 0.0

    @property
    def yield_loss_pct(self) -> float:
        return self._pct(self.n_yield_loss)

    @property
    def defect_escape_pct(self) -> float:
        return self._pct(self.n_defect_escape)

    @property
    def guard_pct(self) -> float:
        return self._pct(self.n_guard)

    @property
    def e_p(self) -> float:
        return self.n_confident_wrong / self.n if self.n else 0.0

    def summary(self) -> str:
        return f"DE {self.defect_escape_pct:.1f}% YL {self.yield_loss_pct:.1f}% GB {self.guard_pct:.1f}%"


def _as_codes(predictions) -> np.ndarray:
    if isinstance(predictions, np.ndarray) and predictions.dtype != object:
        return predictions.astype(int)
    lookup = {TriState.GOOD: GOOD, TriState.BAD: BAD, TriState.GUARD_BAND: GUARD}
    return np.array([lookup[p] for p in predictions], dtype=int)


def compute_metrics(truth, predictions) -> Metrics:
    """Count yield loss, defect escape and guard-band predictions.

    Parameters
    ----------
    truth : LabelVector or array of bool
        True pass/fail with respect to the eliminated specs.
    predictions : sequence of TriState, or int codes (1 Good, -1 Bad, 0 guard)
    """
    passed = truth.passed if isinstance(truth, LabelVector) else np.asarray(truth, dtype=bool)
    codes = _as_codes(predictions)
    if passed.shape[0] != codes.shape[0]:
        raise LengthMismatch(f"{passed.shape[0]} truth labels vs {codes.shape[0]} predictions")
    return Metrics(
        n=int(passed.shape[0]),
        n_good_correct=int(np.sum(passed & (codes == GOOD))),
        n_bad_correct=int(np.sum(~passed & (codes == BAD))),
        n_yield_loss=int(np.sum(passed & (codes == BAD))),
        n_defect_escape=int(np.sum(~passed & (codes == GOOD))),
        n_guard=int(np.sum(codes == GUARD)),
    )


@dataclass(frozen=True)
class StepMetrics:
    candidate: str
    e_p: float
    yield_loss_pct: float
    defect_escape_pct: float
    guard_pct: float
    accepted: bool
    n_features: int
    metrics: Optional[Metrics] = None
    note: str = ""

    def to_json(self) -> dict:
        out = {
            "candidate": self.candidate,
            "e_p": None if math.isnan(self.e_p) else self.e_p,
            "yield_loss_pct": None if math.isnan(self.yield_loss_pct) else self.yield_loss_pct,
            "defect_escape_pct": None if math.isnan(self.defect_escape_pct) else self.defect_escape_pct,
            "guard_pct": None if math.isnan(self.guard_pct) else self.guard_pct,
            "accepted": self.accepted,
            "n_features": self.n_features,
            "note": self.note,
        }
        if self.metrics is not None:
            out["counts"] = asdict(self.metrics)
        return out


def _skipped(candidate, n_features, note) -> StepMetrics:
    nan = float("nan")
    return StepMetrics(candidate, nan, nan, nan, nan, False, n_features, None, note)


@dataclass(frozen=True)
class CompactionResult:
    retained: tuple[str, ...]
    eliminated: tuple[str, ...]
    final_model: Optional[GuardBandModel]
    history: tuple[StepMetrics, ...]
    order: tuple[str, ...] = ()

    @property
    def final_step(self) -> Optional[StepMetrics]:
        accepted = [h for h in self.history if h.accepted]
        return accepted[-1] if accepted else None


def _single_spec_error(train: Dataset, name: str, hp, holdout, seed) -> float:
    others = [n for n in train.names if n != name]
    fit, held = split(train, 1.0 - holdout, derive_seed(seed, "order", name))
    y_fit = label_pass_fail(fit, [name]).signs
    y_held = label_pass_fail(held, [name]).signs
    if np.all(y_fit == y_fit[0]):
        return float(np.mean(y_held != y_fit[0]))
    if not others:
        return float(np.mean(y_held != 1))
    model = svc.train_svc(fit.columns(others), y_fit, hp, seed=derive_seed(seed, "order", name))
    return float(np.mean(svc.predict_many(model, held.columns(others)) != y_held))


def order_tests(train: Dataset, strategy: Ordering, hp: svc.Hyperparams = None, seed: int = 0) -> list[str]:
    """Candidate order for :func:`compact`.

    ``FixedList`` is returned verbatim after validation.  ``MarginalScore``
    sorts specs by the held-out error of predicting each spec's own
    pass/fail from all other specs; ties keep spec-list order.
    """
    if isinstance(strategy, FixedList):
        for n in strategy.names:
            if n not in train.names:
                raise UnknownSpecName(f"ordering names unknown spec {n!r}")
        return list(strategy.names)
    hp = hp or svc.Hyperparams()
    data = train
    if strategy.max_train is not None and len(train) > strategy.max_train:
        data = train.head(strategy.max_train)
    scores = [_single_spec_error(data, n, hp, strategy.holdout, seed) for n in train.names]
    order = sorted(range(len(scores)), key=lambda k: (scores[k], k))
    return [train.names[k] for k in order]


def evaluate_candidate(
    train: Dataset,
    test: Dataset,
    retained: Sequence[str],
    s_red: Sequence[str],
    cfg: CompactionConfig,
) -> tuple[GuardBandModel, StepMetrics]:
    """Train the guard-band model for ``s_red`` and score it on ``test``.

    The last entry of ``s_red`` is reported as the candidate.
    """
    retained = list(retained)
    s_red = list(s_red)
    if not retained:
        raise EmptyRetainedSet("no retained specs left to predict from")
    if not s_red:
        raise ValueError("s_red must name at least one spec")
    if not (train.normalized and test.normalized):
        raise ValueError("evaluate_candidate requires normalized datasets")
    candidate = s_red[-1]
    gb = train_guard_band(
        train,
        retained,
        s_red,
        cfg.delta,
        cfg.hp,
        seed=derive_seed(cfg.seed, "step", *s_red),
        grid=cfg.grid,
    )
    codes = classify_codes(gb, test.columns(retained))
    m = compute_metrics(label_pass_fail(test, s_red), codes)
    step = StepMetrics(
        candidate=candidate,
        e_p=m.e_p,
        yield_loss_pct=m.yield_loss_pct,
        defect_escape_pct=m.defect_escape_pct,
        guard_pct=m.guard_pct,
        accepted=m.e_p <= cfg.e_T,
        n_features=len(retained),
        metrics=m,
    )
    return gb, step


def compact(train: Dataset, test: Dataset, cfg: CompactionConfig, on_step=None) -> CompactionResult:
    """Run the greedy elimination loop; see the module docstring.

    A candidate whose training labels collapse to one class (for the nominal
    or either perturbed range) cannot be modelled and is kept.  The last
    remaining test is never eliminated.  ``on_step``, if given, is called
    with each :class:`StepMetrics` as soon as it is known.
    """
    if train.names != test.names:
        raise ValueError("train and test datasets must share the spec set")
    if not (train.normalized and test.normalized):
        raise ValueError("compact requires normalized datasets")
    order = order_tests(train, cfg.ordering, cfg.hp, cfg.seed)
    retained = list(train.names)
    eliminated: list[str] = []
    final_model = None
    history = []
    for cand in order:
        trial = [n for n in retained if n != cand]
        if not trial:
            history.append(_skipped(cand, 0, "last remaining test"))
            if on_step is not None:
                on_step(history[-1])
            continue
        try:
            gb, step = evaluate_candidate(train, test, trial, eliminated + [cand], cfg)
        except DegenerateLabels as exc:
            history.append(_skipped(cand, len(trial), f"degenerate labels: {exc}"))
            if on_step is not None:
                on_step(history[-1])
            continue
        history.append(step)
        if on_step is not None:
            on_step(step)
        if step.accepted:
            retained = trial
            eliminated.append(cand)
            final_model = gb
    return CompactionResult(tuple(retained), tuple(eliminated), final_model, tuple(history), tuple(order))


@dataclass(frozen=True)
class CostReport:
    baseline_cost: float
    compacted_cost: float
    savings_pct: float

    def summary(self) -> str:
        return f"${self.baseline_cost:g} → ${self.compacted_cost:g} ({self.savings_pct:.1f}% saved)"


def cost_savings(n_devices: int, n_guard: int, n_pass_stage1: int, stages: int, per_stage_cost: float) -> CostReport:
    """Multi-stage test cost before and after compaction.

    Baseline: every device takes stage 1 and devices passing it take the
    remaining ``stages - 1`` stages.  Compacted: every device takes one
    stage; guard-band devices are retested on all ``stages``.
    """
    if n_devices < 0 or n_guard < 0 or n_pass_stage1 < 0:
        raise InvalidCounts("counts must be nonnegative")
    if n_guard > n_devices or n_pass_stage1 > n_devices:
        raise InvalidCounts("n_guard and n_pass_stage1 cannot exceed n_devices")
    if stages < 1:
        raise InvalidCounts("stages must be >= 1")
    if per_stage_cost < 0:
        raise InvalidCounts("per_stage_cost must be >= 0")
    compacted = (n_devices - n_guard) * per_stage_cost + n_guard * stages * per_stage_cost
    baseline = n_devices * per_stage_cost + n_pass_stage1 * (stages - 1) * per_stage_cost
    savings = 100.0 * (1.0 - compacted / baseline) if baseline > 0 else 0.0
    return CostReport(float(baseline), float(compacted), savings)


STEP_COLUMNS = ("candidate", "e_p", "yield_loss_pct", "defect_escape_pct", "guard_pct", "accepted")


def steps_to_csv(history: Sequence[StepMetrics]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STEP_COLUMNS)
    for h in history:
        row = [h.candidate]
        for v in (h.e_p, h.yield_loss_pct, h.defect_escape_pct, h.guard_pct):
            row.append("" if math.isnan(v) else repr(float(v)))
        row.append("1" if h.accepted else "0")
        w.writerow(row)
    return buf.getvalue()


def report_to_json(result: CompactionResult, cfg: CompactionConfig, cost: Optional[CostReport] = None, **extra) -> dict:
    out = {
        "config": cfg.to_json(),
        "order": list(result.order),
        "retained": list(result.retained),
        "eliminated": list(result.eliminated),
        "steps": [h.to_json() for h in result.history],
        "cost": None if cost is None else asdict(cost),
    }
    out.update(extra)
    return out
