"""Specification-test compaction with guard-banded support vector classifiers."""

__version__ = "0.1.0"

from .compactor import (
    CompactionConfig,
    CompactionResult,
    FixedList,
    MarginalScore,
    Metrics,
    StepMetrics,
    compact,
    compute_metrics,
    cost_savings,
)
from .datamodel import (
    Dataset,
    LabelVector,
    SpecificationDef,
    denormalize,
    label_pass_fail,
    load_dataset,
    load_specs,
    normalize,
    save_dataset,
    save_specs,
    split,
)
from .grid import GridSpec, LookupTable, build_lookup_table, compact_training_data, lut_classify
from .guardband import GuardBandModel, TriState, classify, classify_many, train_guard_band
from .svc import Hyperparams, KernelSpec, SvcModel, predict, train_svc
from .syngen import GeneratorConfig, generate, generate_planted
