"""Quickstart: find a redundant spec in a planted population.

s3 is the mean of s1 and s2 plus a little noise, s4 is independent.  The
compactor should drop s3 and keep everything else, and the guard-band model
should sort held-out devices with very few confident mistakes.

    python demos/01_quickstart.py
"""

import numpy as np

from speccompact import (
    CompactionConfig,
    FixedList,
    GeneratorConfig,
    classify_many,
    compact,
    compute_metrics,
    cost_savings,
    generate_planted,
    label_pass_fail,
    normalize,
)

train, truth = generate_planted(GeneratorConfig("planted", 2000, seed=1, noise_scale=0.005))
test, _ = generate_planted(GeneratorConfig("planted", 1000, seed=2, noise_scale=0.005))
train, test = normalize(train), normalize(test)
print("ground truth:", truth.dependence)

cfg = CompactionConfig(e_T=0.02, delta=0.01, ordering=FixedList(("s3", "s1", "s2", "s4")))
result = compact(train, test, cfg, on_step=lambda s: print(f"  {s.candidate}: e_p={s.e_p:.3f} accepted={s.accepted}"))
print("eliminated", result.eliminated, "retained", result.retained)

gb = result.final_model
states = classify_many(gb, test.columns(gb.retained_specs))
truth_pass = label_pass_fail(test, gb.eliminated_specs).passed
m = compute_metrics(truth_pass, states)
print(m.summary())

# devices that pass the retained specs go on to the eliminated stage in the baseline flow
n_pass = int(label_pass_fail(test, gb.retained_specs).passed.sum())
print(cost_savings(len(test), m.n_guard, n_pass, 3, 1.0).summary())
print("guard band devices:", int(np.sum([s.value == "U" for s in states])))
