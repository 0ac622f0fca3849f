"""Confident error of the redundant-spec model as the training set grows.

    python demos/05_training_size.py
"""

import numpy as np

from speccompact import CompactionConfig, FixedList, GeneratorConfig, compact, generate_planted, normalize


def population(n, seed):
    ds, _ = generate_planted(GeneratorConfig("planted", n, seed=seed, noise_scale=0.005))
    return normalize(ds)


print(" n_train  DE+YL%  guard%")
for n in (125, 250, 500, 1000, 2000, 4000):
    rows = []
    for seed in range(5):
        cfg = CompactionConfig(e_T=0.02, delta=0.01, ordering=FixedList(("s3",)), seed=seed)
        step = compact(population(n, 100 + seed), population(1000, 10_100 + seed), cfg).history[0]
        rows.append((step.defect_escape_pct + step.yield_loss_pct, step.guard_pct))
    err, guard = np.mean(rows, axis=0)
    print(f"{n:>8} {err:>7.2f} {guard:>7.2f}")
