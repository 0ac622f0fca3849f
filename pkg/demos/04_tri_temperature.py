"""Accelerometer measured at three temperatures: drop the hot and cold tests.

The ten hot/cold columns are offered for elimination one at a time.  A
sharper kernel than the library default is used, since the hot/cold values
track the room values closely.  The final model is exported as a lookup
table over the five room-temperature specs.

    python demos/04_tri_temperature.py
"""

import time

from speccompact import CompactionConfig, FixedList, GeneratorConfig, compact, generate, normalize, svc
from speccompact.grid import GridSpec, build_lookup_table, lut_to_text

train = normalize(generate(GeneratorConfig("accel", 1000, seed=1)))
test = normalize(generate(GeneratorConfig("accel", 1000, seed=10_001)))
hot_cold = [n for n in train.names if not n.endswith("@14.85C")]
# scale_factor@80C never fails on its own, so offer it once the joint label has both classes
order = tuple(n for n in hot_cold if n != "scale_factor@80C") + ("scale_factor@80C",)

hp = svc.Hyperparams(kernel=svc.KernelSpec.rbf(1.0), c=100.0)
cfg = CompactionConfig(e_T=0.02, delta=0.025, hp=hp, ordering=FixedList(order), seed=1)
t = time.perf_counter()
r = compact(train, test, cfg)
print(f"{len(r.eliminated)} of {len(hot_cold)} hot/cold tests eliminated ({time.perf_counter() - t:.0f}s)")
for h in r.history:
    print(f"  {h.candidate:<30} e_p {h.e_p:.3f}  DE {h.defect_escape_pct:.1f}  YL {h.yield_loss_pct:.1f}  GB {h.guard_pct:.1f}  {'drop' if h.accepted else 'keep'}")

lut = build_lookup_table(r.final_model, GridSpec.uniform(r.final_model.retained_specs, 8))
print("lookup table:", lut.grid.n_cells, "cells", lut.histogram())
print(lut_to_text(lut)[:240])
