"""Op-amp population: which of the eleven specs can the others predict?

Ordering is by marginal predictability, so the most predictable specs are
tried first.  Two guard-band widths are compared at the same tolerance.

bandwidth_3db has an acceptable range of 130 Hz to 10 kHz around a 200 Hz
nominal, so after normalization every device sits within a few hundredths of
the lower bound.  A wide guard band absorbs the uncertain devices and lets
more specs go, but once bandwidth_3db is eliminated most of the population
lands in the guard band.  A narrow one keeps the guard band small and
eliminates little.

    python demos/02_opamp_compaction.py
"""

import time
import warnings

from speccompact import CompactionConfig, GeneratorConfig, MarginalScore, compact, generate, normalize
from speccompact.compactor import cost_savings
from speccompact.datamodel import label_pass_fail

train = normalize(generate(GeneratorConfig("opamp", 1500, seed=1)))
test = normalize(generate(GeneratorConfig("opamp", 1500, seed=2)))
print(f"yield train {label_pass_fail(train, train.names).yield_fraction:.1%}")
bw = train.columns(["bandwidth_3db"])[:, 0]
print(f"normalized bandwidth_3db spans {bw.min():.3f} .. {bw.max():.3f}")

for delta in (0.002, 0.01):
    cfg = CompactionConfig(e_T=0.02, delta=delta, ordering=MarginalScore(), seed=3)
    t = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        r = compact(train, test, cfg)
    print(f"\ndelta = {delta}: {len(r.eliminated)} of {len(train.names)} eliminated in {time.perf_counter() - t:.0f}s")
    for h in r.history:
        mark = "drop" if h.accepted else "keep"
        e_p = "  -  " if h.e_p != h.e_p else f"{h.e_p:.3f}"
        print(f"  {mark} {h.candidate:<22} e_p {e_p}  {h.note or ''}")
    f = r.final_step
    if f is not None:
        print(f"  final DE {f.defect_escape_pct:.1f}% YL {f.yield_loss_pct:.1f}% GB {f.guard_pct:.1f}%")
        n_pass = int(label_pass_fail(test, r.retained).passed.sum())
        n_guard = round(f.guard_pct * len(test) / 100)
        print("  " + cost_savings(len(test), n_guard, n_pass, 2, 1.0).summary())
