"""Re-derive the spread constants used by the synthetic generators.

Each mapped spec is ``nominal * ratio ** spread``, so the spread sets how far
a spec wanders for a given parameter perturbation.  Op-amp spreads are fitted
one spec at a time so that each spec alone fails a target share of devices.

Accelerometer spreads take two passes.  The same per-spec fit gives a first
set; those are then rescaled by a coarse grid search so the whole population
has about 77% yield while keeping the share of devices near a hot/cold bound
(within 0.025 of a normalized bound) close to 8%.  Without the second pass
roughly 14% of devices sit that close to a bound, and no classifier can then
be confident about them.

Slow (several minutes): it regenerates populations for every trial value.

    python demos/03_generator_calibration.py
"""

import itertools

import numpy as np
from scipy.optimize import brentq

import speccompact.syngen as sg
from speccompact.datamodel import label_pass_fail, normalize

OPAMP_FAIL = dict(
    gain=0.035, bandwidth_3db=0.04, unity_gain_freq=0.03, slew_rate=0.06, rise_time=0.025, overshoot=0.02,
    settling_time=0.02, quiescent_current=0.03, common_mode_gain=0.025, power_supply_gain=0.02,
    short_circuit_current=0.035,
)
OPAMP_FAIL = {k: 1.3 * v for k, v in OPAMP_FAIL.items()}
ACCEL_FAIL = dict(scale_factor=0.05, cross_axis_sensitivity=0.04, peak_frequency=0.04, quality_factor=0.04, bandwidth_3db=0.03)
TARGET_YIELD = 0.774
TARGET_NEAR_BOUND = 0.08


def fail_rate(kind, column, n):
    ds = sg.generate(sg.GeneratorConfig(kind, n, seed=1))
    return float(np.mean(~label_pass_fail(ds, [column]).passed))


def fit(kind, table, targets, n, column=lambda name: name):
    out = {}
    for name, target in targets.items():
        def gap(spread):
            table[name] = spread
            return fail_rate(kind, column(name), n) - target

        out[name] = table[name] = brentq(gap, 0.05, 20.0, xtol=1e-3)
    return out


def accel_stats(n=1500):
    ds = normalize(sg.generate(sg.GeneratorConfig("accel", n, seed=1)))
    hot_cold = ds.names[5:]
    tight = label_pass_fail(ds, hot_cold, widen=-0.025).passed
    loose = label_pass_fail(ds, hot_cold, widen=0.025).passed
    return label_pass_fail(ds, ds.names).yield_fraction, float(np.mean(loose & ~tight))


shipped = dict(sg.OPAMP_SPREAD), dict(sg.ACCEL_SPREAD)

print("op-amp")
for name, spread in fit("opamp", sg.OPAMP_SPREAD, OPAMP_FAIL, 3000).items():
    print(f"  {name:<22} {spread:7.3f}   shipped {shipped[0][name]:.3f}")

print("accelerometer, per-spec fit")
base = fit("accel", sg.ACCEL_SPREAD, ACCEL_FAIL, 1000, column=lambda name: name + "@14.85C")
y, near = accel_stats()
print(f"  yield {y:.1%}, near a hot/cold bound {near:.1%}")

best = None
names = list(base)
grid = ((0.6, 0.8, 1.0), (1.0, 1.3, 1.6), (0.8, 1.0, 1.2), (0.8, 1.0, 1.3), (0.8, 1.0, 1.2))
for factors in itertools.product(*grid):
    sg.ACCEL_SPREAD.update({k: base[k] * f for k, f in zip(names, factors)})
    y, near = accel_stats()
    score = abs(y - TARGET_YIELD) + 2 * max(0.0, near - TARGET_NEAR_BOUND)
    if best is None or score < best[0]:
        best = (score, factors, y, near)

_, factors, y, near = best
print(f"accelerometer, rescaled: yield {y:.1%}, near a hot/cold bound {near:.1%}")
for k, f in zip(names, factors):
    print(f"  {k:<22} {base[k] * f:7.3f}   shipped {shipped[1][k]:.3f}")
