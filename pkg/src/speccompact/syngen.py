"""Synthetic device populations.

Three generators stand in for Monte Carlo circuit simulation:

``opamp``
    A two-stage amplifier described by nine geometric/passive parameters
    (input-pair W/L, output-stage W/L, tail-mirror W/L, compensation and load
    capacitors, bias resistor).  Small-signal quantities (bias currents,
    transconductances, output resistances) follow square-law scaling and the
    eleven measured specs are power-law combinations of them.
``accel``
    A capacitive MEMS accelerometer with eight parameters (beam length and
    width, proof-mass side, sense gap, finger overlap, sense-axis angle,
    squeeze-film gap, anchor span).  Temperature moves the anchors, which
    stress-stiffens the beams; damping follows an effective 0.3 power of absolute
    temperature.  Five specs are reported at 14.85, 80 and -40 degrees C.
``planted``
    Independent uniform specs plus dependent specs defined by expressions
    over them, with a descriptor of the ground truth.

Parameters are perturbed uniformly within ``+/- param_variation`` of nominal.
Record ``k`` draws from its own generator seeded by
``SeedSequence(derive_seed(seed, "syngen", kind), spawn_key=(k,))``, so
records can be produced in any order or in parallel with identical output.

Every mapped spec is ``nominal * ratio ** spread`` (or ``nominal + spread *
log(ratio) * width`` for specs whose range straddles zero), where ``ratio``
is the physical quantity relative to its nominal-design value and ``spread``
is a per-spec constant.  The spreads were fitted once so that population
yields land near the targets below; ``demos/03_generator_calibration.py``
re-derives them.
"""

from __future__ import annotations

import ast
import graphlib
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .datamodel import Dataset, SpecificationDef
from .errors import CyclicDependence, InvalidConfig
from .seeding import derive_seed

__all__ = [
    "OPAMP",
    "ACCEL",
    "PLANTED",
    "OPAMP_SPECS",
    "ACCEL_BASE_SPECS",
    "ACCEL_TEMPERATURES",
    "accel_specs",
    "planted_specs",
    "GeneratorConfig",
    "PlantedTruth",
    "generate",
    "generate_planted",
    "opamp_latent_names",
    "accel_latent_names",
]

OPAMP = "opamp"
ACCEL = "accel"
PLANTED = "planted"
KINDS = (OPAMP, ACCEL, PLANTED)

# name, unit, nominal, lo, hi
OPAMP_SPECS = (
    SpecificationDef("gain", "-", 14000.0, 1000.0, 20000.0),
    SpecificationDef("bandwidth_3db", "Hz", 200.0, 130.0, 10000.0),
    SpecificationDef("unity_gain_freq", "MHz", 2.1, 1.7, 5.0),
    SpecificationDef("slew_rate", "V/us", 0.44, 0.35, 0.55),
    SpecificationDef("rise_time", "us", 8.5, 0.01, 10.5),
    SpecificationDef("overshoot", "-", 0.0001, -0.00026, 0.00026),
    SpecificationDef("settling_time", "ns", 895.0, 1.0, 1070.0),
    SpecificationDef("quiescent_current", "uA", 105.0, 70.0, 125.0),
    SpecificationDef("common_mode_gain", "-", 0.08, 0.0, 0.48),
    SpecificationDef("power_supply_gain", "-", 0.4, 0.0, 0.95),
    SpecificationDef("short_circuit_current", "mA", 0.5, 0.0, 4.2),
)

ACCEL_BASE_SPECS = (
    SpecificationDef("scale_factor", "mV/V", 9.5, 5.0, 30.0),
    SpecificationDef("cross_axis_sensitivity", "mV/V", 0.0, -6.0, 4.0),
    SpecificationDef("peak_frequency", "kHz", 5.6, 4.0, 6.2),
    SpecificationDef("quality_factor", "-", 2.1, 1.0, 2.8),
    SpecificationDef("bandwidth_3db", "kHz", 2.7, 2.0, 3.8),
)

# column suffix -> degrees C; room first
ACCEL_TEMPERATURES = {"14.85C": 14.85, "80C": 80.0, "-40C": -40.0}
ROOM, HOT, COLD = "14.85C", "80C", "-40C"


def accel_specs() -> tuple[SpecificationDef, ...]:
    out = []
    for suffix in ACCEL_TEMPERATURES:
        for s in ACCEL_BASE_SPECS:
            out.append(SpecificationDef(f"{s.name}@{suffix}", s.unit, s.nominal, s.range_lo, s.range_hi))
    return tuple(out)


def planted_specs(n_specs: int = 4, narrow: Mapping[str, tuple] = None) -> tuple[SpecificationDef, ...]:
    """``s1..sN`` with range [0, 1]; ``narrow`` overrides (lo, hi) per name."""
    narrow = {"s3": (0.2, 0.8)} if narrow is None else dict(narrow)
    out = []
    for k in range(1, n_specs + 1):
        name = f"s{k}"
        lo, hi = narrow.get(name, (0.0, 1.0))
        out.append(SpecificationDef(name, "-", 0.5 * (lo + hi), lo, hi))
    return tuple(out)


opamp_latent_names = ("w_in", "l_in", "w_out", "l_out", "w_tail", "l_tail", "c_comp", "c_load", "r_bias")
accel_latent_names = ("beam_len", "beam_width", "mass_side", "sense_gap", "finger_overlap", "sense_angle", "film_gap", "anchor_span")

# fitted spreads, see module docstring
OPAMP_SPREAD = {
    "gain": 2.127,
    "bandwidth_3db": 1.474,
    "unity_gain_freq": 1.437,
    "slew_rate": 1.104,
    "rise_time": 1.471,
    "overshoot": 1.142,
    "settling_time": 1.303,
    "quiescent_current": 1.155,
    "common_mode_gain": 9.565,
    "power_supply_gain": 5.788,
    "short_circuit_current": 8.972,
}
ACCEL_SPREAD = {
    "scale_factor": 0.753,
    "cross_axis_sensitivity": 3.86,
    "peak_frequency": 0.394,
    "quality_factor": 0.7995,
    "bandwidth_3db": 1.139,
}
# fractional stiffness change per degree C for a nominal device
ACCEL_STRESS_COEFF = 6e-4
# effective damping exponent on absolute temperature
ACCEL_VISCOSITY_EXP = 0.3


@dataclass(frozen=True)
class GeneratorConfig:
    """Population generator settings.

    ``noise_scale`` is measurement noise: for ``opamp``/``accel`` a Gaussian
    standard deviation as a fraction of each spec's range width, for
    ``planted`` the half-width of uniform noise (raw units) added to dependent
    specs.  ``dependence`` maps dependent spec names to expressions over
    other spec names (``planted`` only).
    """

    kind: str
    n: int
    seed: int = 0
    param_variation: float = 0.10
    noise_scale: Optional[float] = None
    dependence: Optional[Mapping[str, str]] = None
    n_specs: int = 4
    ranges: Optional[Mapping[str, tuple]] = None
    independent_spread: float = 0.15

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidConfig(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise InvalidConfig("n must be ≥ 1")
        if not self.param_variation >= 0:
            raise InvalidConfig("param_variation must be >= 0")
        if self.noise_scale is not None and not self.noise_scale >= 0:
            raise InvalidConfig("noise_scale must be >= 0")
        if self.kind == PLANTED and self.n_specs < 1:
            raise InvalidConfig("planted populations need at least one spec")

    @property
    def effective_noise(self) -> float:
        if self.noise_scale is not None:
            return float(self.noise_scale)
        return {OPAMP: 0.002, ACCEL: 0.001, PLANTED: 0.0}[self.kind]

    @classmethod
    def from_json(cls, obj: dict) -> "GeneratorConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(obj) - known
        if extra:
            raise InvalidConfig(f"unknown generator config keys {sorted(extra)}")
        obj = dict(obj)
        if obj.get("ranges"):
            obj["ranges"] = {k: tuple(v) for k, v in obj["ranges"].items()}
        try:
            return cls(**obj)
        except TypeError as exc:
            raise InvalidConfig(str(exc)) from None


def _record_rngs(seed: int, kind: str, n: int):
    root = derive_seed(seed, "syngen", kind)
    for k in range(n):
        yield np.random.default_rng(np.random.SeedSequence(root, spawn_key=(k,)))


def _draw(cfg: GeneratorConfig, n_latent: int, n_noise: int):
    """Per-record uniform latents in [-1, 1] and standard normal noise."""
    u = np.empty((cfg.n, n_latent))
    z = np.empty((cfg.n, n_noise))
    for k, rng in enumerate(_record_rngs(cfg.seed, cfg.kind, cfg.n)):
        u[k] = rng.uniform(-1.0, 1.0, n_latent)
        z[k] = rng.standard_normal(n_noise)
    return u, z


def _log_params(u, variation):
    return np.log1p(variation * u)


def opamp_log_ratios(lq: np.ndarray) -> dict:
    """Log of each physical quantity relative to the nominal design.

    ``lq`` has one column per entry of :data:`opamp_latent_names`.
    """
    w1, l1, w6, l6, w5, l5, cc, cl, rb = lq.T
    i_ref = -rb
    i1 = i_ref + w5 - l5
    i6 = i_ref + w6 - l6
    gm1 = 0.5 * (w1 - l1 + i1)
    gm6 = 0.5 * (w6 - l6 + i6)
    ro1 = l1 - i1
    ro6 = l6 - i6
    a0 = gm1 + ro1 + gm6 + ro6
    ugf = gm1 - cc
    sr = i1 - cc
    # second pole over unity-gain frequency: the phase-margin proxy
    rho = gm6 - cl - ugf
    iq = np.log(0.25 * np.exp(i1) + 0.65 * np.exp(i6) + 0.10 * np.exp(i_ref))
    return {
        "gain": a0,
        "bandwidth_3db": ugf - a0,
        "unity_gain_freq": ugf,
        "slew_rate": sr,
        "rise_time": -0.6 * ugf - 0.4 * sr - 0.3 * rho,
        "overshoot": -rho + 0.5 * rho**2,
        "settling_time": -0.5 * ugf - 0.3 * sr - 0.6 * rho,
        "quiescent_current": iq,
        "common_mode_gain": -gm1 - (l5 - i1),
        "power_supply_gain": -(gm6 + ro6) + 0.5 * (cc - cl),
        "short_circuit_current": i6 + 0.5 * (w6 - l6),
    }


def _apply_spread(spec: SpecificationDef, log_ratio, spread):
    if spec.range_lo < 0 < spec.range_hi or spec.nominal == 0:
        return spec.nominal + spread * spec.width * log_ratio
    return spec.nominal * np.exp(spread * log_ratio)


def _opamp(cfg: GeneratorConfig):
    specs = OPAMP_SPECS
    u, z = _draw(cfg, len(opamp_latent_names), len(specs))
    logs = opamp_log_ratios(_log_params(u, cfg.param_variation))
    cols = []
    for k, s in enumerate(specs):
        v = _apply_spread(s, logs[s.name], OPAMP_SPREAD[s.name])
        cols.append(v + cfg.effective_noise * s.width * z[:, k])
    return specs, np.column_stack(cols)


def accel_log_ratios(lq: np.ndarray, temperature_c: float) -> dict:
    """Log-ratios of the five accelerometer specs at one temperature."""
    lb, wb, lm, g0, ov, ang, h, la = lq.T
    d_t = temperature_c - ACCEL_TEMPERATURES[ROOM]
    k0 = 3.0 * (wb - lb)
    # anchors move outward when hot; axial stress stiffening scales with
    # anchor span and slenderness squared
    stiffening = ACCEL_STRESS_COEFF * d_t * np.exp(la + 2.0 * (lb - wb))
    k = k0 + np.log1p(stiffening)
    m = 2.0 * lm
    temp_k = temperature_c + 273.15
    b = 4.0 * lm - 3.0 * h + ACCEL_VISCOSITY_EXP * np.log(temp_k / (ACCEL_TEMPERATURES[ROOM] + 273.15))
    f0 = 0.5 * (k - m)
    q = 0.5 * (k + m) - b
    sf = (m - k) + ov - 2.0 * g0
    # angle offset from orthogonal, as a fraction of nominal
    mis = np.expm1(ang)
    return {
        "scale_factor": sf,
        "cross_axis_sensitivity": mis * np.exp(sf) - 0.15 * (lb - wb),
        "peak_frequency": f0,
        "quality_factor": q,
        "bandwidth_3db": f0 - 0.5 * q,
    }


def _accel(cfg: GeneratorConfig):
    specs = accel_specs()
    u, z = _draw(cfg, len(accel_latent_names), len(specs))
    lq = _log_params(u, cfg.param_variation)
    cols = []
    k = 0
    for suffix, temp in ACCEL_TEMPERATURES.items():
        logs = accel_log_ratios(lq, temp)
        for s in ACCEL_BASE_SPECS:
            spec = specs[k]
            v = _apply_spread(s, logs[s.name], ACCEL_SPREAD[s.name])
            cols.append(v + cfg.effective_noise * spec.width * z[:, k])
            k += 1
    return specs, np.column_stack(cols)


_SAFE_FUNCS = {
    "abs": np.abs,
    "sqrt": np.sqrt,
    "exp": np.exp,
    "log": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "tanh": np.tanh,
    "minimum": np.minimum,
    "maximum": np.maximum,
    "pi": math.pi,
}
_ALLOWED_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant,
    ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd,
)


def _expression_names(expr: str, spec_names) -> set:
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise InvalidConfig(f"cannot parse dependence expression {expr!r}: {exc.msg}") from None
    names = set()
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise InvalidConfig(f"disallowed syntax {type(node).__name__} in {expr!r}")
        if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name) and node.func.id in _SAFE_FUNCS):
            raise InvalidConfig(f"only {sorted(_SAFE_FUNCS)} may be called in {expr!r}")
        if isinstance(node, ast.Name) and node.id not in _SAFE_FUNCS:
            if node.id not in spec_names:
                raise InvalidConfig(f"expression {expr!r} references unknown spec {node.id!r}")
            names.add(node.id)
    return names


@dataclass(frozen=True)
class PlantedTruth:
    """Which planted specs are redundant and how they are computed."""

    dependence: dict
    redundant: tuple[str, ...]
    independent: tuple[str, ...]
    noise_scale: float
    order: tuple[str, ...] = field(default=())

    def evaluate(self, ds: Dataset, name: str) -> np.ndarray:
        """Noise-free value of dependent spec ``name`` from the dataset's columns."""
        expr = self.dependence[name]
        env = dict(_SAFE_FUNCS)
        for n in _expression_names(expr, set(ds.names)):
            env[n] = ds.values[:, ds.index(n)]
        return np.asarray(eval(compile(expr, "<dependence>", "eval"), {"__builtins__": {}}, env), dtype=float)


def _planted(cfg: GeneratorConfig):
    specs = planted_specs(cfg.n_specs, cfg.ranges)
    names = [s.name for s in specs]
    dependence = {"s3": "(s1 + s2) / 2"} if cfg.dependence is None else dict(cfg.dependence)
    for target in dependence:
        if target not in names:
            raise InvalidConfig(f"dependent spec {target!r} is not in the spec set")
    graph = {t: _expression_names(e, set(names)) for t, e in dependence.items()}
    try:
        order = tuple(t for t in graphlib.TopologicalSorter(graph).static_order() if t in dependence)
    except graphlib.CycleError as exc:
        raise CyclicDependence(f"dependence cycle through {exc.args[1]}") from None

    independent = [s for s in specs if s.name not in dependence]
    u, z = _draw(cfg, len(independent), len(dependence))
    values = np.empty((cfg.n, len(specs)))
    a = cfg.independent_spread
    for k, s in enumerate(independent):
        lo = s.range_lo - a * s.width
        hi = s.range_hi + a * s.width
        values[:, names.index(s.name)] = lo + (u[:, k] + 1.0) * 0.5 * (hi - lo)
    # uniform noise in [-noise, noise], from the per-record normal draws
    noise = cfg.effective_noise * (2.0 * _normal_cdf(z) - 1.0)
    env = dict(_SAFE_FUNCS)
    for k, target in enumerate(order):
        for n in graph[target]:
            env[n] = values[:, names.index(n)]
        v = eval(compile(dependence[target], "<dependence>", "eval"), {"__builtins__": {}}, env)
        values[:, names.index(target)] = np.asarray(v, dtype=float) + noise[:, list(dependence).index(target)]
    truth = PlantedTruth(
        dependence=dependence,
        redundant=tuple(t for t in names if t in dependence),
        independent=tuple(s.name for s in independent),
        noise_scale=cfg.effective_noise,
        order=order,
    )
    return specs, values, truth


def _normal_cdf(z):
    from scipy.special import ndtr

    return ndtr(z)


def generate(cfg: GeneratorConfig) -> Dataset:
    """Generate an un-normalized population for ``cfg``."""
    if cfg.kind == OPAMP:
        specs, values = _opamp(cfg)
    elif cfg.kind == ACCEL:
        specs, values = _accel(cfg)
    else:
        specs, values, _ = _planted(cfg)
    width = len(str(cfg.n))
    ids = [f"d{k:0{width}d}" for k in range(cfg.n)]
    return Dataset(specs, ids, values)


def generate_planted(cfg: GeneratorConfig) -> tuple[Dataset, PlantedTruth]:
    if cfg.kind != PLANTED:
        raise InvalidConfig("generate_planted needs kind='planted'")
    specs, values, truth = _planted(cfg)
    width = len(str(cfg.n))
    ids = [f"d{k:0{width}d}" for k in range(cfg.n)]
    return Dataset(specs, ids, values), truth
