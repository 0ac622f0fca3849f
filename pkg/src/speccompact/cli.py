"""Command-line driver: ``generate``, ``compact``, ``classify``, ``export-lut``.

All randomness comes from ``--seed``.  Each run writes a ``manifest.json``
next to its outputs listing every input and output file with a SHA-256
digest plus per-phase wall-clock timings.  Timings live only in the manifest,
so the primary outputs are byte-identical across repeated runs.

Exit codes: 0 success, 1 I/O failure, 2 configuration or input validation
error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .compactor import (
    CompactionConfig,
    FixedList,
    compact,
    compute_metrics,
    cost_savings,
    report_to_json,
    steps_to_csv,
)
from .datamodel import (
    SpecificationDef,
    label_pass_fail,
    load_dataset,
    load_specs,
    normalize,
    pass_mask,
    save_dataset,
    save_specs,
    split,
)
from .errors import CellLimitExceeded, InvalidConfig, NonConvergence, SpecCompactError
from .grid import DEFAULT_BOUNDS, DEFAULT_CELL_LIMIT, GridSpec, build_lookup_table, load_lut, lut_classify_many, save_lut
from .guardband import GUARD, classify_codes, guard_band_from_json, guard_band_to_json
from .seeding import derive_seed
from .syngen import KINDS, GeneratorConfig, generate

OUT_ENV = "SPECCOMPACT_OUT"
MODEL_FORMAT = "speccompact-guardband/1"


class UsageError(SpecCompactError):
    """Bad combination of command-line arguments."""


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


class RunManifest:
    """Collects paths, digests and timings; written last as ``manifest.json``."""

    def __init__(self, subcommand, config_path, seed):
        self.subcommand = subcommand
        self.config_path = config_path
        self.seed = seed
        self.inputs: list[dict] = []
        self.outputs: list[dict] = []
        self.timings: dict[str, float] = {}
        self._t0 = None

    def add_input(self, path):
        self.inputs.append({"path": str(path), "sha256": sha256_file(path)})

    def add_output(self, path):
        self.outputs.append({"path": str(path), "sha256": sha256_file(path)})

    def phase(self, name):
        manifest = self

        class _Timer:
            def __enter__(self):
                self.t = time.perf_counter()

            def __exit__(self, *exc):
                manifest.timings[name] = round(time.perf_counter() - self.t, 6)

        return _Timer()

    def to_json(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "config": None if self.config_path is None else str(self.config_path),
            "seed": self.seed,
            "version": __version__,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "timings": self.timings,
        }

    def write(self, out_dir: Path):
        path = out_dir / "manifest.json"
        _write_json(path, self.to_json())
        return path


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=False, allow_nan=False, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _read_config(path):
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(obj, dict):
        raise InvalidConfig(f"{path}: config must be a JSON object")
    return obj


def _out_dir(args) -> Path:
    out = args.out or os.environ.get(OUT_ENV) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


class _Printer:
    def __init__(self, quiet):
        self.quiet = quiet

    def __call__(self, *parts):
        if not self.quiet:
            print(*parts)


# ---------------------------------------------------------------- generate


def cmd_generate(args) -> int:
    say = _Printer(args.quiet)
    obj = _read_config(args.config)
    for key, val in (("kind", args.kind), ("n", args.n), ("noise_scale", args.noise), ("param_variation", args.variation)):
        if val is not None:
            obj[key] = val
    if args.seed is not None:
        obj["seed"] = args.seed
    if "kind" not in obj:
        raise InvalidConfig("generator kind not given (use --kind or a config file)")
    if "n" not in obj:
        raise InvalidConfig("record count not given (use --n or a config file)")
    cfg = GeneratorConfig.from_json(obj)

    out = _out_dir(args)
    man = RunManifest("generate", args.config, cfg.seed)
    if args.config:
        man.add_input(args.config)
    with man.phase("generate"):
        ds = generate(cfg)
    with man.phase("write"):
        data_path = out / f"{args.name}.csv"
        specs_path = out / f"{args.name}.specs.json"
        save_dataset(ds, data_path)
        save_specs(ds.specs, specs_path)
    man.add_output(data_path)
    man.add_output(specs_path)
    man.write(out)
    y = label_pass_fail(ds, ds.names).yield_fraction
    say(f"{len(ds)} records written to {data_path}; yield {100 * y:.1f}%")
    return 0


# ---------------------------------------------------------------- compact


def _compaction_config(args) -> CompactionConfig:
    obj = _read_config(args.config)
    if args.e_t is not None:
        obj["e_T"] = args.e_t
    if args.delta is not None:
        obj["delta"] = args.delta
    if args.order:
        obj["ordering"] = {"strategy": "fixed", "names": [s.strip() for s in args.order.split(",") if s.strip()]}
    if args.seed is not None:
        obj["seed"] = args.seed
    if args.c is not None or args.gamma is not None:
        hp = dict(obj.get("hp") or {})
        if args.c is not None:
            hp["c"] = args.c
        if args.gamma is not None:
            hp["kernel"], hp["gamma"] = "rbf", args.gamma
        obj["hp"] = hp
    return CompactionConfig.from_json(obj)


def _parse_sizes(text):
    try:
        sizes = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"--train-sizes expects comma-separated integers, got {text!r}") from None
    if not sizes or any(s < 1 for s in sizes):
        raise UsageError("--train-sizes entries must be positive")
    return sizes


def cmd_compact(args) -> int:
    say = _Printer(args.quiet)
    cfg = _compaction_config(args)
    sizes = _parse_sizes(args.train_sizes) if args.train_sizes else []
    if (args.test is None) == (args.test_fraction is None):
        raise UsageError("give exactly one of --test or --test-fraction")

    out = _out_dir(args)
    man = RunManifest("compact", args.config, cfg.seed)
    for p in (args.config, args.specs, args.train, args.test):
        if p:
            man.add_input(p)

    with man.phase("load"):
        specs = load_specs(args.specs)
        train = load_dataset(args.train, specs)
        if args.test is not None:
            test = load_dataset(args.test, specs)
        else:
            test, train = split(train, args.test_fraction, derive_seed(cfg.seed, "split"))
        train, test = normalize(train), normalize(test)
    if cfg.grid is None and args.grid_bins:
        cfg = CompactionConfig(cfg.e_T, cfg.delta, cfg.hp, cfg.ordering, GridSpec.uniform(train.names, args.grid_bins), cfg.seed)
    if isinstance(cfg.ordering, FixedList):
        unknown = [n for n in cfg.ordering.names if n not in train.names]
        if unknown:
            raise InvalidConfig(f"ordering names unknown spec(s) {unknown}")
    for n in sizes:
        if n > len(train):
            raise UsageError(f"training size {n} exceeds the {len(train)} available training records")

    steps_path = out / "steps.csv"
    history = []

    def on_step(step):
        history.append(step)
        if not args.quiet:
            flag = "accept" if step.accepted else "reject"
            print(f"  {step.candidate}: e_p {step.e_p:.4f} ({flag})", flush=True)

    try:
        with man.phase("compact"):
            result = compact(train, test, cfg, on_step=on_step)
        sweep = []
        for n in sizes:
            with man.phase(f"compact_n{n}"):
                r = compact(train.head(n), test, cfg)
            p = out / f"steps_n{n}.csv"
            _write_text(p, steps_to_csv(r.history))
            man.add_output(p)
            sweep.append({"n_train": n, "eliminated": list(r.eliminated), "steps": [h.to_json() for h in r.history]})
    except BaseException as exc:
        _write_text(steps_path, steps_to_csv(history))
        _write_text(out / "FAILED", f"{type(exc).__name__}: {exc}\n")
        man.add_output(steps_path)
        man.write(out)
        raise

    report = report_to_json(result, cfg, n_train=len(train), n_test=len(test))
    if sweep:
        report["sweep"] = sweep
    report_path = out / "report.json"
    _write_json(report_path, report)
    _write_text(steps_path, steps_to_csv(result.history))
    man.add_output(report_path)
    man.add_output(steps_path)
    if result.final_model is not None:
        model_path = out / "model.json"
        _write_json(model_path, model_file(result.final_model, specs))
        man.add_output(model_path)
    failed = out / "FAILED"
    if failed.exists():
        failed.unlink()
    man.write(out)
    say(f"eliminated {list(result.eliminated)}; retained {list(result.retained)}")
    if result.final_model is None:
        say("no test was eliminated; no model written")
    return 0


def model_file(gb, specs) -> dict:
    """Self-contained model document: guard-band pair plus the spec ranges."""
    return {"format": MODEL_FORMAT, "specs": [s.to_json() for s in specs], "guard_band": guard_band_to_json(gb)}


def read_model_file(path):
    obj = _read_config(path)
    if obj.get("format") != MODEL_FORMAT:
        raise InvalidConfig(f"{path}: not a guard-band model file")
    specs = [SpecificationDef.from_json(s) for s in obj["specs"]]
    return guard_band_from_json(obj["guard_band"]), specs


# ---------------------------------------------------------------- classify


def _header(path):
    with open(path, encoding="utf-8") as fh:
        return [h.strip() for h in fh.readline().rstrip("\r\n").split(",")]


def cmd_classify(args) -> int:
    say = _Printer(args.quiet)
    if (args.model is None) == (args.lut is None):
        raise UsageError("give exactly one of --model or --lut")
    out = _out_dir(args)
    man = RunManifest("classify", args.config, args.seed)
    for p in (args.model, args.lut, args.specs, args.data):
        if p:
            man.add_input(p)

    with man.phase("load"):
        specs = None
        gb = lut = None
        if args.model:
            gb, specs = read_model_file(args.model)
            retained = list(gb.retained_specs)
            eliminated = list(gb.eliminated_specs)
        else:
            lut = load_lut(args.lut)
            retained = list(lut.grid.dims)
            eliminated = []
        if args.specs:
            specs = load_specs(args.specs)
        if specs is None:
            raise UsageError("--lut needs --specs to normalize the measurements")
        by_name = {s.name: s for s in specs}
        missing = [n for n in retained if n not in by_name]
        if missing:
            raise InvalidConfig(f"spec set lacks retained spec(s) {missing}")
        header = _header(args.data)
        if not eliminated:
            eliminated = [n for n in by_name if n not in retained and n in header]
        have_truth = bool(eliminated) and all(n in header for n in eliminated)
        cols = retained + (eliminated if have_truth else [])
        ds = normalize(load_dataset(args.data, [by_name[n] for n in cols], strict=False))

    with man.phase("classify"):
        X = ds.columns(retained)
        if gb is not None:
            codes = classify_codes(gb, X)
        else:
            codes = np.array([s_.value for s_ in lut_classify_many(lut, X)])
            codes = np.select([codes == "G", codes == "B"], [1, -1], 0)
    disp_path = out / "dispositions.csv"
    names = {1: "Good", -1: "Bad", 0: "GuardBand"}
    _write_text(disp_path, "id,disposition\n" + "".join(f"{i},{names[int(c)]}\n" for i, c in zip(ds.ids, codes)))
    man.add_output(disp_path)

    summary = {"n": len(ds), "n_guard": int(np.sum(codes == GUARD))}
    if have_truth:
        m = compute_metrics(label_pass_fail(ds, eliminated), codes)
        summary["metrics"] = {
            "defect_escape_pct": m.defect_escape_pct,
            "yield_loss_pct": m.yield_loss_pct,
            "guard_pct": m.guard_pct,
            "e_p": m.e_p,
        }
        say(m.summary())
    else:
        say(f"{len(ds)} devices classified; {summary['n_guard']} in the guard band")
    if args.cost is not None:
        n_pass1 = int(np.sum(pass_mask(ds, retained)))
        rep = cost_savings(len(ds), summary["n_guard"], n_pass1, args.stages, args.cost)
        summary["cost"] = {"baseline": rep.baseline_cost, "compacted": rep.compacted_cost, "savings_pct": rep.savings_pct}
        say(rep.summary())
    summary_path = out / "classify_summary.json"
    _write_json(summary_path, summary)
    man.add_output(summary_path)
    man.write(out)
    return 0


# ---------------------------------------------------------------- export-lut


def cmd_export_lut(args) -> int:
    say = _Printer(args.quiet)
    gb, _ = read_model_file(args.model)
    dims = gb.retained_specs
    lo, hi = args.bounds if args.bounds else DEFAULT_BOUNDS
    grid = GridSpec.uniform(dims, args.bins, (lo, hi))
    out = _out_dir(args)
    man = RunManifest("export-lut", args.config, args.seed)
    man.add_input(args.model)
    with man.phase("build"):
        lut = build_lookup_table(gb, grid, cell_limit=args.cell_limit)
    path = out / args.name
    save_lut(lut, path)
    man.add_output(path)
    man.write(out)
    hist = lut.histogram()
    say(f"{grid.n_cells} cells written to {path}; G {hist['G']} B {hist['B']} U {hist['U']}")
    return 0


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    def global_flags(default):
        # accepted before or after the subcommand; the subcommand copy must
        # not overwrite a value given before it
        g = argparse.ArgumentParser(add_help=False)
        g.add_argument("--seed", type=int, default=default, help="master seed (default: config value or 0)")
        g.add_argument("--config", default=default, help="JSON config file")
        g.add_argument("--out", default=default, help=f"output directory (default: ${OUT_ENV} or .)")
        g.add_argument("--quiet", action="store_true", default=default if default is argparse.SUPPRESS else False)
        return g

    common = global_flags(argparse.SUPPRESS)
    p = argparse.ArgumentParser(prog="speccompact", description=__doc__.splitlines()[0], parents=[global_flags(None)])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="generate a synthetic device population")
    g.add_argument("--kind", choices=KINDS)
    g.add_argument("--n", type=int)
    g.add_argument("--noise", type=float, default=None, help="measurement noise scale")
    g.add_argument("--variation", type=float, default=None, help="latent parameter variation (fraction)")
    g.add_argument("--name", default="population", help="output file stem")
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("compact", parents=[common], help="run greedy test elimination")
    c.add_argument("--specs", required=True, help="spec-set JSON")
    c.add_argument("--train", required=True, help="training population CSV")
    c.add_argument("--test", default=None, help="held-out population CSV")
    c.add_argument("--test-fraction", type=float, default=None, help="split the training file instead")
    c.add_argument("--e-t", type=float, default=None, help="error tolerance e_T")
    c.add_argument("--delta", type=float, default=None, help="guard-band half-width (normalized)")
    c.add_argument("--order", default=None, help="comma-separated fixed candidate order")
    c.add_argument("--grid-bins", type=int, default=None, help="thin training data on a uniform grid")
    c.add_argument("--train-sizes", default=None, help="comma-separated training-size sweep")
    c.add_argument("--c", type=float, default=None, help="SVC box constraint")
    c.add_argument("--gamma", type=float, default=None, help="RBF kernel width (default 1/m)")
    c.set_defaults(func=cmd_compact)

    k = sub.add_parser("classify", parents=[common], help="classify devices with a model or table")
    k.add_argument("--data", required=True, help="measurement CSV")
    k.add_argument("--model", default=None)
    k.add_argument("--lut", default=None)
    k.add_argument("--specs", default=None, help="spec-set JSON (required with --lut)")
    k.add_argument("--cost", type=float, default=None, help="per-stage test cost")
    k.add_argument("--stages", type=int, default=3)
    k.set_defaults(func=cmd_classify)

    e = sub.add_parser("export-lut", parents=[common], help="tabulate a model on a grid")
    e.add_argument("--model", required=True)
    e.add_argument("--bins", type=int, required=True)
    e.add_argument("--bounds", type=float, nargs=2, default=None, metavar=("LO", "HI"))
    e.add_argument("--cell-limit", type=int, default=DEFAULT_CELL_LIMIT)
    e.add_argument("--name", default="table.lut", help="output file name")
    e.set_defaults(func=cmd_export_lut)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            if args.quiet:
                warnings.simplefilter("ignore", NonConvergence)
            return args.func(args)
    except CellLimitExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SpecCompactError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
