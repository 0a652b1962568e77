"""Command-line experiment runner.

    zenosim run --config exp.json [--out DIR] [--seed N] [--quiet]
    zenosim timing --config exp.json [--out DIR]
    zenosim validate --config exp.json

Exit status is 0 on success, 1 for configuration errors and 2 for runtime
or I/O errors. The output directory comes from ``--out``, then the config's
``out_dir``, then ``$ZENO_OUT_DIR``, then ``./zeno_out``.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .aggregation import RULES, AggregatorConfig
from .core import TASK_KINDS
from .faults import FAULT_KINDS, SELECTIONS, FaultSpec
from .simulator import DATA_MODES, LR_SCHEDULES, SimConfig, Trace, run_experiment
from .timing import MIN_ITERATIONS, emit_timing, loglog_slope

log = logging.getLogger("zenosim")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

TRACE_COLUMNS = ("t", "epoch", "train_loss", "grad_norm", "test_accuracy", "diverged",
                 "aggregator", "q", "b", "n_r", "rho", "gamma", "seed", "wallclock_ns")
SUMMARY_COLUMNS = ("aggregator", "q", "b", "n_r", "rho", "epoch", "t", "repeats",
                   "train_loss", "grad_norm", "test_accuracy", "diverged_fraction")
TIMING_COLUMNS = ("rule", "m", "d", "b", "iterations", "median_ns", "mean_ns")

# scalar defaults; sweepable keys accept a scalar or a list
DEFAULTS = {
    "task": "quadratic",
    "dimension": 10,
    "num_points": 2000,
    "task_options": {},
    "m": 20,
    "worker_batch": 100,
    "n_r": 4,
    "gamma": 0.1,
    "lr_schedule": "constant",
    "T": 100,
    "aggregator": "zeno",
    "b": 4,
    "rho": 0.0005,
    "beta": None,
    "fault": "none",
    "q": 0,
    "selection": "fixed",
    "magnitude": -10.0,
    "data_mode": "iid",
    "seed": 0,
    "test_points": 1000,
    "repeats": 10,
    "epoch_length": 25,
    "out_dir": None,
    "record_timing": False,
    "timing": None,
}
SWEEPABLE = ("aggregator", "q", "b", "n_r", "rho")
TIMING_DEFAULTS = {"m": [10, 20, 40, 80], "d": 10_000, "iterations": MIN_ITERATIONS,
                   "rules": list(RULES), "b": 0, "n_r": 4}


class ConfigError(Exception):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class ExperimentConfig:
    base: SimConfig
    sweeps: dict
    repeats: int = 10
    epoch_length: int = 25
    out_dir: str | None = None
    record_timing: bool = False
    timing: dict = field(default_factory=lambda: dict(TIMING_DEFAULTS))

    def combinations(self) -> list[dict]:
        keys = list(SWEEPABLE)
        return [dict(zip(keys, vals)) for vals in itertools.product(*(self.sweeps[k] for k in keys))]

    def sim_config(self, combo: dict, repeat: int = 0) -> SimConfig:
        return replace(
            self.base,
            aggregator=AggregatorConfig(combo["aggregator"], combo["b"]),
            fault=replace(self.base.fault, q=combo["q"]),
            n_r=combo["n_r"],
            rho=combo["rho"],
            seed=self.base.seed + repeat,
        )


def _as_list(name, value):
    values = value if isinstance(value, list) else [value]
    if not values:
        raise ConfigError(name, "sweep list is empty")
    return values


def _typed(name, value, kind):
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(name, f"expected an integer, got {value!r}")
    elif kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(name, f"expected a number, got {value!r}")
        value = float(value)
    return value


def _choice(name, value, options):
    if value not in options:
        raise ConfigError(name, f"must be one of {list(options)}, got {value!r}")
    return value


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Validate a raw JSON mapping and fill defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    unknown = sorted(set(raw) - set(DEFAULTS))
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    c = {**DEFAULTS, **raw}

    ints = ("dimension", "num_points", "m", "worker_batch", "T", "seed", "test_points", "repeats", "epoch_length")
    for k in ints:
        c[k] = _typed(k, c[k], int)
    c["gamma"] = _typed("gamma", c["gamma"], float)
    c["magnitude"] = _typed("magnitude", c["magnitude"], float)
    if c["beta"] is not None:
        c["beta"] = _typed("beta", c["beta"], float)
    _choice("task", c["task"], TASK_KINDS)
    _choice("lr_schedule", c["lr_schedule"], LR_SCHEDULES)
    _choice("fault", c["fault"], FAULT_KINDS)
    _choice("selection", c["selection"], SELECTIONS)
    _choice("data_mode", c["data_mode"], DATA_MODES)
    if not isinstance(c["task_options"], dict):
        raise ConfigError("task_options", "must be an object")
    if c["repeats"] < 1:
        raise ConfigError("repeats", "must be >= 1")
    if c["epoch_length"] < 1:
        raise ConfigError("epoch_length", "must be >= 1")

    sweeps = {}
    for k in SWEEPABLE:
        kind = {"aggregator": str, "rho": float}.get(k, int)
        vals = [_typed(k, v, kind) for v in _as_list(k, c[k])]
        if k == "aggregator":
            vals = [_choice(k, v, RULES) for v in vals]
        sweeps[k] = vals

    timing = dict(TIMING_DEFAULTS)
    if c["timing"] is not None:
        if not isinstance(c["timing"], dict):
            raise ConfigError("timing", "must be an object")
        bad = sorted(set(c["timing"]) - set(TIMING_DEFAULTS))
        if bad:
            raise ConfigError(f"timing.{bad[0]}", "unknown key")
        timing.update(c["timing"])
        timing["m"] = [_typed("timing.m", v, int) for v in _as_list("timing.m", timing["m"])]
        for k in ("d", "iterations", "b", "n_r"):
            timing[k] = _typed(f"timing.{k}", timing[k], int)
        timing["rules"] = [_choice("timing.rules", r, RULES) for r in _as_list("timing.rules", timing["rules"])]
        if timing["iterations"] < MIN_ITERATIONS:
            raise ConfigError("timing.iterations", f"must be >= {MIN_ITERATIONS}")

    base = SimConfig(
        task=c["task"], dimension=c["dimension"], num_points=c["num_points"],
        task_options=dict(c["task_options"]), m=c["m"], worker_batch=c["worker_batch"],
        gamma=c["gamma"], lr_schedule=c["lr_schedule"], T=c["T"], beta=c["beta"],
        fault=FaultSpec(c["fault"], 0, c["selection"], c["magnitude"]),
        data_mode=c["data_mode"], seed=c["seed"], test_points=c["test_points"],
    )
    exp = ExperimentConfig(base, sweeps, c["repeats"], c["epoch_length"], c["out_dir"],
                           bool(c["record_timing"]), timing)
    for combo in exp.combinations():
        try:
            if combo["q"] < 0:
                raise ConfigError("q", "must be >= 0")
            exp.sim_config(combo).validate()
        except ConfigError:
            raise
        except ValueError as exc:
            msg = str(exc)
            name, _, detail = msg.partition(": ")
            if name in ("krum cardinality violated", "nothing to aggregate") or not detail:
                name, detail = "b", msg
            raise ConfigError(name, detail) from None
    return exp


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config", f"file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"JSON parse error: {exc}") from None
    return config_from_dict(raw)


def fmt(value) -> str:
    """17 significant digits for floats, which round-trips float64 exactly."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def epoch_of(t: int, epoch_length: int) -> int:
    return (t - 1) // epoch_length + 1


def trace_rows(trace: Trace, combo: dict, epoch_length: int, record_timing: bool):
    cfg = trace.config
    for r in trace.records:
        yield [fmt(v) for v in (
            r.t, epoch_of(r.t, epoch_length), r.train_loss, r.grad_norm, r.test_accuracy, r.diverged,
            combo["aggregator"], combo["q"], combo["b"], combo["n_r"], float(combo["rho"]), r.gamma,
            cfg.seed, r.wallclock_ns if record_timing else 0,
        )]


def trace_filename(combo: dict, repeat: int) -> str:
    return (f"{combo['aggregator']}_q{combo['q']}_b{combo['b']}_nr{combo['n_r']}"
            f"_rho{float(combo['rho'])!r}_rep{repeat}.csv")


def summarize(traces: list[Trace], combo: dict, epoch_length: int):
    """One row per epoch: the end-of-epoch metrics averaged over repeats."""
    T = len(traces[0].records)
    rows = []
    for epoch in range(1, math.ceil(T / epoch_length) + 1):
        t = min(epoch * epoch_length, T)
        recs = [tr.records[t - 1] for tr in traces]
        accs = [r.test_accuracy for r in recs]
        acc = None if any(a is None for a in accs) else float(np.mean(accs))
        rows.append([fmt(v) for v in (
            combo["aggregator"], combo["q"], combo["b"], combo["n_r"], float(combo["rho"]), epoch, t,
            len(traces), float(np.mean([r.train_loss for r in recs])),
            float(np.mean([r.grad_norm for r in recs])), acc,
            float(np.mean([r.diverged for r in recs])),
        )])
    return rows


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def resolve_out_dir(cli_out: str | None, cfg: ExperimentConfig) -> Path:
    return Path(cli_out or cfg.out_dir or os.environ.get("ZENO_OUT_DIR") or "zeno_out")


def run_suite(cfg: ExperimentConfig, out_dir: Path, quiet: bool = False) -> int:
    """Run every (combination, repeat), writing one trace CSV each plus ``summary.csv``."""
    try:
        traces_dir = out_dir / "traces"
        traces_dir.mkdir(parents=True, exist_ok=True)
        summary = []
        for combo in cfg.combinations():
            traces = []
            for r in range(cfg.repeats):
                trace = run_experiment(cfg.sim_config(combo, r))
                traces.append(trace)
                path = traces_dir / trace_filename(combo, r)
                _write_csv(path, TRACE_COLUMNS, trace_rows(trace, combo, cfg.epoch_length, cfg.record_timing))
                if not quiet:
                    last = trace.records[-1]
                    log.info("%s: final loss %.6g, grad norm %.6g%s", path.name, last.train_loss,
                             last.grad_norm, " (diverged)" if trace.diverged else "")
            summary.extend(summarize(traces, combo, cfg.epoch_length))
        _write_csv(out_dir / "summary.csv", SUMMARY_COLUMNS, summary)
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_RUNTIME
    except ValueError as exc:
        log.error("run failed: %s", exc)
        return EXIT_RUNTIME
    return EXIT_OK


def run_timing(cfg: ExperimentConfig, out_dir: Path, quiet: bool = False) -> int:
    tc = cfg.timing
    try:
        rows = emit_timing(tc["m"], tc["d"], rules=tc["rules"], b=tc["b"], n_r=tc["n_r"],
                           iterations=tc["iterations"], seed=cfg.base.seed)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_csv(out_dir / "timing.csv", TIMING_COLUMNS,
                   ([fmt(getattr(r, c)) for c in TIMING_COLUMNS] for r in rows))
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_RUNTIME
    if not quiet and len(tc["m"]) > 1:
        for rule in tc["rules"]:
            sel = [r for r in rows if r.rule == rule]
            log.info("%s: log-log slope of time vs m = %.3f", rule,
                     loglog_slope([r.m for r in sel], [r.median_ns for r in sel]))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="zenosim", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the experiment grid")
    run.add_argument("--config", required=True)
    run.add_argument("--out")
    run.add_argument("--seed", type=int)
    run.add_argument("--quiet", action="store_true")
    timing = sub.add_parser("timing", help="time aggregation rules against m")
    timing.add_argument("--config", required=True)
    timing.add_argument("--out")
    timing.add_argument("--quiet", action="store_true")
    val = sub.add_parser("validate", help="check a config file")
    val.add_argument("--config", required=True)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if getattr(args, "quiet", False) else logging.INFO,
                        format="%(message)s")
    try:
        cfg = parse_config(args.config)
        if getattr(args, "seed", None) is not None:
            if args.seed < 0 or args.seed >= 2 ** 64:
                raise ConfigError("seed", "must be an unsigned 64-bit integer")
            cfg = replace(cfg, base=replace(cfg.base, seed=args.seed))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "validate":
        n = len(cfg.combinations())
        print(f"ok: {n} combination(s) x {cfg.repeats} repeat(s)")
        return EXIT_OK
    out_dir = resolve_out_dir(args.out, cfg)
    if args.command == "timing":
        return run_timing(cfg, out_dir, args.quiet)
    return run_suite(cfg, out_dir, args.quiet)


if __name__ == "__main__":
    sys.exit(main())
