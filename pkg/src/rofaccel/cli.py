"""Command-line surface.

Subcommands: gen-data, train, infer, ber-sweep, cost-report, efficiency.
Machine-readable outputs only (binary containers and CSV); every CSV starts
with a ``# config: {...}`` echo of the effective configuration so outputs are
self-describing.  Config precedence is CLI flag > config file > built-in
default.

Exit codes: 0 success, 2 usage error, 3 I/O error, 4 validation error.
The only environment variable honored is ROFACCEL_VERBOSE (progress notes on
stderr).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys

from . import __version__, channel, cost_model, defaults, nn_core, schedules, training
from .errors import ConfigError, DomainError, FileFormatError, ShapeError
from .numerics import Q16_8

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_VALIDATION = 4


def _verbose() -> bool:
    return os.environ.get("ROFACCEL_VERBOSE", "") not in ("", "0")


def _note(message: str) -> None:
    if _verbose():
        print(message, file=sys.stderr)


def _echo_line(config: dict) -> str:
    return "# config: " + json.dumps(config, sort_keys=True)


def _write_csv(path: str, columns, rows, echo: dict) -> None:
    lines = [_echo_line(echo), ",".join(columns)]
    lines.extend(",".join(row) for row in rows)
    text = "\n".join(lines) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _load_network(spec: str) -> nn_core.NetworkSpec:
    if spec in ("cnn-default", "bcnn-default"):
        return defaults.build_named_network(spec)
    return nn_core.load_weights(spec)


def _apply_arithmetic(net: nn_core.NetworkSpec, arithmetic: str) -> nn_core.NetworkSpec:
    if arithmetic == "real32":
        return net.with_arithmetic(nn_core.REAL32, None)
    if arithmetic == "q16.8":
        return net.with_arithmetic(nn_core.FIXED, Q16_8)
    raise ConfigError(f"unknown arithmetic {arithmetic!r} (use real32 or q16.8)")


# ---------------------------------------------------------------------------
# gen-data
# ---------------------------------------------------------------------------


def _channel_config_from_args(args) -> channel.ChannelConfig:
    base: dict = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            base = json.load(fh)
    cfg = channel.ChannelConfig.from_dict(base)
    overrides = {}
    if args.seed is not None:
        overrides["rng_seed"] = args.seed
    if args.snr_db is not None:
        overrides["snr_db"] = math.inf if args.snr_db == "inf" else float(args.snr_db)
    if args.taps is not None:
        overrides["isi_taps"] = tuple(float(t) for t in args.taps.split(","))
    if args.gain is not None:
        overrides["nonlinearity_gain"] = args.gain
    if args.sps is not None:
        overrides["samples_per_symbol"] = args.sps
    if args.spf is not None:
        overrides["symbols_per_frame"] = args.spf
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def _cmd_gen_data(args) -> int:
    cfg = _channel_config_from_args(args)
    dataset = channel.generate(cfg, args.symbols)
    channel.save_dataset(dataset, args.out)
    _note(f"wrote {dataset.n_frames} frames to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


def _cmd_train(args) -> int:
    dataset = channel.load_dataset(args.data)
    template = _load_network(args.net)
    base = defaults.default_train_config(template.kind)
    overrides = {
        key: value
        for key, value in (
            ("epochs", args.epochs),
            ("batch_size", args.batch_size),
            ("learning_rate", args.lr),
            ("optimizer", args.optimizer),
            ("rng_seed", args.seed),
            ("validation_fraction", args.val_fraction),
        )
        if value is not None
    }
    cfg = dataclasses.replace(base, **overrides) if overrides else base
    net, history = training.train(template, dataset, cfg)
    nn_core.save_weights(net, args.out)
    if args.log:
        echo = {"command": "train", "net": args.net, "data": args.data, **dataclasses.asdict(cfg)}
        _write_csv(args.log, training.EpochStats.CSV_COLUMNS, [h.csv_row() for h in history], echo)
    _note(f"trained {template.kind} for {cfg.epochs} epochs -> {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# infer
# ---------------------------------------------------------------------------


def _cmd_infer(args) -> int:
    net = _apply_arithmetic(_load_network(args.weights), args.arithmetic)
    schedules.ScheduleKind.parse(args.schedule)  # schedule affects the trace, not the bits
    dataset = channel.load_dataset(args.data)
    decisions, _ = nn_core.forward_batch(net, dataset.windows)
    rows = [
        [str(i), str(int(d)), str(int(l))]
        for i, (d, l) in enumerate(zip(decisions, dataset.labels))
    ]
    echo = {
        "command": "infer",
        "weights": args.weights,
        "data": args.data,
        "schedule": args.schedule,
        "arithmetic": args.arithmetic,
        "version": __version__,
    }
    _write_csv(args.out, ("frame", "decision", "label"), rows, echo)
    _note(f"ber={channel.ber(decisions, dataset.labels):.6f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# ber-sweep
# ---------------------------------------------------------------------------


def _sweep_points(args):
    if args.sweep == "default":
        spec = defaults.load_default_sweep()
        points = spec["points"]
        base_seed = spec["base_seed"] if args.base_seed is None else args.base_seed
        n_symbols = spec["n_symbols"] if args.symbols is None else args.symbols
    else:
        with open(args.sweep, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        points = [
            channel.SweepPoint(p["config_id"], p["isi_id"], channel.ChannelConfig.from_dict(p["config"]))
            for p in raw["points"]
        ]
        base_seed = raw.get("base_seed", 0) if args.base_seed is None else args.base_seed
        n_symbols = raw.get("n_symbols", 100000) if args.symbols is None else args.symbols
    return points, base_seed, n_symbols


def _cmd_ber_sweep(args) -> int:
    points, base_seed, n_symbols = _sweep_points(args)
    if args.detector == "threshold":
        net = None
        rows = channel.ber_sweep(None, points, n_symbols, base_seed, detector=channel.threshold_decisions)
    elif not args.weights:
        raise ConfigError("--weights is required unless --detector threshold")
    else:
        net = _apply_arithmetic(_load_network(args.weights), args.arithmetic)
        rows = channel.ber_sweep(net, points, n_symbols, base_seed)
    echo = {
        "command": "ber-sweep",
        "weights": None if net is None else args.weights,
        "detector": args.detector,
        "sweep": args.sweep,
        "base_seed": base_seed,
        "n_symbols": n_symbols,
        "arithmetic": args.arithmetic,
        "version": __version__,
    }
    _write_csv(args.out, channel.SweepRow.CSV_COLUMNS, [r.csv_row() for r in rows], echo)
    return EXIT_OK


# ---------------------------------------------------------------------------
# cost-report
# ---------------------------------------------------------------------------


def _profile_from_args(args) -> cost_model.ResourceProfile:
    overrides: dict = {}
    if args.profile:
        with open(args.profile, "r", encoding="utf-8") as fh:
            overrides = json.load(fh)
    if args.clock_mhz is not None:
        overrides["clock_hz"] = args.clock_mhz * 1e6
    if args.dsp_budget is not None:
        overrides["dsp_budget"] = args.dsp_budget
    if not overrides:
        return cost_model.default_profile()
    valid = {f.name for f in dataclasses.fields(cost_model.ResourceProfile)}
    unknown = set(overrides) - valid
    if unknown:
        raise ConfigError(f"unknown profile fields: {sorted(unknown)}")
    return dataclasses.replace(cost_model.default_profile(), **overrides)


_SCHEDULE_ORDER = (
    schedules.ScheduleKind.SEQUENTIAL,
    schedules.ScheduleKind.INNER_PARALLEL,
    schedules.ScheduleKind.FULLY_UNROLLED,
)


def _cmd_cost_report(args) -> int:
    net = _apply_arithmetic(_load_network(args.net), args.arithmetic)
    profile = _profile_from_args(args)
    kinds = _SCHEDULE_ORDER if args.schedule == "all" else (schedules.ScheduleKind.parse(args.schedule),)
    reports = [cost_model.estimate(net, kind, profile) for kind in kinds]
    echo = {
        "command": "cost-report",
        "net": args.net,
        "arithmetic": args.arithmetic,
        "schedule": args.schedule,
        "clock_hz": profile.clock_hz,
        "dsp_budget": profile.dsp_budget,
        "version": __version__,
    }
    _write_csv(args.out, cost_model.CostReport.CSV_COLUMNS, [r.csv_row() for r in reports], echo)
    return EXIT_OK


def _cmd_trace(args) -> int:
    net = _apply_arithmetic(_load_network(args.net), args.arithmetic)
    profile = _profile_from_args(args)
    kind = schedules.ScheduleKind.parse(args.schedule)
    trace = schedules.build_trace(net, kind, profile)
    text = trace.to_text()
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# efficiency
# ---------------------------------------------------------------------------


def _parse_measurement(text: str, label: str) -> cost_model.PlatformMeasurement:
    parts = text.split(",")
    if len(parts) != 2:
        raise ConfigError(f"--{label} expects 'latency_seconds,power_watts', got {text!r}")
    try:
        latency, power = float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise ConfigError(f"--{label}: {exc}") from exc
    return cost_model.PlatformMeasurement(latency, power, label)


def _cmd_efficiency(args) -> int:
    base = _parse_measurement(args.base, "base")
    opt = _parse_measurement(args.opt, "opt")
    index = cost_model.efficiency_index(base, opt)
    print("not-applicable" if index is None else f"{index:.2f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rofaccel", description=__doc__)
    parser.add_argument("--version", action="version", version=f"rofaccel {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="synthesize a channel dataset")
    p.add_argument("--config", help="JSON file with channel fields")
    p.add_argument("--symbols", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--snr-db", dest="snr_db")
    p.add_argument("--taps", help="comma-separated FIR taps")
    p.add_argument("--gain", type=float, help="third-order compression coefficient")
    p.add_argument("--sps", type=int, help="samples per symbol")
    p.add_argument("--spf", type=int, help="symbols per frame (odd)")
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train", help="train weights on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--net", default="cnn-default", help="cnn-default, bcnn-default or a weights file")
    p.add_argument("--out", required=True)
    p.add_argument("--log", help="training log CSV")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--optimizer", choices=("adam", "sgd"))
    p.add_argument("--seed", type=int)
    p.add_argument("--val-fraction", type=float)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("infer", help="run a trained network over a dataset")
    p.add_argument("--weights", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--schedule", default="sequential")
    p.add_argument("--arithmetic", default="real32")
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("ber-sweep", help="BER over a sweep of channel configs")
    p.add_argument("--weights", help="required unless --detector threshold")
    p.add_argument("--sweep", default="default", help="'default' or a sweep JSON")
    p.add_argument("--symbols", type=int)
    p.add_argument("--base-seed", type=int)
    p.add_argument("--detector", choices=("network", "threshold"), default="network")
    p.add_argument("--arithmetic", default="real32")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ber_sweep)

    p = sub.add_parser("cost-report", help="resource/latency estimates per schedule")
    p.add_argument("--net", default="cnn-default")
    p.add_argument("--schedule", default="all")
    p.add_argument("--arithmetic", default="real32")
    p.add_argument("--profile", help="JSON resource-profile overrides")
    p.add_argument("--clock-mhz", type=float)
    p.add_argument("--dsp-budget", type=int)
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_cost_report)

    p = sub.add_parser("trace", help="dump one schedule's execution trace")
    p.add_argument("--net", default="cnn-default")
    p.add_argument("--schedule", default="sequential")
    p.add_argument("--arithmetic", default="real32")
    p.add_argument("--profile")
    p.add_argument("--clock-mhz", type=float)
    p.add_argument("--dsp-budget", type=int)
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_trace)

    p = sub.add_parser("efficiency", help="latency/power efficiency index")
    p.add_argument("--base", required=True, help="latency_seconds,power_watts")
    p.add_argument("--opt", required=True, help="latency_seconds,power_watts")
    p.set_defaults(func=_cmd_efficiency)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except (ConfigError, DomainError, ShapeError) as exc:
        print(f"rofaccel: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileFormatError as exc:
        print(f"rofaccel: file error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"rofaccel: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
