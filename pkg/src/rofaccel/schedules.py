"""The three hardware execution schedules.

* sequential -- the unoptimized architecture: one scalar engine walks the
  full loop nest, no overlap.
* inner-parallel -- the dual-ended optimization: each conv layer's feature-map
  loop runs from both ends of the buffer at once (positions ``i`` and
  ``I-i-1`` per step, the middle position of an odd-length map computed once
  by the low side), with activation fused at the last kernel tap and pooling
  fused at odd positions.  Feature-map work halves; the fully-connected
  decision and the control overhead do not.
* fully-unrolled -- the conv multiply-accumulate loops unroll into parallel
  units and stream feature-map positions through a pipeline with initiation
  interval 1; activation, pooling and the decision layer remain sequential
  phases, which is what bounds the achievable speedup.

All three schedules execute the same canonical arithmetic (a single output's
accumulation order never changes), so their outputs are bit-identical by
construction; they differ only in the execution trace.  Pipelining is modeled
as fill + one result per cycle, not emulated register-by-register.

Binarized layers are modeled on their integer score datapath (XNOR, popcount,
shift, subtract) regardless of the arithmetic mode used for the desk-side
numeric evaluation.

Trace text format, consumed by the cost model and the CLI: one ``unit``
line per loop level (name, width) and one ``op`` line per primitive
(name, count, cycles contribution); contributions sum to the total.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

from . import nn_core
from .cost_model import (
    CONTROL,
    FADD,
    FCMP,
    FMUL,
    FSUB,
    POPCOUNT_BIT,
    SHIFT,
    XNOR,
    ResourceProfile,
    default_profile,
)
from .errors import ConfigError, FileFormatError
from .nn_core import FIXED, NetworkSpec, Tensor1D


class ScheduleKind(enum.Enum):
    SEQUENTIAL = "sequential"
    INNER_PARALLEL = "inner-parallel"
    FULLY_UNROLLED = "fully-unrolled"

    @classmethod
    def parse(cls, text: str) -> "ScheduleKind":
        try:
            return cls(text)
        except ValueError:
            raise ConfigError(f"unknown schedule {text!r}; expected one of "
                              f"{[k.value for k in cls]}") from None


@dataclass(frozen=True)
class ExecutionTrace:
    schedule: ScheduleKind
    op_counts: dict  # primitive -> count; identical across schedules
    cycles: int
    parallel_units: dict  # loop level -> width
    contributions: dict  # primitive (and CONTROL) -> cycles attributed

    def to_text(self) -> str:
        lines = [f"schedule {self.schedule.value}", f"cycles {self.cycles}"]
        for name in sorted(self.parallel_units):
            lines.append(f"unit {name} {self.parallel_units[name]}")
        for prim in sorted(self.op_counts):
            lines.append(f"op {prim} {self.op_counts[prim]} {self.contributions.get(prim, 0)}")
        if CONTROL in self.contributions:
            lines.append(f"op {CONTROL} 1 {self.contributions[CONTROL]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExecutionTrace":
        schedule = None
        cycles = None
        units: dict = {}
        counts: dict = {}
        contribs: dict = {}
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "schedule" and len(parts) == 2:
                schedule = ScheduleKind(parts[1])
            elif parts[0] == "cycles" and len(parts) == 2:
                cycles = int(parts[1])
            elif parts[0] == "unit" and len(parts) == 3:
                units[parts[1]] = int(parts[2])
            elif parts[0] == "op" and len(parts) == 4:
                if parts[1] != CONTROL:
                    counts[parts[1]] = int(parts[2])
                contribs[parts[1]] = int(parts[3])
            else:
                raise FileFormatError(f"bad trace line: {line!r}")
        if schedule is None or cycles is None:
            raise FileFormatError("trace missing schedule/cycles header")
        if sum(contribs.values()) != cycles:
            raise FileFormatError("trace contributions do not sum to cycles")
        return cls(schedule, counts, cycles, units, contribs)


class _Stage(NamedTuple):
    name: str
    counts: dict  # primitive -> total op count (canonical work)
    cycles: int
    lead: str  # primitive the cycles are attributed to when pipelined


def _ceil_log2(n: int) -> int:
    return max(0, (n - 1).bit_length())


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def _mac_per_position(shape, arithmetic: str) -> dict:
    if shape.binary:
        window = shape.in_channels * shape.kernel_size
        # XNOR the window, popcount it, recenter 2*pop - W (shift + subtract),
        # add the bias.
        return {XNOR: window, POPCOUNT_BIT: window, SHIFT: 1, FSUB: 1, FADD: 1}
    taps = shape.in_channels * shape.kernel_size
    return {FMUL: taps, FADD: taps}


def _act_per_position(shape, arithmetic: str) -> dict:
    if shape.binary or arithmetic == FIXED:
        return {FCMP: 1, SHIFT: 1}
    return {FCMP: 1, FMUL: 1}


def _scale(ops: dict, factor: int) -> dict:
    return {prim: count * factor for prim, count in ops.items()}


def _cycles_of(ops: dict, profile: ResourceProfile) -> int:
    return sum(count * profile.cost(prim) for prim, count in ops.items())


def unroll_widths(net: NetworkSpec, profile: ResourceProfile) -> list:
    """Unroll widths (kernel, in-channel, out-channel) per conv layer for the
    fully-unrolled schedule.

    The chooser is greedy: widest legal unroll of the kernel loop first, then
    input channels, then output channels, within the per-layer share of the
    resource budget.  ``None`` budgets mean unconstrained.
    """
    shapes = net.layer_shapes()
    real_layers = [s for s in shapes if not s.binary] or [None]
    binary_layers = [s for s in shapes if s.binary]
    unit_dsp = profile.dsp_per_fmul + profile.dsp_per_fadd
    unit_lut = profile.lut_per_xnor_bit + profile.lut_per_popcount_bit
    widths = []
    for shape in shapes:
        if shape.binary:
            budget_units = None
            if profile.lut_budget is not None:
                budget_units = (profile.lut_budget // max(1, len(binary_layers))) // max(1, unit_lut)
        else:
            budget_units = None
            if profile.dsp_budget is not None:
                budget_units = (profile.dsp_budget // len(real_layers)) // max(1, unit_dsp)
        demanded = shape.out_channels * shape.in_channels * shape.kernel_size
        units = demanded if budget_units is None else min(demanded, budget_units)
        if units < 1:
            raise ConfigError("resource budget admits zero parallel units")
        w_k = min(shape.kernel_size, units)
        w_c = min(shape.in_channels, units // w_k)
        w_n = min(shape.out_channels, units // (w_k * w_c))
        widths.append((w_k, w_c, w_n))
    return widths


def _conv_stages(idx: int, shape, arithmetic: str, kind: ScheduleKind,
                 profile: ResourceProfile, width: tuple | None) -> list:
    """Stages for one conv layer under one schedule."""
    name = f"conv{idx}"
    positions = shape.out_channels * shape.conv_len
    pool_ops_total = shape.out_channels * shape.pool_len
    mac_pp = _mac_per_position(shape, arithmetic)
    act_pp = _act_per_position(shape, arithmetic)
    mac_counts = _scale(mac_pp, positions)
    act_counts = _scale(act_pp, positions)
    pool_counts = {FCMP: pool_ops_total}

    if kind is ScheduleKind.SEQUENTIAL:
        mac_cycles = _cycles_of(mac_counts, profile)
        act_cycles = _cycles_of(act_counts, profile)
        pool_cycles = _cycles_of(pool_counts, profile)
    elif kind is ScheduleKind.INNER_PARALLEL:
        # Two positions per step (both stream ends); odd-length maps compute
        # the middle position once on the low side, hence the ceilings.
        steps = shape.out_channels * _ceil_div(shape.conv_len, 2)
        pool_steps = shape.out_channels * _ceil_div(shape.pool_len, 2)
        mac_cycles = _cycles_of(_scale(mac_pp, steps), profile)
        act_cycles = _cycles_of(_scale(act_pp, steps), profile)
        pool_cycles = _cycles_of({FCMP: pool_steps}, profile)
    else:  # FULLY_UNROLLED
        units = width[0] * width[1] * width[2]
        act_cycles = _cycles_of(act_counts, profile)
        pool_cycles = _cycles_of(pool_counts, profile)
        if units == 1:
            # Budget capped to the sequential engine: no pipeline.
            mac_cycles = _cycles_of(mac_counts, profile)
        else:
            window = shape.in_channels * shape.kernel_size
            tree = min(units, window)
            if shape.binary:
                fill = (
                    profile.cost(XNOR)
                    + (_ceil_log2(tree) + 1) * profile.cost(POPCOUNT_BIT)
                    + profile.cost(SHIFT)
                    + profile.cost(FSUB)
                    + profile.cost(FADD)
                )
            else:
                fill = profile.cost(FMUL) + (_ceil_log2(tree) + 1) * profile.cost(FADD)
            slots = positions * window
            mac_cycles = fill + _ceil_div(slots, units)  # II = 1 after fill
    lead = XNOR if shape.binary else FMUL
    return [
        _Stage(f"{name}.mac", mac_counts, mac_cycles, lead),
        _Stage(f"{name}.act", act_counts, act_cycles, FCMP),
        _Stage(f"{name}.pool", pool_counts, pool_cycles, FCMP),
    ]


def _fc_stage(net: NetworkSpec, profile: ResourceProfile) -> list:
    fc = net.fc
    mac = {FMUL: fc.out_classes * fc.in_features, FADD: fc.out_classes * fc.in_features}
    argmax = {FCMP: fc.out_classes - 1}
    return [
        _Stage("fc.mac", mac, _cycles_of(mac, profile), FMUL),
        _Stage("fc.argmax", argmax, _cycles_of(argmax, profile), FCMP),
    ]


def _stages(net: NetworkSpec, kind: ScheduleKind, profile: ResourceProfile) -> list:
    shapes = net.layer_shapes()
    widths = unroll_widths(net, profile) if kind is ScheduleKind.FULLY_UNROLLED else [None] * len(shapes)
    stages = []
    for idx, shape in enumerate(shapes, start=1):
        stages.extend(_conv_stages(idx, shape, net.arithmetic, kind, profile, widths[idx - 1]))
    stages.extend(_fc_stage(net, profile))
    stages.append(_Stage("control", {}, profile.inference_overhead_cycles, CONTROL))
    return stages


def stage_cycles(net: NetworkSpec, kind, profile: ResourceProfile | None = None) -> dict:
    """Per-stage cycle breakdown (stage name -> cycles) for one schedule."""
    profile = profile or default_profile()
    return {s.name: s.cycles for s in _stages(net, ScheduleKind(kind), profile)}


def build_trace(net: NetworkSpec, kind, profile: ResourceProfile | None = None) -> ExecutionTrace:
    profile = profile or default_profile()
    kind = ScheduleKind(kind)
    stages = _stages(net, kind, profile)

    op_counts: dict = {}
    contributions: dict = {}
    cycles = 0
    for stage in stages:
        cycles += stage.cycles
        for prim, count in stage.counts.items():
            op_counts[prim] = op_counts.get(prim, 0) + count
        if stage.name == "control":
            contributions[CONTROL] = contributions.get(CONTROL, 0) + stage.cycles
            continue
        stage_cost = _cycles_of(stage.counts, profile)
        if stage.cycles == stage_cost:
            # Unpipelined stage: attribute per primitive exactly.
            for prim, count in stage.counts.items():
                contributions[prim] = contributions.get(prim, 0) + count * profile.cost(prim)
        else:
            # Pipelined or folded stage: attribute to the lead primitive.
            contributions[stage.lead] = contributions.get(stage.lead, 0) + stage.cycles

    for prim in op_counts:
        contributions.setdefault(prim, 0)

    units = {"feature_map": 2 if kind is ScheduleKind.INNER_PARALLEL else 1, "fc": 1}
    widths = unroll_widths(net, profile) if kind is ScheduleKind.FULLY_UNROLLED else None
    for idx in range(1, len(net.conv_layers) + 1):
        w = widths[idx - 1] if widths is not None else (1, 1, 1)
        units[f"conv{idx}.kernel"] = w[0]
        units[f"conv{idx}.in_channel"] = w[1]
        units[f"conv{idx}.out_channel"] = w[2]

    return ExecutionTrace(kind, op_counts, cycles, units, contributions)


def _run(net: NetworkSpec, x: Tensor1D, kind: ScheduleKind, profile: ResourceProfile | None):
    profile = profile or default_profile()
    trace = build_trace(net, kind, profile)  # validates budgets before any work
    result = nn_core.forward(net, x)
    return result, trace


def run_sequential(net: NetworkSpec, x: Tensor1D, profile: ResourceProfile | None = None):
    """Unoptimized architecture: full loop nest, no overlap."""
    return _run(net, x, ScheduleKind.SEQUENTIAL, profile)


def run_inner_parallel(net: NetworkSpec, x: Tensor1D, profile: ResourceProfile | None = None):
    """Dual-ended schedule: feature maps computed from both ends at once.

    Output is bit-identical to the sequential schedule: the dual-ended loop
    computes disjoint output positions per step and never reorders a single
    output's accumulation (verified against a literal mirrored traversal in
    the test suite).
    """
    return _run(net, x, ScheduleKind.INNER_PARALLEL, profile)


def run_fully_unrolled(net: NetworkSpec, x: Tensor1D, profile: ResourceProfile | None = None):
    """Unrolled + pipelined conv loops; activation/pooling/decision stay
    sequential phases."""
    return _run(net, x, ScheduleKind.FULLY_UNROLLED, profile)
