"""FPGA cost and latency model.

Maps execution traces to DSP / BRAM(18Kb) / LUT estimates and wall-clock
latency at a given clock, and computes the latency-per-power efficiency
index used to compare optimization strategies.

Resource accounting is engine-based: every layer instantiates one scalar
compute engine (float multiply + add + compare, reused across its conv,
activation and pooling phases) under the sequential schedule; the
inner-parallel schedule duplicates every engine (one per stream end); the
fully-unrolled schedule instantiates one multiply-add unit per unrolled
multiply-accumulate slot.  Binarized layers map to logic (XNOR, popcount,
shift, integer ALU) and consume no DSP blocks in any schedule.

Calibration: per-primitive cycle costs default to 1.  The per-layer DSP
costs (3 per float multiplier, 2 per adder, 0 per comparator) and the
per-inference control overhead (1764 cycles) are fitted values, chosen so
the default sequential CNN lands on 15 DSPs and the modeled schedule
latency ratios land on the measured VC709 ratios; they are inputs to the
model, not derived quantities.  Absolute cycle counts and BRAM/LUT totals
are not calibration targets (platform DMA overheads are out of scope), only
the cross-schedule ratios are.
"""

from __future__ import annotations

import csv
import importlib.resources
from dataclasses import dataclass, field

from .errors import ConfigError
from .nn_core import FIXED, NetworkSpec

# Primitive operation names used in traces and cycle-cost tables.
FMUL = "FMUL"
FADD = "FADD"
FSUB = "FSUB"
FCMP = "FCMP"
XNOR = "XNOR"
POPCOUNT_BIT = "POPCOUNT_BIT"
SHIFT = "SHIFT"
PRIMITIVES = (FMUL, FADD, FSUB, FCMP, XNOR, POPCOUNT_BIT, SHIFT)

#: Pseudo-op for the fixed per-inference control/sequencing overhead.
CONTROL = "CONTROL"


def _unit_costs() -> dict:
    return {p: 1 for p in PRIMITIVES}


@dataclass(frozen=True)
class ResourceProfile:
    """Per-primitive costs, resource prices and clock for one target platform."""

    cycle_costs: dict = field(default_factory=_unit_costs)
    dsp_per_fmul: int = 3
    dsp_per_fadd: int = 2
    dsp_per_fcmp: int = 0
    lut_per_xnor_bit: int = 1
    lut_per_popcount_bit: int = 1
    lut_per_shift: int = 16
    lut_per_int_alu: int = 16
    lut_per_compare: int = 16
    lut_per_real_engine: int = 250
    lut_glue_per_unit: int = 8
    bram18k_per_kilobyte_params: float = 4.0 / 9.0  # one 18Kb block per 2.25 KB
    inference_overhead_cycles: int = 1764  # fitted, see module docstring
    clock_hz: float = 100e6
    dsp_budget: int | None = None  # None = unconstrained (fully-unrolled schedule)
    lut_budget: int | None = None

    def __post_init__(self) -> None:
        if self.clock_hz <= 0:
            raise ConfigError("clock_hz must be > 0")
        costs = dict(self.cycle_costs)
        for prim in PRIMITIVES:
            if costs.get(prim, 0) < 0:
                raise ConfigError(f"cycle cost for {prim} must be >= 0")
            costs.setdefault(prim, 1)
        object.__setattr__(self, "cycle_costs", costs)
        if self.inference_overhead_cycles < 0:
            raise ConfigError("inference_overhead_cycles must be >= 0")

    def cost(self, prim: str) -> int:
        return self.cycle_costs[prim]


def default_profile() -> ResourceProfile:
    """Profile for the 100 MHz VC709-like target used by the bundled configs."""
    return ResourceProfile()


@dataclass(frozen=True)
class CostReport:
    schedule: str
    dsp: int
    bram_18kb: float
    lut: int
    cycles: int
    latency_seconds: float

    #: CSV column order used everywhere this report is serialized.
    CSV_COLUMNS = ("schedule", "dsp", "bram_18kb", "lut", "cycles", "latency_s")

    def csv_row(self) -> list:
        return [
            self.schedule,
            str(self.dsp),
            f"{self.bram_18kb:.3f}",
            str(self.lut),
            str(self.cycles),
            f"{self.latency_seconds:.9e}",
        ]


@dataclass(frozen=True)
class PlatformMeasurement:
    """A measured (latency, power) point; power is always an input, never a
    model output."""

    latency_seconds: float
    power_watts: float
    label: str = ""

    def __post_init__(self) -> None:
        if self.latency_seconds <= 0 or self.power_watts <= 0:
            raise ConfigError("latency and power must be > 0")


def efficiency_index(base: PlatformMeasurement, optimized: PlatformMeasurement):
    """Fractional latency improvement divided by fractional power increase,
    both relative to the unoptimized baseline.

    Returns ``None`` ("not applicable") unless the optimized point is strictly
    faster and strictly hungrier than the baseline; equal powers would divide
    by zero and are part of the same guard.
    """
    if optimized.power_watts <= base.power_watts:
        return None
    if optimized.latency_seconds >= base.latency_seconds:
        return None
    latency_gain = (base.latency_seconds - optimized.latency_seconds) / base.latency_seconds
    power_increase = (optimized.power_watts - base.power_watts) / base.power_watts
    return latency_gain / power_increase


def estimate(net: NetworkSpec, schedule, profile: ResourceProfile | None = None) -> CostReport:
    """Resource and latency estimate for (network, schedule, profile)."""
    from .schedules import ScheduleKind, build_trace, unroll_widths

    profile = profile or default_profile()
    kind = ScheduleKind(schedule)
    trace = build_trace(net, kind, profile)
    shapes = net.layer_shapes()
    fixed_mode = net.arithmetic == FIXED

    real_engine_dsp = profile.dsp_per_fmul + profile.dsp_per_fadd + profile.dsp_per_fcmp
    binary_engine_lut = (
        profile.lut_per_xnor_bit
        + profile.lut_per_popcount_bit
        + 2 * profile.lut_per_shift  # recenter shift + activation shift
        + 2 * profile.lut_per_int_alu  # recenter subtract + bias add
        + profile.lut_per_compare
    )

    dup = 2 if kind is ScheduleKind.INNER_PARALLEL else 1
    widths = unroll_widths(net, profile) if kind is ScheduleKind.FULLY_UNROLLED else None

    dsp = 0
    lut = 0
    for idx, shape in enumerate(shapes):
        if shape.binary:
            if widths is not None:
                units = widths[idx][0] * widths[idx][1] * widths[idx][2]
                lut += units * (profile.lut_per_xnor_bit + profile.lut_per_popcount_bit)
                lut += binary_engine_lut
            else:
                lut += dup * binary_engine_lut
        else:
            if widths is not None:
                units = widths[idx][0] * widths[idx][1] * widths[idx][2]
                dsp += units * (profile.dsp_per_fmul + profile.dsp_per_fadd)
                # scalar activation/pool engine alongside the MAC array
                dsp += (0 if fixed_mode else profile.dsp_per_fmul) + profile.dsp_per_fcmp
                lut += profile.lut_per_real_engine + units * profile.lut_glue_per_unit
            else:
                dsp += dup * real_engine_dsp
                lut += dup * profile.lut_per_real_engine
            if fixed_mode:
                lut += dup * profile.lut_per_shift  # shift-based activation
    # fully-connected decision layer: scalar engine, doubled under inner-parallel
    fc_dup = dup
    dsp += fc_dup * real_engine_dsp
    lut += fc_dup * profile.lut_per_real_engine

    bram = _param_kilobytes(net) * profile.bram18k_per_kilobyte_params
    latency = trace.cycles / profile.clock_hz
    return CostReport(kind.value, dsp, bram, lut, trace.cycles, latency)


def _param_kilobytes(net: NetworkSpec) -> float:
    total_bytes = 0.0
    for layer in net.conv_layers:
        k = layer.kernels
        if layer.binary:
            total_bytes += k.weights.size / 8.0  # sign bits only
        else:
            total_bytes += k.weights.size * 4.0
        total_bytes += k.bias.size * 4.0
    total_bytes += net.fc.weights.size * 4.0 + net.fc.bias.size * 4.0
    return total_bytes / 1024.0


# ---------------------------------------------------------------------------
# Reference measurements (resource/latency/power tables)
# ---------------------------------------------------------------------------

_NUMERIC_FIELDS = ("freq_mhz", "dsp", "bram_18kb", "logic_luts", "latency_s", "power_w", "efficiency_index")


def load_reference_tables() -> list:
    """Bundled reference rows: per-platform resource and latency/power
    measurements of the modeled implementations.  Values here are inputs (comparison baselines
    and efficiency-index operands), never model outputs."""
    path = importlib.resources.files("rofaccel").joinpath("data/reference_tables.csv")
    rows = []
    with path.open("r", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            parsed = dict(row)
            for key in _NUMERIC_FIELDS:
                raw = row.get(key, "")
                parsed[key] = float(raw) if raw not in ("", None) else None
            rows.append(parsed)
    return rows


def reference_measurement(rows: list, network: str, device: str) -> PlatformMeasurement:
    for row in rows:
        if row["network"] == network and row["device"] == device and row["latency_s"] is not None:
            return PlatformMeasurement(row["latency_s"], row["power_w"], f"{network}/{device}")
    raise ConfigError(f"no reference measurement for {network}/{device}")
