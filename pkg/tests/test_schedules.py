import dataclasses

import numpy as np
import pytest
from oracles import dual_ended_layer_oracle, sequential_cycles_oracle

from rofaccel import nn_core
from rofaccel.cost_model import CONTROL, default_profile
from rofaccel.defaults import build_default_bcnn, build_default_cnn
from rofaccel.errors import ConfigError
from rofaccel.nn_core import (
    FIXED,
    ConvLayerSpec,
    FCLayerSpec,
    KernelSet,
    NetworkSpec,
    Tensor1D,
)
from rofaccel.numerics import Q16_8
from rofaccel.schedules import (
    ExecutionTrace,
    ScheduleKind,
    build_trace,
    run_fully_unrolled,
    run_inner_parallel,
    run_sequential,
    stage_cycles,
    unroll_widths,
)

from conftest import random_input, random_network

ALL_KINDS = (ScheduleKind.SEQUENTIAL, ScheduleKind.INNER_PARALLEL, ScheduleKind.FULLY_UNROLLED)


def _single_channel_net():
    # conv2 sees exactly the "R=4, F=3" single-unit stage of interest
    # (1 output channel, 2 positions); conv1 only feeds it.
    conv1 = ConvLayerSpec(KernelSet(np.ones((1, 1, 3), np.float32), np.zeros(1, np.float32)))
    conv2 = ConvLayerSpec(KernelSet(np.ones((1, 1, 3), np.float32), np.zeros(1, np.float32)))
    fc = FCLayerSpec(np.ones((2, 1), np.float32), np.zeros(2, np.float32))
    return NetworkSpec(kind="cnn", input_length=10, conv_layers=(conv1, conv2), fc=fc)


class TestStageClosedForms:
    def test_conv_mac_loop_nest_count(self):
        # R=4, F=3, S=1, one unit-cost MAC engine:
        # 2 output positions x 3 taps x (1 mul + 1 add) = 12 cycles
        net = _single_channel_net()
        stages = stage_cycles(net, ScheduleKind.SEQUENTIAL)
        assert stages["conv2.mac"] == 12
        assert stages["conv1.mac"] == 1 * 8 * 3 * 2  # N*L*F*(mul+add), L=8

    def test_sequential_total_matches_closed_form_oracle(self):
        for net in (build_default_cnn(), build_default_bcnn()):
            trace = build_trace(net, ScheduleKind.SEQUENTIAL)
            assert trace.cycles == sequential_cycles_oracle(net, default_profile())

    def test_sequential_total_matches_closed_form_fixed_mode(self):
        net = build_default_cnn(arithmetic=FIXED)
        trace = build_trace(net, ScheduleKind.SEQUENTIAL)
        assert trace.cycles == sequential_cycles_oracle(net, default_profile())

    def test_inner_parallel_halves_even_feature_loops(self):
        net = build_default_cnn()  # all conv lengths and pool counts even
        seq = stage_cycles(net, ScheduleKind.SEQUENTIAL)
        ip = stage_cycles(net, ScheduleKind.INNER_PARALLEL)
        for stage in ("conv1.mac", "conv1.act", "conv1.pool", "conv2.mac", "conv2.act", "conv2.pool"):
            assert ip[stage] * 2 == seq[stage]
        for stage in ("fc.mac", "fc.argmax", "control"):
            assert ip[stage] == seq[stage]

    def test_fully_unrolled_conv_is_fill_plus_length(self):
        net = build_default_cnn()
        fu = stage_cycles(net, ScheduleKind.FULLY_UNROLLED)
        # conv1: window 5 -> fill = 1 + (ceil(log2 5)+1) = 5, plus 32 positions
        assert fu["conv1.mac"] == 5 + 32
        # conv2: window 40 -> fill = 1 + (6+1) = 8, plus 12 positions
        assert fu["conv2.mac"] == 8 + 12
        seq = stage_cycles(net, ScheduleKind.SEQUENTIAL)
        for stage in ("conv1.act", "conv2.pool", "fc.mac", "control"):
            assert fu[stage] == seq[stage]


class TestTraceAccounting:
    def test_op_counts_schedule_independent(self, rng):
        for _ in range(10):
            net = random_network(rng, kind=rng.choice(["cnn", "bcnn"]))
            counts = [build_trace(net, k).op_counts for k in ALL_KINDS]
            assert counts[0] == counts[1] == counts[2]

    def test_sequential_units_all_one(self):
        trace = build_trace(build_default_cnn(), ScheduleKind.SEQUENTIAL)
        assert all(w == 1 for w in trace.parallel_units.values())

    def test_inner_parallel_feature_map_width_two(self):
        trace = build_trace(build_default_cnn(), ScheduleKind.INNER_PARALLEL)
        assert trace.parallel_units["feature_map"] == 2
        others = {k: v for k, v in trace.parallel_units.items() if k != "feature_map"}
        assert all(w == 1 for w in others.values())

    def test_unrolled_widths_reported(self):
        trace = build_trace(build_default_cnn(), ScheduleKind.FULLY_UNROLLED)
        u = trace.parallel_units
        assert u["conv1.kernel"] == 5 and u["conv1.in_channel"] == 1 and u["conv1.out_channel"] == 8
        assert u["conv2.kernel"] == 5 and u["conv2.in_channel"] == 8 and u["conv2.out_channel"] == 16

    def test_contributions_sum_to_cycles(self, rng):
        for kind in ALL_KINDS:
            net = random_network(rng)
            trace = build_trace(net, kind)
            assert sum(trace.contributions.values()) == trace.cycles

    def test_text_roundtrip(self):
        for kind in ALL_KINDS:
            trace = build_trace(build_default_bcnn(), kind)
            parsed = ExecutionTrace.from_text(trace.to_text())
            assert parsed.schedule == trace.schedule
            assert parsed.cycles == trace.cycles
            assert parsed.op_counts == trace.op_counts
            assert parsed.parallel_units == trace.parallel_units
            assert parsed.contributions == trace.contributions

    def test_text_rejects_inconsistent_totals(self):
        trace = build_trace(build_default_cnn(), ScheduleKind.SEQUENTIAL)
        text = trace.to_text().replace(f"cycles {trace.cycles}", f"cycles {trace.cycles + 1}")
        with pytest.raises(nn_core.FileFormatError):
            ExecutionTrace.from_text(text)

    def test_control_overhead_in_contributions(self):
        trace = build_trace(build_default_cnn(), ScheduleKind.SEQUENTIAL)
        assert trace.contributions[CONTROL] == default_profile().inference_overhead_cycles


class TestNumericEquivalence:
    def test_all_schedules_bit_identical(self, rng):
        for _ in range(25):
            kind = rng.choice(["cnn", "bcnn"])
            net = random_network(rng, kind=kind)
            for fixed in (False, True):
                n = net.with_arithmetic(FIXED, Q16_8) if fixed else net
                x = random_input(rng, n, fixed=fixed)
                out_seq, trace_seq = run_sequential(n, x)
                out_ip, trace_ip = run_inner_parallel(n, x)
                out_fu, trace_fu = run_fully_unrolled(n, x)
                assert np.array_equal(out_seq.scores, out_ip.scores)
                assert np.array_equal(out_seq.scores, out_fu.scores)
                assert out_seq.decision == out_ip.decision == out_fu.decision
                assert trace_seq.schedule is ScheduleKind.SEQUENTIAL
                assert trace_ip.schedule is ScheduleKind.INNER_PARALLEL
                assert trace_fu.schedule is ScheduleKind.FULLY_UNROLLED

    def test_dual_ended_traversal_matches_staged_path(self, rng):
        # The literal mirrored loop (positions i and I-1-i per step, fused
        # activation and pooling) must reproduce the staged canonical values
        # bit-for-bit, including odd feature-map lengths.
        for _ in range(30):
            c = int(rng.integers(1, 4))
            taps = int(rng.integers(1, 6))
            length = int(rng.integers(taps + 2, 20))
            n = int(rng.integers(1, 6))
            x = rng.uniform(-2, 2, (c, length)).astype(np.float32)
            w = rng.uniform(-1, 1, (n, c, taps)).astype(np.float32)
            b = rng.uniform(-1, 1, n).astype(np.float32)
            k = KernelSet(w, b)
            staged = nn_core.maxpool1d(nn_core.activate(nn_core.conv1d(Tensor1D(x), k)))
            mirrored = dual_ended_layer_oracle(x, w, b)
            assert np.array_equal(staged.data, mirrored)


class TestCycleModel:
    def test_monotone_under_parallelism(self, rng):
        # fully-unrolled <= inner-parallel <= sequential, given windows wide
        # enough that unrolling has something to parallelize
        for _ in range(10):
            net = random_network(rng, kind=rng.choice(["cnn", "bcnn"]), min_window=4)
            cycles = {k: build_trace(net, k).cycles for k in ALL_KINDS}
            assert cycles[ScheduleKind.FULLY_UNROLLED] <= cycles[ScheduleKind.INNER_PARALLEL]
            assert cycles[ScheduleKind.INNER_PARALLEL] <= cycles[ScheduleKind.SEQUENTIAL]

    def test_default_cnn_reduction_targets(self):
        net = build_default_cnn()
        seq = build_trace(net, ScheduleKind.SEQUENTIAL).cycles
        ip = build_trace(net, ScheduleKind.INNER_PARALLEL).cycles
        fu = build_trace(net, ScheduleKind.FULLY_UNROLLED).cycles
        assert 0.40 <= 1 - ip / seq <= 0.50
        assert abs((1 - ip / seq) - 0.4493) < 0.001
        assert abs((1 - fu / seq) - 0.8562) < 0.05

    def test_default_bcnn_reduction_target(self):
        net = build_default_bcnn()
        seq = build_trace(net, ScheduleKind.SEQUENTIAL).cycles
        ip = build_trace(net, ScheduleKind.INNER_PARALLEL).cycles
        assert abs((1 - ip / seq) - 0.4585) < 0.01

    def test_budget_capped_degenerates_to_sequential(self):
        net = build_default_cnn()
        seq = build_trace(net, ScheduleKind.SEQUENTIAL).cycles
        profile = dataclasses.replace(default_profile(), dsp_budget=15)
        capped = build_trace(net, ScheduleKind.FULLY_UNROLLED, profile)
        assert capped.cycles == seq
        assert all(w == 1 for k, w in capped.parallel_units.items())

    def test_zero_unit_budget_is_config_error(self, rng):
        net = build_default_cnn()
        profile = dataclasses.replace(default_profile(), dsp_budget=4)
        with pytest.raises(ConfigError):
            build_trace(net, ScheduleKind.FULLY_UNROLLED, profile)
        x = random_input(rng, net)
        with pytest.raises(ConfigError):
            run_fully_unrolled(net, x, profile)

    def test_intermediate_budget_partial_unroll(self):
        net = build_default_cnn()
        profile = dataclasses.replace(default_profile(), dsp_budget=200)
        widths = unroll_widths(net, profile)
        # 200 DSP / 2 layers / 5 per MAC unit = 20 units per layer
        assert widths[0] == (5, 1, 4)
        assert widths[1] == (5, 4, 1)
        cycles = build_trace(net, ScheduleKind.FULLY_UNROLLED, profile).cycles
        unconstrained = build_trace(net, ScheduleKind.FULLY_UNROLLED).cycles
        seq = build_trace(net, ScheduleKind.SEQUENTIAL).cycles
        assert unconstrained < cycles < seq
