import json

import pytest

from rofaccel import cli
from rofaccel.channel import load_dataset
from rofaccel.defaults import build_default_cnn
from rofaccel.nn_core import load_weights, save_weights


def run(*argv):
    return cli.main(list(argv))


@pytest.fixture
def small_dataset(tmp_path):
    path = tmp_path / "data.rfd"
    assert run(
        "gen-data", "--symbols", "1200", "--out", str(path),
        "--taps", "1.0,0.5,0.25", "--snr-db", "14", "--gain", "0.05", "--seed", "77",
    ) == 0
    return path


@pytest.fixture
def cnn_weights(tmp_path):
    path = tmp_path / "cnn.rfw"
    save_weights(build_default_cnn(), path)
    return path


class TestExitCodes:
    def test_unknown_flag_is_usage_error(self, capsys):
        assert run("cost-report", "--frobnicate") == 2

    def test_unknown_subcommand_is_usage_error(self):
        assert run("fly") == 2

    def test_missing_input_file_is_io_error(self, tmp_path):
        code = run("infer", "--weights", str(tmp_path / "none.rfw"),
                   "--data", str(tmp_path / "none.rfd"), "--out", "-")
        assert code == 3

    def test_bad_file_format_is_io_error(self, tmp_path):
        bad = tmp_path / "bad.rfw"
        bad.write_bytes(b"JUNKJUNKJUNK")
        assert run("infer", "--weights", str(bad), "--data", str(bad), "--out", "-") == 3

    def test_validation_error_is_exit_4(self, tmp_path):
        # even symbols_per_frame fails channel validation
        assert run("gen-data", "--symbols", "100", "--spf", "8",
                   "--out", str(tmp_path / "x.rfd")) == 4

    def test_bad_schedule_is_exit_4(self, cnn_weights, small_dataset):
        assert run("infer", "--weights", str(cnn_weights), "--data", str(small_dataset),
                   "--schedule", "warp", "--out", "-") == 4


class TestGenData:
    def test_writes_dataset(self, small_dataset):
        ds = load_dataset(small_dataset)
        assert ds.n_frames == 1200 - 9 + 1
        assert ds.config.rng_seed == 77

    def test_idempotent(self, tmp_path):
        a, b = tmp_path / "a.rfd", tmp_path / "b.rfd"
        args = ["gen-data", "--symbols", "500", "--snr-db", "12", "--seed", "5"]
        assert run(*args, "--out", str(a)) == 0
        assert run(*args, "--out", str(b)) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_config_file_with_flag_override(self, tmp_path):
        cfg_path = tmp_path / "chan.json"
        cfg_path.write_text(json.dumps({"snr_db": 10.0, "rng_seed": 1, "isi_taps": [1.0, 0.4]}))
        out = tmp_path / "d.rfd"
        assert run("gen-data", "--config", str(cfg_path), "--symbols", "300",
                   "--seed", "99", "--out", str(out)) == 0
        ds = load_dataset(out)
        assert ds.config.rng_seed == 99  # flag beats file
        assert ds.config.snr_db == 10.0  # file beats default
        assert ds.config.isi_taps == (1.0, 0.4)


class TestTrainInferCli:
    def test_train_then_infer(self, tmp_path, small_dataset):
        weights = tmp_path / "trained.rfw"
        log = tmp_path / "log.csv"
        assert run("train", "--data", str(small_dataset), "--net", "cnn-default",
                   "--epochs", "2", "--out", str(weights), "--log", str(log)) == 0
        net = load_weights(weights)
        assert net.kind == "cnn"
        lines = log.read_text().splitlines()
        assert lines[0].startswith("# config: ")
        assert lines[1] == "epoch,train_loss,val_loss,val_acc"
        assert len(lines) == 2 + 2

        out = tmp_path / "decisions.csv"
        assert run("infer", "--weights", str(weights), "--data", str(small_dataset),
                   "--out", str(out)) == 0
        rows = out.read_text().splitlines()
        assert rows[1] == "frame,decision,label"
        assert len(rows) == 2 + 1192

    def test_train_idempotent(self, tmp_path, small_dataset):
        a, b = tmp_path / "a.rfw", tmp_path / "b.rfw"
        for target in (a, b):
            assert run("train", "--data", str(small_dataset), "--epochs", "2",
                       "--seed", "3", "--out", str(target)) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_fixed_point_infer(self, tmp_path, small_dataset, cnn_weights):
        out = tmp_path / "fx.csv"
        assert run("infer", "--weights", str(cnn_weights), "--data", str(small_dataset),
                   "--arithmetic", "q16.8", "--out", str(out)) == 0
        assert out.read_text().splitlines()[1] == "frame,decision,label"


class TestBerSweepCli:
    def test_threshold_detector_sweep(self, tmp_path):
        sweep = {
            "base_seed": 4,
            "points": [
                {"config_id": "a", "isi_id": "none",
                 "config": {"isi_taps": [1.0], "snr_db": "inf", "rng_seed": 0}},
                {"config_id": "b", "isi_id": "mild",
                 "config": {"isi_taps": [1.0, 0.5], "snr_db": 8.0, "rng_seed": 0}},
            ],
        }
        sweep_path = tmp_path / "sweep.json"
        sweep_path.write_text(json.dumps(sweep))
        out = tmp_path / "sweep.csv"
        assert run("ber-sweep", "--detector", "threshold", "--sweep", str(sweep_path),
                   "--symbols", "4000", "--out", str(out)) == 0
        lines = out.read_text().splitlines()
        assert lines[1] == "config_id,snr_db,isi_id,n_symbols,errors,ber"
        assert len(lines) == 2 + 2
        first = lines[2].split(",")
        assert first[0] == "a" and first[5] == "0.00000000"

    def test_sweep_idempotent(self, tmp_path, cnn_weights):
        outs = []
        for name in ("s1.csv", "s2.csv"):
            out = tmp_path / name
            assert run("ber-sweep", "--weights", str(cnn_weights), "--symbols", "2000",
                       "--out", str(out)) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_network_sweep_requires_weights(self, tmp_path):
        assert run("ber-sweep", "--symbols", "1000", "--out", str(tmp_path / "x.csv")) == 4


class TestCostReportCli:
    def test_all_schedules_three_rows_in_order(self, capsys):
        assert run("cost-report", "--net", "cnn-default", "--schedule", "all") == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("# config: ")
        assert lines[1] == "schedule,dsp,bram_18kb,lut,cycles,latency_s"
        assert [l.split(",")[0] for l in lines[2:]] == ["sequential", "inner-parallel", "fully-unrolled"]

    def test_single_schedule(self, capsys):
        assert run("cost-report", "--net", "bcnn-default", "--schedule", "sequential") == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 3

    def test_profile_override(self, tmp_path, capsys):
        profile = tmp_path / "profile.json"
        profile.write_text(json.dumps({"clock_hz": 83e6}))
        assert run("cost-report", "--profile", str(profile)) == 0
        header = capsys.readouterr().out.splitlines()[0]
        assert "83000000" in header

    def test_unknown_profile_field_is_validation_error(self, tmp_path):
        profile = tmp_path / "profile.json"
        profile.write_text(json.dumps({"flux_capacitors": 2}))
        assert run("cost-report", "--profile", str(profile)) == 4


class TestTraceCli:
    def test_trace_dump_parses_back(self, capsys):
        from rofaccel.schedules import ExecutionTrace

        assert run("trace", "--net", "cnn-default", "--schedule", "inner-parallel") == 0
        text = capsys.readouterr().out
        trace = ExecutionTrace.from_text(text)
        assert trace.parallel_units["feature_map"] == 2


class TestEfficiencyCli:
    @pytest.mark.parametrize(
        "base,opt,expected",
        [
            ("606.1e-6,3.6872", "333.8e-6,3.7972", "15.06"),
            ("606.1e-6,3.6872", "87.1e-6,4.7289", "3.03"),
            ("1091e-6,1.5246", "432.8e-6,1.5565", "28.83"),
            ("18.08e-3,3.7114", "1.95e-3,5.6331", "1.72"),
            ("18.08e-3,3.7114", "9.79e-3,3.7422", "55.25"),
        ],
    )
    def test_reference_values(self, capsys, base, opt, expected):
        assert run("efficiency", "--base", base, "--opt", opt) == 0
        assert capsys.readouterr().out.strip() == expected

    def test_not_applicable(self, capsys):
        assert run("efficiency", "--base", "1e-3,2.0", "--opt", "0.5e-3,2.0") == 0
        assert capsys.readouterr().out.strip() == "not-applicable"

    def test_malformed_pair(self):
        assert run("efficiency", "--base", "1e-3", "--opt", "0.5e-3,2.0") == 4
