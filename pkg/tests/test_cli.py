"""Command-line interface: parsing, outputs, exit codes, determinism."""

import subprocess
import sys

import numpy as np
import pytest

from topkloss.cli import read_score_file, DataError

REFERENCE_LOSS = 1.3322787280490402


def run_cli(*args, **kw):
    return subprocess.run(
        [sys.executable, "-m", "topkloss.cli", *args],
        capture_output=True,
        text=True,
        **kw,
    )


def kv(line):
    return dict(tok.split("=", 1) for tok in line.split())


@pytest.fixture()
def one_row(tmp_path):
    path = tmp_path / "one.csv"
    path.write_text("0,1,2,3\n")
    return str(path)


class TestScoreFile:
    def test_basic_parse(self, tmp_path):
        f = tmp_path / "a.csv"
        f.write_text("1, 0.5, -2.0, 3\n0, 1, 2, 3\n")
        labels, scores = read_score_file(str(f))
        np.testing.assert_array_equal(labels, [1, 0])
        assert scores.shape == (2, 3)

    def test_header_detected(self, tmp_path):
        f = tmp_path / "a.csv"
        f.write_text("label,s0,s1\n0,1.0,2.0\n")
        labels, scores = read_score_file(str(f))
        assert labels.tolist() == [0] and scores.shape == (1, 2)

    def test_ragged_rows_rejected_with_line_number(self, tmp_path):
        f = tmp_path / "a.csv"
        f.write_text("0,1,2,3\n1,1,2\n")
        with pytest.raises(DataError, match="line 2"):
            read_score_file(str(f))

    def test_bad_label(self, tmp_path):
        f = tmp_path / "a.csv"
        f.write_text("0,1,2\nx7,1,2\n")
        with pytest.raises(DataError, match="line 2"):
            read_score_file(str(f))

    def test_header_only_rejected(self, tmp_path):
        f = tmp_path / "a.csv"
        f.write_text("label,s0,s1\n")
        with pytest.raises(DataError, match="no data rows"):
            read_score_file(str(f))

    def test_label_out_of_range(self, tmp_path):
        f = tmp_path / "a.csv"
        f.write_text("3,1,2\n")
        with pytest.raises(DataError, match="out of range"):
            read_score_file(str(f))


class TestLossCommand:
    def test_smooth_reference_value(self, one_row):
        res = run_cli("loss", one_row, "--k", "2", "--tau", "1")
        assert res.returncode == 0
        fields = kv(res.stdout.splitlines()[1])
        assert float(fields["loss"]) == pytest.approx(REFERENCE_LOSS, abs=1e-12)
        assert fields["task_error"] == "1"

    def test_hard_value(self, one_row):
        res = run_cli("loss", one_row, "--k", "2", "--hard")
        assert float(kv(res.stdout.splitlines()[1])["loss"]) == 1.5

    def test_k_zero_is_usage_error(self, one_row):
        assert run_cli("loss", one_row, "--k", "0").returncode == 2

    def test_malformed_file_is_data_error(self, tmp_path):
        f = tmp_path / "bad.csv"
        f.write_text("0,1,2\n0,oops,2\n")
        res = run_cli("loss", str(f), "--k", "1")
        assert res.returncode == 1
        assert "line 2" in res.stderr

    def test_missing_file(self):
        assert run_cli("loss", "/nonexistent.csv", "--k", "2").returncode == 1

    def test_byte_identical_output(self, one_row):
        a = run_cli("loss", one_row, "--k", "2")
        b = run_cli("loss", one_row, "--k", "2")
        assert a.stdout == b.stdout


class TestGradcheckCommand:
    def test_default_passes(self):
        res = run_cli("gradcheck", "--trials", "20")
        assert res.returncode == 0
        assert kv(res.stdout.strip())["status"] == "pass"

    def test_zero_trials_vacuous_pass(self):
        res = run_cli("gradcheck", "--trials", "0")
        assert res.returncode == 0

    def test_zero_tolerance_fails(self):
        res = run_cli("gradcheck", "--trials", "5", "--tol", "0")
        assert res.returncode == 1
        assert kv(res.stdout.strip())["status"] == "fail"


class TestStabilityCommand:
    def test_log_mode_all_stable_f32(self):
        res = run_cli("stability", "--n", "200", "--k", "5", "--batch", "16", "--precision", "f32")
        assert res.returncode == 0
        rows = [r for r in res.stdout.splitlines() if "," in r and not r.startswith("tau")]
        assert all(r.endswith(",yes") for r in rows)

    def test_linear_mode_overflows_at_small_tau(self):
        res = run_cli(
            "stability", "--n", "200", "--k", "5", "--batch", "16",
            "--precision", "f32", "--linear", "--taus", "10,0.01",
        )
        lines = res.stdout.splitlines()
        assert lines[-2].endswith(",yes")  # tau = 10
        assert lines[-1].endswith(",no")  # tau = 0.01

    def test_deterministic(self):
        args = ("stability", "--n", "100", "--k", "3", "--batch", "8")
        assert run_cli(*args).stdout == run_cli(*args).stdout


class TestBenchCommand:
    def test_csv_shape(self):
        res = run_cli("bench", "--n-list", "100,200", "--repeats", "1", "--k", "3")
        lines = res.stdout.strip().splitlines()
        assert lines[0] == "n,algo,mean_ms,std_ms"
        assert len(lines) == 3
        assert lines[1].startswith("100,dc,") and lines[2].startswith("200,dc,")

    def test_sum_algorithm_selectable(self):
        res = run_cli("bench", "--n-list", "100", "--repeats", "1", "--algo", "sum")
        assert ",sum," in res.stdout


class TestProbaCommand:
    def test_k1_is_softmax(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("0,1.0,2.0,0.5\n")
        res = run_cli("proba", str(f), "--k", "1")
        probs = [float(r.split(",")[1]) for r in res.stdout.splitlines()[2:]]
        s = np.array([1.0, 2.0, 0.5])
        expect = np.exp(s - s.max()) / np.exp(s - s.max()).sum()
        np.testing.assert_allclose(probs, expect, atol=1e-12)

    def test_crops_aggregate(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("0,1.0,2.0,0.5\n0,0.5,1.5,2.5\n")
        res = run_cli("proba", str(f), "--k", "2")
        assert res.returncode == 0
        assert "crops=2" in res.stdout.splitlines()[0]
        probs = [float(r.split(",")[1]) for r in res.stdout.splitlines()[2:]]
        assert sum(probs) == pytest.approx(1.0, abs=1e-12)

    def test_k_out_of_range(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("0,1.0,2.0\n")
        assert run_cli("proba", str(f), "--k", "5").returncode == 2


class TestTrainToyCommand:
    def test_clean_defaults_converge(self):
        # Default hyperparameters on noise-free data reach high train top-k.
        res = run_cli("train-toy", "--noise", "0")
        assert res.returncode == 0
        last_epoch = [l for l in res.stdout.splitlines() if l.startswith("epoch=")][-1]
        assert float(kv(last_epoch)["train_topk"]) > 0.95

    def test_tiny_run_deterministic(self):
        args = (
            "train-toy", "--coarse", "3", "--fine", "2", "--dim", "6",
            "--samples", "200", "--epochs", "2", "--k", "2", "--batch", "64",
        )
        a, b = run_cli(*args), run_cli(*args)
        assert a.returncode == 0
        assert a.stdout == b.stdout
        assert "test_topk=" in a.stdout.splitlines()[-1]

    def test_bad_flag_usage_error(self):
        res = run_cli("train-toy", "--fine", "1")
        assert res.returncode == 2


class TestUsage:
    def test_unknown_subcommand(self):
        assert run_cli("frobnicate").returncode == 2

    def test_no_subcommand(self):
        assert run_cli().returncode == 2
