"""Tests for the command-line interface."""

import json
import math

import pytest

from ..cli import EXIT_DECODE_FAILURE, EXIT_ERROR, EXIT_OK, main


class TestCapacityCommand:
    def test_prints_json(self, capsys):
        assert main(["capacity", "--sampling", "poisson:2", "--beta", "2"]) == EXIT_OK
        result = json.loads(capsys.readouterr().out)
        assert result["rate"] == pytest.approx((1 - math.exp(-2)) * 0.5)
        assert "regime" in result

    def test_torn(self, tmp_path):
        out = tmp_path / "torn.json"
        assert main(["--out", str(out), "capacity", "--torn", "geom:0.1", "--beta", "1"]) == EXIT_OK
        assert json.loads(out.read_text())["rate"] == pytest.approx(math.exp(-1))

    def test_missing_beta_is_an_error(self):
        assert main(["capacity"]) == EXIT_ERROR

    def test_bad_sampling_is_an_error(self):
        assert main(["capacity", "--sampling", "poisson", "--beta", "2"]) == EXIT_ERROR


class TestSimulateCommand:
    def test_pool_and_truth(self, tmp_path):
        pool, truth = tmp_path / "out.txt", tmp_path / "truth.txt"
        argv = ["--seed", "3", "--out", str(pool), "simulate", "--M", "8", "--L", "16",
                "--sampling", "fixed:1", "--truth", str(truth)]
        assert main(argv) == EXIT_OK
        lines = pool.read_text().splitlines()
        assert len(lines) == 8
        assert all(len(line) == 16 and set(line) <= {"0", "1"} for line in lines)
        assert sorted(int(v) for v in truth.read_text().split()) == list(range(8))

    def test_same_seed_same_output(self, tmp_path):
        outputs = []
        for name in ("a.txt", "b.txt"):
            path = tmp_path / name
            main(["--seed", "9", "--out", str(path), "simulate", "--M", "16", "--L", "8", "--noise", "bsc:0.1"])
            outputs.append(path.read_text())
        assert outputs[0] == outputs[1]

    def test_needs_out(self):
        assert main(["simulate"]) == EXIT_ERROR


class TestCodecCommand:
    """Encode, decode and trials through files."""

    @pytest.fixture
    def encoded(self, tmp_path):
        message = tmp_path / "message.bin"
        message.write_bytes(b"shuffled and sampled")
        pool = tmp_path / "pool.txt"
        argv = ["--out", str(pool), "codec", "encode", "--M", "64", "--L", "32", "--rate", "0.5",
                "--in", str(message)]
        assert main(argv) == EXIT_OK
        return pool

    def test_round_trip(self, encoded, tmp_path):
        decoded = tmp_path / "decoded.bin"
        argv = ["--out", str(decoded), "codec", "decode", "--M", "64", "--L", "32", "--rate", "0.5",
                "--in", str(encoded)]
        assert main(argv) == EXIT_OK
        assert decoded.read_bytes().startswith(b"shuffled and sampled")

    def test_shuffled_pool_decodes(self, encoded, tmp_path):
        lines = encoded.read_text().splitlines()
        encoded.write_text("\n".join(lines[::-1][:50]) + "\n")
        decoded = tmp_path / "decoded.bin"
        argv = ["--out", str(decoded), "codec", "decode", "--M", "64", "--L", "32", "--rate", "0.5",
                "--in", str(encoded)]
        assert main(argv) == EXIT_OK

    def test_too_few_reads_fails(self, encoded, tmp_path):
        lines = encoded.read_text().splitlines()
        encoded.write_text("\n".join(lines[:30]) + "\n")
        decoded = tmp_path / "decoded.bin"
        argv = ["--out", str(decoded), "codec", "decode", "--M", "64", "--L", "32", "--rate", "0.5",
                "--in", str(encoded)]
        assert main(argv) == EXIT_DECODE_FAILURE
        assert not decoded.exists()

    def test_message_too_long(self, tmp_path):
        message = tmp_path / "message.bin"
        message.write_bytes(bytes(1000))
        argv = ["--out", str(tmp_path / "pool.txt"), "codec", "encode", "--M", "64", "--L", "32",
                "--rate", "0.5", "--in", str(message)]
        assert main(argv) == EXIT_ERROR

    def test_linear_round_trip(self, tmp_path):
        pool, report = tmp_path / "pool.txt", tmp_path / "report.json"
        shared = ["--scheme", "linear", "--M", "2", "--L", "6", "--b", "8", "--num-messages", "64"]
        assert main(["--seed", "5", "--out", str(pool), "codec", "encode", *shared, "--message-index", "7"]) == EXIT_OK
        code = main(["--seed", "5", "--out", str(report), "codec", "decode", *shared,
                     "--sampling", "fixed:1", "--in", str(pool)])
        outcome = json.loads(report.read_text())
        assert code in (EXIT_OK, EXIT_DECODE_FAILURE)
        if code == EXIT_OK:
            assert outcome == {"status": "success", "message_index": 7}
        else:
            assert outcome["message_index"] is None

    def test_trial_records(self, tmp_path):
        out = tmp_path / "trials.csv"
        argv = ["--seed", "2", "--out", str(out), "codec", "trial", "--M", "16", "--L", "16",
                "--rate", "0.25", "--sampling", "fixed:1", "--trials", "3"]
        assert main(argv) == EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0].startswith("trial,seed,success")
        assert len(lines) == 4


class TestClusterCommand:
    def test_recovers_duplicated_pool(self, tmp_path):
        pool, truth, out = tmp_path / "pool.txt", tmp_path / "truth.txt", tmp_path / "clusters"
        assert main(["--seed", "4", "--out", str(pool), "simulate", "--alphabet", "quaternary",
                     "--M", "10", "--L", "40", "--sampling", "fixed:2", "--truth", str(truth)]) == EXIT_OK
        assert main(["--out", str(out), "cluster", "--in", str(pool), "--truth", str(truth)]) == EXIT_OK
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["clusters"] == 10
        assert metrics["accuracy"] == 1.0
        assert len((out / "reconstructed.txt").read_text().splitlines()) == 10
        assert len((out / "clusters.txt").read_text().splitlines()) == 20

    def test_truth_length_checked(self, tmp_path):
        pool, truth = tmp_path / "pool.txt", tmp_path / "truth.txt"
        pool.write_text("ACGTACGT\nACGTACGT\n")
        truth.write_text("0\n")
        assert main(["--out", str(tmp_path / "c"), "cluster", "--in", str(pool), "--truth", str(truth)]) == EXIT_ERROR


class TestSweepAndConfig:
    def test_sweep_grid(self, tmp_path):
        out = tmp_path / "torn.csv"
        argv = ["--out", str(out), "sweep", "--figure", "torn", "--grid", "beta=1,2,4"]
        assert main(argv) == EXIT_OK
        assert len(out.read_text().splitlines()) == 4

    def test_tradeoff_json(self, capsys):
        assert main(["--format", "json", "tradeoff", "--lam", "1,2", "--beta", "2"]) == EXIT_OK
        rows = json.loads(capsys.readouterr().out)
        assert [r["lam"] for r in rows] == [1.0, 2.0]

    def test_probe(self, tmp_path):
        out = tmp_path / "rank.csv"
        argv = ["--seed", "1", "--out", str(out), "probe", "rank", "--B", "20", "--delta", "0.5", "--trials", "5"]
        assert main(argv) == EXIT_OK
        assert "rank" in out.read_text().splitlines()[0]

    def test_config_file(self, tmp_path):
        config = tmp_path / "experiment.json"
        out = tmp_path / "rows.csv"
        config.write_text(json.dumps({"kind": "tradeoff", "grid": {"lam": [1, 3], "beta": [2]},
                                      "output": str(out)}))
        assert main(["--config", str(config)]) == EXIT_OK
        assert len(out.read_text().splitlines()) == 3

    def test_invalid_config(self, tmp_path):
        config = tmp_path / "experiment.json"
        config.write_text(json.dumps({"kind": "codec-trial", "L": 8, "beta": 2}))
        assert main(["--config", str(config)]) == EXIT_ERROR

    def test_no_command(self):
        assert main([]) == EXIT_ERROR
