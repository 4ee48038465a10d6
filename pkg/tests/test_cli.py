"""
Integration tests for the trajkernel command line.
Each test drives cli.run and checks exit codes, stdout summaries and output files.
"""

import json
import pytest
import sys
import os

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from cli import parse_args, run, run_config
from utils import import_results_from_json, read_csv_with_header


def _summary(capsys):
    out = capsys.readouterr().out.strip().splitlines()
    return json.loads(out[-1])


@pytest.fixture
def singleton_csv(tmp_path, capsys):
    path = str(tmp_path / "single.csv")
    assert run(["gen", "--kind", "separable-singleton", "--n", "20", "--out", path]) == 0
    capsys.readouterr()
    return path


@pytest.fixture
def clustered_csv(tmp_path, capsys):
    path = str(tmp_path / "cross.csv")
    assert run(["gen", "--kind", "cross-style", "--n", "38", "--anomaly-fraction", "0", "--seed", "2",
                "--out", path]) == 0
    capsys.readouterr()
    return path


@pytest.mark.integration
class TestSubcommands:
    """Test every subcommand on small generated data."""

    def test_gen_writes_sidecars(self, tmp_path, capsys):
        """Test gen reports its size and writes the labels sidecar."""
        path = str(tmp_path / "d.csv")
        assert run(["gen", "--kind", "separable-singleton", "--n", "12", "--out", path]) == 0
        summary = _summary(capsys)
        assert summary["trajectories"] == 12
        assert os.path.exists(str(tmp_path / "d.labels.csv"))

    def test_detect_reports_auc(self, singleton_csv, tmp_path, capsys):
        """Test detect ranks the separated trajectory first and records the run."""
        out = str(tmp_path / "rank.csv")
        assert run(["detect", "--data", singleton_csv, "--psi", "16", "--t", "100", "--out", out]) == 0
        summary = _summary(capsys)
        assert summary["auc"] == 1.0
        assert summary["top"][0] == "19"
        frame, header = read_csv_with_header(out)
        assert list(frame.columns) == ["id", "score", "rank"]
        assert header["polarity"] == "similarity"
        assert header["command"] == "detect"
        assert header["psi"] == 16
        assert header["cells2"] == "ball"
        assert "workers" not in header

    @pytest.mark.slow
    def test_dense_sparse_defaults(self, tmp_path, capsys):
        """Test default idk2 separates the dense/sparse anomalies end to end."""
        path = str(tmp_path / "d.csv")
        assert run(["gen", "--kind", "dense-sparse-103", "--seed", "7", "--out", path]) == 0
        capsys.readouterr()
        assert run(["detect", "--data", path, "--scheme", "ik", "--detector", "idk2",
                    "--labels", str(tmp_path / "d.labels.csv")]) == 0
        summary = _summary(capsys)
        assert summary["auc"] == 1.0
        assert set(summary["top"][:3]) == {"40", "51", "52"}

    def test_detect_lof(self, singleton_csv, capsys):
        """Test the LOF detector through the command line."""
        assert run(["detect", "--data", singleton_csv, "--detector", "lof", "--k", "5",
                    "--psi", "16", "--t", "50"]) == 0
        assert _summary(capsys)["top"][0] == "19"

    def test_eval_round_trip(self, singleton_csv, tmp_path, capsys):
        """Test eval reads the ranking's polarity from its header."""
        ranking = str(tmp_path / "rank.csv")
        assert run(["detect", "--data", singleton_csv, "--out", ranking]) == 0
        capsys.readouterr()
        report = str(tmp_path / "eval.json")
        labels = str(tmp_path / "single.labels.csv")
        assert run(["eval", "--ranking", ranking, "--labels", labels, "--out", report]) == 0
        assert _summary(capsys)["value"] == 1.0
        assert import_results_from_json(report)["config"]["command"] == "eval"

    def test_score_file(self, singleton_csv, tmp_path, capsys):
        """Test external scores are ranked with the dataset's labels."""
        scores = tmp_path / "scores.csv"
        scores.write_text("id,score\n" + "".join(f"{i},{1.0 if i == 19 else 0.0}\n" for i in range(20)))
        assert run(["detect", "--data", singleton_csv, "--score-file", str(scores)]) == 0
        assert _summary(capsys)["auc"] == 1.0

    def test_embed(self, singleton_csv, tmp_path, capsys):
        """Test embed writes mean maps and the fitted model."""
        out = str(tmp_path / "maps.csv")
        model = str(tmp_path / "model.json")
        assert run(["embed", "--data", singleton_csv, "--psi", "4", "--t", "5", "--out", out,
                    "--model-out", model]) == 0
        summary = _summary(capsys)
        assert summary["trajectories"] == 20
        assert summary["dim"] == 20
        assert os.path.exists(model)

    def test_subtraj(self, singleton_csv, tmp_path, capsys):
        """Test subtraj writes a report carrying its configuration."""
        out = str(tmp_path / "sub.json")
        plot = str(tmp_path / "plot.csv")
        assert run(["subtraj", "--data", singleton_csv, "--query", "19", "--psi", "8", "--t", "20",
                    "--truth", "--out", out, "--plot-out", plot]) == 0
        summary = _summary(capsys)
        assert summary["query_id"] == "19"
        assert 0.0 <= summary["jaccard"] <= 1.0
        report = import_results_from_json(out)
        assert report["config"]["cells"] == "ball"
        assert "truth" in report
        assert os.path.exists(plot)

    def test_mine(self, clustered_csv, tmp_path, capsys):
        """Test mine finds patterns with cluster ids from the sidecar."""
        out = str(tmp_path / "fp.json")
        assert run(["mine", "--data", clustered_csv, "--psi", "8", "--t", "20", "--gamma", "0",
                    "--min-len", "1", "--out", out]) == 0
        summary = _summary(capsys)
        assert summary["fp"] >= 1
        result = import_results_from_json(out)
        assert result["config"]["gamma"] == 0.0
        assert len(result["clusters"]) == 19

    def test_bench(self, tmp_path, capsys):
        """Test bench writes one timing row per method and size."""
        out = str(tmp_path / "bench.csv")
        assert run(["bench", "--sizes", "19", "38", "--methods", "ik-idk2", "--repeats", "1",
                    "--out", out]) == 0
        assert "ik-idk2" in _summary(capsys)["ratios"]
        frame, header = read_csv_with_header(out)
        assert len(frame) == 2
        assert header["sizes"] == [19, 38]


class TestExitCodes:
    """Test failures map to exit codes."""

    def test_usage_errors(self, capsys):
        """Test unknown commands and missing flags exit with 1."""
        assert run(["nope"]) == 1
        assert run(["detect"]) == 1
        assert run(["detect", "--data", "x.csv", "--psi", "many"]) == 1

    def test_help(self, capsys):
        """Test --help exits cleanly."""
        assert run(["--help"]) == 0

    def test_missing_file(self, tmp_path):
        """Test an absent dataset is an I/O error."""
        assert run(["detect", "--data", str(tmp_path / "absent.csv")]) == 2

    def test_parameter_error(self, singleton_csv):
        """Test psi above the point count exits with 1."""
        assert run(["detect", "--data", singleton_csv, "--psi", "100000"]) == 1
        assert run(["detect", "--data", singleton_csv, "--workers", "-1"]) == 1

    def test_single_class_labels(self, singleton_csv, tmp_path):
        """Test ROC-AUC over one class exits with 1."""
        ranking = str(tmp_path / "rank.csv")
        assert run(["detect", "--data", singleton_csv, "--out", ranking]) == 0
        labels = tmp_path / "flat.csv"
        labels.write_text("id,label\n" + "".join(f"{i},0\n" for i in range(20)))
        assert run(["eval", "--ranking", ranking, "--labels", str(labels)]) == 1

    def test_mine_without_clusters(self, singleton_csv, tmp_path):
        """Test mining data with no cluster ids exits with 1."""
        assert run(["mine", "--data", singleton_csv, "--out", str(tmp_path / "fp.json")]) == 1


class TestConfiguration:
    """Test the layering of presets, config files and flags."""

    def test_flags_override_config(self, tmp_path):
        """Test the config file fills defaults and flags win."""
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"psi": 8, "t": 20}))
        args = parse_args(["detect", "--data", "d.csv", "--config", str(config), "--t", "30"])
        assert args.psi == 8
        assert args.t == 30
        recorded = run_config(args)
        assert recorded["command"] == "detect"
        assert "config" not in recorded

    def test_preset_below_config(self, tmp_path):
        """Test a preset is applied and the config file overrides it."""
        args = parse_args(["detect", "--data", "d.csv", "--preset", "flyingfox"])
        preset_psi = args.psi
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"psi": preset_psi * 2}))
        args = parse_args(["detect", "--data", "d.csv", "--preset", "flyingfox", "--config", str(config)])
        assert args.psi == preset_psi * 2

    def test_unknown_config_key(self, singleton_csv, tmp_path):
        """Test a config file with unknown settings exits with 1."""
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"psi": 8, "colour": "red"}))
        assert run(["detect", "--data", singleton_csv, "--config", str(config)]) == 1


@pytest.mark.integration
class TestDeterminism:
    """Test results do not depend on the worker count."""

    def test_workers_identical_outputs(self, tmp_path, monkeypatch, capsys):
        """Test one and two workers write byte-identical files."""
        outputs = []
        for workers in ("1", "2"):
            folder = tmp_path / f"w{workers}"
            folder.mkdir()
            monkeypatch.chdir(folder)
            assert run(["gen", "--kind", "separable-singleton", "--n", "20", "--out", "d.csv"]) == 0
            assert run(["detect", "--data", "d.csv", "--workers", workers, "--out", "rank.csv"]) == 0
            assert run(["embed", "--data", "d.csv", "--workers", workers, "--out", "maps.csv"]) == 0
            outputs.append(((folder / "rank.csv").read_bytes(), (folder / "maps.csv").read_bytes()))
        assert outputs[0] == outputs[1]


if __name__ == "__main__":
    pytest.main([__file__])
