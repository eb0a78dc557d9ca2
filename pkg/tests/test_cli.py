import json

import pytest

import lob_irl as L
from lob_irl.cli import main


@pytest.fixture(scope="module")
def config_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "config.json"
    path.write_text(
        json.dumps(
            {
                "methods": ["maxent_linear"],
                "demo_counts": [30],
                "num_seeds": 1,
                "master_seed": 5,
            }
        )
    )
    return str(path)


@pytest.fixture(scope="module")
def artifacts(config_path, tmp_path_factory):
    """Demo file and fitted linear model produced through the CLI itself."""
    work = tmp_path_factory.mktemp("artifacts")
    demo_path = str(work / "demos.jsonl")
    model_path = str(work / "model.json")
    assert main(["gen-demos", "--config", config_path, "--count", "60", "--out", demo_path]) == 0
    assert (
        main(
            [
                "fit",
                "--config",
                config_path,
                "--method",
                "maxent_linear",
                "--demos",
                demo_path,
                "--out",
                model_path,
            ]
        )
        == 0
    )
    return {"demos": demo_path, "model": model_path}


class TestShowConfig:
    def test_prints_resolved_config(self, config_path, capsys):
        assert main(["show-config", "--config", config_path]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["methods"] == ["maxent_linear"]
        assert out["demo_counts"] == [30]
        assert out["master_seed"] == 5
        # defaults are filled in
        assert out["evd_mode"] == "exact"
        assert out["mdp"]["num_traders"] == 3


class TestGenDemos:
    def test_output_is_loadable(self, artifacts, config):
        demos = L.load_demos(artifacts["demos"], expected_config=config)
        assert len(demos) == 60
        assert demos.seed == 5

    def test_count_must_be_positive(self, config_path, tmp_path, capsys):
        rc = main(
            ["gen-demos", "--config", config_path, "--count", "0", "--out", str(tmp_path / "x")]
        )
        assert rc == 1
        assert "count" in capsys.readouterr().err

    def test_seed_must_be_nonnegative(self, config_path, tmp_path):
        rc = main(
            [
                "gen-demos",
                "--config",
                config_path,
                "--count",
                "5",
                "--seed",
                "-2",
                "--out",
                str(tmp_path / "x"),
            ]
        )
        assert rc == 1


class TestFitAndEval:
    def test_model_file_round_trips(self, artifacts, config):
        document = L.load_model(artifacts["model"], expected_config=config)
        assert document["kind"] == "maxent_linear"
        assert document["feature_map"] == "normalized"
        reward = L.reward_from_document(document)
        assert reward.shape == (177,)
        assert reward[-1] == 0.0

    def test_eval_reports_exact_evd(self, artifacts, config_path, capsys):
        assert main(["eval", "--config", config_path, "--model", artifacts["model"]]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["kind"] == "maxent_linear"
        assert abs(report["evd_exact"]) < 0.5
        assert report["uniform_policy_gap"] > 1.0
        assert "evd_mc" not in report

    def test_eval_with_monte_carlo(self, artifacts, config_path, capsys):
        rc = main(
            [
                "eval",
                "--config",
                config_path,
                "--model",
                artifacts["model"],
                "--mc-trajectories",
                "2000",
            ]
        )
        assert rc == 0
        report = json.loads(capsys.readouterr().out)
        assert abs(report["evd_mc"] - report["evd_exact"]) < 6.0 * report["mc_stderr"]

    def test_eval_rejects_nonpositive_mc(self, artifacts, config_path):
        rc = main(
            [
                "eval",
                "--config",
                config_path,
                "--model",
                artifacts["model"],
                "--mc-trajectories",
                "0",
            ]
        )
        assert rc == 1

    def test_model_config_mismatch_rejected(self, artifacts, tmp_path):
        other = tmp_path / "other.json"
        other.write_text(json.dumps({"mdp": {"num_traders": 2}}))
        rc = main(["eval", "--config", str(other), "--model", artifacts["model"]])
        assert rc == 1

    def test_corrupt_demo_file_rejected(self, config_path, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("not a demo file\n")
        rc = main(
            [
                "fit",
                "--config",
                config_path,
                "--method",
                "maxent_linear",
                "--demos",
                str(bad),
                "--out",
                str(tmp_path / "model.json"),
            ]
        )
        assert rc == 1


class TestBench:
    def test_writes_outputs(self, config_path, tmp_path, capsys):
        out = tmp_path / "grid.csv"
        assert main(["bench", "--config", config_path, "--out", str(out), "--workers", "1"]) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 2
        assert (tmp_path / "grid.jsonl").exists()
        assert (tmp_path / "grid.csv.meta.json").exists()
        assert "1 records" in capsys.readouterr().out

    def test_requires_some_output_path(self, config_path, capsys):
        assert main(["bench", "--config", config_path]) == 1
        assert "output path" in capsys.readouterr().err


class TestExitCodes:
    def test_missing_config_file(self, tmp_path):
        assert main(["show-config", "--config", str(tmp_path / "absent.json")]) == 1

    def test_config_parse_error(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        assert main(["show-config", "--config", str(path)]) == 1

    def test_config_validation_error(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"methods": ["bogus"]}))
        assert main(["show-config", "--config", str(path)]) == 1

    def test_unknown_command(self, capsys):
        assert main(["frobnicate"]) == 1
        assert "error" in capsys.readouterr().err

    def test_unknown_method_choice(self, config_path, tmp_path):
        rc = main(
            [
                "fit",
                "--config",
                config_path,
                "--method",
                "deep_dream",
                "--demos",
                str(tmp_path / "x"),
                "--out",
                str(tmp_path / "y"),
            ]
        )
        assert rc == 1

    def test_missing_required_argument(self):
        assert main(["gen-demos", "--count", "5"]) == 1

    def test_help_exits_zero(self):
        assert main(["--help"]) == 0

    def test_unexpected_failure_is_exit_two(self, config_path, monkeypatch):
        import lob_irl.cli as cli

        def boom(path):
            raise RuntimeError("synthetic")

        monkeypatch.setattr(cli, "load_experiment_config", boom)
        assert main(["show-config", "--config", config_path]) == 2
