import json
import math

import numpy as np
import pytest

import lob_irl as L
from lob_irl.benchmark import (
    CSV_HEADER,
    DEFAULT_DEMO_COUNTS,
    METHOD_NAMES,
    WORKERS_ENV_VAR,
    ExperimentConfig,
    ResultRecord,
    cell_stream_id,
    experiment_config_from_dict,
    experiment_config_to_dict,
    grid_cells,
    load_experiment_config,
    record_to_jsonable,
    record_to_row,
    resolve_workers,
    run_benchmark,
    run_cell,
    run_grid,
)
from lob_irl.errors import ConfigParseError, ConfigValidationError


class TestExperimentConfig:
    def test_defaults(self):
        config = ExperimentConfig()
        assert config.methods == METHOD_NAMES
        assert config.demo_counts == DEFAULT_DEMO_COUNTS
        assert config.num_seeds == 10
        assert config.evd_mode == "exact"

    @pytest.mark.parametrize(
        "kwargs, field",
        [
            ({"methods": ()}, "methods"),
            ({"methods": ("maxent_linear", "nope")}, "methods"),
            ({"methods": ("bnn", "bnn")}, "methods"),
            ({"demo_counts": ()}, "demo_counts"),
            ({"demo_counts": (0,)}, "demo_counts"),
            ({"demo_counts": (100, 50)}, "demo_counts"),
            ({"demo_counts": (100, 100)}, "demo_counts"),
            ({"num_seeds": 0}, "num_seeds"),
            ({"evd_mode": "bogus"}, "evd_mode"),
            ({"mc_trajectories": 0}, "mc_trajectories"),
            ({"feature_map": "bogus"}, "feature_map"),
            ({"master_seed": -1}, "master_seed"),
        ],
    )
    def test_validation_names_the_field(self, kwargs, field):
        with pytest.raises(ConfigValidationError, match=field):
            ExperimentConfig(**kwargs)

    def test_dict_round_trip(self):
        config = ExperimentConfig(
            methods=("gpirl",),
            demo_counts=(10, 20),
            num_seeds=3,
            evd_mode="both",
            mc_trajectories=500,
            output_path="out.csv",
            master_seed=7,
        )
        assert experiment_config_from_dict(experiment_config_to_dict(config)) == config

    def test_unknown_field_rejected(self):
        with pytest.raises(ConfigValidationError, match="unknown"):
            experiment_config_from_dict({"methods": ["bnn"], "surprise": 1})

    def test_non_object_rejected(self):
        with pytest.raises(ConfigValidationError):
            experiment_config_from_dict([1, 2])

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"methods": ["maxent_linear"], "num_seeds": 2}))
        config = load_experiment_config(path)
        assert config.methods == ("maxent_linear",)
        assert config.num_seeds == 2
        assert config.demo_counts == DEFAULT_DEMO_COUNTS

    def test_load_reports_parse_position(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{\n  "methods": [,]\n}\n')
        with pytest.raises(ConfigParseError, match="line 2"):
            load_experiment_config(path)

    def test_load_propagates_mdp_errors(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"mdp": {"num_traders": -1}}))
        with pytest.raises(ConfigValidationError, match="mdp"):
            load_experiment_config(path)


class TestCellStreamId:
    def test_frozen_value(self):
        # pinned so archived results remain reproducible against this code
        assert cell_stream_id("maxent_linear", "linear", 512, 0) == 5481219524812303910

    def test_distinct_across_every_component(self):
        base = cell_stream_id("gpirl", "linear", 512, 0)
        assert cell_stream_id("bnn", "linear", 512, 0) != base
        assert cell_stream_id("gpirl", "exponential", 512, 0) != base
        assert cell_stream_id("gpirl", "linear", 1024, 0) != base
        assert cell_stream_id("gpirl", "linear", 512, 1) != base

    def test_in_sixty_three_bit_range(self):
        for seed in range(20):
            value = cell_stream_id("bnn", "exponential", 2048, seed)
            assert 0 <= value < 2**63


@pytest.fixture(scope="module")
def quick_config():
    return ExperimentConfig(
        methods=("maxent_linear",),
        demo_counts=(50,),
        num_seeds=2,
        evd_mode="both",
        mc_trajectories=2000,
    )


class TestRunCell:
    def test_record_fields(self, quick_config):
        record = run_cell(quick_config, "maxent_linear", 50, 0)
        assert record.error is None
        assert record.method == "maxent_linear"
        assert record.reward_kind == "linear"
        assert record.demo_count == 50
        assert record.seed == 0
        assert math.isfinite(record.evd_exact)
        assert math.isfinite(record.evd_mc)
        assert record.mc_stderr > 0.0
        assert record.fit_seconds > 0.0
        assert record.eval_seconds > 0.0

    def test_mc_estimate_consistent_with_exact(self, quick_config):
        record = run_cell(quick_config, "maxent_linear", 50, 0)
        assert abs(record.evd_mc - record.evd_exact) < 6.0 * record.mc_stderr

    def test_deterministic(self, quick_config):
        a = run_cell(quick_config, "maxent_linear", 50, 1)
        b = run_cell(quick_config, "maxent_linear", 50, 1)
        assert a.evd_exact == b.evd_exact
        assert a.evd_mc == b.evd_mc
        assert a.mc_stderr == b.mc_stderr

    def test_seeds_differ(self, quick_config):
        a = run_cell(quick_config, "maxent_linear", 50, 0)
        b = run_cell(quick_config, "maxent_linear", 50, 1)
        assert a.evd_exact != b.evd_exact

    def test_exact_mode_leaves_mc_fields_empty(self):
        config = ExperimentConfig(
            methods=("maxent_linear",), demo_counts=(50,), num_seeds=1
        )
        record = run_cell(config, "maxent_linear", 50, 0)
        assert record.evd_mc is None and record.mc_stderr is None
        assert math.isfinite(record.evd_exact)

    def test_failure_becomes_error_record(self, quick_config, monkeypatch):
        import lob_irl.benchmark as bench

        def boom(*args, **kwargs):
            raise RuntimeError("synthetic failure")

        monkeypatch.setattr(bench, "_fit_reward", boom)
        record = run_cell(quick_config, "maxent_linear", 50, 0)
        assert record.error == "RuntimeError: synthetic failure"
        assert record.evd_exact is None
        assert record.evd_mc is None


class TestGrid:
    def test_canonical_cell_order(self):
        config = ExperimentConfig(
            methods=("gpirl", "maxent_linear"), demo_counts=(10, 20), num_seeds=2
        )
        assert grid_cells(config) == [
            ("gpirl", 10, 0),
            ("gpirl", 10, 1),
            ("gpirl", 20, 0),
            ("gpirl", 20, 1),
            ("maxent_linear", 10, 0),
            ("maxent_linear", 10, 1),
            ("maxent_linear", 20, 0),
            ("maxent_linear", 20, 1),
        ]

    def test_parallel_matches_serial(self):
        config = ExperimentConfig(
            methods=("maxent_linear",), demo_counts=(30,), num_seeds=2
        )
        serial = run_grid(config, workers=1)
        parallel = run_grid(config, workers=2)
        assert [r.evd_exact for r in serial] == [r.evd_exact for r in parallel]
        assert [(r.method, r.demo_count, r.seed) for r in serial] == [
            (r.method, r.demo_count, r.seed) for r in parallel
        ]


class TestResolveWorkers:
    def test_explicit_wins(self, monkeypatch):
        monkeypatch.setenv(WORKERS_ENV_VAR, "7")
        assert resolve_workers(3) == 3

    def test_explicit_must_be_positive(self):
        with pytest.raises(ValueError):
            resolve_workers(0)

    def test_env_variable(self, monkeypatch):
        monkeypatch.setenv(WORKERS_ENV_VAR, "5")
        assert resolve_workers() == 5

    def test_env_must_parse(self, monkeypatch):
        monkeypatch.setenv(WORKERS_ENV_VAR, "many")
        with pytest.raises(ConfigValidationError, match=WORKERS_ENV_VAR):
            resolve_workers()

    def test_env_must_be_positive(self, monkeypatch):
        monkeypatch.setenv(WORKERS_ENV_VAR, "0")
        with pytest.raises(ConfigValidationError):
            resolve_workers()

    def test_default_is_cpu_count(self, monkeypatch):
        import os

        monkeypatch.delenv(WORKERS_ENV_VAR, raising=False)
        assert resolve_workers() == (os.cpu_count() or 1)


def synthetic_record(**overrides):
    base = dict(
        method="bnn",
        reward_kind="exponential",
        demo_count=1024,
        seed=3,
        evd_exact=0.125,
        evd_mc=0.126953125,
        mc_stderr=0.001953125,
        fit_seconds=1.5,
        eval_seconds=0.25,
    )
    base.update(overrides)
    return ResultRecord(**base)


class TestOutputFormats:
    def test_row_format(self):
        row = record_to_row(synthetic_record())
        assert row == "bnn,exponential,1024,3,0.125,0.126953125,0.001953125,1.5,0.25"

    def test_none_fields_render_empty(self):
        row = record_to_row(synthetic_record(evd_mc=None, mc_stderr=None))
        assert row == "bnn,exponential,1024,3,0.125,,,1.5,0.25"

    def test_float_repr_round_trips(self):
        # repr of a float parses back to the identical value
        value = 0.1 + 0.2
        row = record_to_row(synthetic_record(evd_exact=value))
        assert float(row.split(",")[4]) == value

    def test_jsonable_hides_error_when_absent(self):
        plain = record_to_jsonable(synthetic_record())
        assert "error" not in plain
        failed = record_to_jsonable(synthetic_record(error="ValueError: nope"))
        assert failed["error"] == "ValueError: nope"

    def test_header_is_pinned(self):
        assert CSV_HEADER == (
            "method,reward_kind,demo_count,seed,evd_exact,evd_mc,mc_stderr,"
            "fit_seconds,eval_seconds"
        )


class TestRunBenchmark:
    def test_writes_csv_jsonl_and_meta(self, tmp_path):
        config = ExperimentConfig(
            methods=("maxent_linear",), demo_counts=(40,), num_seeds=1
        )
        out = tmp_path / "results.csv"
        records = run_benchmark(config, out, workers=1)
        assert len(records) == 1

        lines = out.read_text().splitlines()
        assert lines[0] == CSV_HEADER
        assert len(lines) == 2
        assert lines[1].startswith("maxent_linear,linear,40,0,")

        jsonl = (tmp_path / "results.jsonl").read_text().splitlines()
        assert len(jsonl) == 1
        parsed = json.loads(jsonl[0])
        assert parsed["method"] == "maxent_linear"
        assert parsed["evd_exact"] == records[0].evd_exact

        meta = json.loads((tmp_path / "results.csv.meta.json").read_text())
        assert meta["num_records"] == 1
        assert meta["num_errors"] == 0
        assert meta["uniform_policy_gap"] > 0.0
        assert meta["config"]["demo_counts"] == [40]
