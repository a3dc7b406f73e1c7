"""Experiment configuration: defaults, parsing, round-trips, errors."""

import json

import pytest

from possfuse.config import (
    ConfigError,
    default_experiment,
    load_experiment,
    parse_experiment,
    serialize_experiment,
)


class TestDefaults:
    def test_benchmark_defaults(self):
        cfg = default_experiment()
        assert cfg.runs == 100
        assert cfg.master_seed == 0
        assert cfg.scenario.steps == 50
        assert cfg.filter.pd_interval == (0.5, 1.0)
        assert cfg.filter.phi == ((1.0, 0.01), (0.01, 1.0))
        assert cfg.filter.reduction.prune_ratio == 1e-3
        assert cfg.filter.reduction.merge_mahalanobis == 2.0
        assert cfg.filter.reduction.max_components == 100
        assert cfg.filter.birth.pos_var is None
        assert cfg.filter.birth.vel_var == 0.25
        assert cfg.fusion.mode == "both"
        assert cfg.metrics.ospa_cutoff == 10.0
        assert cfg.metrics.ospa_order == 1.0


class TestRoundTrip:
    def test_serialize_parse_identity(self):
        cfg = default_experiment()
        data = serialize_experiment(cfg)
        assert parse_experiment(data) == cfg

    def test_serialized_form_is_json(self, tmp_path):
        cfg = default_experiment()
        path = tmp_path / "exp.json"
        path.write_text(json.dumps(serialize_experiment(cfg)))
        assert load_experiment(path) == cfg

    def test_partial_document_fills_defaults(self):
        cfg = parse_experiment({"runs": 7})
        assert cfg.runs == 7
        assert cfg.scenario.steps == 50

    def test_empty_document_is_default(self):
        assert parse_experiment({}) == default_experiment()


class TestValidation:
    def test_unknown_key_reports_path(self):
        with pytest.raises(ConfigError) as err:
            parse_experiment({"scenario": {"stepz": 10}})
        assert "scenario" in str(err.value)
        assert "stepz" in str(err.value)

    def test_unknown_toplevel_key(self):
        with pytest.raises(ConfigError):
            parse_experiment({"scenari": {}})

    def test_runs_must_be_positive(self):
        with pytest.raises(ConfigError):
            parse_experiment({"runs": 0})

    def test_bool_is_not_an_integer(self):
        with pytest.raises(ConfigError):
            parse_experiment({"runs": True})

    def test_seed_must_be_nonnegative(self):
        with pytest.raises(ConfigError):
            parse_experiment({"master_seed": -1})

    def test_bad_fusion_mode(self):
        with pytest.raises(ConfigError) as err:
            parse_experiment({"fusion": {"mode": "tandem"}})
        assert "fusion.mode" in str(err.value)

    def test_bad_omega_strategy(self):
        with pytest.raises(ConfigError):
            parse_experiment({"fusion": {"omega_strategy": "fixed(2.0)"}})

    def test_min_trace_strategy_accepted(self):
        cfg = parse_experiment({"fusion": {"omega_strategy": "min-trace"}})
        assert cfg.fusion.omega_strategy == "min-trace"

    def test_bad_pd_interval(self):
        with pytest.raises(ConfigError):
            parse_experiment({"filter": {"pd_interval": [0.9, 0.5]}})

    def test_bad_phi_rows(self):
        with pytest.raises(ConfigError):
            parse_experiment({"filter": {"phi": [[0.5, 0.2], [0.01, 1.0]]}})

    def test_scenario_sensor_fields(self):
        cfg = parse_experiment(
            {"scenario": {"sensors": [{"pd_true": 0.9, "noise_var": 1.0, "clutter_rate": 2.0}]}}
        )
        assert len(cfg.scenario.sensors) == 1
        assert cfg.scenario.sensors[0].pd_true == 0.9

    def test_wrong_type_reports_path(self):
        with pytest.raises(ConfigError) as err:
            parse_experiment({"scenario": {"dt": "fast"}})
        assert "scenario.dt" in str(err.value)

    def test_non_mapping_document(self):
        with pytest.raises(ConfigError):
            parse_experiment([1, 2, 3])


class TestLoadErrors:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_experiment(tmp_path / "nope.json")

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            load_experiment(path)

    def test_error_carries_path_attribute(self):
        with pytest.raises(ConfigError) as err:
            parse_experiment({"runs": -3})
        assert err.value.path == "runs"
