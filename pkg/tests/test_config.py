import json

import pytest

from splinedyn.config import PipelineConfig, apply_override, load_config, parse_override
from splinedyn.errors import ConfigError


class TestConfig:
    def test_defaults(self):
        cfg = PipelineConfig().validate()
        assert cfg.partitions.K == 20
        assert cfg.order == 1
        assert cfg.trim_seconds == 1.2
        assert cfg.chirp.total_duration == 100.0
        assert cfg.step.total_duration == 50.0
        assert cfg.voltage_fit.grid_size == 17 and cfg.voltage_fit.degree == 3

    def test_round_trip(self, tmp_path):
        cfg = apply_override(PipelineConfig(), "plant.tau", 0.07)
        path = tmp_path / "c.json"
        path.write_text(cfg.dumps())
        again = load_config(path)
        assert again == cfg
        assert again.dumps() == cfg.dumps()

    def test_dt_follows_pipeline(self):
        cfg = apply_override(PipelineConfig(), "dt", 5e-4)
        assert cfg.chirp.sample_dt == 5e-4 and cfg.step.sample_dt == 5e-4

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            PipelineConfig.from_dict({"bogus": 1})
        with pytest.raises(ConfigError):
            apply_override(PipelineConfig(), "plant.bogus", 1)

    def test_bad_json(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_degree_too_low_for_order(self):
        cfg = apply_override(PipelineConfig(), "order", 3)
        with pytest.raises(ConfigError, match="degree >= 4"):
            cfg.validate()

    def test_parse_override(self):
        assert parse_override("plant.tau=0.1") == ("plant.tau", 0.1)
        assert parse_override("output_dir=runs/a") == ("output_dir", "runs/a")
        assert parse_override("benchmark.orders=[1,2]") == ("benchmark.orders", [1, 2])
        with pytest.raises(ConfigError):
            parse_override("novalue")

    def test_lists_become_tuples(self):
        cfg = apply_override(PipelineConfig(), "benchmark.orders", [1, 2])
        assert cfg.benchmark.orders == (1, 2)
        json.loads(cfg.dumps())
