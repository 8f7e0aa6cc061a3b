"""Tests for experiment configuration loading."""

import json
from pathlib import Path

import pytest

from stagerl.config import ConfigError, ExperimentConfig, ScheduleConfig
from stagerl.data_structures import StageSchedule

CONFIG_DIR = Path(__file__).resolve().parents[2] / "configs"


class TestDefaults:
    """Tests for the default configuration."""

    def test_defaults_are_consistent(self) -> None:
        """Test that the default schedule grid fits the default run."""
        config = ExperimentConfig()
        schedules = config.schedule.schedules()
        assert schedules[0] == StageSchedule((10_000, 30_000, 50_000))
        assert schedules[-1] == StageSchedule((30_000, 50_000, 70_000))
        assert config.trainer.total_steps == 80_000

    def test_to_dict_materializes_everything(self) -> None:
        """Test that every block and default appears in the resolved form."""
        data = ExperimentConfig().to_dict()
        assert set(data) == {"env", "guidance", "schedule", "trainer", "measurement", "output"}
        assert data["guidance"]["stages"] == [1, 2, 3]
        assert data["measurement"]["anchor"] == "first"
        assert data["guidance"]["bonus_semantics"] == "once"

    def test_to_dict_holds_plain_lists(self) -> None:
        """Test that nested tuples come out as lists."""
        config = ExperimentConfig.from_dict({"schedule": {"transitions": [[5, 10, 15]]}})
        data = config.to_dict()
        assert data["schedule"]["transitions"] == [[5, 10, 15]]
        assert data["trainer"]["seeds"] == [0, 1, 2]
        assert data["output"]["formats"] == ["csv", "text"]

    def test_resolved_form_reloads(self) -> None:
        """Test that the resolved JSON builds the same configuration."""
        config = ExperimentConfig.from_dict({"env": {"level": 2}, "trainer": {"seeds": [4, 5]}})
        assert ExperimentConfig.from_dict(json.loads(config.to_json())) == config


class TestValidation:
    """Tests for schema and cross-block checks."""

    @pytest.mark.parametrize(
        "data,message",
        [
            ({"envs": {}}, "Unknown top-level key"),
            ({"env": {"levle": 2}}, r"Unknown key\(s\) in 'env': levle"),
            ({"env": []}, "Block 'env' must be an object"),
            ({"env": {"level": 4}}, "env.level"),
            ({"env": {"level": 2, "grid_size": 5}}, ">= 7 for levels 2-3"),
            ({"guidance": {"stages": [1, 4]}}, "guidance.stages"),
            ({"measurement": {"anchor": "middle"}}, "measurement.anchor"),
            ({"measurement": {"checks": ["speed"]}}, "measurement.checks"),
            ({"output": {"formats": ["pdf"]}}, "output.formats"),
            ({"trainer": {"algorithm": "sarsa"}}, "trainer.algorithm"),
            ({"trainer": {"learning_rate": 0}}, "trainer: learning_rate"),
            ({"schedule": {"transitions": [[30, 20, 10]]}}, "schedule:"),
        ],
    )
    def test_invalid_blocks(self, data, message) -> None:
        """Test that invalid blocks raise ConfigError."""
        with pytest.raises(ConfigError, match=message):
            ExperimentConfig.from_dict(data)

    def test_stage_count_must_match(self) -> None:
        """Test that schedules need one transition per guidance stage."""
        with pytest.raises(ConfigError, match="for 2 guidance stages"):
            ExperimentConfig.from_dict({"guidance": {"stages": [1, 2]}})

    def test_schedule_must_fit_the_run(self) -> None:
        """Test that schedules end within total_steps."""
        with pytest.raises(ConfigError, match="ends after trainer.total_steps"):
            ExperimentConfig.from_dict({"trainer": {"total_steps": 60_000}})

    def test_config_error_is_value_error(self) -> None:
        """Test the exception hierarchy."""
        assert issubclass(ConfigError, ValueError)

    def test_explicit_transitions(self) -> None:
        """Test explicit transitions override the t1 grid."""
        schedule = ScheduleConfig(transitions=((5, 10, 15),))
        assert schedule.schedules() == (StageSchedule((5, 10, 15)),)


class TestFiles:
    """Tests for reading and writing configuration files."""

    def test_load_missing_file(self, tmp_path) -> None:
        """Test a missing file."""
        with pytest.raises(ConfigError, match="Cannot read config"):
            ExperimentConfig.load(tmp_path / "missing.json")

    def test_load_bad_json(self, tmp_path) -> None:
        """Test a file that is not JSON."""
        path = tmp_path / "bad.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigError, match="not valid JSON"):
            ExperimentConfig.load(path)

    def test_dump_and_load(self, tmp_path) -> None:
        """Test that dumped configurations load back."""
        config = ExperimentConfig.from_dict({"measurement": {"policy": "lenient"}})
        path = tmp_path / "resolved.json"
        config.dump(path)
        assert ExperimentConfig.load(path) == config

    @pytest.mark.parametrize(
        "name",
        [
            "validate_default.json",
            "validate_per_step.json",
            "level2_sweep.json",
            "smoke_sweep.json",
        ],
    )
    def test_shipped_configs_load(self, name) -> None:
        """Test that every shipped configuration is valid."""
        assert isinstance(ExperimentConfig.load(CONFIG_DIR / name), ExperimentConfig)


class TestDerived:
    """Tests for overrides and derived specs."""

    def test_with_overrides(self) -> None:
        """Test command-line overrides."""
        config = ExperimentConfig().with_overrides(directory="out", workers=3, seeds=(9,))
        assert config.output.directory == "out"
        assert config.output.workers == 3
        assert config.trainer.seeds == (9,)

    def test_no_overrides_keep_config(self) -> None:
        """Test that absent overrides change nothing."""
        assert ExperimentConfig().with_overrides() == ExperimentConfig()

    def test_sweep_spec(self) -> None:
        """Test the sweep derived from the blocks."""
        config = ExperimentConfig.load(CONFIG_DIR / "smoke_sweep.json")
        spec = config.sweep_spec()
        assert spec.seeds == (0, 1)
        assert spec.eps == 0.5
        assert spec.tasks.family.grid_size == 5
        assert spec.tasks.family.time_limit == 12
        assert spec.trainer.total_steps == 1_200
        assert spec.schedules[0] == StageSchedule((200, 400, 600))

    def test_family_spec_size(self) -> None:
        """Test overriding the family size."""
        config = ExperimentConfig.from_dict({"env": {"level": 2, "eval_size": 20}})
        assert config.family_spec().size == 20
        assert config.family_spec(size=3).size == 3
        assert config.family_spec().bonus_semantics == "once"
