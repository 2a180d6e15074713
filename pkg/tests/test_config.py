import pytest

from lesionclf.config import (
    DEFAULT_SEED,
    PipelineConfig,
    SEED_ENV_VAR,
    format_config,
    parse_config,
    resolve_seed,
)
from lesionclf.errors import ConfigError


class TestDefaults:
    def test_pinned_defaults(self):
        cfg = PipelineConfig()
        assert cfg.crop_fraction == 0.875
        assert (cfg.scale_min, cfg.scale_max) == (1.05, 1.25)
        assert cfg.brightness_factor == 1.2
        assert cfg.augment_fraction == 0.2
        assert cfg.iterations == 4000
        assert cfg.batch_size == 32
        assert cfg.log_every == 10
        assert cfg.learning_rate == 1e-3
        assert (cfg.beta1, cfg.beta2, cfg.epsilon) == (0.9, 0.999, 1e-8)
        assert cfg.seed == DEFAULT_SEED == 42
        assert cfg.normalization == "symmetric"
        assert cfg.hidden_activation == "relu"

    def test_adam_hyper_mapping(self):
        hyper = PipelineConfig(learning_rate=0.01, beta1=0.8).adam_hyper()
        assert hyper.learning_rate == 0.01
        assert hyper.beta1 == 0.8


class TestParsing:
    def test_round_trip_identity(self):
        cfg = PipelineConfig(iterations=123, learning_rate=3e-4, normalization="unit_interval")
        assert parse_config(format_config(cfg)) == cfg

    def test_round_trip_preserves_all_keys(self):
        text = format_config(PipelineConfig())
        reparsed = format_config(parse_config(text))
        assert reparsed == text

    def test_comments_and_blank_lines(self):
        cfg = parse_config("# full-line comment\n\niterations = 7  # trailing comment\n")
        assert cfg.iterations == 7

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config("iterationz = 10\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config("seed = 1\nseed = 2\n")

    def test_bad_value_type(self):
        with pytest.raises(ConfigError):
            parse_config("iterations = many\n")
        with pytest.raises(ConfigError):
            parse_config("learning_rate = fast\n")

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config("just words\n")

    @pytest.mark.parametrize(
        "line",
        [
            "iterations = 0",
            "batch_size = -1",
            "crop_fraction = 0.0",
            "crop_fraction = 1.5",
            "scale_min = 0.9",
            "scale_max = 1.0",  # below default scale_min
            "augment_fraction = 1.5",
            "beta1 = 1.0",
            "epsilon = 0.0",
            "normalization = minmax",
            "hidden_activation = gelu",
        ],
    )
    def test_domain_validation(self, line):
        with pytest.raises(ConfigError):
            parse_config(line + "\n")


class TestSeedPrecedence:
    def test_flag_wins(self, monkeypatch):
        monkeypatch.setenv(SEED_ENV_VAR, "7")
        assert resolve_seed(9, PipelineConfig(seed=5)) == 9

    def test_env_beats_config(self, monkeypatch):
        monkeypatch.setenv(SEED_ENV_VAR, "7")
        assert resolve_seed(None, PipelineConfig(seed=5)) == 7

    def test_config_beats_default(self, monkeypatch):
        monkeypatch.delenv(SEED_ENV_VAR, raising=False)
        assert resolve_seed(None, PipelineConfig(seed=5)) == 5

    def test_default(self, monkeypatch):
        monkeypatch.delenv(SEED_ENV_VAR, raising=False)
        assert resolve_seed(None, PipelineConfig()) == 42

    def test_bad_env_value(self, monkeypatch):
        monkeypatch.setenv(SEED_ENV_VAR, "lots")
        with pytest.raises(ConfigError):
            resolve_seed(None, PipelineConfig())
