"""
Tests for experiment configuration.

Coverage:
- Defaults and derived channel ladders
- YAML loading, JSON Schema validation and unknown keys
- Precedence: file < preset < TRANSMAT_SEED < CLI overrides
- Presets and config hashing
- CLI validators
- Shipped sample configs load and agree with defaults and presets
"""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from transmat.core.config import (
    PRESETS,
    SEED_ENV,
    ExperimentConfig,
    NetworkConfig,
    config_hash,
    dump_config,
    load_config,
    network_config_from_dict,
    with_model,
)
from transmat.core.errors import ConfigError
from transmat.core.validators import validate_choice, validate_number_list, validate_stage_list

SAMPLES_DIR = Path(__file__).resolve().parents[1] / "samples"

# ---------------------------------------------------------------------------
# Fixtures
# ---------------------------------------------------------------------------

VALID_CONFIG = """
model:
  window_size: 8
  use_mgf: false
train:
  iterations: 10
  seed: 7
loss:
  w_alpha: 0.5
"""

UNKNOWN_KEY_CONFIG = """
model:
  window_sise: 8
"""

WRONG_TYPE_CONFIG = """
train:
  iterations: "many"
"""


@pytest.fixture(autouse=True)
def _no_env_seed(monkeypatch, tmp_path):
    monkeypatch.delenv(SEED_ENV, raising=False)
    monkeypatch.chdir(tmp_path)


def _write(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "experiment.yaml"
    path.write_text(text, encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# Defaults
# ---------------------------------------------------------------------------

class TestDefaults:
    def test_desk_defaults(self):
        cfg = load_config()
        assert cfg.model.embed_dims == (32, 64, 128, 256)
        assert cfg.model.window_size == 4
        assert cfg.data.crop_size == 64
        assert cfg.train.learning_rate == 1e-4
        assert (cfg.loss.w_alpha, cfg.loss.w_comp, cfg.loss.w_lap) == (0.4, 1.2, 0.16)

    def test_pyramid_channels(self):
        assert NetworkConfig().pyramid_channels() == (16, 32, 64, 128, 256, 512)

    def test_data_seed_follows_train_seed(self):
        cfg = load_config(overrides={"train": {"seed": 11}})
        assert cfg.data.seed == 11

    def test_heads_must_divide_dims(self):
        with pytest.raises(ConfigError, match="num_heads"):
            load_config(overrides={"model": {"num_heads": [3, 4, 8, 8]}})


# ---------------------------------------------------------------------------
# File loading
# ---------------------------------------------------------------------------

class TestConfigFile:
    def test_valid_file(self, tmp_path):
        cfg = load_config(_write(tmp_path, VALID_CONFIG))
        assert cfg.model.window_size == 8
        assert cfg.model.use_mgf is False
        assert cfg.train.iterations == 10
        assert cfg.train.seed == 7
        assert cfg.loss.w_alpha == 0.5

    def test_unknown_key_is_error(self, tmp_path):
        with pytest.raises(ConfigError, match="window_sise"):
            load_config(_write(tmp_path, UNKNOWN_KEY_CONFIG))

    def test_wrong_type_names_path(self, tmp_path):
        with pytest.raises(ConfigError, match="train/iterations"):
            load_config(_write(tmp_path, WRONG_TYPE_CONFIG))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "absent.yaml")

    def test_dump_and_reload(self, tmp_path):
        cfg = load_config(_write(tmp_path, VALID_CONFIG))
        out = tmp_path / "run" / "config.yaml"
        dump_config(cfg, out)
        assert load_config(out) == cfg


# ---------------------------------------------------------------------------
# Precedence
# ---------------------------------------------------------------------------

class TestPrecedence:
    def test_env_seed_overrides_file(self, tmp_path, monkeypatch):
        monkeypatch.setenv(SEED_ENV, "99")
        cfg = load_config(_write(tmp_path, VALID_CONFIG))
        assert cfg.train.seed == 99

    def test_cli_overrides_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv(SEED_ENV, "99")
        cfg = load_config(_write(tmp_path, VALID_CONFIG), overrides={"train": {"seed": 3}})
        assert cfg.train.seed == 3

    def test_env_seed_from_dotenv(self, tmp_path):
        (tmp_path / ".env").write_text(f"{SEED_ENV}=21\n", encoding="utf-8")
        try:
            assert load_config().train.seed == 21
        finally:
            import os
            os.environ.pop(SEED_ENV, None)

    def test_bad_env_seed(self, monkeypatch):
        monkeypatch.setenv(SEED_ENV, "abc")
        with pytest.raises(ConfigError, match=SEED_ENV):
            load_config()

    def test_none_override_is_ignored(self):
        assert load_config(overrides={"train": {"iterations": None}}).train.iterations == 2000

    def test_unknown_override_key(self):
        with pytest.raises(ConfigError, match="train.iters"):
            load_config(overrides={"train": {"iters": 5}})

    def test_preset_applies_after_file(self, tmp_path):
        cfg = load_config(_write(tmp_path, VALID_CONFIG), preset="tgtb-only")
        assert cfg.model.use_mgf is False
        assert cfg.model.window_size == 8

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="preset"):
            load_config(preset="nope")


# ---------------------------------------------------------------------------
# Hashing and presets
# ---------------------------------------------------------------------------

class TestHashAndPresets:
    def test_hash_is_stable(self):
        assert config_hash(NetworkConfig()) == config_hash(NetworkConfig())

    def test_hash_tracks_architecture(self):
        assert config_hash(NetworkConfig()) != config_hash(NetworkConfig(use_mgf=False))

    def test_round_trip_from_dict(self):
        cfg = NetworkConfig(tri_token_stages=(1, 4))
        from transmat.core.config import section_to_dict
        assert network_config_from_dict(section_to_dict(cfg)) == cfg

    def test_unknown_model_key(self):
        with pytest.raises(ConfigError):
            network_config_from_dict({"depth": 3})

    @pytest.mark.parametrize("preset", sorted(PRESETS))
    def test_every_preset_loads(self, preset):
        assert isinstance(load_config(preset=preset), ExperimentConfig)

    def test_baseline_has_no_tri_tokens(self):
        assert load_config(preset="baseline").model.active_tri_token_stages == ()

    def test_with_model(self):
        cfg = with_model(ExperimentConfig(), use_tgtb=False)
        assert cfg.model.use_tgtb is False
        assert cfg.train == ExperimentConfig().train


# ---------------------------------------------------------------------------
# Sample configs
# ---------------------------------------------------------------------------

class TestSamples:
    @pytest.mark.parametrize("path", sorted(SAMPLES_DIR.glob("*.yaml")), ids=lambda p: p.name)
    def test_sample_loads(self, path):
        assert isinstance(load_config(path), ExperimentConfig)

    def test_desk_sample_is_the_default(self):
        assert load_config(SAMPLES_DIR / "desk.yaml") == load_config()

    def test_ablation_sample_matches_preset(self):
        assert load_config(SAMPLES_DIR / "ablation-baseline.yaml") == load_config(preset="baseline")


# ---------------------------------------------------------------------------
# Validators
# ---------------------------------------------------------------------------

class TestValidators:
    def test_choice_normalizes_separators(self):
        assert validate_choice("TGTB_ONLY", PRESETS, "--preset") == "tgtb-only"

    def test_choice_suggests(self):
        with pytest.raises(ConfigError, match="did you mean 'baseline'"):
            validate_choice("baselin", PRESETS, "--preset")

    def test_stage_list(self):
        assert validate_stage_list("4, 1,1", "--tri-token-stages") == [1, 4]
        assert validate_stage_list("", "--tri-token-stages") == []

    def test_stage_list_rejects(self):
        with pytest.raises(ConfigError, match="'5'"):
            validate_stage_list("1,5", "--tri-token-stages")

    def test_number_list(self):
        assert validate_number_list("16, 32", "--cnn-widths", 2) == [16, 32]
        assert validate_number_list("0.8,1.25", "--scale-range", 2, float) == [0.8, 1.25]
        assert validate_number_list(None, "--cnn-widths", 2) is None

    def test_number_list_rejects(self):
        with pytest.raises(ConfigError, match="takes 4"):
            validate_number_list("8,8", "--embed-dims", 4)
        with pytest.raises(ConfigError, match="'x'"):
            validate_number_list("8,x", "--cnn-widths", 2)
