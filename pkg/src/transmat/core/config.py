"""
Experiment configuration
------------------------
Frozen dataclasses for every configurable part of the system, plus loading
from YAML files validated against `config_schema.json`.

Precedence (lowest to highest):
  built-in desk defaults < config file < --preset < TRANSMAT_SEED < CLI flags
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import jsonschema
import yaml
from dotenv import load_dotenv

from transmat.core.errors import ConfigError
from transmat.core.logger import log

SCHEMA_PATH = Path(__file__).resolve().parents[1] / "config_schema.json"
SEED_ENV = "TRANSMAT_SEED"

# Input sides must be multiples of this (two CNN strides + three patch merges).
NETWORK_STRIDE = 32

# alpha exactly 1 / exactly 0 up to float noise
FG_THRESHOLD = 1.0 - 1e-6
BG_THRESHOLD = 1e-6


@dataclass(frozen=True)
class NetworkConfig:
    cnn_widths: Tuple[int, int] = (16, 32)
    cnn_blocks: Tuple[int, int] = (2, 2)
    embed_dims: Tuple[int, int, int, int] = (32, 64, 128, 256)
    num_heads: Tuple[int, int, int, int] = (2, 4, 8, 8)
    blocks_per_stage: Tuple[int, int, int, int] = (2, 2, 6, 2)
    window_size: int = 4
    mlp_ratio: float = 4.0
    tri_token_period: int = 5
    use_tgtb: bool = True
    tri_token_stages: Tuple[int, ...] = (1, 2, 3, 4)
    tri_token_shift: bool = True
    shift_windows: bool = True
    rel_pos_bias: bool = False
    use_mgf: bool = True
    mgf_local: bool = True
    mgf_global: bool = True
    mgf_shared_trunk: bool = True
    squeeze_ratio: int = 4
    zero_init_residual: bool = False

    @property
    def active_tri_token_stages(self) -> Tuple[int, ...]:
        """Stages (1-based) whose blocks may use tri-token attention."""
        return tuple(self.tri_token_stages) if self.use_tgtb else ()

    def stage_out_dims(self) -> Tuple[int, ...]:
        """Channel width after each stage's patch merge."""
        dims = list(self.embed_dims)
        return tuple(dims[1:] + [2 * dims[-1]])

    def pyramid_channels(self) -> Tuple[int, ...]:
        return tuple(self.cnn_widths) + self.stage_out_dims()

    def violations(self) -> List[str]:
        problems = []
        for stage, (dim, heads) in enumerate(zip(self.embed_dims, self.num_heads), start=1):
            if dim % heads:
                problems.append(f"model.embed_dims[{stage - 1}]={dim} is not divisible by num_heads={heads}")
        if self.tri_token_period < 1:
            problems.append("model.tri_token_period must be >= 1")
        for stage in self.tri_token_stages:
            if stage not in (1, 2, 3, 4):
                problems.append(f"model.tri_token_stages contains {stage}; allowed 1..4")
        return problems


@dataclass(frozen=True)
class AugmentationConfig:
    crop_size: int = 64
    trimap_kernel_min: int = 1
    trimap_kernel_max: int = 10
    flip_probability: float = 0.5
    scale_range: Tuple[float, float] = (0.8, 1.25)
    rotation_range: float = 30.0
    shear_range: float = 10.0
    eval_backgrounds_per_fg: int = 1
    eval_trimap_radius: Optional[int] = None
    seed: int = 0

    @property
    def eval_radius(self) -> int:
        if self.eval_trimap_radius is not None:
            return self.eval_trimap_radius
        return (self.trimap_kernel_min + self.trimap_kernel_max) // 2

    def violations(self) -> List[str]:
        problems = []
        if not 1 <= self.trimap_kernel_min <= self.trimap_kernel_max:
            problems.append(
                f"data.trimap_kernel_min={self.trimap_kernel_min} / trimap_kernel_max={self.trimap_kernel_max} "
                "must satisfy 1 <= min <= max"
            )
        if self.crop_size % NETWORK_STRIDE:
            problems.append(f"data.crop_size={self.crop_size} must be divisible by {NETWORK_STRIDE}")
        low, high = self.scale_range
        if low > high:
            problems.append(f"data.scale_range={list(self.scale_range)} must be increasing")
        return problems


@dataclass(frozen=True)
class LossConfig:
    w_alpha: float = 0.4
    w_comp: float = 1.2
    w_lap: float = 0.16
    lap_levels: int = 5
    lap_region: str = "unknown"

    def violations(self) -> List[str]:
        problems = []
        for name in ("w_alpha", "w_comp", "w_lap"):
            if getattr(self, name) < 0:
                problems.append(f"loss.{name} must be >= 0")
        if self.lap_region not in ("unknown", "full"):
            problems.append(f"loss.lap_region must be 'unknown' or 'full', got '{self.lap_region}'")
        return problems


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 2000
    batch_size: int = 4
    learning_rate: float = 1e-4
    lr_floor: float = 1e-6
    restart_divisor: int = 8
    restart_mult: int = 2
    beta1: float = 0.9
    beta2: float = 0.999
    seed: int = 0
    grad_clip: float = 0.0
    checkpoint_every: int = 500
    log_every: int = 50

    def violations(self) -> List[str]:
        problems = []
        if self.learning_rate <= 0:
            problems.append("train.learning_rate must be > 0")
        if self.iterations < 1:
            problems.append("train.iterations must be >= 1")
        if self.lr_floor > self.learning_rate:
            problems.append("train.lr_floor must not exceed train.learning_rate")
        return problems


@dataclass(frozen=True)
class EvalConfig:
    max_side: int = 1024
    tile_size: int = 512
    tile_overlap: int = 64
    whole_image: bool = False
    trust_trimap: bool = False
    grad_sigma: float = 1.4
    conn_step: float = 0.1

    def violations(self) -> List[str]:
        problems = []
        if self.tile_size % NETWORK_STRIDE:
            problems.append(f"eval.tile_size={self.tile_size} must be divisible by {NETWORK_STRIDE}")
        if self.tile_overlap >= self.tile_size:
            problems.append("eval.tile_overlap must be smaller than eval.tile_size")
        return problems


@dataclass(frozen=True)
class ExperimentConfig:
    model: NetworkConfig = field(default_factory=NetworkConfig)
    data: AugmentationConfig = field(default_factory=AugmentationConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def violations(self) -> List[str]:
        return (
            self.model.violations()
            + self.data.violations()
            + self.train.violations()
            + self.loss.violations()
            + self.eval.violations()
        )

    def to_dict(self) -> Dict[str, Dict[str, Any]]:
        return {name: section_to_dict(getattr(self, name)) for name in SECTIONS}


SECTIONS: Dict[str, type] = {
    "model": NetworkConfig,
    "data": AugmentationConfig,
    "train": TrainConfig,
    "loss": LossConfig,
    "eval": EvalConfig,
}

# Ablation presets along the TGTB/MGF, tri-token position and MGF branch axes.
PRESETS: Dict[str, Dict[str, Any]] = {
    "full": {},
    "baseline": {"use_tgtb": False, "use_mgf": False},
    "tgtb-only": {"use_mgf": False},
    "mgf-only": {"use_tgtb": False},
    "stage-1": {"tri_token_stages": [1]},
    "stage-2": {"tri_token_stages": [2]},
    "stage-3": {"tri_token_stages": [3]},
    "stage-4": {"tri_token_stages": [4]},
    "mgf-local": {"mgf_global": False},
    "mgf-global": {"mgf_local": False},
}


def section_to_dict(section) -> Dict[str, Any]:
    """JSON-friendly dict of a config section (tuples become lists)."""
    out = {}
    for key, value in asdict(section).items():
        out[key] = list(value) if isinstance(value, tuple) else value
    return out


def _coerce(section_cls: type, values: Mapping[str, Any]):
    kwargs = {}
    for f in fields(section_cls):
        if f.name not in values:
            continue
        value = values[f.name]
        if isinstance(value, list):
            value = tuple(value)
        kwargs[f.name] = value
    return section_cls(**kwargs)


def network_config_from_dict(values: Mapping[str, Any]) -> NetworkConfig:
    unknown = set(values) - {f.name for f in fields(NetworkConfig)}
    if unknown:
        raise ConfigError(f"Unknown model key(s): {', '.join(sorted(unknown))}")
    return _coerce(NetworkConfig, values)


def config_hash(model: NetworkConfig) -> str:
    """SHA-256 over the canonical JSON of the architecture."""
    canonical = json.dumps(section_to_dict(model), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _load_schema() -> dict:
    try:
        with open(SCHEMA_PATH, encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"Internal error: config schema not found at {SCHEMA_PATH}.")


def validate_raw(raw: Any, source: str = "config") -> Dict[str, Dict[str, Any]]:
    """Validate a parsed config mapping against the JSON Schema."""
    if raw is None:
        return {}
    try:
        jsonschema.validate(raw, _load_schema())
    except jsonschema.exceptions.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{source}: validation failed at '{where}': {exc.message}")
    return raw


def read_config_file(path: Path) -> Dict[str, Dict[str, Any]]:
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"Failed to parse config file '{path}': {exc}")
    return validate_raw(raw, source=str(path))


def seed_from_env() -> Optional[int]:
    """TRANSMAT_SEED from the environment or a .env file in the working directory."""
    cwd_env = Path.cwd() / ".env"
    if cwd_env.exists():
        load_dotenv(cwd_env, override=False)
    value = os.getenv(SEED_ENV)
    if value is None or not value.strip():
        return None
    try:
        seed = int(value.strip())
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got '{value}'")
    if seed < 0:
        raise ConfigError(f"{SEED_ENV} must be non-negative, got {seed}")
    return seed


def load_config(
    path: Optional[Path] = None,
    preset: Optional[str] = None,
    overrides: Optional[Mapping[str, Mapping[str, Any]]] = None,
    use_env: bool = True,
) -> ExperimentConfig:
    """
    Build an ExperimentConfig from defaults, an optional YAML file, an
    optional ablation preset, TRANSMAT_SEED and explicit CLI overrides
    (None values in overrides are ignored).
    """
    merged: Dict[str, Dict[str, Any]] = {name: section_to_dict(cls()) for name, cls in SECTIONS.items()}
    # data.seed mirrors train.seed and is not a file key
    merged["data"].pop("seed")

    if path is not None:
        for section, values in read_config_file(path).items():
            merged[section].update(values)
        log(f"Config loaded from {path}", verbose_only=True)

    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"Unknown preset '{preset}'. Allowed: {', '.join(PRESETS)}")
        merged["model"].update(PRESETS[preset])

    if use_env:
        env_seed = seed_from_env()
        if env_seed is not None:
            merged["train"]["seed"] = env_seed
            log(f"Seed {env_seed} taken from {SEED_ENV}", verbose_only=True)

    for section, values in (overrides or {}).items():
        if section not in merged:
            raise ConfigError(f"Unknown config section '{section}'")
        for key, value in values.items():
            if value is None:
                continue
            if key not in merged[section]:
                raise ConfigError(f"Unknown config key '{section}.{key}'")
            merged[section][key] = value

    # Re-validate so CLI overrides obey the same schema as files.
    validate_raw(merged, source="effective config")

    merged["data"]["seed"] = merged["train"]["seed"]
    config = ExperimentConfig(**{name: _coerce(cls, merged[name]) for name, cls in SECTIONS.items()})
    problems = config.violations()
    if problems:
        raise ConfigError("Invalid configuration:\n  - " + "\n  - ".join(problems))
    return config


def with_model(config: ExperimentConfig, **changes) -> ExperimentConfig:
    """Copy of config with model fields replaced (used by ablation sweeps and tests)."""
    return replace(config, model=replace(config.model, **changes))


def dump_config(config: ExperimentConfig, path: Path):
    """Write the effective config as YAML next to training outputs."""
    path.parent.mkdir(parents=True, exist_ok=True)
    data = config.to_dict()
    data["data"].pop("seed", None)
    path.write_text(yaml.safe_dump(data, sort_keys=False), encoding="utf-8")
