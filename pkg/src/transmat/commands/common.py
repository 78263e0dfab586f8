# transmat/commands/common.py
"""
Options and helpers shared by several commands.

Every config key has a flag of the same name (underscores become dashes,
booleans get a --no- form). Flags default to None so that only the ones
given on the command line override the file, preset and TRANSMAT_SEED.
"""

from pathlib import Path
from typing import Any, Dict, Optional

import typer

from transmat.core.config import PRESETS, ExperimentConfig, load_config
from transmat.core.validators import validate_choice, validate_number_list, validate_stage_list
from transmat.model.network import TriTokenMattingNet, build_model
from transmat.training.checkpoint import check_compatible, load_into, read_checkpoint

CONFIG_OPTION = typer.Option(None, "--config", "-c", help="YAML experiment config.")
PRESET_OPTION = typer.Option(None, "--preset", help=f"Ablation preset: {'|'.join(PRESETS)}")

# eval section, shared by eval and infer
MAX_SIDE_OPTION = typer.Option(None, "--max-side", help="Tile images whose longer side exceeds this.")
TILE_SIZE_OPTION = typer.Option(None, "--tile-size", help="Tile side for large images (multiple of 32).")
TILE_OVERLAP_OPTION = typer.Option(None, "--tile-overlap", help="Overlap between neighbouring tiles.")
TRUST_TRIMAP_OPTION = typer.Option(
    None, "--trust-trimap/--no-trust-trimap", help="Clamp FG pixels to 1 and BG pixels to 0."
)

# key -> (length, element type) for comma-separated list flags
MODEL_LIST_KEYS = {
    "cnn_widths": (2, int),
    "cnn_blocks": (2, int),
    "embed_dims": (4, int),
    "num_heads": (4, int),
    "blocks_per_stage": (4, int),
}
DATA_LIST_KEYS = {"scale_range": (2, float)}
LAP_REGIONS = ("unknown", "full")


def flag_name(key: str) -> str:
    return "--" + key.replace("_", "-")


def _parse_lists(values: Dict[str, Any], list_keys: Dict[str, tuple]) -> Dict[str, Any]:
    parsed = dict(values)
    for key, (length, cast) in list_keys.items():
        if key in parsed:
            parsed[key] = validate_number_list(parsed[key], flag_name(key), length, cast)
    return parsed


def model_overrides(values: Dict[str, Any]) -> Dict[str, Any]:
    """model.* flag values -> config overrides."""
    parsed = _parse_lists(values, MODEL_LIST_KEYS)
    if "tri_token_stages" in parsed:
        parsed["tri_token_stages"] = validate_stage_list(parsed["tri_token_stages"], "--tri-token-stages")
    return parsed


def data_overrides(values: Dict[str, Any]) -> Dict[str, Any]:
    return _parse_lists(values, DATA_LIST_KEYS)


def loss_overrides(values: Dict[str, Any]) -> Dict[str, Any]:
    parsed = dict(values)
    if parsed.get("lap_region") is not None:
        parsed["lap_region"] = validate_choice(parsed["lap_region"], LAP_REGIONS, "--lap-region")
    return parsed


def resolve_config(
    config: Optional[Path],
    preset: Optional[str],
    overrides: Optional[Dict[str, Dict[str, Any]]] = None,
) -> ExperimentConfig:
    if preset is not None:
        preset = validate_choice(preset, PRESETS, "--preset")
    return load_config(config, preset=preset, overrides=overrides)


def load_model(checkpoint: Path, config: Optional[ExperimentConfig] = None, force: bool = False) -> TriTokenMattingNet:
    """Model from a checkpoint; with a config, the architecture hashes must agree unless forced."""
    ckpt = read_checkpoint(checkpoint)
    check_compatible(ckpt, config.model if config is not None else None, force=force, source=str(checkpoint))
    model = build_model(ckpt.config)
    load_into(model, ckpt)
    model.eval()
    return model
