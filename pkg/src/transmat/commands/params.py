# transmat/commands/params.py
"""
Params Command Module
---------------------
Parameter counts of ablation presets, split by network part.
"""

from pathlib import Path
from typing import List, Optional

import typer

from transmat.commands.common import CONFIG_OPTION, resolve_config
from transmat.core.config import PRESETS
from transmat.core.errors import TransmatError
from transmat.core.notifier import fail
from transmat.core.output_manager import FORMATS, export_data
from transmat.core.validators import validate_choice
from transmat.model.network import build_model, parameter_breakdown
from transmat.schemas.params_schema import schema as params_schema


def params_command(
    presets: Optional[List[str]] = typer.Option(None, "--preset", help="Preset(s) to count; all when omitted."),
    config: Optional[Path] = CONFIG_OPTION,
    fmt: str = typer.Option("table", "--format", "-f", help="Output format: table|json|jsonl|csv"),
    output: Optional[str] = typer.Option(None, "--output", "-o", help="Output file for json/jsonl/csv."),
):
    """
    Print parameter counts per preset.
    """
    rows = []
    try:
        fmt = validate_choice(fmt, FORMATS, "--format")
        for preset in presets or list(PRESETS):
            cfg = resolve_config(config, preset)
            row = {"preset": validate_choice(preset, PRESETS, "--preset")}
            row.update(parameter_breakdown(build_model(cfg.model, seed=0)))
            rows.append(row)
    except TransmatError as exc:
        fail(exc)
    export_data(rows, schema=params_schema, fmt=fmt, output=output, title="Parameters")
