# transmat/commands/gradcheck.py
"""
Gradcheck Command Module
------------------------
Compare analytic gradients with central finite differences per component.
"""

import time
from typing import List, Optional

import typer

from transmat.core.errors import EXIT_NUMERICAL, TransmatError
from transmat.core.notifier import error, fail, success, timed_summary
from transmat.core.output_manager import FORMATS, export_data
from transmat.core.validators import validate_choice
from transmat.schemas.gradcheck_schema import schema as gradcheck_schema
from transmat.training.gradcheck import COMPONENTS, DEFAULT_COMPONENTS, run_gradcheck


def gradcheck_command(
    components: Optional[List[str]] = typer.Option(
        None,
        "--component",
        help=f"Component to check (repeatable, or 'all'): {'|'.join(COMPONENTS)}",
    ),
    seed: int = typer.Option(0, "--seed", help="Seed for the random inputs."),
    fmt: str = typer.Option("table", "--format", "-f", help="Output format: table|json|jsonl|csv"),
    output: Optional[str] = typer.Option(None, "--output", "-o", help="Output file for json/jsonl/csv."),
):
    """
    Run gradient checks; exits with code 3 if any component fails.
    """
    started_at = time.perf_counter()
    try:
        fmt = validate_choice(fmt, FORMATS, "--format")
        names = list(components or ["all"])
        if "all" in names:
            names = list(DEFAULT_COMPONENTS)
        names = [validate_choice(n, COMPONENTS, "--component") for n in names]
        reports = [run_gradcheck(name, seed) for name in names]
    except TransmatError as exc:
        fail(exc)

    export_data([r.to_row() for r in reports], schema=gradcheck_schema, fmt=fmt, output=output, title="Gradient check")
    failed = [r for r in reports if not r.passed]
    timed_summary(f"Checked {len(reports)} component(s)", time.perf_counter() - started_at, error_count=len(failed))
    if failed:
        details = ", ".join(f"{r.component} ({r.worst_tensor}: {r.max_rel_error:.3e})" for r in failed)
        error(f"Gradient check failed: {details}", exit_code=EXIT_NUMERICAL)
    success("All gradient checks passed.")
