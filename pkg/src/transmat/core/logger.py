# transmat/core/logger.py
from typing import Mapping
from rich.console import Console

console = Console(stderr=True, highlight=False)

# Verbosity controls (set in transmat.app)
QUIET = False
VERBOSE = False


def set_verbosity(quiet: bool = False, verbose: bool = False):
    global QUIET, VERBOSE
    QUIET = quiet
    VERBOSE = verbose


def log(message: str, style="cyan", force: bool = False, verbose_only: bool = False):
    """Prints a colored log message to the console."""
    if QUIET and not force:
        return
    if verbose_only and not VERBOSE:
        return
    console.print(f"[{style}]{message}[/{style}]")


def log_values(prefix: str, values: Mapping[str, float], style="cyan", verbose_only: bool = False, precision: int = 5):
    """Log a `prefix key=value ...` line, floats rounded for display only."""
    parts = []
    for key, value in values.items():
        if isinstance(value, float):
            parts.append(f"{key}={value:.{precision}g}")
        else:
            parts.append(f"{key}={value}")
    log(f"{prefix} " + " ".join(parts), style=style, verbose_only=verbose_only)
