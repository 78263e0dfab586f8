"""
Global output preferences
-------------------------
CLI-wide output options configured in the app callback.
"""

from typing import Optional, List

SELECTED_COLUMNS: Optional[List[str]] = None
PRECISION = 5


def set_output_preferences(columns: Optional[str] = None, precision: int = 5):
    global SELECTED_COLUMNS, PRECISION
    if columns:
        parsed = [c.strip() for c in columns.split(",") if c.strip()]
        SELECTED_COLUMNS = parsed or None
    else:
        SELECTED_COLUMNS = None
    PRECISION = precision if precision and precision > 0 else 5


def get_selected_columns() -> Optional[List[str]]:
    return SELECTED_COLUMNS


def get_precision() -> int:
    return PRECISION
