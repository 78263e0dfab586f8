"""
Input validators for fixed CLI choices.
"""

from __future__ import annotations

import difflib
from typing import Callable, Iterable, List, Optional, Union

from transmat.core.errors import ConfigError


def _suggest(value: str, allowed: Iterable[str]) -> Optional[str]:
    options = sorted({str(a).lower() for a in allowed})
    matches = difflib.get_close_matches(str(value).lower(), options, n=1, cutoff=0.6)
    return matches[0] if matches else None


def validate_choice(value: Optional[str], allowed: Iterable[str], param_name: str) -> Optional[str]:
    """
    Validate a single fixed choice (case-insensitive, '-' and '_' interchangeable)
    and return the normalized lower-case value. Raises ConfigError with guidance.
    """
    if value is None:
        return None
    allowed_set = {str(a).lower() for a in allowed}
    low = str(value).strip().lower()
    for candidate in (low, low.replace("-", "_"), low.replace("_", "-")):
        if candidate in allowed_set:
            return candidate
    hint = _suggest(low, allowed_set)
    if hint:
        raise ConfigError(
            f"Invalid value for {param_name}: '{value}' (did you mean '{hint}'?). "
            f"Allowed values: {', '.join(sorted(allowed_set))}"
        )
    raise ConfigError(
        f"Invalid value for {param_name}: '{value}'. "
        f"Allowed values: {', '.join(sorted(allowed_set))}"
    )


def validate_stage_list(value: Optional[str], param_name: str, stages: Iterable[int] = (1, 2, 3, 4)) -> Optional[List[int]]:
    """
    Validate a comma-separated subset of stage numbers (e.g. "1,2,4").
    An empty string means the empty set. Returns a sorted, de-duplicated list.
    """
    if value is None:
        return None
    allowed = sorted(set(stages))
    parts = [p.strip() for p in str(value).split(",") if p.strip()]
    chosen: List[int] = []
    invalid: List[str] = []
    for part in parts:
        try:
            number = int(part)
        except ValueError:
            invalid.append(f"'{part}'")
            continue
        if number not in allowed:
            invalid.append(f"'{part}'")
            continue
        if number not in chosen:
            chosen.append(number)
    if invalid:
        raise ConfigError(
            f"Invalid value(s) for {param_name}: {', '.join(invalid)}. "
            f"Allowed values: {', '.join(str(s) for s in allowed)}"
        )
    return sorted(chosen)


def validate_number_list(
    value: Optional[str],
    param_name: str,
    length: int,
    cast: Callable[[str], Union[int, float]] = int,
) -> Optional[List[Union[int, float]]]:
    """
    Validate a comma-separated list of exactly `length` numbers (e.g. "16,32"
    or "0.8,1.25"). Range checks are left to the config schema.
    """
    if value is None:
        return None
    parts = [p.strip() for p in str(value).split(",") if p.strip()]
    numbers: List[Union[int, float]] = []
    invalid: List[str] = []
    for part in parts:
        try:
            numbers.append(cast(part))
        except ValueError:
            invalid.append(f"'{part}'")
    if invalid:
        raise ConfigError(f"Invalid value(s) for {param_name}: {', '.join(invalid)}. Expected {cast.__name__} values.")
    if len(numbers) != length:
        raise ConfigError(f"{param_name} takes {length} comma-separated values, got {len(numbers)}: '{value}'")
    return numbers
