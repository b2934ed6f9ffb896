"""Shared numeric text formatting for CSV and CLI output."""

from __future__ import annotations


def format_sig(x: float, digits: int = 6) -> str:
    """Significant-digit formatting with '.' decimals, no exponent noise
    for ordinary magnitudes."""
    if digits <= 0:
        return repr(float(x))
    return f"{float(x):.{digits}g}"
