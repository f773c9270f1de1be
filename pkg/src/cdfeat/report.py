"""Deterministic text formatting shared by reports and model serialization."""

from __future__ import annotations

import math


def fmt_float(x: float) -> str:
    """Format a real with 17 significant digits; round-trips exactly."""
    if math.isnan(x) or math.isinf(x):
        raise ValueError("non-finite real cannot be formatted")
    return format(float(x), ".17g")
