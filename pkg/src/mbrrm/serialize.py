"""Deterministic text output: stable key order, 12 significant digits."""

from __future__ import annotations

import json
import math
from typing import Any

import numpy as np


def fmt_float(value: float) -> str:
    return format(float(value), ".12g")


def _round(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _round(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            return None
        return float(fmt_float(obj))
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(_round(obj), indent=2) + "\n"
