"""
File output helpers shared by the report, trajectory and plot writers.
"""

import json
import os
from pathlib import Path

from utils.config import SIG_DIGITS


def fmt_number(value, digits=SIG_DIGITS):
    """Format a number with a fixed count of significant digits."""
    return f"{float(value):.{digits}g}"


def round_floats(obj, digits=SIG_DIGITS):
    """Recursively round floats in a JSON-ready structure to significant digits."""
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, float):
        return float(fmt_number(obj, digits))
    if isinstance(obj, dict):
        return {k: round_floats(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v, digits) for v in obj]
    return obj


def atomic_write_text(path, text):
    """Write text to a sibling temp file and rename it over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as f:
        f.write(text)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)
    return path


def atomic_write_json(path, payload):
    text = json.dumps(round_floats(payload), indent=2, sort_keys=True, allow_nan=False)
    return atomic_write_text(path, text + "\n")
