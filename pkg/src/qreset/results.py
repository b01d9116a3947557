"""CSV + JSON result files named ``<experiment>_<timestamp>``."""

from __future__ import annotations

import json
import os
from datetime import datetime, timezone
from pathlib import Path

import numpy as np


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        # JSON has no inf/nan
        return value if np.isfinite(value) else str(value)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def timestamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S_%fZ")


def write_result(out_dir: str | os.PathLike, experiment: str, csv_text: str, summary: dict,
                 stamp: str | None = None) -> tuple[Path, Path]:
    """Write ``<experiment>_<stamp>.csv`` and ``.json``; returns both paths.

    The CSV holds only data, so identical runs give byte-identical files.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = f"{experiment.replace('-', '_')}_{stamp or timestamp()}"
    csv_path = out / f"{base}.csv"
    n = 1
    while csv_path.exists():
        csv_path = out / f"{base}-{n}.csv"
        n += 1
    json_path = csv_path.with_suffix(".json")
    csv_path.write_text(csv_text, encoding="utf-8")
    json_path.write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return csv_path, json_path
