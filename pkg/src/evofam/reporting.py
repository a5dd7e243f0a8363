"""Report serialization: canonical JSON, CSV tables, environment stamps.

Reports must be byte-identical across runs with the same config and seed
(timings excluded under --stable), so every writer here sorts keys,
fixes float formatting, and converts numpy scalars to plain Python.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import platform
import time
from pathlib import Path

import numpy as np


def to_jsonable(obj):
    """Recursively convert dataclasses, numpy and complex values to JSON types."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name))
                for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)          # "inf" / "nan" keep JSON valid
    return obj


def dump_json(obj, path) -> None:
    Path(path).write_text(
        json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n")


def config_hash(config: dict) -> str:
    canonical = json.dumps(to_jsonable(config), sort_keys=True,
                           separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def environment_stamp() -> dict:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "platform": platform.platform(),
    }


def write_csv(path, header: list[str], rows) -> None:
    def fmt(v):
        if isinstance(v, (float, np.floating)):
            return format(float(v), ".17g")
        if v is None:
            return ""
        return str(v)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


class StageTimer:
    """Wall-clock per stage; dropped from reports under --stable."""

    def __init__(self):
        self._t0 = time.perf_counter()
        self.stages: dict[str, float] = {}

    def mark(self, name: str) -> None:
        now = time.perf_counter()
        self.stages[name] = round(now - self._t0, 6)
        self._t0 = now
