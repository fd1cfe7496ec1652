"""Report envelopes, atomic file output, schema validation and text summaries."""

from __future__ import annotations

import json
import math
import os
import tempfile
import time
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode())


def to_jsonable(obj: Any) -> Any:
    """Convert numpy scalars/arrays, tuples and non-finite floats into plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    return obj


def envelope(command: str, params: dict, payload: dict, passed: Optional[bool],
             measure_hash: Optional[str], wall_time: float) -> dict:
    return {
        "tool": "gmtlab",
        "version": __version__,
        "command": command,
        "params": to_jsonable(params),
        "measure_sha256": measure_hash,
        "wall_time_s": wall_time,
        "passed": passed,
        "result": to_jsonable(payload),
    }


def load_schema(name: str) -> dict:
    text = resources.files("gmtlab").joinpath("schemas", f"{name}.json").read_text()
    return json.loads(text)


def validate_report(report: dict) -> None:
    import jsonschema

    jsonschema.validate(report, load_schema("report"))


def text_summary(report: dict) -> str:
    lines = [f"gmtlab {report['version']}  {report['command']}"]
    verdict = {True: "PASS", False: "FAIL", None: "DONE"}[report["passed"]]
    lines.append(f"{'verdict':<24}{verdict}")
    lines.append(f"{'wall time (s)':<24}{report['wall_time_s']:.3f}")
    if report.get("measure_sha256"):
        lines.append(f"{'measure sha256':<24}{report['measure_sha256'][:16]}")

    def walk(prefix, obj):
        if isinstance(obj, dict):
            for k, v in obj.items():
                walk(f"{prefix}{k}.", v)
        elif isinstance(obj, list) and len(obj) > 8:
            lines.append(f"{prefix[:-1]:<24}[{len(obj)} entries]")
        else:
            lines.append(f"{prefix[:-1]:<24}{obj}")

    walk("", report["result"])
    return "\n".join(lines) + "\n"


def write_report(report: dict, out: Optional[str]) -> None:
    validate_report(report)
    if out:
        base = Path(out)
        atomic_write_text(base, json.dumps(report, indent=2, sort_keys=True) + "\n")
        atomic_write_text(base.with_suffix(".txt"), text_summary(report))


class Stopwatch:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        return False
