"""Deterministic CSV/JSON emission.

Floats are written with 17 significant digits, lines end in LF, keys are
sorted.  Metadata never contains anything run-dependent (wall time goes to a
``.timing.json`` sidecar), so identical inputs give byte-identical files.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numba
import numpy as np

from . import __version__


def fmt(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def versions() -> dict:
    return {"quasispec": __version__, "numpy": np.__version__, "numba": numba.__version__}


def to_json(obj: Any, indent: int = 0) -> str:
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {to_json(obj[k], indent + 1)}" for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(to_json(v, indent + 1) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + to_json(v, indent + 1) for v in seq) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return format(x, ".17g") if math.isfinite(x) else "null"
    return json.dumps(str(obj))


def write_json(path: str | Path, obj: Any) -> None:
    Path(path).write_text(to_json(obj) + "\n", encoding="utf-8", newline="\n")


def csv_text(meta: dict, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    lines = ["# " + json.dumps(meta, sort_keys=True, default=str), ",".join(columns)]
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, (bool, np.bool_)):
                cells.append("1" if v else "0")
            elif isinstance(v, (int, np.integer)):
                cells.append(str(int(v)))
            elif isinstance(v, (float, np.floating)):
                cells.append(fmt(v))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_csv(path: str | Path, meta: dict, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    Path(path).write_text(csv_text(meta, columns, rows), encoding="utf-8", newline="\n")


def read_csv(path: str | Path) -> tuple[dict, list[str], np.ndarray]:
    """Inverse of :func:`write_csv` for all-numeric tables."""
    lines = Path(path).read_text().splitlines()
    meta = json.loads(lines[0][2:]) if lines and lines[0].startswith("# ") else {}
    body = lines[1:] if meta else lines
    columns = body[0].split(",")
    data = np.array([[float(c) for c in ln.split(",")] for ln in body[1:]]) if len(body) > 1 else np.zeros((0, len(columns)))
    return meta, columns, data
