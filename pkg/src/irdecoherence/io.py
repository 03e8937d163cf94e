"""CSV/JSON serialization with round-trip precision and atomic writes."""
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np


def fmt(x):
    """17 significant digits: enough to round-trip any double."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def csv_text(columns):
    """Render an ordered mapping ``name -> 1-d array`` as CSV text."""
    names = list(columns)
    cols = [np.asarray(columns[n], dtype=float) for n in names]
    n = len(cols[0]) if cols else 0
    if any(len(c) != n for c in cols):
        raise ValueError("all CSV columns must have equal length")
    lines = [",".join(names)]
    for i in range(n):
        lines.append(",".join(fmt(c[i]) for c in cols))
    return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def json_text(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class ArtifactWriter:
    """Collects artifacts in memory; :meth:`commit` writes them all at once."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self._pending = {}

    def add_text(self, name, text):
        if name in self._pending:
            raise ValueError(f"artifact {name!r} added twice")
        self._pending[name] = text

    def add_csv(self, name, columns):
        self.add_text(name, csv_text(columns))

    def add_json(self, name, obj):
        self.add_text(name, json_text(obj))

    @property
    def names(self):
        return list(self._pending)

    def commit(self):
        written = []
        for name, text in self._pending.items():
            path = self.out_dir / name
            atomic_write(path, text)
            written.append(path)
        self._pending.clear()
        return written
