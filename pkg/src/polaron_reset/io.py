"""CSV/JSON output helpers. CSV files are comma separated with ``#`` header lines."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, Mapping, Sequence

import numpy as np

from .switching import SwitchProfile

FLOAT_FMT = "%.17g"


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default, allow_nan=True)


def write_json(path: Path, obj: Any) -> Path:
    path = Path(path)
    try:
        path.write_text(dumps(obj) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def write_csv(path: Path, columns: Mapping[str, Sequence[float]], config: Dict[str, Any] | None = None,
              comments: Sequence[str] = ()) -> Path:
    """Write named numeric columns at full double precision.

    Column names carry their unit, e.g. ``t_ns``. The resolved configuration is
    embedded as a single ``# config: {...}`` line.
    """
    path = Path(path)
    names = list(columns)
    data = np.column_stack([np.asarray(columns[n], dtype=float) for n in names])
    header = list(comments)
    if config is not None:
        header.append("config: " + json.dumps(config, sort_keys=True, default=_json_default))
    header.append(",".join(names))
    try:
        np.savetxt(path, data, fmt=FLOAT_FMT, delimiter=",", header="\n".join(header), comments="# ")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path: Path) -> Dict[str, np.ndarray]:
    """Read a file written by :func:`write_csv` into named columns."""
    path = Path(path)
    names = None
    with path.open() as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            body = line[1:].strip()
            if body and not body.startswith("config:") and "," in body:
                names = body.split(",")
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if names is None or len(names) != data.shape[1]:
        raise ValueError(f"{path}: missing or malformed column header")
    return {n: data[:, i] for i, n in enumerate(names)}


def read_config_line(path: Path) -> Dict[str, Any]:
    with Path(path).open() as fh:
        for line in fh:
            if line.startswith("# config: "):
                return json.loads(line[len("# config: "):])
    raise ValueError(f"{path}: no embedded config")


def load_schedule(path: Path) -> SwitchProfile:
    """Tabulated profile from a control schedule CSV (columns ``t_ns``, ``u``).

    Rows are step-midpoint samples of a piecewise-constant control, so the
    step is twice the first sample time.
    """
    cols = read_csv(path)
    t, u = cols["t_ns"], cols["u"]
    if t.size < 2:
        raise ValueError("schedule needs at least two rows")
    dt = 2.0 * float(t[0])
    if not np.allclose(np.diff(t), dt, rtol=1e-9, atol=0):
        raise ValueError("schedule rows must be uniformly spaced step midpoints")
    return SwitchProfile.from_controls(u, dt)
