"""CSV and JSON result files.

Floats are written with ``repr`` so every value reads back bit-for-bit.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from types import TracebackType
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, TextIO, Type

import numpy as np

from .config import SCHEMA_DIR, schema_errors
from .errors import StokesletSegmentsError
from .model import FloatArray

logger = logging.getLogger(__name__)

SUMMARY_SCHEMA_PATH = SCHEMA_DIR / "summary.schema.yaml"

TRAJECTORY_COLUMNS = (
    ["step", "time", "node", "x", "y", "z", "fx", "fy", "fz"]
    + [f"d{i}{axis}" for i in (1, 2, 3) for axis in "xyz"]
)
LEAK_COLUMNS = [
    "method", "nodes", "eps", "eps_over_h", "leak", "scaled_leak", "empirical_fit",
    "endpoint_error", "midpoint_error", "condition",
]
DRAG_COLUMNS = ["eps", "drag", "slender_body_drag", "relative_error", "condition"]


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """One snapshot: node positions, optional force densities and optional frames (rows D1, D2, D3)."""

    step: int
    time: float
    nodes: FloatArray
    forces: Optional[FloatArray] = None
    frames: Optional[FloatArray] = None


def _format(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _record_rows(record: TrajectoryRecord) -> Iterable[List[str]]:
    for k, node in enumerate(record.nodes):
        row = [_format(record.step), _format(record.time), _format(k)]
        row += [_format(v) for v in node]
        row += [_format(v) for v in record.forces[k]] if record.forces is not None else [""] * 3
        row += [_format(v) for v in record.frames[k].reshape(-1)] if record.frames is not None else [""] * 9
        yield row


class TrajectoryWriter:
    """Streams snapshots to ``trajectory.csv`` as the simulation runs."""

    def __init__(self, path: Path) -> None:
        self.path = Path(path)
        self._handle: Optional[TextIO] = None
        self._writer: Any = None
        self.count = 0

    def __enter__(self) -> "TrajectoryWriter":
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._handle = self.path.open("w", encoding="utf-8", newline="")
        self._writer = csv.writer(self._handle)
        self._writer.writerow(TRAJECTORY_COLUMNS)
        return self

    def __exit__(
        self,
        exc_type: Optional[Type[BaseException]],
        exc: Optional[BaseException],
        tb: Optional[TracebackType],
    ) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None
        logger.info("Wrote %d snapshots to %s", self.count, self.path)

    def write(self, record: TrajectoryRecord) -> None:
        if self._writer is None:
            raise RuntimeError("TrajectoryWriter must be used as a context manager")
        self._writer.writerows(_record_rows(record))
        self.count += 1


def write_trajectory(path: Path, records: Iterable[TrajectoryRecord]) -> Path:
    with TrajectoryWriter(path) as writer:
        for record in records:
            writer.write(record)
    return Path(path)


def _optional_vector(row: Mapping[str, str], keys: Sequence[str]) -> Optional[List[float]]:
    if any(row[key] == "" for key in keys):
        return None
    return [float(row[key]) for key in keys]


def read_trajectory(path: Path) -> List[TrajectoryRecord]:
    """Group the rows of a trajectory file back into snapshots."""
    grouped: Dict[int, Dict[str, Any]] = {}
    frame_keys = TRAJECTORY_COLUMNS[9:]
    with Path(path).open("r", encoding="utf-8", newline="") as handle:
        for row in csv.DictReader(handle):
            step = int(row["step"])
            entry = grouped.setdefault(step, {"time": float(row["time"]), "nodes": [], "forces": [], "frames": []})
            entry["nodes"].append([float(row[key]) for key in ("x", "y", "z")])
            entry["forces"].append(_optional_vector(row, ("fx", "fy", "fz")))
            entry["frames"].append(_optional_vector(row, frame_keys))

    records = []
    for step in sorted(grouped):
        entry = grouped[step]
        forces = None if any(f is None for f in entry["forces"]) else np.array(entry["forces"])
        frames = None if any(f is None for f in entry["frames"]) else np.array(entry["frames"]).reshape(-1, 3, 3)
        records.append(TrajectoryRecord(step, entry["time"], np.array(entry["nodes"]), forces, frames))
    return records


def write_table(path: Path, columns: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> Path:
    """Write ``rows`` (mappings keyed by ``columns``) as CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format(row[column]) for column in columns])
            count += 1
    logger.info("Wrote %d rows to %s", count, path)
    return path


def read_table(path: Path) -> List[Dict[str, str]]:
    with Path(path).open("r", encoding="utf-8", newline="") as handle:
        return list(csv.DictReader(handle))


def _jsonable(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else None
    if isinstance(value, Path):
        return str(value)
    return value


def validate_summary(summary: Mapping[str, Any]) -> None:
    details = schema_errors(_jsonable(summary), SUMMARY_SCHEMA_PATH)
    if details:
        raise StokesletSegmentsError("Summary validation failed:\n" + "\n".join(details))


def write_summary(path: Path, summary: Mapping[str, Any]) -> Path:
    """Validate ``summary`` and write it as JSON; non-finite floats become ``null``."""
    document = _jsonable(summary)
    validate_summary(document)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info("Wrote summary to %s", path)
    return path


def read_summary(path: Path) -> Dict[str, Any]:
    return json.loads(Path(path).read_text(encoding="utf-8"))
