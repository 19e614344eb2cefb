"""Persistence: binary field snapshots and commented CSV tables.

Snapshot layout (little endian)::

    offset  size          content
    0       4             magic b"BSQ2"
    4       4             format version (uint32)
    8       8             nx, ny (uint32 each)
    16      32            Lx, Ly, epsilon, t (float64 each)
    48      24 nx ny      eta, v1, v2 as row-major float64 (nx, ny) arrays

so a file holds exactly ``48 + 24 nx ny`` bytes.  CSV files start with
``# key: value`` lines carrying the resolved configuration and the code
version, followed by a header row.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .diagonal import PhysicalState
from .spectral import Grid2D

__all__ = [
    "MAGIC",
    "FORMAT_VERSION",
    "HEADER",
    "SnapshotError",
    "Snapshot",
    "snapshot_size",
    "write_snapshot",
    "read_snapshot",
    "write_csv",
    "read_csv",
]

MAGIC = b"BSQ2"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sIII4d")


class SnapshotError(IOError):
    """Malformed snapshot file."""


@dataclass
class Snapshot:
    """Contents of a snapshot file.  ``arrays`` holds ``eta, v1, v2`` on the
    grid exactly as stored; ``state`` is their spectral representation."""

    arrays: np.ndarray
    Lx: float
    Ly: float
    epsilon: float
    time: float

    @property
    def grid(self) -> Grid2D:
        nx, ny = self.arrays.shape[1:]
        return Grid2D(nx, ny, self.Lx, self.Ly)

    @property
    def state(self) -> PhysicalState:
        return PhysicalState.from_physical(*self.arrays, self.grid)

    def save(self, path: Union[str, Path]) -> Path:
        """Write the stored arrays back unchanged."""
        return _write(path, self.grid, self.arrays, self.epsilon, self.time)


def snapshot_size(nx: int, ny: int) -> int:
    return HEADER.size + 3 * 8 * nx * ny


def _write(path, g: Grid2D, arrays, epsilon: float, time: float) -> Path:
    path = Path(path)
    head = HEADER.pack(MAGIC, FORMAT_VERSION, g.nx, g.ny, g.Lx, g.Ly, float(epsilon), float(time))
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays)
    path.write_bytes(head + body)
    return path


def write_snapshot(path: Union[str, Path], state: PhysicalState, epsilon: float, time: float) -> Path:
    """Write the real parts of ``(eta, v1, v2)`` on the grid."""
    return _write(path, state.grid, [a.real for a in state.to_physical()], epsilon, time)


def read_snapshot(path: Union[str, Path]) -> Snapshot:
    data = Path(path).read_bytes()
    if len(data) < HEADER.size:
        raise SnapshotError(f"{path}: shorter than the header")
    magic, version, nx, ny, Lx, Ly, eps, t = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise SnapshotError(f"{path}: unsupported format version {version}")
    if len(data) != snapshot_size(nx, ny):
        raise SnapshotError(f"{path}: expected {snapshot_size(nx, ny)} bytes, found {len(data)}")
    arrays = np.frombuffer(data, dtype="<f8", offset=HEADER.size).reshape(3, nx, ny).astype(float)
    return Snapshot(arrays, Lx, Ly, eps, t)


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return "" if value is None else str(value)


def write_csv(
    path: Union[str, Path],
    columns: Sequence[str],
    rows: Iterable[Union[Sequence, Mapping]],
    meta: Optional[Mapping[str, str]] = None,
) -> Path:
    """Write rows with ``# key: value`` comment lines in front.  Floats are
    written with ``repr`` so reruns give byte-identical files."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        for key, value in (meta or {}).items():
            fh.write(f"# {key}: {value}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            vals = [row.get(c) for c in columns] if isinstance(row, Mapping) else list(row)
            w.writerow([_fmt(v) for v in vals])
    return path


def read_csv(path: Union[str, Path]) -> tuple[dict[str, str], list[dict[str, str]]]:
    """Comment metadata and rows of a file written by :func:`write_csv`."""
    meta: dict[str, str] = {}
    lines = Path(path).read_text().splitlines()
    body = []
    for line in lines:
        if line.startswith("# ") and not body:
            key, _, value = line[2:].partition(": ")
            meta[key] = value
        else:
            body.append(line)
    reader = csv.DictReader(body)
    return meta, list(reader)
