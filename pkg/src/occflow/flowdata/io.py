"""Canonical on-disk dataset layout.

``<root>/manifest.json`` plus ``<root>/<class>/<day>/<index>.flow``; each
``.flow`` file is ``b"FLOW"``, u32 version, u32 height, u32 width, then
``2 * height * width`` little-endian float32 values (horizontal grid, then
vertical grid).
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from ..errors import IngestionError

FLOW_MAGIC = b"FLOW"
FLOW_VERSION = 1
GRID = 64
CLASSES = ("stable", "unstable")
MANIFEST = "manifest.json"
_HEADER = struct.Struct("<4sIII")


def day_dirname(day: int) -> str:
    return f"{day:+d}"


def frame_path(root, cls: str, day: int, index: int) -> Path:
    return Path(root) / cls / day_dirname(day) / f"{index:06d}.flow"


def encode_flow(horizontal, vertical) -> bytes:
    h = np.asarray(horizontal, dtype="<f4")
    v = np.asarray(vertical, dtype="<f4")
    if h.shape != (GRID, GRID) or v.shape != (GRID, GRID):
        raise ValueError(f"flow grids must be {GRID}x{GRID}, got {h.shape} and {v.shape}")
    return _HEADER.pack(FLOW_MAGIC, FLOW_VERSION, GRID, GRID) + h.tobytes() + v.tobytes()


def write_flow(path, horizontal, vertical) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_flow(horizontal, vertical))


def read_flow(path) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(horizontal, vertical)`` as float64 grids."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise IngestionError(path, "file too short for a FLOW header")
    magic, version, height, width = _HEADER.unpack_from(raw)
    if magic != FLOW_MAGIC:
        raise IngestionError(path, f"bad magic {magic!r}")
    if version != FLOW_VERSION:
        raise IngestionError(path, f"unsupported FLOW version {version}")
    if (height, width) != (GRID, GRID):
        raise IngestionError(path, f"grid is {height}x{width}, expected {GRID}x{GRID}")
    expected = _HEADER.size + 2 * GRID * GRID * 4
    if len(raw) != expected:
        raise IngestionError(path, f"payload is {len(raw)} bytes, expected {expected}")
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).astype(np.float64)
    data = data.reshape(2, GRID, GRID)
    if not np.all(np.isfinite(data)):
        raise IngestionError(path, "non-finite flow values")
    return data[0], data[1]


def write_manifest(root, manifest: dict) -> None:
    path = Path(root) / MANIFEST
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def read_manifest(root) -> dict:
    path = Path(root) / MANIFEST
    if not path.exists():
        raise IngestionError(path, "missing manifest")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise IngestionError(path, f"invalid JSON ({exc})") from exc


def scan_frames(root) -> dict:
    """Map ``(class, day)`` to the sorted frame indices present on disk."""
    root = Path(root)
    found = {}
    for cls in CLASSES:
        cls_dir = root / cls
        if not cls_dir.is_dir():
            continue
        for day_dir in sorted(cls_dir.iterdir()):
            if not day_dir.is_dir():
                continue
            try:
                day = int(day_dir.name)
            except ValueError as exc:
                raise IngestionError(day_dir, "day directory must be a signed integer") from exc
            if day == 0:
                raise IngestionError(day_dir, "day 0 is the removal instant and holds no samples")
            indices = []
            for f in day_dir.glob("*.flow"):
                try:
                    indices.append(int(f.stem))
                except ValueError as exc:
                    raise IngestionError(f, "frame file name must be an integer index") from exc
            found[(cls, day)] = sorted(indices)
    return found


def directory_digest(root) -> str:
    """sha256 over every file (relative path + bytes), in sorted order."""
    root = Path(root)
    h = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        h.update(str(path.relative_to(root)).encode())
        h.update(path.read_bytes())
    return h.hexdigest()
