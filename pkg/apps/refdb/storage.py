"""
On-disk layout of a reference database.

    <dir>/index.txt      one "id object_id weight" line per reference
    <dir>/ref_<id>.kp    little-endian uint32 keypoint count, then per
                         keypoint float32 row, col, scale and D descriptor
                         values
"""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from apps.geometry.camera import PixelCoord
from apps.matching.descriptors import Keypoint

from .database import RefDbParams, ReferenceDatabase

logger = logging.getLogger(__name__)

INDEX_FILE = 'index.txt'


class DatabaseFormatError(ValueError):
    """The database directory is missing files or holds malformed data."""


def keypoint_path(directory, ref_id):
    return Path(directory) / f"ref_{ref_id}.kp"


def write_keypoints(path, keypoints):
    lengths = {kp.length for kp in keypoints}
    if len(lengths) > 1:
        raise ValueError(f"Mixed descriptor lengths: {sorted(lengths)}")
    rows = np.array(
        [[kp.px.row, kp.px.col, kp.scale, *kp.descriptor] for kp in keypoints], dtype='<f4'
    )
    with open(path, 'wb') as fh:
        fh.write(np.array([len(keypoints)], dtype='<u4').tobytes())
        fh.write(rows.tobytes())


def read_keypoints(path):
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise DatabaseFormatError(f"{path}: truncated header")
    count = int(np.frombuffer(raw[:4], dtype='<u4')[0])
    if count == 0:
        return []
    if (len(raw) - 4) % 4:
        raise DatabaseFormatError(f"{path}: payload is not a whole number of float32 values")
    values = np.frombuffer(raw[4:], dtype='<f4')
    if values.size % count:
        raise DatabaseFormatError(f"{path}: {values.size} floats for {count} keypoints")
    width = values.size // count
    if width < 3:
        raise DatabaseFormatError(f"{path}: keypoint records too short")
    table = values.reshape(count, width).astype(np.float64)
    return [
        Keypoint(PixelCoord(int(round(r[0])), int(round(r[1]))), r[3:], float(r[2]))
        for r in table
    ]


def save_database(db: ReferenceDatabase, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = []
    for ref, weight in zip(db, db.weights):
        write_keypoints(keypoint_path(directory, ref.id), ref.keypoints)
        lines.append(f"{ref.id} {ref.object_id} {float(weight)!r}")
    (directory / INDEX_FILE).write_text('\n'.join(lines) + '\n')
    logger.info(f"Saved {len(db)} references to {directory}")
    return directory


def load_database(directory, params: RefDbParams | None = None) -> ReferenceDatabase:
    """
    Raises:
        DatabaseFormatError: on a missing index, gaps in the ids, unreadable
            keypoint files or stored weights that break the bounds
        InfeasibleBounds: if the configured weight bounds cannot hold for the stored size
    """
    directory = Path(directory)
    index = directory / INDEX_FILE
    if not index.is_file():
        raise DatabaseFormatError(f"No {INDEX_FILE} in {directory}")

    entries = []
    for lineno, line in enumerate(index.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 3:
            raise DatabaseFormatError(f"{index}:{lineno}: expected 'id object_id weight'")
        try:
            entries.append((int(parts[0]), parts[1], float(parts[2])))
        except ValueError as exc:
            raise DatabaseFormatError(f"{index}:{lineno}: {exc}") from exc

    db = ReferenceDatabase()
    for expected_id, (ref_id, object_id, _) in enumerate(entries, start=1):
        if ref_id != expected_id:
            raise DatabaseFormatError(f"{index}: expected id {expected_id}, found {ref_id}")
        path = keypoint_path(directory, ref_id)
        if not path.is_file():
            raise DatabaseFormatError(f"Missing keypoint file {path}")
        db.insert(object_id, read_keypoints(path))

    db.apply_params(params or RefDbParams())
    if entries:
        try:
            db.set_weights([weight for _, _, weight in entries])
        except ValueError as exc:
            raise DatabaseFormatError(f"{index}: {exc}") from exc
    logger.info(f"Loaded {len(db)} references from {directory}")
    return db
