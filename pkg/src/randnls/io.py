"""Atomic file output and the on-disk containers."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import BasisMismatchError
from .propagation import TimeGrid, Trajectory
from .spectral import basis_from_arrays, basis_to_arrays

FIELD_FORMAT = "randnls-field/1"
TRAJECTORY_FORMAT = "randnls-trajectory/1"


def atomic_write_bytes(path, data):
    """Write to a temporary sibling, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode("utf-8"))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps_json(obj):
    """Sorted-key JSON; floats use Python's shortest round-trip repr."""
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj):
    atomic_write_text(path, dumps_json(obj))


def write_csv(path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    atomic_write_text(path, buf.getvalue())


def _save_npz(path, arrays, meta):
    buf = io.BytesIO()
    np.savez(buf, meta=np.array(json.dumps(_jsonable(meta), sort_keys=True)), **arrays)
    atomic_write_bytes(path, buf.getvalue())


def _load_npz(path):
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        arrays = {k: data[k] for k in data.files if k != "meta"}
    return arrays, meta


def save_basis(basis, path):
    arrays, meta = basis_to_arrays(basis)
    _save_npz(path, arrays, meta)


def load_basis(path):
    arrays, meta = _load_npz(path)
    return basis_from_arrays(arrays, meta)


def save_field(path, coefficients, basis_id, lineage=None):
    meta = {"format": FIELD_FORMAT, "basis_id": basis_id, "lineage": lineage or {}}
    _save_npz(path, {"coefficients": np.asarray(coefficients, dtype=complex)}, meta)


def load_field(path):
    arrays, meta = _load_npz(path)
    if meta.get("format") != FIELD_FORMAT:
        raise ValueError(f"{path} is not a field container")
    return arrays["coefficients"], meta


def save_trajectory(path, traj):
    meta = {
        "format": TRAJECTORY_FORMAT,
        "basis_id": traj.basis.basis_id,
        "times": traj.times.to_dict(),
    }
    _save_npz(path, {"coefficients": traj.coefficients}, meta)


def load_trajectory(path, basis):
    arrays, meta = _load_npz(path)
    if meta.get("format") != TRAJECTORY_FORMAT:
        raise ValueError(f"{path} is not a trajectory container")
    if meta["basis_id"] != basis.basis_id:
        raise BasisMismatchError("trajectory was saved against a different basis")
    t = meta["times"]
    return Trajectory(TimeGrid(float(t["T"]), int(t["M"])), arrays["coefficients"], basis)
