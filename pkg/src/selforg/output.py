"""CSV/JSON writers with atomic replacement and a completion manifest."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
import time

import numpy as np

FLOAT_FORMAT = "%.17g"


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT % value
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return "" if value is None else str(value)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if hasattr(obj, "value") and not isinstance(obj, (str, bytes)):
        return obj.value
    return obj


def write_atomic(path, text):
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return write_atomic(path, buf.getvalue())


def write_json(path, data):
    return write_atomic(path, json.dumps(_jsonable(data), indent=2, allow_nan=False) + "\n")


def read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader]
    return header, rows


def trajectory_rows(traj):
    n = traj.samples[0].positions.shape[0]
    header = ["time"]
    for i in range(n):
        header += [f"x{i}", f"y{i}", f"px{i}", f"py{i}", f"re_sigma{i}", f"im_sigma{i}"]
    rows = []
    for s in traj.samples:
        sig = np.zeros(n, complex) if s.coherences is None else s.coherences
        per_atom = np.column_stack([s.positions, s.momenta, sig.real, sig.imag]).ravel()
        rows.append([s.time, *per_atom])
    return header, rows


def read_trajectory(path):
    """Times, positions (T x N x 2), momenta and coherences from a trajectory CSV."""
    header, rows = read_csv(path)
    data = np.array(rows, dtype=float)
    n = (len(header) - 1) // 6
    per = data[:, 1:].reshape(len(rows), n, 6)
    return data[:, 0], per[:, :, 0:2], per[:, :, 2:4], per[:, :, 4] + 1j * per[:, :, 5]


class Manifest:
    """Tracks the files of one run; ``complete`` is written only on success."""

    def __init__(self, directory, command, config=None):
        self.directory = directory
        self.path = os.path.join(directory, "manifest.json")
        self.data = {"command": command, "status": "running", "started": time.time(),
                     "files": [], "config": config}
        write_json(self.path, self.data)

    def file(self, name):
        self.data["files"].append(name)
        return os.path.join(self.directory, name)

    def finish(self, status="complete", **extra):
        self.data.update(status=status, finished=time.time(), **extra)
        write_json(self.path, self.data)
