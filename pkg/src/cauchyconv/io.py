"""CSV and JSON serialization with fixed numeric precision.

Floats are written with 17 significant digits, which round-trips every
IEEE double exactly, so write-then-read reproduces matrices bitwise.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .simulate import ReplicateMatrix

FLOAT_FMT = "{:.17g}"


class DatasetError(ValueError):
    pass


def fmt(x):
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return FLOAT_FMT.format(float(x))
    return str(x)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_plain(obj), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        # non-finite floats become null so the output stays strict JSON
        return float(obj) if math.isfinite(obj) else None
    return obj


def write_matrix(path, labels, values):
    write_csv(path, labels, np.asarray(values, float))


def read_matrix(path):
    """Read a labelled numeric CSV; returns ``(labels, values)``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetError(f"{path}: empty file")
    labels = [h.strip() for h in rows[0]]
    if len(set(labels)) != len(labels):
        raise DatasetError(f"{path}: duplicate column labels")
    data = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(labels):
            raise DatasetError(f"{path}: line {i} has {len(row)} cells, expected {len(labels)}")
        try:
            vals = [float(c) for c in row]
        except ValueError:
            raise DatasetError(f"{path}: line {i} has a missing or non-numeric cell") from None
        if not all(math.isfinite(v) for v in vals):
            raise DatasetError(f"{path}: line {i} has a non-finite value")
        data.append(vals)
    if not data:
        raise DatasetError(f"{path}: no data rows")
    return labels, np.array(data)


def write_sites(path, labels, sites):
    write_csv(path, ["label", "x", "y"], [(lab, float(x), float(y)) for lab, (x, y) in zip(labels, sites)])


def read_sites(path):
    """Read ``label,x,y`` rows; returns ``(labels, (d, 2) array)``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != ["label", "x", "y"]:
        raise DatasetError(f"{path}: sites file needs the header label,x,y")
    labels, xy = [], []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise DatasetError(f"{path}: line {i} must have 3 cells")
        try:
            xy.append((float(row[1]), float(row[2])))
        except ValueError:
            raise DatasetError(f"{path}: line {i} has non-numeric coordinates") from None
        labels.append(row[0].strip())
    if len(set(labels)) != len(labels):
        raise DatasetError(f"{path}: duplicate site labels")
    return labels, np.array(xy)


def load_dataset(obs_path, sites_path):
    """Observations aligned to sites by label; columns and labels must match bijectively."""
    col_labels, values = read_matrix(obs_path)
    site_labels, xy = read_sites(sites_path)
    if set(col_labels) != set(site_labels):
        missing = sorted(set(site_labels) - set(col_labels))
        extra = sorted(set(col_labels) - set(site_labels))
        raise DatasetError(f"observation columns do not match site labels (missing {missing}, unknown {extra})")
    order = [col_labels.index(lab) for lab in site_labels]
    return ReplicateMatrix(values[:, order], xy, "raw", labels=site_labels)


def save_replicates(directory, matrix, sidecar):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_matrix(directory / "replicates.csv", matrix.labels, matrix.values)
    write_sites(directory / "sites.csv", matrix.labels, matrix.sites)
    write_json(directory / "replicates.json", {"sites": {lab: list(map(float, s)) for lab, s in
                                                          zip(matrix.labels, matrix.sites)},
                                               "scale": matrix.scale, **sidecar})
