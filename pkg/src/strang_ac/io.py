"""Energy logs, raw field dumps with JSON sidecars, and PGM snapshots."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .spectral import Field, PeriodicGrid

ENERGY_COLUMNS = ("step", "time", "standard_energy", "modified_energy", "max_abs", "mean")


def write_energy_csv(path, records):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ENERGY_COLUMNS)
        for r in records:
            writer.writerow(
                [r.step]
                + [f"{getattr(r, c):.17g}" for c in ENERGY_COLUMNS[1:]]
            )


def read_energy_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {c: np.array([float(r[c]) for r in rows]) for c in ENERGY_COLUMNS}


def write_field(stem, u: Field, **meta):
    """Write ``stem.bin`` (little-endian float64, row-major) and ``stem.json``."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    u.values.astype("<f8").tofile(stem.with_suffix(".bin"))
    sidecar = {"N": u.grid.n, "L": u.grid.length, "dim": u.grid.dim, **meta}
    stem.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))


def read_field(path) -> tuple[Field, dict]:
    """Read a dump given either the ``.bin`` file or its stem."""
    stem = Path(path)
    if stem.suffix in (".bin", ".json"):
        stem = stem.with_suffix("")
    meta = json.loads(stem.with_suffix(".json").read_text())
    grid = PeriodicGrid(meta["N"], meta["L"], meta["dim"])
    values = np.fromfile(stem.with_suffix(".bin"), dtype="<f8")
    return Field(grid, values), meta


def write_pgm(path, values: np.ndarray, u_max_display: float = 1.0):
    """8-bit binary PGM of a 2D array, mapping [-u_max, u_max] to [0, 255]."""
    values = np.asarray(values)
    if values.ndim == 1:
        values = values[None, :]
    scaled = (np.clip(values, -u_max_display, u_max_display) + u_max_display) / (2 * u_max_display)
    img = np.round(scaled * 255).astype(np.uint8)
    # Rows are printed top to bottom; put y = 0 at the bottom.
    img = np.flipud(img.T) if img.shape[0] > 1 else img
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(img.tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PGM supported")
    return np.frombuffer(parts[4][: w * h], dtype=np.uint8).reshape(h, w)
