"""CSV and JSON writers with a fixed, round-trippable number format."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np


def fmt(value) -> str:
    """Integers and strings verbatim, floats with 17 significant digits."""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_csv(path: Path, header: list[str], rows: Iterable) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = [[float(v) for v in row] for row in r]
    return header, np.array(data, dtype=float).reshape(len(data), len(header))


def sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def plain(obj: Any) -> Any:
    """Convert numpy scalars and arrays to JSON-native types (recursively)."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def export_noise(params, count: int, out: Path, fmt: str = "csv") -> str:
    """Write uniform noise realizations ``0 .. count-1`` for audit.

    ``csv``: header ``realization,channel,e_1..e_2X``, one row per channel,
    entries ``1``/``-1``.  ``npz``: array ``bits`` of shape
    ``(count, n, ceil(2X/8))`` holding ``e == +1`` packed with
    ``numpy.packbits`` (big-endian bit order), plus ``n`` and ``two_x``.
    """
    from .apparatus import noise_block

    e = noise_block(params, 0, count)
    if fmt == "npz":
        name = "noise.npz"
        np.savez_compressed(out / name, bits=np.packbits(e > 0, axis=2), n=params.n, two_x=params.two_x)
    else:
        name = "noise.csv"
        write_csv(
            out / name,
            ["realization", "channel", *(f"e_{x + 1}" for x in range(params.two_x))],
            ((i, j + 1, *e[i, j]) for i in range(count) for j in range(params.n)),
        )
    return name


def read_noise_npz(path: Path) -> np.ndarray:
    with np.load(path) as data:
        bits = np.unpackbits(data["bits"], axis=2, count=int(data["two_x"]))
    return np.where(bits == 1, 1, -1).astype(np.int8)


@dataclass
class RunManifest:
    config: dict
    version: str
    wall_time: float
    summary: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)

    def to_json(self) -> str:
        # float repr is the shortest round-tripping form, so reading the text
        # back reproduces every number bit for bit
        return json.dumps(plain(asdict(self)), indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))

    def write(self, path: Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def read(cls, path: Path) -> "RunManifest":
        return cls.from_json(Path(path).read_text())
