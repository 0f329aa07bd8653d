"""Readers for the solver's external file formats.

These parse the documented CSV dialect ('#' key=value metadata lines, then a
header row) and the binary checkpoint layout. They are intentionally
independent of the solver package: the file formats are the interface.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"CHFVCKPT"
_HEADER = "<II3Q6d"


class SchemaError(ValueError):
    """Input file does not match the expected schema."""


@dataclass
class Table:
    metadata: dict[str, str]
    columns: dict[str, np.ndarray]
    raw: dict[str, list[str]]

    def require(self, *names: str) -> None:
        for name in names:
            if name not in self.raw:
                raise SchemaError(f"missing column {name!r}")


def read_table(path) -> Table:
    metadata: dict[str, str] = {}
    header: list[str] = []
    cells: list[list[str]] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, value = body.split("=", 1)
                    metadata[key.strip()] = value.strip()
                continue
            if not header:
                header = [h.strip() for h in line.split(",")]
                continue
            cells.append(line.split(","))
    if not header:
        raise SchemaError(f"{path}: no header row")
    raw = {name: [row[i] if i < len(row) else "" for row in cells]
           for i, name in enumerate(header)}
    columns = {}
    for name, values in raw.items():
        try:
            columns[name] = np.array([float(v) for v in values])
        except ValueError:
            pass  # non-numeric column (direction, converged)
    return Table(metadata, columns, raw)


@dataclass
class Checkpoint:
    mode: int
    values: np.ndarray  # (l,) for mode 1, (n, m, l) for mode 3
    params: dict[str, float]
    time: float

    @property
    def grid_shape(self):
        return self.values.shape


def read_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as handle:
        raw = handle.read()
    header_size = len(MAGIC) + struct.calcsize(_HEADER)
    if len(raw) < header_size or raw[: len(MAGIC)] != MAGIC:
        raise SchemaError(f"{path}: not a field checkpoint")
    version, mode, n, m, l, v0, sigma, alpha, d_phi, rho, time = struct.unpack(
        _HEADER, raw[len(MAGIC):header_size])
    if version != 1 or mode not in (1, 3):
        raise SchemaError(f"{path}: unsupported checkpoint (version {version}, mode {mode})")
    count = l if mode == 1 else n * m * l
    if len(raw) != header_size + 8 * count:
        raise SchemaError(f"{path}: truncated checkpoint payload")
    values = np.frombuffer(raw, dtype="<f8", offset=header_size, count=count)
    if mode == 3:
        values = values.reshape(int(n), int(m), int(l))
    params = {"v0": v0, "sigma": sigma, "alpha": alpha, "d_phi": d_phi, "rho": rho}
    return Checkpoint(mode, values.astype(np.float64), params, float(time))
